#include "mapsat/mocktiles.hpp"

#include "mapsat/errors.hpp"
#include "mapsat/random.hpp"

#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>

namespace mapsat {

using json = nlohmann::json;

std::string_view to_string(LandClass c) noexcept
{
    switch (c) {
    case LandClass::background:
        return "background";
    case LandClass::water:
        return "water";
    case LandClass::green:
        return "green";
    case LandClass::road:
        return "road";
    case LandClass::building:
        return "building";
    }
    return "background";
}

std::array<std::uint8_t, 3> map_color(LandClass c) noexcept
{
    switch (c) {
    case LandClass::background:
        return {242, 239, 233};
    case LandClass::water:
        return {170, 211, 223};
    case LandClass::green:
        return {173, 209, 158};
    case LandClass::road:
        return {247, 250, 191};
    case LandClass::building:
        return {217, 208, 201};
    }
    return {242, 239, 233};
}

namespace {

constexpr std::uint64_t layout_tag = 0x4C41594F5554ULL; // "LAYOUT"
constexpr std::uint64_t sat_tag = 0x534154ULL;          // "SAT"

std::array<std::uint8_t, 3> sat_base(LandClass c) noexcept
{
    switch (c) {
    case LandClass::background:
        return {128, 116, 86};
    case LandClass::water:
        return {22, 38, 62};
    case LandClass::green:
        return {64, 96, 52};
    case LandClass::road:
        return {150, 150, 145};
    case LandClass::building:
        return {176, 160, 150};
    }
    return {128, 116, 86};
}

class LayoutPainter
{
public:
    explicit LayoutPainter(int size)
    : m_size(size),
      m_classes(static_cast<std::size_t>(size) * size, LandClass::background)
    {}

    LandClass &at(int x, int y)
    {
        return m_classes[static_cast<std::size_t>(y) * m_size + x];
    }

    std::size_t count(LandClass c) const
    {
        return static_cast<std::size_t>(
            std::count(m_classes.begin(), m_classes.end(), c));
    }

    void disc(double cx, double cy, double r, LandClass c)
    {
        int const x0 = std::max(0, static_cast<int>(std::floor(cx - r)));
        int const x1 = std::min(m_size - 1, static_cast<int>(std::ceil(cx + r)));
        int const y0 = std::max(0, static_cast<int>(std::floor(cy - r)));
        int const y1 = std::min(m_size - 1, static_cast<int>(std::ceil(cy + r)));
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                double const dx = x + 0.5 - cx;
                double const dy = y + 0.5 - cy;
                if (dx * dx + dy * dy <= r * r) {
                    at(x, y) = c;
                }
            }
        }
    }

    // Thick segment; never paints over water.
    void road(double ax, double ay, double bx, double by, double half_width)
    {
        double const vx = bx - ax;
        double const vy = by - ay;
        double const len2 = vx * vx + vy * vy;
        for (int y = 0; y < m_size; ++y) {
            for (int x = 0; x < m_size; ++x) {
                double const px = x + 0.5 - ax;
                double const py = y + 0.5 - ay;
                double const t = std::clamp((px * vx + py * vy) / len2, 0.0, 1.0);
                double const dx = px - t * vx;
                double const dy = py - t * vy;
                if (dx * dx + dy * dy <= half_width * half_width &&
                    at(x, y) != LandClass::water) {
                    at(x, y) = LandClass::road;
                }
            }
        }
    }

    // Axis-aligned rectangle on land only (not water, not road).
    void building(int x0, int y0, int w, int h)
    {
        for (int y = std::max(0, y0); y < std::min(m_size, y0 + h); ++y) {
            for (int x = std::max(0, x0); x < std::min(m_size, x0 + w); ++x) {
                auto &c = at(x, y);
                if (c == LandClass::background || c == LandClass::green) {
                    c = LandClass::building;
                }
            }
        }
    }

    std::vector<LandClass> take() { return std::move(m_classes); }

private:
    int m_size;
    std::vector<LandClass> m_classes;
};

// Point on the tile border, parameterised by u in [0, 4).
std::pair<double, double> border_point(double u, int size)
{
    double const s = size;
    double const f = u - std::floor(u);
    switch (static_cast<int>(u) % 4) {
    case 0:
        return {f * s, 0.0};
    case 1:
        return {s, f * s};
    case 2:
        return {(1.0 - f) * s, s};
    default:
        return {0.0, (1.0 - f) * s};
    }
}

} // namespace

TileLayout synth_layout(MockWorld const &w, TileCoord const &t)
{
    int const size = w.tile_size;
    Xoshiro256 rng{hash_words({w.seed, layout_tag, std::uint64_t(t.z()), t.x(), t.y()})};
    LayoutPainter paint{size};
    auto const total = static_cast<double>(size) * size;

    auto const &style = w.style;
    if (style.water_fraction >= 1.0) {
        for (int y = 0; y < size; ++y) {
            for (int x = 0; x < size; ++x) {
                paint.at(x, y) = LandClass::water;
            }
        }
        return {size, paint.take()};
    }

    auto const greens = rng.below(4);
    for (std::uint64_t i = 0; i < greens; ++i) {
        paint.disc(rng.uniform(0, size), rng.uniform(0, size),
                   rng.uniform(0.08, 0.28) * size, LandClass::green);
    }

    if (style.water_fraction > 0.0) {
        double const target =
            std::min(1.0, style.water_fraction * rng.uniform(0.5, 1.5));
        for (int i = 0; i < 64 && paint.count(LandClass::water) < target * total;
             ++i) {
            paint.disc(rng.uniform(0, size), rng.uniform(0, size),
                       rng.uniform(0.09, 0.38) * size, LandClass::water);
        }
    }

    auto const roads = static_cast<int>(
        std::floor(std::max(0.0, style.road_density) * 4.0 + rng.uniform()));
    for (int i = 0; i < roads; ++i) {
        double const u = rng.uniform(0.0, 4.0);
        double const v = u + rng.uniform(1.0, 3.0);
        auto const [ax, ay] = border_point(u, size);
        auto const [bx, by] = border_point(std::fmod(v, 4.0), size);
        paint.road(ax, ay, bx, by, rng.uniform(2.0, 4.5) * size / 256.0);
    }

    auto const buildings = static_cast<int>(
        std::floor(std::max(0.0, style.building_density) * 40.0 + rng.uniform()));
    for (int i = 0; i < buildings; ++i) {
        int const bw = static_cast<int>(rng.uniform(0.03, 0.11) * size) + 1;
        int const bh = static_cast<int>(rng.uniform(0.03, 0.11) * size) + 1;
        int const bx = static_cast<int>(rng.below(static_cast<std::uint64_t>(size)));
        int const by = static_cast<int>(rng.below(static_cast<std::uint64_t>(size)));
        paint.building(bx, by, bw, bh);
    }

    return {size, paint.take()};
}

RgbImage render_map(TileLayout const &layout)
{
    RgbImage img{layout.size, layout.size};
    for (int y = 0; y < layout.size; ++y) {
        for (int x = 0; x < layout.size; ++x) {
            auto const c = map_color(layout.at(x, y));
            std::copy(c.begin(), c.end(), img.at(x, y));
        }
    }
    return img;
}

RgbImage render_sat(TileLayout const &layout, std::uint64_t noise_seed)
{
    Xoshiro256 rng{noise_seed};
    RgbImage img{layout.size, layout.size};
    for (int y = 0; y < layout.size; ++y) {
        for (int x = 0; x < layout.size; ++x) {
            auto const base = sat_base(layout.at(x, y));
            auto const r = rng.next();
            // Shared luminance noise in [-10, 10] plus a per-channel tint in [-3, 3].
            int const shade = static_cast<int>(r % 21U) - 10;
            auto *px = img.at(x, y);
            for (int ch = 0; ch < 3; ++ch) {
                int const tint =
                    static_cast<int>((r >> (8U + 8U * static_cast<unsigned>(ch))) % 7U) - 3;
                px[ch] = static_cast<std::uint8_t>(
                    std::clamp(int{base[static_cast<std::size_t>(ch)]} + shade + tint,
                               0, 255));
            }
        }
    }
    return img;
}

std::vector<std::uint8_t> synth_tile(MockWorld const &w, MockSource source,
                                     TileCoord const &t)
{
    auto const layout = synth_layout(w, t);
    if (source == MockSource::map) {
        return encode_png(render_map(layout));
    }
    return encode_png(render_sat(
        layout, hash_words({w.seed, sat_tag, std::uint64_t(t.z()), t.x(), t.y()})));
}

// ---------------------------------------------------------------------------

struct MockTileServer::Impl
{
    httplib::Server server;
    std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();
};

MockTileServer::MockTileServer(MockWorld world)
: m_world(world), m_impl(std::make_unique<Impl>())
{
    install_routes();
}

MockTileServer::~MockTileServer() { stop(); }

void MockTileServer::install_routes()
{
    auto &svr = m_impl->server;

    svr.Get(R"(/([A-Za-z0-9_-]+)/(\d+)/(\d+)/(\d+)\.png)",
            [this](httplib::Request const &req, httplib::Response &res) {
                auto const source = req.matches[1].str();
                auto const tile_text = req.matches[2].str() + "/" +
                                       req.matches[3].str() + "/" +
                                       req.matches[4].str();
                auto const t_ms = std::chrono::duration<double, std::milli>(
                                      std::chrono::steady_clock::now() -
                                      m_impl->started)
                                      .count();

                std::optional<TileCoord> coord;
                try {
                    coord = TileCoord::parse(tile_text);
                } catch (Error const &) {
                }

                int status = 200;
                int latency_ms = 0;
                int retry_after_s = -1;
                bool corrupt = false;
                {
                    std::lock_guard lock{m_mutex};
                    for (auto const &key :
                         {source + "|" + tile_text, std::string{"*|"} + tile_text}) {
                        auto it = m_faults.find(key);
                        if (it == m_faults.end()) {
                            continue;
                        }
                        auto &f = it->second;
                        latency_ms = f.latency_ms;
                        if (f.next < f.statuses.size()) {
                            status = f.statuses[f.next];
                            retry_after_s = f.retry_after_s;
                            corrupt = f.corrupt;
                            if (!(f.repeat && f.next + 1 == f.statuses.size())) {
                                ++f.next;
                            }
                        }
                        break;
                    }
                    if ((source != "map" && source != "sat") || !coord) {
                        status = 404;
                    }
                    m_log.push_back({source, tile_text, status, t_ms});
                }

                if (latency_ms > 0) {
                    std::this_thread::sleep_for(std::chrono::milliseconds{latency_ms});
                }
                res.status = status;
                if (status == 200 && corrupt) {
                    res.set_content("this is not an image", "text/plain");
                } else if (status == 200) {
                    auto const bytes = synth_tile(
                        m_world, source == "map" ? MockSource::map : MockSource::sat,
                        *coord);
                    res.set_content(reinterpret_cast<char const *>(bytes.data()),
                                    bytes.size(), "image/png");
                } else {
                    if (retry_after_s >= 0) {
                        res.set_header("Retry-After", std::to_string(retry_after_s));
                    }
                    res.set_content("status " + std::to_string(status), "text/plain");
                }
            });

    svr.Post("/faults", [this](httplib::Request const &req, httplib::Response &res) {
        try {
            set_faults(json::parse(req.body));
            res.set_content(R"({"ok":true})", "application/json");
        } catch (std::exception const &e) {
            res.status = 400;
            res.set_content(json{{"error", e.what()}}.dump(), "application/json");
        }
    });

    svr.Delete("/faults", [this](httplib::Request const &, httplib::Response &res) {
        clear_faults();
        res.set_content(R"({"ok":true})", "application/json");
    });

    svr.Get("/log", [this](httplib::Request const &, httplib::Response &res) {
        json entries = json::array();
        for (auto const &e : request_log()) {
            entries.push_back(json{{"source", e.source},
                                   {"tile", e.tile},
                                   {"status", e.status},
                                   {"t_ms", e.t_ms}});
        }
        res.set_content(json{{"requests", entries}}.dump(), "application/json");
    });

    svr.Delete("/log", [this](httplib::Request const &, httplib::Response &res) {
        clear_log();
        res.set_content(R"({"ok":true})", "application/json");
    });
}

int MockTileServer::start(std::string const &host, int port)
{
    if (m_thread.joinable()) {
        throw Error{"mock tile server already running"};
    }
    auto &svr = m_impl->server;
    m_host = host;
    if (port == 0) {
        m_port = svr.bind_to_any_port(host);
    } else {
        m_port = svr.bind_to_port(host, port) ? port : -1;
    }
    if (m_port < 0) {
        throw Error{"cannot bind mock tile server to " + host + ":" +
                    std::to_string(port)};
    }
    m_thread = std::thread{[&svr] { svr.listen_after_bind(); }};
    svr.wait_until_ready();
    return m_port;
}

void MockTileServer::run(std::string const &host, int port)
{
    auto &svr = m_impl->server;
    m_host = host;
    m_port = port;
    if (!svr.listen(host, port)) {
        throw Error{"cannot listen on " + host + ":" + std::to_string(port)};
    }
}

void MockTileServer::stop()
{
    m_impl->server.stop();
    if (m_thread.joinable()) {
        m_thread.join();
    }
}

std::string MockTileServer::base_url() const
{
    return "http://" + m_host + ":" + std::to_string(m_port);
}

void MockTileServer::set_faults(json const &script)
{
    std::map<std::string, Fault> parsed;
    for (auto const &f : script.at("faults")) {
        auto const source = f.value("source", std::string{"*"});
        auto const tile = TileCoord::parse(f.at("tile").get<std::string>());
        Fault fault;
        fault.statuses = f.value("statuses", std::vector<int>{});
        fault.repeat = f.value("repeat", false);
        fault.latency_ms = f.value("latency_ms", 0);
        fault.retry_after_s = f.value("retry_after_s", -1);
        fault.corrupt = f.value("corrupt", false);
        parsed[source + "|" + tile.str()] = std::move(fault);
    }
    std::lock_guard lock{m_mutex};
    for (auto &[k, v] : parsed) {
        m_faults[k] = std::move(v);
    }
}

void MockTileServer::clear_faults()
{
    std::lock_guard lock{m_mutex};
    m_faults.clear();
}

std::vector<MockTileServer::LogEntry> MockTileServer::request_log() const
{
    std::lock_guard lock{m_mutex};
    return m_log;
}

void MockTileServer::clear_log()
{
    std::lock_guard lock{m_mutex};
    m_log.clear();
}

} // namespace mapsat
