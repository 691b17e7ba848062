#include "mapsat/fetch.hpp"

#include "mapsat/digest.hpp"
#include "mapsat/errors.hpp"
#include "mapsat/fsutil.hpp"
#include "mapsat/image.hpp"
#include "mapsat/random.hpp"

#include <httplib.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <map>
#include <memory>
#include <random>
#include <thread>

namespace mapsat {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::size_t count_occurrences(std::string const &s, std::string_view needle)
{
    std::size_t count = 0;
    for (auto pos = s.find(needle); pos != std::string::npos;
         pos = s.find(needle, pos + needle.size())) {
        ++count;
    }
    return count;
}

bool iequals(std::string_view a, std::string_view b)
{
    return std::equal(a.begin(), a.end(), b.begin(), b.end(), [](char x, char y) {
        return std::tolower(static_cast<unsigned char>(x)) ==
               std::tolower(static_cast<unsigned char>(y));
    });
}

void replace_once(std::string &s, std::string_view key, std::string const &value)
{
    auto const pos = s.find(key);
    s.replace(pos, key.size(), value);
}

} // namespace

TileSource::TileSource(std::string name, std::string url_template, Options options)
: m_name(std::move(name)), m_template(std::move(url_template)),
  m_options(std::move(options))
{
    if (m_name.empty()) {
        throw ValidationError{"tile source name must not be empty"};
    }
    for (auto const *key : {"{z}", "{x}", "{y}"}) {
        if (count_occurrences(m_template, key) != 1) {
            throw ValidationError{"url template of source '" + m_name +
                                  "' must contain " + key + " exactly once"};
        }
    }
    if (!(m_options.max_requests_per_second > 0.0) ||
        !std::isfinite(m_options.max_requests_per_second)) {
        throw ValidationError{"max_requests_per_second of source '" + m_name +
                              "' must be positive"};
    }
    if (m_options.max_retries < 0 || m_options.backoff_base_ms < 0 ||
        m_options.timeout_ms <= 0) {
        throw ValidationError{"retry/backoff/timeout settings of source '" +
                              m_name + "' are out of range"};
    }
    auto const has_ua =
        std::any_of(m_options.headers.begin(), m_options.headers.end(),
                    [](Header const &h) { return iequals(h.first, "User-Agent"); });
    if (!has_ua) {
        m_options.headers.emplace_back("User-Agent", default_user_agent);
    }
}

TileSource::TileSource(std::string name, std::string url_template)
: TileSource(std::move(name), std::move(url_template), Options{})
{}

std::string tile_url(TileSource const &s, TileCoord const &t)
{
    std::string url = s.url_template();
    replace_once(url, "{z}", std::to_string(t.z()));
    replace_once(url, "{x}", std::to_string(t.x()));
    replace_once(url, "{y}", std::to_string(t.y()));
    return url;
}

TileSource preset_source(std::string_view name, std::string_view mock_base_url)
{
    TileSource::Options polite;
    polite.max_requests_per_second = 2.0;
    polite.max_retries = 3;
    polite.backoff_base_ms = 500;

    if (name == "osm") {
        return {"osm", "https://tile.openstreetmap.org/{z}/{x}/{y}.png", polite};
    }
    if (name == "worldimagery") {
        return {"worldimagery",
                "https://server.arcgisonline.com/ArcGIS/rest/services/"
                "World_Imagery/MapServer/tile/{z}/{y}/{x}",
                polite};
    }
    if (name == "worldimagery-clarity") {
        return {"worldimagery-clarity",
                "https://clarity.maptiles.arcgis.com/arcgis/rest/services/"
                "World_Imagery/MapServer/tile/{z}/{y}/{x}",
                polite};
    }
    TileSource::Options local;
    local.max_requests_per_second = 1000.0;
    local.max_retries = 3;
    local.backoff_base_ms = 10;
    local.timeout_ms = 5000;
    if (name == "mock-map") {
        return {"mock-map", std::string{mock_base_url} + "/map/{z}/{x}/{y}.png",
                local};
    }
    if (name == "mock-sat") {
        return {"mock-sat", std::string{mock_base_url} + "/sat/{z}/{x}/{y}.png",
                local};
    }
    throw ConfigError{"unknown tile source preset '" + std::string{name} + "'"};
}

TileSource source_from_json(json const &j, std::string_view mock_base_url)
{
    if (j.is_string()) {
        return preset_source(j.get<std::string>(), mock_base_url);
    }
    if (!j.is_object()) {
        throw ConfigError{"tile source must be a preset name or an object"};
    }
    try {
        auto const name = j.at("name").get<std::string>();
        if (!j.contains("url_template")) {
            // Preset with field overrides.
            auto base = preset_source(name, mock_base_url);
            json merged = to_json(base);
            for (auto const &[k, v] : j.items()) {
                merged[k] = v;
            }
            merged["url_template"] = base.url_template();
            return source_from_json(merged, mock_base_url);
        }
        TileSource::Options opts;
        opts.max_requests_per_second =
            j.value("max_requests_per_second", opts.max_requests_per_second);
        opts.max_retries = j.value("max_retries", opts.max_retries);
        opts.backoff_base_ms = j.value("backoff_base_ms", opts.backoff_base_ms);
        opts.timeout_ms = j.value("timeout_ms", opts.timeout_ms);
        if (j.contains("headers")) {
            for (auto const &[k, v] : j["headers"].items()) {
                opts.headers.emplace_back(k, v.get<std::string>());
            }
        }
        return {name, j.at("url_template").get<std::string>(), std::move(opts)};
    } catch (json::exception const &e) {
        throw ConfigError{std::string{"invalid tile source: "} + e.what()};
    } catch (ValidationError const &e) {
        throw ConfigError{e.what()};
    }
}

json to_json(TileSource const &s)
{
    json headers = json::object();
    for (auto const &[k, v] : s.headers()) {
        headers[k] = v;
    }
    return json{{"name", s.name()},
                {"url_template", s.url_template()},
                {"headers", headers},
                {"max_requests_per_second", s.max_requests_per_second()},
                {"max_retries", s.max_retries()},
                {"backoff_base_ms", s.backoff_base_ms()},
                {"timeout_ms", s.timeout_ms()}};
}

// ---------------------------------------------------------------------------

TileCache::TileCache(fs::path root) : m_root(std::move(root)) {}

fs::path TileCache::resolve_root(fs::path const &fallback)
{
    if (char const *env = std::getenv("MAPSAT_CACHE_ROOT");
        env != nullptr && *env != '\0') {
        return fs::path{env};
    }
    return fallback;
}

fs::path TileCache::entry_path(std::string_view source, TileCoord const &t) const
{
    return m_root / std::string{source} / std::to_string(t.z()) /
           std::to_string(t.x()) / (std::to_string(t.y()) + ".png");
}

fs::path TileCache::sidecar_path(std::string_view source, TileCoord const &t) const
{
    auto p = entry_path(source, t);
    p += ".sha256";
    return p;
}

TileCache::Lookup TileCache::lookup(std::string_view source,
                                    TileCoord const &t) const
{
    auto data = read_file(entry_path(source, t));
    auto digest = read_text_file(sidecar_path(source, t));
    if (!data && !digest) {
        return {Status::miss, {}};
    }
    if (!data || !digest) {
        return {Status::corrupt, {}};
    }
    auto const recorded = digest->substr(0, digest->find_first_of(" \n"));
    if (recorded != sha256_hex(*data)) {
        return {Status::corrupt, {}};
    }
    try {
        (void)decode_image(*data);
    } catch (InvalidImageError const &) {
        return {Status::corrupt, {}};
    }
    return {Status::hit, std::move(*data)};
}

std::optional<std::vector<std::uint8_t>>
TileCache::load(std::string_view source, TileCoord const &t) const
{
    auto l = lookup(source, t);
    if (l.status != Status::hit) {
        return std::nullopt;
    }
    return std::move(l.bytes);
}

void TileCache::store(std::string_view source, TileCoord const &t,
                      std::span<std::uint8_t const> bytes) const
{
    write_file_atomic(entry_path(source, t), bytes);
    write_file_atomic(sidecar_path(source, t), sha256_hex(bytes) + "\n");
}

void TileCache::invalidate(std::string_view source, TileCoord const &t) const
{
    std::error_code ec;
    fs::remove(sidecar_path(source, t), ec);
    fs::remove(entry_path(source, t), ec);
}

// ---------------------------------------------------------------------------

TokenBucket::TokenBucket(double rate_per_second, double burst)
: m_rate(rate_per_second),
  m_interval(std::chrono::duration_cast<clock::duration>(
      std::chrono::duration<double>(1.0 / rate_per_second))),
  m_tolerance(std::chrono::duration_cast<clock::duration>(
      std::chrono::duration<double>((std::max(burst, 1.0) - 1.0) /
                                    rate_per_second))),
  m_theoretical_arrival(clock::time_point::min())
{
    if (!(rate_per_second > 0.0)) {
        throw ValidationError{"token bucket rate must be positive"};
    }
}

void TokenBucket::acquire()
{
    clock::time_point slot;
    {
        std::lock_guard lock{m_mutex};
        auto const now = clock::now();
        auto const tat = std::max(m_theoretical_arrival, now);
        slot = tat - m_tolerance;
        m_theoretical_arrival = tat + m_interval;
    }
    std::this_thread::sleep_until(slot);
}

// ---------------------------------------------------------------------------

json to_json(FetchReport const &r)
{
    json failed = json::array();
    for (auto const &f : r.failed) {
        failed.push_back(json{{"tile", f.coord.str()},
                              {"error_class", f.error_class},
                              {"message", f.message}});
    }
    return json{{"requested", r.requested},   {"downloaded", r.downloaded},
                {"cache_hits", r.cache_hits}, {"failed", failed},
                {"elapsed_ms", r.elapsed_ms}};
}

/// Keep-alive HTTP clients keyed by scheme://host:port. One per worker.
class TileFetcher::Session
{
public:
    explicit Session(TileSource const &source) : m_source(source) {}

    httplib::Result get(std::string const &url)
    {
        auto const scheme_end = url.find("://");
        auto const path_start =
            url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
        std::string const base =
            path_start == std::string::npos ? url : url.substr(0, path_start);
        std::string const path =
            path_start == std::string::npos ? "/" : url.substr(path_start);

        auto &client = m_clients[base];
        if (!client) {
            client = std::make_unique<httplib::Client>(base);
            auto const timeout = std::chrono::milliseconds{m_source.timeout_ms()};
            client->set_connection_timeout(timeout);
            client->set_read_timeout(timeout);
            client->set_write_timeout(timeout);
            client->set_follow_location(true);
            client->set_keep_alive(true);
        }
        httplib::Headers headers;
        for (auto const &[k, v] : m_source.headers()) {
            headers.emplace(k, v);
        }
        return client->Get(path, headers);
    }

private:
    TileSource const &m_source;
    std::map<std::string, std::unique_ptr<httplib::Client>> m_clients;
};

namespace {

std::uint64_t jitter_seed()
{
    std::random_device rd;
    return (std::uint64_t{rd()} << 32U) ^ rd();
}

std::chrono::milliseconds backoff_delay(int base_ms, int retry_index)
{
    thread_local Xoshiro256 rng{jitter_seed()};
    double const cap =
        static_cast<double>(base_ms) * std::ldexp(1.0, std::min(retry_index, 20));
    return std::chrono::milliseconds{
        static_cast<std::int64_t>(rng.uniform() * cap)};
}

std::optional<std::chrono::milliseconds>
retry_after(httplib::Response const &res)
{
    if (!res.has_header("Retry-After")) {
        return std::nullopt;
    }
    auto const value = res.get_header_value("Retry-After");
    char *end = nullptr;
    double const seconds = std::strtod(value.c_str(), &end);
    if (end == value.c_str() || !(seconds >= 0.0)) {
        return std::nullopt;
    }
    return std::chrono::milliseconds{
        static_cast<std::int64_t>(std::min(seconds, 300.0) * 1000.0)};
}

} // namespace

TileFetcher::TileFetcher(TileSource source, TileCache cache)
: m_source(std::move(source)), m_cache(std::move(cache)),
  m_bucket(m_source.max_requests_per_second())
{}

TileFetcher::~TileFetcher() = default;

FetchResult TileFetcher::fetch_with(Session &session, TileCoord const &t)
{
    auto cached = m_cache.lookup(m_source.name(), t);
    if (cached.status == TileCache::Status::hit) {
        return {std::move(cached.bytes), Origin::cache, 0};
    }
    if (cached.status == TileCache::Status::corrupt) {
        m_cache.invalidate(m_source.name(), t);
    }

    auto const url = tile_url(m_source, t);
    std::string last_error;
    int const max_attempts = m_source.max_retries() + 1;
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        m_bucket.acquire();
        m_attempts.fetch_add(1);
        auto res = session.get(url);

        std::optional<std::chrono::milliseconds> server_delay;
        if (!res) {
            last_error = "request failed: " + httplib::to_string(res.error());
        } else if (res->status >= 200 && res->status < 300) {
            std::vector<std::uint8_t> bytes(res->body.begin(), res->body.end());
            try {
                (void)decode_image(bytes);
            } catch (InvalidImageError const &e) {
                throw PermanentFetchError{url + ": response is not an image (" +
                                              e.what() + ")",
                                          res->status};
            }
            m_cache.store(m_source.name(), t, bytes);
            return {std::move(bytes), Origin::network, attempt + 1};
        } else if (res->status == 429 || res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            server_delay = retry_after(*res);
        } else {
            throw PermanentFetchError{url + ": HTTP " + std::to_string(res->status),
                                      res->status};
        }

        if (attempt + 1 < max_attempts) {
            std::this_thread::sleep_for(
                server_delay ? *server_delay
                             : backoff_delay(m_source.backoff_base_ms(), attempt));
        }
    }
    throw TransientFetchError{url + ": " + last_error + " after " +
                                  std::to_string(max_attempts) + " attempts",
                              max_attempts};
}

FetchResult TileFetcher::fetch_tile(TileCoord const &t)
{
    Session session{m_source};
    return fetch_with(session, t);
}

FetchReport TileFetcher::fetch_batch(std::span<TileCoord const> tiles,
                                     unsigned parallelism)
{
    if (parallelism == 0) {
        throw ValidationError{"parallelism must be at least 1"};
    }
    auto const start = std::chrono::steady_clock::now();

    struct Outcome
    {
        std::optional<Origin> origin;
        std::string error_class;
        std::string message;
    };
    std::vector<Outcome> outcomes(tiles.size());
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        Session session{m_source};
        for (auto i = next.fetch_add(1); i < tiles.size(); i = next.fetch_add(1)) {
            auto &out = outcomes[i];
            try {
                out.origin = fetch_with(session, tiles[i]).origin;
            } catch (PermanentFetchError const &e) {
                out.error_class = e.status() >= 200 && e.status() < 300
                                      ? "invalid-response"
                                      : "permanent";
                out.message = e.what();
            } catch (TransientFetchError const &e) {
                out.error_class = "transient";
                out.message = e.what();
            } catch (std::exception const &e) {
                out.error_class = "io";
                out.message = e.what();
            }
        }
    };

    auto const n_workers =
        std::max<std::size_t>(1, std::min<std::size_t>(parallelism, tiles.size()));
    {
        std::vector<std::jthread> pool;
        pool.reserve(n_workers);
        for (std::size_t i = 0; i < n_workers; ++i) {
            pool.emplace_back(worker);
        }
    }

    FetchReport report;
    report.requested = tiles.size();
    for (std::size_t i = 0; i < tiles.size(); ++i) {
        auto const &out = outcomes[i];
        if (!out.origin) {
            report.failed.push_back({tiles[i], out.error_class, out.message});
        } else if (*out.origin == Origin::cache) {
            ++report.cache_hits;
        } else {
            ++report.downloaded;
        }
    }
    report.elapsed_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::steady_clock::now() - start)
                            .count();
    return report;
}

FetchResult fetch_tile(TileSource const &s, TileCoord const &t,
                       TileCache const &cache)
{
    TileFetcher fetcher{s, cache};
    return fetcher.fetch_tile(t);
}

FetchReport fetch_batch(TileSource const &s, std::span<TileCoord const> tiles,
                        TileCache const &cache, unsigned parallelism)
{
    TileFetcher fetcher{s, cache};
    return fetcher.fetch_batch(tiles, parallelism);
}

} // namespace mapsat
