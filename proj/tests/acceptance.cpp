// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include "oracles.hpp"
#include "test_support.hpp"

#include "mapsat/cli.hpp"
#include "mapsat/dataset.hpp"
#include "mapsat/digest.hpp"
#include "mapsat/fetch.hpp"
#include "mapsat/fsutil.hpp"
#include "mapsat/geo.hpp"
#include "mapsat/mocktiles.hpp"
#include "mapsat/pipeline.hpp"
#include "mapsat/random.hpp"
#include "mapsat/region.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>

using namespace mapsat;
using testsupport::TempDir;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point start)
{
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome
{
    bool pass;
    std::string detail;
};

/// Collects failed sub-checks; the first few go into the detail line.
struct Checks
{
    std::vector<std::string> failures;

    void expect(bool ok, std::string const &what)
    {
        if (!ok) {
            failures.push_back(what);
        }
    }

    Outcome done(std::string const &summary) const
    {
        if (failures.empty()) {
            return {true, summary};
        }
        std::string d = summary;
        for (std::size_t i = 0; i < failures.size() && i < 5; ++i) {
            d += "; " + failures[i];
        }
        if (failures.size() > 5) {
            d += "; +" + std::to_string(failures.size() - 5) + " more";
        }
        return {false, d};
    }
};

int run(std::vector<std::string> args, std::string *out_text = nullptr,
        std::string *err_text = nullptr)
{
    std::ostringstream out;
    std::ostringstream err;
    int const code = run_cli(std::move(args), out, err);
    if (out_text) {
        *out_text = out.str();
    }
    if (err_text) {
        *err_text = err.str();
    }
    return code;
}

std::string geojson_polygon(std::string const &name, std::vector<Ring> const &rings)
{
    nlohmann::json coords = nlohmann::json::array();
    for (auto const &ring : rings) {
        nlohmann::json r = nlohmann::json::array();
        for (auto const &p : ring) {
            r.push_back({p.lon(), p.lat()});
        }
        r.push_back({ring.front().lon(), ring.front().lat()});
        coords.push_back(r);
    }
    nlohmann::json const f = {
        {"type", "FeatureCollection"},
        {"features",
         {{{"type", "Feature"},
           {"properties", {{"name", name}}},
           {"geometry", {{"type", "Polygon"}, {"coordinates", coords}}}}}}};
    return f.dump();
}

/// L-shaped synthetic region near Edinburgh, ~1,700 tiles at z17.
Region synthetic_region()
{
    Ring const outer = {{55.90, -3.30}, {55.90, -3.10}, {55.95, -3.10},
                        {55.95, -3.20}, {56.00, -3.20}, {56.00, -3.30}};
    return Region{"synthetic-l", {outer}};
}

// ---------------------------------------------------------------------------

Outcome tile_math()
{
    Checks c;
    auto const start = Clock::now();
    Xoshiro256 rng{20240601};
    int mismatches = 0;
    for (int i = 0; i < 1000; ++i) {
        double const lat = rng.uniform(-max_mercator_lat, max_mercator_lat);
        double const lon = rng.uniform(-180.0, 180.0);
        int const z = static_cast<int>(rng.below(18));
        auto const t = lonlat_to_tile(GeoPoint{lat, lon}, z);
        auto const [ox, oy] = oracle::slippy_tile(lat, lon, z);
        if (t.x() != ox || t.y() != oy) {
            ++mismatches;
            c.expect(false, "oracle mismatch at (" + std::to_string(lat) + ", " +
                                std::to_string(lon) + ", z" + std::to_string(z) + ")");
        }
    }
    int round_trip_errors = 0;
    for (int i = 0; i < 1000; ++i) {
        int const z = static_cast<int>(rng.below(18));
        auto const n = tiles_per_axis(z);
        TileCoord const t{z, static_cast<std::uint32_t>(rng.below(n)),
                          static_cast<std::uint32_t>(rng.below(n))};
        if (lonlat_to_tile(tile_center(t), z) != t) {
            ++round_trip_errors;
            c.expect(false, "round trip broke at " + t.str());
        }
    }
    double const elapsed = seconds_since(start);
    c.expect(elapsed < 1.0, "runtime " + std::to_string(elapsed) + " s >= 1 s");
    return c.done("1000 points, " + std::to_string(mismatches) + " oracle mismatches; 1000 tiles, " +
                  std::to_string(round_trip_errors) + " round-trip errors; " +
                  std::to_string(elapsed) + " s");
}

// ---------------------------------------------------------------------------

Ring star_ring(Xoshiro256 &rng, double clat, double clon, double r_min, double r_max,
               std::size_t vertices)
{
    std::vector<double> angles;
    for (std::size_t i = 0; i < vertices; ++i) {
        angles.push_back(rng.uniform(0.0, 2.0 * std::numbers::pi));
    }
    std::sort(angles.begin(), angles.end());
    Ring ring;
    for (double a : angles) {
        double const r = rng.uniform(r_min, r_max);
        ring.emplace_back(clat + r * std::sin(a), clon + r * std::cos(a));
    }
    return ring;
}

Outcome point_in_polygon()
{
    Checks c;
    auto const start = Clock::now();
    Xoshiro256 rng{777};
    int agree = 0;
    int total = 0;
    for (int k = 0; k < 20; ++k) {
        double const clat = rng.uniform(-60.0, 60.0);
        double const clon = rng.uniform(-170.0, 170.0);
        double const radius = rng.uniform(0.5, 8.0);
        std::vector<Ring> rings;
        std::string kind;
        switch (k % 3) {
        case 0: // convex: vertices on a circle
            kind = "convex";
            rings.push_back(star_ring(rng, clat, clon, radius, radius, 3 + rng.below(10)));
            break;
        case 1: // concave star
            kind = "concave";
            rings.push_back(star_ring(rng, clat, clon, 0.2 * radius, radius, 6 + rng.below(20)));
            break;
        default: // concave outer ring with two holes
            kind = "holes";
            rings.push_back(star_ring(rng, clat, clon, 0.8 * radius, radius, 8 + rng.below(12)));
            rings.push_back(star_ring(rng, clat + 0.3 * radius, clon, 0.05 * radius,
                                      0.25 * radius, 5 + rng.below(5)));
            rings.push_back(star_ring(rng, clat - 0.35 * radius, clon - 0.2 * radius,
                                      0.05 * radius, 0.2 * radius, 3 + rng.below(5)));
            break;
        }
        Region const region{kind + std::to_string(k), rings};
        std::vector<std::vector<oracle::Pt>> oracle_rings;
        for (auto const &r : rings) {
            std::vector<oracle::Pt> pts;
            for (auto const &p : r) {
                pts.push_back({p.lon(), p.lat()});
            }
            oracle_rings.push_back(pts);
        }
        for (int i = 0; i < 200; ++i) {
            double const lat = clat + rng.uniform(-1.1 * radius, 1.1 * radius);
            double const lon = clon + rng.uniform(-1.1 * radius, 1.1 * radius);
            bool const got = contains(region, GeoPoint{lat, lon});
            bool const want = oracle::point_in_rings(oracle_rings, {lon, lat});
            ++total;
            if (got == want) {
                ++agree;
            } else {
                c.expect(false, kind + " polygon " + std::to_string(k) + " disagrees at (" +
                                    std::to_string(lat) + ", " + std::to_string(lon) + ")");
            }
        }
    }
    double const elapsed = seconds_since(start);
    c.expect(elapsed < 1.0, "runtime " + std::to_string(elapsed) + " s >= 1 s");
    return c.done(std::to_string(agree) + "/" + std::to_string(total) + " agree; " +
                  std::to_string(elapsed) + " s");
}

// ---------------------------------------------------------------------------

// SHA-256 of format_coords() for the fixed SampleSpec below. Reproduced by a
// separate Python implementation of the generator, shuffle and enumeration,
// then frozen. Any platform must reproduce it byte for byte.
constexpr std::string_view golden_sample_digest =
    "690822652d165b91575ec1db4a5ff9afe8a42fbeafdc3fd3a62e5f77fe611071";

Outcome deterministic_sampling()
{
    Checks c;
    Ring const outer = {{55.80, -3.60}, {55.80, -3.00}, {56.10, -3.00}, {56.10, -3.60}};
    Ring const hole = {{55.90, -3.40}, {55.90, -3.20}, {56.00, -3.20}, {56.00, -3.40}};
    Region const region{"box-with-hole", {outer, hole}};
    SampleSpec const spec{region, 17, 2000, 42};

    // xoshiro256** reference output for seed 0 anchors the generator itself.
    Xoshiro256 ref{0};
    c.expect(ref.next() == 0x99ec5f36cb75f2b4ULL, "generator reference value differs");

    auto const a = sample_tiles(spec);
    auto const b = sample_tiles(spec);
    c.expect(a == b, "repeated runs differ");
    c.expect(format_coords(a) == format_coords(b), "coordinate text differs");
    c.expect(a.size() == 2000, "sample size " + std::to_string(a.size()));
    std::set<TileCoord> const distinct(a.begin(), a.end());
    c.expect(distinct.size() == a.size(), "duplicate tiles");
    std::size_t outside = 0;
    for (auto const &t : a) {
        outside += contains(region, tile_center(t)) ? 0 : 1;
    }
    c.expect(outside == 0, std::to_string(outside) + " centres outside the region");

    auto const digest = sha256_hex(format_coords(a));
    c.expect(digest == golden_sample_digest, "coords digest " + digest + " != frozen value");
    return c.done("2000 tiles, distinct, in-region, coords sha256 " + digest.substr(0, 16) + "...");
}

// ---------------------------------------------------------------------------

struct PipelineRun
{
    int sample = -1;
    int fetch = -1;
    int build = -1;
    int verify = -1;
    std::string manifest;
    std::string verify_out;
};

PipelineRun run_pipeline(TempDir const &dir, std::string const &region_file,
                         std::string const &base_url, std::string const &tag)
{
    std::vector<std::string> const flags = {
        "--region-file", region_file, "--zoom", "17", "-n", "500", "--seed", "2024",
        "--map-source", "mock-map", "--sat-source", "mock-sat", "--mock-url", base_url,
        "--cache-root", (dir / ("cache-" + tag)).string(),
        "--out-dir", (dir / ("out-" + tag)).string(), "--test-fraction", "0.2",
        "--parallelism", "8"};
    auto with = [&](std::string const &name) {
        std::vector<std::string> v{name};
        v.insert(v.end(), flags.begin(), flags.end());
        return v;
    };
    PipelineRun r;
    r.sample = run(with("sample"));
    r.fetch = run(with("fetch"));
    r.build = run(with("build"));
    auto const manifest = dir / ("out-" + tag) / "manifest.jsonl";
    r.verify = run({"verify", manifest.string()}, &r.verify_out);
    r.manifest = read_text_file(manifest).value_or("");
    return r;
}

Outcome end_to_end()
{
    Checks c;
    TempDir dir;
    MockTileServer server{MockWorld{1234, {}, 256}};
    server.start("127.0.0.1", 0);
    auto const region_file = dir / "synthetic.geojson";
    auto const region = synthetic_region();
    write_file_atomic(region_file, geojson_polygon(region.name(), region.rings()));

    auto const start = Clock::now();
    auto const first = run_pipeline(dir, region_file.string(), server.base_url(), "a");
    double const elapsed = seconds_since(start);
    auto const second = run_pipeline(dir, region_file.string(), server.base_url(), "b");
    server.stop();

    c.expect(first.sample == 0 && first.fetch == 0 && first.build == 0,
             "exit codes sample/fetch/build " + std::to_string(first.sample) + "/" +
                 std::to_string(first.fetch) + "/" + std::to_string(first.build));
    c.expect(first.verify == 0, "verify failed: " + first.verify_out);

    std::size_t train = 0;
    std::size_t test = 0;
    try {
        for (auto const &r : parse_manifest(first.manifest)) {
            (r.split == Split::train ? train : test) += 1;
        }
    } catch (std::exception const &e) {
        c.expect(false, std::string{"manifest unreadable: "} + e.what());
    }
    c.expect(train == 400, "train rows " + std::to_string(train));
    c.expect(test == 100, "test rows " + std::to_string(test));
    c.expect(second.verify == 0, "rerun verify failed");
    c.expect(!first.manifest.empty() && first.manifest == second.manifest,
             "rerun manifest not byte-identical");
    c.expect(elapsed < 120.0, "runtime " + std::to_string(elapsed) + " s >= 120 s");
    return c.done(std::to_string(train) + " train / " + std::to_string(test) +
                  " test, verify ok, rerun identical, " + std::to_string(elapsed) + " s");
}

// ---------------------------------------------------------------------------

Outcome rate_limiting()
{
    Checks c;
    TempDir dir;
    MockTileServer server{MockWorld{55, {}, 256}};
    server.start("127.0.0.1", 0);
    TileCache const cache{dir.path()};

    double const rate = 10.0;
    TileSource::Options opts;
    opts.max_requests_per_second = rate;
    opts.max_retries = 3;
    opts.backoff_base_ms = 10;
    TileSource const source{"mock-map", server.base_url() + "/map/{z}/{x}/{y}.png", opts};

    std::vector<TileCoord> tiles;
    for (std::uint32_t i = 0; i < 100; ++i) {
        tiles.emplace_back(17, 64300 + i % 10, 40800 + i / 10);
    }
    TileFetcher fetcher{source, cache};
    auto const start = Clock::now();
    auto const report = fetcher.fetch_batch(tiles, 4);
    double const elapsed = seconds_since(start);
    c.expect(report.downloaded == 100 && report.failed.empty(),
             "downloaded " + std::to_string(report.downloaded));
    c.expect(elapsed >= 9.9, "100 fetches took " + std::to_string(elapsed) + " s < 9.9 s");

    auto const log = server.request_log();
    c.expect(log.size() == 100, "server saw " + std::to_string(log.size()) + " requests");
    auto const ceiling = static_cast<std::size_t>(std::ceil(rate)) + 1;
    std::size_t worst = 0;
    for (std::size_t i = 0; i < log.size(); ++i) {
        std::size_t in_window = 0;
        for (auto const &e : log) {
            if (e.t_ms >= log[i].t_ms && e.t_ms < log[i].t_ms + 1000.0) {
                ++in_window;
            }
        }
        worst = std::max(worst, in_window);
    }
    c.expect(worst <= ceiling, "sliding window peak " + std::to_string(worst) + " > " +
                                   std::to_string(ceiling));

    TileCoord const flaky{17, 64500, 40900};
    server.set_faults(nlohmann::json::parse(R"({"faults":[{"source":"map","tile":")" +
                                            flaky.str() + R"(","statuses":[503,503]}]})"));
    int attempts = 0;
    try {
        attempts = fetcher.fetch_tile(flaky).attempts;
    } catch (std::exception const &e) {
        c.expect(false, std::string{"scripted 503s not recovered: "} + e.what());
    }
    c.expect(attempts == 3, "scripted tile took " + std::to_string(attempts) + " attempts");
    server.clear_faults();

    server.clear_log();
    auto const again = fetcher.fetch_batch(tiles, 4);
    c.expect(again.cache_hits == 100 && again.downloaded == 0,
             "second batch cache hits " + std::to_string(again.cache_hits));
    c.expect(server.request_log().empty(), "second batch reached the network");
    server.stop();

    return c.done("100 fetches in " + std::to_string(elapsed) + " s, window peak " +
                  std::to_string(worst) + " <= " + std::to_string(ceiling) + ", 503x2 -> " +
                  std::to_string(attempts) + " attempts, rerun " +
                  std::to_string(again.cache_hits) + "/100 cache hits");
}

// ---------------------------------------------------------------------------

Outcome blank_rejection()
{
    Checks c;
    TempDir dir;
    MockWorld world{99, {}, 256};
    world.style.water_fraction = 1.0;
    MockTileServer server{world};
    server.start("127.0.0.1", 0);
    auto const region_file = dir / "sea.geojson";
    auto const region = synthetic_region();
    write_file_atomic(region_file, geojson_polygon("sea", region.rings()));

    std::vector<std::string> const flags = {
        "--region-file", region_file.string(), "--zoom", "17", "-n", "40", "--seed", "5",
        "--map-source", "mock-map", "--sat-source", "mock-sat",
        "--mock-url", server.base_url(), "--cache-root", (dir / "cache").string(),
        "--out-dir", (dir / "out").string()};
    auto with = [&](std::string const &name) {
        std::vector<std::string> v{name};
        v.insert(v.end(), flags.begin(), flags.end());
        return v;
    };
    c.expect(run(with("sample")) == 0, "sample failed");
    c.expect(run(with("fetch")) == 0, "fetch failed");
    int const build = run(with("build"));
    server.stop();
    c.expect(build == 0, "build exit " + std::to_string(build));

    auto const stats_text = read_text_file(dir / "out/stats.json").value_or("{}");
    auto const stats = nlohmann::json::parse(stats_text);
    c.expect(stats.value("total_pairs", -1) == 0,
             "accepted pairs " + std::to_string(stats.value("total_pairs", -1)));
    c.expect(stats.value("rejected_blank", -1) == 40,
             "blank rejects " + std::to_string(stats.value("rejected_blank", -1)));
    c.expect(stats.contains("rejected_invalid") && stats.contains("rejected_missing"),
             "stats lack per-reason reject counts");

    std::size_t blank_lines = 0;
    try {
        for (auto const &r :
             parse_rejects(read_text_file(dir / "out/rejects.jsonl").value_or(""))) {
            blank_lines += r.reason == RejectReason::blank ? 1 : 0;
        }
    } catch (std::exception const &e) {
        c.expect(false, std::string{"rejects unreadable: "} + e.what());
    }
    c.expect(blank_lines == 40, "blank rows in rejects.jsonl " + std::to_string(blank_lines));
    return c.done("40/40 water tiles rejected as blank at threshold " +
                  std::to_string(default_blank_threshold));
}

} // namespace

int main()
{
    struct Criterion
    {
        char const *name;
        std::function<Outcome()> check;
    };
    std::vector<Criterion> const criteria = {
        {"tile-math-oracle", tile_math},
        {"point-in-polygon-oracle", point_in_polygon},
        {"deterministic-sampling", deterministic_sampling},
        {"end-to-end-mock-pipeline", end_to_end},
        {"rate-limiting", rate_limiting},
        {"blank-rejection", blank_rejection},
    };
    int failed = 0;
    for (auto const &criterion : criteria) {
        Outcome o;
        try {
            o = criterion.check();
        } catch (std::exception const &e) {
            o = {false, std::string{"exception: "} + e.what()};
        }
        failed += o.pass ? 0 : 1;
        std::cout << (o.pass ? "PASS " : "FAIL ") << criterion.name << ": " << o.detail
                  << std::endl;
    }
    std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size()
              << " acceptance criteria passed" << std::endl;
    return failed == 0 ? 0 : 1;
}
