#include <doctest.h>

#include "test_support.hpp"

#include "mapsat/cli.hpp"
#include "mapsat/dataset.hpp"
#include "mapsat/fsutil.hpp"
#include "mapsat/mocktiles.hpp"

#include <nlohmann/json.hpp>

#include <sstream>

using namespace mapsat;
using testsupport::TempDir;

namespace {

struct Run
{
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args)
{
    std::ostringstream out;
    std::ostringstream err;
    int const code = run_cli(std::move(args), out, err);
    return {code, out.str(), err.str()};
}

std::string const urban_region = std::string{MAPSAT_DATA_DIR} + "/regions/mock-urban.geojson";

/// Common flags for a mock pipeline rooted in `dir`.
std::vector<std::string> mock_flags(TempDir const &dir, std::string const &base_url,
                                    std::size_t n, std::string const &out = "out")
{
    return {"--region-file", urban_region, "--zoom", "17", "-n", std::to_string(n),
            "--seed", "42", "--map-source", "mock-map", "--sat-source", "mock-sat",
            "--mock-url", base_url, "--cache-root", (dir / "cache").string(),
            "--out-dir", (dir / out).string()};
}

std::vector<std::string> cmd(std::string name, std::vector<std::string> flags)
{
    flags.insert(flags.begin(), std::move(name));
    return flags;
}

} // namespace

TEST_CASE("cli: usage")
{
    CHECK(run({"--help"}).code == 0);
    CHECK(run({}).code == exit_usage);
    CHECK(run({"bogus"}).code == exit_usage);
    CHECK(run({"sample", "--zoom", "x"}).code == exit_usage);
}

TEST_CASE("cli: regions")
{
    auto const r = run({"regions", urban_region, "--zoom", "17", "--json"});
    REQUIRE(r.code == 0);
    auto const j = nlohmann::json::parse(r.out);
    REQUIRE(j.size() == 1);
    CHECK(j[0]["name"] == "mock-urban");
    CHECK(j[0]["candidates"] == 1188);

    auto const text = run({"regions", urban_region});
    CHECK(text.out.find("mock-urban") != std::string::npos);
    CHECK(run({"regions", "/nonexistent.geojson"}).code == exit_usage);
}

TEST_CASE("cli: sample")
{
    TempDir dir;
    std::string const base = "http://127.0.0.1:1";

    SUBCASE("n = 0 writes an empty file")
    {
        auto const r = run(cmd("sample", mock_flags(dir, base, 0)));
        REQUIRE(r.code == 0);
        CHECK(read_text_file(dir / "out/coords.txt").value().empty());
    }
    SUBCASE("deterministic")
    {
        auto flags = mock_flags(dir, base, 50);
        REQUIRE(run(cmd("sample", flags)).code == 0);
        auto const first = read_text_file(dir / "out/coords.txt").value();
        flags.push_back("--json");
        auto const r = run(cmd("sample", flags));
        REQUIRE(r.code == 0);
        CHECK(nlohmann::json::parse(r.out)["count"] == 50);
        CHECK(read_text_file(dir / "out/coords.txt").value() == first);
        CHECK(std::count(first.begin(), first.end(), '\n') == 50);
    }
    SUBCASE("n above the candidate count fails and reports the count")
    {
        auto const r = run(cmd("sample", mock_flags(dir, base, 5000)));
        CHECK(r.code == exit_usage);
        CHECK(r.err.find("1188") != std::string::npos);
    }
    SUBCASE("bad config values are rejected")
    {
        auto flags = mock_flags(dir, base, 5);
        flags.insert(flags.end(), {"--test-fraction", "1.5"});
        CHECK(run(cmd("sample", flags)).code == exit_usage);
    }
}

TEST_CASE("cli: config file with flag overrides")
{
    TempDir dir;
    nlohmann::json const config = {{"region_file", urban_region},
                                   {"zoom", 17},
                                   {"n_pairs", 7},
                                   {"seed", 3},
                                   {"out_dir", "o"}};
    write_file_atomic(dir / "config.json", config.dump());
    REQUIRE(run({"sample", "-c", (dir / "config.json").string()}).code == 0);
    CHECK(read_text_file(dir / "o/coords.txt").value().size() > 0);
    REQUIRE(run({"sample", "-c", (dir / "config.json").string(), "-n", "3"}).code == 0);
    auto const text = read_text_file(dir / "o/coords.txt").value();
    CHECK(std::count(text.begin(), text.end(), '\n') == 3);
}

TEST_CASE("cli: sample, fetch, build, verify, stats against the mock server")
{
    TempDir dir;
    MockTileServer server{MockWorld{9, {}, 256}};
    server.start("127.0.0.1", 0);
    auto const base = server.base_url();
    auto const flags = mock_flags(dir, base, 40);

    REQUIRE(run(cmd("sample", flags)).code == 0);
    auto first = run(cmd("fetch", flags));
    REQUIRE(first.code == 0);

    auto again_flags = flags;
    again_flags.push_back("--json");
    auto const again = run(cmd("fetch", again_flags));
    REQUIRE(again.code == 0);
    auto const report = nlohmann::json::parse(again.out);
    CHECK(report["map"]["requested"] == 40);
    CHECK(report["map"]["cache_hits"] == 40);
    CHECK(report["map"]["downloaded"] == 0);
    CHECK(report["sat"]["cache_hits"] == 40);

    auto const built = run(cmd("build", flags));
    REQUIRE(built.code == 0);
    auto const manifest = (dir / "out/manifest.jsonl").string();
    auto const bytes = read_text_file(manifest).value();
    auto const records = parse_manifest(bytes);
    CHECK(records.size() == 40);
    CHECK(std::count_if(records.begin(), records.end(),
                        [](auto const &r) { return r.split == Split::test; }) == 8);
    CHECK(std::filesystem::exists(dir / "out/stats.json"));
    CHECK(std::filesystem::exists(dir / "out/rejects.jsonl"));

    REQUIRE(run(cmd("build", flags)).code == 0);
    CHECK(read_text_file(manifest).value() == bytes);

    CHECK(run({"verify", manifest}).code == 0);
    auto const st = run({"stats", manifest, "--json"});
    REQUIRE(st.code == 0);
    CHECK(nlohmann::json::parse(st.out)["total_pairs"] == 40);

    SUBCASE("tampered tile fails verification and names the row")
    {
        auto const path = dir / "out" / records[5].sat_path;
        auto tile = *read_file(path);
        tile[tile.size() / 2] ^= 0x40;
        write_file_atomic(path, tile);
        auto const r = run({"verify", manifest});
        CHECK(r.code == exit_integrity);
        CHECK(r.out.find(":6") != std::string::npos);
        CHECK(r.out.find(records[5].coord.str()) != std::string::npos);
    }
    SUBCASE("malformed manifest")
    {
        write_file_atomic(manifest, bytes + "{oops\n");
        CHECK(run({"verify", manifest}).code == exit_integrity);
        CHECK(run({"stats", manifest}).code == exit_integrity);
    }
    SUBCASE("permanent failures give a partial exit code")
    {
        TempDir other;
        auto f = mock_flags(other, base, 10);
        REQUIRE(run(cmd("sample", f)).code == 0);
        auto const coords = read_text_file(other / "out/coords.txt").value();
        auto const tile = coords.substr(0, coords.find('\n'));
        server.set_faults(nlohmann::json::parse(
            R"({"faults":[{"source":"sat","tile":")" + tile +
            R"(","statuses":[404],"repeat":true}]})"));
        f.push_back("--json");
        auto const r = run(cmd("fetch", f));
        CHECK(r.code == exit_partial);
        auto const j = nlohmann::json::parse(r.out);
        CHECK(j["sat"]["failed"].size() == 1);
        CHECK(j["map"]["failed"].size() == 0);
        server.clear_faults();

        f.pop_back();
        auto const b = run(cmd("build", f));
        CHECK(b.code == exit_partial);
        auto const recs = read_manifest(other / "out/manifest.jsonl");
        CHECK(recs.size() == 9);
    }
    server.stop();
}
