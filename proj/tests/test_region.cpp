#include <doctest.h>

#include "oracles.hpp"

#include "mapsat/errors.hpp"
#include "mapsat/random.hpp"
#include "mapsat/region.hpp"

#include <algorithm>
#include <cmath>
#include <set>

using namespace mapsat;

namespace {

constexpr char unit_square[] = R"({
  "type": "FeatureCollection",
  "features": [{
    "type": "Feature",
    "properties": {"name": "unit"},
    "geometry": {"type": "Polygon",
                 "coordinates": [[[0,0],[1,0],[1,1],[0,1],[0,0]]]}
  }]
})";

std::vector<std::vector<oracle::Pt>> to_oracle(Region const &r)
{
    std::vector<std::vector<oracle::Pt>> rings;
    for (auto const &ring : r.rings()) {
        auto &out = rings.emplace_back();
        for (auto const &p : ring) {
            out.push_back({p.lon(), p.lat()});
        }
    }
    return rings;
}

Region square(std::string name, double west, double south, double east, double north)
{
    return Region{std::move(name),
                  {{GeoPoint{south, west}, GeoPoint{south, east},
                    GeoPoint{north, east}, GeoPoint{north, west}}}};
}

} // namespace

TEST_CASE("parse_geojson: minimal square")
{
    auto const r = parse_geojson(unit_square);
    CHECK(r.name() == "unit");
    REQUIRE(r.rings().size() == 1);
    CHECK(r.rings()[0].size() == 4);
    CHECK(r.bbox() == GeoBBox{1.0, 0.0, 0.0, 1.0});
}

TEST_CASE("parse_geojson: MultiPolygon keeps every polygon")
{
    auto const r = parse_geojson(R"({
      "type": "Feature", "properties": {"name": "two"},
      "geometry": {"type": "MultiPolygon", "coordinates": [
        [[[0,0],[1,0],[1,1],[0,1]]],
        [[[5,5],[6,5],[6,6],[5,6],[5,5]]]
      ]}})");
    CHECK(r.rings().size() == 2);
    CHECK(r.bbox() == GeoBBox{6.0, 0.0, 0.0, 6.0});
}

TEST_CASE("parse_geojson: failure paths")
{
    std::string const truncated = std::string{unit_square}.substr(0, 80);
    try {
        (void)parse_geojson(truncated);
        FAIL("expected ParseError");
    } catch (ParseError const &e) {
        CHECK(e.byte_offset() > 0);
        CHECK(e.byte_offset() <= truncated.size() + 1);
    }

    CHECK_THROWS_AS(parse_geojson(R"({"type":"Feature","properties":{"name":"p"},
        "geometry":{"type":"Point","coordinates":[0,0]}})"),
                    UnsupportedGeometryError);
    CHECK_THROWS_AS(parse_geojson(R"({"type":"Feature","properties":{"name":"p"},
        "geometry":{"type":"LineString","coordinates":[[0,0],[1,1]]}})"),
                    UnsupportedGeometryError);
    CHECK_THROWS_AS(parse_geojson(R"({"type":"Feature","properties":{"name":"p"},
        "geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[0,0]]]}})"),
                    ValidationError);
    CHECK_THROWS_AS(parse_geojson(R"({"type":"Feature","properties":{},
        "geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1]]]}})"),
                    ValidationError);
    // Name supplied out of band.
    CHECK(parse_geojson(R"({"type":"Feature","properties":{},
        "geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1]]]}})",
                        std::string{"given"})
              .name() == "given");
    // Latitude outside Mercator.
    CHECK_THROWS_AS(parse_geojson(R"({"type":"Feature","properties":{"name":"p"},
        "geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,89]]]}})"),
                    DomainError);
}

TEST_CASE("parse_geojson_collection splits named features")
{
    auto const regions = parse_geojson_collection(R"({"type":"FeatureCollection",
      "features":[
        {"type":"Feature","properties":{"name":"a"},
         "geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1]]]}},
        {"type":"Feature","properties":{"name":"b"},
         "geometry":{"type":"Polygon","coordinates":[[[2,0],[3,0],[3,1]]]}}]})");
    REQUIRE(regions.size() == 2);
    CHECK(regions[0].name() == "a");
    CHECK(regions[1].name() == "b");
}

TEST_CASE("bundled region fixtures load")
{
    for (auto const *name : {"mainland-scotland", "central-belt"}) {
        auto const r = load_region(std::string{MAPSAT_DATA_DIR} + "/regions/" + name +
                                       ".geojson",
                                   name);
        CHECK(r.name() == name);
        // Edinburgh lies in both.
        CHECK(contains(r, GeoPoint{55.9533, -3.1883}));
    }
}

TEST_CASE("contains: examples and half-open edges")
{
    auto const r = parse_geojson(unit_square);
    CHECK(contains(r, GeoPoint{0.5, 0.5}));
    CHECK_FALSE(contains(r, GeoPoint{0.5, 2.0}));

    // Lower and left edges inside, upper and right edges outside.
    CHECK(contains(r, GeoPoint{0.0, 0.5}));
    CHECK(contains(r, GeoPoint{0.5, 0.0}));
    CHECK_FALSE(contains(r, GeoPoint{1.0, 0.5}));
    CHECK_FALSE(contains(r, GeoPoint{0.5, 1.0}));

    // Two adjacent squares never both claim a shared-edge point.
    auto const left = square("l", 0, 0, 1, 1);
    auto const right = square("r", 1, 0, 2, 1);
    for (double lat : {0.0, 0.25, 0.5, 0.999}) {
        GeoPoint const p{lat, 1.0};
        CHECK(contains(left, p) != contains(right, p));
    }
}

TEST_CASE("contains: concave L agrees with the oracle")
{
    Region const l{"L",
                   {{GeoPoint{0, 0}, GeoPoint{0, 3}, GeoPoint{1, 3}, GeoPoint{1, 1},
                     GeoPoint{3, 1}, GeoPoint{3, 0}}}};
    auto const rings = to_oracle(l);
    Xoshiro256 rng{200};
    int inside = 0;
    for (int i = 0; i < 200; ++i) {
        double const lat = rng.uniform(-0.5, 3.5);
        double const lon = rng.uniform(-0.5, 3.5);
        bool const expected = oracle::point_in_rings(rings, {lon, lat});
        REQUIRE(contains(l, GeoPoint{lat, lon}) == expected);
        inside += expected ? 1 : 0;
    }
    CHECK(inside > 20);
    CHECK_FALSE(contains(l, GeoPoint{2.0, 2.0}));
}

TEST_CASE("contains: polygon with a hole")
{
    Region const donut{"donut",
                       {{GeoPoint{0, 0}, GeoPoint{0, 4}, GeoPoint{4, 4}, GeoPoint{4, 0}},
                        {GeoPoint{1, 1}, GeoPoint{1, 3}, GeoPoint{3, 3}, GeoPoint{3, 1}}}};
    CHECK(contains(donut, GeoPoint{0.5, 0.5}));
    CHECK_FALSE(contains(donut, GeoPoint{2.0, 2.0}));
    CHECK(contains(donut, GeoPoint{3.5, 2.0}));
}

TEST_CASE("enumerate_tiles: whole world at z=1")
{
    Region const world{"world",
                       {{GeoPoint{-85.05112878, -180}, GeoPoint{-85.05112878, 180},
                         GeoPoint{85.05112878, 180}, GeoPoint{85.05112878, -180}}}};
    auto const tiles = enumerate_tiles(world, 1);
    std::vector<TileCoord> const expected = {TileCoord{1, 0, 0}, TileCoord{1, 1, 0},
                                             TileCoord{1, 0, 1}, TileCoord{1, 1, 1}};
    CHECK(tiles == expected);
}

TEST_CASE("enumerate_tiles: sliver between tile centres is empty")
{
    // z=10 tiles are ~0.35 deg wide; centres sit at odd multiples of half a tile.
    double const w = tile_x_to_lon(512, 10);
    auto const sliver = square("sliver", w + 0.01, 55.0, w + 0.02, 55.5);
    CHECK(enumerate_tiles(sliver, 10).empty());
}

TEST_CASE("enumerate_tiles: matches an exhaustive grid scan at z=10")
{
    auto const r = square("deg", -4.0, 55.0, -3.0, 56.0);
    auto const tiles = enumerate_tiles(r, 10);

    double const pi = 3.14159265358979323846;
    auto const rings = to_oracle(r);
    std::vector<TileCoord> brute;
    for (std::uint32_t y = 0; y < 1024; ++y) {
        double const lat =
            std::atan(std::sinh(pi * (1.0 - 2.0 * (y + 0.5) / 1024.0))) * 180.0 / pi;
        for (std::uint32_t x = 0; x < 1024; ++x) {
            double const lon = (x + 0.5) / 1024.0 * 360.0 - 180.0;
            if (oracle::point_in_rings(rings, {lon, lat})) {
                brute.emplace_back(10, x, y);
            }
        }
    }
    CHECK(tiles.size() == brute.size());
    CHECK(tiles == brute);
    CHECK(std::is_sorted(tiles.begin(), tiles.end(), RowMajorLess{}));
}

TEST_CASE("enumerate_tiles: cap")
{
    auto const r = square("big", -10.0, 50.0, 0.0, 60.0);
    CHECK_THROWS_AS(enumerate_tiles(r, 12, 1000), ResourceLimitError);
    CHECK_NOTHROW(enumerate_tiles(r, 5, 1000));
}

TEST_CASE("sample_tiles")
{
    auto const r = square("s", -3.25, 55.92, -3.15, 55.97);

    SUBCASE("n = 0")
    {
        CHECK(sample_tiles(SampleSpec{r, 17, 0, 1}).empty());
    }
    SUBCASE("deterministic, distinct, in region")
    {
        auto const a = sample_tiles(SampleSpec{r, 17, 300, 42});
        auto const b = sample_tiles(SampleSpec{r, 17, 300, 42});
        CHECK(a == b);
        CHECK(std::set<TileCoord>(a.begin(), a.end()).size() == a.size());
        for (auto const &t : a) {
            REQUIRE(contains(r, tile_center(t)));
        }
        CHECK(sample_tiles(SampleSpec{r, 17, 300, 43}) != a);
    }
    SUBCASE("exhausting four candidates gives a permutation")
    {
        Region const world{"world",
                           {{GeoPoint{-85.05112878, -180}, GeoPoint{-85.05112878, 180},
                             GeoPoint{85.05112878, 180}, GeoPoint{85.05112878, -180}}}};
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            auto s = sample_tiles(SampleSpec{world, 1, 4, seed});
            std::sort(s.begin(), s.end());
            CHECK(s == std::vector<TileCoord>{TileCoord{1, 0, 0}, TileCoord{1, 0, 1},
                                              TileCoord{1, 1, 0}, TileCoord{1, 1, 1}});
        }
    }
    SUBCASE("capacity error reports the candidate count")
    {
        auto const candidates = enumerate_tiles(r, 17).size();
        try {
            (void)sample_tiles(SampleSpec{r, 17, candidates + 1, 1});
            FAIL("expected CapacityError");
        } catch (CapacityError const &e) {
            CHECK(e.candidates() == candidates);
            CHECK(std::string{e.what()}.find(std::to_string(candidates)) !=
                  std::string::npos);
        }
    }
}
