#include "mapsat/region.hpp"

#include "mapsat/errors.hpp"
#include "mapsat/random.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>

namespace mapsat {

using json = nlohmann::json;

namespace {

GeoBBox bbox_of(std::vector<Ring> const &rings)
{
    GeoBBox box{-std::numeric_limits<double>::infinity(),
                std::numeric_limits<double>::infinity(),
                std::numeric_limits<double>::infinity(),
                -std::numeric_limits<double>::infinity()};
    for (auto const &ring : rings) {
        for (auto const &p : ring) {
            box.north_deg = std::max(box.north_deg, p.lat());
            box.south_deg = std::min(box.south_deg, p.lat());
            box.west_deg = std::min(box.west_deg, p.lon());
            box.east_deg = std::max(box.east_deg, p.lon());
        }
    }
    return box;
}

std::size_t distinct_vertices(Ring const &ring)
{
    std::vector<std::pair<double, double>> v;
    v.reserve(ring.size());
    for (auto const &p : ring) {
        v.emplace_back(p.lat(), p.lon());
    }
    std::sort(v.begin(), v.end());
    return static_cast<std::size_t>(std::unique(v.begin(), v.end()) - v.begin());
}

Ring parse_ring(json const &coords)
{
    if (!coords.is_array()) {
        throw ValidationError{"ring is not an array of positions"};
    }
    Ring ring;
    ring.reserve(coords.size());
    for (auto const &pos : coords) {
        if (!pos.is_array() || pos.size() < 2 || !pos[0].is_number() ||
            !pos[1].is_number()) {
            throw ValidationError{"position must be [lon, lat]"};
        }
        // GeoJSON positions are (lon, lat).
        ring.emplace_back(pos[1].get<double>(), pos[0].get<double>());
    }
    if (ring.size() > 1 && ring.front() == ring.back()) {
        ring.pop_back();
    }
    if (distinct_vertices(ring) < 3) {
        throw ValidationError{"ring has fewer than 3 distinct vertices"};
    }
    return ring;
}

void append_polygon(json const &rings_json, std::vector<Ring> &out)
{
    if (!rings_json.is_array() || rings_json.empty()) {
        throw ValidationError{"polygon has no rings"};
    }
    for (auto const &ring : rings_json) {
        out.push_back(parse_ring(ring));
    }
}

void append_geometry(json const &geometry, std::vector<Ring> &out)
{
    if (!geometry.is_object() || !geometry.contains("type")) {
        throw ValidationError{"feature has no geometry"};
    }
    auto const type = geometry["type"].get<std::string>();
    if (type != "Polygon" && type != "MultiPolygon") {
        throw UnsupportedGeometryError{"unsupported geometry type '" + type +
                                       "'"};
    }
    if (!geometry.contains("coordinates")) {
        throw ValidationError{type + " has no coordinates"};
    }
    auto const &coords = geometry["coordinates"];
    if (type == "Polygon") {
        append_polygon(coords, out);
    } else {
        if (!coords.is_array()) {
            throw ValidationError{"MultiPolygon coordinates must be an array"};
        }
        for (auto const &poly : coords) {
            append_polygon(poly, out);
        }
    }
}

std::optional<std::string> feature_name(json const &feature)
{
    auto it = feature.find("properties");
    if (it == feature.end() || !it->is_object()) {
        return std::nullopt;
    }
    auto name = it->find("name");
    if (name == it->end() || !name->is_string()) {
        return std::nullopt;
    }
    return name->get<std::string>();
}

json parse_document(std::string_view text)
{
    try {
        return json::parse(text.begin(), text.end());
    } catch (json::parse_error const &e) {
        throw ParseError{std::string{"malformed GeoJSON: "} + e.what(),
                         e.byte};
    }
}

std::vector<json> features_of(json const &doc)
{
    if (!doc.is_object() || !doc.contains("type") || !doc["type"].is_string()) {
        throw ValidationError{"GeoJSON root must be an object with a type"};
    }
    auto const type = doc["type"].get<std::string>();
    if (type == "Feature") {
        return {doc};
    }
    if (type == "FeatureCollection") {
        if (!doc.contains("features") || !doc["features"].is_array()) {
            throw ValidationError{"FeatureCollection has no features array"};
        }
        return doc["features"].get<std::vector<json>>();
    }
    throw UnsupportedGeometryError{"expected Feature or FeatureCollection, got '" +
                                   type + "'"};
}

// Crossing test shared by contains(): toggles when the rightward ray from p
// crosses edge (a, b). Half-open in latitude, strict in longitude.
bool crosses(GeoPoint const &a, GeoPoint const &b, double lat, double lon)
{
    if ((a.lat() > lat) == (b.lat() > lat)) {
        return false;
    }
    double const lon_at =
        a.lon() + (lat - a.lat()) * (b.lon() - a.lon()) / (b.lat() - a.lat());
    return lon < lon_at;
}

} // namespace

Region::Region(std::string name, std::vector<Ring> rings)
: m_name(std::move(name)), m_rings(std::move(rings)), m_bbox{}
{
    if (m_name.empty()) {
        throw ValidationError{"region name must not be empty"};
    }
    if (m_rings.empty()) {
        throw ValidationError{"region '" + m_name + "' has no rings"};
    }
    for (auto &ring : m_rings) {
        if (ring.size() > 1 && ring.front() == ring.back()) {
            ring.pop_back();
        }
        if (distinct_vertices(ring) < 3) {
            throw ValidationError{"region '" + m_name +
                                  "' has a ring with fewer than 3 distinct "
                                  "vertices"};
        }
    }
    m_bbox = bbox_of(m_rings);
}

Region parse_geojson(std::string_view text,
                     std::optional<std::string> const &name_override)
{
    auto const doc = parse_document(text);
    std::vector<Ring> rings;
    std::optional<std::string> name = name_override;
    for (auto const &feature : features_of(doc)) {
        if (!feature.is_object() || !feature.contains("geometry")) {
            throw ValidationError{"feature has no geometry"};
        }
        append_geometry(feature["geometry"], rings);
        if (!name) {
            name = feature_name(feature);
        }
    }
    if (!name) {
        throw ValidationError{"region has no name property and none was given"};
    }
    return Region{*name, std::move(rings)};
}

std::vector<Region> parse_geojson_collection(std::string_view text)
{
    auto const doc = parse_document(text);
    std::vector<Region> out;
    for (auto const &feature : features_of(doc)) {
        if (!feature.is_object() || !feature.contains("geometry")) {
            throw ValidationError{"feature has no geometry"};
        }
        auto name = feature_name(feature);
        if (!name) {
            throw ValidationError{"feature without a name property"};
        }
        std::vector<Ring> rings;
        append_geometry(feature["geometry"], rings);
        out.emplace_back(*name, std::move(rings));
    }
    return out;
}

Region load_region(std::string const &path, std::string const &name)
{
    std::ifstream in{path, std::ios::binary};
    if (!in) {
        throw ConfigError{"cannot open region file '" + path + "'"};
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    auto regions = parse_geojson_collection(buf.str());
    if (name.empty()) {
        if (regions.size() != 1) {
            throw ConfigError{"region file '" + path +
                              "' holds several regions; a name is required"};
        }
        return regions.front();
    }
    for (auto &r : regions) {
        if (r.name() == name) {
            return r;
        }
    }
    throw ConfigError{"region '" + name + "' not found in '" + path + "'"};
}

bool contains(Region const &r, GeoPoint const &p)
{
    auto const &box = r.bbox();
    if (p.lat() < box.south_deg || p.lat() > box.north_deg ||
        p.lon() < box.west_deg || p.lon() > box.east_deg) {
        return false;
    }
    bool inside = false;
    for (auto const &ring : r.rings()) {
        std::size_t const n = ring.size();
        for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
            if (crosses(ring[j], ring[i], p.lat(), p.lon())) {
                inside = !inside;
            }
        }
    }
    return inside;
}

namespace {

struct TileRange
{
    std::uint32_t x0, x1, y0, y1; // inclusive
};

TileRange tile_range(Region const &r, int z)
{
    auto const &box = r.bbox();
    auto const nw = lonlat_to_tile(GeoPoint{box.north_deg, box.west_deg}, z);
    auto const se = lonlat_to_tile(GeoPoint{box.south_deg, box.east_deg}, z);
    return {nw.x(), se.x(), nw.y(), se.y()};
}

} // namespace

std::uint64_t bbox_tile_span(Region const &r, int z)
{
    auto const range = tile_range(r, z);
    return (std::uint64_t{range.x1} - range.x0 + 1) *
           (std::uint64_t{range.y1} - range.y0 + 1);
}

std::vector<TileCoord> enumerate_tiles(Region const &r, int z, std::size_t cap)
{
    check_zoom(z);
    auto const range = tile_range(r, z);
    double const n = static_cast<double>(tiles_per_axis(z));
    std::vector<TileCoord> out;
    for (std::uint32_t y = range.y0; y <= range.y1; ++y) {
        // Same expression as tile_center(), hoisted out of the column loop.
        double const lat = tile_center(TileCoord{z, range.x0, y}).lat();
        for (std::uint32_t x = range.x0; x <= range.x1; ++x) {
            double const lon = (static_cast<double>(x) + 0.5) / n * 360.0 - 180.0;
            if (!contains(r, GeoPoint{lat, lon})) {
                continue;
            }
            if (out.size() == cap) {
                throw ResourceLimitError{"region '" + r.name() +
                                         "' has more than " + std::to_string(cap) +
                                         " candidate tiles at zoom " +
                                         std::to_string(z)};
            }
            out.emplace_back(z, x, y);
        }
    }
    return out;
}

std::vector<TileCoord> sample_tiles(SampleSpec const &spec)
{
    auto candidates = enumerate_tiles(spec.region, spec.z, spec.candidate_cap);
    if (spec.n > candidates.size()) {
        throw CapacityError{"requested " + std::to_string(spec.n) +
                                " tiles but region '" + spec.region.name() +
                                "' has only " +
                                std::to_string(candidates.size()) +
                                " candidates at zoom " + std::to_string(spec.z),
                            candidates.size()};
    }
    Xoshiro256 rng{spec.seed};
    partial_shuffle(std::span<TileCoord>{candidates}, spec.n, rng);
    candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(spec.n),
                     candidates.end());
    return candidates;
}

} // namespace mapsat
