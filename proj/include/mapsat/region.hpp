#pragma once

#include "mapsat/geo.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mapsat {

using Ring = std::vector<GeoPoint>;

/**
 * A named sampling domain: a flat list of implicitly closed rings.
 *
 * Membership uses the even-odd rule over every ring, so holes and disjoint
 * parts of a MultiPolygon need no special handling. The region is immutable
 * once constructed.
 */
class Region
{
public:
    Region(std::string name, std::vector<Ring> rings);

    std::string const &name() const noexcept { return m_name; }
    std::vector<Ring> const &rings() const noexcept { return m_rings; }
    GeoBBox const &bbox() const noexcept { return m_bbox; }

private:
    std::string m_name;
    std::vector<Ring> m_rings;
    GeoBBox m_bbox;
};

/**
 * Parse a GeoJSON Feature or FeatureCollection with Polygon/MultiPolygon
 * geometry into a single Region. All polygon features are merged. The name
 * comes from `name_override` when given, otherwise from the first feature's
 * "name" property.
 */
Region parse_geojson(std::string_view text,
                     std::optional<std::string> const &name_override = {});

/// One Region per polygon feature; every feature must carry a name.
std::vector<Region> parse_geojson_collection(std::string_view text);

/// Read a file and pick the region named `name` (or the only one).
Region load_region(std::string const &path, std::string const &name);

/// Even-odd ray casting in planar lon/lat. Lower/left edges are inside,
/// upper/right edges are outside.
bool contains(Region const &r, GeoPoint const &p);

inline constexpr std::size_t default_candidate_cap = 10'000'000;

/// Tiles in the bbox tile range whose centre lies in the region, row-major.
/// Throws ResourceLimitError once more than `cap` candidates are found.
std::vector<TileCoord> enumerate_tiles(Region const &r, int z,
                                       std::size_t cap = default_candidate_cap);

/// Number of tiles in the region bbox tile range at zoom z.
std::uint64_t bbox_tile_span(Region const &r, int z);

struct SampleSpec
{
    Region const &region;
    int z;
    std::size_t n;
    std::uint64_t seed;
    std::size_t candidate_cap = default_candidate_cap;
};

/**
 * Draw n distinct tiles from enumerate_tiles() with a partial Fisher-Yates
 * shuffle driven by Xoshiro256(seed). Output order is the shuffle order.
 */
std::vector<TileCoord> sample_tiles(SampleSpec const &spec);

} // namespace mapsat
