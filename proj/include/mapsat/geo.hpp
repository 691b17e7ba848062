#pragma once

#include <compare>
#include <cstdint>
#include <string>

namespace mapsat {

inline constexpr int max_zoom = 22;

/// Latitude limit of the square Web Mercator world, in degrees.
inline constexpr double max_mercator_lat = 85.05112878;

/**
 * A point in WGS84 degrees, restricted to the Web Mercator domain.
 *
 * Longitudes outside [-180, 180] are wrapped into [-180, 180). Exactly
 * +180 is kept so that the east edge of the world stays representable.
 */
class GeoPoint
{
public:
    GeoPoint(double lat_deg, double lon_deg);

    double lat() const noexcept { return m_lat; }
    double lon() const noexcept { return m_lon; }

    friend bool operator==(GeoPoint const &, GeoPoint const &) = default;

private:
    double m_lat;
    double m_lon;
};

/// A slippy-map tile address. x and y are checked against 2^z.
class TileCoord
{
public:
    TileCoord(int z, std::uint32_t x, std::uint32_t y);

    int z() const noexcept { return m_z; }
    std::uint32_t x() const noexcept { return m_x; }
    std::uint32_t y() const noexcept { return m_y; }

    /// "z/x/y"
    std::string str() const;

    /// Parse "z/x/y".
    static TileCoord parse(std::string const &text);

    friend bool operator==(TileCoord const &, TileCoord const &) = default;

    /// Ordered by (z, x, y).
    friend std::strong_ordering operator<=>(TileCoord const &a,
                                            TileCoord const &b) noexcept
    {
        if (auto c = a.m_z <=> b.m_z; c != 0) {
            return c;
        }
        if (auto c = a.m_x <=> b.m_x; c != 0) {
            return c;
        }
        return a.m_y <=> b.m_y;
    }

private:
    int m_z;
    std::uint32_t m_x;
    std::uint32_t m_y;
};

/// Orders tiles row-major: by z, then y, then x.
struct RowMajorLess
{
    bool operator()(TileCoord const &a, TileCoord const &b) const noexcept
    {
        if (a.z() != b.z()) {
            return a.z() < b.z();
        }
        if (a.y() != b.y()) {
            return a.y() < b.y();
        }
        return a.x() < b.x();
    }
};

struct GeoBBox
{
    double north_deg;
    double south_deg;
    double west_deg;
    double east_deg;

    /// Throws ValidationError unless north > south and west <= east.
    void validate() const;

    friend bool operator==(GeoBBox const &, GeoBBox const &) = default;
};

/// Number of tiles along one axis at zoom z.
constexpr std::uint32_t tiles_per_axis(int z) noexcept
{
    return std::uint32_t{1} << static_cast<unsigned>(z);
}

/// Throws DomainError when z is outside [0, max_zoom].
void check_zoom(int z);

TileCoord lonlat_to_tile(GeoPoint const &p, int z);

GeoBBox tile_to_bbox(TileCoord const &t);

/// Midpoint of the tile in projected space, reported in degrees.
GeoPoint tile_center(TileCoord const &t);

/// Longitude of the western edge of tile column x (x may equal 2^z).
double tile_x_to_lon(std::uint32_t x, int z) noexcept;

/// Latitude of the northern edge of tile row y (y may equal 2^z).
double tile_y_to_lat(std::uint32_t y, int z) noexcept;

} // namespace mapsat
