#include "mapsat/geo.hpp"

#include "mapsat/errors.hpp"

#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>

namespace mapsat {

namespace {

constexpr double deg_to_rad = std::numbers::pi / 180.0;
constexpr double rad_to_deg = 180.0 / std::numbers::pi;

double wrap_lon(double lon)
{
    if (lon >= -180.0 && lon <= 180.0) {
        return lon;
    }
    double wrapped = std::fmod(lon + 180.0, 360.0);
    if (wrapped < 0.0) {
        wrapped += 360.0;
    }
    return wrapped - 180.0;
}

// Fraction of the world height from the north edge for a projected y
// expressed in the [-pi, pi] Mercator range.
double lat_of_unit_row(double row_fraction)
{
    double const merc_y = std::numbers::pi * (1.0 - 2.0 * row_fraction);
    return std::atan(std::sinh(merc_y)) * rad_to_deg;
}

std::uint32_t clamp_index(double v, std::uint32_t n)
{
    if (!(v >= 0.0)) {
        return 0;
    }
    auto const i = static_cast<std::uint64_t>(std::floor(v));
    return i >= n ? n - 1 : static_cast<std::uint32_t>(i);
}

} // namespace

GeoPoint::GeoPoint(double lat_deg, double lon_deg)
{
    if (!std::isfinite(lat_deg) || !std::isfinite(lon_deg)) {
        throw DomainError{"coordinate is not finite"};
    }
    if (lat_deg < -max_mercator_lat || lat_deg > max_mercator_lat) {
        std::ostringstream msg;
        msg.precision(12);
        msg << "latitude " << lat_deg << " outside Web Mercator bounds";
        throw DomainError{msg.str()};
    }
    m_lat = lat_deg;
    m_lon = wrap_lon(lon_deg);
}

void check_zoom(int z)
{
    if (z < 0 || z > max_zoom) {
        throw DomainError{"zoom " + std::to_string(z) + " outside [0, " +
                          std::to_string(max_zoom) + "]"};
    }
}

TileCoord::TileCoord(int z, std::uint32_t x, std::uint32_t y)
: m_z(z), m_x(x), m_y(y)
{
    check_zoom(z);
    if (x >= tiles_per_axis(z) || y >= tiles_per_axis(z)) {
        throw DomainError{"tile " + str() + " outside the zoom grid"};
    }
}

std::string TileCoord::str() const
{
    return std::to_string(m_z) + "/" + std::to_string(m_x) + "/" +
           std::to_string(m_y);
}

TileCoord TileCoord::parse(std::string const &text)
{
    long long parts[3] = {0, 0, 0};
    char const *p = text.data();
    char const *end = text.data() + text.size();
    for (int i = 0; i < 3; ++i) {
        auto [next, ec] = std::from_chars(p, end, parts[i]);
        if (ec != std::errc{} || next == p) {
            throw ValidationError{"malformed tile coordinate '" + text + "'"};
        }
        p = next;
        if (i < 2) {
            if (p == end || *p != '/') {
                throw ValidationError{"malformed tile coordinate '" + text +
                                      "'"};
            }
            ++p;
        }
    }
    if (p != end) {
        throw ValidationError{"trailing characters in tile coordinate '" +
                              text + "'"};
    }
    if (parts[0] < 0 || parts[0] > max_zoom || parts[1] < 0 || parts[2] < 0 ||
        parts[1] > 0xFFFFFFFFLL || parts[2] > 0xFFFFFFFFLL) {
        throw DomainError{"tile coordinate '" + text + "' out of range"};
    }
    return TileCoord{static_cast<int>(parts[0]),
                     static_cast<std::uint32_t>(parts[1]),
                     static_cast<std::uint32_t>(parts[2])};
}

void GeoBBox::validate() const
{
    if (!(north_deg > south_deg)) {
        throw ValidationError{"bbox north must exceed south"};
    }
    if (!(west_deg <= east_deg)) {
        throw ValidationError{"bbox west must not exceed east"};
    }
}

TileCoord lonlat_to_tile(GeoPoint const &p, int z)
{
    check_zoom(z);
    auto const n = tiles_per_axis(z);
    double const scale = static_cast<double>(n);

    double const fx = (p.lon() + 180.0) / 360.0 * scale;

    double const phi = p.lat() * deg_to_rad;
    double const fy =
        (1.0 - std::log(std::tan(phi) + 1.0 / std::cos(phi)) / std::numbers::pi) /
        2.0 * scale;

    return TileCoord{z, clamp_index(fx, n), clamp_index(fy, n)};
}

double tile_x_to_lon(std::uint32_t x, int z) noexcept
{
    return static_cast<double>(x) / static_cast<double>(tiles_per_axis(z)) *
               360.0 -
           180.0;
}

double tile_y_to_lat(std::uint32_t y, int z) noexcept
{
    return lat_of_unit_row(static_cast<double>(y) /
                           static_cast<double>(tiles_per_axis(z)));
}

GeoBBox tile_to_bbox(TileCoord const &t)
{
    return GeoBBox{tile_y_to_lat(t.y(), t.z()), tile_y_to_lat(t.y() + 1, t.z()),
                   tile_x_to_lon(t.x(), t.z()), tile_x_to_lon(t.x() + 1, t.z())};
}

GeoPoint tile_center(TileCoord const &t)
{
    double const n = static_cast<double>(tiles_per_axis(t.z()));
    double const lon = (static_cast<double>(t.x()) + 0.5) / n * 360.0 - 180.0;
    double const lat = lat_of_unit_row((static_cast<double>(t.y()) + 0.5) / n);
    return GeoPoint{lat, lon};
}

} // namespace mapsat
