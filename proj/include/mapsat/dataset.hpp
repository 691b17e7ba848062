#pragma once

#include "mapsat/fetch.hpp"
#include "mapsat/geo.hpp"
#include "mapsat/image.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mapsat {

inline constexpr std::string_view fixed_prompt =
    "Convert this OpenStreetMap into its satellite view";

inline constexpr int default_tile_size = 256;
inline constexpr double default_blank_threshold = 0.99;
inline constexpr double default_test_fraction = 0.20;

enum class Split { train, test };
enum class SourceVariant { current, clarity, mock };

std::string_view to_string(Split s) noexcept;
std::string_view to_string(SourceVariant v) noexcept;
Split parse_split(std::string_view s);
SourceVariant parse_source_variant(std::string_view s);

/// Variant implied by a satellite source name ("worldimagery-clarity" -> clarity, ...).
SourceVariant variant_for_source(std::string_view sat_source_name);

struct PairRecord
{
    TileCoord coord;
    std::string map_path; ///< relative to the manifest directory
    std::string sat_path;
    std::string map_sha256;
    std::string sat_sha256;
    Split split = Split::train;
    std::string prompt{fixed_prompt};
    SourceVariant source_variant = SourceVariant::mock;

    friend bool operator==(PairRecord const &, PairRecord const &) = default;
};

struct TileCheck
{
    int width;
    int height;
    double blank_fraction; ///< share of the most frequent pixel value
};

/// Throws InvalidImageError or DimensionError.
TileCheck validate_tile(std::span<std::uint8_t const> bytes,
                        int expected_size = default_tile_size);

/// Share of pixels equal to the most frequent RGBA value.
double blank_fraction(Image const &img);

enum class RejectReason { missing_map, missing_sat, invalid, blank };

std::string_view to_string(RejectReason r) noexcept;

struct Reject
{
    TileCoord coord;
    RejectReason reason;
    std::string detail;
};

struct CachedSource
{
    TileCache const &cache;
    std::string source_name;
};

struct BuildOptions
{
    std::filesystem::path out_dir;
    double blank_threshold = default_blank_threshold;
    int tile_size = default_tile_size;
    SourceVariant variant = SourceVariant::mock;
};

struct BuildResult
{
    std::vector<PairRecord> records; ///< sorted by (z, x, y), all labelled train
    std::vector<Reject> rejects;     ///< sorted by (z, x, y)
};

/**
 * Pair up cached tiles. Accepted tiles are copied byte-for-byte into
 * <out_dir>/map/z/x/y.<ext> and <out_dir>/sat/z/x/y.<ext>; record paths are
 * relative to out_dir. Duplicated input coordinates are paired once.
 */
BuildResult build_pairs(std::span<TileCoord const> coords, CachedSource const &map,
                        CachedSource const &sat, BuildOptions const &options);

/// round(fraction * n), rounding halves away from zero.
std::size_t test_count(std::size_t n, double test_fraction);

/**
 * Label exactly test_count(N, fraction) records as test, chosen by a seeded
 * shuffle of indices. Record order is unchanged.
 */
void assign_split(std::vector<PairRecord> &records, double test_fraction,
                  std::uint64_t seed);

/// One canonical JSON line, without the trailing newline.
std::string manifest_line(PairRecord const &r);

std::string serialize_manifest(std::span<PairRecord const> records);

/// Throws ManifestError (malformed line) or IntegrityError (duplicate tile).
std::vector<PairRecord> parse_manifest(std::string_view text);

void write_manifest(std::span<PairRecord const> records,
                    std::filesystem::path const &path);

std::vector<PairRecord> read_manifest(std::filesystem::path const &path);

struct Violation
{
    std::size_t line; ///< 1-based
    std::string tile; ///< "z/x/y" or empty when the line did not parse
    std::string message;
};

/// Check every row of a manifest file against the record invariants.
std::vector<Violation> verify_manifest(std::filesystem::path const &path,
                                       int tile_size = default_tile_size);

enum class PaletteClass { water, green, road, building, background, other };

inline constexpr std::array<PaletteClass, 6> all_palette_classes = {
    PaletteClass::water,    PaletteClass::green,      PaletteClass::road,
    PaletteClass::building, PaletteClass::background, PaletteClass::other};

std::string_view to_string(PaletteClass c) noexcept;

/**
 * Nearest fixed OSM Carto centroid; pixels farther than
 * palette_other_distance from every centroid are PaletteClass::other.
 */
PaletteClass classify_pixel(std::uint8_t r, std::uint8_t g, std::uint8_t b) noexcept;

inline constexpr double palette_other_distance = 48.0;

struct DatasetStats
{
    std::size_t total_pairs = 0;
    std::size_t train_pairs = 0;
    std::size_t test_pairs = 0;
    std::size_t rejected_blank = 0;
    std::size_t rejected_invalid = 0;
    std::size_t rejected_missing = 0;
    std::map<PaletteClass, double> map_palette_histogram;
};

nlohmann::ordered_json to_json(DatasetStats const &s);

/**
 * Palette histogram over the map tiles of `records` (paths resolved against
 * `dataset_root`) plus split and reject counts. Throws Error naming the
 * coordinate of an unreadable tile.
 */
DatasetStats compute_stats(std::span<PairRecord const> records,
                           std::filesystem::path const &dataset_root,
                           std::span<Reject const> rejects = {});

} // namespace mapsat

namespace mapsat {

/// Rejects as JSON lines: {"z","x","y","reason","detail"}.
std::string serialize_rejects(std::span<Reject const> rejects);
std::vector<Reject> parse_rejects(std::string_view text);

} // namespace mapsat
