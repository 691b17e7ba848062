#pragma once

#include "mapsat/dataset.hpp"
#include "mapsat/fetch.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace mapsat {

/**
 * Everything one pipeline run needs. Loaded from a JSON file; command-line
 * flags override individual fields afterwards.
 *
 *   {
 *     "region_file": "data/regions/central-belt.geojson",
 *     "region_name": "central-belt",
 *     "zoom": 17,
 *     "n_pairs": 500,
 *     "seed": 42,
 *     "map_source": "osm" | {...TileSource...},
 *     "sat_source": "worldimagery-clarity" | {...},
 *     "source_variant": "current" | "clarity" | "mock",   (optional)
 *     "mock_base_url": "http://127.0.0.1:8089",
 *     "cache_root": "cache",
 *     "out_dir": "out",
 *     "test_fraction": 0.2,
 *     "blank_threshold": 0.99,
 *     "parallelism": 4,
 *     "tile_size": 256,
 *     "max_candidates": 10000000
 *   }
 *
 * Relative paths in a config file resolve against the file's directory.
 */
struct PipelineConfig
{
    std::filesystem::path region_file;
    std::string region_name;
    int zoom = 17;
    std::size_t n_pairs = 0;
    std::uint64_t seed = 0;
    nlohmann::json map_source = "osm";
    nlohmann::json sat_source = "worldimagery";
    std::optional<SourceVariant> source_variant;
    std::string mock_base_url = "http://127.0.0.1:8089";
    std::filesystem::path cache_root = "cache";
    std::filesystem::path out_dir = "out";
    double test_fraction = default_test_fraction;
    double blank_threshold = default_blank_threshold;
    unsigned parallelism = 4;
    int tile_size = default_tile_size;
    std::size_t max_candidates = 10'000'000;

    TileSource map_tile_source() const;
    TileSource sat_tile_source() const;
    SourceVariant variant() const;

    /// Seed of the train/test shuffle, derived from `seed`.
    std::uint64_t split_seed() const noexcept;

    /// Throws ConfigError on out-of-range values.
    void validate() const;
};

PipelineConfig parse_config(nlohmann::json const &j,
                            std::filesystem::path const &base_dir = {});

PipelineConfig load_config(std::filesystem::path const &path);

} // namespace mapsat
