#pragma once

#include "mapsat/config.hpp"
#include "mapsat/dataset.hpp"
#include "mapsat/fetch.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace mapsat {

/// "z/x/y" lines, sorted by (z, x, y).
std::string format_coords(std::span<TileCoord const> coords);
std::vector<TileCoord> parse_coords(std::string_view text);

void write_coords(std::filesystem::path const &path,
                  std::span<TileCoord const> coords);
std::vector<TileCoord> read_coords(std::filesystem::path const &path);

/// Seeded sample of the configured region, sorted by (z, x, y).
std::vector<TileCoord> run_sample(PipelineConfig const &config);

struct FetchOutcome
{
    FetchReport map;
    FetchReport sat;

    bool complete() const noexcept { return map.failed.empty() && sat.failed.empty(); }
};

/// Fetch both sources into the cache (cache root honours $MAPSAT_CACHE_ROOT).
FetchOutcome run_fetch(PipelineConfig const &config,
                       std::span<TileCoord const> coords);

struct BuildOutcome
{
    std::vector<PairRecord> records;
    std::vector<Reject> rejects;
    DatasetStats stats;
    std::filesystem::path manifest_path;
};

/**
 * build_pairs -> assign_split -> write_manifest -> stats. Writes
 * manifest.jsonl, rejects.jsonl and stats.json into out_dir.
 */
BuildOutcome run_build(PipelineConfig const &config,
                       std::span<TileCoord const> coords);

/// Cache root after the environment override.
std::filesystem::path effective_cache_root(PipelineConfig const &config);

} // namespace mapsat
