#include "mapsat/pipeline.hpp"

#include "mapsat/errors.hpp"
#include "mapsat/fsutil.hpp"
#include "mapsat/region.hpp"

#include <algorithm>

namespace mapsat {

namespace fs = std::filesystem;

std::string format_coords(std::span<TileCoord const> coords)
{
    std::vector<TileCoord> sorted(coords.begin(), coords.end());
    std::sort(sorted.begin(), sorted.end());
    std::string out;
    for (auto const &t : sorted) {
        out += t.str();
        out += '\n';
    }
    return out;
}

std::vector<TileCoord> parse_coords(std::string_view text)
{
    std::vector<TileCoord> out;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) {
            end = text.size();
        }
        ++line_no;
        auto line = text.substr(start, end - start);
        start = end + 1;
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        if (line.empty() || line.front() == '#') {
            continue;
        }
        try {
            out.push_back(TileCoord::parse(std::string{line}));
        } catch (Error const &e) {
            throw ConfigError{"coords line " + std::to_string(line_no) + ": " +
                              e.what()};
        }
    }
    return out;
}

void write_coords(fs::path const &path, std::span<TileCoord const> coords)
{
    write_file_atomic(path, format_coords(coords));
}

std::vector<TileCoord> read_coords(fs::path const &path)
{
    auto text = read_text_file(path);
    if (!text) {
        throw ConfigError{"cannot read coords file '" + path.string() + "'"};
    }
    return parse_coords(*text);
}

std::vector<TileCoord> run_sample(PipelineConfig const &config)
{
    config.validate();
    auto const region = load_region(config.region_file.string(), config.region_name);
    auto tiles = sample_tiles(SampleSpec{region, config.zoom, config.n_pairs,
                                         config.seed, config.max_candidates});
    std::sort(tiles.begin(), tiles.end());
    return tiles;
}

fs::path effective_cache_root(PipelineConfig const &config)
{
    return TileCache::resolve_root(config.cache_root);
}

FetchOutcome run_fetch(PipelineConfig const &config,
                       std::span<TileCoord const> coords)
{
    config.validate();
    TileCache const cache{effective_cache_root(config)};
    TileFetcher map{config.map_tile_source(), cache};
    TileFetcher sat{config.sat_tile_source(), cache};
    FetchOutcome out{map.fetch_batch(coords, config.parallelism),
                     sat.fetch_batch(coords, config.parallelism)};
    return out;
}

BuildOutcome run_build(PipelineConfig const &config,
                       std::span<TileCoord const> coords)
{
    config.validate();
    TileCache const cache{effective_cache_root(config)};
    auto const map_source = config.map_tile_source();
    auto const sat_source = config.sat_tile_source();

    BuildOptions options;
    options.out_dir = config.out_dir;
    options.blank_threshold = config.blank_threshold;
    options.tile_size = config.tile_size;
    options.variant = config.variant();

    auto built = build_pairs(coords, CachedSource{cache, map_source.name()},
                             CachedSource{cache, sat_source.name()}, options);
    assign_split(built.records, config.test_fraction, config.split_seed());

    BuildOutcome out;
    out.manifest_path = config.out_dir / "manifest.jsonl";
    write_manifest(built.records, out.manifest_path);
    write_file_atomic(config.out_dir / "rejects.jsonl",
                      serialize_rejects(built.rejects));
    out.stats = compute_stats(built.records, config.out_dir, built.rejects);
    write_file_atomic(config.out_dir / "stats.json", to_json(out.stats).dump(2) + "\n");
    out.records = std::move(built.records);
    out.rejects = std::move(built.rejects);
    return out;
}

} // namespace mapsat
