#include "mapsat/config.hpp"

#include "mapsat/errors.hpp"
#include "mapsat/fsutil.hpp"

namespace mapsat {

namespace fs = std::filesystem;
using json = nlohmann::json;

TileSource PipelineConfig::map_tile_source() const
{
    return source_from_json(map_source, mock_base_url);
}

TileSource PipelineConfig::sat_tile_source() const
{
    return source_from_json(sat_source, mock_base_url);
}

SourceVariant PipelineConfig::variant() const
{
    if (source_variant) {
        return *source_variant;
    }
    return variant_for_source(sat_tile_source().name());
}

std::uint64_t PipelineConfig::split_seed() const noexcept
{
    return seed ^ 0x53504C4954ULL; // "SPLIT"
}

void PipelineConfig::validate() const
{
    if (zoom < 0 || zoom > max_zoom) {
        throw ConfigError{"zoom must lie in [0, " + std::to_string(max_zoom) + "]"};
    }
    if (!(test_fraction >= 0.0 && test_fraction <= 1.0)) {
        throw ConfigError{"test_fraction must lie in [0, 1]"};
    }
    if (!(blank_threshold > 0.0 && blank_threshold <= 1.0)) {
        throw ConfigError{"blank_threshold must lie in (0, 1]"};
    }
    if (parallelism == 0) {
        throw ConfigError{"parallelism must be at least 1"};
    }
    if (tile_size <= 0) {
        throw ConfigError{"tile_size must be positive"};
    }
}

PipelineConfig parse_config(json const &j, fs::path const &base_dir)
{
    if (!j.is_object()) {
        throw ConfigError{"config must be a JSON object"};
    }
    auto resolve = [&](std::string const &p) {
        fs::path path{p};
        return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
    };

    PipelineConfig c;
    try {
        if (j.contains("region_file")) {
            c.region_file = resolve(j["region_file"].get<std::string>());
        }
        c.region_name = j.value("region_name", c.region_name);
        c.zoom = j.value("zoom", c.zoom);
        c.n_pairs = j.value("n_pairs", c.n_pairs);
        c.seed = j.value("seed", c.seed);
        if (j.contains("map_source")) {
            c.map_source = j["map_source"];
        }
        if (j.contains("sat_source")) {
            c.sat_source = j["sat_source"];
        }
        if (j.contains("source_variant")) {
            c.source_variant =
                parse_source_variant(j["source_variant"].get<std::string>());
        }
        c.mock_base_url = j.value("mock_base_url", c.mock_base_url);
        if (j.contains("cache_root")) {
            c.cache_root = resolve(j["cache_root"].get<std::string>());
        }
        if (j.contains("out_dir")) {
            c.out_dir = resolve(j["out_dir"].get<std::string>());
        }
        c.test_fraction = j.value("test_fraction", c.test_fraction);
        c.blank_threshold = j.value("blank_threshold", c.blank_threshold);
        c.parallelism = j.value("parallelism", c.parallelism);
        c.tile_size = j.value("tile_size", c.tile_size);
        c.max_candidates = j.value("max_candidates", c.max_candidates);
    } catch (json::exception const &e) {
        throw ConfigError{std::string{"invalid config: "} + e.what()};
    } catch (ValidationError const &e) {
        throw ConfigError{std::string{"invalid config: "} + e.what()};
    }
    // Resolve sources early so template errors surface at load time.
    (void)c.map_tile_source();
    (void)c.sat_tile_source();
    c.validate();
    return c;
}

PipelineConfig load_config(fs::path const &path)
{
    auto text = read_text_file(path);
    if (!text) {
        throw ConfigError{"cannot read config '" + path.string() + "'"};
    }
    json j;
    try {
        j = json::parse(*text);
    } catch (json::parse_error const &e) {
        throw ConfigError{"config '" + path.string() + "' is not valid JSON: " +
                          e.what()};
    }
    return parse_config(j, path.parent_path());
}

} // namespace mapsat
