#include "mapsat/cli.hpp"

#include "mapsat/config.hpp"
#include "mapsat/errors.hpp"
#include "mapsat/fsutil.hpp"
#include "mapsat/mocktiles.hpp"
#include "mapsat/pipeline.hpp"
#include "mapsat/region.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <csignal>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <ostream>

namespace mapsat {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

struct Overrides
{
    std::string config;
    std::string region_file;
    std::string region_name;
    std::optional<int> zoom;
    std::optional<std::size_t> n;
    std::optional<std::uint64_t> seed;
    std::string map_source;
    std::string sat_source;
    std::string mock_url;
    std::string cache_root;
    std::string out_dir;
    std::optional<double> test_fraction;
    std::optional<double> blank_threshold;
    std::optional<unsigned> parallelism;
};

void add_config_flags(CLI::App *cmd, Overrides &o)
{
    cmd->add_option("-c,--config", o.config, "Pipeline config (JSON)");
    cmd->add_option("--region-file", o.region_file, "GeoJSON region file");
    cmd->add_option("--region", o.region_name, "Region name within the file");
    cmd->add_option("--zoom", o.zoom, "Zoom level");
    cmd->add_option("-n,--n-pairs", o.n, "Number of tiles to sample");
    cmd->add_option("--seed", o.seed, "Sampling seed");
    cmd->add_option("--map-source", o.map_source, "Map source preset name");
    cmd->add_option("--sat-source", o.sat_source, "Satellite source preset name");
    cmd->add_option("--mock-url", o.mock_url, "Base URL of the mock tile server");
    cmd->add_option("--cache-root", o.cache_root, "Tile cache directory");
    cmd->add_option("--out-dir", o.out_dir, "Dataset output directory");
    cmd->add_option("--test-fraction", o.test_fraction, "Share of pairs held out");
    cmd->add_option("--blank-threshold", o.blank_threshold,
                    "Reject map tiles at or above this single-colour share");
    cmd->add_option("--parallelism", o.parallelism, "Concurrent fetch workers");
}

PipelineConfig resolve_config(Overrides const &o)
{
    PipelineConfig c = o.config.empty() ? PipelineConfig{} : load_config(o.config);
    if (!o.region_file.empty()) {
        c.region_file = o.region_file;
    }
    if (!o.region_name.empty()) {
        c.region_name = o.region_name;
    }
    if (o.zoom) {
        c.zoom = *o.zoom;
    }
    if (o.n) {
        c.n_pairs = *o.n;
    }
    if (o.seed) {
        c.seed = *o.seed;
    }
    if (!o.map_source.empty()) {
        c.map_source = o.map_source;
    }
    if (!o.sat_source.empty()) {
        c.sat_source = o.sat_source;
    }
    if (!o.mock_url.empty()) {
        c.mock_base_url = o.mock_url;
    }
    if (!o.out_dir.empty()) {
        c.out_dir = o.out_dir;
    }
    if (o.test_fraction) {
        c.test_fraction = *o.test_fraction;
    }
    if (o.blank_threshold) {
        c.blank_threshold = *o.blank_threshold;
    }
    if (o.parallelism) {
        c.parallelism = *o.parallelism;
    }
    // Precedence: config file < $MAPSAT_CACHE_ROOT < --cache-root.
    c.cache_root = TileCache::resolve_root(c.cache_root);
    if (!o.cache_root.empty()) {
        c.cache_root = o.cache_root;
    }
    c.validate();
    (void)c.map_tile_source();
    (void)c.sat_tile_source();
    return c;
}

fs::path coords_path_or_default(std::string const &flag, PipelineConfig const &c)
{
    return flag.empty() ? c.out_dir / "coords.txt" : fs::path{flag};
}

void print_report(std::ostream &out, std::string const &label, FetchReport const &r)
{
    out << label << ": requested " << r.requested << ", downloaded " << r.downloaded
        << ", cache hits " << r.cache_hits << ", failed " << r.failed.size()
        << " (" << r.elapsed_ms << " ms)\n";
    for (auto const &f : r.failed) {
        out << "  " << f.coord.str() << " " << f.error_class << ": " << f.message
            << "\n";
    }
}

void print_stats(std::ostream &out, DatasetStats const &s)
{
    out << "pairs: " << s.total_pairs << " (train " << s.train_pairs << ", test "
        << s.test_pairs << ")\n"
        << "rejected: blank " << s.rejected_blank << ", invalid "
        << s.rejected_invalid << ", missing " << s.rejected_missing << "\n"
        << "map palette:\n";
    for (auto c : all_palette_classes) {
        auto it = s.map_palette_histogram.find(c);
        out << "  " << std::left << std::setw(11) << to_string(c) << std::fixed
            << std::setprecision(4)
            << (it == s.map_palette_histogram.end() ? 0.0 : it->second) << "\n";
    }
    out.unsetf(std::ios::floatfield);
}

MockTileServer *active_server = nullptr;

extern "C" void handle_stop_signal(int)
{
    if (active_server != nullptr) {
        active_server->stop();
    }
}

} // namespace

int run_cli(std::vector<std::string> const &args, std::ostream &out,
            std::ostream &err)
{
    CLI::App app{"Build paired map/satellite tile datasets", "mapsat"};
    app.require_subcommand(1);
    bool as_json = false;
    app.add_flag("--json", as_json, "Machine-readable output");

    Overrides o;
    std::string coords_file;
    std::string manifest_file;

    auto *regions = app.add_subcommand("regions", "List regions in a GeoJSON file");
    std::string regions_file;
    std::optional<int> regions_zoom;
    regions->add_option("region_file", regions_file, "GeoJSON file")->required();
    regions->add_option("--zoom", regions_zoom, "Report candidate tiles at this zoom");

    auto *sample = app.add_subcommand("sample", "Sample tile coordinates in a region");
    add_config_flags(sample, o);
    sample->add_option("-o,--coords", coords_file, "Output coords file");

    auto *fetch = app.add_subcommand("fetch", "Fetch map and satellite tiles");
    add_config_flags(fetch, o);
    fetch->add_option("--coords", coords_file, "Coords file");

    auto *build = app.add_subcommand("build", "Pair, split and write the manifest");
    add_config_flags(build, o);
    build->add_option("--coords", coords_file, "Coords file");

    auto *verify = app.add_subcommand("verify", "Check a manifest against its files");
    verify->add_option("manifest", manifest_file, "Manifest path")->required();

    auto *stats = app.add_subcommand("stats", "Dataset statistics of a manifest");
    stats->add_option("manifest", manifest_file, "Manifest path")->required();

    auto *mock = app.add_subcommand("mock-serve", "Run the synthetic tile server");
    std::string host = "127.0.0.1";
    int port = 8089;
    MockWorld world;
    mock->add_option("--host", host, "Bind address");
    mock->add_option("--port", port, "Port (0 picks a free one)");
    mock->add_option("--seed", world.seed, "World seed");
    mock->add_option("--water-fraction", world.style.water_fraction);
    mock->add_option("--road-density", world.style.road_density);
    mock->add_option("--building-density", world.style.building_density);
    mock->add_option("--tile-size", world.tile_size);

    for (auto *sub : app.get_subcommands({})) {
        sub->add_flag("--json", as_json, "Machine-readable output");
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (CLI::CallForHelp const &) {
        out << app.help();
        return exit_ok;
    } catch (CLI::CallForAllHelp const &) {
        out << app.help("", CLI::AppFormatMode::All);
        return exit_ok;
    } catch (CLI::ParseError const &e) {
        err << "mapsat: " << e.what() << "\n";
        return exit_usage;
    }

    try {
        if (regions->parsed()) {
            auto text = read_text_file(regions_file);
            if (!text) {
                throw ConfigError{"cannot read '" + regions_file + "'"};
            }
            ojson list = ojson::array();
            for (auto const &r : parse_geojson_collection(*text)) {
                ojson j;
                j["name"] = r.name();
                j["rings"] = r.rings().size();
                j["bbox"] = {{"north", r.bbox().north_deg},
                             {"south", r.bbox().south_deg},
                             {"west", r.bbox().west_deg},
                             {"east", r.bbox().east_deg}};
                if (regions_zoom) {
                    j["zoom"] = *regions_zoom;
                    j["candidates"] = enumerate_tiles(r, *regions_zoom).size();
                }
                list.push_back(j);
            }
            if (as_json) {
                out << list.dump() << "\n";
            } else {
                for (auto const &j : list) {
                    out << j["name"].get<std::string>() << ": " << j["rings"]
                        << " ring(s), bbox N" << j["bbox"]["north"] << " S"
                        << j["bbox"]["south"] << " W" << j["bbox"]["west"] << " E"
                        << j["bbox"]["east"];
                    if (j.contains("candidates")) {
                        out << ", " << j["candidates"] << " tiles at z"
                            << j["zoom"];
                    }
                    out << "\n";
                }
            }
            return exit_ok;
        }

        if (sample->parsed()) {
            auto const config = resolve_config(o);
            auto const coords = run_sample(config);
            auto const path = coords_path_or_default(coords_file, config);
            write_coords(path, coords);
            if (as_json) {
                out << json{{"coords_file", path.string()}, {"count", coords.size()}}.dump()
                    << "\n";
            } else {
                out << "wrote " << coords.size() << " tiles to " << path.string() << "\n";
            }
            return exit_ok;
        }

        if (fetch->parsed()) {
            auto const config = resolve_config(o);
            auto const coords = read_coords(coords_path_or_default(coords_file, config));
            auto const result = run_fetch(config, coords);
            if (as_json) {
                out << json{{"map", to_json(result.map)}, {"sat", to_json(result.sat)}}.dump()
                    << "\n";
            } else {
                print_report(out, config.map_tile_source().name(), result.map);
                print_report(out, config.sat_tile_source().name(), result.sat);
            }
            return result.complete() ? exit_ok : exit_partial;
        }

        if (build->parsed()) {
            auto const config = resolve_config(o);
            auto const coords = read_coords(coords_path_or_default(coords_file, config));
            auto const result = run_build(config, coords);
            if (as_json) {
                ojson j;
                j["manifest"] = result.manifest_path.string();
                j["stats"] = to_json(result.stats);
                out << j.dump() << "\n";
            } else {
                out << "manifest: " << result.manifest_path.string() << "\n";
                print_stats(out, result.stats);
            }
            return result.stats.rejected_missing > 0 ? exit_partial : exit_ok;
        }

        if (verify->parsed()) {
            auto const violations = verify_manifest(manifest_file);
            if (as_json) {
                json list = json::array();
                for (auto const &v : violations) {
                    list.push_back(json{{"line", v.line}, {"tile", v.tile},
                                        {"message", v.message}});
                }
                out << json{{"ok", violations.empty()}, {"violations", list}}.dump()
                    << "\n";
            } else if (violations.empty()) {
                out << "ok\n";
            } else {
                for (auto const &v : violations) {
                    out << manifest_file << ":" << v.line;
                    if (!v.tile.empty()) {
                        out << " [" << v.tile << "]";
                    }
                    out << " " << v.message << "\n";
                }
            }
            return violations.empty() ? exit_ok : exit_integrity;
        }

        if (stats->parsed()) {
            fs::path const manifest{manifest_file};
            auto const records = read_manifest(manifest);
            std::vector<Reject> rejects;
            if (auto text = read_text_file(manifest.parent_path() / "rejects.jsonl")) {
                rejects = parse_rejects(*text);
            }
            auto const s = compute_stats(records, manifest.parent_path(), rejects);
            if (as_json) {
                out << to_json(s).dump() << "\n";
            } else {
                print_stats(out, s);
            }
            return exit_ok;
        }

        if (mock->parsed()) {
            MockTileServer server{world};
            active_server = &server;
            std::signal(SIGINT, handle_stop_signal);
            std::signal(SIGTERM, handle_stop_signal);
            out << "serving synthetic tiles on http://" << host << ":" << port
                << std::endl;
            server.run(host, port);
            active_server = nullptr;
            return exit_ok;
        }
    } catch (IntegrityError const &e) {
        err << "mapsat: " << e.what() << "\n";
        return exit_integrity;
    } catch (ManifestError const &e) {
        err << "mapsat: " << e.what() << "\n";
        return exit_integrity;
    } catch (CapacityError const &e) {
        err << "mapsat: " << e.what() << "\n";
        return exit_usage;
    } catch (ConfigError const &e) {
        err << "mapsat: " << e.what() << "\n";
        return exit_usage;
    } catch (std::exception const &e) {
        err << "mapsat: " << e.what() << "\n";
        return exit_usage;
    }
    return exit_usage;
}

} // namespace mapsat
