#include "mapsat/dataset.hpp"

#include "mapsat/digest.hpp"
#include "mapsat/errors.hpp"
#include "mapsat/fsutil.hpp"
#include "mapsat/image.hpp"
#include "mapsat/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <set>
#include <unordered_map>

namespace mapsat {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

std::string_view to_string(Split s) noexcept
{
    return s == Split::train ? "train" : "test";
}

std::string_view to_string(SourceVariant v) noexcept
{
    switch (v) {
    case SourceVariant::current:
        return "current";
    case SourceVariant::clarity:
        return "clarity";
    case SourceVariant::mock:
        return "mock";
    }
    return "mock";
}

Split parse_split(std::string_view s)
{
    if (s == "train") {
        return Split::train;
    }
    if (s == "test") {
        return Split::test;
    }
    throw ValidationError{"unknown split '" + std::string{s} + "'"};
}

SourceVariant parse_source_variant(std::string_view s)
{
    if (s == "current") {
        return SourceVariant::current;
    }
    if (s == "clarity") {
        return SourceVariant::clarity;
    }
    if (s == "mock") {
        return SourceVariant::mock;
    }
    throw ValidationError{"unknown source variant '" + std::string{s} + "'"};
}

SourceVariant variant_for_source(std::string_view name)
{
    if (name.find("clarity") != std::string_view::npos) {
        return SourceVariant::clarity;
    }
    if (name.starts_with("mock")) {
        return SourceVariant::mock;
    }
    return SourceVariant::current;
}

std::string_view to_string(RejectReason r) noexcept
{
    switch (r) {
    case RejectReason::missing_map:
        return "missing-map";
    case RejectReason::missing_sat:
        return "missing-sat";
    case RejectReason::invalid:
        return "invalid";
    case RejectReason::blank:
        return "blank";
    }
    return "invalid";
}

namespace {

RejectReason parse_reject_reason(std::string_view s)
{
    for (auto r : {RejectReason::missing_map, RejectReason::missing_sat,
                   RejectReason::invalid, RejectReason::blank}) {
        if (to_string(r) == s) {
            return r;
        }
    }
    throw ValidationError{"unknown reject reason '" + std::string{s} + "'"};
}

} // namespace

double blank_fraction(Image const &img)
{
    auto const n = static_cast<std::size_t>(img.width) * img.height;
    if (n == 0) {
        return 0.0;
    }
    std::unordered_map<std::uint32_t, std::size_t> counts;
    std::size_t best = 0;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            best = std::max(best, ++counts[img.pixel(x, y)]);
        }
    }
    return static_cast<double>(best) / static_cast<double>(n);
}

TileCheck validate_tile(std::span<std::uint8_t const> bytes, int expected_size)
{
    if (bytes.empty()) {
        throw InvalidImageError{"empty tile"};
    }
    auto const img = decode_image(bytes);
    if (img.width != expected_size || img.height != expected_size) {
        throw DimensionError{"tile is " + std::to_string(img.width) + "x" +
                                 std::to_string(img.height) + ", expected " +
                                 std::to_string(expected_size) + "x" +
                                 std::to_string(expected_size),
                             img.width, img.height};
    }
    return {img.width, img.height, blank_fraction(img)};
}

BuildResult build_pairs(std::span<TileCoord const> coords, CachedSource const &map,
                        CachedSource const &sat, BuildOptions const &options)
{
    std::set<TileCoord> unique(coords.begin(), coords.end());
    BuildResult result;

    for (auto const &t : unique) {
        auto map_bytes = map.cache.load(map.source_name, t);
        if (!map_bytes) {
            result.rejects.push_back({t, RejectReason::missing_map, "no valid cache entry"});
            continue;
        }
        auto sat_bytes = sat.cache.load(sat.source_name, t);
        if (!sat_bytes) {
            result.rejects.push_back({t, RejectReason::missing_sat, "no valid cache entry"});
            continue;
        }

        TileCheck map_check{};
        try {
            map_check = validate_tile(*map_bytes, options.tile_size);
            (void)validate_tile(*sat_bytes, options.tile_size);
        } catch (Error const &e) {
            result.rejects.push_back({t, RejectReason::invalid, e.what()});
            continue;
        }
        if (!(map_check.blank_fraction < options.blank_threshold)) {
            result.rejects.push_back(
                {t, RejectReason::blank,
                 "map blank fraction " + std::to_string(map_check.blank_fraction)});
            continue;
        }

        auto const stem = std::to_string(t.z()) + "/" + std::to_string(t.x()) + "/" +
                          std::to_string(t.y()) + ".";
        PairRecord rec{t,
                       "map/" + stem + extension_for(sniff_format(*map_bytes)),
                       "sat/" + stem + extension_for(sniff_format(*sat_bytes)),
                       sha256_hex(*map_bytes),
                       sha256_hex(*sat_bytes),
                       Split::train,
                       std::string{fixed_prompt},
                       options.variant};
        write_file_atomic(options.out_dir / rec.map_path, *map_bytes);
        write_file_atomic(options.out_dir / rec.sat_path, *sat_bytes);
        result.records.push_back(std::move(rec));
    }
    return result;
}

std::size_t test_count(std::size_t n, double test_fraction)
{
    if (!(test_fraction >= 0.0 && test_fraction <= 1.0)) {
        throw ValidationError{"test fraction must lie in [0, 1]"};
    }
    // llround rounds halves away from zero.
    return static_cast<std::size_t>(
        std::llround(test_fraction * static_cast<double>(n)));
}

void assign_split(std::vector<PairRecord> &records, double test_fraction,
                  std::uint64_t seed)
{
    auto const k = test_count(records.size(), test_fraction);
    std::vector<std::size_t> order(records.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Xoshiro256 rng{seed};
    partial_shuffle(std::span<std::size_t>{order}, k, rng);
    for (auto &r : records) {
        r.split = Split::train;
    }
    for (std::size_t i = 0; i < k; ++i) {
        records[order[i]].split = Split::test;
    }
}

// --- manifest --------------------------------------------------------------

namespace {

constexpr std::array<std::string_view, 10> manifest_keys = {
    "z",          "x",          "y",     "map_path", "sat_path",
    "map_sha256", "sat_sha256", "split", "prompt",   "source_variant"};

PairRecord record_from_json(json const &j)
{
    if (!j.is_object()) {
        throw ValidationError{"line is not a JSON object"};
    }
    for (auto const key : manifest_keys) {
        if (!j.contains(key)) {
            throw ValidationError{"missing key '" + std::string{key} + "'"};
        }
    }
    if (j.size() != manifest_keys.size()) {
        throw ValidationError{"unexpected extra keys"};
    }
    auto const z = j.at("z").get<int>();
    auto const x = j.at("x").get<std::int64_t>();
    auto const y = j.at("y").get<std::int64_t>();
    if (x < 0 || y < 0 || x > 0xFFFFFFFFLL || y > 0xFFFFFFFFLL) {
        throw ValidationError{"tile index out of range"};
    }
    return PairRecord{TileCoord{z, static_cast<std::uint32_t>(x),
                                static_cast<std::uint32_t>(y)},
                      j.at("map_path").get<std::string>(),
                      j.at("sat_path").get<std::string>(),
                      j.at("map_sha256").get<std::string>(),
                      j.at("sat_sha256").get<std::string>(),
                      parse_split(j.at("split").get<std::string>()),
                      j.at("prompt").get<std::string>(),
                      parse_source_variant(j.at("source_variant").get<std::string>())};
}

// Splits on '\n'. A final newline does not start another line.
std::vector<std::string_view> split_lines(std::string_view text)
{
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        auto const end = text.find('\n', start);
        if (end == std::string_view::npos) {
            lines.push_back(text.substr(start));
            break;
        }
        lines.push_back(text.substr(start, end - start));
        start = end + 1;
    }
    return lines;
}

} // namespace

std::string manifest_line(PairRecord const &r)
{
    ojson j;
    j["z"] = r.coord.z();
    j["x"] = r.coord.x();
    j["y"] = r.coord.y();
    j["map_path"] = r.map_path;
    j["sat_path"] = r.sat_path;
    j["map_sha256"] = r.map_sha256;
    j["sat_sha256"] = r.sat_sha256;
    j["split"] = to_string(r.split);
    j["prompt"] = r.prompt;
    j["source_variant"] = to_string(r.source_variant);
    return j.dump();
}

std::string serialize_manifest(std::span<PairRecord const> records)
{
    std::string out;
    for (auto const &r : records) {
        out += manifest_line(r);
        out += '\n';
    }
    return out;
}

std::vector<PairRecord> parse_manifest(std::string_view text)
{
    std::vector<PairRecord> records;
    std::map<TileCoord, std::size_t> seen;
    auto const lines = split_lines(text);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        auto const line_no = i + 1;
        std::optional<PairRecord> parsed;
        try {
            parsed = record_from_json(json::parse(lines[i]));
        } catch (std::exception const &e) {
            throw ManifestError{"manifest line " + std::to_string(line_no) +
                                    ": " + e.what(),
                                line_no};
        }
        auto &rec = *parsed;
        auto [it, inserted] = seen.emplace(rec.coord, line_no);
        if (!inserted) {
            throw IntegrityError{"manifest line " + std::to_string(line_no) +
                                     ": tile " + rec.coord.str() +
                                     " duplicates line " + std::to_string(it->second),
                                 line_no};
        }
        records.push_back(std::move(rec));
    }
    return records;
}

void write_manifest(std::span<PairRecord const> records, fs::path const &path)
{
    write_file_atomic(path, serialize_manifest(records));
}

std::vector<PairRecord> read_manifest(fs::path const &path)
{
    auto text = read_text_file(path);
    if (!text) {
        throw ManifestError{"cannot read manifest '" + path.string() + "'", 0};
    }
    return parse_manifest(*text);
}

std::vector<Violation> verify_manifest(fs::path const &path, int tile_size)
{
    std::vector<Violation> out;
    auto text = read_text_file(path);
    if (!text) {
        out.push_back({0, "", "cannot read manifest '" + path.string() + "'"});
        return out;
    }
    auto const root = path.parent_path();
    auto const lines = split_lines(*text);
    std::map<TileCoord, std::size_t> seen;

    for (std::size_t i = 0; i < lines.size(); ++i) {
        auto const line_no = i + 1;
        std::optional<PairRecord> parsed;
        try {
            parsed = record_from_json(json::parse(lines[i]));
        } catch (std::exception const &e) {
            out.push_back({line_no, "", std::string{"malformed: "} + e.what()});
            continue;
        }
        auto const &rec = *parsed;
        auto const tile = rec.coord.str();
        auto report = [&](std::string msg) {
            out.push_back({line_no, tile, std::move(msg)});
        };

        if (auto [it, inserted] = seen.emplace(rec.coord, line_no); !inserted) {
            report("duplicate of line " + std::to_string(it->second));
        }
        if (rec.prompt != fixed_prompt) {
            report("prompt differs from the fixed prompt");
        }
        auto check_file = [&](std::string const &rel, std::string const &digest,
                              std::string_view which) {
            fs::path const p{rel};
            if (rel.empty() || p.is_absolute()) {
                report(std::string{which} + " path must be relative");
                return;
            }
            auto bytes = read_file(root / p);
            if (!bytes) {
                report(std::string{which} + " file missing: " + rel);
                return;
            }
            if (sha256_hex(*bytes) != digest) {
                report(std::string{which} + " checksum mismatch: " + rel);
            }
            try {
                (void)validate_tile(*bytes, tile_size);
            } catch (Error const &e) {
                report(std::string{which} + " tile invalid: " + e.what());
            }
        };
        check_file(rec.map_path, rec.map_sha256, "map");
        check_file(rec.sat_path, rec.sat_sha256, "sat");
    }
    return out;
}

// --- statistics ------------------------------------------------------------

std::string_view to_string(PaletteClass c) noexcept
{
    switch (c) {
    case PaletteClass::water:
        return "water";
    case PaletteClass::green:
        return "green";
    case PaletteClass::road:
        return "road";
    case PaletteClass::building:
        return "building";
    case PaletteClass::background:
        return "background";
    case PaletteClass::other:
        return "other";
    }
    return "other";
}

namespace {

struct Centroid
{
    std::uint8_t r, g, b;
    PaletteClass cls;
};

// OSM Carto raster colours.
constexpr std::array<Centroid, 14> palette_centroids = {{
    {170, 211, 223, PaletteClass::water},      // water, ocean
    {173, 209, 158, PaletteClass::green},      // forest
    {200, 250, 204, PaletteClass::green},      // park
    {205, 235, 176, PaletteClass::green},      // grass, meadow
    {238, 240, 213, PaletteClass::green},      // farmland
    {255, 255, 255, PaletteClass::road},       // residential / unclassified
    {247, 250, 191, PaletteClass::road},       // secondary
    {252, 214, 164, PaletteClass::road},       // primary
    {249, 178, 156, PaletteClass::road},       // trunk
    {232, 146, 162, PaletteClass::road},       // motorway
    {217, 208, 201, PaletteClass::building},   // building fill
    {196, 182, 171, PaletteClass::building},   // building outline
    {242, 239, 233, PaletteClass::background}, // land
    {224, 223, 223, PaletteClass::background}, // residential landuse
}};

} // namespace

PaletteClass classify_pixel(std::uint8_t r, std::uint8_t g, std::uint8_t b) noexcept
{
    double best = 1e300;
    PaletteClass cls = PaletteClass::other;
    for (auto const &c : palette_centroids) {
        double const dr = static_cast<double>(r) - c.r;
        double const dg = static_cast<double>(g) - c.g;
        double const db = static_cast<double>(b) - c.b;
        double const d2 = dr * dr + dg * dg + db * db;
        if (d2 < best) {
            best = d2;
            cls = c.cls;
        }
    }
    if (best > palette_other_distance * palette_other_distance) {
        return PaletteClass::other;
    }
    return cls;
}

ojson to_json(DatasetStats const &s)
{
    ojson hist = ojson::object();
    for (auto c : all_palette_classes) {
        auto it = s.map_palette_histogram.find(c);
        hist[std::string{to_string(c)}] =
            it == s.map_palette_histogram.end() ? 0.0 : it->second;
    }
    ojson j;
    j["total_pairs"] = s.total_pairs;
    j["train_pairs"] = s.train_pairs;
    j["test_pairs"] = s.test_pairs;
    j["rejected_blank"] = s.rejected_blank;
    j["rejected_invalid"] = s.rejected_invalid;
    j["rejected_missing"] = s.rejected_missing;
    j["map_palette_histogram"] = hist;
    return j;
}

DatasetStats compute_stats(std::span<PairRecord const> records,
                           fs::path const &dataset_root,
                           std::span<Reject const> rejects)
{
    DatasetStats s;
    s.total_pairs = records.size();
    std::map<PaletteClass, std::uint64_t> counts;
    std::unordered_map<std::uint32_t, PaletteClass> memo;
    std::uint64_t pixels = 0;

    for (auto const &r : records) {
        (r.split == Split::train ? s.train_pairs : s.test_pairs) += 1;
        auto bytes = read_file(dataset_root / r.map_path);
        if (!bytes) {
            throw Error{"cannot read map tile of " + r.coord.str() + " (" +
                        r.map_path + ")"};
        }
        Image img;
        try {
            img = decode_image(*bytes);
        } catch (InvalidImageError const &e) {
            throw Error{"cannot decode map tile of " + r.coord.str() + ": " +
                        e.what()};
        }
        for (std::size_t i = 0; i + 3 < img.rgba.size(); i += 4) {
            auto const key = (std::uint32_t{img.rgba[i]} << 16U) |
                             (std::uint32_t{img.rgba[i + 1]} << 8U) |
                             img.rgba[i + 2];
            auto it = memo.find(key);
            if (it == memo.end()) {
                it = memo.emplace(key, classify_pixel(img.rgba[i], img.rgba[i + 1],
                                                      img.rgba[i + 2]))
                         .first;
            }
            ++counts[it->second];
            ++pixels;
        }
    }

    for (auto c : all_palette_classes) {
        s.map_palette_histogram[c] =
            pixels == 0 ? 0.0
                        : static_cast<double>(counts[c]) / static_cast<double>(pixels);
    }
    for (auto const &rej : rejects) {
        switch (rej.reason) {
        case RejectReason::blank:
            ++s.rejected_blank;
            break;
        case RejectReason::invalid:
            ++s.rejected_invalid;
            break;
        case RejectReason::missing_map:
        case RejectReason::missing_sat:
            ++s.rejected_missing;
            break;
        }
    }
    return s;
}

std::string serialize_rejects(std::span<Reject const> rejects)
{
    std::string out;
    for (auto const &r : rejects) {
        ojson j;
        j["z"] = r.coord.z();
        j["x"] = r.coord.x();
        j["y"] = r.coord.y();
        j["reason"] = to_string(r.reason);
        j["detail"] = r.detail;
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::vector<Reject> parse_rejects(std::string_view text)
{
    std::vector<Reject> out;
    auto const lines = split_lines(text);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        try {
            auto const j = json::parse(lines[i]);
            out.push_back({TileCoord{j.at("z").get<int>(), j.at("x").get<std::uint32_t>(),
                                     j.at("y").get<std::uint32_t>()},
                           parse_reject_reason(j.at("reason").get<std::string>()),
                           j.value("detail", std::string{})});
        } catch (std::exception const &e) {
            throw ManifestError{"rejects line " + std::to_string(i + 1) + ": " +
                                    e.what(),
                                i + 1};
        }
    }
    return out;
}

} // namespace mapsat
