#pragma once

#include "mapsat/geo.hpp"
#include "mapsat/image.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace mapsat {

enum class LandClass : std::uint8_t { background, water, green, road, building };

std::string_view to_string(LandClass c) noexcept;

struct StyleParams
{
    double water_fraction = 0.15;  ///< 1.0 gives an all-water tile
    double road_density = 0.5;     ///< expected roads per tile / 4
    double building_density = 0.3; ///< expected buildings per tile / 40
};

struct MockWorld
{
    std::uint64_t seed = 0;
    StyleParams style;
    int tile_size = 256;
};

/// Ground-truth class of every pixel; shared by the map and sat renderings.
struct TileLayout
{
    int size = 0;
    std::vector<LandClass> classes;

    LandClass at(int x, int y) const noexcept
    {
        return classes[static_cast<std::size_t>(y) * size + x];
    }
};

enum class MockSource { map, sat };

TileLayout synth_layout(MockWorld const &w, TileCoord const &t);

/// OSM-style flat palette rendering of a layout.
RgbImage render_map(TileLayout const &layout);

/// Textured rendering of the same layout; `noise_seed` drives pixel noise.
RgbImage render_sat(TileLayout const &layout, std::uint64_t noise_seed);

/// Deterministic PNG bytes for (world, source, tile).
std::vector<std::uint8_t> synth_tile(MockWorld const &w, MockSource source,
                                     TileCoord const &t);

/// Flat map colour of a class, as drawn by render_map().
std::array<std::uint8_t, 3> map_color(LandClass c) noexcept;

/// Luminance below which a sat pixel counts as "dark" (water).
inline constexpr double sat_dark_luma = 55.0;

/**
 * Local XYZ server for synthetic tiles.
 *
 *   GET    /{map|sat}/{z}/{x}/{y}.png   synthetic tile
 *   POST   /faults                      install a fault script (JSON)
 *   DELETE /faults                      clear faults
 *   GET    /log                         request log
 *   DELETE /log                         clear the log
 *
 * Fault script:
 *   {"faults": [{"source": "map"|"sat"|"*", "tile": "z/x/y",
 *                "statuses": [503, 503], "repeat": false,
 *                "latency_ms": 0, "retry_after_s": 1, "corrupt": false}]}
 * Each request to a faulted tile consumes the next status; once the list is
 * used up the tile is served normally. With "repeat" the last status sticks.
 * Status 200 with "corrupt" returns non-image bytes.
 */
class MockTileServer
{
public:
    struct LogEntry
    {
        std::string source;
        std::string tile;
        int status;
        double t_ms; ///< since server start
    };

    explicit MockTileServer(MockWorld world);
    ~MockTileServer();

    MockTileServer(MockTileServer const &) = delete;
    MockTileServer &operator=(MockTileServer const &) = delete;

    /// Bind and serve in a background thread. Port 0 picks a free port.
    int start(std::string const &host = "127.0.0.1", int port = 0);

    /// Bind and serve on the calling thread until stop().
    void run(std::string const &host, int port);

    void stop();

    int port() const noexcept { return m_port; }
    std::string base_url() const;

    void set_faults(nlohmann::json const &script);
    void clear_faults();

    std::vector<LogEntry> request_log() const;
    void clear_log();

    MockWorld const &world() const noexcept { return m_world; }

private:
    struct Fault
    {
        std::vector<int> statuses;
        std::size_t next = 0;
        bool repeat = false;
        int latency_ms = 0;
        int retry_after_s = -1;
        bool corrupt = false;
    };

    struct Impl;

    void install_routes();

    MockWorld m_world;
    std::unique_ptr<Impl> m_impl;
    std::thread m_thread;
    int m_port = 0;
    std::string m_host;

    mutable std::mutex m_mutex;
    std::map<std::string, Fault> m_faults; ///< key: "source|z/x/y"
    std::vector<LogEntry> m_log;
};

} // namespace mapsat
