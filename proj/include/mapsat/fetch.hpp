#pragma once

#include "mapsat/geo.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mapsat {

using Header = std::pair<std::string, std::string>;

inline constexpr char default_user_agent[] =
    "mapsat/0.1 (paired map/satellite tile dataset builder)";

/**
 * A named XYZ endpoint. The URL template must contain each of {z}, {x} and
 * {y} exactly once; a User-Agent header is added when none is given.
 */
class TileSource
{
public:
    struct Options
    {
        std::vector<Header> headers;
        double max_requests_per_second = 2.0;
        int max_retries = 3;
        int backoff_base_ms = 500;
        int timeout_ms = 10'000;
    };

    TileSource(std::string name, std::string url_template, Options options);
    TileSource(std::string name, std::string url_template);

    std::string const &name() const noexcept { return m_name; }
    std::string const &url_template() const noexcept { return m_template; }
    std::vector<Header> const &headers() const noexcept
    {
        return m_options.headers;
    }
    double max_requests_per_second() const noexcept
    {
        return m_options.max_requests_per_second;
    }
    int max_retries() const noexcept { return m_options.max_retries; }
    int backoff_base_ms() const noexcept { return m_options.backoff_base_ms; }
    int timeout_ms() const noexcept { return m_options.timeout_ms; }

private:
    std::string m_name;
    std::string m_template;
    Options m_options;
};

/// Decimal substitution of z/x/y into the template.
std::string tile_url(TileSource const &s, TileCoord const &t);

/**
 * Built-in sources: "osm", "worldimagery", "worldimagery-clarity",
 * "mock-map" and "mock-sat". Mock sources point at `mock_base_url`.
 */
TileSource preset_source(std::string_view name,
                         std::string_view mock_base_url = "http://127.0.0.1:8089");

/// Either a preset name (string) or an object with explicit fields.
TileSource source_from_json(nlohmann::json const &j,
                            std::string_view mock_base_url = "http://127.0.0.1:8089");

nlohmann::json to_json(TileSource const &s);

/**
 * On-disk tile store laid out as <root>/<source>/<z>/<x>/<y>.png with a
 * "<y>.png.sha256" sidecar holding the hex digest of the stored bytes.
 *
 * Writes go through temp-file, fsync, rename, so readers never see a
 * partially written entry. An entry counts as present only when the sidecar
 * digest matches the data and the data decodes as an image.
 */
class TileCache
{
public:
    enum class Status { hit, miss, corrupt };

    struct Lookup
    {
        Status status;
        std::vector<std::uint8_t> bytes;
    };

    explicit TileCache(std::filesystem::path root);

    /// $MAPSAT_CACHE_ROOT if set, otherwise `fallback`.
    static std::filesystem::path resolve_root(std::filesystem::path const &fallback);

    std::filesystem::path const &root() const noexcept { return m_root; }

    std::filesystem::path entry_path(std::string_view source,
                                     TileCoord const &t) const;
    std::filesystem::path sidecar_path(std::string_view source,
                                       TileCoord const &t) const;

    Lookup lookup(std::string_view source, TileCoord const &t) const;

    /// Stored bytes of a valid entry, or nullopt.
    std::optional<std::vector<std::uint8_t>> load(std::string_view source,
                                                  TileCoord const &t) const;

    void store(std::string_view source, TileCoord const &t,
               std::span<std::uint8_t const> bytes) const;

    void invalidate(std::string_view source, TileCoord const &t) const;

private:
    std::filesystem::path m_root;
};

/**
 * Thread-safe token bucket with a burst capacity of `burst` tokens,
 * implemented as virtual scheduling: acquire() blocks until the caller's
 * slot arrives.
 */
class TokenBucket
{
public:
    using clock = std::chrono::steady_clock;

    explicit TokenBucket(double rate_per_second, double burst = 1.0);

    void acquire();

    double rate() const noexcept { return m_rate; }

private:
    std::mutex m_mutex;
    double m_rate;
    clock::duration m_interval;
    clock::duration m_tolerance;
    clock::time_point m_theoretical_arrival;
};

enum class Origin { cache, network };

struct FetchResult
{
    std::vector<std::uint8_t> bytes;
    Origin origin;
    int attempts; ///< network attempts, 0 for a cache hit
};

struct FetchFailure
{
    TileCoord coord;
    std::string error_class; ///< "permanent", "transient", "invalid-response", "io"
    std::string message;
};

struct FetchReport
{
    std::size_t requested = 0;
    std::size_t downloaded = 0;
    std::size_t cache_hits = 0;
    std::vector<FetchFailure> failed;
    std::int64_t elapsed_ms = 0;

    bool conserved() const noexcept
    {
        return requested == downloaded + cache_hits + failed.size();
    }
};

nlohmann::json to_json(FetchReport const &r);

/**
 * Fetches tiles of one source into one cache. All calls made through the
 * same fetcher share its rate limiter, including concurrent workers of
 * fetch_batch().
 */
class TileFetcher
{
public:
    TileFetcher(TileSource source, TileCache cache);
    ~TileFetcher();

    TileFetcher(TileFetcher const &) = delete;
    TileFetcher &operator=(TileFetcher const &) = delete;

    TileSource const &source() const noexcept { return m_source; }
    TileCache const &cache() const noexcept { return m_cache; }

    /// Throws PermanentFetchError or TransientFetchError.
    FetchResult fetch_tile(TileCoord const &t);

    /// Never throws for per-tile failures; they are listed in the report.
    FetchReport fetch_batch(std::span<TileCoord const> tiles,
                            unsigned parallelism);

    /// Total HTTP attempts issued so far.
    std::uint64_t network_attempts() const noexcept
    {
        return m_attempts.load();
    }

private:
    class Session;

    FetchResult fetch_with(Session &session, TileCoord const &t);

    TileSource m_source;
    TileCache m_cache;
    TokenBucket m_bucket;
    std::atomic<std::uint64_t> m_attempts{0};
};

FetchResult fetch_tile(TileSource const &s, TileCoord const &t,
                       TileCache const &cache);

FetchReport fetch_batch(TileSource const &s, std::span<TileCoord const> tiles,
                        TileCache const &cache, unsigned parallelism);

} // namespace mapsat
