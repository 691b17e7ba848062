#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <utility>

namespace mapsat {

/// splitmix64 step. Used to expand seeds and as a stateless hash mixer.
constexpr std::uint64_t splitmix64(std::uint64_t &state) noexcept
{
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30U)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27U)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31U);
}

/// Order-dependent hash of a sequence of 64-bit words.
constexpr std::uint64_t hash_words(std::initializer_list<std::uint64_t> words) noexcept
{
    std::uint64_t state = 0x6D61707361742D31ULL;
    std::uint64_t h = 0;
    for (auto w : words) {
        state ^= w;
        h = splitmix64(state);
        state ^= h;
    }
    return h;
}

/**
 * xoshiro256** 1.0 (Blackman & Vigna), seeded by four splitmix64 outputs.
 *
 * This is the only generator used for sampling, splitting and mock tile
 * synthesis. Its output is fully specified, so every seeded result is
 * reproducible across compilers and platforms.
 */
class Xoshiro256
{
public:
    using result_type = std::uint64_t;

    explicit constexpr Xoshiro256(std::uint64_t seed) noexcept
    {
        std::uint64_t sm = seed;
        for (auto &word : m_state) {
            word = splitmix64(sm);
        }
    }

    constexpr std::uint64_t next() noexcept
    {
        std::uint64_t const result = rotl(m_state[1] * 5, 7) * 9;
        std::uint64_t const t = m_state[1] << 17U;
        m_state[2] ^= m_state[0];
        m_state[3] ^= m_state[1];
        m_state[1] ^= m_state[2];
        m_state[0] ^= m_state[3];
        m_state[2] ^= t;
        m_state[3] = rotl(m_state[3], 45);
        return result;
    }

    constexpr std::uint64_t operator()() noexcept { return next(); }

    /// Uniform integer in [0, bound). Lemire's multiply-shift with rejection.
    std::uint64_t below(std::uint64_t bound) noexcept
    {
        if (bound == 0) {
            return 0;
        }
        unsigned __int128 m = static_cast<unsigned __int128>(next()) * bound;
        auto low = static_cast<std::uint64_t>(m);
        if (low < bound) {
            std::uint64_t const threshold = (0 - bound) % bound;
            while (low < threshold) {
                m = static_cast<unsigned __int128>(next()) * bound;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64U);
    }

    /// Uniform double in [0, 1) built from the top 53 bits.
    double uniform() noexcept
    {
        return static_cast<double>(next() >> 11U) * 0x1.0p-53;
    }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) noexcept
    {
        return lo + (hi - lo) * uniform();
    }

    static constexpr std::uint64_t min() noexcept { return 0; }
    static constexpr std::uint64_t max() noexcept { return ~std::uint64_t{0}; }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept
    {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t m_state[4]{};
};

/// Shuffle the first `count` positions of `items` (partial Fisher-Yates).
template <typename T>
void partial_shuffle(std::span<T> items, std::size_t count, Xoshiro256 &rng)
{
    for (std::size_t i = 0; i < count && i < items.size(); ++i) {
        auto const j = i + static_cast<std::size_t>(rng.below(items.size() - i));
        using std::swap;
        swap(items[i], items[j]);
    }
}

} // namespace mapsat
