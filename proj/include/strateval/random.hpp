/**
 * Seeded random streams for reproducible sampling.
 *
 * Every random draw in the library comes from a Stream constructed from a
 * 64-bit seed. Derived seeds (per cell, per replicate) are produced with
 * mix_seed(), a SplitMix64 finalizer chained over the inputs, so a replicate's
 * stream depends only on (master seed, cell index, replicate index) and not on
 * execution order.
 */
#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace strateval {

/// SplitMix64 finalizer.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/**
 * Derive a seed from a base seed and a sequence of counters.
 *
 * mix_seed(s, {a, b}) = splitmix64(splitmix64(splitmix64(s) ^ a) ^ b).
 * This is the documented replicate-seed scheme used by the experiment harness
 * with counters (cell_index, replicate_index).
 */
constexpr std::uint64_t mix_seed(std::uint64_t base,
                                 std::initializer_list<std::uint64_t> counters) noexcept {
    std::uint64_t h = splitmix64(base);
    for (std::uint64_t c : counters) h = splitmix64(h ^ c);
    return h;
}

/// A 64-bit Mersenne Twister with a few convenience draws.
class Stream {
public:
    explicit Stream(std::uint64_t seed) : engine_(seed) {}

    /// Uniform integer in [0, bound).
    std::size_t index(std::size_t bound) {
        std::uniform_int_distribution<std::size_t> dist(0, bound - 1);
        return dist(engine_);
    }

    /// Uniform real in [0, 1).
    double uniform() {
        std::uniform_real_distribution<double> dist(0.0, 1.0);
        return dist(engine_);
    }

    double normal(double mean, double sd) {
        std::normal_distribution<double> dist(mean, sd);
        return dist(engine_);
    }

    std::mt19937_64& engine() noexcept { return engine_; }

private:
    std::mt19937_64 engine_;
};

}  // namespace strateval
