#pragma once

// Seeded random source with platform-independent draws. The standard
// distributions are implementation-defined, so the few we need are spelled
// out on top of mt19937_64, whose output sequence is fixed by the standard.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

namespace lake {

/// Independent seed for a named sub-stream (splitmix64 finaliser), so that two
/// consumers given the same user seed never draw the same sequence.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

enum class SeedStream : std::uint64_t { Synthetic = 0, RandomChannels = 1, SupportSubsample = 2 };

constexpr std::uint64_t derive_seed(std::uint64_t seed, SeedStream stream) noexcept {
    return derive_seed(seed, static_cast<std::uint64_t>(stream));
}

class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform integer in [0, n), rejection-sampled.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller (no cached second value, so draws are order-simple).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// Fisher-Yates permutation of [0, n).
    template <typename Int = std::size_t>
    std::vector<Int> permutation(std::size_t n) {
        std::vector<Int> p(n);
        for (std::size_t i = 0; i < n; ++i) p[i] = static_cast<Int>(i);
        for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[below(i)]);
        return p;
    }

    std::mt19937_64& engine() noexcept { return engine_; }

private:
    std::mt19937_64 engine_;
};

}  // namespace lake
