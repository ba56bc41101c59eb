#pragma once

#include <cstdint>
#include <random>

namespace adagad {

// splitmix64 step; used both as a generator seeder and a stream splitter.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d35a2d746d528bull;
    return z ^ (z >> 31);
}

/// Deterministic RNG stream keyed by (seed, stream ids). Distinct key tuples
/// give statistically independent streams, so concurrent consumers can each
/// derive their own stream without sharing mutable state.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : engine_(mix(seed, 0, 0, 0)) {}
    RngStream(std::uint64_t seed, std::uint64_t a) : engine_(mix(seed, a, 0, 0)) {}
    RngStream(std::uint64_t seed, std::uint64_t a, std::uint64_t b) : engine_(mix(seed, a, b, 0)) {}
    RngStream(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c)
        : engine_(mix(seed, a, b, c)) {}

    std::mt19937_64& engine() { return engine_; }

    /// Uniform integer in [0, n).
    std::size_t index(std::size_t n) {
        return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
    }
    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
    bool bernoulli(double p) {
        if (p <= 0.0) return false;
        if (p >= 1.0) return true;
        return uniform() < p;
    }
    double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }

private:
    static std::uint64_t mix(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
        std::uint64_t s = seed;
        std::uint64_t h = splitmix64(s);
        s ^= a * 0x2545f4914f6cdd1dull;
        h ^= splitmix64(s);
        s ^= b * 0x9e3779b97f4a7c15ull;
        h ^= splitmix64(s);
        s ^= c * 0xd1342543de82ef95ull;
        h ^= splitmix64(s);
        return h;
    }

    std::mt19937_64 engine_;
};

}  // namespace adagad
