#pragma once

#include <cmath>
#include <cstdint>
#include <random>

// Reproducibility helpers. std::mt19937_64 has a portable output sequence,
// but the standard <random> distributions do not, so the draws below are
// spelled out by hand. Every consumer derives its own stream with mix() so
// results never depend on call order elsewhere in the program.

namespace mempath::rng {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Derive a stream seed from a master seed and a stream index.
inline std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t state = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
    std::uint64_t a = splitmix64(state);
    state ^= a;
    return splitmix64(state);
}

inline std::mt19937_64 engine(std::uint64_t seed) {
    return std::mt19937_64(seed);
}

// Uniform in [0, 1) with 53 random bits.
inline double uniform01(std::mt19937_64& gen) {
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

// Unbiased uniform integer in [0, n).
inline std::uint64_t uniform_below(std::mt19937_64& gen, std::uint64_t n) {
    const std::uint64_t limit = n * (UINT64_MAX / n);
    std::uint64_t r;
    do {
        r = gen();
    } while (r >= limit);
    return r % n;
}

// Standard normal via Box-Muller (stateless; the sine partner is discarded).
inline double normal01(std::mt19937_64& gen) {
    const double u1 = 1.0 - uniform01(gen); // (0, 1], keeps log() finite
    const double u2 = uniform01(gen);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
}

} // namespace mempath::rng
