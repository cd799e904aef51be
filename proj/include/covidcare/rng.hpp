#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace covidcare {

using Rng = std::mt19937_64;

// Derives an independent, reproducible stream from (seed, tag, index).
// FNV-1a over the tag keeps streams stable across builds.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](std::uint64_t x) {
        for (int i = 0; i < 8; ++i) {
            h ^= (x >> (8 * i)) & 0xffull;
            h *= 1099511628211ull;
        }
    };
    mix(seed);
    for (char c : tag) {
        h ^= static_cast<std::uint8_t>(c);
        h *= 1099511628211ull;
    }
    mix(index);
    return h;
}

inline Rng make_rng(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0) {
    return Rng(derive_seed(seed, tag, index));
}

inline double uniform(Rng& rng, double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    return d(rng);
}

inline double gaussian(Rng& rng, double mean = 0.0, double stddev = 1.0) {
    std::normal_distribution<double> d(mean, stddev);
    return d(rng);
}

}  // namespace covidcare
