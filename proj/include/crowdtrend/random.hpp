#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace crowdtrend::rnd {

// The standard distributions are implementation-defined; these helpers keep
// seeded runs identical across standard libraries.

inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline std::size_t index(std::mt19937_64& rng, std::size_t n) {
    return static_cast<std::size_t>(rng() % n);
}

inline bool bernoulli(std::mt19937_64& rng, double p) { return uniform01(rng) < p; }

inline double exponential(std::mt19937_64& rng, double mean) {
    return -mean * std::log1p(-uniform01(rng));
}

inline double normal(std::mt19937_64& rng) {
    double u1 = uniform01(rng);
    double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(6.283185307179586 * u2);
}

/// Index drawn proportionally to nonnegative weights.
inline std::size_t weighted(std::mt19937_64& rng, std::span<const double> weights) {
    double total = 0;
    for (double w : weights) total += w;
    double x = uniform01(rng) * total;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (x < weights[i]) return i;
        x -= weights[i];
    }
    return weights.size() - 1;
}

template <typename T>
void shuffle(std::vector<T>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::swap(v[i - 1], v[index(rng, i)]);
    }
}

}  // namespace crowdtrend::rnd
