#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace uum {

// Distributions are written out by hand so that generated bytes do not
// depend on the standard library's distribution implementations.

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed for an independent stream keyed by (seed, stream id, salt).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t salt = 0) {
    return splitmix64(splitmix64(seed ^ splitmix64(salt)) ^ stream);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n) by rejection; n must be positive.
    std::uint64_t index(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Box-Muller; one variate per call.
    double normal(double mean = 0.0, double stddev = 1.0) {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        return mean + stddev * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Draw an index according to non-negative weights summing to ~1.
    std::size_t categorical(const std::vector<double>& weights) {
        double u = uniform();
        double acc = 0.0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            acc += weights[i];
            if (u < acc) return i;
        }
        return weights.size() - 1;
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(index(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

} // namespace uum
