#pragma once

// Counter-based random streams.  A stream is identified by (seed, stream id);
// the n-th draw is a pure function of (seed, stream id, n), so shots can be
// run in any order or on any thread and still reproduce bit for bit.
//
// The samplers below are written out rather than taken from <random> because
// the standard distributions are implementation-defined and would break
// cross-platform reproducibility.

#include <cmath>
#include <cstdint>
#include <limits>

#include "dispfock/errors.hpp"

namespace dispfock {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::uint64_t stream)
        : key_(splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632be59bd9b4e019ULL))) {}

    std::uint64_t next_u64() { return splitmix64(key_ ^ splitmix64(counter_++)); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform() < p; }

    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

/// Poisson variate.  lambda = +inf returns the largest int (an always-bright detector).
inline int sample_poisson(RandomStream& rng, double lambda) {
    if (!(lambda >= 0.0)) throw BoundsError("Poisson mean must be >= 0");
    if (std::isinf(lambda)) return std::numeric_limits<int>::max();
    if (lambda == 0.0) return 0;
    if (lambda < 30.0) {
        // sequential inversion
        double u = rng.uniform();
        double p = std::exp(-lambda);
        int k = 0;
        double cdf = p;
        while (u > cdf && k < 1000) {
            ++k;
            p *= lambda / k;
            cdf += p;
        }
        return k;
    }
    // Atkinson-style rejection is overkill for our use; a split into two halves keeps exactness.
    return sample_poisson(rng, 0.5 * lambda) + sample_poisson(rng, 0.5 * lambda);
}

inline int sample_binomial(RandomStream& rng, int trials, double p) {
    if (trials < 0) throw BoundsError("binomial trial count must be >= 0");
    if (!(p >= 0.0 && p <= 1.0)) throw BoundsError("binomial probability must lie in [0, 1]");
    int k = 0;
    for (int i = 0; i < trials; ++i) k += rng.bernoulli(p) ? 1 : 0;
    return k;
}

} // namespace dispfock
