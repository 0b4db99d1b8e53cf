#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace tunekit {

// SplitMix64. The exact stream is part of the reproducibility contract of
// random search, the surrogate pool and the simulated cost model.
class SplitMix64 {
  public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53 bits of precision.
    double uniform() {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    // Uniform index in [0, n). Plain modulo; n is always tiny compared to 2^64.
    std::uint64_t below(std::uint64_t n) {
        return next() % n;
    }

    // Standard normal via Box-Muller, consuming exactly two draws.
    double gaussian() {
        double u1 = 1.0 - uniform();  // (0, 1]
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

  private:
    std::uint64_t state_;
};

// Combines two 64-bit values into a well-mixed seed.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    SplitMix64 rng(a ^ (b * 0x9E3779B97F4A7C15ULL));
    return rng.next();
}

}  // namespace tunekit
