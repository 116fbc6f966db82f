#pragma once

#include <cmath>
#include <cstdint>

namespace ir {

// Counter-based generator: output i is a pure function of (key, i), so any
// sample index can be drawn independently of the others. This is what makes
// per-pixel noise streams safe to evaluate in parallel and reproducible
// regardless of thread count.
namespace detail {
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}
} // namespace detail

// Derives an independent stream key from a base seed and an index.
// Used for per-step, per-pixel and per-bench-cell seeds.
inline uint64_t derive_seed(uint64_t seed, uint64_t index) {
    return detail::splitmix64(seed ^ detail::splitmix64(index ^ 0xD1B54A32D192ED03ull));
}

class Rng {
public:
    explicit Rng(uint64_t key) : key_(key) {}

    uint64_t next_u64() { return detail::splitmix64(key_ + 0x9E3779B97F4A7C15ull * ++ctr_); }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform in (0, 1], safe as a log() argument
    double uniform_pos() { return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53; }

    // standard normal via Box-Muller (cosine branch)
    double normal() {
        double u1 = uniform_pos();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    // Poisson(lambda). Inversion by sequential search for small lambda,
    // Hormann's PTRS transformed rejection otherwise.
    uint64_t poisson(double lambda) {
        if (lambda <= 0.0) return 0;
        if (lambda < 30.0) return poisson_knuth(lambda);
        return poisson_ptrs(lambda);
    }

private:
    uint64_t poisson_knuth(double lambda) {
        const double limit = std::exp(-lambda);
        uint64_t k = 0;
        double p = 1.0;
        do {
            ++k;
            p *= uniform_pos();
        } while (p > limit);
        return k - 1;
    }

    uint64_t poisson_ptrs(double lambda) {
        const double slam = std::sqrt(lambda);
        const double loglam = std::log(lambda);
        const double b = 0.931 + 2.53 * slam;
        const double a = -0.059 + 0.02483 * b;
        const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        const double vr = 0.9277 - 3.6224 / (b - 2.0);
        for (;;) {
            double u = uniform() - 0.5;
            double v = uniform_pos();
            double us = 0.5 - std::abs(u);
            double k = std::floor((2.0 * a / us + b) * u + lambda + 0.43);
            if (us >= 0.07 && v <= vr) return static_cast<uint64_t>(k);
            if (k < 0.0 || (us < 0.013 && v > us)) continue;
            if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
                k * loglam - lambda - std::lgamma(k + 1.0)) {
                return static_cast<uint64_t>(k);
            }
        }
    }

    uint64_t key_;
    uint64_t ctr_ = 0;
};

} // namespace ir
