#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "ttm/error.hpp"

namespace ttm {

// Deterministic PRNG used everywhere randomness is needed, so every stream is
// reproducible bit-for-bit across platforms for a given seed. SplitMix64 for
// the integer stream, Box-Muller for Gaussians, Marsaglia-Tsang for Gamma.
class SplitMix64 {
public:
    explicit SplitMix64(uint64_t seed) : state_(seed) {}

    uint64_t next() {
        state_ += 0x9e3779b97f4a7c15ull;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform() {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    // Uniform integer in [0, n). Modulo bias is negligible for desk-scale n.
    uint64_t below(uint64_t n) {
        if (n == 0) throw DomainError("below: n must be positive");
        return next() % n;
    }

    // Standard normal via Box-Muller; the second variate of each pair is
    // cached so consecutive calls consume the integer stream evenly.
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform(); // in (0, 1], keeps the log finite
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * kPi * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    double gaussian(double mean, double stddev) {
        return mean + stddev * gaussian();
    }

    // Gamma(alpha, 1) via Marsaglia-Tsang; alpha < 1 handled with the boost
    // Gamma(alpha) = Gamma(alpha + 1) * U^(1/alpha).
    double gamma(double alpha) {
        if (!(alpha > 0.0)) throw DomainError("gamma: alpha must be positive");
        if (alpha < 1.0) {
            const double u = 1.0 - uniform(); // in (0, 1]
            return gamma(alpha + 1.0) * std::pow(u, 1.0 / alpha);
        }
        const double d = alpha - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x = 0.0;
            double v = 0.0;
            do {
                x = gaussian();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = 1.0 - uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    double beta(double a, double b) {
        const double ga = gamma(a);
        const double gb = gamma(b);
        const double sum = ga + gb;
        if (sum <= 0.0) return 0.5; // both draws underflowed to zero
        return ga / sum;
    }

    // Fisher-Yates; identical element order for identical seeds.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            const size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    static constexpr double kPi = 3.14159265358979323846;

    uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace ttm
