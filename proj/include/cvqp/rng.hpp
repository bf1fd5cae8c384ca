#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace cvqp {

/**
 * SplitMix64: a Weyl counter (step 0x9E3779B97F4A7C15) passed through a
 * fixed 64-bit finalizer. Every draw is a pure function of (seed, draw index),
 * so streams are easy to reproduce in any language.
 *
 * Derived samplers, each consuming draws in the order listed:
 *   uniform()   (x >> 11) * 2^-53                       in [0, 1)
 *   normal()    u1 = ((x1 >> 11) + 1) * 2^-53, u2 = uniform();
 *               sqrt(-2 ln u1) * cos(2 pi u2)           (cosine branch only)
 *   student_t() normal() / sqrt(chi2 / dof), chi2 = sum of dof squared normal()s
 */
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double normal() {
        const double u1 = static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double student_t(int dof) {
        const double num = normal();
        double chi2 = 0.0;
        for (int i = 0; i < dof; ++i) {
            const double g = normal();
            chi2 += g * g;
        }
        return num / std::sqrt(chi2 / dof);
    }

private:
    std::uint64_t state_;
};

}  // namespace cvqp
