#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace dpsl {

// SplitMix64 generator (Steele, Lea & Flood 2014). Chosen because the whole
// state is one 64-bit word, it is trivial to port bit-exactly, and new
// independent streams can be derived by hashing the parent's output.
// Reference outputs for seed 42 are listed in the README and asserted in
// the unit tests.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53-bit resolution.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform in (0, 1); safe as a log() argument.
    double next_open() {
        return (static_cast<double>(next_u64() >> 12) + 0.5) * 0x1.0p-52;
    }

    // Derive an independent child stream. Advances this generator once.
    SplitMix64 split() {
        return SplitMix64(next_u64() ^ 0x6a09e667f3bcc909ull);
    }

    // Box-Muller, consuming two uniforms per draw (the second variate is
    // discarded so the stream position does not depend on call history).
    double normal() {
        double u1 = next_open();
        double u2 = next_open();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

    // Gamma(shape, 1) via Marsaglia-Tsang squeeze. Shapes below 1 use the
    // boost: draw at shape+1 and scale by U^(1/shape).
    double gamma(double shape) {
        if (!(shape > 0.0))
            throw std::domain_error("gamma: shape must be positive");
        if (shape < 1.0) {
            double u = next_open();
            return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = next_open();
            if (u < 1.0 - 0.0331 * x * x * x * x)
                return d * v;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v)))
                return d * v;
        }
    }

private:
    std::uint64_t state_;
};

} // namespace dpsl
