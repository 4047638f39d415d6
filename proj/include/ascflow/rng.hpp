#pragma once

#include <cmath>
#include <cstdint>

namespace ascflow {

/// Small deterministic PRNG (splitmix64).  Used instead of <random> engines
/// so that sampled artifacts are byte-identical across platforms and
/// standard-library implementations.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in [a, b).
    double uniform(double a, double b) { return a + (b - a) * next_double(); }

    /// Log-uniform double in [a, b); requires 0 < a <= b.
    double log_uniform(double a, double b) { return a * std::exp(next_double() * std::log(b / a)); }

    /// Standard normal via Box-Muller (no state caching: two uniforms per draw).
    double normal() {
        double u1 = 0.0;
        do {
            u1 = next_double();
        } while (u1 <= 0.0);
        double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    /// Derive an independent stream for item `index` of a family, so samples
    /// do not shift when the batch size changes.
    static SplitMix64 for_item(std::uint64_t seed, std::uint64_t index) {
        SplitMix64 mixer(seed ^ (0x632be59bd9b4e019ull + index * 0x9e3779b97f4a7c15ull));
        return SplitMix64(mixer.next_u64());
    }

private:
    std::uint64_t state_;
};

} // namespace ascflow
