#pragma once

#include <cstdint>
#include <string_view>

#include "leakprobe/util.hpp"

namespace leakprobe {

/// Deterministic PRNG with platform-stable output. Standard-library
/// distributions are implementation-defined across toolchains, so every
/// reproducibility-sensitive draw in the project goes through this.
class SplitMix64 {
public:
    explicit SplitMix64(uint64_t seed) : state_(seed) {}

    uint64_t next() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1), 53 bits of entropy.
    double uniform() {
        return static_cast<double>(next() >> 11) * (1.0 / 9007199254740992.0);
    }

    /// Uniform integer in [0, n). n must be > 0.
    uint64_t bounded(uint64_t n) {
        // Debiased multiply-shift (Lemire).
        uint64_t x = next();
        __uint128_t m = static_cast<__uint128_t>(x) * static_cast<__uint128_t>(n);
        uint64_t l = static_cast<uint64_t>(m);
        if (l < n) {
            uint64_t t = (0 - n) % n;
            while (l < t) {
                x = next();
                m = static_cast<__uint128_t>(x) * static_cast<__uint128_t>(n);
                l = static_cast<uint64_t>(m);
            }
        }
        return static_cast<uint64_t>(m >> 64);
    }

    bool bernoulli(double p) { return uniform() < p; }

private:
    uint64_t state_;
};

/// Derives an independent, order-free stream for (seed, tag). Used for
/// per-trial randomness so parallel execution stays reproducible.
inline SplitMix64 derive_stream(uint64_t seed, std::string_view tag) {
    uint64_t h = fnv1a64(tag, 0x9e3779b97f4a7c15ull ^ seed);
    return SplitMix64(h ^ (seed * 0xff51afd7ed558ccdull));
}

}  // namespace leakprobe
