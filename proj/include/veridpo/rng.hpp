#pragma once

// Deterministic RNG used everywhere randomness is needed.
// No std::uniform_* distributions: their output is implementation-defined,
// and mined artifacts must be byte-identical across reruns.

#include <cstdint>

namespace veridpo {

class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53 bits of mantissa.
    double u01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Uniform integer in [lo, hi] inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        if (hi <= lo) return lo;
        std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        // Rejection-free multiply-shift reduction (Lemire); bias negligible
        // for the tiny spans used here, but keep the widening for correctness.
        unsigned __int128 m = static_cast<unsigned __int128>(next()) * span;
        return lo + static_cast<std::int64_t>(static_cast<std::uint64_t>(m >> 64));
    }

    double uniform_real(double lo, double hi) { return lo + (hi - lo) * u01(); }

private:
    std::uint64_t state_;
};

// Hierarchical seed derivation: master -> subcommand -> subject -> prompt.
// Mixing through SplitMix64 keeps child streams decorrelated.
inline std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t salt) {
    SplitMix64 g(parent ^ (salt * 0x9E3779B97F4A7C15ull + 0x6A09E667F3BCC909ull));
    return g.next();
}

inline std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t a, std::uint64_t b) {
    return derive_seed(derive_seed(parent, a), b);
}

}  // namespace veridpo
