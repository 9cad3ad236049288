#pragma once

#include <cstdint>
#include <string_view>

namespace edrloop {

// Deterministic generator (splitmix64). std:: engines are portable but the
// distributions are implementation-defined, which would break byte-identical
// replay across standard libraries; all draws go through this type instead.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53-bit resolution.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    bool bernoulli(double p) { return next_double() < p; }

    // Uniform integer in [0, n).
    std::uint64_t next_below(std::uint64_t n) {
        return n == 0 ? 0 : next_u64() % n;
    }

private:
    std::uint64_t state_;
};

// Stable per-subsystem stream derivation: FNV-1a over the label, folded into
// the master seed. Same master seed + same label = same stream, everywhere.
std::uint64_t derive_seed(std::uint64_t master, std::string_view label);

} // namespace edrloop
