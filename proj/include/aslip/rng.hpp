#pragma once

#include <cstdint>
#include <random>

namespace aslip {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Maps 64 random bits to [0, 1) using the top 53 bits.
constexpr double unit_double(std::uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Stateless counter-based generator: the value for (index, lane) depends
/// only on (seed, stream, index, lane), so samples can be produced in any
/// order or in parallel.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream) : key_(mix64(mix64(seed) ^ mix64(~stream))) {}

    std::uint64_t bits(std::uint64_t index, std::uint64_t lane) const {
        return mix64(key_ ^ mix64(index * 0x100000001b3ULL + lane));
    }

    double uniform(std::uint64_t index, std::uint64_t lane) const { return unit_double(bits(index, lane)); }

    double uniform(std::uint64_t index, std::uint64_t lane, double lo, double hi) const {
        return lo + (hi - lo) * uniform(index, lane);
    }

private:
    std::uint64_t key_;
};

/// Sequential engine for training loops. Uses mt19937_64 for the bit stream
/// and our own bits-to-real mapping so results do not depend on the
/// standard library's distribution implementations.
class SeqRng {
public:
    explicit SeqRng(std::uint64_t seed) : engine_(mix64(seed)) {}

    double uniform() { return unit_double(engine_()); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n) by rejection.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t v;
        do v = engine_();
        while (v >= limit);
        return v % n;
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace aslip
