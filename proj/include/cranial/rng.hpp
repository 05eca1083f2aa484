#pragma once

#include <cstdint>
#include <initializer_list>
#include <string_view>

namespace cranial {

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

constexpr std::uint64_t tag(std::string_view name) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (char c : name) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ull;
    }
    return h;
}

/// Sub-seed derivation: derive(parent, {a, b, ...}) folds each component in
/// order, so (case seed -> patch index -> field) chains are replayable from
/// the parent alone.
constexpr std::uint64_t derive(std::uint64_t parent, std::initializer_list<std::uint64_t> path) {
    std::uint64_t s = mix64(parent);
    for (auto p : path) s = mix64(s ^ mix64(p + 0x632be59bd9b4e019ull));
    return s;
}

/// Counter-based generator: the i-th draw is a pure function of (key, i).
/// Distributions are implemented here rather than via <random> so sequences
/// are identical across standard libraries.
class Rng {
public:
    explicit constexpr Rng(std::uint64_t key) : key_(mix64(key)) {}

    constexpr std::uint64_t next_u64() { return mix64(key_ ^ mix64(counter_++)); }

    /// Uniform in [0, 1) with 53 random bits.
    constexpr double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    constexpr double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [lo, hi] (inclusive), rejection-sampled to avoid modulo bias.
    constexpr std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
        if (range == 0) return static_cast<std::int64_t>(next_u64());
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % range);
        std::uint64_t r = next_u64();
        while (r >= limit) r = next_u64();
        return lo + static_cast<std::int64_t>(r % range);
    }

    constexpr std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace cranial
