#pragma once

// Deterministic, platform-independent randomness. Every stochastic routine in
// the library consumes seeds derived from a CommonRandomness root, so a run
// is reproducible bit-for-bit from (master seed, derivation path).

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "unisep/core.hpp"

namespace unisep {

/// splitmix64 finalizer; also used as the seed-mixing primitive.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t hash_label(std::string_view label) {
    // FNV-1a
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : label) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t salt) {
    return mix64(parent ^ mix64(salt));
}

/// Small, fast, portable generator (period 2^64). Good enough for the Monte
/// Carlo workloads here and trivially seedable per codeword.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, bound) via the multiply-shift reduction.
    std::uint64_t bounded(std::uint64_t bound) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next()) * bound) >> 64);
    }

private:
    std::uint64_t state_;
};

/// Shared random seed plus a human-readable derivation path. Identical
/// (seed, path) pairs derive identical randomness everywhere.
class CommonRandomness {
public:
    explicit CommonRandomness(std::uint64_t master)
        : master_(master), state_(mix64(master)) {}

    CommonRandomness derived(std::string_view label) const {
        CommonRandomness child = *this;
        child.state_ = derive_seed(state_, hash_label(label));
        child.path_.emplace_back(label);
        return child;
    }

    CommonRandomness derived(std::string_view label, std::uint64_t index) const {
        CommonRandomness child = *this;
        child.state_ = derive_seed(derive_seed(state_, hash_label(label)), index);
        child.path_.emplace_back(std::string(label) + "[" + std::to_string(index) + "]");
        return child;
    }

    std::uint64_t master() const noexcept { return master_; }

    /// Leaf seed for direct SplitMix64 use.
    std::uint64_t seed() const noexcept { return state_; }

    SplitMix64 rng() const { return SplitMix64(state_); }

    const std::vector<std::string>& path() const noexcept { return path_; }

private:
    std::uint64_t master_;
    std::uint64_t state_;
    std::vector<std::string> path_;
};

/// Inverse-CDF sampler over a Pmf. Cumulative walk; alphabets here are small.
class PmfSampler {
public:
    explicit PmfSampler(const Pmf& p) : cumulative_(p.size()) {
        double acc = 0.0;
        for (std::size_t s = 0; s < p.size(); ++s) {
            acc += p[s];
            cumulative_[s] = acc;
        }
        cumulative_.back() = 1.0;
    }

    Symbol sample(SplitMix64& rng) const {
        const double u = rng.uniform01();
        for (std::size_t s = 0; s + 1 < cumulative_.size(); ++s)
            if (u < cumulative_[s]) return static_cast<Symbol>(s);
        return static_cast<Symbol>(cumulative_.size() - 1);
    }

    std::size_t alphabet_size() const noexcept { return cumulative_.size(); }

private:
    std::vector<double> cumulative_;
};

} // namespace unisep
