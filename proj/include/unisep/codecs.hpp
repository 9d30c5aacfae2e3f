#pragma once

// Random-coding constructions: channel codebooks of i.i.d. codewords with
// unique-joint-typicality decoding, and constant-composition source codebooks
// with joint-typicality (covering) encoding.
//
// Codewords are an indexed family: word j of a codebook is a pure function of
// (codebook seed, j). Materializing a Codebook and streaming single words
// therefore agree bit-for-bit, which lets the Monte Carlo harnesses scan
// large books lazily without storing them.

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "unisep/core.hpp"
#include "unisep/random.hpp"

namespace unisep {

inline constexpr std::size_t kDefaultCodebookCap = std::size_t{1} << 24;

/// Default typicality slack; experiments at modest block lengths usually
/// widen it, since the typical set only fills in as n grows.
inline constexpr double kDefaultEpsilon = 0.02;

enum class CodebookKind { ChannelCode, SourceCode };

/// ceil(2^{nR}) with a guard against spurious off-by-one from floating
/// rounding when nR lands on an integer.
inline std::size_t codebook_size(std::size_t n, double rate_bits) {
    if (!(rate_bits >= 0.0))
        throw std::invalid_argument("codebook_size: rate must be >= 0");
    const double v = std::exp2(static_cast<double>(n) * rate_bits);
    if (v > 9.0e15) throw ResourceLimit("codebook_size: 2^{nR} exceeds 2^53");
    const double r = std::round(v);
    if (std::abs(v - r) <= 1e-9 * std::max(1.0, v))
        return static_cast<std::size_t>(r);
    return static_cast<std::size_t>(std::ceil(v));
}

inline std::size_t checked_codebook_size(std::size_t n, double rate_bits, std::size_t cap) {
    const std::size_t m = codebook_size(n, rate_bits);
    if (m > cap)
        throw ResourceLimit("codebook of " + std::to_string(m) + " words exceeds cap " +
                            std::to_string(cap));
    return m;
}

/// Largest-remainder rounding of n*q to integer counts summing to n.
/// Remainder ties go to the lowest symbol index.
inline TypeVector quantize_type(const Pmf& q, std::size_t n) {
    if (n == 0) throw std::invalid_argument("quantize_type: n must be >= 1");
    const std::size_t k = q.size();
    std::vector<std::uint64_t> counts(k);
    std::vector<double> remainder(k);
    std::uint64_t assigned = 0;
    for (std::size_t s = 0; s < k; ++s) {
        const double exact = static_cast<double>(n) * q[s];
        counts[s] = static_cast<std::uint64_t>(std::floor(exact));
        remainder[s] = exact - static_cast<double>(counts[s]);
        assigned += counts[s];
    }
    std::vector<std::size_t> order(k);
    for (std::size_t s = 0; s < k; ++s) order[s] = s;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (remainder[a] != remainder[b]) return remainder[a] > remainder[b];
        return a < b;
    });
    for (std::size_t i = 0; assigned < n; ++i) {
        ++counts[order[i % k]];
        ++assigned;
    }
    return TypeVector(std::move(counts));
}

// ---------------------------------------------------------------------------
// Per-word generation
// ---------------------------------------------------------------------------

inline void channel_codeword_into(std::size_t n, const PmfSampler& p,
                                  std::uint64_t book_seed, std::size_t index,
                                  Sequence& out) {
    SplitMix64 rng(derive_seed(book_seed, index));
    out.symbols.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.symbols[i] = p.sample(rng);
}

inline Sequence channel_codeword(std::size_t n, const PmfSampler& p,
                                 std::uint64_t book_seed, std::size_t index) {
    Sequence w;
    channel_codeword_into(n, p, book_seed, index, w);
    return w;
}

/// Uniform draw from the type class of `composition` (Fisher-Yates shuffle of
/// the canonical multiset arrangement).
inline void source_codeword_into(const TypeVector& composition, std::uint64_t book_seed,
                                 std::size_t index, Sequence& out) {
    const std::size_t n = static_cast<std::size_t>(composition.n());
    out.symbols.clear();
    out.symbols.reserve(n);
    for (std::size_t s = 0; s < composition.counts.size(); ++s)
        out.symbols.insert(out.symbols.end(), composition.counts[s],
                           static_cast<Symbol>(s));
    SplitMix64 rng(derive_seed(book_seed, index));
    for (std::size_t i = n - 1; i > 0; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.bounded(i + 1));
        std::swap(out.symbols[i], out.symbols[j]);
    }
}

inline Sequence source_codeword(const TypeVector& composition, std::uint64_t book_seed,
                                std::size_t index) {
    Sequence w;
    source_codeword_into(composition, book_seed, index, w);
    return w;
}

// ---------------------------------------------------------------------------
// Codebooks
// ---------------------------------------------------------------------------

/// Indexed list of codewords with rate and seed provenance.
struct Codebook {
    CodebookKind kind = CodebookKind::ChannelCode;
    std::size_t n = 0;
    double rate = 0.0;
    std::uint64_t seed = 0;
    TypeVector composition; // source codes: the shared exact type
    std::vector<Sequence> words;

    std::size_t size() const noexcept { return words.size(); }
};

/// ceil(2^{nR}) codewords, symbols i.i.d. p.
inline Codebook gen_channel_codebook(std::size_t n, double rate, const Pmf& p,
                                     const CommonRandomness& cr,
                                     std::size_t cap = kDefaultCodebookCap) {
    if (n == 0) throw std::invalid_argument("gen_channel_codebook: n must be >= 1");
    const std::size_t m = checked_codebook_size(n, rate, cap);
    Codebook cb;
    cb.kind = CodebookKind::ChannelCode;
    cb.n = n;
    cb.rate = rate;
    cb.seed = cr.seed();
    cb.words.resize(m);
    const PmfSampler sampler(p);
    for (std::size_t j = 0; j < m; ++j)
        channel_codeword_into(n, sampler, cb.seed, j, cb.words[j]);
    return cb;
}

/// ceil(2^{nR}) codewords, each uniform over the type class of
/// quantize_type(q, n), independent across words.
inline Codebook gen_source_codebook(std::size_t n, double rate, const Pmf& q,
                                    const CommonRandomness& cr,
                                    std::size_t cap = kDefaultCodebookCap) {
    if (n == 0) throw std::invalid_argument("gen_source_codebook: n must be >= 1");
    const std::size_t m = checked_codebook_size(n, rate, cap);
    Codebook cb;
    cb.kind = CodebookKind::SourceCode;
    cb.n = n;
    cb.rate = rate;
    cb.seed = cr.seed();
    cb.composition = quantize_type(q, n);
    cb.words.resize(m);
    for (std::size_t j = 0; j < m; ++j)
        source_codeword_into(cb.composition, cb.seed, j, cb.words[j]);
    return cb;
}

/// Uniform scan interface over either a materialized codebook or a seeded
/// generative family. word(j) may fill an internal scratch buffer.
class CodebookView {
public:
    static CodebookView of(const Codebook& cb) {
        CodebookView v;
        v.book_ = &cb;
        v.n_ = cb.n;
        v.count_ = cb.size();
        return v;
    }

    static CodebookView channel_family(std::size_t n, std::size_t count, const Pmf& p,
                                       std::uint64_t seed) {
        CodebookView v;
        v.n_ = n;
        v.count_ = count;
        v.seed_ = seed;
        v.sampler_.emplace(p);
        return v;
    }

    static CodebookView source_family(std::size_t n, std::size_t count,
                                      TypeVector composition, std::uint64_t seed) {
        CodebookView v;
        v.n_ = n;
        v.count_ = count;
        v.seed_ = seed;
        v.composition_ = std::move(composition);
        return v;
    }

    std::size_t size() const noexcept { return count_; }
    std::size_t block_length() const noexcept { return n_; }

    const Sequence& word(std::size_t j) {
        if (book_) return book_->words[j];
        if (sampler_)
            channel_codeword_into(n_, *sampler_, seed_, j, scratch_);
        else
            source_codeword_into(composition_, seed_, j, scratch_);
        return scratch_;
    }

private:
    const Codebook* book_ = nullptr;
    std::size_t n_ = 0;
    std::size_t count_ = 0;
    std::uint64_t seed_ = 0;
    std::optional<PmfSampler> sampler_;
    TypeVector composition_;
    Sequence scratch_;
};

// ---------------------------------------------------------------------------
// Decoding / encoding rules
// ---------------------------------------------------------------------------

enum class DecodeStatus { Decoded, NoMatch, Ambiguous };

struct DecodeResult {
    DecodeStatus status = DecodeStatus::NoMatch;
    std::size_t index = 0;

    bool ok() const noexcept { return status == DecodeStatus::Decoded; }
};

/// Unique-joint-typicality decoding: returns the unique codeword index
/// jointly typical with y, NoMatch if there is none, Ambiguous if several.
inline DecodeResult channel_decode(const Sequence& y, CodebookView cb, const Pmf& p,
                                   const DistortionSpec& d, TypicalityParams eps) {
    DecodeResult r;
    for (std::size_t j = 0; j < cb.size(); ++j) {
        const Sequence& w = cb.word(j);
        if (!jointly_typical(w, y, p, d, eps)) continue;
        if (r.status == DecodeStatus::Decoded) {
            r.status = DecodeStatus::Ambiguous;
            return r;
        }
        r.status = DecodeStatus::Decoded;
        r.index = j;
    }
    return r;
}

inline DecodeResult channel_decode(const Sequence& y, const Codebook& cb, const Pmf& p,
                                   const DistortionSpec& d, TypicalityParams eps) {
    return channel_decode(y, CodebookView::of(cb), p, d, eps);
}

enum class EncodeStatus { Encoded, SourceAtypical, NoCover };

struct EncodeResult {
    EncodeStatus status = EncodeStatus::NoCover;
    std::size_t index = 0;

    bool ok() const noexcept { return status == EncodeStatus::Encoded; }
};

/// Covering encoder: smallest codeword index jointly typical with x.
/// Atypical x fails immediately; a typical x with no covering word fails
/// with NoCover.
inline EncodeResult source_encode(const Sequence& x, CodebookView cb,
                                  const DistortionSpec& d, const Pmf& p,
                                  TypicalityParams eps) {
    EncodeResult r;
    if (!is_typical(x, p, eps)) {
        r.status = EncodeStatus::SourceAtypical;
        return r;
    }
    for (std::size_t j = 0; j < cb.size(); ++j) {
        if (avg_distortion(x, cb.word(j), d) <= d.budget()) {
            r.status = EncodeStatus::Encoded;
            r.index = j;
            return r;
        }
    }
    r.status = EncodeStatus::NoCover;
    return r;
}

inline EncodeResult source_encode(const Sequence& x, const Codebook& cb,
                                  const DistortionSpec& d, const Pmf& p,
                                  TypicalityParams eps) {
    return source_encode(x, CodebookView::of(cb), d, p, eps);
}

} // namespace unisep
