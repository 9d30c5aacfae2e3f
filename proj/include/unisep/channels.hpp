#pragma once

// The general block-channel model: a per-block-length stochastic map
// X^n -> Y^n, deterministic given a transmit seed. Includes concrete channel
// constructors (DMCs, quantizing source-code channels) and the Monte Carlo
// estimator for membership in the distortion-compliance channel set.

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "unisep/codecs.hpp"
#include "unisep/core.hpp"
#include "unisep/parallel.hpp"
#include "unisep/random.hpp"

namespace unisep {

/// A channel: length-preserving stochastic map, reproducible given the seed.
class GeneralChannel {
public:
    using TransmitFn = std::function<Sequence(const Sequence&, std::uint64_t)>;

    GeneralChannel() = default;

    GeneralChannel(std::string descriptor, std::size_t input_alphabet,
                   std::size_t output_alphabet, TransmitFn fn)
        : descriptor_(std::move(descriptor)),
          input_alphabet_(input_alphabet),
          output_alphabet_(output_alphabet),
          fn_(std::move(fn)) {}

    Sequence transmit(const Sequence& x, std::uint64_t seed) const {
        Sequence y = fn_(x, seed);
        if (y.size() != x.size())
            throw InvalidChannel(descriptor_ + ": output length " + std::to_string(y.size()) +
                                 " != input length " + std::to_string(x.size()));
        for (Symbol s : y)
            if (s >= output_alphabet_)
                throw InvalidChannel(descriptor_ + ": output symbol outside alphabet");
        return y;
    }

    const std::string& descriptor() const noexcept { return descriptor_; }
    std::size_t input_alphabet_size() const noexcept { return input_alphabet_; }
    std::size_t output_alphabet_size() const noexcept { return output_alphabet_; }

private:
    std::string descriptor_;
    std::size_t input_alphabet_ = 0;
    std::size_t output_alphabet_ = 0;
    TransmitFn fn_;
};

/// Finite explicit channel set (the compound adversary under test).
struct ChannelSet {
    std::vector<GeneralChannel> members;

    ChannelSet() = default;
    explicit ChannelSet(std::vector<GeneralChannel> m) : members(std::move(m)) {
        if (members.empty()) throw std::invalid_argument("ChannelSet: empty");
        for (const auto& c : members)
            if (c.input_alphabet_size() != members.front().input_alphabet_size() ||
                c.output_alphabet_size() != members.front().output_alphabet_size())
                throw std::invalid_argument("ChannelSet: members disagree on alphabets");
    }
};

// ---------------------------------------------------------------------------
// Concrete channels
// ---------------------------------------------------------------------------

inline void validate_transition_matrix(const std::vector<std::vector<double>>& w) {
    if (w.empty() || w.front().empty()) throw InvalidChannel("empty transition matrix");
    for (const auto& row : w) {
        if (row.size() != w.front().size()) throw InvalidChannel("ragged transition matrix");
        double sum = 0.0;
        for (double v : row) {
            if (!(v >= 0.0)) throw InvalidChannel("negative transition probability");
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-12)
            throw InvalidChannel("transition row sums to " + std::to_string(sum));
    }
}

/// Memoryless transmission: each output symbol drawn from row w[x_i].
inline Sequence dmc_transmit(const Sequence& x, const std::vector<std::vector<double>>& w,
                             std::uint64_t seed) {
    validate_transition_matrix(w);
    std::vector<PmfSampler> rows;
    rows.reserve(w.size());
    for (const auto& row : w) rows.emplace_back(Pmf::normalized(row));
    SplitMix64 rng(seed);
    Sequence y;
    y.symbols.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] >= rows.size()) throw InvalidSequence("dmc_transmit: symbol outside alphabet");
        y.symbols[i] = rows[x[i]].sample(rng);
    }
    return y;
}

inline GeneralChannel make_dmc(std::string descriptor,
                               const std::vector<std::vector<double>>& w) {
    validate_transition_matrix(w);
    std::vector<PmfSampler> rows;
    rows.reserve(w.size());
    for (const auto& row : w) rows.emplace_back(Pmf::normalized(row));
    const std::size_t in = w.size();
    const std::size_t out = w.front().size();
    return GeneralChannel(
        std::move(descriptor), in, out,
        [rows, in](const Sequence& x, std::uint64_t seed) {
            SplitMix64 rng(seed);
            Sequence y;
            y.symbols.resize(x.size());
            for (std::size_t i = 0; i < x.size(); ++i) {
                if (x[i] >= in) throw InvalidSequence("dmc: symbol outside alphabet");
                y.symbols[i] = rows[x[i]].sample(rng);
            }
            return y;
        });
}

inline GeneralChannel make_identity(std::size_t alphabet) {
    return GeneralChannel("identity(" + std::to_string(alphabet) + ")", alphabet, alphabet,
                          [](const Sequence& x, std::uint64_t) { return x; });
}

/// Maps every input to the constant block y0^n.
inline GeneralChannel make_constant(std::size_t input_alphabet, std::size_t output_alphabet,
                                    Symbol y0) {
    if (y0 >= output_alphabet) throw InvalidChannel("make_constant: y0 outside alphabet");
    return GeneralChannel("constant(y=" + std::to_string(y0) + ")", input_alphabet,
                          output_alphabet, [y0](const Sequence& x, std::uint64_t) {
                              return Sequence::constant(x.size(), y0);
                          });
}

inline GeneralChannel make_binary_symmetric(double flip) {
    if (!(flip >= 0.0 && flip <= 1.0)) throw InvalidChannel("bsc: flip outside [0,1]");
    return make_dmc("bsc(" + std::to_string(flip) + ")",
                    {{1.0 - flip, flip}, {flip, 1.0 - flip}});
}

/// Deterministic adversary with memory: cycles the first floor(fraction * n)
/// symbols of every block and passes the rest through. Its Hamming distortion
/// is exactly floor(fraction * n) / n, so it sits inside that distortion ball
/// while being neither memoryless nor stochastic.
inline GeneralChannel make_burst_corruptor(std::size_t alphabet, double fraction) {
    if (!(fraction >= 0.0 && fraction <= 1.0))
        throw InvalidChannel("burst: fraction outside [0,1]");
    return GeneralChannel(
        "burst(" + std::to_string(fraction) + ")", alphabet, alphabet,
        [alphabet, fraction](const Sequence& x, std::uint64_t) {
            Sequence y = x;
            const std::size_t k =
                static_cast<std::size_t>(fraction * static_cast<double>(x.size()));
            for (std::size_t i = 0; i < k; ++i)
                y.symbols[i] = static_cast<Symbol>((y.symbols[i] + 1) % alphabet);
            return y;
        });
}

// ---------------------------------------------------------------------------
// Source codes as channels
// ---------------------------------------------------------------------------

/// Parameters of the joint-typicality encoder a source-code channel applies.
struct SourceCodeRule {
    Pmf source;
    DistortionSpec distortion;
    TypicalityParams eps;
};

/// Deterministic channel that quantizes x to the reconstruction chosen by the
/// covering encoder over a fixed codebook; encoder failure falls back to
/// codeword 0. Accepts only blocks of length cb.n.
inline GeneralChannel source_code_channel(Codebook cb, SourceCodeRule rule) {
    if (cb.kind != CodebookKind::SourceCode)
        throw std::invalid_argument("source_code_channel: codebook must be a source code");
    const std::size_t in = rule.source.size();
    const std::size_t out = cb.composition.alphabet_size();
    std::string desc = "source_code(n=" + std::to_string(cb.n) +
                       ",words=" + std::to_string(cb.size()) + ")";
    auto shared = std::make_shared<Codebook>(std::move(cb));
    auto shared_rule = std::make_shared<SourceCodeRule>(std::move(rule));
    return GeneralChannel(
        std::move(desc), in, out,
        [shared, shared_rule](const Sequence& x, std::uint64_t) {
            if (x.size() != shared->n)
                throw InvalidSequence("source_code_channel: block length " +
                                      std::to_string(x.size()) + " != codebook n " +
                                      std::to_string(shared->n));
            EncodeResult r = source_encode(x, *shared, shared_rule->distortion,
                                           shared_rule->source, shared_rule->eps);
            return shared->words[r.ok() ? r.index : 0];
        });
}

/// Blocklength-parametric variant: for each n the channel uses the rate-R
/// constant-composition codebook derived from (cr, n). The code realization
/// is fixed per n, so the channel is a deterministic map.
inline GeneralChannel source_code_channel_family(double rate, const Pmf& qY,
                                                 SourceCodeRule rule,
                                                 const CommonRandomness& cr,
                                                 std::size_t cap = kDefaultCodebookCap) {
    const std::size_t in = rule.source.size();
    const std::size_t out = qY.size();
    const std::uint64_t base = cr.seed();
    auto shared_rule = std::make_shared<SourceCodeRule>(std::move(rule));
    auto shared_q = std::make_shared<Pmf>(qY);
    std::string desc = "source_code_family(R=" + std::to_string(rate) + ")";
    return GeneralChannel(
        std::move(desc), in, out,
        [rate, base, shared_rule, shared_q, cap](const Sequence& x, std::uint64_t) {
            const std::size_t n = x.size();
            const std::size_t m = checked_codebook_size(n, rate, cap);
            const TypeVector comp = quantize_type(*shared_q, n);
            const std::uint64_t book_seed = derive_seed(base, n);
            CodebookView view = CodebookView::source_family(n, m, comp, book_seed);
            EncodeResult r = source_encode(x, view, shared_rule->distortion,
                                           shared_rule->source, shared_rule->eps);
            return source_codeword(comp, book_seed, r.ok() ? r.index : 0);
        });
}

// ---------------------------------------------------------------------------
// Membership estimation
// ---------------------------------------------------------------------------

struct MembershipPoint {
    std::size_t n = 0;
    double p_hat = 0.0;          // estimated excess-distortion probability
    double ci_half_width = 0.0;  // 95% normal-approximation half width
    std::uint64_t trials = 0;
};

struct MembershipReport {
    std::vector<MembershipPoint> points;

    bool non_increasing(double slack = 0.0) const {
        for (std::size_t i = 0; i + 1 < points.size(); ++i)
            if (points[i + 1].p_hat > points[i].p_hat + slack) return false;
        return true;
    }

    /// The operational surrogate for "excess distortion probability -> 0":
    /// p_hat non-increasing across the tested block lengths and below
    /// `threshold` at the largest one.
    bool indicates_membership(double threshold, double slack = 0.0) const {
        if (points.empty()) return false;
        return non_increasing(slack) && points.back().p_hat <= threshold;
    }
};

/// Draws i.i.d.-p blocks, transmits them, and records the fraction of trials
/// whose average distortion exceeds the budget, per block length.
inline MembershipReport estimate_membership(const GeneralChannel& c, const Pmf& p,
                                            const DistortionSpec& d,
                                            const std::vector<std::size_t>& ns,
                                            std::size_t trials, const CommonRandomness& cr,
                                            unsigned threads = 1) {
    if (trials == 0) throw std::invalid_argument("estimate_membership: trials must be >= 1");
    MembershipReport report;
    const PmfSampler sampler(p);
    for (std::size_t n : ns) {
        const CommonRandomness cr_n = cr.derived("membership", n);
        std::vector<std::uint8_t> exceeded(trials, 0);
        parallel_for(trials, threads, [&](std::size_t t) {
            const CommonRandomness cr_t = cr_n.derived("trial", t);
            SplitMix64 rng = cr_t.derived("input").rng();
            Sequence x;
            x.symbols.resize(n);
            for (std::size_t i = 0; i < n; ++i) x.symbols[i] = sampler.sample(rng);
            Sequence y = c.transmit(x, cr_t.derived("channel").seed());
            exceeded[t] = avg_distortion(x, y, d) > d.budget() ? 1 : 0;
        });
        std::uint64_t count = 0;
        for (std::uint8_t e : exceeded) count += e;
        MembershipPoint pt;
        pt.n = n;
        pt.trials = trials;
        pt.p_hat = static_cast<double>(count) / static_cast<double>(trials);
        pt.ci_half_width =
            1.96 * std::sqrt(pt.p_hat * (1.0 - pt.p_hat) / static_cast<double>(trials));
        report.points.push_back(pt);
    }
    return report;
}

} // namespace unisep
