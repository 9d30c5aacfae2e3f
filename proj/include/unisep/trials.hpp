#pragma once

// Monte Carlo harnesses for the two random-coding experiments and the
// source-code-as-channel converse experiment. Every trial draws a fresh
// codebook from trial-derived common randomness (shared by encoder and
// decoder), so trial outcomes are i.i.d. across trials and reproducible
// bit-for-bit from the root seed.

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <string_view>
#include <vector>

#include "unisep/channels.hpp"
#include "unisep/codecs.hpp"
#include "unisep/core.hpp"
#include "unisep/parallel.hpp"

namespace unisep {

enum class TrialTag : std::uint8_t {
    Success = 0,
    E1NotJointlyTypical = 1, // sent word and received block not jointly typical
    E2Ambiguous = 2,         // several codewords jointly typical with the block
    F1SourceAtypical = 3,    // source block fell outside the typical set
    F2NoCover = 4,           // typical block, but no codeword within distortion
};

inline constexpr std::size_t kTrialTagCount = 5;

inline std::string_view to_string(TrialTag tag) {
    switch (tag) {
        case TrialTag::Success: return "success";
        case TrialTag::E1NotJointlyTypical: return "e1_not_jointly_typical";
        case TrialTag::E2Ambiguous: return "e2_ambiguous";
        case TrialTag::F1SourceAtypical: return "f1_source_atypical";
        case TrialTag::F2NoCover: return "f2_no_cover";
    }
    return "unknown";
}

struct TrialOutcome {
    TrialTag tag = TrialTag::Success;
    std::optional<std::size_t> detail; // decoded/encoded index when meaningful
};

/// The decoder is a total map: declared errors fall back to message 0, and a
/// trial errs exactly when the final estimate differs from the sent message
/// (the average block error criterion). A wrong unique decode is classified
/// E1: the sent word cannot have been jointly typical, or two matches would
/// have been found.
inline TrialOutcome classify_channel_trial(const DecodeResult& r, std::size_t sent) {
    const std::size_t estimate = r.ok() ? r.index : 0;
    if (estimate == sent) return {TrialTag::Success, estimate};
    if (r.status == DecodeStatus::Ambiguous) return {TrialTag::E2Ambiguous, std::nullopt};
    return {TrialTag::E1NotJointlyTypical,
            r.ok() ? std::optional<std::size_t>(r.index) : std::nullopt};
}

inline TrialOutcome classify_source_trial(const EncodeResult& r) {
    switch (r.status) {
        case EncodeStatus::Encoded: return {TrialTag::Success, r.index};
        case EncodeStatus::SourceAtypical: return {TrialTag::F1SourceAtypical, std::nullopt};
        case EncodeStatus::NoCover: return {TrialTag::F2NoCover, std::nullopt};
    }
    return {TrialTag::F2NoCover, std::nullopt};
}

struct OutcomeHistogram {
    std::array<std::uint64_t, kTrialTagCount> counts{};

    void add(TrialTag tag) { ++counts[static_cast<std::size_t>(tag)]; }

    std::uint64_t total() const {
        std::uint64_t t = 0;
        for (std::uint64_t c : counts) t += c;
        return t;
    }

    std::uint64_t count(TrialTag tag) const { return counts[static_cast<std::size_t>(tag)]; }

    double fraction(TrialTag tag) const {
        const std::uint64_t t = total();
        return t == 0 ? 0.0 : static_cast<double>(count(tag)) / static_cast<double>(t);
    }

    double success_fraction() const { return fraction(TrialTag::Success); }
    double error_fraction() const { return 1.0 - success_fraction(); }

    OutcomeHistogram& merge(const OutcomeHistogram& other) {
        for (std::size_t i = 0; i < kTrialTagCount; ++i) counts[i] += other.counts[i];
        return *this;
    }

    bool operator==(const OutcomeHistogram&) const = default;
};

namespace detail {

inline OutcomeHistogram run_channel_trials_impl(
    const GeneralChannel& c, std::size_t n, double R, const Pmf& p,
    const DistortionSpec& d, TypicalityParams eps, std::size_t trials,
    const CommonRandomness& cr, std::size_t cap, unsigned threads,
    std::set<Sequence>* distinct_outputs) {
    if (n == 0) throw std::invalid_argument("run_channel_trials: n must be >= 1");
    const std::size_t m = checked_codebook_size(n, R, cap);
    std::vector<TrialTag> tags(trials, TrialTag::Success);
    std::vector<std::vector<Sequence>> outputs_per_trial;
    if (distinct_outputs) outputs_per_trial.resize(trials);
    parallel_for(trials, threads, [&](std::size_t t) {
        const CommonRandomness cr_t = cr.derived("trial", t);
        const std::uint64_t book_seed = cr_t.derived("codebook").seed();
        CodebookView view = CodebookView::channel_family(n, m, p, book_seed);
        SplitMix64 msg_rng = cr_t.derived("message").rng();
        const std::size_t msg = static_cast<std::size_t>(msg_rng.bounded(m));
        Sequence sent = view.word(msg); // copy: view scratch is reused by decode
        Sequence received = c.transmit(sent, cr_t.derived("channel").seed());
        if (distinct_outputs) outputs_per_trial[t].push_back(received);
        const DecodeResult r = channel_decode(received, view, p, d, eps);
        tags[t] = classify_channel_trial(r, msg).tag;
    });
    OutcomeHistogram hist;
    for (TrialTag tag : tags) hist.add(tag);
    if (distinct_outputs)
        for (auto& v : outputs_per_trial)
            for (auto& y : v) distinct_outputs->insert(std::move(y));
    return hist;
}

} // namespace detail

/// Universal-decoding experiment: uniform message, fresh rate-R codebook of
/// i.i.d.-p words per trial, transmission through c, unique-joint-typicality
/// decoding, outcomes classified per classify_channel_trial.
inline OutcomeHistogram run_channel_trials(const GeneralChannel& c, std::size_t n, double R,
                                           const Pmf& p, const DistortionSpec& d,
                                           TypicalityParams eps, std::size_t trials,
                                           const CommonRandomness& cr,
                                           std::size_t cap = kDefaultCodebookCap,
                                           unsigned threads = 1) {
    return detail::run_channel_trials_impl(c, n, R, p, d, eps, trials, cr, cap, threads,
                                           nullptr);
}

/// Covering experiment: i.i.d.-p source block, fresh rate-R constant
/// composition codebook per trial, smallest-index covering encoder.
/// The codebook is scanned lazily, so only failures pay the full 2^{nR} cost.
inline OutcomeHistogram run_source_trials(const Pmf& p, const DistortionSpec& d,
                                          TypicalityParams eps, std::size_t n, double R,
                                          const Pmf& q, std::size_t trials,
                                          const CommonRandomness& cr,
                                          std::size_t cap = kDefaultCodebookCap,
                                          unsigned threads = 1) {
    if (n == 0) throw std::invalid_argument("run_source_trials: n must be >= 1");
    const std::size_t m = checked_codebook_size(n, R, cap);
    const TypeVector composition = quantize_type(q, n);
    const PmfSampler source_sampler(p);
    std::vector<TrialTag> tags(trials, TrialTag::Success);
    parallel_for(trials, threads, [&](std::size_t t) {
        const CommonRandomness cr_t = cr.derived("trial", t);
        CodebookView view = CodebookView::source_family(n, m, composition,
                                                        cr_t.derived("codebook").seed());
        SplitMix64 rng = cr_t.derived("source").rng();
        Sequence x;
        x.symbols.resize(n);
        for (std::size_t i = 0; i < n; ++i) x.symbols[i] = source_sampler.sample(rng);
        const EncodeResult r = source_encode(x, view, d, p, eps);
        tags[t] = classify_source_trial(r).tag;
    });
    OutcomeHistogram hist;
    for (TrialTag tag : tags) hist.add(tag);
    return hist;
}

struct ConverseResult {
    OutcomeHistogram histogram;
    double error_fraction = 0.0;
    std::size_t inner_codebook_size = 0;  // <= 2^{n Rs} possible channel outputs
    std::size_t attack_codebook_size = 0; // 2^{n R} messages thrown at it
    std::size_t distinct_outputs = 0;     // outputs actually observed
};

/// Builds a fixed rate-Rs source-code channel and attacks it with the
/// rate-R universal-decoding experiment. Whenever R > Rs the cardinality
/// bound forces error fraction >= 1 - 2^{-n(R-Rs)}.
inline ConverseResult run_converse_experiment(double source_rate, double attack_rate,
                                              std::size_t n, const Pmf& p,
                                              const DistortionSpec& d, TypicalityParams eps,
                                              std::size_t trials, const CommonRandomness& cr,
                                              const Pmf* qY = nullptr,
                                              std::size_t cap = kDefaultCodebookCap,
                                              unsigned threads = 1) {
    if (!(attack_rate >= 0.0))
        throw std::invalid_argument("run_converse_experiment: attack rate must be >= 0");
    const Pmf& q = qY ? *qY : p;
    if (!qY && d.input_size() != d.output_size())
        throw std::invalid_argument(
            "run_converse_experiment: non-square distortion requires an explicit qY");
    Codebook inner =
        gen_source_codebook(n, source_rate, q, cr.derived("inner_code"), cap);
    ConverseResult result;
    result.inner_codebook_size = inner.size();
    result.attack_codebook_size = checked_codebook_size(n, attack_rate, cap);
    GeneralChannel channel = source_code_channel(std::move(inner), SourceCodeRule{p, d, eps});
    std::set<Sequence> outputs;
    result.histogram = detail::run_channel_trials_impl(channel, n, attack_rate, p, d, eps,
                                                       trials, cr.derived("attack"), cap,
                                                       threads, &outputs);
    result.distinct_outputs = outputs.size();
    result.error_fraction = result.histogram.error_fraction();
    return result;
}

} // namespace unisep
