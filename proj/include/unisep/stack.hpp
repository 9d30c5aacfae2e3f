#pragma once

// Layered composition of encoders/decoders around channels: the separation
// architecture (source code under a channel code) and the reverse reduction
// (reliable bit transport built on top of a distortion guarantee).
//
// A layer maps an outer block to an inner block and back, parameterized by
// the inner channel's block length. Message indices travel between layers as
// fixed-width bit blocks, so every interface is a Sequence and a composed
// stack is itself a GeneralChannel. Seeds derive nested per level, which
// makes stacked composition associate bit-for-bit.

#include <bit>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "unisep/channels.hpp"
#include "unisep/codecs.hpp"
#include "unisep/core.hpp"
#include "unisep/parallel.hpp"
#include "unisep/random.hpp"

namespace unisep {

inline constexpr std::uint64_t kLayerSeedSalt = 0x6c61796572ULL;  // "layer"
inline constexpr std::uint64_t kInnerSeedSalt = 0x696e6e6572ULL;  // "inner"

/// Default rate margin (bits/symbol) for architecture experiments: rates are
/// set this far from the threshold rather than at the boundary, where finite
/// block lengths decide nothing.
inline constexpr double kDefaultRateMargin = 0.1;

/// Width in bits of an index into a message set of the given cardinality.
inline std::size_t message_bits(std::uint64_t count) {
    if (count <= 1) return 1;
    return static_cast<std::size_t>(std::bit_width(count - 1));
}

inline Sequence encode_message_bits(std::uint64_t m, std::size_t bits) {
    Sequence s;
    s.symbols.resize(bits);
    for (std::size_t i = 0; i < bits; ++i) s.symbols[i] = (m >> i) & 1;
    return s;
}

inline std::uint64_t decode_message_bits(const Sequence& s) {
    std::uint64_t m = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
        m |= static_cast<std::uint64_t>(s[i] & 1) << i;
    return m;
}

/// One encoder/decoder pair, defined for every inner block length n.
struct Layer {
    std::string label;
    std::uint64_t base_seed = 0; // root of the layer's common randomness

    std::size_t enc_in_alphabet = 0;  // encoder input (outer, downlink)
    std::size_t enc_out_alphabet = 0; // encoder output (inner, downlink)
    std::size_t dec_in_alphabet = 0;  // decoder input (inner, uplink)
    std::size_t dec_out_alphabet = 0; // decoder output (outer, uplink)

    /// Outer block length as a function of the inner block length.
    std::function<std::size_t(std::size_t)> outer_length;

    /// Message-set cardinality carried at inner block length n; only set for
    /// layers whose outer currency is a message index.
    std::function<std::uint64_t(std::size_t)> message_count;

    /// (block, inner block length, layer seed) -> block.
    std::function<Sequence(const Sequence&, std::size_t, std::uint64_t)> encode;
    std::function<Sequence(const Sequence&, std::size_t, std::uint64_t)> decode;
};

/// Ordered layers (outermost first) around an optional inner channel.
struct LayerStack {
    std::vector<Layer> layers;
    std::size_t block_length = 0;
    std::optional<GeneralChannel> inner_channel;
    std::optional<Pmf> source;
    std::optional<DistortionSpec> distortion;
    std::vector<std::string> warnings;
};

// ---------------------------------------------------------------------------
// Composition
// ---------------------------------------------------------------------------

/// Composite channel: encoders applied outside-in, the channel, decoders
/// inside-out. Per level, the layer consumes derive(seed, layer-salt) and the
/// inner system continues with derive(seed, inner-salt); composing one layer
/// at a time therefore yields bit-identical behavior to composing all at
/// once.
inline GeneralChannel compose(const LayerStack& stack, const GeneralChannel& c) {
    for (std::size_t i = 0; i + 1 < stack.layers.size(); ++i) {
        const Layer& outer = stack.layers[i];
        const Layer& inner = stack.layers[i + 1];
        if (outer.enc_out_alphabet != inner.enc_in_alphabet ||
            inner.dec_out_alphabet != outer.dec_in_alphabet)
            throw CompositionError("compose: layers '" + outer.label + "' and '" +
                                   inner.label + "' do not chain");
    }
    if (!stack.layers.empty()) {
        const Layer& innermost = stack.layers.back();
        if (innermost.enc_out_alphabet != c.input_alphabet_size() ||
            c.output_alphabet_size() != innermost.dec_in_alphabet)
            throw CompositionError("compose: layer '" + innermost.label +
                                   "' does not chain with channel " + c.descriptor());
    }
    if (stack.layers.empty()) return c;

    std::string desc;
    for (const auto& l : stack.layers) desc += l.label + " | ";
    desc += c.descriptor();

    auto layers = std::make_shared<std::vector<Layer>>(stack.layers);
    auto channel = std::make_shared<GeneralChannel>(c);
    const std::size_t built_for = stack.block_length;
    const std::size_t in_alpha = stack.layers.front().enc_in_alphabet;
    const std::size_t out_alpha = stack.layers.front().dec_out_alphabet;

    return GeneralChannel(
        std::move(desc), in_alpha, out_alpha,
        [layers, channel, built_for](const Sequence& x, std::uint64_t seed) {
            const Layer& front = layers->front();
            std::size_t nb = 0;
            if (built_for > 0 && front.outer_length(built_for) == x.size())
                nb = built_for;
            else if (front.outer_length(x.size()) == x.size())
                nb = x.size();
            else
                throw InvalidSequence("compose: input length " + std::to_string(x.size()) +
                                      " matches no block length of layer '" + front.label +
                                      "'");
            std::vector<std::uint64_t> layer_seeds(layers->size());
            std::uint64_t s = seed;
            for (std::size_t i = 0; i < layers->size(); ++i) {
                layer_seeds[i] = derive_seed(s, kLayerSeedSalt);
                s = derive_seed(s, kInnerSeedSalt);
            }
            Sequence block = x;
            for (std::size_t i = 0; i < layers->size(); ++i)
                block = (*layers)[i].encode(block, nb, layer_seeds[i]);
            block = channel->transmit(block, s);
            for (std::size_t i = layers->size(); i-- > 0;)
                block = (*layers)[i].decode(block, nb, layer_seeds[i]);
            return block;
        });
}

/// Composes the stack around its own stored inner channel.
inline GeneralChannel compose(const LayerStack& stack) {
    if (!stack.inner_channel)
        throw CompositionError("compose: stack has no inner channel");
    return compose(stack, *stack.inner_channel);
}

// ---------------------------------------------------------------------------
// Concrete layers
// ---------------------------------------------------------------------------

inline Layer make_identity_layer(std::size_t alphabet) {
    Layer l;
    l.label = "identity";
    l.enc_in_alphabet = l.enc_out_alphabet = alphabet;
    l.dec_in_alphabet = l.dec_out_alphabet = alphabet;
    l.outer_length = [](std::size_t n) { return n; };
    l.encode = [](const Sequence& x, std::size_t, std::uint64_t) { return x; };
    l.decode = [](const Sequence& x, std::size_t, std::uint64_t) { return x; };
    return l;
}

/// Lossy layer: covering encoder to a rate-R constant-composition codebook,
/// index carried downward as bits, decoder maps the index back to its
/// reconstruction word. Encoder failures fall back to codeword 0. A fresh
/// codebook is drawn per transmission from (layer randomness, transmit seed).
inline Layer make_source_codec_layer(const Pmf& p, const DistortionSpec& d,
                                     TypicalityParams eps, double rate, const Pmf& qY,
                                     const CommonRandomness& cr,
                                     std::size_t cap = kDefaultCodebookCap) {
    if (d.input_size() != p.size() || d.output_size() != qY.size())
        throw std::invalid_argument("make_source_codec_layer: alphabet mismatch");
    Layer l;
    l.label = "source_codec(R=" + std::to_string(rate) + ")";
    l.enc_in_alphabet = p.size();
    l.enc_out_alphabet = 2;
    l.dec_in_alphabet = 2;
    l.dec_out_alphabet = qY.size();
    l.outer_length = [](std::size_t n) { return n; };
    l.message_count = [rate, cap](std::size_t n) -> std::uint64_t {
        return checked_codebook_size(n, rate, cap);
    };
    const std::uint64_t base = cr.seed();
    l.base_seed = base;
    struct Ctx {
        Pmf p;
        DistortionSpec d;
        Pmf q;
    };
    auto ctx = std::make_shared<Ctx>(Ctx{p, d, qY});
    l.encode = [ctx, eps, rate, cap, base](const Sequence& x, std::size_t nb,
                                           std::uint64_t seed) {
        if (x.size() != nb)
            throw InvalidSequence("source_codec: block length mismatch");
        const std::size_t count = checked_codebook_size(nb, rate, cap);
        const TypeVector comp = quantize_type(ctx->q, nb);
        CodebookView view =
            CodebookView::source_family(nb, count, comp, derive_seed(base, seed));
        const EncodeResult r = source_encode(x, view, ctx->d, ctx->p, eps);
        return encode_message_bits(r.ok() ? r.index : 0, message_bits(count));
    };
    l.decode = [ctx, rate, cap, base](const Sequence& bits, std::size_t nb,
                                      std::uint64_t seed) {
        const std::size_t count = checked_codebook_size(nb, rate, cap);
        const TypeVector comp = quantize_type(ctx->q, nb);
        std::uint64_t m = decode_message_bits(bits);
        if (m >= count) m = 0;
        return source_codeword(comp, derive_seed(base, seed), m);
    };
    return l;
}

/// Reliability layer: rate-R random channel code with i.i.d.-p codewords and
/// unique-joint-typicality decoding against (p, d, eps). Carries a message
/// set of `message_count(n)` indices as bits; decode failures fall back to
/// message 0.
inline Layer make_channel_code_layer(const Pmf& p, const DistortionSpec& d,
                                     TypicalityParams eps, double rate,
                                     std::function<std::uint64_t(std::size_t)> message_count,
                                     const CommonRandomness& cr,
                                     std::size_t cap = kDefaultCodebookCap) {
    Layer l;
    l.label = "channel_code(R=" + std::to_string(rate) + ")";
    l.enc_in_alphabet = 2;
    l.enc_out_alphabet = p.size();
    l.dec_in_alphabet = d.output_size();
    l.dec_out_alphabet = 2;
    l.message_count = message_count;
    l.outer_length = [message_count](std::size_t n) {
        return message_bits(message_count(n));
    };
    const std::uint64_t base = cr.seed();
    l.base_seed = base;
    struct Ctx {
        Pmf p;
        DistortionSpec d;
    };
    auto ctx = std::make_shared<Ctx>(Ctx{p, d});
    l.encode = [ctx, rate, cap, base](const Sequence& bits, std::size_t nb,
                                      std::uint64_t seed) {
        const std::size_t words = checked_codebook_size(nb, rate, cap);
        const std::uint64_t m = decode_message_bits(bits) % words;
        const PmfSampler sampler(ctx->p);
        return channel_codeword(nb, sampler, derive_seed(base, seed),
                                static_cast<std::size_t>(m));
    };
    l.decode = [ctx, eps, rate, cap, base, message_count](const Sequence& y, std::size_t nb,
                                                          std::uint64_t seed) {
        const std::size_t words = checked_codebook_size(nb, rate, cap);
        CodebookView view =
            CodebookView::channel_family(nb, words, ctx->p, derive_seed(base, seed));
        const DecodeResult r = channel_decode(y, view, ctx->p, ctx->d, eps);
        std::uint64_t m = r.ok() ? r.index : 0;
        const std::uint64_t count = message_count(nb);
        if (m >= count) m = 0;
        return encode_message_bits(m, message_bits(count));
    };
    return l;
}

// ---------------------------------------------------------------------------
// Architectures
// ---------------------------------------------------------------------------

/// Source-code-then-channel-code stack: a rate-Rs covering codec whose index
/// set rides a rate-R channel code with i.i.d.-p codewords. The channel layer
/// decodes against `channel_distortion` when given (a smaller budget fitting
/// the channel set at hand); by default it reuses the source spec.
inline LayerStack build_separation_system(const Pmf& p, const DistortionSpec& d,
                                          TypicalityParams eps, std::size_t n,
                                          double channel_code_rate, double source_code_rate,
                                          const CommonRandomness& cr,
                                          std::optional<DistortionSpec> channel_distortion =
                                              std::nullopt,
                                          const Pmf* qY = nullptr,
                                          std::size_t cap = kDefaultCodebookCap) {
    Pmf q = qY ? *qY : [&] {
        if (d.output_size() != p.size())
            throw std::invalid_argument(
                "build_separation_system: non-square distortion requires explicit qY");
        return p;
    }();
    const DistortionSpec cd = channel_distortion.value_or(d);
    LayerStack stack;
    stack.block_length = n;
    stack.source = p;
    stack.distortion = d;
    stack.layers.push_back(
        make_source_codec_layer(p, d, eps, source_code_rate, q, cr.derived("source_codec"),
                                cap));
    auto count = [source_code_rate, cap](std::size_t nb) -> std::uint64_t {
        return checked_codebook_size(nb, source_code_rate, cap);
    };
    stack.layers.push_back(make_channel_code_layer(
        p, cd, eps, channel_code_rate, count, cr.derived("channel_code"), cap));
    return stack;
}

/// Reliable bit transport built on top of a lossy composite: wraps the lossy
/// channel with a rate-R channel code whose codewords are i.i.d. p and whose
/// decoder tests joint typicality at the lossy system's distortion budget.
/// The distortion-compliance precondition is checked (with the supplied
/// report, or a quick internal estimate); failure is recorded as a warning
/// and the build proceeds.
inline LayerStack build_reliable_on_lossy(const GeneralChannel& lossy, const Pmf& p,
                                          const DistortionSpec& d, TypicalityParams eps,
                                          std::size_t n, double R,
                                          const CommonRandomness& cr,
                                          const MembershipReport* membership = nullptr,
                                          double membership_threshold = 0.25,
                                          std::size_t membership_trials = 200,
                                          std::size_t cap = kDefaultCodebookCap) {
    LayerStack stack;
    stack.block_length = n;
    stack.source = p;
    stack.distortion = d;
    stack.inner_channel = lossy;

    MembershipReport own;
    const MembershipReport* checked = membership;
    if (!checked) {
        std::vector<std::size_t> ns;
        if (n / 2 >= 4) ns.push_back(n / 2);
        ns.push_back(n);
        own = estimate_membership(lossy, p, d, ns, membership_trials,
                                  cr.derived("membership_check"));
        checked = &own;
    }
    if (!checked->indicates_membership(membership_threshold)) {
        std::string w = "lossy system failed the membership check at threshold " +
                        std::to_string(membership_threshold) + " (p_hat:";
        for (const auto& pt : checked->points) w += " " + std::to_string(pt.p_hat);
        w += ")";
        stack.warnings.push_back(std::move(w));
    }

    auto count = [R, cap](std::size_t nb) -> std::uint64_t {
        return checked_codebook_size(nb, R, cap);
    };
    stack.layers.push_back(
        make_channel_code_layer(p, d, eps, R, count, cr.derived("reliability"), cap));
    return stack;
}

// ---------------------------------------------------------------------------
// End-to-end evaluation
// ---------------------------------------------------------------------------

enum class EvalMetric { ExcessDistortion, MessageError };

struct ChannelEvalReport {
    std::string descriptor;
    std::uint64_t failures = 0;
    std::uint64_t trials = 0;
    double failure_fraction = 0.0;
};

/// Runs the stack over every member of the set. Layer randomness and the
/// message/source draws derive from the same per-trial labels for every
/// channel, so the code and inputs are identical across members (the code is
/// chosen independently of the channel it faces).
inline std::vector<ChannelEvalReport> evaluate_end_to_end(const LayerStack& stack,
                                                          const ChannelSet& set,
                                                          EvalMetric metric,
                                                          std::size_t trials,
                                                          const CommonRandomness& cr,
                                                          unsigned threads = 1) {
    if (trials == 0) throw std::invalid_argument("evaluate_end_to_end: trials must be >= 1");
    if (stack.layers.empty()) throw CompositionError("evaluate_end_to_end: empty stack");
    if (stack.block_length == 0)
        throw CompositionError("evaluate_end_to_end: stack has no block length");

    std::vector<ChannelEvalReport> reports;
    for (const GeneralChannel& member : set.members) {
        const GeneralChannel composite = compose(stack, member);
        std::vector<std::uint8_t> failed(trials, 0);
        if (metric == EvalMetric::ExcessDistortion) {
            if (!stack.source || !stack.distortion)
                throw CompositionError(
                    "evaluate_end_to_end: stack carries no source/distortion spec");
            const PmfSampler sampler(*stack.source);
            const std::size_t len = stack.layers.front().outer_length(stack.block_length);
            parallel_for(trials, threads, [&](std::size_t t) {
                SplitMix64 rng = cr.derived("input", t).rng();
                Sequence x;
                x.symbols.resize(len);
                for (std::size_t i = 0; i < len; ++i) x.symbols[i] = sampler.sample(rng);
                const Sequence y =
                    composite.transmit(x, cr.derived("system", t).seed());
                failed[t] =
                    avg_distortion(x, y, *stack.distortion) > stack.distortion->budget();
            });
        } else {
            if (!stack.layers.front().message_count)
                throw CompositionError(
                    "evaluate_end_to_end: outermost layer carries no message set");
            const std::uint64_t count =
                stack.layers.front().message_count(stack.block_length);
            const std::size_t bits = message_bits(count);
            parallel_for(trials, threads, [&](std::size_t t) {
                SplitMix64 rng = cr.derived("input", t).rng();
                const std::uint64_t m = rng.bounded(count);
                const Sequence sent = encode_message_bits(m, bits);
                const Sequence got =
                    composite.transmit(sent, cr.derived("system", t).seed());
                failed[t] = got == sent ? 0 : 1;
            });
        }
        ChannelEvalReport rep;
        rep.descriptor = member.descriptor();
        rep.trials = trials;
        for (std::uint8_t f : failed) rep.failures += f;
        rep.failure_fraction =
            static_cast<double>(rep.failures) / static_cast<double>(trials);
        reports.push_back(std::move(rep));
    }
    return reports;
}

} // namespace unisep
