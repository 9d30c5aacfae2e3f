#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "unisep/stack.hpp"
#include "test_util.hpp"

using namespace unisep;

namespace {
const Pmf kHalf{0.5, 0.5};

Sequence random_block(SplitMix64& rng, std::size_t n, std::size_t alphabet) {
    Sequence x;
    for (std::size_t i = 0; i < n; ++i)
        x.symbols.push_back(static_cast<Symbol>(rng.bounded(alphabet)));
    return x;
}
} // namespace

TEST_CASE("message bit blocks round-trip") {
    SplitMix64 rng(123);
    for (int t = 0; t < 200; ++t) {
        const std::uint64_t count = 1 + rng.bounded(100000);
        const std::uint64_t m = rng.bounded(count);
        const std::size_t bits = message_bits(count);
        CHECK(decode_message_bits(encode_message_bits(m, bits)) == m);
    }
    CHECK(message_bits(1) == 1);
    CHECK(message_bits(2) == 1);
    CHECK(message_bits(3) == 2);
    CHECK(message_bits(64) == 6);
    CHECK(message_bits(65) == 7);
}

TEST_CASE("identity layers leave a deterministic channel unchanged") {
    LayerStack stack;
    stack.layers = {make_identity_layer(2), make_identity_layer(2)};
    const Codebook cb = gen_source_codebook(8, 0.3, kHalf, CommonRandomness(1));
    const GeneralChannel inner = source_code_channel(
        cb, {kHalf, DistortionSpec::hamming(2, 0.3), TypicalityParams(0.4)});
    const GeneralChannel composite = compose(stack, inner);
    SplitMix64 rng(9);
    for (int t = 0; t < 30; ++t) {
        const Sequence x = random_block(rng, 8, 2);
        CHECK(composite.transmit(x, t) == inner.transmit(x, t));
    }
}

TEST_CASE("compose rejects incompatible chains") {
    LayerStack stack;
    stack.layers = {make_identity_layer(3)};
    CHECK_THROWS_AS(compose(stack, make_identity(2)), CompositionError);
    LayerStack two;
    two.layers = {make_identity_layer(2), make_identity_layer(3)};
    CHECK_THROWS_AS(compose(two, make_identity(3)), CompositionError);
}

TEST_CASE("composition associates bit-for-bit") {
    const CommonRandomness cr(42);
    const Layer codec = make_source_codec_layer(kHalf, DistortionSpec::hamming(2, 0.25),
                                                TypicalityParams(0.3), 0.5, kHalf,
                                                cr.derived("codec"));
    const Layer outer = make_identity_layer(2);
    const GeneralChannel bits_channel = make_identity(2);

    LayerStack flat;
    flat.layers = {outer, codec};
    const GeneralChannel all_at_once = compose(flat, bits_channel);

    LayerStack inner_only;
    inner_only.layers = {codec};
    const GeneralChannel inner_composite = compose(inner_only, bits_channel);
    LayerStack outer_only;
    outer_only.layers = {outer};
    const GeneralChannel nested = compose(outer_only, inner_composite);

    SplitMix64 rng(77);
    for (int t = 0; t < 25; ++t) {
        const Sequence x = random_block(rng, 12, 2);
        const std::uint64_t seed = rng.next();
        CHECK(all_at_once.transmit(x, seed) == nested.transmit(x, seed));
    }
}

TEST_CASE("a composed stack over a source-code channel stays within its output set") {
    const Codebook cb = gen_source_codebook(6, 0.4, kHalf, CommonRandomness(3));
    const GeneralChannel inner = source_code_channel(
        cb, {kHalf, DistortionSpec::hamming(2, 0.4), TypicalityParams(0.5)});
    LayerStack stack;
    stack.layers = {make_identity_layer(2)};
    const GeneralChannel composite = compose(stack, inner);
    std::set<Sequence> outputs;
    for (std::uint32_t r = 0; r < 64; ++r) {
        Sequence x;
        for (int i = 0; i < 6; ++i) x.symbols.push_back((r >> i) & 1);
        outputs.insert(composite.transmit(x, r));
    }
    CHECK(outputs.size() <= cb.size());
}

TEST_CASE("separation over the identity channel fails exactly when the source codec fails") {
    // eps = 1 disables typicality filtering; channel budget 0 makes the
    // channel layer transparent over a noiseless channel (up to codeword
    // duplicates, which have probability ~2^-14 here).
    const std::size_t n = 24;
    const double rate = 0.4;
    const DistortionSpec d = DistortionSpec::hamming(2, 0.2);
    const TypicalityParams eps(1.0);
    const CommonRandomness cr(555);
    const LayerStack stack = build_separation_system(kHalf, d, eps, n, rate, rate,
                                                     cr.derived("stack"), d.with_budget(0.0));
    const GeneralChannel composite = compose(stack, make_identity(2));

    const std::uint64_t count = checked_codebook_size(n, rate, kDefaultCodebookCap);
    const TypeVector comp = quantize_type(kHalf, n);
    const std::uint64_t source_base = cr.derived("stack").derived("source_codec").seed();
    const PmfSampler sampler(kHalf);

    std::size_t excess = 0, encode_failures = 0;
    const std::size_t trials = 300;
    for (std::size_t t = 0; t < trials; ++t) {
        SplitMix64 rng = CommonRandomness(9000).derived("input", t).rng();
        Sequence x;
        for (std::size_t i = 0; i < n; ++i) x.symbols.push_back(sampler.sample(rng));
        const std::uint64_t sys_seed = CommonRandomness(9000).derived("system", t).seed();
        const Sequence y = composite.transmit(x, sys_seed);
        if (avg_distortion(x, y, d) > d.budget()) ++excess;

        // replay the source layer's own codebook draw for this transmission
        const std::uint64_t layer_seed = derive_seed(sys_seed, kLayerSeedSalt);
        CodebookView view = CodebookView::source_family(
            n, count, comp, derive_seed(source_base, layer_seed));
        if (!source_encode(x, view, d, kHalf, eps).ok()) ++encode_failures;
    }
    CHECK(excess == encode_failures);
    CHECK(encode_failures > 0); // rate 0.4 at n=24 must fail sometimes
    CHECK(encode_failures < trials);
}

TEST_CASE("separation stack works over a low-noise DMC and drowns in a noisy one") {
    const DistortionSpec d = DistortionSpec::hamming(2, 0.35);
    const TypicalityParams eps(0.3);
    const CommonRandomness cr(777);
    const LayerStack stack =
        build_separation_system(kHalf, d, eps, 24, 0.25, 0.25, cr.derived("stack"),
                                d.with_budget(0.1));

    const auto good = evaluate_end_to_end(stack, ChannelSet({make_binary_symmetric(0.02)}),
                                          EvalMetric::ExcessDistortion, 300,
                                          cr.derived("eval"), 2);
    CHECK(good.front().failure_fraction < 0.2);

    const auto noisy = evaluate_end_to_end(stack, ChannelSet({make_binary_symmetric(0.4)}),
                                           EvalMetric::ExcessDistortion, 300,
                                           cr.derived("eval"));
    CHECK(noisy.front().failure_fraction > 0.5);
}

TEST_CASE("evaluate_end_to_end is reproducible and thread-count independent") {
    const DistortionSpec d = DistortionSpec::hamming(2, 0.3);
    const CommonRandomness cr(4040);
    const LayerStack stack = build_separation_system(kHalf, d, TypicalityParams(0.3), 16,
                                                     0.25, 0.25, cr.derived("stack"));
    const ChannelSet set({make_identity(2), make_binary_symmetric(0.05)});
    const auto a = evaluate_end_to_end(stack, set, EvalMetric::ExcessDistortion, 200,
                                       cr.derived("eval"));
    const auto b = evaluate_end_to_end(stack, set, EvalMetric::ExcessDistortion, 200,
                                       cr.derived("eval"), 4);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].failures == b[i].failures);
}

TEST_CASE("reliable transport on a lossy system: zero-rate transport never errs") {
    const DistortionSpec d = DistortionSpec::hamming(2, 0.2);
    const CommonRandomness cr(31);
    const GeneralChannel lossy = source_code_channel_family(
        0.6, kHalf, SourceCodeRule{kHalf, d, TypicalityParams(0.2)}, cr.derived("lossy"));
    const LayerStack stack = build_reliable_on_lossy(lossy, kHalf, d, TypicalityParams(0.2),
                                                     16, 0.0, cr.derived("stack"));
    CHECK(stack.warnings.empty());
    const auto rep = evaluate_end_to_end(stack, ChannelSet({lossy}),
                                         EvalMetric::MessageError, 150, cr.derived("eval"));
    CHECK(rep.front().failure_fraction == 0.0);
}

TEST_CASE("reliable transport above the lossy system's rate budget collapses") {
    // the composite has at most 2^{0.6 n} outputs; attack it well above that
    const DistortionSpec d = DistortionSpec::hamming(2, 0.2);
    const CommonRandomness cr(32);
    const GeneralChannel lossy = source_code_channel_family(
        0.6, kHalf, SourceCodeRule{kHalf, d, TypicalityParams(0.2)}, cr.derived("lossy"));
    const LayerStack stack = build_reliable_on_lossy(lossy, kHalf, d, TypicalityParams(0.2),
                                                     24, 0.9, cr.derived("stack"));
    const auto rep = evaluate_end_to_end(stack, ChannelSet({lossy}),
                                         EvalMetric::MessageError, 100, cr.derived("eval"));
    CHECK(rep.front().failure_fraction > 0.5);
}

TEST_CASE("one stack serves a whole compound set of channels") {
    // identity, a low-noise DMC, and a deterministic burst adversary: the
    // same code (same randomness) keeps every member under the threshold
    const DistortionSpec d = DistortionSpec::hamming(2, 0.35);
    const CommonRandomness cr(888);
    const LayerStack stack =
        build_separation_system(kHalf, d, TypicalityParams(0.31), 24, 0.25, 0.25,
                                cr.derived("stack"), d.with_budget(0.15));
    const ChannelSet set({make_identity(2), make_binary_symmetric(0.02),
                          make_burst_corruptor(2, 0.0833)});
    const auto reports = evaluate_end_to_end(stack, set, EvalMetric::ExcessDistortion, 300,
                                             cr.derived("eval"), 2);
    for (const auto& r : reports) {
        INFO(r.descriptor);
        CHECK(r.failure_fraction < 0.15);
    }
}

TEST_CASE("a channel codebook smaller than the index set wrecks the stack") {
    // R < Rs: source indices wrap around the channel codebook, so most
    // reconstructions are the wrong codeword even over a clean channel
    const DistortionSpec d = DistortionSpec::hamming(2, 0.25);
    const CommonRandomness cr(999);
    const LayerStack stack = build_separation_system(kHalf, d, TypicalityParams(1.0), 16,
                                                     0.25, 0.5, cr.derived("stack"));
    const auto rep = evaluate_end_to_end(stack, ChannelSet({make_identity(2)}),
                                         EvalMetric::ExcessDistortion, 200,
                                         cr.derived("eval"));
    CHECK(rep.front().failure_fraction > 0.5);
}

TEST_CASE("wrapped reliable transport improves with block length") {
    const DistortionSpec d = DistortionSpec::hamming(2, 0.2);
    const TypicalityParams eps(0.21);
    const CommonRandomness cr(1234);
    const double rate = 0.128; // R(0.2) - 0.15
    std::vector<double> errors;
    for (std::size_t n : {20u, 40u}) {
        const GeneralChannel lossy = source_code_channel_family(
            0.5, kHalf, SourceCodeRule{kHalf, d, eps}, cr.derived("lossy"));
        const LayerStack stack = build_reliable_on_lossy(lossy, kHalf, d, eps, n, rate,
                                                         cr.derived("stack", n));
        const auto rep = evaluate_end_to_end(stack, ChannelSet({lossy}),
                                             EvalMetric::MessageError, 400,
                                             cr.derived("eval", n), 2);
        errors.push_back(rep.front().failure_fraction);
    }
    CHECK(errors[1] < errors[0]);
    CHECK(errors[1] < 0.1);
}

TEST_CASE("separation over a non-square distortion requires an explicit reconstruction pmf") {
    const DistortionSpec rect({{0.0, 1.0, 0.5}, {1.0, 0.0, 0.5}}, 0.3);
    CHECK_THROWS_AS(build_separation_system(kHalf, rect, TypicalityParams(0.2), 12, 0.3, 0.3,
                                            CommonRandomness(5)),
                    std::invalid_argument);
    const Pmf qY{0.4, 0.4, 0.2};
    CHECK_NOTHROW(build_separation_system(kHalf, rect, TypicalityParams(0.2), 12, 0.3, 0.3,
                                          CommonRandomness(5), std::nullopt, &qY));
}

TEST_CASE("a lossy system that fails the membership check is flagged, not rejected") {
    const DistortionSpec d({{1.0, 0.0}, {2.0, 0.0}}, 0.5); // constant channel always exceeds
    const CommonRandomness cr(33);
    const LayerStack stack = build_reliable_on_lossy(make_constant(2, 2, 0), kHalf, d,
                                                     TypicalityParams(0.3), 12, 0.2,
                                                     cr.derived("stack"));
    CHECK_FALSE(stack.warnings.empty());
    CHECK_FALSE(stack.layers.empty());
}
