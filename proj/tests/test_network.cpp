#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "liftcam/network.hpp"
#include "liftcam/ops.hpp"
#include "liftcam/synthetic.hpp"
#include "test_support.hpp"

namespace liftcam {
namespace {

using testing::random_tensor;

// F(a) = 3·sum(A_1) + 5·sum(A_2) over 2×H×W stacks.
ModelGraph weighted_sum_head(std::size_t h, std::size_t w, float w1 = 3, float w2 = 5) {
    Tensor weights({1, 2 * h * w});
    for (std::size_t i = 0; i < h * w; ++i) {
        weights[i] = w1;
        weights[h * w + i] = w2;
    }
    return ModelGraph({2, h, w}, {}, {Layer::flatten(), Layer::dense("fc", weights, Tensor({1}))}, 1);
}

TEST(ModelGraph, RejectsBrokenChains) {
    EXPECT_THROW(ModelGraph({1, 2, 2}, {}, {Layer::flatten()}, 4), ShapeError);  // no dense logit layer
    EXPECT_THROW(ModelGraph({1, 2, 2}, {}, {Layer::flatten(), Layer::dense("fc", Tensor({3, 5}), Tensor({3}))}, 3),
                 ShapeError);
    try {
        ModelGraph({1, 2, 2}, {}, {Layer::max_pool(3, 1, "bad"), Layer::flatten(), Layer::dense("fc", Tensor({1, 4}), Tensor({1}))}, 1);
        FAIL();
    } catch (const ShapeError& e) {
        EXPECT_NE(std::string(e.what()).find("'bad'"), std::string::npos);
    }
    EXPECT_THROW(parse_layer_kind("softmax"), ShapeError);
}

TEST(Forward, IdentityFrontendAndHead) {
    Tensor eye({4, 4});
    for (std::size_t i = 0; i < 4; ++i) eye[i * 4 + i] = 1.0f;
    const ModelGraph model({1, 2, 2}, {}, {Layer::flatten(), Layer::dense("id", eye, Tensor({4}))}, 4);
    const auto image = Tensor::from_values({1, 2, 2}, {0.5, -1, 2, 0});
    const auto result = forward_full(model, image);
    const std::vector<double> flat{0.5, -1, 2, 0};
    const auto expected = softmax(flat);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(result.probs[i], expected[i], 1e-12);
    EXPECT_EQ(result.activations, image);
    EXPECT_THROW(forward_full(model, Tensor({1, 3, 3})), ShapeError);
}

TEST(Forward, ZeroImageThroughZeroBiasReluConv) {
    std::mt19937_64 rng(2);
    const ModelGraph model({3, 4, 4},
                           {Layer::conv2d("c", random_tensor({5, 3, 3, 3}, rng, -1, 1), Tensor({5}), 1, 1), Layer::relu()},
                           {Layer::flatten(), Layer::dense("fc", random_tensor({2, 80}, rng), Tensor({2}))}, 2);
    EXPECT_EQ(forward_full(model, Tensor({3, 4, 4})).activations, Tensor({5, 4, 4}));
}

TEST(Forward, MatchesDirectLoopOracle) {
    for (auto kind : {HeadKind::Linear, HeadKind::ReluMlp, HeadKind::ConvRelu}) {
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            const ModelGraph model = generate_synthetic_model({6, 4, 4, 5, kind, seed});
            const Tensor image = generate_synthetic_image(model, seed + 100);
            const auto got = forward_full(model, image).logits;
            const auto want = testing::ref_logits(model, image);
            for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-4);
        }
    }
}

TEST(ForwardHead, Examples) {
    const ModelGraph model = weighted_sum_head(2, 2);
    Tensor unit_sum({2, 2, 2});
    for (std::size_t i = 0; i < 8; ++i) unit_sum[i] = 0.25f;
    EXPECT_DOUBLE_EQ(forward_head(model, unit_sum, 0), 8.0);
    EXPECT_DOUBLE_EQ(forward_head(model, Tensor({2, 2, 2}), 0), 0.0);
    EXPECT_THROW(forward_head(model, unit_sum, 1), ShapeError);

    const ModelGraph synth = generate_synthetic_model({4, 2, 2, 3, HeadKind::ReluMlp, 9});
    const Tensor image = generate_synthetic_image(synth, 1);
    const auto full = forward_full(synth, image);
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(forward_head(synth, full.activations, c), full.logits[c]);
}

TEST(MaskApply, Examples) {
    std::mt19937_64 rng(4);
    const Tensor a = random_tensor({2, 3, 3}, rng);
    const std::vector<std::uint8_t> ones{1, 1}, zeros{0, 0}, first{1, 0};
    EXPECT_EQ(mask_apply(a, ones), a);
    EXPECT_EQ(mask_apply(a, zeros), Tensor({2, 3, 3}));
    const Tensor m = mask_apply(a, first);
    EXPECT_EQ(m.channel(0), a.channel(0));
    EXPECT_EQ(m.channel(1), Tensor({3, 3}));
    EXPECT_EQ(mask_apply(m, first), m);
    EXPECT_EQ(mask_apply_bits(a, 0b01), m);
    const std::vector<std::uint8_t> wrong{1};
    EXPECT_THROW(mask_apply(a, wrong), ShapeError);
}

TEST(Gradient, GlobalAvgPoolIdentityDense) {
    // ∂ mean(A_c)/∂A_c(i,j) = 1/(H·W).
    Tensor eye({3, 3});
    for (std::size_t i = 0; i < 3; ++i) eye[i * 3 + i] = 1.0f;
    const ModelGraph model({3, 2, 4}, {}, {Layer::global_avg_pool(), Layer::dense("id", eye, Tensor({3}))}, 3);
    std::mt19937_64 rng(5);
    const Tensor a = random_tensor({3, 2, 4}, rng);
    const Tensor g = backward_head_gradient(model, HeadTrace::build(model, a), 1);
    for (std::size_t k = 0; k < 3; ++k)
        for (std::size_t i = 0; i < 8; ++i) EXPECT_FLOAT_EQ(g[k * 8 + i], k == 1 ? 1.0f / 8.0f : 0.0f);
}

TEST(Gradient, LinearHeadIsWeightComposition) {
    const ModelGraph model = weighted_sum_head(2, 3);
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 3; ++trial) {
        const Tensor a = random_tensor({2, 2, 3}, rng, 0, 5);
        const Tensor g = backward_head_gradient(model, HeadTrace::build(model, a), 0);
        for (std::size_t i = 0; i < 6; ++i) {
            EXPECT_EQ(g[i], 3.0f);
            EXPECT_EQ(g[6 + i], 5.0f);
        }
    }
}

TEST(Gradient, AgreesWithFiniteDifferences) {
    std::size_t agree = 0, probed = 0;
    std::mt19937_64 rng(8);
    for (auto kind : {HeadKind::ReluMlp, HeadKind::ConvRelu, HeadKind::Linear}) {
        for (std::uint64_t seed = 0; seed < 4; ++seed) {
            const ModelGraph model = generate_synthetic_model({6, 4, 4, 4, kind, seed});
            const Tensor a = forward_frontend(model, generate_synthetic_image(model, seed));
            const auto grad = head_gradient(model, HeadTrace::build(model, a, false), seed % 4);
            for (int p = 0; p < 30; ++p) {
                const auto probe = testing::probe_gradient(model, a, grad, seed % 4, rng() % a.size());
                if (probe.kink) continue;
                ++probed;
                if (testing::relative_agree(probe.analytic, probe.numeric, 1e-3)) ++agree;
            }
        }
    }
    ASSERT_GT(probed, 200u);
    EXPECT_GE(static_cast<double>(agree) / static_cast<double>(probed), 0.95);
}

TEST(Gradient, MaxPoolTieGoesToLowestIndex) {
    const ModelGraph model({1, 2, 2}, {},
                           {Layer::max_pool(2, 2), Layer::flatten(), Layer::dense("fc", Tensor({1, 1}, 1.0f), Tensor({1}))}, 1);
    const Tensor g = backward_head_gradient(model, HeadTrace::build(model, Tensor({1, 2, 2}, 1.0f)), 0);
    EXPECT_EQ(g, Tensor::from_values({1, 2, 2}, {1, 0, 0, 0}));
}

// y = relu(x − 5), the saturation example.
ModelGraph shifted_relu() {
    return ModelGraph({1, 1, 1}, {},
                      {Layer::flatten(), Layer::dense("shift", Tensor({1, 1}, 1.0f), Tensor({1}, -5.0f)), Layer::relu(),
                       Layer::dense("out", Tensor({1, 1}, 1.0f), Tensor({1}))},
                      1);
}

TEST(DeepLift, RescaleOnSaturatedRelu) {
    const ModelGraph model = shifted_relu();
    const Tensor a({1, 1, 1}, 10.0f);
    const auto trace = HeadTrace::build(model, a);
    EXPECT_DOUBLE_EQ(deeplift_head(model, trace, 0)[0], 5.0f);
    const double grad_times_input = backward_head_gradient(model, trace, 0)[0] * a[0];
    EXPECT_DOUBLE_EQ(grad_times_input, 10.0);
}

TEST(DeepLift, InactiveRelu) {
    const ModelGraph model({1, 1, 1}, {},
                           {Layer::flatten(), Layer::relu(), Layer::dense("out", Tensor({1, 1}, 1.0f), Tensor({1}))}, 1);
    const auto trace = HeadTrace::build(model, Tensor({1, 1, 1}, -2.0f));
    EXPECT_EQ(deeplift_head(model, trace, 0)[0], 0.0f);
}

TEST(DeepLift, LinearHeadEqualsGradientTimesInput) {
    std::mt19937_64 rng(12);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const ModelGraph model = generate_synthetic_model({5, 4, 4, 3, HeadKind::Linear, seed});
        const Tensor a = random_tensor(model.activation_shape(), rng, 0, 2);
        const auto trace = HeadTrace::build(model, a);
        const auto c = head_contributions(model, trace, 1);
        const auto g = head_gradient(model, trace, 1);
        for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(c[i], g[i] * a[i], 1e-6);
    }
}

TEST(DeepLift, SummationToDelta) {
    std::mt19937_64 rng(13);
    for (auto kind : {HeadKind::Linear, HeadKind::ReluMlp, HeadKind::ConvRelu}) {
        for (std::uint64_t seed = 0; seed < 15; ++seed) {
            const ModelGraph model = generate_synthetic_model({4 + seed % 5, 4, 4, 3, kind, seed});
            const Tensor a = forward_frontend(model, generate_synthetic_image(model, seed));
            const auto trace = HeadTrace::build(model, a);
            for (std::size_t cls = 0; cls < 3; ++cls) {
                const auto c = head_contributions(model, trace, cls);
                double total = 0;
                for (double v : c) total += v;
                const double delta = trace.logits()[cls] - trace.reference_logits()[cls];
                EXPECT_LE(std::abs(total - delta), 1e-4 * std::abs(delta) + 1e-6) << to_string(kind) << " seed " << seed;
            }
        }
    }
}

TEST(DeepLift, MaxPoolAgainstNonUniformReference) {
    // Second conv with padding makes the reference map spatially uneven before the pool.
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        const ModelGraph model({3, 4, 4}, {},
                               {Layer::conv2d("c1", random_tensor({4, 3, 3, 3}, rng, -1, 1), random_tensor({4}, rng, -0.5, 0.5), 1, 1),
                                Layer::relu(),
                                Layer::conv2d("c2", random_tensor({2, 4, 3, 3}, rng, -1, 1), random_tensor({2}, rng, -0.5, 0.5), 1, 1),
                                Layer::max_pool(2, 2), Layer::flatten(),
                                Layer::dense("fc", random_tensor({2, 8}, rng, -1, 1), Tensor({2}))},
                               2);
        const Tensor a = random_tensor({3, 4, 4}, rng, 0, 2);
        const auto trace = HeadTrace::build(model, a);
        const auto c = head_contributions(model, trace, 0);
        double total = 0;
        for (double v : c) total += v;
        const double delta = trace.logits()[0] - trace.reference_logits()[0];
        EXPECT_LE(std::abs(total - delta), 1e-4 * std::abs(delta) + 1e-6);
    }
}

TEST(DeepLift, NeedsReferenceTrace) {
    const ModelGraph model = shifted_relu();
    const auto trace = HeadTrace::build(model, Tensor({1, 1, 1}, 3.0f), false);
    EXPECT_THROW(deeplift_head(model, trace, 0), ShapeError);
    EXPECT_NO_THROW(backward_head_gradient(model, trace, 0));
    const ModelGraph other = weighted_sum_head(1, 1);
    EXPECT_THROW(backward_head_gradient(other, trace, 0), ShapeError);
}

}  // namespace
}  // namespace liftcam
