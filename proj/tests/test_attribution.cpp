#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "liftcam/attribution.hpp"
#include "liftcam/ops.hpp"
#include "liftcam/shapley.hpp"
#include "liftcam/synthetic.hpp"
#include "test_support.hpp"

namespace liftcam {
namespace {

using testing::random_tensor;

// F = Σ_k w_k·sum(A_k) + bias, a fully linear head over a K×H×W stack.
ModelGraph channel_sum_head(const std::vector<float>& w, std::size_t h, std::size_t wd, float bias = 0) {
    const std::size_t plane = h * wd;
    Tensor weights({1, w.size() * plane});
    for (std::size_t k = 0; k < w.size(); ++k)
        for (std::size_t i = 0; i < plane; ++i) weights[k * plane + i] = w[k];
    return ModelGraph({w.size(), h, wd}, {}, {Layer::flatten(), Layer::dense("fc", weights, Tensor({1}, bias))}, 1);
}

// F = Σ_k w_k·mean(A_k).
ModelGraph channel_mean_head(const std::vector<float>& w, std::size_t h, std::size_t wd) {
    Tensor weights({1, w.size()}, std::vector<float>(w));
    return ModelGraph({w.size(), h, wd}, {}, {Layer::global_avg_pool(), Layer::dense("fc", weights, Tensor({1}))}, 1);
}

TEST(AssembleMap, ReluClipsNegativeSum) {
    const auto a = Tensor::from_values({2, 1, 1}, {1, 2});
    const auto map = assemble_map(a, {"t", {1, -1}}, 3, 3);
    EXPECT_EQ(map.raw, Tensor({1, 1}, 0.0f));
    EXPECT_EQ(map.normalized, Tensor({3, 3}, 0.0f));
}

TEST(AssembleMap, OneHotSelectsChannel) {
    std::mt19937_64 rng(1);
    const Tensor a = random_tensor({3, 4, 4}, rng);
    const auto map = assemble_map(a, {"t", {0, 1, 0}}, 8, 8);
    EXPECT_EQ(map.raw, a.channel(1));
    EXPECT_THROW(assemble_map(a, {"t", {1, 1}}, 8, 8), ShapeError);
}

TEST(AssembleMap, PositiveScalingInvariance) {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> d;
    for (int trial = 0; trial < 20; ++trial) {
        const Tensor a = random_tensor({4, 3, 3}, rng);
        CoefficientVector c{"t", {d(rng), d(rng), d(rng), d(rng)}};
        CoefficientVector scaled = c;
        const double lambda = 0.1 + 10.0 * std::abs(d(rng));
        for (double& v : scaled.values) v *= lambda;
        const auto m1 = assemble_map(a, c, 6, 6), m2 = assemble_map(a, scaled, 6, 6);
        for (std::size_t i = 0; i < m1.normalized.size(); ++i) EXPECT_NEAR(m1.normalized[i], m2.normalized[i], 1e-5);
        for (float v : m1.raw.data()) EXPECT_GE(v, 0.0f);
    }
}

TEST(GradCam, GlobalAvgPoolIdentityDense) {
    Tensor eye({2, 2});
    eye[0] = eye[3] = 1.0f;
    const ModelGraph model({2, 3, 3}, {}, {Layer::global_avg_pool(), Layer::dense("id", eye, Tensor({2}))}, 2);
    std::mt19937_64 rng(3);
    const Tensor a = random_tensor({2, 3, 3}, rng);
    const auto alpha = grad_cam(model, HeadTrace::build(model, a), 0).values;
    EXPECT_NEAR(alpha[0], 1.0 / 9.0, 1e-12);
    EXPECT_NEAR(alpha[1], 0.0, 1e-12);
}

TEST(GradCam, LinearHeads) {
    // Mean of a constant gradient field: F = Σ w·mean(A) gives w/(H·W), F = Σ w·sum(A) gives w.
    std::mt19937_64 rng(4);
    const Tensor a = random_tensor({2, 2, 3}, rng);
    const auto mean_alpha = grad_cam(channel_mean_head({3, -2}, 2, 3), HeadTrace::build(channel_mean_head({3, -2}, 2, 3), a), 0);
    EXPECT_NEAR(mean_alpha.values[0], 3.0 / 6.0, 1e-7);
    EXPECT_NEAR(mean_alpha.values[1], -2.0 / 6.0, 1e-7);
    const ModelGraph sum_head = channel_sum_head({3, -2}, 2, 3);
    const auto sum_alpha = grad_cam(sum_head, HeadTrace::build(sum_head, a), 0);
    EXPECT_NEAR(sum_alpha.values[0], 3.0, 1e-7);
    EXPECT_NEAR(sum_alpha.values[1], -2.0, 1e-7);

    Tensor doubled = a;
    for (float& v : doubled.data()) v *= 2;
    EXPECT_EQ(grad_cam(sum_head, HeadTrace::build(sum_head, doubled), 0).values, sum_alpha.values);
}

TEST(GradCamPP, AllZeroGradients) {
    const ModelGraph model = channel_sum_head({0, 0}, 2, 2);
    std::mt19937_64 rng(5);
    const Tensor a = random_tensor({2, 2, 2}, rng);
    EXPECT_EQ(grad_cam_pp(model, HeadTrace::build(model, a), 0).values, (std::vector<double>{0, 0}));
}

TEST(GradCamPP, SingleActiveNeuron) {
    // One neuron with A = 2 and g = 3; every other neuron has A = 0 and g = 0.
    // w = 9/(2·9 + 2·27) = 0.125, α = w·g = 0.375.
    Tensor weights({1, 4});
    weights[1] = 3.0f;
    const ModelGraph model({1, 2, 2}, {}, {Layer::flatten(), Layer::dense("fc", weights, Tensor({1}))}, 1);
    const auto a = Tensor::from_values({1, 2, 2}, {0, 2, 0, 0});
    EXPECT_NEAR(grad_cam_pp(model, HeadTrace::build(model, a), 0).values[0], 0.375, 1e-12);
}

TEST(GradCamPP, NegativeGradientChannel) {
    const ModelGraph model = channel_sum_head({-1.5f, 2}, 2, 2);
    const Tensor a({2, 2, 2}, 1.0f);
    const auto alpha = grad_cam_pp(model, HeadTrace::build(model, a), 0).values;
    EXPECT_EQ(alpha[0], 0.0);
    EXPECT_GT(alpha[1], 0.0);
}

TEST(XGradCam, UniformMapsMatchGradCam) {
    std::mt19937_64 rng(6);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const ModelGraph model = generate_synthetic_model({4, 3, 3, 3, HeadKind::ReluMlp, seed});
        Tensor a({4, 3, 3});
        for (std::size_t k = 0; k < 4; ++k) {
            const auto v = static_cast<float>(0.1 + std::uniform_real_distribution<>(0, 2)(rng));
            for (std::size_t i = 0; i < 9; ++i) a[k * 9 + i] = v;
        }
        const auto trace = HeadTrace::build(model, a);
        const auto g = grad_cam(model, trace, 0).values, x = xgrad_cam(model, trace, 0).values;
        for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(g[k], x[k], 1e-6);
    }
}

TEST(XGradCam, HandEvaluatedLinearHead) {
    // A = [[1,2],[3,4]], g = [[1,0],[2,-1]]: Σ A·g / Σ A = (1 + 0 + 6 − 4)/10.
    const ModelGraph model({1, 2, 2}, {},
                           {Layer::flatten(), Layer::dense("fc", Tensor::from_values({1, 4}, {1, 0, 2, -1}), Tensor({1}))}, 1);
    const auto a = Tensor::from_values({1, 2, 2}, {1, 2, 3, 4});
    EXPECT_NEAR(xgrad_cam(model, HeadTrace::build(model, a), 0).values[0], 0.3, 1e-12);
}

TEST(XGradCam, ZeroChannel) {
    const ModelGraph model = channel_sum_head({2, 3}, 2, 2);
    const auto a = Tensor::from_values({2, 2, 2}, {0, 0, 0, 0, 1, 1, 1, 1});
    const auto alpha = xgrad_cam(model, HeadTrace::build(model, a), 0).values;
    EXPECT_EQ(alpha[0], 0.0);
    EXPECT_NEAR(alpha[1], 3.0, 1e-12);
}

// Direct-loop Score-CAM: own bilinear sampling, own min-max, double-precision forward.
std::vector<double> score_cam_oracle(const ModelGraph& model, const Tensor& image, std::size_t cls) {
    const auto act = testing::ref_frontend(model, image);
    const std::size_t k_n = act.shape[0], h = act.shape[1], w = act.shape[2];
    const std::size_t oh = image.dim(1), ow = image.dim(2), c_n = image.dim(0);
    const double base = testing::ref_softmax(testing::ref_logits(model, Tensor(image.shape())))[cls];
    std::vector<double> raw;
    for (std::size_t k = 0; k < k_n; ++k) {
        std::vector<double> up(oh * ow);
        for (std::size_t y = 0; y < oh; ++y)
            for (std::size_t x = 0; x < ow; ++x) {
                const double sy = oh > 1 ? double(y) * double(h - 1) / double(oh - 1) : 0;
                const double sx = ow > 1 ? double(x) * double(w - 1) / double(ow - 1) : 0;
                const std::size_t y0 = std::size_t(sy), x0 = std::size_t(sx);
                const std::size_t y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
                const double fy = sy - double(y0), fx = sx - double(x0);
                auto at = [&](std::size_t yy, std::size_t xx) { return act.v[(k * h + yy) * w + xx]; };
                up[y * ow + x] = (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x1)) +
                                 fy * ((1 - fx) * at(y1, x0) + fx * at(y1, x1));
            }
        const double lo = *std::min_element(up.begin(), up.end()), hi = *std::max_element(up.begin(), up.end());
        Tensor masked = image;
        for (std::size_t c = 0; c < c_n; ++c)
            for (std::size_t i = 0; i < oh * ow; ++i)
                masked[c * oh * ow + i] = static_cast<float>(image[c * oh * ow + i] * (hi > lo ? (up[i] - lo) / (hi - lo) : 0.0));
        raw.push_back(testing::ref_softmax(testing::ref_logits(model, masked))[cls] - base);
    }
    return testing::ref_softmax(raw);
}

TEST(ScoreCam, MatchesDirectLoopOracle) {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        const ModelGraph model = generate_synthetic_model({5, 3, 3, 4, HeadKind::ConvRelu, seed});
        const Tensor image = generate_synthetic_image(model, seed);
        const Tensor a = forward_frontend(model, image);
        const auto got = score_cam(model, image, a, seed % 4).values;
        const auto want = score_cam_oracle(model, image, seed % 4);
        for (std::size_t k = 0; k < got.size(); ++k) EXPECT_NEAR(got[k], want[k], 1e-5);
    }
}

TEST(ScoreCam, IdenticalChannelsGiveUniform) {
    // Frontend duplicates one conv response into every channel.
    Tensor kernels({4, 1, 1, 1}, 1.0f);
    const ModelGraph model({1, 4, 4}, {Layer::conv2d("dup", kernels, Tensor({4}))},
                           {Layer::global_avg_pool(), Layer::dense("fc", Tensor::from_values({2, 4}, {1, 2, 3, 4, -1, 0, 1, 0}), Tensor({2}))},
                           2);
    std::mt19937_64 rng(7);
    const Tensor image = random_tensor({1, 4, 4}, rng);
    const auto alpha = score_cam(model, image, forward_frontend(model, image), 0).values;
    for (double v : alpha) EXPECT_NEAR(v, 0.25, 1e-12);
}

TEST(ScoreCam, ConstantChannelScoresZeroAgainstBaseline) {
    // Channel 0 is constant → its mask is all-zero → masked image equals the zero baseline.
    const ModelGraph model({1, 2, 2}, {Layer::conv2d("c", Tensor::from_values({2, 1, 1, 1}, {0, 1}), Tensor::from_values({2}, {0.7f, 0}))},
                           {Layer::flatten(), Layer::dense("fc", Tensor::from_values({1, 8}, {1, 1, 1, 1, 2, -1, 3, 1}), Tensor({1}))}, 1);
    const auto image = Tensor::from_values({1, 2, 2}, {0.1f, 0.9f, 0.4f, 0.3f});
    ScoreCamOptions raw_scores;
    raw_scores.channel_softmax = false;
    raw_scores.use_probabilities = false;
    const auto alpha = score_cam(model, image, forward_frontend(model, image), 0, raw_scores).values;
    EXPECT_EQ(alpha[0], 0.0);
    EXPECT_NE(alpha[1], 0.0);
}

TEST(AblationCam, DirectSubstitution) {
    // F = 2·sum(A_1) + 8·sum(A_2), unit sums: F = 10, dropping channel 1 leaves 8.
    const ModelGraph model = channel_sum_head({2, 8}, 1, 2);
    const Tensor a({2, 1, 2}, 0.5f);
    const auto alpha = ablation_cam(model, a, 0).values;
    EXPECT_NEAR(alpha[0], 0.2, 1e-12);
    EXPECT_NEAR(alpha[1], 0.8, 1e-12);
}

TEST(AblationCam, ZeroChannelAndLinearHead) {
    const ModelGraph model = channel_sum_head({3, 5, -1}, 2, 2);
    const auto a = Tensor::from_values({3, 2, 2}, {1, 0, 2, 1, 0, 0, 0, 0, 0.5f, 0.5f, 0, 1});
    // sums (4, 0, 2): F = 12 − 2 = 10.
    const auto alpha = ablation_cam(model, a, 0).values;
    EXPECT_NEAR(alpha[0], 3.0 * 4 / 10, 1e-12);
    EXPECT_EQ(alpha[1], 0.0);
    EXPECT_NEAR(alpha[2], -1.0 * 2 / 10, 1e-12);
}

TEST(AblationCam, RejectsZeroTargetLogit) {
    const ModelGraph model = channel_sum_head({1, -1}, 1, 1);
    EXPECT_THROW(ablation_cam(model, Tensor({2, 1, 1}, 1.0f), 0), std::domain_error);
}

TEST(AblationCam, ViolatesLocalAccuracyOnReluHead) {
    // F = relu(A_1 + A_2 − 1): both channels are needed, each ablation kills the output.
    const ModelGraph model({2, 1, 1}, {},
                           {Layer::flatten(), Layer::dense("sum", Tensor({1, 2}, 1.0f), Tensor({1}, -1.0f)), Layer::relu(),
                            Layer::dense("out", Tensor({1, 1}, 1.0f), Tensor({1}))},
                           1);
    const Tensor a({2, 1, 1}, 1.0f);
    const double full = forward_head(model, a, 0), zero = forward_head(model, Tensor({2, 1, 1}), 0);
    const auto alpha = ablation_cam(model, a, 0);
    EXPECT_GT(std::abs(alpha.sum() * full - (full - zero)), 1e-3);
    const auto lift = lift_cam(model, HeadTrace::build(model, a), 0);
    EXPECT_NEAR(lift.sum(), full - zero, 1e-9);
}

TEST(LiftCam, ZeroStack) {
    const ModelGraph model = generate_synthetic_model({4, 3, 3, 3, HeadKind::ReluMlp, 1});
    const Tensor zero(model.activation_shape());
    for (double v : lift_cam(model, HeadTrace::build(model, zero), 2).values) EXPECT_EQ(v, 0.0);
}

TEST(LiftCam, LocalAccuracy) {
    for (auto kind : {HeadKind::Linear, HeadKind::ReluMlp, HeadKind::ConvRelu}) {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const ModelGraph model = generate_synthetic_model({6, 4, 4, 3, kind, seed + 40});
            const Tensor a = forward_frontend(model, generate_synthetic_image(model, seed));
            const auto trace = HeadTrace::build(model, a);
            const double delta = trace.logits()[0] - trace.reference_logits()[0];
            EXPECT_LE(std::abs(lift_cam(model, trace, 0).sum() - delta), 1e-4 * std::abs(delta) + 1e-6);
        }
    }
}

TEST(LiftCam, ExactOnLinearHeads) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const ModelGraph model = generate_synthetic_model({7, 4, 4, 3, HeadKind::Linear, seed});
        const Tensor a = forward_frontend(model, generate_synthetic_image(model, seed));
        const auto lift = lift_cam(model, HeadTrace::build(model, a), 1).values;
        const auto shap = exact_shapley(model, a, 1).values;
        for (std::size_t k = 0; k < lift.size(); ++k) EXPECT_NEAR(lift[k], shap[k], 1e-6);
    }
}

}  // namespace
}  // namespace liftcam
