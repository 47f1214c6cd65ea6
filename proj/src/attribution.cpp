#include "liftcam/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "liftcam/ops.hpp"

namespace liftcam {

double CoefficientVector::sum() const { return std::accumulate(values.begin(), values.end(), 0.0); }

ExplanationMap assemble_map(const Tensor& activations, const CoefficientVector& coeffs, std::size_t out_h,
                            std::size_t out_w) {
    if (activations.rank() != 3 || coeffs.values.size() != activations.dim(0)) {
        throw ShapeError("assemble_map: " + std::to_string(coeffs.values.size()) +
                         " coefficients for activation stack " + shape_to_string(activations.shape()));
    }
    const std::size_t h = activations.dim(1), w = activations.dim(2), plane = h * w;
    std::vector<double> acc(plane, 0.0);
    for (std::size_t k = 0; k < coeffs.values.size(); ++k) {
        const double alpha = coeffs.values[k];
        for (std::size_t i = 0; i < plane; ++i) acc[i] += alpha * activations[k * plane + i];
    }
    ExplanationMap map;
    map.raw = Tensor({h, w});
    for (std::size_t i = 0; i < plane; ++i) map.raw[i] = static_cast<float>(std::max(acc[i], 0.0));
    map.normalized = minmax_normalize(upsample_bilinear(map.raw, out_h, out_w));
    return map;
}

namespace {

struct ChannelView {
    std::size_t channels;
    std::size_t plane;
};

ChannelView view_of(const Tensor& activations) {
    return {activations.dim(0), activations.dim(1) * activations.dim(2)};
}

}  // namespace

CoefficientVector grad_cam(const ModelGraph& model, const HeadTrace& trace, std::size_t cls) {
    const auto grad = head_gradient(model, trace, cls);
    const auto [channels, plane] = view_of(trace.activations());
    CoefficientVector out{"grad-cam", std::vector<double>(channels, 0.0)};
    for (std::size_t k = 0; k < channels; ++k) {
        double acc = 0.0;
        for (std::size_t i = 0; i < plane; ++i) acc += grad[k * plane + i];
        out.values[k] = acc / static_cast<double>(plane);
    }
    return out;
}

CoefficientVector grad_cam_pp(const ModelGraph& model, const HeadTrace& trace, std::size_t cls) {
    const auto grad = head_gradient(model, trace, cls);
    const Tensor& a = trace.activations();
    const auto [channels, plane] = view_of(a);
    CoefficientVector out{"grad-cam++", std::vector<double>(channels, 0.0)};
    for (std::size_t k = 0; k < channels; ++k) {
        double a_sum = 0.0;
        for (std::size_t i = 0; i < plane; ++i) a_sum += a[k * plane + i];
        double alpha = 0.0;
        for (std::size_t i = 0; i < plane; ++i) {
            const double g = grad[k * plane + i];
            const double g2 = g * g;
            const double denom = 2.0 * g2 + a_sum * g2 * g;
            if (std::abs(denom) < 1e-12) continue;
            alpha += (g2 / denom) * std::max(g, 0.0);
        }
        out.values[k] = alpha;
    }
    return out;
}

CoefficientVector xgrad_cam(const ModelGraph& model, const HeadTrace& trace, std::size_t cls) {
    const auto grad = head_gradient(model, trace, cls);
    const Tensor& a = trace.activations();
    const auto [channels, plane] = view_of(a);
    CoefficientVector out{"xgrad-cam", std::vector<double>(channels, 0.0)};
    for (std::size_t k = 0; k < channels; ++k) {
        double a_sum = 0.0, a_abs = 0.0, weighted = 0.0;
        for (std::size_t i = 0; i < plane; ++i) {
            const double v = a[k * plane + i];
            a_sum += v;
            a_abs += std::abs(v);
            weighted += v * grad[k * plane + i];
        }
        if (a_abs < 1e-12 || a_sum == 0.0) continue;
        out.values[k] = weighted / a_sum;
    }
    return out;
}

CoefficientVector score_cam(const ModelGraph& model, const Tensor& image, const Tensor& activations, std::size_t cls,
                            const ScoreCamOptions& options) {
    if (cls >= model.num_classes()) {
        throw ShapeError("class " + std::to_string(cls) + " out of range [0, " + std::to_string(model.num_classes()) +
                         ")");
    }
    const Tensor baseline = options.baseline.empty() ? Tensor(model.input_shape()) : options.baseline;
    auto score = [&](const Tensor& input) {
        const auto result = forward_full(model, input);
        return options.use_probabilities ? result.probs[cls] : result.logits[cls];
    };
    const double base_score = score(baseline);
    const std::size_t out_h = image.dim(1), out_w = image.dim(2);
    const auto [channels, plane] = view_of(activations);
    (void)plane;
    std::vector<double> raw(channels, 0.0);
    for (std::size_t k = 0; k < channels; ++k) {
        const Tensor mask = minmax_normalize(upsample_bilinear(activations.channel(k), out_h, out_w));
        raw[k] = score(hadamard_broadcast(mask, image)) - base_score;
    }
    CoefficientVector out{"score-cam", options.channel_softmax ? softmax(raw) : raw};
    return out;
}

CoefficientVector ablation_cam(const ModelGraph& model, const Tensor& activations, std::size_t cls) {
    const double full = forward_head(model, activations, cls);
    if (full == 0.0) {
        throw std::domain_error("ablation-cam: target logit of the full activation stack is 0, coefficients undefined");
    }
    const std::size_t channels = activations.dim(0);
    CoefficientVector out{"ablation-cam", std::vector<double>(channels, 0.0)};
    std::vector<std::uint8_t> mask(channels, 1);
    for (std::size_t k = 0; k < channels; ++k) {
        mask[k] = 0;
        out.values[k] = (full - forward_head(model, mask_apply(activations, mask), cls)) / full;
        mask[k] = 1;
    }
    return out;
}

CoefficientVector lift_cam(const ModelGraph& model, const HeadTrace& trace, std::size_t cls) {
    const auto contributions = head_contributions(model, trace, cls);
    const auto [channels, plane] = view_of(trace.activations());
    CoefficientVector out{"lift-cam", std::vector<double>(channels, 0.0)};
    for (std::size_t k = 0; k < channels; ++k) {
        double acc = 0.0;
        for (std::size_t i = 0; i < plane; ++i) acc += contributions[k * plane + i];
        out.values[k] = acc;
    }
    return out;
}

}  // namespace liftcam
