#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "liftcam/network.hpp"
#include "liftcam/tensor.hpp"

namespace liftcam {

/// Per-channel CAM coefficients α_1..α_{N_l}.
struct CoefficientVector {
    std::string method;
    std::vector<double> values;

    double sum() const;
};

/// raw = relu(Σ α_k A_k) at activation resolution; normalized = s(u(raw)) at image resolution.
struct ExplanationMap {
    Tensor raw;
    Tensor normalized;
};

ExplanationMap assemble_map(const Tensor& activations, const CoefficientVector& coeffs, std::size_t out_h,
                            std::size_t out_w);

CoefficientVector grad_cam(const ModelGraph& model, const HeadTrace& trace, std::size_t cls);

/// Grad-CAM++ closed form: w = g²/(2g² + ΣA·g³), α_k = Σ w·relu(g).
CoefficientVector grad_cam_pp(const ModelGraph& model, const HeadTrace& trace, std::size_t cls);

/// XGrad-CAM: α_k = Σ (A/ΣA)·g; channels with Σ|A| below 1e-12 get 0.
CoefficientVector xgrad_cam(const ModelGraph& model, const HeadTrace& trace, std::size_t cls);

struct ScoreCamOptions {
    Tensor baseline;                // empty means an all-zero image
    bool use_probabilities = true;  // false scores with the target logit
    bool channel_softmax = true;    // softmax over the N_l raw scores
};

/// Needs N_l + 1 full forward passes.
CoefficientVector score_cam(const ModelGraph& model, const Tensor& image, const Tensor& activations, std::size_t cls,
                            const ScoreCamOptions& options = {});

/// α_k = (F(A) − F(A with channel k zeroed)) / F(A). Throws when F(A) = 0.
CoefficientVector ablation_cam(const ModelGraph& model, const Tensor& activations, std::size_t cls);

/// α_k = Σ_{ij} DeepLIFT-Rescale contribution of A_k(i,j); one backward pass.
CoefficientVector lift_cam(const ModelGraph& model, const HeadTrace& trace, std::size_t cls);

}  // namespace liftcam
