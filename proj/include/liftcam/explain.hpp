#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "liftcam/attribution.hpp"
#include "liftcam/network.hpp"
#include "liftcam/shapley.hpp"

namespace liftcam {

enum class Method { GradCam, GradCamPP, XGradCam, ScoreCam, AblationCam, ShapCam, LiftCam, ExactShapley };

std::string_view to_string(Method method);
/// Throws std::invalid_argument listing the accepted names.
Method parse_method(std::string_view name);
const std::vector<std::string_view>& method_names();

struct ExplainOptions {
    std::size_t orderings = 100;  // SHAP-CAM |Π|
    std::uint64_t seed = 0;
    ScoreCamOptions score;
};

struct Explanation {
    CoefficientVector coefficients;
    ExplanationMap map;
    double target_logit = 0.0;     // F^c(A)
    double reference_logit = 0.0;  // F^c(0)
    double coefficient_seconds = 0.0;
    double total_seconds = 0.0;
};

/// Coefficients only, from an already computed activation stack.
CoefficientVector compute_coefficients(const ModelGraph& model, const Tensor& image, const Tensor& activations,
                                       std::size_t cls, Method method, const ExplainOptions& options = {});

/// Frontend pass, coefficients, and the assembled map at image resolution.
Explanation explain(const ModelGraph& model, const Tensor& image, std::size_t cls, Method method,
                    const ExplainOptions& options = {});

}  // namespace liftcam
