#include "liftcam/explain.hpp"

#include <chrono>
#include <stdexcept>
#include <string>

namespace liftcam {

namespace {

constexpr std::pair<Method, std::string_view> kMethodNames[] = {
    {Method::GradCam, "grad-cam"},         {Method::GradCamPP, "grad-cam++"},
    {Method::XGradCam, "xgrad-cam"},       {Method::ScoreCam, "score-cam"},
    {Method::AblationCam, "ablation-cam"}, {Method::ShapCam, "shap-cam"},
    {Method::LiftCam, "lift-cam"},         {Method::ExactShapley, "exact-shapley"},
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

std::string_view to_string(Method method) {
    for (const auto& [m, name] : kMethodNames) {
        if (m == method) return name;
    }
    return "unknown";
}

const std::vector<std::string_view>& method_names() {
    static const std::vector<std::string_view> names = [] {
        std::vector<std::string_view> out;
        for (const auto& entry : kMethodNames) out.push_back(entry.second);
        return out;
    }();
    return names;
}

Method parse_method(std::string_view name) {
    for (const auto& [m, n] : kMethodNames) {
        if (n == name) return m;
    }
    std::string accepted;
    for (auto n : method_names()) accepted += (accepted.empty() ? "" : ", ") + std::string(n);
    throw std::invalid_argument("unknown method '" + std::string(name) + "' (expected one of: " + accepted + ")");
}

CoefficientVector compute_coefficients(const ModelGraph& model, const Tensor& image, const Tensor& activations,
                                       std::size_t cls, Method method, const ExplainOptions& options) {
    switch (method) {
        case Method::GradCam:
            return grad_cam(model, HeadTrace::build(model, activations, false), cls);
        case Method::GradCamPP:
            return grad_cam_pp(model, HeadTrace::build(model, activations, false), cls);
        case Method::XGradCam:
            return xgrad_cam(model, HeadTrace::build(model, activations, false), cls);
        case Method::ScoreCam:
            return score_cam(model, image, activations, cls, options.score);
        case Method::AblationCam:
            return ablation_cam(model, activations, cls);
        case Method::ShapCam:
            return shap_cam(model, activations, cls,
                            OrderingSet::sample(activations.dim(0), options.orderings, options.seed));
        case Method::LiftCam:
            return lift_cam(model, HeadTrace::build(model, activations, true), cls);
        case Method::ExactShapley:
            return exact_shapley(model, activations, cls);
    }
    throw std::invalid_argument("unknown method");
}

Explanation explain(const ModelGraph& model, const Tensor& image, std::size_t cls, Method method,
                    const ExplainOptions& options) {
    const auto start = Clock::now();
    if (cls >= model.num_classes()) {
        throw ShapeError("class " + std::to_string(cls) + " out of range [0, " + std::to_string(model.num_classes()) +
                         ")");
    }
    Explanation out;
    const Tensor activations = forward_frontend(model, image);
    const auto coeff_start = Clock::now();
    out.coefficients = compute_coefficients(model, image, activations, cls, method, options);
    out.coefficient_seconds = seconds_since(coeff_start);
    out.target_logit = forward_head(model, activations, cls);
    out.reference_logit = forward_head(model, Tensor(activations.shape()), cls);
    out.map = assemble_map(activations, out.coefficients, image.dim(1), image.dim(2));
    out.total_seconds = seconds_since(start);
    return out;
}

}  // namespace liftcam
