#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "liftcam/attribution.hpp"
#include "liftcam/network.hpp"
#include "liftcam/tensor.hpp"

namespace liftcam {

/// Pixel rectangle, rows [top, bottom) and columns [left, right).
struct BoundingBox {
    std::size_t top = 0;
    std::size_t left = 0;
    std::size_t bottom = 0;
    std::size_t right = 0;

    /// Throws ShapeError unless 0 ≤ top < bottom ≤ height and 0 ≤ left < right ≤ width.
    void validate(std::size_t height, std::size_t width) const;
    bool contains(std::size_t y, std::size_t x) const { return y >= top && y < bottom && x >= left && x < right; }
};

struct EvalSample {
    std::string name;
    Tensor image;
    std::size_t target_class = 0;
    std::optional<BoundingBox> bbox;
};

/// e^c = s(u(L)) ∘ x with the mask broadcast over image channels.
Tensor explanation_image(const Tensor& image, const ExplanationMap& map);
/// e^c_inv = (1 − s(u(L))) ∘ x.
Tensor inverted_explanation_image(const Tensor& image, const ExplanationMap& map);

struct SampleRecord {
    std::string name;
    std::optional<double> original;      // Y^c
    std::optional<double> explanation;   // O^c
    std::optional<double> inverted;      // D^c
    bool excluded = false;               // Y^c = 0
    std::optional<double> insertion_auc;
    std::optional<double> deletion_auc;
    std::optional<double> proportion;
    std::optional<double> cosine;  // against the Shapley reference
};

struct MetricReport {
    std::string method;
    std::vector<SampleRecord> records;

    std::size_t n = 0;
    std::size_t excluded = 0;
    std::optional<double> ic;
    std::optional<double> ad;
    std::optional<double> add;
    std::optional<double> mean_insertion;
    std::optional<double> mean_deletion;
    std::optional<double> mean_proportion;
    std::optional<double> cosine;
    std::string cosine_reference;
    bool cosine_reference_approximate = false;

    /// Rebuilds every aggregate from `records`.
    void aggregate();

    nlohmann::json to_json() const;
    static MetricReport from_json(const nlohmann::json& j);
};

/// Plain-text table with one row per report.
std::string format_report_table(const std::vector<MetricReport>& reports);

/// Fills Y/O/D for one sample.
SampleRecord confidence_record(const ModelGraph& model, const EvalSample& sample, const ExplanationMap& map);

/// IC/AD/ADD over samples; maps[i] explains samples[i].
MetricReport ic_ad_add(const ModelGraph& model, std::span<const EvalSample> samples,
                       std::span<const ExplanationMap> maps, std::string method = {});

/// Number of δ steps on the insertion/deletion grid (δ = 0, 0.025, …, 1).
inline constexpr std::size_t kAucSteps = 40;

/// Binary mask selecting the top round(δ·P) pixels of `normalized`, δ = step/steps.
/// Ties in value go to the lower flat index.
Tensor top_fraction_mask(const Tensor& normalized, std::size_t step, std::size_t steps = kAucSteps);

/// Trapezoidal area of a curve sampled uniformly on [0, 1].
double trapezoid_auc(std::span<const double> curve);

struct AucResult {
    double insertion = 0.0;
    double deletion = 0.0;
    std::vector<double> insertion_curve;
    std::vector<double> deletion_curve;
};

AucResult insertion_deletion_auc(const ModelGraph& model, const EvalSample& sample, const ExplanationMap& map);

/// Share of normalized saliency energy inside the box. Throws on a zero-energy map.
double pointing_game(const ExplanationMap& map, const BoundingBox& bbox);

/// dot(a, b)/(‖a‖·‖b‖). Throws on length mismatch or a zero vector.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

}  // namespace liftcam
