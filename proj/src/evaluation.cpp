#include "liftcam/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "liftcam/ops.hpp"

namespace liftcam {

void BoundingBox::validate(std::size_t height, std::size_t width) const {
    if (!(top < bottom && bottom <= height && left < right && right <= width)) {
        std::ostringstream msg;
        msg << "bounding box [top=" << top << ", left=" << left << ", bottom=" << bottom << ", right=" << right
            << ") is not inside a " << height << "x" << width << " image";
        throw ShapeError(msg.str());
    }
}

namespace {

void check_map_matches(const Tensor& image, const ExplanationMap& map) {
    if (image.rank() != 3 || map.normalized.rank() != 2 || map.normalized.dim(0) != image.dim(1) ||
        map.normalized.dim(1) != image.dim(2)) {
        throw ShapeError("explanation map " + shape_to_string(map.normalized.shape()) +
                         " does not match image " + shape_to_string(image.shape()));
    }
}

double target_probability(const ModelGraph& model, const Tensor& image, std::size_t cls) {
    return forward_full(model, image).probs.at(cls);
}

}  // namespace

Tensor explanation_image(const Tensor& image, const ExplanationMap& map) {
    check_map_matches(image, map);
    return hadamard_broadcast(map.normalized, image);
}

Tensor inverted_explanation_image(const Tensor& image, const ExplanationMap& map) {
    check_map_matches(image, map);
    Tensor inverse = map.normalized;
    for (float& v : inverse.data()) v = 1.0f - v;
    return hadamard_broadcast(inverse, image);
}

SampleRecord confidence_record(const ModelGraph& model, const EvalSample& sample, const ExplanationMap& map) {
    SampleRecord record;
    record.name = sample.name;
    record.original = target_probability(model, sample.image, sample.target_class);
    record.explanation = target_probability(model, explanation_image(sample.image, map), sample.target_class);
    record.inverted = target_probability(model, inverted_explanation_image(sample.image, map), sample.target_class);
    record.excluded = *record.original == 0.0;
    return record;
}

MetricReport ic_ad_add(const ModelGraph& model, std::span<const EvalSample> samples,
                       std::span<const ExplanationMap> maps, std::string method) {
    if (samples.size() != maps.size()) {
        throw std::invalid_argument("ic_ad_add: " + std::to_string(samples.size()) + " samples but " +
                                    std::to_string(maps.size()) + " maps");
    }
    MetricReport report;
    report.method = std::move(method);
    for (std::size_t i = 0; i < samples.size(); ++i) report.records.push_back(confidence_record(model, samples[i], maps[i]));
    report.aggregate();
    return report;
}

void MetricReport::aggregate() {
    n = records.size();
    excluded = 0;
    ic.reset();
    ad.reset();
    add.reset();
    mean_insertion.reset();
    mean_deletion.reset();
    mean_proportion.reset();
    cosine.reset();

    double ic_sum = 0.0, ad_sum = 0.0, add_sum = 0.0;
    std::size_t confidence_count = 0;
    double ins_sum = 0.0, del_sum = 0.0, prop_sum = 0.0, cos_sum = 0.0;
    std::size_t auc_count = 0, prop_count = 0, cos_count = 0;
    for (auto& r : records) {
        r.excluded = r.original && *r.original == 0.0;
        if (r.excluded) {
            ++excluded;
        } else if (r.original && r.explanation && r.inverted) {
            const double y = *r.original, o = *r.explanation, d = *r.inverted;
            ic_sum += y < o ? 1.0 : 0.0;
            ad_sum += std::max(0.0, y - o) / y;
            add_sum += (y - d) / y;
            ++confidence_count;
        }
        if (r.insertion_auc && r.deletion_auc) {
            ins_sum += *r.insertion_auc;
            del_sum += *r.deletion_auc;
            ++auc_count;
        }
        if (r.proportion) {
            prop_sum += *r.proportion;
            ++prop_count;
        }
        if (r.cosine) {
            cos_sum += *r.cosine;
            ++cos_count;
        }
    }
    if (confidence_count) {
        const double count = static_cast<double>(confidence_count);
        ic = 100.0 * ic_sum / count;
        ad = 100.0 * ad_sum / count;
        add = 100.0 * add_sum / count;
    }
    if (auc_count) {
        mean_insertion = ins_sum / static_cast<double>(auc_count);
        mean_deletion = del_sum / static_cast<double>(auc_count);
    }
    if (prop_count) mean_proportion = prop_sum / static_cast<double>(prop_count);
    if (cos_count) cosine = cos_sum / static_cast<double>(cos_count);
}

namespace {

template <typename T>
void put_optional(nlohmann::json& j, const char* key, const std::optional<T>& value) {
    j[key] = value ? nlohmann::json(*value) : nlohmann::json(nullptr);
}

template <typename T>
std::optional<T> get_optional(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<T>();
}

}  // namespace

nlohmann::json MetricReport::to_json() const {
    nlohmann::json j;
    j["method"] = method;
    j["n"] = n;
    j["excluded"] = excluded;
    put_optional(j, "ic", ic);
    put_optional(j, "ad", ad);
    put_optional(j, "add", add);
    put_optional(j, "mean_insertion_auc", mean_insertion);
    put_optional(j, "mean_deletion_auc", mean_deletion);
    put_optional(j, "mean_proportion", mean_proportion);
    put_optional(j, "cosine", cosine);
    j["cosine_reference"] = cosine_reference;
    j["cosine_reference_approximate"] = cosine_reference_approximate;
    auto& rows = j["records"] = nlohmann::json::array();
    for (const auto& r : records) {
        nlohmann::json row;
        row["name"] = r.name;
        put_optional(row, "y", r.original);
        put_optional(row, "o", r.explanation);
        put_optional(row, "d", r.inverted);
        row["excluded"] = r.excluded;
        put_optional(row, "insertion_auc", r.insertion_auc);
        put_optional(row, "deletion_auc", r.deletion_auc);
        put_optional(row, "proportion", r.proportion);
        put_optional(row, "cosine", r.cosine);
        rows.push_back(std::move(row));
    }
    return j;
}

MetricReport MetricReport::from_json(const nlohmann::json& j) {
    MetricReport report;
    report.method = j.at("method").get<std::string>();
    report.cosine_reference = j.value("cosine_reference", std::string{});
    report.cosine_reference_approximate = j.value("cosine_reference_approximate", false);
    for (const auto& row : j.at("records")) {
        SampleRecord r;
        r.name = row.value("name", std::string{});
        r.original = get_optional<double>(row, "y");
        r.explanation = get_optional<double>(row, "o");
        r.inverted = get_optional<double>(row, "d");
        r.insertion_auc = get_optional<double>(row, "insertion_auc");
        r.deletion_auc = get_optional<double>(row, "deletion_auc");
        r.proportion = get_optional<double>(row, "proportion");
        r.cosine = get_optional<double>(row, "cosine");
        report.records.push_back(std::move(r));
    }
    report.aggregate();
    return report;
}

std::string format_report_table(const std::vector<MetricReport>& reports) {
    std::ostringstream out;
    auto cell = [&](const std::optional<double>& v, int precision) {
        out << std::setw(12);
        if (v) {
            out << std::fixed << std::setprecision(precision) << *v;
        } else {
            out << "-";
        }
    };
    out << std::left << std::setw(16) << "method" << std::right << std::setw(6) << "N" << std::setw(12) << "IC(%)"
        << std::setw(12) << "AD(%)" << std::setw(12) << "ADD(%)" << std::setw(12) << "ins-AUC" << std::setw(12)
        << "del-AUC" << std::setw(12) << "proportion" << std::setw(12) << "cosine" << '\n';
    for (const auto& r : reports) {
        out << std::left << std::setw(16) << r.method << std::right << std::setw(6) << r.n;
        cell(r.ic, 2);
        cell(r.ad, 2);
        cell(r.add, 2);
        cell(r.mean_insertion, 4);
        cell(r.mean_deletion, 4);
        cell(r.mean_proportion, 4);
        cell(r.cosine, 4);
        if (r.cosine && r.cosine_reference_approximate) out << "  (vs " << r.cosine_reference << ")";
        out << '\n';
    }
    return out.str();
}

Tensor top_fraction_mask(const Tensor& normalized, std::size_t step, std::size_t steps) {
    if (steps == 0 || step > steps) throw std::invalid_argument("top_fraction_mask: step out of range");
    const std::size_t pixels = normalized.size();
    // round(step·P/steps), halves rounding up.
    const std::size_t keep = (2 * step * pixels + steps) / (2 * steps);
    std::vector<std::size_t> order(pixels);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return normalized[a] > normalized[b]; });
    Tensor mask(normalized.shape(), 0.0f);
    for (std::size_t i = 0; i < keep; ++i) mask[order[i]] = 1.0f;
    return mask;
}

double trapezoid_auc(std::span<const double> curve) {
    if (curve.size() < 2) throw std::invalid_argument("trapezoid_auc: need at least two points");
    const double h = 1.0 / static_cast<double>(curve.size() - 1);
    double area = 0.0;
    for (std::size_t i = 1; i < curve.size(); ++i) area += 0.5 * h * (curve[i - 1] + curve[i]);
    return area;
}

AucResult insertion_deletion_auc(const ModelGraph& model, const EvalSample& sample, const ExplanationMap& map) {
    check_map_matches(sample.image, map);
    AucResult result;
    for (std::size_t step = 0; step <= kAucSteps; ++step) {
        const Tensor mask = top_fraction_mask(map.normalized, step);
        Tensor inverse = mask;
        for (float& v : inverse.data()) v = 1.0f - v;
        result.insertion_curve.push_back(
            target_probability(model, hadamard_broadcast(mask, sample.image), sample.target_class));
        result.deletion_curve.push_back(
            target_probability(model, hadamard_broadcast(inverse, sample.image), sample.target_class));
    }
    result.insertion = trapezoid_auc(result.insertion_curve);
    result.deletion = trapezoid_auc(result.deletion_curve);
    return result;
}

double pointing_game(const ExplanationMap& map, const BoundingBox& bbox) {
    const Tensor& s = map.normalized;
    if (s.rank() != 2) throw ShapeError("pointing_game: expected an H×W map, got " + shape_to_string(s.shape()));
    bbox.validate(s.dim(0), s.dim(1));
    double inside = 0.0, total = 0.0;
    for (std::size_t y = 0; y < s.dim(0); ++y) {
        for (std::size_t x = 0; x < s.dim(1); ++x) {
            const double v = s[y * s.dim(1) + x];
            total += v;
            if (bbox.contains(y, x)) inside += v;
        }
    }
    if (total <= 0.0) throw std::domain_error("pointing_game: explanation map has zero energy");
    return std::clamp(inside / total, 0.0, 1.0);
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("cosine_similarity: lengths " + std::to_string(a.size()) + " and " +
                                    std::to_string(b.size()) + " differ");
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) throw std::domain_error("cosine_similarity: zero-norm coefficient vector");
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

}  // namespace liftcam
