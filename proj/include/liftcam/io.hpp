#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "liftcam/evaluation.hpp"
#include "liftcam/network.hpp"
#include "liftcam/tensor.hpp"

namespace liftcam::io {

inline constexpr int kFormatVersion = 1;
inline constexpr const char* kMagic = "LIFTCAM";

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Header + blob container. Layout on disk:
///
///   LIFTCAM <version>\n
///   <header byte count>\n
///   <JSON header>\n
///   <payload: little-endian f32, row-major, tensors back to back>
///
/// The header carries "kind", arbitrary metadata and a "tensors" table of
/// {name, shape, dtype: "f32le", offset, nbytes}, offsets relative to the payload.
struct Container {
    nlohmann::json meta = nlohmann::json::object();
    std::vector<std::pair<std::string, Tensor>> tensors;

    const Tensor& tensor(const std::string& name) const;
    const Tensor* find(const std::string& name) const;
    void add(std::string name, Tensor t) { tensors.emplace_back(std::move(name), std::move(t)); }
};

std::string encode_container(const Container& container);
Container decode_container(const std::string& bytes, const std::string& source = "<memory>");

void write_container(const std::filesystem::path& path, const Container& container);
Container read_container(const std::filesystem::path& path);

void save_tensor(const std::filesystem::path& path, const Tensor& tensor, const std::string& name = "tensor");
Tensor load_tensor(const std::filesystem::path& path);

Container model_to_container(const ModelGraph& model);
ModelGraph model_from_container(const Container& container);
void save_model(const ModelGraph& model, const std::filesystem::path& path);
ModelGraph load_model(const std::filesystem::path& path);

/// Input image with its target and optional exporter-recorded references.
struct SampleFile {
    std::string name;
    Tensor image;
    std::size_t target_class = 0;
    std::optional<BoundingBox> bbox;
    std::optional<std::vector<double>> reference_logits;
    std::optional<Tensor> reference_activations;
    std::optional<Tensor> reference_gradient;  // ∂F^c/∂A of the target class

    EvalSample to_eval_sample() const { return {name, image, target_class, bbox}; }
};

void save_sample(const SampleFile& sample, const std::filesystem::path& path);
SampleFile load_sample(const std::filesystem::path& path);

}  // namespace liftcam::io
