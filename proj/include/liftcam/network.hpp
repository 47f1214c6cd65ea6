#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "liftcam/tensor.hpp"

namespace liftcam {

enum class LayerKind { Conv2d, Relu, MaxPool, AvgPool, GlobalAvgPool, Flatten, Dense };

std::string_view to_string(LayerKind kind);
/// Throws ShapeError on an unknown kind name.
LayerKind parse_layer_kind(std::string_view name);

/// Whether a layer is affine in its input (no rectification, no max routing).
bool is_linear(LayerKind kind);

struct Layer {
    LayerKind kind = LayerKind::Relu;
    std::string name;
    Tensor weights;  // conv2d: C_out×C_in×kH×kW, dense: m×n
    Tensor bias;     // conv2d: C_out, dense: m
    std::size_t stride = 1;
    std::size_t padding = 0;
    std::size_t window = 0;  // max/avg pool

    static Layer conv2d(std::string name, Tensor weights, Tensor bias, std::size_t stride = 1,
                        std::size_t padding = 0);
    static Layer dense(std::string name, Tensor weights, Tensor bias);
    static Layer relu(std::string name = "relu");
    static Layer max_pool(std::size_t window, std::size_t stride, std::string name = "maxpool");
    static Layer avg_pool(std::size_t window, std::size_t stride, std::string name = "avgpool");
    static Layer global_avg_pool(std::string name = "gap");
    static Layer flatten(std::string name = "flatten");
};

/// Output shape of `layer` for an input of shape `in`; throws ShapeError.
Shape layer_output_shape(const Layer& layer, const Shape& in);

Tensor forward_layer(const Layer& layer, const Tensor& input);

/// A CNN split at layer l: frontend maps the image to the activation stack A,
/// head F maps A to logits. Immutable after construction.
class ModelGraph {
public:
    ModelGraph(Shape input_shape, std::vector<Layer> frontend, std::vector<Layer> head, std::size_t num_classes,
               std::vector<std::string> class_names = {});

    const Shape& input_shape() const noexcept { return input_shape_; }
    /// (N_l, H, W)
    const Shape& activation_shape() const noexcept { return activation_shape_; }
    std::size_t num_channels() const noexcept { return activation_shape_[0]; }
    std::size_t num_classes() const noexcept { return num_classes_; }
    const std::vector<Layer>& frontend() const noexcept { return frontend_; }
    const std::vector<Layer>& head() const noexcept { return head_; }
    const std::vector<std::string>& class_names() const noexcept { return class_names_; }

    /// True when every head layer is affine.
    bool head_is_linear() const;

private:
    Shape input_shape_;
    std::vector<Layer> frontend_;
    std::vector<Layer> head_;
    std::size_t num_classes_;
    std::vector<std::string> class_names_;
    Shape activation_shape_;
};

struct ForwardResult {
    Tensor activations;
    std::vector<double> logits;
    std::vector<double> probs;
};

Tensor forward_frontend(const ModelGraph& model, const Tensor& image);
ForwardResult forward_full(const ModelGraph& model, const Tensor& image);
std::vector<double> forward_head_logits(const ModelGraph& model, const Tensor& activations);
/// F^c(a): the pre-softmax logit of class `cls`.
double forward_head(const ModelGraph& model, const Tensor& activations, std::size_t cls);

/// Zeroes every channel k whose mask entry is 0.
Tensor mask_apply(const Tensor& activations, std::span<const std::uint8_t> mask);
/// Same, with channel k present iff bit k of `bits` is set (N_l ≤ 64).
Tensor mask_apply_bits(const Tensor& activations, std::uint64_t bits);

/// Per-layer inputs of the head for one activation stack, plus the same for
/// the all-zero reference stack.
class HeadTrace {
public:
    static HeadTrace build(const ModelGraph& model, const Tensor& activations, bool with_reference = true);

    const std::vector<Tensor>& original() const noexcept { return original_; }
    const std::vector<Tensor>& reference() const noexcept { return reference_; }
    bool has_reference() const noexcept { return !reference_.empty(); }
    const std::vector<double>& logits() const noexcept { return logits_; }
    const std::vector<double>& reference_logits() const noexcept { return reference_logits_; }
    const Tensor& activations() const { return original_.front(); }

private:
    std::vector<Tensor> original_;
    std::vector<Tensor> reference_;
    std::vector<double> logits_;
    std::vector<double> reference_logits_;
};

/// ∂F^c/∂A for every activation neuron, accumulated in double.
std::vector<double> head_gradient(const ModelGraph& model, const HeadTrace& trace, std::size_t cls);
Tensor backward_head_gradient(const ModelGraph& model, const HeadTrace& trace, std::size_t cls);

/// DeepLIFT-Rescale contribution scores C_{ΔA ΔF^c} against the zero reference.
std::vector<double> head_contributions(const ModelGraph& model, const HeadTrace& trace, std::size_t cls);
Tensor deeplift_head(const ModelGraph& model, const HeadTrace& trace, std::size_t cls);

/// Below this |Δinput| the Rescale multiplier falls back to the local gradient.
inline constexpr double kRescaleEpsilon = 1e-7;

}  // namespace liftcam
