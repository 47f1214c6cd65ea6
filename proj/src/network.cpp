#include "liftcam/network.hpp"

#include <cmath>
#include <utility>

#include "liftcam/ops.hpp"

namespace liftcam {

namespace {

struct KindName {
    LayerKind kind;
    std::string_view name;
};

constexpr KindName kKindNames[] = {
    {LayerKind::Conv2d, "conv2d"},   {LayerKind::Relu, "relu"},
    {LayerKind::MaxPool, "maxpool"}, {LayerKind::AvgPool, "avgpool"},
    {LayerKind::GlobalAvgPool, "global-avgpool"}, {LayerKind::Flatten, "flatten"},
    {LayerKind::Dense, "dense"},
};

std::string describe(const Layer& layer, std::size_t index, const char* part) {
    return std::string(part) + " layer " + std::to_string(index) + " ('" + layer.name + "', " +
           std::string(to_string(layer.kind)) + ")";
}

}  // namespace

std::string_view to_string(LayerKind kind) {
    for (const auto& entry : kKindNames) {
        if (entry.kind == kind) return entry.name;
    }
    return "unknown";
}

LayerKind parse_layer_kind(std::string_view name) {
    for (const auto& entry : kKindNames) {
        if (entry.name == name) return entry.kind;
    }
    throw ShapeError("unknown layer kind '" + std::string(name) + "'");
}

bool is_linear(LayerKind kind) { return kind != LayerKind::Relu && kind != LayerKind::MaxPool; }

Layer Layer::conv2d(std::string name, Tensor weights, Tensor bias, std::size_t stride, std::size_t padding) {
    Layer l;
    l.kind = LayerKind::Conv2d;
    l.name = std::move(name);
    l.weights = std::move(weights);
    l.bias = std::move(bias);
    l.stride = stride;
    l.padding = padding;
    return l;
}

Layer Layer::dense(std::string name, Tensor weights, Tensor bias) {
    Layer l;
    l.kind = LayerKind::Dense;
    l.name = std::move(name);
    l.weights = std::move(weights);
    l.bias = std::move(bias);
    return l;
}

Layer Layer::relu(std::string name) {
    Layer l;
    l.kind = LayerKind::Relu;
    l.name = std::move(name);
    return l;
}

Layer Layer::max_pool(std::size_t window, std::size_t stride, std::string name) {
    Layer l;
    l.kind = LayerKind::MaxPool;
    l.name = std::move(name);
    l.window = window;
    l.stride = stride;
    return l;
}

Layer Layer::avg_pool(std::size_t window, std::size_t stride, std::string name) {
    Layer l = max_pool(window, stride, std::move(name));
    l.kind = LayerKind::AvgPool;
    return l;
}

Layer Layer::global_avg_pool(std::string name) {
    Layer l;
    l.kind = LayerKind::GlobalAvgPool;
    l.name = std::move(name);
    return l;
}

Layer Layer::flatten(std::string name) {
    Layer l;
    l.kind = LayerKind::Flatten;
    l.name = std::move(name);
    return l;
}

Shape layer_output_shape(const Layer& layer, const Shape& in) {
    switch (layer.kind) {
        case LayerKind::Conv2d: {
            const auto& k = layer.weights.shape();
            if (in.size() != 3 || k.size() != 4 || k[1] != in[0]) {
                throw ShapeError("input " + shape_to_string(in) + " incompatible with kernels " + shape_to_string(k));
            }
            if (layer.bias.shape() != Shape{k[0]}) {
                throw ShapeError("bias " + shape_to_string(layer.bias.shape()) + " does not match kernels " +
                                 shape_to_string(k));
            }
            return {k[0], window_output_size(in[1], k[2], layer.stride, layer.padding, "conv2d"),
                    window_output_size(in[2], k[3], layer.stride, layer.padding, "conv2d")};
        }
        case LayerKind::Relu:
            return in;
        case LayerKind::MaxPool:
        case LayerKind::AvgPool:
            if (in.size() != 3) throw ShapeError("pooling needs C×H×W input, got " + shape_to_string(in));
            return {in[0], window_output_size(in[1], layer.window, layer.stride, 0, "pool"),
                    window_output_size(in[2], layer.window, layer.stride, 0, "pool")};
        case LayerKind::GlobalAvgPool:
            if (in.size() != 3) throw ShapeError("global-avgpool needs C×H×W input, got " + shape_to_string(in));
            return {in[0]};
        case LayerKind::Flatten:
            return {shape_numel(in)};
        case LayerKind::Dense: {
            const auto& w = layer.weights.shape();
            if (in.size() != 1 || w.size() != 2 || w[1] != in[0]) {
                throw ShapeError("input " + shape_to_string(in) + " incompatible with weights " + shape_to_string(w));
            }
            if (layer.bias.shape() != Shape{w[0]}) {
                throw ShapeError("bias " + shape_to_string(layer.bias.shape()) + " does not match weights " +
                                 shape_to_string(w));
            }
            return {w[0]};
        }
    }
    throw ShapeError("unknown layer kind");
}

Tensor forward_layer(const Layer& layer, const Tensor& input) {
    switch (layer.kind) {
        case LayerKind::Conv2d:
            return conv2d(input, layer.weights, layer.bias, layer.stride, layer.padding);
        case LayerKind::Relu:
            return relu(input);
        case LayerKind::MaxPool:
            return pool(input, PoolMode::Max, layer.window, layer.stride);
        case LayerKind::AvgPool:
            return pool(input, PoolMode::Avg, layer.window, layer.stride);
        case LayerKind::GlobalAvgPool:
            return pool(input, PoolMode::GlobalAvg);
        case LayerKind::Flatten:
            return input.reshaped({input.size()});
        case LayerKind::Dense:
            return dense(input, layer.weights, layer.bias);
    }
    throw ShapeError("unknown layer kind");
}

ModelGraph::ModelGraph(Shape input_shape, std::vector<Layer> frontend, std::vector<Layer> head,
                       std::size_t num_classes, std::vector<std::string> class_names)
    : input_shape_(std::move(input_shape)),
      frontend_(std::move(frontend)),
      head_(std::move(head)),
      num_classes_(num_classes),
      class_names_(std::move(class_names)) {
    if (input_shape_.size() != 3 || shape_numel(input_shape_) == 0) {
        throw ShapeError("model input shape must be C×H×W, got " + shape_to_string(input_shape_));
    }
    Shape current = input_shape_;
    for (std::size_t i = 0; i < frontend_.size(); ++i) {
        try {
            current = layer_output_shape(frontend_[i], current);
        } catch (const ShapeError& e) {
            throw ShapeError(describe(frontend_[i], i, "frontend") + ": " + e.what());
        }
    }
    if (current.size() != 3) {
        throw ShapeError("frontend must end in a C×H×W activation stack, got " + shape_to_string(current));
    }
    activation_shape_ = current;
    if (head_.empty() || head_.back().kind != LayerKind::Dense) {
        throw ShapeError("head must end with a dense logit layer");
    }
    for (std::size_t i = 0; i < head_.size(); ++i) {
        try {
            current = layer_output_shape(head_[i], current);
        } catch (const ShapeError& e) {
            throw ShapeError(describe(head_[i], i, "head") + ": " + e.what());
        }
    }
    if (current != Shape{num_classes_}) {
        throw ShapeError("head produces " + shape_to_string(current) + " but the model declares " +
                         std::to_string(num_classes_) + " classes");
    }
    if (!class_names_.empty() && class_names_.size() != num_classes_) {
        throw ShapeError("class-name table has " + std::to_string(class_names_.size()) + " entries for " +
                         std::to_string(num_classes_) + " classes");
    }
}

bool ModelGraph::head_is_linear() const {
    for (const auto& layer : head_) {
        if (!is_linear(layer.kind)) return false;
    }
    return true;
}

Tensor forward_frontend(const ModelGraph& model, const Tensor& image) {
    if (image.shape() != model.input_shape()) {
        throw ShapeError("image shape " + shape_to_string(image.shape()) + " does not match model input " +
                         shape_to_string(model.input_shape()));
    }
    Tensor x = image;
    for (const auto& layer : model.frontend()) x = forward_layer(layer, x);
    return x;
}

namespace {

void check_activations(const ModelGraph& model, const Tensor& activations) {
    if (activations.shape() != model.activation_shape()) {
        throw ShapeError("activation stack " + shape_to_string(activations.shape()) + " does not match model " +
                         shape_to_string(model.activation_shape()));
    }
}

// Runs the head, recording each layer's input. The logit layer is kept in double.
std::vector<double> run_head(const ModelGraph& model, const Tensor& activations, std::vector<Tensor>* inputs) {
    check_activations(model, activations);
    const auto& head = model.head();
    Tensor x = activations;
    for (std::size_t i = 0; i + 1 < head.size(); ++i) {
        Tensor next = forward_layer(head[i], x);
        if (inputs) inputs->push_back(std::move(x));
        x = std::move(next);
    }
    auto logits = dense_f64(x, head.back().weights, head.back().bias);
    if (inputs) inputs->push_back(std::move(x));
    return logits;
}

}  // namespace

std::vector<double> forward_head_logits(const ModelGraph& model, const Tensor& activations) {
    return run_head(model, activations, nullptr);
}

double forward_head(const ModelGraph& model, const Tensor& activations, std::size_t cls) {
    if (cls >= model.num_classes()) {
        throw ShapeError("class " + std::to_string(cls) + " out of range [0, " + std::to_string(model.num_classes()) +
                         ")");
    }
    return forward_head_logits(model, activations)[cls];
}

ForwardResult forward_full(const ModelGraph& model, const Tensor& image) {
    ForwardResult result;
    result.activations = forward_frontend(model, image);
    result.logits = forward_head_logits(model, result.activations);
    result.probs = softmax(result.logits);
    return result;
}

Tensor mask_apply(const Tensor& activations, std::span<const std::uint8_t> mask) {
    if (activations.rank() != 3 || mask.size() != activations.dim(0)) {
        throw ShapeError("mask of length " + std::to_string(mask.size()) + " does not match activation stack " +
                         shape_to_string(activations.shape()));
    }
    Tensor out = activations;
    const std::size_t plane = activations.dim(1) * activations.dim(2);
    for (std::size_t k = 0; k < mask.size(); ++k) {
        if (mask[k]) continue;
        for (std::size_t i = 0; i < plane; ++i) out[k * plane + i] = 0.0f;
    }
    return out;
}

Tensor mask_apply_bits(const Tensor& activations, std::uint64_t bits) {
    if (activations.rank() != 3 || activations.dim(0) > 64) {
        throw ShapeError("bit masks need a C×H×W stack with at most 64 channels, got " +
                         shape_to_string(activations.shape()));
    }
    std::vector<std::uint8_t> mask(activations.dim(0));
    for (std::size_t k = 0; k < mask.size(); ++k) mask[k] = static_cast<std::uint8_t>((bits >> k) & 1u);
    return mask_apply(activations, mask);
}

HeadTrace HeadTrace::build(const ModelGraph& model, const Tensor& activations, bool with_reference) {
    HeadTrace trace;
    trace.logits_ = run_head(model, activations, &trace.original_);
    if (with_reference) {
        trace.reference_logits_ = run_head(model, Tensor(activations.shape()), &trace.reference_);
    }
    return trace;
}

namespace {

enum class BackwardRule { Gradient, Rescale };

// Propagates multipliers from a layer's output back to its input.
std::vector<double> backward_layer(const Layer& layer, const Tensor& x, const Tensor* ref,
                                   const std::vector<double>& upstream, BackwardRule rule) {
    std::vector<double> down(x.size(), 0.0);
    switch (layer.kind) {
        case LayerKind::Dense: {
            const std::size_t m = layer.weights.dim(0), n = layer.weights.dim(1);
            for (std::size_t i = 0; i < m; ++i) {
                if (upstream[i] == 0.0) continue;
                for (std::size_t j = 0; j < n; ++j) down[j] += upstream[i] * layer.weights[i * n + j];
            }
            break;
        }
        case LayerKind::Flatten:
            down = upstream;
            break;
        case LayerKind::Conv2d: {
            const auto& k = layer.weights.shape();
            const std::size_t c_out = k[0], c_in = k[1], kh = k[2], kw = k[3];
            const std::size_t h = x.dim(1), w = x.dim(2);
            const std::size_t oh = (h + 2 * layer.padding - kh) / layer.stride + 1;
            const std::size_t ow = (w + 2 * layer.padding - kw) / layer.stride + 1;
            const auto pad = static_cast<std::ptrdiff_t>(layer.padding);
            for (std::size_t o = 0; o < c_out; ++o) {
                for (std::size_t y = 0; y < oh; ++y) {
                    for (std::size_t xo = 0; xo < ow; ++xo) {
                        const double g = upstream[(o * oh + y) * ow + xo];
                        if (g == 0.0) continue;
                        for (std::size_t c = 0; c < c_in; ++c) {
                            for (std::size_t ky = 0; ky < kh; ++ky) {
                                const auto iy = static_cast<std::ptrdiff_t>(y * layer.stride + ky) - pad;
                                if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                                for (std::size_t kx = 0; kx < kw; ++kx) {
                                    const auto ix = static_cast<std::ptrdiff_t>(xo * layer.stride + kx) - pad;
                                    if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                                    down[(c * h + static_cast<std::size_t>(iy)) * w + static_cast<std::size_t>(ix)] +=
                                        g * layer.weights[((o * c_in + c) * kh + ky) * kw + kx];
                                }
                            }
                        }
                    }
                }
            }
            break;
        }
        case LayerKind::GlobalAvgPool: {
            const std::size_t plane = x.dim(1) * x.dim(2);
            for (std::size_t c = 0; c < x.dim(0); ++c)
                for (std::size_t i = 0; i < plane; ++i) down[c * plane + i] = upstream[c] / static_cast<double>(plane);
            break;
        }
        case LayerKind::AvgPool:
        case LayerKind::MaxPool: {
            const std::size_t c_n = x.dim(0), h = x.dim(1), w = x.dim(2);
            const std::size_t win = layer.window, s = layer.stride;
            const std::size_t oh = (h - win) / s + 1, ow = (w - win) / s + 1;
            const double area = static_cast<double>(win * win);
            for (std::size_t c = 0; c < c_n; ++c) {
                for (std::size_t y = 0; y < oh; ++y) {
                    for (std::size_t xo = 0; xo < ow; ++xo) {
                        const double g = upstream[(c * oh + y) * ow + xo];
                        if (layer.kind == LayerKind::AvgPool) {
                            for (std::size_t dy = 0; dy < win; ++dy)
                                for (std::size_t dx = 0; dx < win; ++dx)
                                    down[(c * h + y * s + dy) * w + xo * s + dx] += g / area;
                            continue;
                        }
                        // Row-major scan with strict '>' keeps the lowest flat index on ties.
                        std::size_t best = (c * h + y * s) * w + xo * s;
                        float ref_max = ref ? (*ref)[best] : 0.0f;
                        for (std::size_t dy = 0; dy < win; ++dy) {
                            for (std::size_t dx = 0; dx < win; ++dx) {
                                const std::size_t idx = (c * h + y * s + dy) * w + xo * s + dx;
                                if (x[idx] > x[best]) best = idx;
                                if (ref && (*ref)[idx] > ref_max) ref_max = (*ref)[idx];
                            }
                        }
                        double m = 1.0;
                        if (rule == BackwardRule::Rescale) {
                            const double d_in = static_cast<double>(x[best]) - (*ref)[best];
                            const double d_out = static_cast<double>(x[best]) - ref_max;
                            if (std::abs(d_in) > kRescaleEpsilon) m = d_out / d_in;
                        }
                        down[best] += g * m;
                    }
                }
            }
            break;
        }
        case LayerKind::Relu: {
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double xi = x[i];
                double m = xi > 0.0 ? 1.0 : 0.0;
                if (rule == BackwardRule::Rescale) {
                    const double ri = (*ref)[i];
                    const double d_in = xi - ri;
                    if (std::abs(d_in) > kRescaleEpsilon) {
                        m = (std::max(xi, 0.0) - std::max(ri, 0.0)) / d_in;
                    }
                }
                down[i] = upstream[i] * m;
            }
            break;
        }
    }
    return down;
}

std::vector<double> backward_head(const ModelGraph& model, const HeadTrace& trace, std::size_t cls,
                                  BackwardRule rule) {
    const auto& head = model.head();
    if (trace.original().size() != head.size() || trace.activations().shape() != model.activation_shape()) {
        throw ShapeError("head trace does not belong to this model (depth " + std::to_string(trace.original().size()) +
                         " vs " + std::to_string(head.size()) + ")");
    }
    if (rule == BackwardRule::Rescale && trace.reference().size() != head.size()) {
        throw ShapeError("DeepLIFT needs a head trace with zero-reference activations");
    }
    if (cls >= model.num_classes()) {
        throw ShapeError("class " + std::to_string(cls) + " out of range [0, " + std::to_string(model.num_classes()) +
                         ")");
    }
    std::vector<double> upstream(model.num_classes(), 0.0);
    upstream[cls] = 1.0;
    for (std::size_t i = head.size(); i-- > 0;) {
        const Tensor* ref = rule == BackwardRule::Rescale ? &trace.reference()[i] : nullptr;
        upstream = backward_layer(head[i], trace.original()[i], ref, upstream, rule);
    }
    return upstream;
}

Tensor to_tensor(const Shape& shape, const std::vector<double>& values) {
    return Tensor(shape, std::vector<float>(values.begin(), values.end()));
}

}  // namespace

std::vector<double> head_gradient(const ModelGraph& model, const HeadTrace& trace, std::size_t cls) {
    return backward_head(model, trace, cls, BackwardRule::Gradient);
}

Tensor backward_head_gradient(const ModelGraph& model, const HeadTrace& trace, std::size_t cls) {
    return to_tensor(model.activation_shape(), head_gradient(model, trace, cls));
}

std::vector<double> head_contributions(const ModelGraph& model, const HeadTrace& trace, std::size_t cls) {
    auto multipliers = backward_head(model, trace, cls, BackwardRule::Rescale);
    const Tensor& a = trace.activations();
    for (std::size_t i = 0; i < multipliers.size(); ++i) multipliers[i] *= a[i];  // reference is 0
    return multipliers;
}

Tensor deeplift_head(const ModelGraph& model, const HeadTrace& trace, std::size_t cls) {
    return to_tensor(model.activation_shape(), head_contributions(model, trace, cls));
}

}  // namespace liftcam
