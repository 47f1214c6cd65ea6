#include "liftcam/synthetic.hpp"

#include <cmath>
#include <random>
#include <string>

namespace liftcam {

namespace {

// Uniform in [0, 1) from the top 53 bits, stable across standard libraries.
double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

Tensor uniform_tensor(Shape shape, std::mt19937_64& rng, double scale) {
    Tensor t(std::move(shape));
    for (float& v : t.data()) v = static_cast<float>((2.0 * unit(rng) - 1.0) * scale);
    return t;
}

// Uniform(−√(3/fan_in), √(3/fan_in)): unit-variance preactivations for unit-variance inputs.
Tensor fan_in_weights(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
    return uniform_tensor(std::move(shape), rng, std::sqrt(3.0 / static_cast<double>(fan_in)));
}

constexpr std::pair<HeadKind, std::string_view> kHeadNames[] = {
    {HeadKind::Linear, "linear"}, {HeadKind::ReluMlp, "relu-mlp"}, {HeadKind::ConvRelu, "conv-relu"}};

}  // namespace

std::string_view to_string(HeadKind kind) {
    for (const auto& [k, name] : kHeadNames) {
        if (k == kind) return name;
    }
    return "unknown";
}

HeadKind parse_head_kind(std::string_view name) {
    for (const auto& [k, n] : kHeadNames) {
        if (n == name) return k;
    }
    throw std::invalid_argument("unknown head kind '" + std::string(name) + "' (expected linear, relu-mlp, conv-relu)");
}

ModelGraph generate_synthetic_model(const SyntheticSpec& spec) {
    if (spec.channels == 0 || spec.channels > kSyntheticMaxChannels) {
        throw std::invalid_argument("synthetic models support 1.." + std::to_string(kSyntheticMaxChannels) +
                                    " channels, got " + std::to_string(spec.channels));
    }
    if (spec.height == 0 || spec.width == 0 || spec.num_classes == 0 || spec.image_channels == 0 || spec.hidden == 0) {
        throw std::invalid_argument("synthetic model dimensions must be positive");
    }
    std::mt19937_64 rng(spec.seed);
    const std::size_t n = spec.channels, h = spec.height, w = spec.width, c = spec.image_channels;

    std::vector<Layer> frontend;
    frontend.push_back(Layer::conv2d("conv1", fan_in_weights({n, c, 3, 3}, c * 9, rng),
                                     uniform_tensor({n}, rng, 0.1), 1, 1));
    frontend.push_back(Layer::relu("relu1"));
    frontend.push_back(Layer::max_pool(2, 2, "pool1"));

    std::vector<Layer> head;
    std::size_t features = n * h * w;
    switch (spec.head) {
        case HeadKind::Linear:
            head.push_back(Layer::flatten());
            break;
        case HeadKind::ReluMlp:
            head.push_back(Layer::flatten());
            head.push_back(Layer::dense("fc1", fan_in_weights({spec.hidden, features}, features, rng),
                                        uniform_tensor({spec.hidden}, rng, 0.1)));
            head.push_back(Layer::relu("relu2"));
            features = spec.hidden;
            break;
        case HeadKind::ConvRelu: {
            const std::size_t mid = std::max<std::size_t>(n / 2, 1);
            head.push_back(Layer::conv2d("conv2", fan_in_weights({mid, n, 3, 3}, n * 9, rng),
                                         uniform_tensor({mid}, rng, 0.1), 1, 1));
            head.push_back(Layer::relu("relu2"));
            std::size_t oh = h, ow = w;
            if (h % 2 == 0 && w % 2 == 0) {
                head.push_back(Layer::max_pool(2, 2, "pool2"));
                oh /= 2;
                ow /= 2;
            }
            head.push_back(Layer::flatten());
            features = mid * oh * ow;
            break;
        }
    }
    head.push_back(Layer::dense("logits", fan_in_weights({spec.num_classes, features}, features, rng),
                                uniform_tensor({spec.num_classes}, rng, 0.1)));
    return ModelGraph({c, 2 * h, 2 * w}, std::move(frontend), std::move(head), spec.num_classes);
}

Tensor generate_synthetic_image(const ModelGraph& model, std::uint64_t seed) {
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
    Tensor image(model.input_shape());
    for (float& v : image.data()) v = static_cast<float>(unit(rng));
    return image;
}

BoundingBox generate_synthetic_bbox(std::size_t height, std::size_t width, std::uint64_t seed) {
    std::mt19937_64 rng(seed ^ 0x5851f42d4c957f2dull);
    auto span = [&](std::size_t extent) {
        const auto a = static_cast<std::size_t>(unit(rng) * static_cast<double>(extent));
        const auto b = static_cast<std::size_t>(unit(rng) * static_cast<double>(extent));
        const std::size_t lo = std::min(a, b);
        const std::size_t hi = std::max(a, b) + 1;
        return std::pair{lo, std::min(hi, extent)};
    };
    const auto [top, bottom] = span(height);
    const auto [left, right] = span(width);
    return {top, left, bottom, right};
}

}  // namespace liftcam
