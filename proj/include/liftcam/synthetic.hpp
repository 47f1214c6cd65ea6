#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

#include "liftcam/evaluation.hpp"
#include "liftcam/network.hpp"

namespace liftcam {

enum class HeadKind { Linear, ReluMlp, ConvRelu };

std::string_view to_string(HeadKind kind);
HeadKind parse_head_kind(std::string_view name);

/// Largest channel count the generator accepts.
inline constexpr std::size_t kSyntheticMaxChannels = 64;

struct SyntheticSpec {
    std::size_t channels = 8;  // N_l
    std::size_t height = 4;    // H of the activation stack
    std::size_t width = 4;     // W of the activation stack
    std::size_t num_classes = 5;
    HeadKind head = HeadKind::ReluMlp;
    std::uint64_t seed = 0;
    std::size_t image_channels = 3;
    std::size_t hidden = 16;  // relu-mlp hidden width
};

/// Frontend: conv3x3(pad 1) → relu → maxpool 2, mapping a
/// image_channels×2H×2W image to an N_l×H×W stack. Head per `head`:
///   linear:    flatten → dense
///   relu-mlp:  flatten → dense(hidden) → relu → dense
///   conv-relu: conv3x3(pad 1) → relu → [maxpool 2 when H, W even] → flatten → dense
ModelGraph generate_synthetic_model(const SyntheticSpec& spec);

/// Deterministic image in [0, 1) for the model's input shape.
Tensor generate_synthetic_image(const ModelGraph& model, std::uint64_t seed);

/// A random valid box inside an H×W image.
BoundingBox generate_synthetic_bbox(std::size_t height, std::size_t width, std::uint64_t seed);

}  // namespace liftcam
