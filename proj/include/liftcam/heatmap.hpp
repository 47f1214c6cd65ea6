#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "liftcam/attribution.hpp"

namespace liftcam {

enum class HeatmapStyle { Gray, Overlay };

/// 255·v rounded to nearest, ties to even.
std::uint8_t quantize_unit(double v);

/// Jet-like colormap for v ∈ [0, 1].
std::array<std::uint8_t, 3> colormap(double v);

/// Binary PPM (P6) bytes. Overlay blends the colormap over `image`
/// (min-max scaled to [0, 255]; 1 channel is gray, ≥3 use the first three) at 0.5 opacity.
std::string encode_heatmap(const ExplanationMap& map, HeatmapStyle style, const Tensor* image = nullptr);

void emit_heatmap(const ExplanationMap& map, const std::filesystem::path& path, HeatmapStyle style,
                  const Tensor* image = nullptr);

}  // namespace liftcam
