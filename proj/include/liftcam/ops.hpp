#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "liftcam/tensor.hpp"

namespace liftcam {

/// Cross-correlation of a C_in×H×W input with C_out×C_in×kH×kW kernels.
/// Output size must divide exactly: (H + 2·padding − kH) % stride == 0.
Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias, std::size_t stride,
              std::size_t padding);

/// output_i = Σ_j weights[i][j]·input[j] + bias[i]. Input is rank-1 of length n.
Tensor dense(const Tensor& input, const Tensor& weights, const Tensor& bias);

/// Same as dense() but keeps the double accumulator (used for logits).
std::vector<double> dense_f64(const Tensor& input, const Tensor& weights, const Tensor& bias);

Tensor relu(const Tensor& input);

enum class PoolMode { Max, Avg, GlobalAvg };

/// Windowed max/mean pooling over C×H×W. GlobalAvg ignores window/stride and
/// returns a rank-1 tensor of C channel means.
Tensor pool(const Tensor& input, PoolMode mode, std::size_t window = 0, std::size_t stride = 0);

/// Numerically stable softmax (max subtracted before exponentiation).
std::vector<double> softmax(std::span<const double> logits);

/// Bilinear resampling of an H×W map with align-corners sampling.
Tensor upsample_bilinear(const Tensor& map, std::size_t out_h, std::size_t out_w);

/// (v − min)/(max − min); a constant tensor maps to all zeros.
Tensor minmax_normalize(const Tensor& input);

/// Elementwise product of equally-shaped tensors.
Tensor hadamard(const Tensor& a, const Tensor& b);

/// Multiplies every channel of a C×H×W image by the same H×W mask.
Tensor hadamard_broadcast(const Tensor& mask, const Tensor& image);

/// Output length of a sliding window, or throws when it is not exact.
std::size_t window_output_size(std::size_t in, std::size_t window, std::size_t stride, std::size_t padding,
                               const char* what);

}  // namespace liftcam
