#include "liftcam/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace liftcam {

std::size_t window_output_size(std::size_t in, std::size_t window, std::size_t stride, std::size_t padding,
                               const char* what) {
    if (stride == 0 || window == 0) {
        throw ShapeError(std::string(what) + ": window and stride must be positive");
    }
    const std::size_t padded = in + 2 * padding;
    if (window > padded) {
        throw ShapeError(std::string(what) + ": window " + std::to_string(window) + " exceeds padded extent " +
                         std::to_string(padded));
    }
    if ((padded - window) % stride != 0) {
        throw ShapeError(std::string(what) + ": extent " + std::to_string(padded) + " with window " +
                         std::to_string(window) + " and stride " + std::to_string(stride) +
                         " does not give an exact output size");
    }
    return (padded - window) / stride + 1;
}

Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias, std::size_t stride,
              std::size_t padding) {
    if (input.rank() != 3 || kernels.rank() != 4 || kernels.dim(1) != input.dim(0)) {
        throw ShapeError("conv2d: input " + shape_to_string(input.shape()) + " incompatible with kernels " +
                         shape_to_string(kernels.shape()));
    }
    const std::size_t c_out = kernels.dim(0), c_in = kernels.dim(1), kh = kernels.dim(2), kw = kernels.dim(3);
    if (bias.size() != c_out) {
        throw ShapeError("conv2d: bias " + shape_to_string(bias.shape()) + " does not match kernels " +
                         shape_to_string(kernels.shape()));
    }
    const std::size_t h = input.dim(1), w = input.dim(2);
    const std::size_t oh = window_output_size(h, kh, stride, padding, "conv2d");
    const std::size_t ow = window_output_size(w, kw, stride, padding, "conv2d");

    Tensor out({c_out, oh, ow});
    const auto pad = static_cast<std::ptrdiff_t>(padding);
    for (std::size_t o = 0; o < c_out; ++o) {
        for (std::size_t y = 0; y < oh; ++y) {
            for (std::size_t x = 0; x < ow; ++x) {
                double acc = bias[o];
                for (std::size_t c = 0; c < c_in; ++c) {
                    for (std::size_t ky = 0; ky < kh; ++ky) {
                        const auto iy = static_cast<std::ptrdiff_t>(y * stride + ky) - pad;
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                        for (std::size_t kx = 0; kx < kw; ++kx) {
                            const auto ix = static_cast<std::ptrdiff_t>(x * stride + kx) - pad;
                            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                            acc += static_cast<double>(kernels[((o * c_in + c) * kh + ky) * kw + kx]) *
                                   input.at(c, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
                        }
                    }
                }
                out.at(o, y, x) = static_cast<float>(acc);
            }
        }
    }
    return out;
}

std::vector<double> dense_f64(const Tensor& input, const Tensor& weights, const Tensor& bias) {
    if (input.rank() != 1 || weights.rank() != 2 || weights.dim(1) != input.size()) {
        throw ShapeError("dense: input " + shape_to_string(input.shape()) + " incompatible with weights " +
                         shape_to_string(weights.shape()));
    }
    const std::size_t m = weights.dim(0), n = weights.dim(1);
    if (bias.size() != m) {
        throw ShapeError("dense: bias " + shape_to_string(bias.shape()) + " does not match weights " +
                         shape_to_string(weights.shape()));
    }
    std::vector<double> out(m);
    for (std::size_t i = 0; i < m; ++i) {
        double acc = bias[i];
        for (std::size_t j = 0; j < n; ++j) acc += static_cast<double>(weights[i * n + j]) * input[j];
        out[i] = acc;
    }
    return out;
}

Tensor dense(const Tensor& input, const Tensor& weights, const Tensor& bias) {
    const auto acc = dense_f64(input, weights, bias);
    const Shape shape{acc.size()};
    return Tensor(shape, std::vector<float>(acc.begin(), acc.end()));
}

Tensor relu(const Tensor& input) {
    Tensor out = input;
    for (float& v : out.data()) v = std::max(v, 0.0f);
    return out;
}

Tensor pool(const Tensor& input, PoolMode mode, std::size_t window, std::size_t stride) {
    if (input.rank() != 3) {
        throw ShapeError("pool: expected C×H×W input, got " + shape_to_string(input.shape()));
    }
    const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
    if (mode == PoolMode::GlobalAvg) {
        Tensor out({c});
        for (std::size_t k = 0; k < c; ++k) {
            double acc = 0.0;
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t x = 0; x < w; ++x) acc += input.at(k, y, x);
            out[k] = static_cast<float>(acc / static_cast<double>(h * w));
        }
        return out;
    }
    const std::size_t oh = window_output_size(h, window, stride, 0, "pool");
    const std::size_t ow = window_output_size(w, window, stride, 0, "pool");
    Tensor out({c, oh, ow});
    for (std::size_t k = 0; k < c; ++k) {
        for (std::size_t y = 0; y < oh; ++y) {
            for (std::size_t x = 0; x < ow; ++x) {
                double acc = 0.0;
                float best = -std::numeric_limits<float>::infinity();
                for (std::size_t dy = 0; dy < window; ++dy) {
                    for (std::size_t dx = 0; dx < window; ++dx) {
                        const float v = input.at(k, y * stride + dy, x * stride + dx);
                        acc += v;
                        best = std::max(best, v);
                    }
                }
                out.at(k, y, x) =
                    mode == PoolMode::Max ? best : static_cast<float>(acc / static_cast<double>(window * window));
            }
        }
    }
    return out;
}

std::vector<double> softmax(std::span<const double> logits) {
    if (logits.empty()) throw ShapeError("softmax: empty input");
    const double top = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - top);
        total += out[i];
    }
    for (double& v : out) v /= total;
    return out;
}

Tensor upsample_bilinear(const Tensor& map, std::size_t out_h, std::size_t out_w) {
    if (map.rank() != 2) {
        throw ShapeError("upsample_bilinear: expected H×W map, got " + shape_to_string(map.shape()));
    }
    if (out_h == 0 || out_w == 0) throw ShapeError("upsample_bilinear: target size must be positive");
    const std::size_t h = map.dim(0), w = map.dim(1);
    auto source = [](std::size_t i, std::size_t in, std::size_t out) {
        if (out == 1 || in == 1) return 0.0;
        return static_cast<double>(i) * static_cast<double>(in - 1) / static_cast<double>(out - 1);
    };
    Tensor out({out_h, out_w});
    for (std::size_t y = 0; y < out_h; ++y) {
        const double sy = source(y, h, out_h);
        const auto y0 = std::min(static_cast<std::size_t>(sy), h - 1);
        const std::size_t y1 = std::min(y0 + 1, h - 1);
        const double fy = sy - static_cast<double>(y0);
        for (std::size_t x = 0; x < out_w; ++x) {
            const double sx = source(x, w, out_w);
            const auto x0 = std::min(static_cast<std::size_t>(sx), w - 1);
            const std::size_t x1 = std::min(x0 + 1, w - 1);
            const double fx = sx - static_cast<double>(x0);
            const double top = (1.0 - fx) * map[y0 * w + x0] + fx * map[y0 * w + x1];
            const double bottom = (1.0 - fx) * map[y1 * w + x0] + fx * map[y1 * w + x1];
            double v = (1.0 - fy) * top + fy * bottom;
            // Keep the result inside the four neighbours' range despite rounding.
            const double lo = std::min({map[y0 * w + x0], map[y0 * w + x1], map[y1 * w + x0], map[y1 * w + x1]});
            const double hi = std::max({map[y0 * w + x0], map[y0 * w + x1], map[y1 * w + x0], map[y1 * w + x1]});
            out[y * out_w + x] = static_cast<float>(std::clamp(v, lo, hi));
        }
    }
    return out;
}

Tensor minmax_normalize(const Tensor& input) {
    Tensor out = input;
    if (input.empty()) return out;
    const auto [lo_it, hi_it] = std::minmax_element(input.data().begin(), input.data().end());
    const double lo = *lo_it, hi = *hi_it;
    const double range = hi - lo;
    for (float& v : out.data()) {
        v = range > 0.0 ? static_cast<float>(std::clamp((v - lo) / range, 0.0, 1.0)) : 0.0f;
    }
    return out;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw ShapeError("hadamard: shape " + shape_to_string(a.shape()) + " does not match " +
                         shape_to_string(b.shape()));
    }
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
    return out;
}

Tensor hadamard_broadcast(const Tensor& mask, const Tensor& image) {
    if (mask.rank() != 2 || image.rank() != 3 || mask.dim(0) != image.dim(1) || mask.dim(1) != image.dim(2)) {
        throw ShapeError("hadamard_broadcast: mask " + shape_to_string(mask.shape()) + " does not match image " +
                         shape_to_string(image.shape()));
    }
    Tensor out = image;
    const std::size_t plane = mask.size();
    for (std::size_t c = 0; c < image.dim(0); ++c)
        for (std::size_t i = 0; i < plane; ++i) out[c * plane + i] *= mask[i];
    return out;
}

}  // namespace liftcam
