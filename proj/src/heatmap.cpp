#include "liftcam/heatmap.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "liftcam/io.hpp"
#include "liftcam/ops.hpp"

namespace liftcam {

std::uint8_t quantize_unit(double v) {
    const double scaled = std::nearbyint(std::clamp(v, 0.0, 1.0) * 255.0);
    return static_cast<std::uint8_t>(scaled);
}

std::array<std::uint8_t, 3> colormap(double v) {
    v = std::clamp(v, 0.0, 1.0);
    auto channel = [v](double center) { return std::clamp(1.5 - std::abs(4.0 * v - center), 0.0, 1.0); };
    return {quantize_unit(channel(3.0)), quantize_unit(channel(2.0)), quantize_unit(channel(1.0))};
}

std::string encode_heatmap(const ExplanationMap& map, HeatmapStyle style, const Tensor* image) {
    const Tensor& s = map.normalized;
    if (s.rank() != 2) throw ShapeError("heatmap needs an H×W normalized map, got " + shape_to_string(s.shape()));
    const std::size_t h = s.dim(0), w = s.dim(1);
    std::string out = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
    out.reserve(out.size() + 3 * h * w);

    Tensor base;
    if (style == HeatmapStyle::Overlay) {
        if (!image || image->rank() != 3 || image->dim(1) != h || image->dim(2) != w) {
            throw ShapeError("overlay heatmap needs an image matching the " + shape_to_string(s.shape()) + " map");
        }
        base = minmax_normalize(*image);
    }
    for (std::size_t i = 0; i < h * w; ++i) {
        const double v = s[i];
        if (style == HeatmapStyle::Gray) {
            const auto g = static_cast<char>(quantize_unit(v));
            out.append(3, g);
            continue;
        }
        const auto color = colormap(v);
        for (std::size_t ch = 0; ch < 3; ++ch) {
            const std::size_t src = base.dim(0) >= 3 ? ch : 0;
            const double pixel = 255.0 * base[src * h * w + i];
            out.push_back(static_cast<char>(quantize_unit((0.5 * pixel + 0.5 * color[ch]) / 255.0)));
        }
    }
    return out;
}

void emit_heatmap(const ExplanationMap& map, const std::filesystem::path& path, HeatmapStyle style,
                  const Tensor* image) {
    const std::string bytes = encode_heatmap(map, style, image);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io::FormatError("cannot open '" + path.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw io::FormatError("failed writing '" + path.string() + "'");
}

}  // namespace liftcam
