#include "liftcam/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

namespace liftcam {

std::string shape_to_string(const Shape& shape) {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out << "x";
        out << shape[i];
    }
    out << ']';
    return out.str();
}

std::size_t shape_numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

namespace {

void check_shape(const Shape& shape) {
    for (auto d : shape) {
        if (d == 0) throw ShapeError("tensor shape " + shape_to_string(shape) + " has a zero dimension");
    }
}

}  // namespace

Tensor::Tensor(Shape shape, float fill) : shape_(std::move(shape)) {
    check_shape(shape_);
    data_.assign(shape_numel(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape(shape_);
    if (data_.size() != shape_numel(shape_)) {
        throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                         shape_to_string(shape_));
    }
}

Tensor Tensor::from_values(Shape shape, std::initializer_list<float> values) {
    return Tensor(std::move(shape), std::vector<float>(values));
}

Tensor Tensor::reshaped(Shape shape) const {
    if (shape_numel(shape) != data_.size()) {
        throw ShapeError("cannot reshape " + shape_to_string(shape_) + " to " + shape_to_string(shape));
    }
    return Tensor(std::move(shape), data_);
}

Tensor Tensor::channel(std::size_t c) const {
    if (rank() != 3 || c >= shape_[0]) {
        throw ShapeError("channel " + std::to_string(c) + " out of range for " + shape_to_string(shape_));
    }
    const std::size_t plane = shape_[1] * shape_[2];
    auto first = data_.begin() + static_cast<std::ptrdiff_t>(c * plane);
    return Tensor({shape_[1], shape_[2]}, std::vector<float>(first, first + static_cast<std::ptrdiff_t>(plane)));
}

bool Tensor::all_finite() const {
    for (float v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

}  // namespace liftcam
