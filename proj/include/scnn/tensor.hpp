#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "scnn/error.hpp"
#include "scnn/fixed_point.hpp"

namespace scnn {

struct Shape {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;

  std::size_t pixels() const noexcept { return height * width; }
  std::size_t size() const noexcept { return height * width * channels; }

  friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& s);

/// H×W×C image or feature map, row-major, channel-last: element (i, j, c)
/// lives at C·(i·W + j) + c.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  Tensor(std::size_t height, std::size_t width, std::size_t channels, const T& fill = T{})
      : shape_{height, width, channels}, data_(height * width * channels, fill) {}
  Tensor(Shape shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.size()) {
      throw Error(ErrorCode::kShapeMismatch,
                  "tensor " + to_string(shape_) + " needs " + std::to_string(shape_.size()) +
                      " values, got " + std::to_string(data_.size()));
    }
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rows() const noexcept { return shape_.height; }
  std::size_t cols() const noexcept { return shape_.width; }
  std::size_t channels() const noexcept { return shape_.channels; }
  std::size_t size() const noexcept { return data_.size(); }

  std::size_t index(std::size_t i, std::size_t j, std::size_t c) const noexcept {
    return shape_.channels * (i * shape_.width + j) + c;
  }

  // Unchecked access.
  T& operator()(std::size_t i, std::size_t j, std::size_t c) noexcept { return data_[index(i, j, c)]; }
  const T& operator()(std::size_t i, std::size_t j, std::size_t c) const noexcept {
    return data_[index(i, j, c)];
  }

  const T& at(std::size_t i, std::size_t j, std::size_t c) const {
    check(i, j, c);
    return data_[index(i, j, c)];
  }
  void set(std::size_t i, std::size_t j, std::size_t c, const T& value) {
    check(i, j, c);
    data_[index(i, j, c)] = value;
  }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  void check(std::size_t i, std::size_t j, std::size_t c) const {
    if (i >= shape_.height || j >= shape_.width || c >= shape_.channels) {
      throw Error(ErrorCode::kOutOfBounds,
                  "(" + std::to_string(i) + "," + std::to_string(j) + "," + std::to_string(c) +
                      ") outside " + to_string(shape_));
    }
  }

  Shape shape_{};
  std::vector<T> data_;
};

using DenseTensor = Tensor<double>;
using FixedTensor = Tensor<FixedValue>;

template <typename U, typename T, typename F>
Tensor<U> transform(const Tensor<T>& t, F&& f) {
  std::vector<U> out;
  out.reserve(t.size());
  for (const T& v : t.data()) out.push_back(f(v));
  return Tensor<U>(t.shape(), std::move(out));
}

inline FixedTensor quantize(const DenseTensor& t, FixedFormat format) {
  return transform<FixedValue>(t, [format](double v) { return quantize(v, format); });
}

inline DenseTensor dequantize(const FixedTensor& t) {
  return transform<double>(t, [](const FixedValue& v) { return v.to_double(); });
}

}  // namespace scnn
