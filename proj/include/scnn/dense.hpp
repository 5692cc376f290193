#pragma once

// Dense reference layers and the masked-dense oracle for the sparse path.

#include <cstddef>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Core>

#include "scnn/error.hpp"
#include "scnn/kernel.hpp"
#include "scnn/numeric.hpp"
#include "scnn/sparse.hpp"
#include "scnn/tensor.hpp"

namespace scnn {

/// H×W membership grid of retained pixels.
class ActiveSet {
 public:
  ActiveSet() = default;
  ActiveSet(std::size_t height, std::size_t width, bool all = false)
      : height_(height), width_(width), bits_(height * width, all) {}

  /// From 1-based coordinates; sentinels are ignored.
  static ActiveSet from_coords(std::size_t height, std::size_t width, std::span<const Coord> coords) {
    ActiveSet s(height, width);
    for (const Coord& c : coords) {
      if (c.sentinel()) continue;
      if (c.h < 1 || c.w < 1 || static_cast<std::size_t>(c.h) > height || static_cast<std::size_t>(c.w) > width) {
        throw Error(ErrorCode::kOutOfBounds, "active coordinate outside the grid");
      }
      s.insert(static_cast<std::size_t>(c.h - 1), static_cast<std::size_t>(c.w - 1));
    }
    return s;
  }

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  bool contains(std::size_t i, std::size_t j) const noexcept { return bits_[i * width_ + j]; }
  void insert(std::size_t i, std::size_t j) { bits_[i * width_ + j] = true; }
  std::size_t count() const noexcept {
    std::size_t n = 0;
    for (bool b : bits_) n += b ? 1 : 0;
    return n;
  }

  /// Pool cells (⌈H/P⌉×⌈W/P⌉) containing at least one member.
  ActiveSet pooled(std::size_t pool) const {
    ActiveSet out((height_ + pool - 1) / pool, (width_ + pool - 1) / pool);
    for (std::size_t i = 0; i < height_; ++i) {
      for (std::size_t j = 0; j < width_; ++j) {
        if (contains(i, j)) out.insert(i / pool, j / pool);
      }
    }
    return out;
  }

  friend bool operator==(const ActiveSet&, const ActiveSet&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<bool> bits_;
};

/// Zeroes every pixel (all channels) outside `active`.
template <typename T>
Tensor<T> mask(const Tensor<T>& x, const ActiveSet& active) {
  if (active.height() != x.rows() || active.width() != x.cols()) {
    throw Error(ErrorCode::kShapeMismatch, "active set does not match tensor " + to_string(x.shape()));
  }
  Tensor<T> out = x;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) {
      if (active.contains(i, j)) continue;
      for (std::size_t c = 0; c < x.channels(); ++c) out(i, j, c) = Numeric<T>::zero(format_of(x(i, j, c)));
    }
  }
  return out;
}

/// Same-padded, unit-stride convolution:
///   O[i,j,co] = b[co] + Σ_ci Σ_kh Σ_kw I[i+kh−R, j+kw−R, ci]·T[kh,kw,ci,co]
/// with zeros outside the image. Performs H·W·C_out·C_in·K² multiplies.
template <typename T>
Tensor<T> conv2d_same(const Tensor<T>& x, const KernelWeights<T>& kw, FormatOf<T> out_format = {},
                      OpCounters* counters = nullptr) {
  kw.validate();
  if (x.channels() != kw.c_in) {
    throw Error(ErrorCode::kShapeMismatch, "conv2d_same: tensor has " + std::to_string(x.channels()) +
                                               " channels, kernel expects " + std::to_string(kw.c_in));
  }
  using N = Numeric<T>;
  const auto h = static_cast<std::ptrdiff_t>(x.rows());
  const auto w = static_cast<std::ptrdiff_t>(x.cols());
  const auto r = static_cast<std::ptrdiff_t>(kw.radius());
  const auto k = static_cast<std::ptrdiff_t>(kw.kernel);
  const T padding = x.size() ? N::zero(format_of(x.data()[0])) : N::zero({});

  Tensor<T> out(x.rows(), x.cols(), kw.c_out, N::zero(out_format));
  for (std::ptrdiff_t i = 0; i < h; ++i) {
    for (std::ptrdiff_t j = 0; j < w; ++j) {
      for (std::size_t co = 0; co < kw.c_out; ++co) {
        typename N::accumulator acc{};
        for (std::size_t ci = 0; ci < kw.c_in; ++ci) {
          for (std::ptrdiff_t kh = 0; kh < k; ++kh) {
            for (std::ptrdiff_t kwi = 0; kwi < k; ++kwi) {
              const std::ptrdiff_t ii = i + kh - r;
              const std::ptrdiff_t jj = j + kwi - r;
              const bool inside = ii >= 0 && ii < h && jj >= 0 && jj < w;
              const T& v = inside ? x(static_cast<std::size_t>(ii), static_cast<std::size_t>(jj), ci) : padding;
              const auto pos = static_cast<std::size_t>(kh * k + kwi);
              N::mac(acc, v, kw.weights[kw.index(pos, co, ci)]);
            }
          }
        }
        N::add(acc, kw.bias[co]);
        out(static_cast<std::size_t>(i), static_cast<std::size_t>(j), co) = N::finish(acc, out_format);
      }
    }
  }
  if (counters) {
    counters->dense_conv_multiplies +=
        static_cast<std::uint64_t>(x.rows()) * x.cols() * kw.c_out * kw.c_in * kw.positions();
  }
  return out;
}

/// Ground truth for sparse_conv: mask the input to `active`, convolve, mask
/// the output to `active`.
template <typename T>
Tensor<T> masked_conv_oracle(const Tensor<T>& x, const ActiveSet& active, const KernelWeights<T>& kw,
                             FormatOf<T> out_format = {}, OpCounters* counters = nullptr) {
  return mask(conv2d_same(mask(x, active), kw, out_format, counters), active);
}

template <typename T>
Tensor<T> activate(const Tensor<T>& x, Activation kind) {
  return transform<T>(x, [kind](const T& v) { return activate(v, kind); });
}

template <typename T>
Tensor<T> relu_dense(const Tensor<T>& x) {
  return activate(x, Activation::kRelu);
}

/// P×P average pooling with stride P. Output is ⌈H/P⌉×⌈W/P⌉; border windows
/// are zero-padded and every window divides by P².
template <typename T>
Tensor<T> avg_pool2d(const Tensor<T>& x, std::size_t pool, FormatOf<T> out_format = {}) {
  if (pool == 0) throw Error(ErrorCode::kInvalidArgument, "pool size must be >= 1");
  using N = Numeric<T>;
  const std::size_t oh = (x.rows() + pool - 1) / pool;
  const std::size_t ow = (x.cols() + pool - 1) / pool;
  Tensor<T> out(oh, ow, x.channels(), N::zero(out_format));
  const auto divisor = static_cast<std::int64_t>(pool * pool);
  for (std::size_t i = 0; i < oh; ++i) {
    for (std::size_t j = 0; j < ow; ++j) {
      for (std::size_t c = 0; c < x.channels(); ++c) {
        typename N::accumulator acc{};
        for (std::size_t di = 0; di < pool; ++di) {
          for (std::size_t dj = 0; dj < pool; ++dj) {
            const std::size_t ii = i * pool + di;
            const std::size_t jj = j * pool + dj;
            if (ii < x.rows() && jj < x.cols()) N::add(acc, x(ii, jj, c));
          }
        }
        out(i, j, c) = N::finish(acc, out_format, divisor);
      }
    }
  }
  return out;
}

template <typename T>
std::vector<T> flatten(const Tensor<T>& x) {
  return x.values();
}

/// weight · v + bias.
template <typename T>
std::vector<T> fully_connected(std::span<const T> v, const DenseParams<T>& p, FormatOf<T> out_format = {},
                               OpCounters* counters = nullptr) {
  p.validate();
  if (v.size() != p.in_dim) {
    throw Error(ErrorCode::kShapeMismatch, "fully_connected expects " + std::to_string(p.in_dim) +
                                               " inputs, got " + std::to_string(v.size()));
  }
  if (counters) counters->dense_fc_multiplies += static_cast<std::uint64_t>(p.in_dim) * p.out_dim;
  if constexpr (std::is_same_v<T, double>) {
    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const Eigen::Map<const RowMajor> w(p.weights.data(), static_cast<Eigen::Index>(p.out_dim),
                                       static_cast<Eigen::Index>(p.in_dim));
    const Eigen::Map<const Eigen::VectorXd> x(v.data(), static_cast<Eigen::Index>(v.size()));
    const Eigen::Map<const Eigen::VectorXd> b(p.bias.data(), static_cast<Eigen::Index>(p.out_dim));
    const Eigen::VectorXd y = w * x + b;
    return std::vector<double>(y.data(), y.data() + y.size());
  } else {
    using N = Numeric<T>;
    std::vector<T> out;
    out.reserve(p.out_dim);
    for (std::size_t o = 0; o < p.out_dim; ++o) {
      typename N::accumulator acc{};
      for (std::size_t k = 0; k < p.in_dim; ++k) N::mac(acc, p.weights[o * p.in_dim + k], v[k]);
      N::add(acc, p.bias[o]);
      out.push_back(N::finish(acc, out_format));
    }
    return out;
  }
}

template <typename T>
std::vector<T> activate(const std::vector<T>& v, Activation kind) {
  std::vector<T> out;
  out.reserve(v.size());
  for (const T& x : v) out.push_back(activate(x, kind));
  return out;
}

/// Retained pixels found by a single row-major pass.
template <typename T>
struct ScanResult {
  std::vector<Coord> coords;  // 1-based
  std::vector<T> features;    // coords.size()·C values
};

/// Oracle for sparse_input_reduce: the first n_max pixels, in row-major
/// order, whose channel-0 value exceeds the threshold.
template <typename T>
ScanResult<T> naive_active_scan(const Tensor<T>& x, double threshold, std::size_t n_max) {
  ScanResult<T> r;
  for (std::size_t i = 0; i < x.rows() && r.coords.size() < n_max; ++i) {
    for (std::size_t j = 0; j < x.cols() && r.coords.size() < n_max; ++j) {
      if (!(Numeric<T>::to_real(x(i, j, 0)) > threshold)) continue;
      r.coords.push_back({static_cast<std::int32_t>(i + 1), static_cast<std::int32_t>(j + 1)});
      for (std::size_t c = 0; c < x.channels(); ++c) r.features.push_back(x(i, j, c));
    }
  }
  return r;
}

}  // namespace scnn
