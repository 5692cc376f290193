#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "scnn/error.hpp"
#include "scnn/numeric.hpp"

namespace scnn {

/// K×K×C_in×C_out convolution weights plus bias.
///
/// Weights are flat in position → output channel → input channel order:
/// (pos, co, ci) lives at C_out·C_in·pos + C_in·co + ci, with
/// pos = kh·K + kw.
template <typename T>
struct KernelWeights {
  std::size_t kernel = 1;
  std::size_t c_in = 1;
  std::size_t c_out = 1;
  std::vector<T> weights;
  std::vector<T> bias;

  std::size_t radius() const noexcept { return (kernel - 1) / 2; }
  std::size_t positions() const noexcept { return kernel * kernel; }

  std::size_t index(std::size_t pos, std::size_t co, std::size_t ci) const noexcept {
    return c_out * c_in * pos + c_in * co + ci;
  }

  void validate() const {
    if (kernel % 2 == 0) {
      throw Error(ErrorCode::kInvalidArgument, "kernel size must be odd, got " + std::to_string(kernel));
    }
    if (c_in == 0 || c_out == 0) throw Error(ErrorCode::kInvalidArgument, "channel counts must be >= 1");
    if (weights.size() != positions() * c_in * c_out) {
      throw Error(ErrorCode::kDimensionInconsistency,
                  "kernel expects " + std::to_string(positions() * c_in * c_out) + " weights, got " +
                      std::to_string(weights.size()));
    }
    if (bias.size() != c_out) {
      throw Error(ErrorCode::kDimensionInconsistency,
                  "kernel expects " + std::to_string(c_out) + " biases, got " + std::to_string(bias.size()));
    }
  }

  friend bool operator==(const KernelWeights&, const KernelWeights&) = default;
};

/// Kernel position for the offset (Δh, Δw) = out − in, or -1 outside the
/// K×K field: pos = (R − Δh)·K + (R − Δw).
inline std::ptrdiff_t offset_position(std::ptrdiff_t dh, std::ptrdiff_t dw, std::size_t kernel) noexcept {
  const auto r = static_cast<std::ptrdiff_t>((kernel - 1) / 2);
  if (dh > r || dh < -r || dw > r || dw < -r) return -1;
  return (r - dh) * static_cast<std::ptrdiff_t>(kernel) + (r - dw);
}

/// Row-major out×in matrix and bias for a fully-connected layer.
template <typename T>
struct DenseParams {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  std::vector<T> weights;
  std::vector<T> bias;

  void validate() const {
    if (weights.size() != in_dim * out_dim || bias.size() != out_dim) {
      throw Error(ErrorCode::kDimensionInconsistency,
                  "dense layer " + std::to_string(out_dim) + "x" + std::to_string(in_dim) +
                      " has " + std::to_string(weights.size()) + " weights and " +
                      std::to_string(bias.size()) + " biases");
    }
  }

  friend bool operator==(const DenseParams&, const DenseParams&) = default;
};

template <typename T>
KernelWeights<T> convert(const KernelWeights<double>& kw, FormatOf<T> format) {
  return {kw.kernel, kw.c_in, kw.c_out, from_real<T>(kw.weights, format), from_real<T>(kw.bias, format)};
}

template <typename T>
DenseParams<T> convert(const DenseParams<double>& p, FormatOf<T> format) {
  return {p.in_dim, p.out_dim, from_real<T>(p.weights, format), from_real<T>(p.bias, format)};
}

/// Instrumentation for operation-count checks. Kernels take an optional
/// pointer and only increment.
struct OpCounters {
  // Alg.-level MAC iterations of sparse_conv: one per (p_out, c_out, p_in, c_in).
  std::uint64_t sparse_conv_iterations = 0;
  // Multiplies actually evaluated by sparse_conv (in-field, non-sentinel pairs).
  std::uint64_t sparse_conv_multiplies = 0;
  // Tap multiplies of conv2d_same, zero-padded taps included.
  std::uint64_t dense_conv_multiplies = 0;
  std::uint64_t dense_fc_multiplies = 0;
  std::uint64_t activations = 0;
};

}  // namespace scnn
