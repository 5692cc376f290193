#pragma once

// Scalar traits that let every layer kernel be written once and run either in
// double precision or in emulated fixed point.

#include <cstdint>
#include <vector>

#include "scnn/fixed_point.hpp"

namespace scnn {

/// Output "format" of the floating-point path: nothing to configure.
struct RealFormat {
  friend constexpr bool operator==(RealFormat, RealFormat) = default;
};

template <typename T>
struct Numeric;

template <>
struct Numeric<double> {
  using format_type = RealFormat;
  using accumulator = double;

  static double zero(RealFormat) noexcept { return 0.0; }
  static double from_real(double x, RealFormat) noexcept { return x; }
  static double to_real(double v) noexcept { return v; }

  static void mac(accumulator& acc, double a, double b) noexcept { acc += a * b; }
  static void add(accumulator& acc, double v) noexcept { acc += v; }
  static double finish(const accumulator& acc, RealFormat, std::int64_t divisor = 1) noexcept {
    return divisor == 1 ? acc : acc / static_cast<double>(divisor);
  }
  static double sum(double a, double b) noexcept { return a + b; }
  static double convert(double v, RealFormat) noexcept { return v; }
  static double relu(double v) noexcept { return v > 0.0 ? v : 0.0; }
};

template <>
struct Numeric<FixedValue> {
  using format_type = FixedFormat;
  using accumulator = FixedAccumulator;

  static FixedValue zero(FixedFormat f) noexcept { return FixedValue::zero(f); }
  static FixedValue from_real(double x, FixedFormat f) noexcept { return quantize(x, f); }
  static double to_real(const FixedValue& v) noexcept { return v.to_double(); }

  static void mac(accumulator& acc, const FixedValue& a, const FixedValue& b) {
    acc.add_product(a, b);
  }
  static void add(accumulator& acc, const FixedValue& v) { acc.add(v); }
  static FixedValue finish(const accumulator& acc, FixedFormat out, std::int64_t divisor = 1) {
    return acc.to_fixed(out, divisor);
  }
  static FixedValue sum(const FixedValue& a, const FixedValue& b) { return saturating_add(a, b); }
  /// Exact re-rounding into another format (identity when formats match).
  static FixedValue convert(const FixedValue& v, FixedFormat out) {
    if (v.format() == out) return v;
    FixedAccumulator acc;
    acc.add(v);
    return acc.to_fixed(out);
  }
  static FixedValue relu(const FixedValue& v) noexcept {
    return v.raw() > 0 ? v : FixedValue::zero(v.format());
  }
};

template <typename T>
using FormatOf = typename Numeric<T>::format_type;

template <typename T>
std::vector<T> from_real(const std::vector<double>& values, FormatOf<T> format) {
  std::vector<T> out;
  out.reserve(values.size());
  for (double v : values) out.push_back(Numeric<T>::from_real(v, format));
  return out;
}

template <typename T>
std::vector<double> to_real(const std::vector<T>& values) {
  std::vector<double> out;
  out.reserve(values.size());
  for (const T& v : values) out.push_back(Numeric<T>::to_real(v));
  return out;
}

enum class Activation { kRelu, kLinear };

template <typename T>
T activate(const T& v, Activation kind) {
  return kind == Activation::kRelu ? Numeric<T>::relu(v) : v;
}

}  // namespace scnn
