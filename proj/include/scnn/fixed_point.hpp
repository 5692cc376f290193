#pragma once

// Emulated two's-complement fixed-point arithmetic.
//
// A FixedFormat <total, integer> stores a signed value in `total` bits of
// which `integer` bits (sign included) sit left of the binary point. Values
// convert from real numbers by round-to-nearest (ties away from zero) followed
// by saturation. Products are accumulated at full precision in a wide integer
// and rounded exactly once, when the layer output is written.

#include <cstddef>
#include <cstdint>

#include "scnn/error.hpp"

namespace scnn {

using WideInt = __int128;

struct FixedFormat {
  int total_bits = 16;
  int integer_bits = 6;

  constexpr int fraction_bits() const noexcept { return total_bits - integer_bits; }
  constexpr std::int64_t raw_min() const noexcept {
    return -(std::int64_t{1} << (total_bits - 1));
  }
  constexpr std::int64_t raw_max() const noexcept {
    return (std::int64_t{1} << (total_bits - 1)) - 1;
  }
  constexpr bool valid() const noexcept {
    return total_bits >= 2 && total_bits <= 32 && integer_bits >= 1 &&
           integer_bits <= total_bits;
  }

  double step() const noexcept;
  double min_value() const noexcept;
  double max_value() const noexcept;

  friend constexpr bool operator==(const FixedFormat&, const FixedFormat&) = default;
};

/// Validating constructor; throws kInvalidArgument outside 2..32 / 1..total.
FixedFormat make_format(int total_bits, int integer_bits);

/// Documented default splits for the two bit-widths the presets use:
/// <8,3> and <16,6>. Other widths have no default.
FixedFormat default_format(int total_bits);

class FixedValue {
 public:
  FixedValue() = default;
  FixedValue(std::int64_t raw, FixedFormat format);

  static FixedValue zero(FixedFormat format) noexcept {
    FixedValue v;
    v.format_ = format;
    return v;
  }

  std::int64_t raw() const noexcept { return raw_; }
  const FixedFormat& format() const noexcept { return format_; }
  double to_double() const noexcept;

  friend bool operator==(const FixedValue&, const FixedValue&) = default;

 private:
  std::int64_t raw_ = 0;
  FixedFormat format_{};
};

FixedValue quantize(double x, FixedFormat format) noexcept;

inline double dequantize(const FixedValue& v) noexcept { return v.to_double(); }

/// a + b in the format of `a`, saturating. Formats must match.
FixedValue saturating_add(const FixedValue& a, const FixedValue& b);

/// Rounds `numerator / denominator` to the nearest integer, ties away from
/// zero. `denominator` must be positive.
WideInt round_div(WideInt numerator, WideInt denominator) noexcept;

/// Exact sum of fixed-point products and addends.
///
/// Terms may carry different fraction widths; the accumulator rescales to the
/// finest one seen (left shifts are exact), so the final value does not
/// depend on the order of additions.
class FixedAccumulator {
 public:
  void add_product(const FixedValue& a, const FixedValue& b);
  void add(const FixedValue& v);

  WideInt value() const noexcept { return value_; }
  int fraction_bits() const noexcept { return frac_; }

  /// Rounds value / divisor into `out` (ties away from zero, saturating).
  FixedValue to_fixed(FixedFormat out, std::int64_t divisor = 1) const;

 private:
  void add_scaled(WideInt v, int frac);

  WideInt value_ = 0;
  int frac_ = 0;
};

/// Functional form of FixedAccumulator::add_product.
inline FixedAccumulator fixed_mul_acc(FixedAccumulator acc, const FixedValue& a,
                                      const FixedValue& b) {
  acc.add_product(a, b);
  return acc;
}

/// Minimum accumulator width for `terms` products of `format` values:
/// 2·total + ceil(log2(terms)) + 1.
int required_accumulator_bits(FixedFormat format, std::size_t terms) noexcept;

}  // namespace scnn
