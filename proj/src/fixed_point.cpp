#include "scnn/fixed_point.hpp"

#include <bit>
#include <cmath>
#include <string>

namespace scnn {

double FixedFormat::step() const noexcept { return std::ldexp(1.0, -fraction_bits()); }

double FixedFormat::min_value() const noexcept {
  return std::ldexp(static_cast<double>(raw_min()), -fraction_bits());
}

double FixedFormat::max_value() const noexcept {
  return std::ldexp(static_cast<double>(raw_max()), -fraction_bits());
}

FixedFormat make_format(int total_bits, int integer_bits) {
  FixedFormat f{total_bits, integer_bits};
  if (!f.valid()) {
    throw Error(ErrorCode::kInvalidArgument,
                "fixed format <" + std::to_string(total_bits) + "," +
                    std::to_string(integer_bits) +
                    "> requires 2 <= total <= 32 and 1 <= integer <= total");
  }
  return f;
}

FixedFormat default_format(int total_bits) {
  switch (total_bits) {
    case 8: return FixedFormat{8, 3};
    case 16: return FixedFormat{16, 6};
    default:
      throw Error(ErrorCode::kInvalidArgument,
                  "no default integer split for " + std::to_string(total_bits) + " bits");
  }
}

FixedValue::FixedValue(std::int64_t raw, FixedFormat format) : raw_(raw), format_(format) {
  if (!format.valid()) throw Error(ErrorCode::kInvalidArgument, "invalid fixed format");
  if (raw < format.raw_min() || raw > format.raw_max()) {
    throw Error(ErrorCode::kInvalidArgument,
                "raw value " + std::to_string(raw) + " does not fit in " +
                    std::to_string(format.total_bits) + " bits");
  }
}

double FixedValue::to_double() const noexcept {
  return std::ldexp(static_cast<double>(raw_), -format_.fraction_bits());
}

FixedValue quantize(double x, FixedFormat format) noexcept {
  if (std::isnan(x)) return FixedValue::zero(format);
  // Scaling by a power of two is exact; std::round breaks ties away from zero.
  const double scaled = std::round(std::ldexp(x, format.fraction_bits()));
  std::int64_t raw;
  if (scaled >= static_cast<double>(format.raw_max())) {
    raw = format.raw_max();
  } else if (scaled <= static_cast<double>(format.raw_min())) {
    raw = format.raw_min();
  } else {
    raw = static_cast<std::int64_t>(scaled);
  }
  return FixedValue(raw, format);
}

FixedValue saturating_add(const FixedValue& a, const FixedValue& b) {
  if (!(a.format() == b.format())) {
    throw Error(ErrorCode::kInvalidArgument, "saturating_add on mismatched formats");
  }
  const auto& f = a.format();
  std::int64_t s = a.raw() + b.raw();
  if (s > f.raw_max()) s = f.raw_max();
  if (s < f.raw_min()) s = f.raw_min();
  return FixedValue(s, f);
}

WideInt round_div(WideInt numerator, WideInt denominator) noexcept {
  const bool negative = numerator < 0;
  const WideInt magnitude = negative ? -numerator : numerator;
  WideInt q = magnitude / denominator;
  const WideInt r = magnitude % denominator;
  if (2 * r >= denominator) ++q;
  return negative ? -q : q;
}

namespace {

WideInt shift_left_checked(WideInt v, int bits) {
  if (bits == 0 || v == 0) return v;
  const WideInt limit = (~static_cast<unsigned __int128>(0) >> 1) >> bits;
  if (v > limit || v < -limit) {
    throw Error(ErrorCode::kAccumulatorOverflow, "rescale exceeds 128-bit accumulator");
  }
  return v * (WideInt{1} << bits);
}

}  // namespace

void FixedAccumulator::add_scaled(WideInt v, int frac) {
  if (frac > frac_) {
    value_ = shift_left_checked(value_, frac - frac_);
    frac_ = frac;
  } else if (frac < frac_) {
    v = shift_left_checked(v, frac_ - frac);
  }
  WideInt sum;
  if (__builtin_add_overflow(value_, v, &sum)) {
    throw Error(ErrorCode::kAccumulatorOverflow, "sum exceeds 128-bit accumulator");
  }
  value_ = sum;
}

void FixedAccumulator::add_product(const FixedValue& a, const FixedValue& b) {
  const WideInt product = static_cast<WideInt>(a.raw()) * static_cast<WideInt>(b.raw());
  add_scaled(product, a.format().fraction_bits() + b.format().fraction_bits());
}

void FixedAccumulator::add(const FixedValue& v) {
  add_scaled(static_cast<WideInt>(v.raw()), v.format().fraction_bits());
}

FixedValue FixedAccumulator::to_fixed(FixedFormat out, std::int64_t divisor) const {
  if (divisor <= 0) throw Error(ErrorCode::kInvalidArgument, "divisor must be positive");
  WideInt numerator = value_;
  WideInt denominator = divisor;
  const int shift = out.fraction_bits() - frac_;
  if (shift > 0) {
    numerator = shift_left_checked(numerator, shift);
  } else if (shift < 0) {
    denominator = shift_left_checked(denominator, -shift);
  }
  WideInt raw = round_div(numerator, denominator);
  if (raw > out.raw_max()) raw = out.raw_max();
  if (raw < out.raw_min()) raw = out.raw_min();
  return FixedValue(static_cast<std::int64_t>(raw), out);
}

int required_accumulator_bits(FixedFormat format, std::size_t terms) noexcept {
  int log_terms = 0;
  if (terms > 1) log_terms = std::bit_width(terms - 1);
  return 2 * format.total_bits + log_terms + 1;
}

}  // namespace scnn
