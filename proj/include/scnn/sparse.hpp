#pragma once

// Sparse layers over compact feature/hash arrays.
//
// A SparseBundle holds up to n_max retained pixels. Slot i owns features
// feat[C·i .. C·i + C-1] and the 1-based coordinate hash[i]. Unused slots are
// padding sentinels: coordinate (0,0) and all-zero features. Every kernel is
// templated on the scalar so the same loop nest serves the float and the
// fixed-point paths.

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "scnn/error.hpp"
#include "scnn/kernel.hpp"
#include "scnn/numeric.hpp"
#include "scnn/tensor.hpp"
#include "scnn/text.hpp"

namespace scnn {

/// 1-based (height, width) pixel coordinate; (0,0) marks a padded slot.
struct Coord {
  std::int32_t h = 0;
  std::int32_t w = 0;

  constexpr bool sentinel() const noexcept { return h == 0 && w == 0; }
  friend constexpr bool operator==(const Coord&, const Coord&) = default;
};

inline constexpr Coord kSentinel{0, 0};

template <typename T>
FormatOf<T> format_of(const T& v) noexcept {
  if constexpr (std::is_same_v<T, FixedValue>) {
    return v.format();
  } else {
    return {};
  }
}

template <typename T>
struct SparseBundle {
  std::size_t n_max = 0;
  std::size_t channels = 0;
  std::size_t grid_h = 0;
  std::size_t grid_w = 0;
  std::vector<T> feat;
  std::vector<Coord> hash;

  static SparseBundle padded(std::size_t n_max, std::size_t channels, std::size_t grid_h,
                             std::size_t grid_w, FormatOf<T> format = {}) {
    return {n_max, channels, grid_h, grid_w,
            std::vector<T>(n_max * channels, Numeric<T>::zero(format)),
            std::vector<Coord>(n_max, kSentinel)};
  }

  T& feature(std::size_t slot, std::size_t c) noexcept { return feat[channels * slot + c]; }
  const T& feature(std::size_t slot, std::size_t c) const noexcept { return feat[channels * slot + c]; }

  std::size_t active_count() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(hash.begin(), hash.end(), [](const Coord& c) { return !c.sentinel(); }));
  }

  /// Throws kMalformed when sizes, coordinate ranges or sentinel features
  /// break the bundle invariants.
  void validate() const {
    if (feat.size() != n_max * channels || hash.size() != n_max) {
      throw Error(ErrorCode::kMalformed, "bundle arrays do not match n_max=" + std::to_string(n_max) +
                                             ", C=" + std::to_string(channels));
    }
    for (std::size_t i = 0; i < n_max; ++i) {
      const Coord& c = hash[i];
      if (c.sentinel()) {
        for (std::size_t ch = 0; ch < channels; ++ch) {
          if (Numeric<T>::to_real(feature(i, ch)) != 0.0) {
            throw Error(ErrorCode::kMalformed, "sentinel slot " + std::to_string(i) + " has nonzero features");
          }
        }
      } else if (c.h < 1 || c.w < 1 || static_cast<std::size_t>(c.h) > grid_h ||
                 static_cast<std::size_t>(c.w) > grid_w) {
        throw Error(ErrorCode::kMalformed, "slot " + std::to_string(i) + " coordinate (" +
                                               std::to_string(c.h) + "," + std::to_string(c.w) +
                                               ") outside the grid");
      }
    }
  }

  friend bool operator==(const SparseBundle&, const SparseBundle&) = default;
};

struct ReduceConfig {
  double threshold = 0.0;
  std::size_t n_max = 1;
};

// --------------------------------------------------------------------------
// Input reduction

/// One element of the channel-0 scan array. `found` is false only for the
/// "no active pixel" result of the combiner, which reads as value 0, index 0.
struct ScanEntry {
  double value = 0.0;
  std::size_t index = 0;
  bool found = true;

  static constexpr ScanEntry none() noexcept { return {0.0, 0, false}; }
};

inline bool is_active(const ScanEntry& e, double threshold) noexcept {
  return e.found && e.value > threshold;
}

/// Pairwise combiner: a if active, else b if active, else none.
inline ScanEntry op_active(const ScanEntry& a, const ScanEntry& b, double threshold) noexcept {
  if (is_active(a, threshold)) return a;
  if (is_active(b, threshold)) return b;
  return ScanEntry::none();
}

struct FindActiveStats {
  std::size_t depth = 0;
  std::size_t combiner_calls = 0;
};

namespace detail {

inline ScanEntry find_active_tree(std::span<const ScanEntry> p, double threshold, std::size_t& depth,
                                  std::size_t& calls) {
  if (p.size() == 1) {
    depth = 0;
    return p[0];
  }
  if (p.size() == 2) {
    depth = 1;
    ++calls;
    return op_active(p[0], p[1], threshold);
  }
  // Left partition: largest power of two strictly below N.
  const std::size_t left = std::bit_floor(p.size() - 1);
  std::size_t dl = 0;
  std::size_t dr = 0;
  const ScanEntry u = find_active_tree(p.first(left), threshold, dl, calls);
  const ScanEntry v = find_active_tree(p.subspan(left), threshold, dr, calls);
  depth = 1 + std::max(dl, dr);
  ++calls;
  return op_active(u, v, threshold);
}

}  // namespace detail

/// Leftmost entry with value > threshold, found by the fixed-shape binary
/// reduction tree; ScanEntry::none() when nothing is active.
inline ScanEntry find_active(std::span<const ScanEntry> values, double threshold,
                             FindActiveStats* stats = nullptr) {
  if (values.empty()) throw Error(ErrorCode::kInvalidArgument, "find_active on an empty array");
  std::size_t depth = 0;
  std::size_t calls = 0;
  ScanEntry r = detail::find_active_tree(values, threshold, depth, calls);
  if (stats) {
    stats->depth = depth;
    stats->combiner_calls = calls;
  }
  // A single-element tree returns its leaf unfiltered.
  return is_active(r, threshold) ? r : ScanEntry::none();
}

/// Extracts up to n_max active pixels (channel 0 > threshold) in row-major
/// order. Each round runs the reduction tree over the whole scan array, then
/// masks the consumed pixel so the next round reveals the next active one.
template <typename T>
SparseBundle<T> sparse_input_reduce(const Tensor<T>& x, const ReduceConfig& cfg) {
  const Shape& s = x.shape();
  if (s.channels == 0 || s.pixels() == 0) {
    throw Error(ErrorCode::kInvalidArgument, "input reduction needs a non-empty tensor, got " + to_string(s));
  }
  if (cfg.n_max == 0) throw Error(ErrorCode::kInvalidArgument, "n_max must be >= 1");

  const auto zero_format = format_of(x.data()[0]);
  auto out = SparseBundle<T>::padded(cfg.n_max, s.channels, s.height, s.width, zero_format);

  std::vector<ScanEntry> scan(s.pixels());
  for (std::size_t j = 0; j < s.pixels(); ++j) {
    scan[j] = {Numeric<T>::to_real(x.data()[s.channels * j]), j, true};
  }

  for (std::size_t i = 0; i < cfg.n_max; ++i) {
    const ScanEntry p = find_active(scan, cfg.threshold);
    if (!p.found) continue;  // slot stays a sentinel
    for (std::size_t c = 0; c < s.channels; ++c) {
      out.feature(i, c) = x.data()[s.channels * p.index + c];
    }
    out.hash[i] = {static_cast<std::int32_t>(p.index / s.width + 1),
                   static_cast<std::int32_t>(p.index % s.width + 1)};
    scan[p.index].value = -std::numeric_limits<double>::infinity();
  }
  return out;
}

// --------------------------------------------------------------------------
// Convolution

/// Sparsity-preserving convolution. For every output slot and channel the
/// loop visits every input slot, maps the coordinate offset to a kernel
/// position and accumulates the channel dot product; offsets outside the
/// K×K field contribute nothing. The hash array is copied unchanged and
/// padded output slots are forced to zero. The loop nest runs
/// n_max²·C_in·C_out iterations for any K.
template <typename T>
SparseBundle<T> sparse_conv(const SparseBundle<T>& in, const KernelWeights<T>& kw, FormatOf<T> out_format = {},
                            OpCounters* counters = nullptr) {
  kw.validate();
  if (in.channels != kw.c_in) {
    throw Error(ErrorCode::kShapeMismatch, "sparse_conv: bundle has " + std::to_string(in.channels) +
                                               " channels, kernel expects " + std::to_string(kw.c_in));
  }
  using N = Numeric<T>;
  auto out = SparseBundle<T>::padded(in.n_max, kw.c_out, in.grid_h, in.grid_w, out_format);
  out.hash = in.hash;

  std::uint64_t multiplies = 0;
  for (std::size_t p_out = 0; p_out < in.n_max; ++p_out) {
    const Coord co = in.hash[p_out];
    for (std::size_t c_out = 0; c_out < kw.c_out; ++c_out) {
      typename N::accumulator acc{};
      for (std::size_t p_in = 0; p_in < in.n_max; ++p_in) {
        const Coord ci = in.hash[p_in];
        if (ci.sentinel()) continue;
        const std::ptrdiff_t pos = offset_position(co.h - ci.h, co.w - ci.w, kw.kernel);
        if (pos < 0) continue;
        const std::size_t w_idx = kw.index(static_cast<std::size_t>(pos), c_out, 0);
        for (std::size_t c_in = 0; c_in < kw.c_in; ++c_in) {
          N::mac(acc, kw.weights[w_idx + c_in], in.feature(p_in, c_in));
        }
        multiplies += kw.c_in;
      }
      N::add(acc, kw.bias[c_out]);
      out.feature(p_out, c_out) = co.sentinel() ? N::zero(out_format) : N::finish(acc, out_format);
    }
  }
  if (counters) {
    counters->sparse_conv_iterations += static_cast<std::uint64_t>(in.n_max) * in.n_max * kw.c_in * kw.c_out;
    counters->sparse_conv_multiplies += multiplies;
  }
  return out;
}

// --------------------------------------------------------------------------
// Activation, pooling, flatten

template <typename T>
SparseBundle<T> sparse_activation(const SparseBundle<T>& in, Activation kind, OpCounters* counters = nullptr) {
  SparseBundle<T> out = in;
  for (T& v : out.feat) v = activate(v, kind);
  if (counters) counters->activations += out.feat.size();
  return out;
}

/// Pooled coordinate of a 1-based coordinate: ⌊(c−1)/P⌋ + 1; sentinels stay.
inline Coord pooled_coord(const Coord& c, std::size_t pool) noexcept {
  if (c.sentinel()) return kSentinel;
  const auto p = static_cast<std::int32_t>(pool);
  return {(c.h - 1) / p + 1, (c.w - 1) / p + 1};
}

/// Average pooling on the sparse arrays. Slot i collects every not yet
/// consumed slot that lands in the same pool, masks them, and divides the sum
/// by P². A non-sentinel slot already consumed by an earlier representative
/// becomes a sentinel. Output grid is ⌈grid/P⌉ per axis.
template <typename T>
SparseBundle<T> sparse_avg_pool(const SparseBundle<T>& in, std::size_t pool, FormatOf<T> out_format = {}) {
  if (pool == 0) throw Error(ErrorCode::kInvalidArgument, "pool size must be >= 1");
  using N = Numeric<T>;
  auto out = SparseBundle<T>::padded(in.n_max, in.channels, (in.grid_h + pool - 1) / pool,
                                     (in.grid_w + pool - 1) / pool, out_format);
  std::vector<Coord> pooled(in.n_max);
  for (std::size_t i = 0; i < in.n_max; ++i) pooled[i] = pooled_coord(in.hash[i], pool);

  const auto divisor = static_cast<std::int64_t>(pool * pool);
  std::vector<bool> consumed(in.n_max, false);
  for (std::size_t i = 0; i < in.n_max; ++i) {
    if (pooled[i].sentinel() || consumed[i]) continue;
    out.hash[i] = pooled[i];
    for (std::size_t c = 0; c < in.channels; ++c) {
      typename N::accumulator acc{};
      for (std::size_t j = i; j < in.n_max; ++j) {
        if (!consumed[j] && pooled[j] == pooled[i]) N::add(acc, in.feature(j, c));
      }
      out.feature(i, c) = N::finish(acc, out_format, divisor);
    }
    for (std::size_t j = i; j < in.n_max; ++j) {
      if (pooled[j] == pooled[i]) consumed[j] = true;
    }
  }
  return out;
}

/// Scatters every non-sentinel slot into a zero-initialised channel-last
/// array of grid_h·grid_w·C values at C·((h−1)·W + (w−1)) + c. Values are
/// added, so the result does not depend on slot order.
template <typename T>
std::vector<T> sparse_flatten(const SparseBundle<T>& in, FormatOf<T> out_format = {}) {
  std::vector<T> flat(in.grid_h * in.grid_w * in.channels, Numeric<T>::zero(out_format));
  for (std::size_t i = 0; i < in.n_max; ++i) {
    const Coord& c = in.hash[i];
    if (c.sentinel()) continue;
    const std::size_t pix = static_cast<std::size_t>(c.h - 1) * in.grid_w + static_cast<std::size_t>(c.w - 1);
    for (std::size_t ch = 0; ch < in.channels; ++ch) {
      T& dst = flat[in.channels * pix + ch];
      dst = Numeric<T>::sum(dst, Numeric<T>::convert(in.feature(i, ch), out_format));
    }
  }
  return flat;
}

/// Debug dump: one line per slot, `i h w f0 ... fC-1`.
template <typename T>
void dump_bundle(std::ostream& os, const SparseBundle<T>& b) {
  for (std::size_t i = 0; i < b.n_max; ++i) {
    os << i << ' ' << b.hash[i].h << ' ' << b.hash[i].w;
    for (std::size_t c = 0; c < b.channels; ++c) os << ' ' << format_real(Numeric<T>::to_real(b.feature(i, c)));
    os << '\n';
  }
}

template <typename T>
SparseBundle<double> to_real(const SparseBundle<T>& b) {
  return {b.n_max, b.channels, b.grid_h, b.grid_w, to_real(b.feat), b.hash};
}

}  // namespace scnn
