#include "scnn/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "scnn/text.hpp"

namespace scnn {

namespace {

[[noreturn]] void bad_step(const std::string& step, const std::string& what) {
  throw Error(ErrorCode::kInvalidArgument, "transform step '" + step + "': " + what);
}

std::size_t parse_positive(const std::string& step, const std::string& arg) {
  std::size_t v = 0;
  if (!parse_size(arg, v) || v == 0) bad_step(step, "expected a positive integer, got '" + arg + "'");
  return v;
}

double parse_real(const std::string& step, const std::string& arg) {
  double v = 0;
  if (!parse_double(arg, v) || !std::isfinite(v)) bad_step(step, "expected a number, got '" + arg + "'");
  return v;
}

std::pair<std::size_t, std::size_t> parse_dims(const std::string& step, const std::string& arg) {
  const auto parts = split(arg, 'x');
  if (parts.size() != 2) bad_step(step, "expected HxW, got '" + arg + "'");
  return {parse_positive(step, parts[0]), parse_positive(step, parts[1])};
}

TransformStep parse_step(std::string_view raw) {
  const std::string text(trim(raw));
  const auto colon = text.find(':');
  if (colon == std::string::npos) bad_step(text, "expected name:argument");
  const std::string name(trim(std::string_view(text).substr(0, colon)));
  const std::string arg(trim(std::string_view(text).substr(colon + 1)));

  if (name == "avg_pool") return AvgPoolStep{parse_positive(text, arg)};
  if (name == "sum_pool") return SumPoolStep{parse_positive(text, arg)};
  if (name == "pad_to") {
    const auto [h, w] = parse_dims(text, arg);
    return PadToStep{h, w};
  }
  if (name == "crop_borders") {
    const auto [h, w] = parse_dims(text, arg);
    return CropBordersStep{h, w};
  }
  if (name == "radial_inflate") {
    const double s = parse_real(text, arg);
    if (s < 1.0) bad_step(text, "scale must be >= 1");
    return RadialInflateStep{s};
  }
  if (name == "threshold") return ThresholdStep{parse_real(text, arg)};
  if (name == "normalize") {
    const double f = parse_real(text, arg);
    if (f == 0.0) bad_step(text, "factor must be nonzero");
    return NormalizeStep{f};
  }
  if (name == "saturate") return SaturateStep{parse_real(text, arg)};
  bad_step(text, "unknown transform '" + name + "'");
}

DenseTensor pool_impl(const DenseTensor& x, std::size_t pool, bool average) {
  if (pool == 0) throw Error(ErrorCode::kInvalidArgument, "pool size must be >= 1");
  const std::size_t oh = (x.rows() + pool - 1) / pool;
  const std::size_t ow = (x.cols() + pool - 1) / pool;
  DenseTensor out(oh, ow, x.channels());
  const double scale = average ? 1.0 / static_cast<double>(pool * pool) : 1.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) {
      for (std::size_t c = 0; c < x.channels(); ++c) out(i / pool, j / pool, c) += x(i, j, c);
    }
  }
  if (average) {
    for (double& v : out.data()) v *= scale;
  }
  return out;
}

}  // namespace

TransformSpec parse_transform_spec(const std::string& text) {
  TransformSpec spec;
  if (trim(text).empty()) return spec;
  for (const auto& part : split(text, ',')) spec.push_back(parse_step(part));
  return spec;
}

TransformSpec parse_transform_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  TransformSpec spec;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    for (const auto& part : split(line, ',')) {
      if (!trim(part).empty()) spec.push_back(parse_step(part));
    }
  }
  return spec;
}

std::string to_string(const TransformSpec& spec) {
  std::string out;
  for (const auto& step : spec) {
    if (!out.empty()) out += ',';
    std::visit(
        [&](const auto& s) {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, AvgPoolStep>) out += "avg_pool:" + std::to_string(s.pool);
          if constexpr (std::is_same_v<S, SumPoolStep>) out += "sum_pool:" + std::to_string(s.pool);
          if constexpr (std::is_same_v<S, PadToStep>)
            out += "pad_to:" + std::to_string(s.height) + "x" + std::to_string(s.width);
          if constexpr (std::is_same_v<S, CropBordersStep>)
            out += "crop_borders:" + std::to_string(s.height) + "x" + std::to_string(s.width);
          if constexpr (std::is_same_v<S, RadialInflateStep>) out += "radial_inflate:" + format_real(s.scale);
          if constexpr (std::is_same_v<S, ThresholdStep>) out += "threshold:" + format_real(s.threshold);
          if constexpr (std::is_same_v<S, NormalizeStep>) out += "normalize:" + format_real(s.factor);
          if constexpr (std::is_same_v<S, SaturateStep>) out += "saturate:" + format_real(s.cap);
        },
        step);
  }
  return out;
}

DenseTensor sum_pool(const DenseTensor& x, std::size_t pool) { return pool_impl(x, pool, false); }

DenseTensor avg_pool(const DenseTensor& x, std::size_t pool) { return pool_impl(x, pool, true); }

DenseTensor pad_to(const DenseTensor& x, std::size_t height, std::size_t width) {
  if (height < x.rows() || width < x.cols()) {
    throw Error(ErrorCode::kShapeMismatch, "pad_to " + std::to_string(height) + "x" + std::to_string(width) +
                                               " is smaller than " + to_string(x.shape()));
  }
  const std::size_t top = (height - x.rows()) / 2;
  const std::size_t left = (width - x.cols()) / 2;
  DenseTensor out(height, width, x.channels());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) {
      for (std::size_t c = 0; c < x.channels(); ++c) out(i + top, j + left, c) = x(i, j, c);
    }
  }
  return out;
}

DenseTensor crop_borders(const DenseTensor& x, std::size_t height, std::size_t width) {
  if (height > x.rows() || width > x.cols() || height == 0 || width == 0) {
    throw Error(ErrorCode::kShapeMismatch, "crop_borders " + std::to_string(height) + "x" + std::to_string(width) +
                                               " does not fit inside " + to_string(x.shape()));
  }
  const std::size_t top = (x.rows() - height) / 2;
  const std::size_t left = (x.cols() - width) / 2;
  DenseTensor out(height, width, x.channels());
  for (std::size_t i = 0; i < height; ++i) {
    for (std::size_t j = 0; j < width; ++j) {
      for (std::size_t c = 0; c < x.channels(); ++c) out(i, j, c) = x(i + top, j + left, c);
    }
  }
  return out;
}

DenseTensor radial_inflate(const DenseTensor& x, double scale) {
  if (x.channels() != 1) {
    throw Error(ErrorCode::kShapeMismatch, "radial_inflate needs a single channel, got " + to_string(x.shape()));
  }
  if (!(scale >= 1.0)) throw Error(ErrorCode::kInvalidArgument, "radial_inflate scale must be >= 1");
  const auto h = static_cast<std::ptrdiff_t>(x.rows());
  const auto w = static_cast<std::ptrdiff_t>(x.cols());
  const std::ptrdiff_t ci = h / 2;
  const std::ptrdiff_t cj = w / 2;

  DenseTensor out(x.rows(), x.cols(), 1);
  std::vector<bool> written(x.size(), false);
  for (std::ptrdiff_t i = 0; i < h; ++i) {
    for (std::ptrdiff_t j = 0; j < w; ++j) {
      const double v = x(static_cast<std::size_t>(i), static_cast<std::size_t>(j), 0);
      if (v == 0.0) continue;
      const auto ti = ci + static_cast<std::ptrdiff_t>(std::round(scale * static_cast<double>(i - ci)));
      const auto tj = cj + static_cast<std::ptrdiff_t>(std::round(scale * static_cast<double>(j - cj)));
      if (ti < 0 || ti >= h || tj < 0 || tj >= w) continue;
      const auto idx = out.index(static_cast<std::size_t>(ti), static_cast<std::size_t>(tj), 0);
      out.data()[idx] = written[idx] ? std::max(out.data()[idx], v) : v;
      written[idx] = true;
    }
  }
  return out;
}

DenseTensor threshold(const DenseTensor& x, double t) {
  return transform<double>(x, [t](double v) { return v >= t ? v : 0.0; });
}

DenseTensor normalize(const DenseTensor& x, double factor) {
  if (factor == 0.0) throw Error(ErrorCode::kInvalidArgument, "normalize by zero");
  return transform<double>(x, [factor](double v) { return v / factor; });
}

DenseTensor saturate(const DenseTensor& x, double cap) {
  return transform<double>(x, [cap](double v) { return std::min(v, cap); });
}

DenseTensor apply_transforms(const DenseTensor& x, const TransformSpec& spec) {
  DenseTensor t = x;
  for (std::size_t k = 0; k < spec.size(); ++k) {
    try {
      t = std::visit(
          [&](const auto& s) -> DenseTensor {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, AvgPoolStep>) return avg_pool(t, s.pool);
            if constexpr (std::is_same_v<S, SumPoolStep>) return sum_pool(t, s.pool);
            if constexpr (std::is_same_v<S, PadToStep>) return pad_to(t, s.height, s.width);
            if constexpr (std::is_same_v<S, CropBordersStep>) return crop_borders(t, s.height, s.width);
            if constexpr (std::is_same_v<S, RadialInflateStep>) return radial_inflate(t, s.scale);
            if constexpr (std::is_same_v<S, ThresholdStep>) return threshold(t, s.threshold);
            if constexpr (std::is_same_v<S, NormalizeStep>) return normalize(t, s.factor);
            if constexpr (std::is_same_v<S, SaturateStep>) return saturate(t, s.cap);
          },
          spec[k]);
    } catch (const Error& e) {
      throw Error(e.code(), "step " + std::to_string(k) + ": " + e.what());
    }
  }
  return t;
}

DenseTensor gen_synthetic_sparse(std::uint64_t seed, std::size_t height, std::size_t width, std::size_t n_active,
                                 double value_lo, double value_hi) {
  if (n_active > height * width) {
    throw Error(ErrorCode::kInvalidArgument, "n_active " + std::to_string(n_active) + " exceeds " +
                                                 std::to_string(height * width) + " pixels");
  }
  if (!(value_lo > 0.0) || !(value_hi >= value_lo)) {
    throw Error(ErrorCode::kInvalidArgument, "value range must satisfy 0 < lo <= hi");
  }
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(height * width);
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Partial Fisher-Yates: the first n_active entries become the chosen pixels.
  for (std::size_t k = 0; k < n_active; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, order.size() - 1);
    std::swap(order[k], order[pick(rng)]);
  }
  std::uniform_real_distribution<double> value(value_lo, value_hi);
  DenseTensor out(height, width, 1);
  for (std::size_t k = 0; k < n_active; ++k) {
    double v = value(rng);
    if (v <= 0.0) v = value_lo;
    out.data()[order[k]] = v;
  }
  return out;
}

}  // namespace scnn
