#include "scnn/cost.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>
#include <json.hpp>

#include "scnn/text.hpp"

namespace scnn {

Ratio make_ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) throw Error(ErrorCode::kInvalidArgument, "ratio with zero denominator");
  const std::uint64_t g = std::gcd(num, den);
  return g == 0 ? Ratio{0, 1} : Ratio{num / g, den / g};
}

std::size_t tree_depth(std::size_t pixels) {
  if (pixels == 0) throw Error(ErrorCode::kInvalidArgument, "tree depth of an empty image");
  return pixels == 1 ? 0 : static_cast<std::size_t>(std::bit_width(pixels - 1));
}

namespace {

void require_positive(std::initializer_list<std::size_t> values, const char* what) {
  for (std::size_t v : values) {
    if (v == 0) throw Error(ErrorCode::kInvalidArgument, std::string(what) + " arguments must be positive");
  }
}

}  // namespace

ConvCost conv_cost(std::size_t n_max, std::size_t c_in, std::size_t c_out, std::size_t height, std::size_t width,
                   std::size_t kernel) {
  require_positive({n_max, c_in, c_out, height, width, kernel}, "conv_cost");
  ConvCost c;
  c.sparse_mults = static_cast<std::uint64_t>(n_max) * n_max * c_in * c_out;
  c.dense_mults = static_cast<std::uint64_t>(height) * width * c_in * c_out * kernel * kernel;
  c.ratio = make_ratio(c.sparse_mults, c.dense_mults);
  return c;
}

Ratio act_cost(std::size_t n_max, std::size_t channels, std::size_t height, std::size_t width) {
  require_positive({n_max, channels, height, width}, "act_cost");
  return make_ratio(static_cast<std::uint64_t>(n_max) * channels, static_cast<std::uint64_t>(height) * width * channels);
}

Ratio active_fraction(std::size_t n_max, std::size_t height, std::size_t width) {
  require_positive({n_max, height, width}, "active_fraction");
  return make_ratio(n_max, static_cast<std::uint64_t>(height) * width);
}

CycleCalibration calibrate_cycles(std::span<const CyclePoint> samples) {
  if (samples.size() < 2) {
    throw Error(ErrorCode::kCalibration, "need at least two samples, got " + std::to_string(samples.size()));
  }
  const bool all_same = std::all_of(samples.begin(), samples.end(),
                                    [&](const CyclePoint& p) { return p.n_max == samples.front().n_max; });
  if (all_same) throw Error(ErrorCode::kCalibration, "samples need at least two distinct n_max values");

  const auto n = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd design(n, 2);
  Eigen::VectorXd cycles(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    design(i, 0) = samples[static_cast<std::size_t>(i)].n_max;
    design(i, 1) = 1.0;
    cycles(i) = samples[static_cast<std::size_t>(i)].cycles;
  }
  const Eigen::Vector2d coef = design.colPivHouseholderQr().solve(cycles);

  CycleCalibration cal;
  cal.slope = coef(0);
  cal.intercept = coef(1);
  if (cal.slope < 0) {
    throw Error(ErrorCode::kCalibration, "fitted slope " + format_real(cal.slope) + " is negative");
  }
  const Eigen::VectorXd residuals = cycles - design * coef;
  cal.residuals.assign(residuals.data(), residuals.data() + residuals.size());
  cal.max_abs_residual = residuals.cwiseAbs().maxCoeff();
  return cal;
}

std::int64_t estimate_cycles(const CycleCalibration& cal, double n_max) {
  return static_cast<std::int64_t>(std::llround(cal.slope * n_max + cal.intercept));
}

std::span<const CyclePoint> reference_ii_points() {
  static constexpr std::array<CyclePoint, 4> kPoints{{{8, 35}, {12, 52}, {16, 67}, {20, 84}}};
  return kPoints;
}

CostReport analyze(const ModelGraph& m, const std::optional<CycleCalibration>& calibration) {
  m.validate();
  const auto& reduce = m.input_reduce();
  const std::uint64_t n = reduce.n_max;

  CostReport r;
  r.input_active_fraction = active_fraction(reduce.n_max, m.input.height, m.input.width);
  std::size_t h = m.input.height, w = m.input.width, c = m.input.channels, flat = 0;

  for (const auto& spec : m.layers) {
    LayerCost lc;
    lc.kind = layer_kind(spec.layer);
    if (std::holds_alternative<InputReduceLayer>(spec.layer)) {
      // One combiner per tree node, HW − 1 nodes, once per retained slot.
      lc.compare_count = n * (static_cast<std::uint64_t>(h) * w - 1);
      lc.tree_depth = tree_depth(h, w);
      if (calibration) {
        lc.estimated_cycles = estimate_cycles(*calibration, static_cast<double>(n));
        r.estimated_ii = lc.estimated_cycles;
      }
    } else if (const auto* conv = std::get_if<SparseConvLayer>(&spec.layer)) {
      const auto& kw = conv->kernel;
      const ConvCost cc = conv_cost(reduce.n_max, kw.c_in, kw.c_out, h, w, kw.kernel);
      lc.mult_count = cc.sparse_mults;
      lc.add_count = cc.sparse_mults + n * kw.c_out;
      lc.compare_count = n * n * kw.c_out;
      lc.dense_mult_count = cc.dense_mults;
      lc.ratio = cc.ratio;
      r.total_conv_sparse_mults += cc.sparse_mults;
      r.total_conv_dense_mults += cc.dense_mults;
      c = kw.c_out;
    } else if (const auto* act = std::get_if<SparseActLayer>(&spec.layer)) {
      if (act->kind == Activation::kRelu) lc.compare_count = n * c;
      lc.ratio = act_cost(reduce.n_max, c, h, w);
    } else if (const auto* pool = std::get_if<SparsePoolLayer>(&spec.layer)) {
      lc.compare_count = n * n * c;
      lc.add_count = n * n * c;
      lc.mult_count = n * c;
      h = (h + pool->pool - 1) / pool->pool;
      w = (w + pool->pool - 1) / pool->pool;
    } else if (std::holds_alternative<SparseFlattenLayer>(spec.layer)) {
      flat = h * w * c;
    } else if (const auto* dense = std::get_if<DenseLayer>(&spec.layer)) {
      lc.mult_count = static_cast<std::uint64_t>(dense->params.in_dim) * dense->params.out_dim;
      lc.add_count = lc.mult_count;
      flat = dense->params.out_dim;
    } else if (const auto* dact = std::get_if<DenseActLayer>(&spec.layer)) {
      if (dact->kind == Activation::kRelu) lc.compare_count = flat;
    }
    r.total_mults += lc.mult_count;
    r.total_adds += lc.add_count;
    r.total_compares += lc.compare_count;
    r.layers.push_back(std::move(lc));
  }
  if (r.total_conv_dense_mults > 0) r.conv_mac_ratio = make_ratio(r.total_conv_sparse_mults, r.total_conv_dense_mults);
  return r;
}

namespace {

std::string percent(const Ratio& r) { return format_fixed(100.0 * r.value(), 3) + "%"; }

}  // namespace

std::string cost_table(const CostReport& r) {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof(line), "%-3s %-15s %12s %12s %12s %6s %14s %s\n", "#", "layer", "mults", "adds",
                "compares", "depth", "dense-mults", "ratio");
  os << line;
  for (std::size_t i = 0; i < r.layers.size(); ++i) {
    const auto& l = r.layers[i];
    const std::string depth = l.tree_depth ? std::to_string(*l.tree_depth) : "-";
    const std::string dense = l.dense_mult_count ? std::to_string(*l.dense_mult_count) : "-";
    const std::string ratio = l.ratio ? l.ratio->str() + " (" + percent(*l.ratio) + ")" : "-";
    std::snprintf(line, sizeof(line), "%-3zu %-15s %12llu %12llu %12llu %6s %14s %s\n", i, l.kind.c_str(),
                  static_cast<unsigned long long>(l.mult_count), static_cast<unsigned long long>(l.add_count),
                  static_cast<unsigned long long>(l.compare_count), depth.c_str(), dense.c_str(), ratio.c_str());
    os << line;
  }
  os << "total mults " << r.total_mults << ", adds " << r.total_adds << ", compares " << r.total_compares << "\n";
  os << "input active fraction " << r.input_active_fraction.str() << " = " << percent(r.input_active_fraction)
     << "\n";
  if (r.total_conv_dense_mults > 0) {
    os << "conv MAC ratio sparse/dense " << r.conv_mac_ratio.str() << " = " << percent(r.conv_mac_ratio) << "\n";
  }
  if (r.estimated_ii) os << "estimated II " << *r.estimated_ii << " cycles (calibrated, not measured)\n";
  return os.str();
}

std::string cost_json(const CostReport& r) {
  using nlohmann::ordered_json;
  auto ratio_json = [](const Ratio& q) {
    ordered_json j;
    j["num"] = q.num;
    j["den"] = q.den;
    j["value"] = q.value();
    return j;
  };
  ordered_json root;
  ordered_json layers = ordered_json::array();
  for (const auto& l : r.layers) {
    ordered_json j;
    j["kind"] = l.kind;
    j["mult_count"] = l.mult_count;
    j["add_count"] = l.add_count;
    j["compare_count"] = l.compare_count;
    if (l.tree_depth) j["tree_depth"] = *l.tree_depth;
    if (l.estimated_cycles) j["estimated_cycles"] = *l.estimated_cycles;
    if (l.dense_mult_count) j["dense_mult_count"] = *l.dense_mult_count;
    if (l.ratio) j["ratio"] = ratio_json(*l.ratio);
    layers.push_back(std::move(j));
  }
  root["layers"] = std::move(layers);
  root["totals"] = {{"mult_count", r.total_mults}, {"add_count", r.total_adds}, {"compare_count", r.total_compares}};
  root["conv_sparse_mults"] = r.total_conv_sparse_mults;
  root["conv_dense_mults"] = r.total_conv_dense_mults;
  if (r.total_conv_dense_mults > 0) root["conv_mac_ratio"] = ratio_json(r.conv_mac_ratio);
  root["input_active_fraction"] = ratio_json(r.input_active_fraction);
  if (r.estimated_ii) {
    root["estimated_ii_cycles"] = *r.estimated_ii;
    root["cycle_note"] = "calibrated, not measured";
  }
  root["resource_note"] =
      "resource usage is not modelled; qualitatively it grows with the unrolled multiply count (non-authoritative)";
  return root.dump(2) + "\n";
}

}  // namespace scnn
