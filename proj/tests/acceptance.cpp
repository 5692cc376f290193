// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "scnn/cost.hpp"
#include "scnn/dense.hpp"
#include "scnn/io.hpp"
#include "scnn/model.hpp"
#include "scnn/preprocess.hpp"
#include "support.hpp"

using namespace scnn;
namespace t = scnn::testing;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void fail(const std::string& why) {
    if (pass) detail = why;
    pass = false;
  }
};

constexpr FixedFormat kFixed8{8, 3};
constexpr FixedFormat kFixed16{16, 6};

std::size_t ceil_log2(std::size_t n) {
  std::size_t d = 0;
  while ((std::size_t{1} << d) < n) ++d;
  return d;
}

template <typename T>
bool same_value(const T& a, const T& b) {
  if constexpr (std::is_same_v<T, FixedValue>) {
    return a == b;
  } else {
    return std::abs(a - b) <= 1e-9;
  }
}

// ---------------------------------------------------------------------------

Outcome reduction_oracle() {
  Outcome o;
  t::Rng rng(1001);
  const int trials = 600;
  for (int k = 0; k < trials && o.pass; ++k) {
    const std::size_t h = t::uniform_size(rng, 1, 64), w = t::uniform_size(rng, 1, 64);
    const std::size_t c = t::uniform_size(rng, 1, 3);
    const double fraction = t::uniform_real(rng, 0.0, 1.0);
    const auto active = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(h * w)));
    const DenseTensor x = t::random_sparse_tensor(rng, h, w, c, active, k % 2 ? -0.5 : 0.0);
    const double threshold = k % 4 == 0 ? 0.0 : t::uniform_real(rng, -0.4, 0.9);
    const std::size_t n_max = t::uniform_size(rng, 1, 40);

    const auto b = sparse_input_reduce(x, {threshold, n_max});
    const auto ref = naive_active_scan(x, threshold, n_max);
    for (std::size_t i = 0; i < n_max; ++i) {
      const bool retained = i < ref.coords.size();
      const Coord expect = retained ? ref.coords[i] : kSentinel;
      if (b.hash[i] != expect) o.fail("coordinate mismatch in trial " + std::to_string(k));
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double v = retained ? ref.features[c * i + ch] : 0.0;
        if (b.feature(i, ch) != v) o.fail("feature mismatch in trial " + std::to_string(k));
      }
    }
  }
  o.detail = o.pass ? std::to_string(trials) + " tensors" : o.detail;
  return o;
}

// Sparse conv against the masked dense oracle, for one scalar type. Also
// records whether conv and activation kept the hash array.
template <typename T>
void conv_instance(const DenseTensor& x, const KernelWeights<double>& kw_real, std::size_t n_max, FormatOf<T> f,
                   Outcome& equivalence, Outcome& preservation, int trial) {
  Tensor<T> xt;
  if constexpr (std::is_same_v<T, FixedValue>) {
    xt = quantize(x, f);
  } else {
    xt = x;
  }
  const auto kw = convert<T>(kw_real, f);
  const auto b = sparse_input_reduce(xt, {0.0, n_max});
  const auto out = sparse_conv(b, kw, f);
  const auto act = sparse_activation(out, Activation::kRelu);
  if (out.hash != b.hash || act.hash != b.hash) preservation.fail("hash changed in trial " + std::to_string(trial));

  const auto active = ActiveSet::from_coords(x.rows(), x.cols(), b.hash);
  const Tensor<T> ref = masked_conv_oracle(xt, active, kw, f);
  for (std::size_t i = 0; i < n_max; ++i) {
    const Coord c = out.hash[i];
    for (std::size_t co = 0; co < kw.c_out; ++co) {
      if (c.sentinel()) {
        if (Numeric<T>::to_real(out.feature(i, co)) != 0.0) equivalence.fail("nonzero sentinel feature");
        continue;
      }
      const T& expect = ref(static_cast<std::size_t>(c.h - 1), static_cast<std::size_t>(c.w - 1), co);
      if (!same_value(out.feature(i, co), expect)) {
        equivalence.fail("trial " + std::to_string(trial) + " differs at (" + std::to_string(c.h) + "," +
                         std::to_string(c.w) + ")");
      }
    }
  }
}

void masked_dense(Outcome& equivalence, Outcome& preservation) {
  t::Rng rng(2002);
  const int trials = 240;
  for (int k = 0; k < trials; ++k) {
    const std::size_t h = t::uniform_size(rng, 1, 24), w = t::uniform_size(rng, 1, 24);
    const std::size_t c_in = t::uniform_size(rng, 1, 3), c_out = t::uniform_size(rng, 1, 3);
    const std::size_t kernel = k % 2 ? 3 : 5;
    const std::size_t n_max = t::uniform_size(rng, 1, 40);
    // Actives are bounded by n_max; half the trials pack them densely so that
    // neighbourhoods overlap.
    const std::size_t cap = std::min(n_max, h * w);
    const std::size_t n_active = t::uniform_size(rng, 0, cap);
    const DenseTensor x = k % 2 ? t::random_sparse_tensor(rng, h, w, c_in, n_active)
                                : t::random_sparse_tensor(rng, std::min<std::size_t>(h, 6), std::min<std::size_t>(w, 6),
                                                          c_in, std::min(n_active, std::min<std::size_t>(h, 6) *
                                                                                       std::min<std::size_t>(w, 6)));
    const auto kw = t::random_kernel(rng, kernel, c_in, c_out);
    conv_instance<double>(x, kw, n_max, {}, equivalence, preservation, k);
    conv_instance<FixedValue>(x, kw, n_max, FixedFormat{8, 3}, equivalence, preservation, k);
    conv_instance<FixedValue>(x, kw, n_max, FixedFormat{16, 6}, equivalence, preservation, k);
  }
  if (equivalence.pass) equivalence.detail = std::to_string(trials) + " instances x {float, <8,3>, <16,6>}";
}

void end_to_end(Outcome& o, Outcome& preservation) {
  t::Rng rng(3003);
  const int inputs = 100;
  for (const char* preset : {"mnist", "neutrino", "jet"}) {
    for (const FixedFormat* f : {static_cast<const FixedFormat*>(nullptr), &kFixed16, &kFixed8}) {
      PresetOptions opt;
      opt.n_max = 20;
      if (f) {
        opt.mode = ArithmeticMode::kFixed;
        opt.format = *f;
      }
      const ModelGraph m = gen_random_model(rng(), preset, opt);
      for (int k = 0; k < inputs; ++k) {
        const std::size_t n_active = t::uniform_size(rng, 0, 2 * opt.n_max);
        const DenseTensor x = gen_synthetic_sparse(rng(), m.input.height, m.input.width, n_active);
        SparseTrace trace;
        const auto a = run_sparse(m, x, nullptr, &trace);
        const auto b = run_dense_constrained(m, x);
        if (a.size() != b.size()) o.fail("logit count differs");
        for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
          const bool ok = f ? a[i] == b[i] : std::abs(a[i] - b[i]) <= 1e-9;
          if (!ok) o.fail(std::string(preset) + (f ? " fixed" : " float") + " input " + std::to_string(k));
        }
        for (std::size_t i = 1; i < trace.layer.size(); ++i) {
          const std::string& kind = trace.layer[i];
          if ((kind == "sparse_conv" || kind == "sparse_act") && trace.hash[i] != trace.hash[i - 1]) {
            preservation.fail(std::string(preset) + " " + kind + " changed the hash array");
          }
        }
      }
    }
  }
  if (o.pass) o.detail = "3 presets x {float, <16,6>, <8,3>} x " + std::to_string(inputs) + " inputs";
}

Outcome depth_reproduction() {
  Outcome o;
  if (tree_depth(63, 63) != 12 || tree_depth(48, 48) != 12 || tree_depth(56, 56) != 12) o.fail("preset depths");
  const std::size_t sizes[] = {500, 1000, 1500, 2000, 2500, 3000};
  const std::size_t depths[] = {9, 10, 11, 11, 12, 12};
  for (int k = 0; k < 6; ++k) {
    if (tree_depth(sizes[k]) != depths[k]) o.fail("sweep size " + std::to_string(sizes[k]));
  }
  for (std::size_t n = 2; n <= 4096; ++n) {
    std::vector<ScanEntry> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = {0.0, i};
    FindActiveStats stats;
    find_active(v, 0.0, &stats);
    if (stats.depth != ceil_log2(n) || stats.depth != tree_depth(n)) o.fail("measured depth at N=" + std::to_string(n));
  }
  if (o.pass) o.detail = "presets, sweep and measured depth for N in [2,4096]";
  return o;
}

Outcome cost_formulas() {
  Outcome o;
  t::Rng rng(4004);
  const std::pair<std::size_t, std::size_t> pairs[] = {{1, 1}, {1, 3}, {2, 1}, {2, 2}, {3, 1}, {3, 3}};
  const std::size_t n_max = 20, h = 63, w = 63;
  for (const auto& [c_in, c_out] : pairs) {
    std::uint64_t sparse_by_k[2] = {0, 0};
    for (int ki = 0; ki < 2; ++ki) {
      const std::size_t kernel = ki == 0 ? 3 : 5;
      const DenseTensor x = t::random_sparse_tensor(rng, h, w, c_in, 60);
      const auto kw = t::random_kernel(rng, kernel, c_in, c_out);
      OpCounters sparse_ops, dense_ops;
      sparse_conv(sparse_input_reduce(x, {0.0, n_max}), kw, {}, &sparse_ops);
      conv2d_same(x, kw, {}, &dense_ops);
      const ConvCost c = conv_cost(n_max, c_in, c_out, h, w, kernel);
      const std::string tag = std::to_string(c_in) + "->" + std::to_string(c_out) + " K=" + std::to_string(kernel);
      if (sparse_ops.sparse_conv_iterations != c.sparse_mults) o.fail("sparse count " + tag);
      if (dense_ops.dense_conv_multiplies != c.dense_mults) o.fail("dense count " + tag);
      if (c.sparse_mults != static_cast<std::uint64_t>(n_max) * n_max * c_in * c_out) o.fail("formula " + tag);
      sparse_by_k[ki] = sparse_ops.sparse_conv_iterations;
    }
    if (sparse_by_k[0] != sparse_by_k[1]) o.fail("sparse count depends on K");
  }
  if (o.pass) o.detail = "6 channel pairs x K in {3,5}; sparse count identical for K=3 and K=5";
  return o;
}

Outcome arithmetic_spot_checks() {
  Outcome o;
  const Ratio fraction = active_fraction(20, 63, 63);
  if (!(fraction == Ratio{20, 3969}) || !(fraction.value() < 0.01)) o.fail("active fraction");
  const ConvCost c = conv_cost(20, 1, 1, 63, 63, 3);
  if (!(c.ratio == Ratio{400, 35721})) o.fail("MAC ratio");

  // The same single-conv model the cost subcommand builds from flags.
  ModelGraph m;
  m.input = {63, 63, 1};
  m.layers = {{InputReduceLayer{0.0, 20}, std::nullopt},
              {SparseConvLayer{{3, 1, 1, std::vector<double>(9), {0.0}}}, std::nullopt},
              {SparseActLayer{}, std::nullopt},
              {SparseFlattenLayer{}, std::nullopt}};
  const std::string table = cost_table(analyze(m, std::nullopt));
  if (table.find("20/3969 = 0.504%") == std::string::npos) o.fail("table lacks 20/3969 = 0.504%");
  if (table.find("400/35721 = 1.120%") == std::string::npos) o.fail("table lacks 400/35721 = 1.120%");
  if (o.pass) o.detail = "20/3969 = 0.504%, 400/35721 = 1.120%";
  return o;
}

Outcome calibration_sanity() {
  Outcome o;
  const CycleCalibration cal = calibrate_cycles(reference_ii_points());
  double worst = 0.0;
  for (const CyclePoint& p : reference_ii_points()) {
    const double err = std::abs(static_cast<double>(estimate_cycles(cal, p.n_max)) - p.cycles);
    worst = std::max(worst, err);
  }
  if (worst > 2.0) o.fail("prediction off by " + std::to_string(worst));
  for (int n = 1; n <= 64; ++n) {
    if (estimate_cycles(cal, n + 1) <= estimate_cycles(cal, n)) o.fail("not monotone at " + std::to_string(n));
  }
  if (o.pass) {
    std::ostringstream os;
    os << "slope " << cal.slope << ", intercept " << cal.intercept << ", worst rounded error " << worst;
    o.detail = os.str();
  }
  return o;
}

template <typename T>
void pool_instance(const DenseTensor& x, std::size_t n_max, std::size_t pool, FormatOf<T> f, Outcome& o, int trial) {
  Tensor<T> xt;
  if constexpr (std::is_same_v<T, FixedValue>) {
    xt = quantize(x, f);
  } else {
    xt = x;
  }
  const auto b = sparse_input_reduce(xt, {0.0, n_max});
  const auto sparse = sparse_flatten(sparse_avg_pool(b, pool, f), f);
  const auto active = ActiveSet::from_coords(x.rows(), x.cols(), b.hash);
  const auto dense = flatten(avg_pool2d(mask(xt, active), pool, f));
  if (sparse.size() != dense.size()) {
    o.fail("length differs in trial " + std::to_string(trial));
    return;
  }
  for (std::size_t k = 0; k < sparse.size(); ++k) {
    if (!same_value(sparse[k], dense[k])) o.fail("trial " + std::to_string(trial) + " index " + std::to_string(k));
  }
}

Outcome pool_flatten_oracle() {
  Outcome o;
  t::Rng rng(5005);
  const int trials = 300;
  for (int k = 0; k < trials; ++k) {
    const std::size_t pool = t::uniform_size(rng, 1, 4);
    const std::size_t h = t::uniform_size(rng, 1, 20), w = t::uniform_size(rng, 1, 20);
    const std::size_t c = t::uniform_size(rng, 1, 3);
    std::size_t n_max = 0, n_active = 0;
    DenseTensor x;
    switch (k % 3) {
      case 0:  // clustered actives: many share a pool window
        n_active = std::min<std::size_t>(h * w, t::uniform_size(rng, 1, 16));
        x = t::random_sparse_tensor(rng, std::min<std::size_t>(h, 4), std::min<std::size_t>(w, 4), c,
                                    std::min(n_active, std::min<std::size_t>(h, 4) * std::min<std::size_t>(w, 4)));
        n_max = t::uniform_size(rng, 1, 20);
        break;
      case 1:  // sentinel-heavy: budget far above the active count
        n_active = t::uniform_size(rng, 0, 3);
        x = t::random_sparse_tensor(rng, h, w, c, std::min(n_active, h * w));
        n_max = t::uniform_size(rng, 10, 40);
        break;
      default:  // truncating: more actives than the budget
        n_active = t::uniform_size(rng, 0, h * w);
        x = t::random_sparse_tensor(rng, h, w, c, n_active);
        n_max = t::uniform_size(rng, 1, 25);
        break;
    }
    pool_instance<double>(x, n_max, pool, {}, o, k);
    pool_instance<FixedValue>(x, n_max, pool, FixedFormat{8, 3}, o, k);
    pool_instance<FixedValue>(x, n_max, pool, FixedFormat{16, 6}, o, k);
  }
  if (o.pass) o.detail = std::to_string(trials) + " instances x {float, <8,3>, <16,6>}";
  return o;
}

std::string file_bytes(const std::string& path) { return read_text_file(path); }

Outcome format_round_trips() {
  Outcome o;
  t::Rng rng(6006);
  const auto dir = std::filesystem::temp_directory_path() / ("scnn_acceptance_" + std::to_string(rng()));
  std::filesystem::create_directories(dir);
  const std::string a = (dir / "a").string(), b = (dir / "b").string();
  const int artifacts = 100;
  for (int k = 0; k < artifacts; ++k) {
    const std::size_t h = t::uniform_size(rng, 1, 16), w = t::uniform_size(rng, 1, 16), c = t::uniform_size(rng, 1, 3);

    DenseTensor x(h, w, c);
    for (double& v : x.data()) v = static_cast<float>(t::uniform_real(rng, -50, 50));
    write_tensor(a, x);
    write_tensor(b, read_tensor(a));
    if (file_bytes(a) != file_bytes(b) || read_tensor(b) != x) o.fail("tensor " + std::to_string(k));

    const DenseTensor sparse = t::random_sparse_tensor(rng, h, w, c, t::uniform_size(rng, 0, h * w));
    write_bundle(a, sparse_input_reduce(sparse, {0.0, t::uniform_size(rng, 1, 20)}));
    write_bundle(b, read_bundle(a));
    if (file_bytes(a) != file_bytes(b)) o.fail("bundle " + std::to_string(k));

    PresetOptions opt;
    opt.n_max = t::uniform_size(rng, 1, 30);
    opt.kernel = k % 2 ? 3 : 5;
    opt.conv_channels = t::uniform_size(rng, 1, 3);
    opt.threshold = t::uniform_real(rng, 0.0, 0.5);
    if (k % 3 == 0) {
      opt.mode = ArithmeticMode::kFixed;
      opt.format = k % 2 ? FixedFormat{8, 3} : FixedFormat{16, 6};
    }
    const char* names[] = {"mnist", "neutrino", "jet"};
    const ModelGraph m = gen_random_model(rng(), names[k % 3], opt);
    save_model_file(m, a);
    const ModelGraph back = load_model_file(a);
    save_model_file(back, b);
    if (file_bytes(a) != file_bytes(b) || !(back == m)) o.fail("manifest " + std::to_string(k));
  }
  std::filesystem::remove_all(dir);
  if (o.pass) o.detail = std::to_string(artifacts) + " each of tensor, bundle and manifest";
  return o;
}

}  // namespace

int main() {
  using clock = std::chrono::steady_clock;
  int failures = 0;
  auto report = [&](int id, const char* name, const Outcome& o, double seconds, double limit) {
    const bool in_time = limit <= 0 || seconds < limit;
    const bool pass = o.pass && in_time;
    failures += pass ? 0 : 1;
    char timing[64];
    std::snprintf(timing, sizeof(timing), "%.2fs", seconds);
    std::cout << (pass ? "PASS" : "FAIL") << " criterion " << id << ": " << name << " (" << o.detail << "; "
              << timing << (in_time ? "" : " over limit") << ")\n";
  };
  auto timed = [](const std::function<void()>& f) {
    const auto start = clock::now();
    f();
    return std::chrono::duration<double>(clock::now() - start).count();
  };

  Outcome c1, c2, c3, c4, c5, c6, c7, c8, c9, c10;
  const double t1 = timed([&] { c1 = reduction_oracle(); });
  const double t3 = timed([&] { masked_dense(c3, c2); });
  const double t4 = timed([&] { end_to_end(c4, c2); });
  if (c2.pass) c2.detail = "every sparse_conv and sparse_activation in criteria 3 and 4";
  const double t5 = timed([&] { c5 = depth_reproduction(); });
  const double t6 = timed([&] { c6 = cost_formulas(); });
  const double t7 = timed([&] { c7 = arithmetic_spot_checks(); });
  const double t8 = timed([&] { c8 = calibration_sanity(); });
  const double t9 = timed([&] { c9 = pool_flatten_oracle(); });
  const double t10 = timed([&] { c10 = format_round_trips(); });

  report(1, "reduction equals the naive scan", c1, t1, 10.0);
  report(2, "sparsity preservation", c2, t3 + t4, 0);
  report(3, "sparse conv equals the masked dense oracle", c3, t3, 30.0);
  report(4, "sparse path equals the dense-constrained path", c4, t4, 0);
  report(5, "reduction tree depth", c5, t5, 0);
  report(6, "instrumented multiply counts", c6, t6, 0);
  report(7, "arithmetic spot checks", c7, t7, 0);
  report(8, "cycle calibration", c8, t8, 0);
  report(9, "pool and flatten equal the dense oracle", c9, t9, 0);
  report(10, "format round trips", c10, t10, 0);
  std::cout << (failures ? "FAILED " : "ALL PASSED ") << 10 - failures << "/10\n";
  return failures ? 1 : 0;
}
