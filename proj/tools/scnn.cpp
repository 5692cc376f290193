// scnn: command-line front end for the sparse CNN library.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "scnn/cost.hpp"
#include "scnn/dense.hpp"
#include "scnn/io.hpp"
#include "scnn/model.hpp"
#include "scnn/preprocess.hpp"
#include "scnn/text.hpp"

namespace {

using namespace scnn;
using nlohmann::ordered_json;

/// Thrown when a run finishes but an equivalence check failed.
struct ContractViolation {
  std::string what;
};

void emit(const std::optional<std::string>& out, const std::string& text) {
  if (out) {
    write_text_file(*out, text);
  } else {
    std::cout << text;
  }
}

FixedFormat parse_format(const std::string& text) {
  const auto parts = split(text, ':');
  long long total = 0, integer = 0;
  if (parts.size() != 2 || !parse_int(parts[0], total) || !parse_int(parts[1], integer)) {
    throw Error(ErrorCode::kInvalidArgument, "--format expects total:int, got '" + text + "'");
  }
  return make_format(static_cast<int>(total), static_cast<int>(integer));
}

std::vector<std::size_t> parse_size_list(const std::string& text, const char* flag) {
  std::vector<std::size_t> out;
  for (const auto& part : split(text, ',')) {
    std::size_t v = 0;
    if (!parse_size(part, v) || v == 0) {
      throw Error(ErrorCode::kInvalidArgument, std::string(flag) + " expects positive integers, got '" + part + "'");
    }
    out.push_back(v);
  }
  if (out.empty()) throw Error(ErrorCode::kInvalidArgument, std::string(flag) + " is empty");
  return out;
}

std::string join_logits(const std::vector<double>& v) {
  std::string s;
  for (std::size_t k = 0; k < v.size(); ++k) s += (k ? " " : "") + format_fixed(v[k], 9);
  return s;
}

// ---------------------------------------------------------------------------

struct PreprocessArgs {
  std::string in, out;
  std::string spec;
  std::optional<std::string> spec_file;
};

void cmd_preprocess(const PreprocessArgs& a) {
  TransformSpec spec = a.spec_file ? parse_transform_file(*a.spec_file) : parse_transform_spec(a.spec);
  if (a.spec_file && !a.spec.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "use either --spec or --spec-file");
  }
  write_tensor(a.out, apply_transforms(load_tensor(a.in), spec));
}

struct ReduceArgs {
  std::string in;
  double threshold = 0.0;
  std::size_t n_max = 0;
  std::optional<std::string> out;
};

void cmd_reduce(const ReduceArgs& a) {
  const DenseTensor x = load_tensor(a.in);
  const auto bundle = sparse_input_reduce(x, {a.threshold, a.n_max});
  std::size_t active = 0;
  for (std::size_t k = 0; k < x.shape().pixels(); ++k) active += x.data()[x.channels() * k] > a.threshold ? 1 : 0;
  if (active > a.n_max) {
    std::cerr << "warning: " << active << " active pixels, kept the first " << a.n_max << " in row-major order\n";
  }
  emit(a.out, format_bundle(bundle));
}

struct InferArgs {
  std::string model, in;
  std::string mode = "sparse";
};

void cmd_infer(const InferArgs& a) {
  const ModelGraph m = load_model_file(a.model);
  const DenseTensor x = load_tensor(a.in);
  std::vector<double> logits;
  if (a.mode == "sparse") {
    logits = run_sparse(m, x);
  } else if (a.mode == "dense-constrained") {
    logits = run_dense_constrained(m, x);
  } else if (a.mode == "dense") {
    logits = run_dense(m, x);
  } else {
    throw Error(ErrorCode::kUnknownMode, "'" + a.mode + "' (expected sparse, dense-constrained or dense)");
  }
  std::cout << "logits " << join_logits(logits) << "\n";
  std::cout << "class " << predicted_class(logits) << "\n";
}

struct CompareArgs {
  std::string model;
  std::vector<std::string> inputs;
  std::size_t random = 0;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

void cmd_compare(const CompareArgs& a) {
  const ModelGraph m = load_model_file(a.model);
  m.validate();
  if (a.inputs.empty() && a.random == 0) throw Error(ErrorCode::kInvalidArgument, "give tensor files or --random N");
  if (a.random > 0 && !a.seed) throw Error(ErrorCode::kInvalidArgument, "--random needs an explicit --seed");
  if (a.random > 0 && m.input.channels != 1) {
    throw Error(ErrorCode::kInvalidArgument, "--random generates single-channel inputs only");
  }

  const auto& reduce = m.input_reduce();
  const bool fixed = m.mode == ArithmeticMode::kFixed;
  std::mt19937_64 rng(a.seed.value_or(0));
  std::uniform_int_distribution<std::size_t> count(0, std::min(2 * reduce.n_max, m.input.pixels()));

  std::size_t cases = 0, deviations = 0, set_mismatches = 0;
  double max_dev = 0.0;
  OpCounters sparse_ops, dense_ops;
  const std::size_t total = a.inputs.size() + a.random;
  for (std::size_t k = 0; k < total; ++k) {
    const DenseTensor x = k < a.inputs.size()
                              ? load_tensor(a.inputs[k])
                              : gen_synthetic_sparse(rng(), m.input.height, m.input.width, count(rng));
    SparseTrace trace;
    const auto s = run_sparse(m, x, &sparse_ops, &trace);
    const auto d = run_dense_constrained(m, x, &dense_ops);
    ++cases;

    bool ok = s.size() == d.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) {
      const double dev = std::abs(s[i] - d[i]);
      max_dev = std::max(max_dev, dev);
      if (fixed ? dev != 0.0 : !(dev <= 1e-9)) ok = false;
    }
    if (!ok) ++deviations;

    // Retained pixels must match the naive scan, and every sparse layer must
    // keep exactly the reduced hash array up to the first pool.
    const auto scan = naive_active_scan(x, reduce.threshold, reduce.n_max);
    std::vector<Coord> expected = scan.coords;
    expected.resize(reduce.n_max, kSentinel);
    bool same_set = !trace.hash.empty() && trace.hash.front() == expected;
    for (std::size_t i = 1; same_set && i < trace.layer.size(); ++i) {
      if (trace.layer[i] == "sparse_pool") break;
      same_set = trace.hash[i] == trace.hash[i - 1];
    }
    if (!same_set) ++set_mismatches;
  }

  std::uint64_t expected_sparse = 0;
  std::size_t h = m.input.height, w = m.input.width;
  std::uint64_t expected_dense = 0;
  for (const auto& spec : m.layers) {
    if (const auto* conv = std::get_if<SparseConvLayer>(&spec.layer)) {
      const auto cc = conv_cost(reduce.n_max, conv->kernel.c_in, conv->kernel.c_out, h, w, conv->kernel.kernel);
      expected_sparse += cc.sparse_mults * cases;
      expected_dense += cc.dense_mults * cases;
    } else if (const auto* pool = std::get_if<SparsePoolLayer>(&spec.layer)) {
      h = (h + pool->pool - 1) / pool->pool;
      w = (w + pool->pool - 1) / pool->pool;
    }
  }
  const bool counts_ok = sparse_ops.sparse_conv_iterations == expected_sparse &&
                         dense_ops.dense_conv_multiplies == expected_dense;

  std::ostringstream os;
  os << "cases " << cases << " (" << to_string(m.mode) << ")\n";
  os << "max deviation " << format_real(max_dev) << (fixed ? " (bit-exact required)" : " (tolerance 1e-9)") << "\n";
  os << "output mismatches " << deviations << "\n";
  os << "active-set mismatches " << set_mismatches << "\n";
  os << "sparse conv iterations " << sparse_ops.sparse_conv_iterations << " (performed multiplies "
     << sparse_ops.sparse_conv_multiplies << ")\n";
  os << "dense conv multiplies " << dense_ops.dense_conv_multiplies << "\n";
  if (expected_dense > 0) {
    const Ratio r = make_ratio(sparse_ops.sparse_conv_iterations, dense_ops.dense_conv_multiplies);
    os << "sparse/dense multiply ratio " << r.str() << " = " << format_fixed(100.0 * r.value(), 3)
       << "% (conv_cost " << (counts_ok ? "agrees" : "DISAGREES") << ")\n";
  }
  std::cout << os.str();

  if (a.out) {
    ordered_json j;
    j["cases"] = cases;
    j["mode"] = to_string(m.mode);
    j["max_deviation"] = max_dev;
    j["output_mismatches"] = deviations;
    j["active_set_mismatches"] = set_mismatches;
    j["sparse_conv_iterations"] = sparse_ops.sparse_conv_iterations;
    j["sparse_conv_multiplies"] = sparse_ops.sparse_conv_multiplies;
    j["dense_conv_multiplies"] = dense_ops.dense_conv_multiplies;
    j["counts_match_conv_cost"] = counts_ok;
    write_text_file(*a.out, j.dump(2) + "\n");
  }
  if (deviations || set_mismatches || !counts_ok) {
    throw ContractViolation{std::to_string(deviations) + " output and " + std::to_string(set_mismatches) +
                            " active-set mismatches" + (counts_ok ? "" : ", multiply counts disagree")};
  }
}

struct CostArgs {
  std::optional<std::string> model, preset, size, out;
  std::optional<std::size_t> n_max;
  std::size_t height = 63, width = 63, c_in = 1, c_out = 1, kernel = 3;
  std::size_t channels = 2;
  bool no_calibration = false;
};

void cmd_cost(const CostArgs& a) {
  if (a.model && a.preset) throw Error(ErrorCode::kInvalidArgument, "use either --model or --preset");
  std::size_t n_max = a.n_max.value_or(20);
  if (a.size) {
    if (a.n_max) throw Error(ErrorCode::kInvalidArgument, "use either --size or --n-max");
    n_max = n_max_preset(*a.size);
  }

  ModelGraph m;
  if (a.model) {
    m = load_model_file(*a.model);
  } else if (a.preset) {
    PresetOptions opt;
    opt.n_max = n_max;
    opt.kernel = a.kernel;
    opt.conv_channels = a.channels;
    m = gen_random_model(0, *a.preset, opt);
  } else {
    // A single convolution on an H×W×C_in input.
    m.input = {a.height, a.width, a.c_in};
    KernelWeights<double> kw{a.kernel, a.c_in, a.c_out, std::vector<double>(a.kernel * a.kernel * a.c_in * a.c_out),
                             std::vector<double>(a.c_out)};
    m.layers = {{InputReduceLayer{0.0, n_max}, std::nullopt},
                {SparseConvLayer{kw}, std::nullopt},
                {SparseActLayer{Activation::kRelu}, std::nullopt},
                {SparseFlattenLayer{}, std::nullopt}};
  }

  std::optional<CycleCalibration> cal;
  if (!a.no_calibration) cal = calibrate_cycles(reference_ii_points());
  const CostReport r = analyze(m, cal);
  std::cout << "input " << to_string(m.input) << ", n_max " << m.input_reduce().n_max << "\n";
  std::cout << cost_table(r);
  if (a.out) write_text_file(*a.out, cost_json(r));
}

struct SweepArgs {
  std::string n_max_list = "5,10,15,20,25,30";
  std::string sizes = "500,1000,1500,2000,2500,3000";
  std::string kernels = "3,5";
  std::size_t height = 63, width = 63, c_in = 1, c_out = 1;
  std::optional<std::string> out;
};

void cmd_sweep(const SweepArgs& a) {
  const auto n_values = parse_size_list(a.n_max_list, "--n-max-list");
  const auto sizes = parse_size_list(a.sizes, "--sizes");
  const auto kernels = parse_size_list(a.kernels, "--kernels");
  for (std::size_t k : kernels) {
    if (k % 2 == 0) throw Error(ErrorCode::kInvalidArgument, "--kernels must be odd");
  }
  const CycleCalibration cal = calibrate_cycles(reference_ii_points());

  std::ostringstream os;
  ordered_json j;
  os << "reduction tree depth\n";
  os << "  pixels  depth\n";
  ordered_json depth_rows = ordered_json::array();
  for (std::size_t n : sizes) {
    char line[64];
    std::snprintf(line, sizeof(line), "  %6zu  %5zu\n", n, tree_depth(n));
    os << line;
    depth_rows.push_back({{"pixels", n}, {"depth", tree_depth(n)}});
  }
  j["tree_depth"] = std::move(depth_rows);

  os << "conv multiplies on " << a.height << "x" << a.width << ", c_in " << a.c_in << ", c_out " << a.c_out << "\n";
  os << "   n_max";
  for (std::size_t k : kernels) os << "  sparse(K=" << k << ")  dense(K=" << k << ")";
  os << "  est. II (calibrated, not measured)\n";
  ordered_json conv_rows = ordered_json::array();
  for (std::size_t n : n_values) {
    char cell[64];
    std::snprintf(cell, sizeof(cell), "  %6zu", n);
    os << cell;
    ordered_json row;
    row["n_max"] = n;
    ordered_json per_k = ordered_json::array();
    for (std::size_t k : kernels) {
      const ConvCost c = conv_cost(n, a.c_in, a.c_out, a.height, a.width, k);
      std::snprintf(cell, sizeof(cell), "  %11llu  %10llu", static_cast<unsigned long long>(c.sparse_mults),
                    static_cast<unsigned long long>(c.dense_mults));
      os << cell;
      per_k.push_back({{"kernel", k}, {"sparse_mults", c.sparse_mults}, {"dense_mults", c.dense_mults}});
    }
    const std::int64_t ii = estimate_cycles(cal, static_cast<double>(n));
    os << "  " << ii << "\n";
    row["kernels"] = std::move(per_k);
    row["estimated_ii_cycles"] = ii;
    conv_rows.push_back(std::move(row));
  }
  j["conv"] = std::move(conv_rows);
  j["calibration"] = {{"slope", cal.slope}, {"intercept", cal.intercept}, {"max_abs_residual", cal.max_abs_residual}};
  j["cycle_note"] = "calibrated, not measured";
  os << "calibration slope " << format_fixed(cal.slope, 4) << ", intercept " << format_fixed(cal.intercept, 4)
     << ", max residual " << format_fixed(cal.max_abs_residual, 4) << "\n";
  std::cout << os.str();
  if (a.out) write_text_file(*a.out, j.dump(2) + "\n");
}

struct GenWeightsArgs {
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> n_max;
  std::optional<std::string> size, out, format;
  std::string mode = "float";
  std::size_t channels = 2, kernel = 3;
  std::optional<std::size_t> hidden;
  double threshold = 0.0;
};

void cmd_gen_weights(const GenWeightsArgs& a) {
  if (!a.seed) throw Error(ErrorCode::kInvalidArgument, "--seed is required: weights are only drawn from an explicit seed");
  PresetOptions opt;
  if (a.size && a.n_max) throw Error(ErrorCode::kInvalidArgument, "use either --size or --n-max");
  if (a.size) opt.n_max = n_max_preset(*a.size);
  if (a.n_max) opt.n_max = *a.n_max;
  opt.mode = parse_mode(a.mode);
  if (a.format) opt.format = parse_format(*a.format);
  opt.conv_channels = a.channels;
  opt.kernel = a.kernel;
  opt.hidden = a.hidden;
  opt.threshold = a.threshold;
  emit(a.out, save_model(gen_random_model(*a.seed, a.preset, opt)));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse CNN inference, oracles and cost model"};
  app.require_subcommand(1);

  PreprocessArgs pre;
  auto* c_pre = app.add_subcommand("preprocess", "Apply sparsification transforms to a tensor");
  c_pre->add_option("input", pre.in, "Input tensor (.spxt or .csv)")->required();
  c_pre->add_option("output", pre.out, "Output tensor (.spxt)")->required();
  c_pre->add_option("--spec", pre.spec, "Comma-separated steps, e.g. pad_to:64x64,avg_pool:2,threshold:0.4");
  c_pre->add_option("--spec-file", pre.spec_file, "File with one step per line");

  ReduceArgs red;
  auto* c_red = app.add_subcommand("reduce", "Keep up to n_max active pixels of a tensor");
  c_red->add_option("input", red.in, "Input tensor")->required();
  c_red->add_option("--threshold", red.threshold, "Activity threshold on channel 0");
  c_red->add_option("--n-max", red.n_max, "Retained pixel budget")->required()->check(CLI::PositiveNumber);
  c_red->add_option("--out", red.out, "Bundle file (standard output if omitted)");

  InferArgs inf;
  auto* c_inf = app.add_subcommand("infer", "Run a model on one tensor");
  c_inf->add_option("model", inf.model, "Model manifest")->required();
  c_inf->add_option("input", inf.in, "Input tensor")->required();
  c_inf->add_option("--mode", inf.mode, "sparse, dense-constrained or dense");

  CompareArgs cmp;
  auto* c_cmp = app.add_subcommand("compare", "Check the sparse path against the masked dense oracle");
  c_cmp->add_option("model", cmp.model, "Model manifest")->required();
  c_cmp->add_option("inputs", cmp.inputs, "Input tensors");
  c_cmp->add_option("--random", cmp.random, "Number of synthetic inputs");
  c_cmp->add_option("--seed", cmp.seed, "Seed for --random");
  c_cmp->add_option("--out", cmp.out, "JSON report");

  CostArgs cost;
  auto* c_cost = app.add_subcommand("cost", "Operation counts and latency estimate");
  c_cost->add_option("--model", cost.model, "Model manifest");
  c_cost->add_option("--preset", cost.preset, "mnist, neutrino or jet");
  c_cost->add_option("--size", cost.size, "tiny, small, medium or large (sets n_max)");
  c_cost->add_option("--n-max", cost.n_max, "Retained pixel budget (default 20)")->check(CLI::PositiveNumber);
  c_cost->add_option("--height", cost.height, "Input height for a single-conv estimate");
  c_cost->add_option("--width", cost.width, "Input width for a single-conv estimate");
  c_cost->add_option("--c-in", cost.c_in, "Input channels for a single-conv estimate");
  c_cost->add_option("--c-out", cost.c_out, "Output channels for a single-conv estimate");
  c_cost->add_option("--kernel", cost.kernel, "Kernel size");
  c_cost->add_option("--channels", cost.channels, "Conv channels for presets");
  c_cost->add_flag("--no-calibration", cost.no_calibration, "Skip the cycle estimate");
  c_cost->add_option("--out", cost.out, "JSON report");

  SweepArgs sw;
  auto* c_sw = app.add_subcommand("sweep", "Cost tables over n_max and image sizes");
  c_sw->add_option("--n-max-list", sw.n_max_list, "Comma-separated n_max values");
  c_sw->add_option("--sizes", sw.sizes, "Comma-separated pixel counts for the tree depth table");
  c_sw->add_option("--kernels", sw.kernels, "Comma-separated odd kernel sizes");
  c_sw->add_option("--height", sw.height, "Conv input height");
  c_sw->add_option("--width", sw.width, "Conv input width");
  c_sw->add_option("--c-in", sw.c_in, "Conv input channels");
  c_sw->add_option("--c-out", sw.c_out, "Conv output channels");
  c_sw->add_option("--out", sw.out, "JSON report");

  GenWeightsArgs gen;
  auto* c_gen = app.add_subcommand("gen-weights", "Write a preset model with random weights");
  c_gen->add_option("--preset", gen.preset, "mnist, neutrino or jet")->required();
  c_gen->add_option("--seed", gen.seed, "Random seed (required)");
  c_gen->add_option("--n-max", gen.n_max, "Retained pixel budget (default 20)")->check(CLI::PositiveNumber);
  c_gen->add_option("--size", gen.size, "tiny, small, medium or large");
  c_gen->add_option("--mode", gen.mode, "float or fixed");
  c_gen->add_option("--format", gen.format, "Fixed-point format total:int (default 16:6)");
  c_gen->add_option("--channels", gen.channels, "Conv channels");
  c_gen->add_option("--kernel", gen.kernel, "Kernel size");
  c_gen->add_option("--hidden", gen.hidden, "Hidden dense width");
  c_gen->add_option("--threshold", gen.threshold, "Input activity threshold");
  c_gen->add_option("--out", gen.out, "Manifest path (standard output if omitted)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_pre->parsed()) cmd_preprocess(pre);
    if (c_red->parsed()) cmd_reduce(red);
    if (c_inf->parsed()) cmd_infer(inf);
    if (c_cmp->parsed()) cmd_compare(cmp);
    if (c_cost->parsed()) cmd_cost(cost);
    if (c_sw->parsed()) cmd_sweep(sw);
    if (c_gen->parsed()) cmd_gen_weights(gen);
  } catch (const ContractViolation& v) {
    std::cerr << "violation: " << v.what << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
