#include "scnn/model.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>
#include <type_traits>

#include "scnn/dense.hpp"

namespace scnn {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

[[noreturn]] void inconsistent(std::size_t layer, const std::string& what) {
  throw Error(ErrorCode::kDimensionInconsistency, "layer " + std::to_string(layer) + ": " + what);
}

[[noreturn]] void misplaced(std::size_t layer, const std::string& what) {
  throw Error(ErrorCode::kInvalidArgument, "layer " + std::to_string(layer) + ": " + what);
}

}  // namespace

std::string to_string(ArithmeticMode mode) { return mode == ArithmeticMode::kFixed ? "fixed" : "float"; }

ArithmeticMode parse_mode(const std::string& text) {
  if (text == "float") return ArithmeticMode::kFloat;
  if (text == "fixed") return ArithmeticMode::kFixed;
  throw Error(ErrorCode::kUnknownMode, "arithmetic mode '" + text + "' (expected float or fixed)");
}

std::string layer_kind(const Layer& layer) {
  return std::visit(Overloaded{
                        [](const InputReduceLayer&) { return std::string("input_reduce"); },
                        [](const SparseConvLayer&) { return std::string("sparse_conv"); },
                        [](const SparseActLayer&) { return std::string("sparse_act"); },
                        [](const SparsePoolLayer&) { return std::string("sparse_pool"); },
                        [](const SparseFlattenLayer&) { return std::string("sparse_flatten"); },
                        [](const DenseLayer&) { return std::string("dense"); },
                        [](const DenseActLayer&) { return std::string("dense_act"); },
                    },
                    layer);
}

void ModelGraph::validate() const {
  if (input.height == 0 || input.width == 0 || input.channels == 0) {
    throw Error(ErrorCode::kDimensionInconsistency, "input dims must be positive, got " + to_string(input));
  }
  if (!format.valid()) throw Error(ErrorCode::kInvalidArgument, "model fixed format is invalid");
  if (layers.empty() || !std::holds_alternative<InputReduceLayer>(layers.front().layer)) {
    misplaced(0, "a sparse model must start with input_reduce");
  }

  enum class Stage { kSparse, kFlat } stage = Stage::kSparse;
  std::size_t h = input.height, w = input.width, c = input.channels, flat = 0;

  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& spec = layers[i];
    if (spec.format && !spec.format->valid()) misplaced(i, "invalid fixed format override");
    std::visit(Overloaded{
                   [&](const InputReduceLayer& l) {
                     if (i != 0) misplaced(i, "input_reduce may only appear first");
                     if (l.n_max == 0) inconsistent(i, "n_max must be >= 1");
                   },
                   [&](const SparseConvLayer& l) {
                     if (stage != Stage::kSparse) misplaced(i, "sparse_conv after flatten");
                     try {
                       l.kernel.validate();
                     } catch (const Error& e) {
                       inconsistent(i, e.what());
                     }
                     if (l.kernel.c_in != c) {
                       inconsistent(i, "sparse_conv expects " + std::to_string(l.kernel.c_in) +
                                           " input channels, previous layer gives " + std::to_string(c));
                     }
                     c = l.kernel.c_out;
                   },
                   [&](const SparseActLayer&) {
                     if (stage != Stage::kSparse) misplaced(i, "sparse_act after flatten");
                   },
                   [&](const SparsePoolLayer& l) {
                     if (stage != Stage::kSparse) misplaced(i, "sparse_pool after flatten");
                     if (l.pool == 0) inconsistent(i, "pool size must be >= 1");
                     h = (h + l.pool - 1) / l.pool;
                     w = (w + l.pool - 1) / l.pool;
                   },
                   [&](const SparseFlattenLayer&) {
                     if (stage != Stage::kSparse) misplaced(i, "second sparse_flatten");
                     stage = Stage::kFlat;
                     flat = h * w * c;
                   },
                   [&](const DenseLayer& l) {
                     if (stage != Stage::kFlat) misplaced(i, "dense layer before sparse_flatten");
                     try {
                       l.params.validate();
                     } catch (const Error& e) {
                       inconsistent(i, e.what());
                     }
                     if (l.params.in_dim != flat) {
                       inconsistent(i, "dense expects " + std::to_string(l.params.in_dim) +
                                           " inputs, previous layer gives " + std::to_string(flat));
                     }
                     flat = l.params.out_dim;
                   },
                   [&](const DenseActLayer&) {
                     if (stage != Stage::kFlat) misplaced(i, "dense_act before sparse_flatten");
                   },
               },
               spec.layer);
  }
  if (stage != Stage::kFlat) misplaced(layers.size(), "model has no sparse_flatten");
}

const InputReduceLayer& ModelGraph::input_reduce() const {
  if (layers.empty() || !std::holds_alternative<InputReduceLayer>(layers.front().layer)) {
    throw Error(ErrorCode::kInvalidArgument, "model has no leading input_reduce");
  }
  return std::get<InputReduceLayer>(layers.front().layer);
}

std::size_t ModelGraph::output_size() const {
  std::size_t h = input.height, w = input.width, c = input.channels, flat = input.size();
  for (const auto& spec : layers) {
    std::visit(Overloaded{
                   [&](const SparseConvLayer& l) { c = l.kernel.c_out; },
                   [&](const SparsePoolLayer& l) {
                     h = (h + l.pool - 1) / l.pool;
                     w = (w + l.pool - 1) / l.pool;
                   },
                   [&](const SparseFlattenLayer&) { flat = h * w * c; },
                   [&](const DenseLayer& l) { flat = l.params.out_dim; },
                   [](const auto&) {},
               },
               spec.layer);
  }
  return flat;
}

std::size_t ModelGraph::parameter_count() const {
  std::size_t n = 0;
  for (const auto& spec : layers) {
    if (const auto* conv = std::get_if<SparseConvLayer>(&spec.layer)) {
      n += conv->kernel.weights.size() + conv->kernel.bias.size();
    } else if (const auto* dense = std::get_if<DenseLayer>(&spec.layer)) {
      n += dense->params.weights.size() + dense->params.bias.size();
    }
  }
  return n;
}

// ----------------------------------------------------------------------------
// Execution

namespace {

/// Formats threaded through a run. Layers with parameters (and the input)
/// use their override or the model format; parameter-free layers inherit the
/// incoming format unless overridden.
template <typename T>
struct FormatTracker {
  const ModelGraph& m;
  FixedFormat current;

  explicit FormatTracker(const ModelGraph& model) : m(model), current(model.layer_format(0)) {}

  FormatOf<T> for_layer(std::size_t i) {
    const LayerSpec& spec = m.layers[i];
    const bool has_params =
        std::holds_alternative<SparseConvLayer>(spec.layer) || std::holds_alternative<DenseLayer>(spec.layer);
    current = spec.format.value_or(has_params ? m.format : current);
    if constexpr (std::is_same_v<T, FixedValue>) {
      return current;
    } else {
      return {};
    }
  }
};

template <typename T>
Tensor<T> to_scalar(const DenseTensor& x, FormatOf<T> format) {
  return transform<T>(x, [format](double v) { return Numeric<T>::from_real(v, format); });
}

template <typename T>
std::vector<T> convert_all(const std::vector<T>& v, FormatOf<T> format) {
  std::vector<T> out;
  out.reserve(v.size());
  for (const T& x : v) out.push_back(Numeric<T>::convert(x, format));
  return out;
}

template <typename T>
Tensor<T> convert_all(const Tensor<T>& t, FormatOf<T> format) {
  return transform<T>(t, [format](const T& v) { return Numeric<T>::convert(v, format); });
}

void check_input(const ModelGraph& m, const DenseTensor& x) {
  if (x.shape() != m.input) {
    throw Error(ErrorCode::kShapeMismatch,
                "input tensor " + to_string(x.shape()) + " does not match model input " + to_string(m.input));
  }
}

template <typename T>
std::vector<double> sparse_path(const ModelGraph& m, const DenseTensor& x, OpCounters* counters,
                                SparseTrace* trace) {
  FormatTracker<T> formats(m);
  const Tensor<T> input = to_scalar<T>(x, formats.for_layer(0));
  SparseBundle<T> bundle;
  std::vector<T> flat;

  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    const FormatOf<T> f = formats.for_layer(i);
    bool sparse_stage = true;
    std::visit(Overloaded{
                   [&](const InputReduceLayer& l) { bundle = sparse_input_reduce(input, {l.threshold, l.n_max}); },
                   [&](const SparseConvLayer& l) {
                     bundle = sparse_conv(bundle, convert<T>(l.kernel, f), f, counters);
                   },
                   [&](const SparseActLayer& l) {
                     bundle = sparse_activation(bundle, l.kind, counters);
                     bundle.feat = convert_all(bundle.feat, f);
                   },
                   [&](const SparsePoolLayer& l) { bundle = sparse_avg_pool(bundle, l.pool, f); },
                   [&](const SparseFlattenLayer&) {
                     flat = sparse_flatten(bundle, f);
                     sparse_stage = false;
                   },
                   [&](const DenseLayer& l) {
                     flat = fully_connected<T>(flat, convert<T>(l.params, f), f, counters);
                     sparse_stage = false;
                   },
                   [&](const DenseActLayer& l) {
                     flat = convert_all(activate(flat, l.kind), f);
                     sparse_stage = false;
                   },
               },
               m.layers[i].layer);
    if (trace && sparse_stage) {
      trace->layer.push_back(layer_kind(m.layers[i].layer));
      trace->active_count.push_back(bundle.active_count());
      trace->hash.push_back(bundle.hash);
    }
  }
  return to_real(flat);
}

template <typename T>
std::vector<double> constrained_path(const ModelGraph& m, const DenseTensor& x, OpCounters* counters) {
  FormatTracker<T> formats(m);
  const Tensor<T> input = to_scalar<T>(x, formats.for_layer(0));
  Tensor<T> t;
  ActiveSet active;
  std::vector<T> flat;

  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    const FormatOf<T> f = formats.for_layer(i);
    std::visit(Overloaded{
                   [&](const InputReduceLayer& l) {
                     const auto scan = naive_active_scan(input, l.threshold, l.n_max);
                     active = ActiveSet::from_coords(input.rows(), input.cols(), scan.coords);
                     t = mask(input, active);
                   },
                   [&](const SparseConvLayer& l) {
                     t = masked_conv_oracle(t, active, convert<T>(l.kernel, f), f, counters);
                   },
                   [&](const SparseActLayer& l) { t = convert_all(mask(activate(t, l.kind), active), f); },
                   [&](const SparsePoolLayer& l) {
                     t = avg_pool2d(t, l.pool, f);
                     active = active.pooled(l.pool);
                     t = mask(t, active);
                   },
                   [&](const SparseFlattenLayer&) { flat = convert_all(flatten(t), f); },
                   [&](const DenseLayer& l) { flat = fully_connected<T>(flat, convert<T>(l.params, f), f, counters); },
                   [&](const DenseActLayer& l) { flat = convert_all(activate(flat, l.kind), f); },
               },
               m.layers[i].layer);
  }
  return to_real(flat);
}

template <typename T>
std::vector<double> dense_path(const ModelGraph& m, const DenseTensor& x, OpCounters* counters) {
  FormatTracker<T> formats(m);
  Tensor<T> t = to_scalar<T>(x, formats.for_layer(0));
  std::vector<T> flat;

  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    const FormatOf<T> f = formats.for_layer(i);
    std::visit(Overloaded{
                   [&](const InputReduceLayer&) {},
                   [&](const SparseConvLayer& l) { t = conv2d_same(t, convert<T>(l.kernel, f), f, counters); },
                   [&](const SparseActLayer& l) { t = convert_all(activate(t, l.kind), f); },
                   [&](const SparsePoolLayer& l) { t = avg_pool2d(t, l.pool, f); },
                   [&](const SparseFlattenLayer&) { flat = convert_all(flatten(t), f); },
                   [&](const DenseLayer& l) { flat = fully_connected<T>(flat, convert<T>(l.params, f), f, counters); },
                   [&](const DenseActLayer& l) { flat = convert_all(activate(flat, l.kind), f); },
               },
               m.layers[i].layer);
  }
  return to_real(flat);
}

}  // namespace

std::vector<double> run_sparse(const ModelGraph& m, const DenseTensor& x, OpCounters* counters, SparseTrace* trace) {
  m.validate();
  check_input(m, x);
  return m.mode == ArithmeticMode::kFixed ? sparse_path<FixedValue>(m, x, counters, trace)
                                          : sparse_path<double>(m, x, counters, trace);
}

std::vector<double> run_dense_constrained(const ModelGraph& m, const DenseTensor& x, OpCounters* counters) {
  m.validate();
  check_input(m, x);
  return m.mode == ArithmeticMode::kFixed ? constrained_path<FixedValue>(m, x, counters)
                                          : constrained_path<double>(m, x, counters);
}

std::vector<double> run_dense(const ModelGraph& m, const DenseTensor& x, OpCounters* counters) {
  m.validate();
  check_input(m, x);
  return m.mode == ArithmeticMode::kFixed ? dense_path<FixedValue>(m, x, counters)
                                          : dense_path<double>(m, x, counters);
}

std::size_t predicted_class(const std::vector<double>& logits) {
  if (logits.empty()) throw Error(ErrorCode::kInvalidArgument, "no logits");
  if (logits.size() == 1) return logits[0] > 0.0 ? 1 : 0;
  return static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

// ----------------------------------------------------------------------------
// Presets

const std::vector<PresetInfo>& presets() {
  static const std::vector<PresetInfo> kPresets = {
      {"mnist", {48, 48, 1}, 2, 10, 12},
      {"neutrino", {63, 63, 1}, 3, 1, 36},
      {"jet", {56, 56, 1}, 2, 5, 10},
  };
  return kPresets;
}

const PresetInfo& find_preset(const std::string& name) {
  for (const auto& p : presets()) {
    if (p.name == name) return p;
  }
  throw Error(ErrorCode::kUnknownPreset, "'" + name + "' (known: mnist, neutrino, jet)");
}

std::size_t n_max_preset(const std::string& size_name) {
  if (size_name == "tiny") return 8;
  if (size_name == "small") return 12;
  if (size_name == "medium") return 16;
  if (size_name == "large") return 20;
  throw Error(ErrorCode::kUnknownPreset, "size '" + size_name + "' (known: tiny, small, medium, large)");
}

ModelGraph gen_random_model(std::uint64_t seed, const std::string& preset, const PresetOptions& options) {
  const PresetInfo& info = find_preset(preset);
  if (options.kernel % 2 == 0 || options.conv_channels == 0 || options.n_max == 0) {
    throw Error(ErrorCode::kInvalidArgument, "preset options need odd kernel and positive channels / n_max");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-0.5, 0.5);
  auto draw = [&](std::size_t n) {
    std::vector<double> v(n);
    for (double& x : v) x = dist(rng);
    return v;
  };
  auto conv = [&](std::size_t c_in, std::size_t c_out) {
    KernelWeights<double> kw{options.kernel, c_in, c_out, {}, {}};
    kw.weights = draw(kw.positions() * c_in * c_out);
    kw.bias = draw(c_out);
    return LayerSpec{SparseConvLayer{kw}, std::nullopt};
  };
  auto dense = [&](std::size_t in, std::size_t out) {
    DenseParams<double> p{in, out, {}, {}};
    p.weights = draw(in * out);
    p.bias = draw(out);
    return LayerSpec{DenseLayer{p}, std::nullopt};
  };

  const std::size_t ch = options.conv_channels;
  const std::size_t hidden = options.hidden.value_or(info.hidden);
  const std::size_t grid_h = (((info.input.height + info.pool - 1) / info.pool) + info.pool - 1) / info.pool;
  const std::size_t grid_w = (((info.input.width + info.pool - 1) / info.pool) + info.pool - 1) / info.pool;

  ModelGraph m;
  m.input = info.input;
  m.mode = options.mode;
  m.format = options.format;
  m.layers.push_back({InputReduceLayer{options.threshold, options.n_max}, std::nullopt});
  m.layers.push_back(conv(info.input.channels, ch));
  m.layers.push_back({SparseActLayer{Activation::kRelu}, std::nullopt});
  m.layers.push_back({SparsePoolLayer{info.pool}, std::nullopt});
  m.layers.push_back(conv(ch, ch));
  m.layers.push_back({SparseActLayer{Activation::kRelu}, std::nullopt});
  m.layers.push_back({SparsePoolLayer{info.pool}, std::nullopt});
  m.layers.push_back({SparseFlattenLayer{}, std::nullopt});
  m.layers.push_back(dense(grid_h * grid_w * ch, hidden));
  m.layers.push_back({DenseActLayer{Activation::kRelu}, std::nullopt});
  m.layers.push_back(dense(hidden, info.classes));
  m.validate();
  return m;
}

// ----------------------------------------------------------------------------
// Files

ModelGraph load_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_model(ss.str());
}

void save_model_file(const ModelGraph& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out << save_model(m);
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path);
}

}  // namespace scnn
