#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "scnn/fixed_point.hpp"
#include "scnn/kernel.hpp"
#include "scnn/numeric.hpp"
#include "scnn/sparse.hpp"
#include "scnn/tensor.hpp"

namespace scnn {

enum class ArithmeticMode { kFloat, kFixed };

struct InputReduceLayer {
  double threshold = 0.0;
  std::size_t n_max = 1;
  friend bool operator==(const InputReduceLayer&, const InputReduceLayer&) = default;
};
struct SparseConvLayer {
  KernelWeights<double> kernel;
  friend bool operator==(const SparseConvLayer&, const SparseConvLayer&) = default;
};
struct SparseActLayer {
  Activation kind = Activation::kRelu;
  friend bool operator==(const SparseActLayer&, const SparseActLayer&) = default;
};
struct SparsePoolLayer {
  std::size_t pool = 2;
  friend bool operator==(const SparsePoolLayer&, const SparsePoolLayer&) = default;
};
struct SparseFlattenLayer {
  friend bool operator==(const SparseFlattenLayer&, const SparseFlattenLayer&) = default;
};
struct DenseLayer {
  DenseParams<double> params;
  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};
struct DenseActLayer {
  Activation kind = Activation::kRelu;
  friend bool operator==(const DenseActLayer&, const DenseActLayer&) = default;
};

using Layer = std::variant<InputReduceLayer, SparseConvLayer, SparseActLayer, SparsePoolLayer, SparseFlattenLayer,
                           DenseLayer, DenseActLayer>;

struct LayerSpec {
  Layer layer;
  // Fixed mode only: format of this layer's parameters and outputs.
  std::optional<FixedFormat> format;
  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Sequential sparse CNN: InputReduce first, sparse layers, SparseFlatten,
/// then the dense head. Parameters are kept in double; fixed-point runs
/// quantize them once, at compile time, to each layer's format.
struct ModelGraph {
  Shape input{};
  ArithmeticMode mode = ArithmeticMode::kFloat;
  FixedFormat format{16, 6};
  std::vector<LayerSpec> layers;

  /// Shape-checks the layer sequence; throws kDimensionInconsistency (or
  /// kInvalidArgument for misplaced layers) describing the first offending
  /// layer.
  void validate() const;

  FixedFormat layer_format(std::size_t i) const { return layers.at(i).format.value_or(format); }
  const InputReduceLayer& input_reduce() const;
  std::size_t output_size() const;
  std::size_t parameter_count() const;

  friend bool operator==(const ModelGraph&, const ModelGraph&) = default;
};

std::string layer_kind(const Layer& layer);
std::string to_string(ArithmeticMode mode);
ArithmeticMode parse_mode(const std::string& text);

/// Per-layer record of the sparse path, for sparsity checks.
struct SparseTrace {
  std::vector<std::string> layer;
  std::vector<std::size_t> active_count;
  std::vector<std::vector<Coord>> hash;
};

/// Sparse pipeline: reduce → sparse layers → flatten → dense head. Returns
/// logits as reals (dequantized in fixed mode).
std::vector<double> run_sparse(const ModelGraph& m, const DenseTensor& x, OpCounters* counters = nullptr,
                               SparseTrace* trace = nullptr);

/// Dense emulation of the sparse semantics: the retained set comes from the
/// naive row-major scan, and every layer runs densely on tensors masked to
/// that set (pooled along with the features).
std::vector<double> run_dense_constrained(const ModelGraph& m, const DenseTensor& x, OpCounters* counters = nullptr);

/// Unconstrained standard CNN over the full image (no input reduction).
std::vector<double> run_dense(const ModelGraph& m, const DenseTensor& x, OpCounters* counters = nullptr);

/// Index of the predicted class; a single logit is read as a binary
/// classifier (class 1 iff logit > 0).
std::size_t predicted_class(const std::vector<double>& logits);

// Manifest (JSON syntax) serialisation. Errors are distinct per cause:
// kMalformedManifest, kMissingField, kUnknownLayerKind,
// kDimensionInconsistency.
ModelGraph load_model(const std::string& manifest_text);
std::string save_model(const ModelGraph& m);
ModelGraph load_model_file(const std::string& path);
void save_model_file(const ModelGraph& m, const std::string& path);

struct PresetOptions {
  std::size_t n_max = 20;
  std::size_t conv_channels = 2;
  std::size_t kernel = 3;
  std::optional<std::size_t> hidden;  // preset default when unset
  double threshold = 0.0;
  ArithmeticMode mode = ArithmeticMode::kFloat;
  FixedFormat format{16, 6};
};

struct PresetInfo {
  std::string name;
  Shape input;
  std::size_t pool;
  std::size_t classes;
  std::size_t hidden;
};

const std::vector<PresetInfo>& presets();
const PresetInfo& find_preset(const std::string& name);

/// Two conv blocks (conv → ReLU → average pool) and a 2-layer MLP, with
/// weights drawn uniformly from [−0.5, 0.5] by a seeded generator.
ModelGraph gen_random_model(std::uint64_t seed, const std::string& preset, const PresetOptions& options = {});

/// n_max presets tiny/small/medium/large.
std::size_t n_max_preset(const std::string& size_name);

}  // namespace scnn
