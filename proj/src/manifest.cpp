// Model manifest: JSON text, schema version 1. Schema described in README.md.

#include <string>

#include <json.hpp>

#include "scnn/model.hpp"

namespace scnn {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr int kManifestVersion = 1;

[[noreturn]] void malformed(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::kMalformedManifest, where + ": " + what);
}

const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) malformed(where, "expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) throw Error(ErrorCode::kMissingField, where + ": missing '" + key + "'");
  return *it;
}

std::size_t get_size(const json& j, const std::string& where) {
  if (!j.is_number_unsigned()) malformed(where, "expected a non-negative integer");
  return j.get<std::size_t>();
}

int get_int(const json& j, const std::string& where) {
  if (!j.is_number_integer()) malformed(where, "expected an integer");
  return j.get<int>();
}

double get_real(const json& j, const std::string& where) {
  if (!j.is_number()) malformed(where, "expected a number");
  return j.get<double>();
}

std::string get_string(const json& j, const std::string& where) {
  if (!j.is_string()) malformed(where, "expected a string");
  return j.get<std::string>();
}

/// Flattens a nested array of numbers, checking every level against `dims`.
void flatten_nested(const json& j, const std::vector<std::size_t>& dims, std::size_t level, std::vector<double>& out,
                    const std::string& where) {
  if (level == dims.size()) {
    out.push_back(get_real(j, where));
    return;
  }
  if (!j.is_array()) malformed(where, "expected a nested array of depth " + std::to_string(dims.size()));
  if (j.size() != dims[level]) {
    throw Error(ErrorCode::kDimensionInconsistency, where + ": level " + std::to_string(level) + " has " +
                                                        std::to_string(j.size()) + " entries, expected " +
                                                        std::to_string(dims[level]));
  }
  for (const auto& e : j) flatten_nested(e, dims, level + 1, out, where);
}

std::vector<double> read_nested(const json& j, const std::vector<std::size_t>& dims, const std::string& where) {
  std::vector<double> out;
  flatten_nested(j, dims, 0, out, where);
  return out;
}

FixedFormat read_format(const json& j, const std::string& where) {
  const int total = get_int(require(j, "total", where), where + ".total");
  const int integer = get_int(require(j, "integer", where), where + ".integer");
  try {
    return make_format(total, integer);
  } catch (const Error& e) {
    malformed(where, e.what());
  }
}

Activation read_activation(const json& j, const std::string& where) {
  const std::string name = get_string(j, where);
  if (name == "relu") return Activation::kRelu;
  if (name == "linear") return Activation::kLinear;
  malformed(where, "unknown activation '" + name + "'");
}

const char* activation_name(Activation a) { return a == Activation::kRelu ? "relu" : "linear"; }

LayerSpec read_layer(const json& j, std::size_t index) {
  const std::string where = "layers[" + std::to_string(index) + "]";
  const std::string kind = get_string(require(j, "kind", where), where + ".kind");
  LayerSpec spec;
  if (j.contains("format")) spec.format = read_format(j.at("format"), where + ".format");

  if (kind == "input_reduce") {
    spec.layer = InputReduceLayer{get_real(require(j, "threshold", where), where + ".threshold"),
                                  get_size(require(j, "n_max", where), where + ".n_max")};
  } else if (kind == "sparse_conv") {
    KernelWeights<double> kw;
    kw.kernel = get_size(require(j, "kernel", where), where + ".kernel");
    kw.c_in = get_size(require(j, "c_in", where), where + ".c_in");
    kw.c_out = get_size(require(j, "c_out", where), where + ".c_out");
    kw.weights = read_nested(require(j, "weights", where), {kw.positions(), kw.c_out, kw.c_in}, where + ".weights");
    kw.bias = read_nested(require(j, "bias", where), {kw.c_out}, where + ".bias");
    spec.layer = SparseConvLayer{std::move(kw)};
  } else if (kind == "sparse_act") {
    spec.layer = SparseActLayer{read_activation(require(j, "activation", where), where + ".activation")};
  } else if (kind == "sparse_pool") {
    spec.layer = SparsePoolLayer{get_size(require(j, "pool", where), where + ".pool")};
  } else if (kind == "sparse_flatten") {
    spec.layer = SparseFlattenLayer{};
  } else if (kind == "dense") {
    DenseParams<double> p;
    p.in_dim = get_size(require(j, "in", where), where + ".in");
    p.out_dim = get_size(require(j, "out", where), where + ".out");
    p.weights = read_nested(require(j, "weights", where), {p.out_dim, p.in_dim}, where + ".weights");
    p.bias = read_nested(require(j, "bias", where), {p.out_dim}, where + ".bias");
    spec.layer = DenseLayer{std::move(p)};
  } else if (kind == "dense_act") {
    spec.layer = DenseActLayer{read_activation(require(j, "activation", where), where + ".activation")};
  } else {
    throw Error(ErrorCode::kUnknownLayerKind, where + ": '" + kind + "'");
  }
  return spec;
}

ordered_json write_format(const FixedFormat& f) {
  ordered_json j;
  j["total"] = f.total_bits;
  j["integer"] = f.integer_bits;
  return j;
}

ordered_json write_layer(const LayerSpec& spec) {
  ordered_json j;
  j["kind"] = layer_kind(spec.layer);
  if (const auto* l = std::get_if<InputReduceLayer>(&spec.layer)) {
    j["threshold"] = l->threshold;
    j["n_max"] = l->n_max;
  } else if (const auto* l = std::get_if<SparseConvLayer>(&spec.layer)) {
    const auto& kw = l->kernel;
    j["kernel"] = kw.kernel;
    j["c_in"] = kw.c_in;
    j["c_out"] = kw.c_out;
    ordered_json w = ordered_json::array();
    for (std::size_t pos = 0; pos < kw.positions(); ++pos) {
      ordered_json per_out = ordered_json::array();
      for (std::size_t co = 0; co < kw.c_out; ++co) {
        ordered_json per_in = ordered_json::array();
        for (std::size_t ci = 0; ci < kw.c_in; ++ci) per_in.push_back(kw.weights[kw.index(pos, co, ci)]);
        per_out.push_back(std::move(per_in));
      }
      w.push_back(std::move(per_out));
    }
    j["weights"] = std::move(w);
    j["bias"] = kw.bias;
  } else if (const auto* l = std::get_if<SparseActLayer>(&spec.layer)) {
    j["activation"] = activation_name(l->kind);
  } else if (const auto* l = std::get_if<SparsePoolLayer>(&spec.layer)) {
    j["pool"] = l->pool;
  } else if (const auto* l = std::get_if<DenseLayer>(&spec.layer)) {
    const auto& p = l->params;
    j["in"] = p.in_dim;
    j["out"] = p.out_dim;
    ordered_json w = ordered_json::array();
    for (std::size_t o = 0; o < p.out_dim; ++o) {
      w.push_back(std::vector<double>(p.weights.begin() + static_cast<std::ptrdiff_t>(o * p.in_dim),
                                      p.weights.begin() + static_cast<std::ptrdiff_t>((o + 1) * p.in_dim)));
    }
    j["weights"] = std::move(w);
    j["bias"] = p.bias;
  } else if (const auto* l = std::get_if<DenseActLayer>(&spec.layer)) {
    j["activation"] = activation_name(l->kind);
  }
  if (spec.format) j["format"] = write_format(*spec.format);
  return j;
}

}  // namespace

ModelGraph load_model(const std::string& manifest_text) {
  json root;
  try {
    root = json::parse(manifest_text);
  } catch (const json::parse_error& e) {
    malformed("manifest", e.what());
  }
  if (!root.is_object()) malformed("manifest", "top level must be an object");

  const int version = get_int(require(root, "version", "manifest"), "version");
  if (version != kManifestVersion) {
    throw Error(ErrorCode::kBadVersion, "manifest version " + std::to_string(version));
  }

  ModelGraph m;
  const json& input = require(root, "input", "manifest");
  if (!input.is_array() || input.size() != 3) malformed("input", "expected [H, W, C]");
  m.input = {get_size(input[0], "input[0]"), get_size(input[1], "input[1]"), get_size(input[2], "input[2]")};
  try {
    m.mode = parse_mode(get_string(require(root, "mode", "manifest"), "mode"));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kUnknownMode) throw;
    malformed("mode", e.what());
  }
  m.format = read_format(require(root, "format", "manifest"), "format");

  const json& layers = require(root, "layers", "manifest");
  if (!layers.is_array()) malformed("layers", "expected an array");
  for (std::size_t i = 0; i < layers.size(); ++i) m.layers.push_back(read_layer(layers[i], i));

  m.validate();
  return m;
}

std::string save_model(const ModelGraph& m) {
  ordered_json root;
  root["version"] = kManifestVersion;
  root["input"] = {m.input.height, m.input.width, m.input.channels};
  root["mode"] = to_string(m.mode);
  root["format"] = write_format(m.format);
  ordered_json layers = ordered_json::array();
  for (const auto& spec : m.layers) layers.push_back(write_layer(spec));
  root["layers"] = std::move(layers);
  return root.dump(1) + "\n";
}

}  // namespace scnn
