#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <json.hpp>

#include "scnn/dense.hpp"
#include "scnn/model.hpp"
#include "scnn/preprocess.hpp"
#include "support.hpp"

using namespace scnn;

namespace {

ErrorCode load_error(const std::string& text) {
  try {
    load_model(text);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("manifest loaded unexpectedly");
  return ErrorCode::kIo;
}

ModelGraph tiny_model() {
  ModelGraph m;
  m.input = {3, 3, 1};
  m.layers = {{InputReduceLayer{0.0, 4}, std::nullopt}, {SparseFlattenLayer{}, std::nullopt}};
  return m;
}

}  // namespace

TEST_CASE("reduce then flatten reproduces the thresholded image") {
  const DenseTensor x(Shape{3, 3, 1}, {0, 5, 0, -1, 0, 7, 2, 0, 0});
  const auto out = run_sparse(tiny_model(), x);
  CHECK(out == std::vector<double>{0, 5, 0, 0, 0, 7, 2, 0, 0});
}

TEST_CASE("weight index formula") {
  KernelWeights<double> kw{3, 1, 2, std::vector<double>(18), {0, 0}};
  CHECK(kw.index(4, 1, 0) == 9);
}

TEST_CASE("presets") {
  CHECK(find_preset("neutrino").input == Shape{63, 63, 1});
  CHECK(find_preset("mnist").input == Shape{48, 48, 1});
  CHECK(find_preset("jet").input == Shape{56, 56, 1});
  CHECK_THROWS_AS(find_preset("cifar"), Error);
  CHECK(n_max_preset("large") == 20);
  CHECK(n_max_preset("tiny") == 8);

  const ModelGraph a = gen_random_model(42, "neutrino");
  const ModelGraph b = gen_random_model(42, "neutrino");
  CHECK(save_model(a) == save_model(b));
  CHECK(save_model(a) != save_model(gen_random_model(43, "neutrino")));
  CHECK(a.output_size() == 1);
  CHECK(gen_random_model(1, "mnist").output_size() == 10);
  CHECK(gen_random_model(1, "jet").output_size() == 5);
  CHECK_NOTHROW(a.validate());
}

TEST_CASE("manifest round trip") {
  for (const char* preset : {"mnist", "neutrino", "jet"}) {
    PresetOptions opt;
    opt.mode = ArithmeticMode::kFixed;
    opt.format = FixedFormat{8, 3};
    opt.kernel = 5;
    ModelGraph m = gen_random_model(9, preset, opt);
    m.layers[1].format = FixedFormat{16, 6};
    const std::string text = save_model(m);
    const ModelGraph back = load_model(text);
    CHECK(back == m);
    CHECK(save_model(back) == text);
  }
}

TEST_CASE("manifest strictness") {
  const std::string good = save_model(gen_random_model(3, "jet"));
  auto j = nlohmann::json::parse(good);

  auto missing_bias = j;
  for (auto& layer : missing_bias["layers"]) {
    if (layer["kind"] == "sparse_conv") {
      layer.erase("bias");
      break;
    }
  }
  CHECK(load_error(missing_bias.dump()) == ErrorCode::kMissingField);

  auto unknown = j;
  unknown["layers"][2]["kind"] = "deconv";
  CHECK(load_error(unknown.dump()) == ErrorCode::kUnknownLayerKind);

  auto short_weights = j;
  for (auto& layer : short_weights["layers"]) {
    if (layer["kind"] == "dense") {
      layer["weights"][0].erase(0);
      break;
    }
  }
  CHECK(load_error(short_weights.dump()) == ErrorCode::kDimensionInconsistency);

  auto version = j;
  version["version"] = 2;
  CHECK(load_error(version.dump()) == ErrorCode::kBadVersion);

  CHECK(load_error("{not json") == ErrorCode::kMalformedManifest);
  CHECK(load_error(good.substr(0, good.size() / 2)) == ErrorCode::kMalformedManifest);
}

TEST_CASE("graph validation") {
  ModelGraph m = tiny_model();
  m.layers.push_back({DenseLayer{{8, 1, std::vector<double>(8), {0}}}, std::nullopt});
  CHECK_THROWS_AS(m.validate(), Error);
  m.layers.back() = {DenseLayer{{9, 1, std::vector<double>(9), {0}}}, std::nullopt};
  CHECK_NOTHROW(m.validate());
  CHECK(m.parameter_count() == 10);

  ModelGraph no_reduce = m;
  no_reduce.layers.erase(no_reduce.layers.begin());
  CHECK_THROWS_AS(no_reduce.validate(), Error);

  CHECK_THROWS_AS(run_sparse(m, DenseTensor(4, 3, 1)), Error);
}

TEST_CASE("all-zero input leaves only the biases") {
  const ModelGraph m = gen_random_model(5, "mnist");
  const DenseTensor zero(48, 48, 1);
  const auto logits = run_sparse(m, zero);
  // Zero input: no active pixels, flatten is all zero, the head sees bias only.
  const DenseParams<double>* d1 = nullptr;
  const DenseParams<double>* d2 = nullptr;
  for (const auto& spec : m.layers) {
    if (const auto* d = std::get_if<DenseLayer>(&spec.layer)) (d1 ? d2 : d1) = &d->params;
  }
  REQUIRE(d1 != nullptr);
  REQUIRE(d2 != nullptr);
  std::vector<double> hidden(d1->bias.size());
  for (std::size_t k = 0; k < hidden.size(); ++k) hidden[k] = std::max(d1->bias[k], 0.0);
  for (std::size_t o = 0; o < d2->out_dim; ++o) {
    double s = d2->bias[o];
    for (std::size_t k = 0; k < d2->in_dim; ++k) s += d2->weights[o * d2->in_dim + k] * hidden[k];
    CHECK(logits[o] == doctest::Approx(s).epsilon(1e-12));
  }
}

TEST_CASE("sparse and dense-constrained paths agree") {
  testing::Rng rng(21);
  for (const char* preset : {"mnist", "neutrino", "jet"}) {
    for (const bool fixed : {false, true}) {
      PresetOptions opt;
      opt.n_max = 12;
      if (fixed) {
        opt.mode = ArithmeticMode::kFixed;
        opt.format = FixedFormat{16, 6};
      }
      const ModelGraph m = gen_random_model(rng(), preset, opt);
      for (int trial = 0; trial < 6; ++trial) {
        // Active counts straddle n_max so truncation is exercised.
        const auto& in = m.input;
        const DenseTensor x = gen_synthetic_sparse(rng(), in.height, in.width, testing::uniform_size(rng, 0, 30));
        SparseTrace trace;
        OpCounters sc, dc;
        const auto a = run_sparse(m, x, &sc, &trace);
        const auto b = run_dense_constrained(m, x, &dc);
        REQUIRE(a.size() == b.size());
        for (std::size_t k = 0; k < a.size(); ++k) {
          if (fixed) {
            CHECK(a[k] == b[k]);
          } else {
            CHECK(std::abs(a[k] - b[k]) <= 1e-9);
          }
        }
        CHECK(sc.sparse_conv_iterations == 12 * 12 * (1 * 2 + 2 * 2));
        CHECK(dc.dense_conv_multiplies > 0);
        CHECK_NOTHROW(run_dense(m, x));
      }
    }
  }
}

TEST_CASE("predicted class") {
  CHECK(predicted_class({0.1, 0.9, -3}) == 1);
  CHECK(predicted_class({0.2}) == 1);
  CHECK(predicted_class({-0.2}) == 0);
  CHECK_THROWS_AS(predicted_class({}), Error);
}

TEST_CASE("modes") {
  CHECK(parse_mode("fixed") == ArithmeticMode::kFixed);
  CHECK(to_string(ArithmeticMode::kFloat) == "float");
  CHECK_THROWS_AS(parse_mode("bf16"), Error);
}
