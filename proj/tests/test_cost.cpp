#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include "scnn/cost.hpp"

using namespace scnn;

TEST_CASE("tree depth") {
  CHECK(tree_depth(63, 63) == 12);
  CHECK(tree_depth(48, 48) == 12);
  CHECK(tree_depth(56, 56) == 12);
  CHECK(tree_depth(1, 1) == 0);
  CHECK(tree_depth(2) == 1);
  CHECK(tree_depth(4096) == 12);
  CHECK(tree_depth(4097) == 13);
  const std::size_t sizes[] = {500, 1000, 1500, 2000, 2500, 3000};
  const std::size_t depths[] = {9, 10, 11, 11, 12, 12};
  for (int k = 0; k < 6; ++k) CHECK(tree_depth(sizes[k]) == depths[k]);
  std::size_t prev = 0;
  for (std::size_t n = 1; n <= 5000; ++n) {
    const std::size_t d = tree_depth(n);
    CHECK(d >= prev);
    // Steps happen right after each power of two.
    if (d != prev) CHECK(((n - 1) & (n - 2)) == 0);
    prev = d;
  }
  CHECK_THROWS_AS(tree_depth(0), Error);
}

TEST_CASE("conv and activation ratios") {
  const ConvCost c = conv_cost(20, 1, 1, 63, 63, 3);
  CHECK(c.sparse_mults == 400);
  CHECK(c.dense_mults == 35721);
  CHECK(c.ratio == Ratio{400, 35721});
  CHECK(conv_cost(20, 1, 1, 63, 63, 5).sparse_mults == c.sparse_mults);
  CHECK(conv_cost(20, 2, 3, 10, 10, 3).ratio == make_ratio(2400, 5400));

  CHECK(act_cost(20, 1, 63, 63) == Ratio{20, 3969});
  CHECK(act_cost(20, 4, 63, 63) == act_cost(20, 1, 63, 63));
  CHECK(act_cost(16, 2, 4, 4) == Ratio{1, 1});
  CHECK(active_fraction(20, 63, 63) == Ratio{20, 3969});
  CHECK(active_fraction(20, 63, 63).value() < 0.01);
  CHECK_THROWS_AS(conv_cost(0, 1, 1, 3, 3, 3), Error);
}

TEST_CASE("cycle calibration") {
  const auto cal = calibrate_cycles(reference_ii_points());
  CHECK(cal.slope == doctest::Approx(4.05));
  CHECK(cal.intercept == doctest::Approx(2.8));
  for (const auto& p : reference_ii_points()) {
    CHECK(std::abs(static_cast<double>(estimate_cycles(cal, p.n_max)) - p.cycles) <= 2.0);
  }
  for (int n = 1; n < 64; ++n) CHECK(estimate_cycles(cal, n + 1) > estimate_cycles(cal, n));

  const CyclePoint same[] = {{8, 35}, {8, 35}};
  CHECK_THROWS_AS(calibrate_cycles(same), Error);
  const CyclePoint one[] = {{8, 35}};
  CHECK_THROWS_AS(calibrate_cycles(one), Error);
  const CyclePoint falling[] = {{8, 35}, {20, 10}};
  CHECK_THROWS_AS(calibrate_cycles(falling), Error);
}

TEST_CASE("model report") {
  ModelGraph m;
  m.input = {63, 63, 1};
  m.layers = {
      {InputReduceLayer{0.0, 20}, std::nullopt},
      {SparseConvLayer{{3, 1, 1, std::vector<double>(9), {0}}}, std::nullopt},
      {SparseActLayer{Activation::kRelu}, std::nullopt},
      {SparseFlattenLayer{}, std::nullopt},
  };
  const auto r = analyze(m, calibrate_cycles(reference_ii_points()));
  CHECK(r.input_active_fraction == Ratio{20, 3969});
  CHECK(r.conv_mac_ratio == Ratio{400, 35721});
  CHECK(r.layers[0].tree_depth == 12u);
  CHECK(r.layers[1].mult_count == 400);
  CHECK(r.estimated_ii == 84);

  const std::string table = cost_table(r);
  CHECK(table.find("20/3969 = 0.504%") != std::string::npos);
  CHECK(table.find("400/35721 = 1.120%") != std::string::npos);
  CHECK(table.find("calibrated, not measured") != std::string::npos);

  const auto j = nlohmann::json::parse(cost_json(r));
  CHECK(j["conv_mac_ratio"]["num"] == 400);
  CHECK(j["input_active_fraction"]["den"] == 3969);
}
