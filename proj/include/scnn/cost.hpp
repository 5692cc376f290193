#pragma once

// Analytical operation counts and calibrated latency estimates.
//
// Counts follow the loop nests of the sparse kernels exactly; cycle numbers
// are a least-squares interpolation over measured points and are labelled
// "calibrated, not measured" wherever they are printed.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scnn/model.hpp"

namespace scnn {

/// Reduced non-negative fraction.
struct Ratio {
  std::uint64_t num = 0;
  std::uint64_t den = 1;

  double value() const noexcept { return static_cast<double>(num) / static_cast<double>(den); }
  std::string str() const { return std::to_string(num) + "/" + std::to_string(den); }
  friend bool operator==(const Ratio&, const Ratio&) = default;
};

Ratio make_ratio(std::uint64_t num, std::uint64_t den);

/// ⌈log2(pixels)⌉; 0 for a single pixel.
std::size_t tree_depth(std::size_t pixels);
inline std::size_t tree_depth(std::size_t height, std::size_t width) { return tree_depth(height * width); }

struct ConvCost {
  std::uint64_t sparse_mults = 0;  // n_max²·C_in·C_out
  std::uint64_t dense_mults = 0;   // H·W·C_in·C_out·K²
  Ratio ratio;
};

ConvCost conv_cost(std::size_t n_max, std::size_t c_in, std::size_t c_out, std::size_t height, std::size_t width,
                   std::size_t kernel);

/// Element ratio of sparse to dense activation, (n_max·C)/(H·W·C).
Ratio act_cost(std::size_t n_max, std::size_t channels, std::size_t height, std::size_t width);

/// Fraction of input pixels the sparse path computes on, n_max/(H·W).
Ratio active_fraction(std::size_t n_max, std::size_t height, std::size_t width);

struct CyclePoint {
  double n_max = 0;
  double cycles = 0;
};

/// cycles ≈ slope·n_max + intercept.
struct CycleCalibration {
  double slope = 0;
  double intercept = 0;
  std::vector<double> residuals;  // measured − fitted, per sample
  double max_abs_residual = 0;
};

/// Ordinary least squares. Needs at least two distinct n_max values and a
/// non-negative slope; otherwise throws kCalibration.
CycleCalibration calibrate_cycles(std::span<const CyclePoint> samples);

/// slope·n_max + intercept rounded to the nearest cycle.
std::int64_t estimate_cycles(const CycleCalibration& cal, double n_max);

/// Initiation-interval points of the sparse-{tiny,small,medium,large}
/// models (identical across the three datasets and both bit widths).
std::span<const CyclePoint> reference_ii_points();

struct LayerCost {
  std::string kind;
  std::uint64_t mult_count = 0;
  std::uint64_t add_count = 0;
  std::uint64_t compare_count = 0;
  std::optional<std::size_t> tree_depth;         // input_reduce only
  std::optional<std::int64_t> estimated_cycles;  // input_reduce only, calibrated
  std::optional<std::uint64_t> dense_mult_count; // sparse_conv: standard conv equivalent
  std::optional<Ratio> ratio;                    // sparse/dense work ratio where defined
};

struct CostReport {
  std::vector<LayerCost> layers;
  std::uint64_t total_mults = 0;
  std::uint64_t total_adds = 0;
  std::uint64_t total_compares = 0;
  std::uint64_t total_conv_sparse_mults = 0;
  std::uint64_t total_conv_dense_mults = 0;
  Ratio conv_mac_ratio;
  Ratio input_active_fraction;
  std::optional<std::int64_t> estimated_ii;
};

CostReport analyze(const ModelGraph& m, const std::optional<CycleCalibration>& calibration);

std::string cost_table(const CostReport& r);
std::string cost_json(const CostReport& r);

}  // namespace scnn
