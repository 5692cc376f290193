#pragma once

// Sparsification transforms for building sparse inputs from raw images.
//
// Step syntax (CLI and config files):  name:arg[,name:arg...]
//   avg_pool:P  sum_pool:P  pad_to:HxW  crop_borders:HxW
//   radial_inflate:S  threshold:T  normalize:F  saturate:CAP
// Config files hold one step per line; '#' starts a comment.

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "scnn/tensor.hpp"

namespace scnn {

struct AvgPoolStep { std::size_t pool; };
struct SumPoolStep { std::size_t pool; };
struct PadToStep { std::size_t height, width; };
struct CropBordersStep { std::size_t height, width; };
struct RadialInflateStep { double scale; };
struct ThresholdStep { double threshold; };
struct NormalizeStep { double factor; };
struct SaturateStep { double cap; };

using TransformStep = std::variant<AvgPoolStep, SumPoolStep, PadToStep, CropBordersStep, RadialInflateStep,
                                   ThresholdStep, NormalizeStep, SaturateStep>;

using TransformSpec = std::vector<TransformStep>;

TransformSpec parse_transform_spec(const std::string& text);
TransformSpec parse_transform_file(const std::string& path);
std::string to_string(const TransformSpec& spec);

/// Applies the steps in order. Dimension errors name the failing step.
DenseTensor apply_transforms(const DenseTensor& x, const TransformSpec& spec);

/// P×P pooling (sum or mean) with stride P; ragged borders are zero-padded.
DenseTensor sum_pool(const DenseTensor& x, std::size_t pool);
DenseTensor avg_pool(const DenseTensor& x, std::size_t pool);

/// Centered zero padding up to H'×W' (extra row/column goes bottom/right).
DenseTensor pad_to(const DenseTensor& x, std::size_t height, std::size_t width);

/// Centered crop down to H'×W' (extra row/column is removed from the bottom/right).
DenseTensor crop_borders(const DenseTensor& x, std::size_t height, std::size_t width);

/// Moves each nonzero pixel p to center + round(s·(p − center)), with the
/// center at (H/2, W/2). Off-grid targets are dropped; colliding pixels
/// keep the maximum. Single-channel only.
DenseTensor radial_inflate(const DenseTensor& x, double scale);

/// Keeps values ≥ t, zeroes the rest.
DenseTensor threshold(const DenseTensor& x, double t);
DenseTensor normalize(const DenseTensor& x, double factor);
DenseTensor saturate(const DenseTensor& x, double cap);

/// H×W×1 tensor with exactly `n_active` distinct pixels drawn uniformly from
/// [value_lo, value_hi] (both > 0); all others zero.
DenseTensor gen_synthetic_sparse(std::uint64_t seed, std::size_t height, std::size_t width, std::size_t n_active,
                                 double value_lo = 0.1, double value_hi = 1.0);

}  // namespace scnn
