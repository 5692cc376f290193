#pragma once

// File formats.
//
// Tensor file (binary, little-endian):
//   bytes 0..3   magic "SPXT"
//   bytes 4..7   version (u32) = 1
//   bytes 8..19  H, W, C (u32 each)
//   bytes 20..   H·W·C IEEE-754 binary32 values, row-major channel-last
//
// Bundle file (text):
//   n_max C grid_h grid_w
//   h w f0 ... fC-1          (exactly n_max lines; sentinels are "0 0 0 ... 0")
//
// Tensor CSV (text): first line "H,W,C", then H·W·C values separated by
// commas and/or newlines in channel-last order.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "scnn/sparse.hpp"
#include "scnn/tensor.hpp"

namespace scnn {

inline constexpr std::uint32_t kTensorVersion = 1;

std::vector<std::uint8_t> encode_tensor(const DenseTensor& t);
DenseTensor decode_tensor(const std::vector<std::uint8_t>& bytes);

void write_tensor(const std::string& path, const DenseTensor& t);
DenseTensor read_tensor(const std::string& path);

DenseTensor parse_tensor_csv(const std::string& text);
DenseTensor read_tensor_csv(const std::string& path);

/// Reads a tensor from either format, chosen by the ".csv" extension.
DenseTensor load_tensor(const std::string& path);

std::string format_bundle(const SparseBundle<double>& b);
SparseBundle<double> parse_bundle(const std::string& text);

void write_bundle(const std::string& path, const SparseBundle<double>& b);
SparseBundle<double> read_bundle(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace scnn
