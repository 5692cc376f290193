#pragma once

// Random instance generators shared by the unit tests and the acceptance run.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "scnn/kernel.hpp"
#include "scnn/tensor.hpp"

namespace scnn::testing {

using Rng = std::mt19937_64;

inline std::size_t uniform_size(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline double uniform_real(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// H×W×C tensor where `n_active` distinct pixels have channel 0 in
/// [0.05, 1] and all other channel-0 values are drawn from [lo_inactive, 0].
/// Extra channels are arbitrary signed values at active pixels and zero
/// elsewhere.
inline DenseTensor random_sparse_tensor(Rng& rng, std::size_t h, std::size_t w, std::size_t c,
                                        std::size_t n_active, double lo_inactive = 0.0) {
  DenseTensor x(h, w, c);
  std::vector<std::size_t> order(h * w);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::size_t i = order[k] / w, j = order[k] % w;
    if (k < n_active) {
      x(i, j, 0) = uniform_real(rng, 0.05, 1.0);
      for (std::size_t ch = 1; ch < c; ++ch) x(i, j, ch) = uniform_real(rng, -1.0, 1.0);
    } else if (lo_inactive < 0.0) {
      x(i, j, 0) = uniform_real(rng, lo_inactive, 0.0);
    }
  }
  return x;
}

inline KernelWeights<double> random_kernel(Rng& rng, std::size_t k, std::size_t c_in, std::size_t c_out,
                                           double scale = 0.5) {
  KernelWeights<double> kw{k, c_in, c_out, {}, {}};
  kw.weights.resize(k * k * c_in * c_out);
  kw.bias.resize(c_out);
  for (double& v : kw.weights) v = uniform_real(rng, -scale, scale);
  for (double& v : kw.bias) v = uniform_real(rng, -scale, scale);
  return kw;
}

}  // namespace scnn::testing
