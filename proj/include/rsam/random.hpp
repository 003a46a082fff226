#pragma once

#include <cstdint>
#include <random>

#include "rsam/linalg.hpp"

namespace rsam {

using Rng = std::mt19937_64;

/// Standard-normal entries drawn row-major from `rng`.
inline Matrix gaussian_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (double& v : m.flat()) v = normal(rng);
  return m;
}

inline Matrix gaussian_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  return gaussian_matrix(rows, cols, rng);
}

}  // namespace rsam
