#pragma once

#include <random>

#include "halfcalc/linalg.hpp"

namespace halfcalc::testing {

inline CMatrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  CMatrix m(rows, cols);
  for (auto& z : m.entries()) z = {nd(rng), nd(rng)};
  return m;
}

inline CVector random_vector(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  CVector v(n);
  for (auto& z : v) z = {nd(rng), nd(rng)};
  return v;
}

inline double max_deviation(const CMatrix& a, const CMatrix& b) { return max_abs(a - b); }

}  // namespace halfcalc::testing
