#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>

#include <Eigen/Dense>

namespace cscache {

/// Orthonormal DCT-II analysis matrix: row k holds the k-th cosine atom, so
/// `coeffs = dct_matrix(n) * signal` and `signal = dct_matrix(n).transpose() * coeffs`.
inline Eigen::MatrixXd dct_matrix(std::size_t n) {
  const auto size = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd c(size, size);
  const double scale0 = std::sqrt(1.0 / static_cast<double>(n));
  const double scale = std::sqrt(2.0 / static_cast<double>(n));
  for (Eigen::Index k = 0; k < size; ++k) {
    for (Eigen::Index i = 0; i < size; ++i) {
      const double angle = std::numbers::pi * static_cast<double>((2 * i + 1) * k) /
                           (2.0 * static_cast<double>(n));
      c(k, i) = (k == 0 ? scale0 : scale) * std::cos(angle);
    }
  }
  return c;
}

}  // namespace cscache
