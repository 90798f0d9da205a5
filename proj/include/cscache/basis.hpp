#pragma once

#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cscache/dct.hpp"
#include "cscache/errors.hpp"
#include "cscache/field_model.hpp"

namespace cscache {

/// Kronecker sparsifying basis Psi = Psi_T (x) Psi_S, applied implicitly as
/// x = vec(Psi_S * Z * Psi_T^T). Psi_S is the inverse orthonormal 2D-DCT over
/// the sqrt(N) x sqrt(N) block grid; Psi_T the inverse orthonormal 1D-DCT.
class SparsifyingBasis {
 public:
  SparsifyingBasis(std::size_t n_sensors, std::size_t window) : n_(n_sensors), w_(window) {
    const std::size_t side = exact_sqrt(n_sensors);
    detail::require(n_sensors > 0 && side > 0,
                    "build_bases: N must be a positive perfect square, got " +
                        std::to_string(n_sensors));
    detail::require(window >= 1, "build_bases: window must be >= 1");
    const Eigen::MatrixXd c = dct_matrix(side);
    spatial_ = kronecker(c, c).transpose();
    temporal_ = dct_matrix(window).transpose();
  }

  std::size_t n_sensors() const { return n_; }
  std::size_t window() const { return w_; }
  std::size_t dimension() const { return n_ * w_; }
  const Eigen::MatrixXd& spatial() const { return spatial_; }
  const Eigen::MatrixXd& temporal() const { return temporal_; }

  /// x = Psi z without forming the NW x NW matrix.
  Eigen::VectorXd synthesize(const Eigen::Ref<const Eigen::VectorXd>& z) const {
    check_length(z.size(), "synthesize");
    Eigen::VectorXd x(z.size());
    Eigen::Map<Eigen::MatrixXd>(x.data(), rows(), cols()).noalias() =
        spatial_ * as_matrix(z) * temporal_.transpose();
    return x;
  }

  /// z = Psi^T x.
  Eigen::VectorXd analyze(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    check_length(x.size(), "analyze");
    Eigen::VectorXd z(x.size());
    Eigen::Map<Eigen::MatrixXd>(z.data(), rows(), cols()).noalias() =
        spatial_.transpose() * as_matrix(x) * temporal_;
    return z;
  }

  /// Explicit Psi; for tests and tiny instances only.
  Eigen::MatrixXd dense() const { return kronecker(temporal_, spatial_); }

  static Eigen::MatrixXd kronecker(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd k(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      for (Eigen::Index j = 0; j < a.cols(); ++j)
        k.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return k;
  }

 private:
  Eigen::Index rows() const { return static_cast<Eigen::Index>(n_); }
  Eigen::Index cols() const { return static_cast<Eigen::Index>(w_); }

  Eigen::Map<const Eigen::MatrixXd> as_matrix(const Eigen::Ref<const Eigen::VectorXd>& v) const {
    return {v.data(), rows(), cols()};
  }

  void check_length(Eigen::Index len, const char* op) const {
    detail::require(len == static_cast<Eigen::Index>(dimension()),
                    std::string(op) + ": expected length " + std::to_string(dimension()) +
                        ", got " + std::to_string(len));
  }

  std::size_t n_;
  std::size_t w_;
  Eigen::MatrixXd spatial_;
  Eigen::MatrixXd temporal_;
};

inline SparsifyingBasis build_bases(std::size_t n_sensors, std::size_t window) {
  return SparsifyingBasis(n_sensors, window);
}

inline constexpr Eigen::Index kRipEnumerationCap = 20;

/// Restricted isometry constant of order `order` by exhaustive enumeration of
/// all column supports: max over supports of max(1 - s_min^2, s_max^2 - 1).
inline double rip_constant(const Eigen::MatrixXd& a, std::size_t order) {
  const Eigen::Index d = a.cols();
  const auto s = static_cast<Eigen::Index>(order);
  if (s > d || d > kRipEnumerationCap) {
    throw UnsupportedSize("rip_constant: order " + std::to_string(order) + " with " +
                          std::to_string(d) + " columns is outside the enumeration limit");
  }
  if (s == 0) return 0.0;

  std::vector<Eigen::Index> support(static_cast<std::size_t>(s));
  std::iota(support.begin(), support.end(), Eigen::Index{0});
  double delta = 0.0;
  Eigen::MatrixXd sub(a.rows(), s);
  while (true) {
    for (Eigen::Index j = 0; j < s; ++j) sub.col(j) = a.col(support[static_cast<std::size_t>(j)]);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sub.transpose() * sub,
                                                             Eigen::EigenvaluesOnly);
    const auto& ev = eig.eigenvalues();
    delta = std::max({delta, 1.0 - ev.minCoeff(), ev.maxCoeff() - 1.0});

    // advance to the next combination in lexicographic order
    Eigen::Index i = s - 1;
    while (i >= 0 && support[static_cast<std::size_t>(i)] == d - s + i) --i;
    if (i < 0) break;
    ++support[static_cast<std::size_t>(i)];
    for (Eigen::Index j = i + 1; j < s; ++j)
      support[static_cast<std::size_t>(j)] = support[static_cast<std::size_t>(j - 1)] + 1;
  }
  return delta;
}

}  // namespace cscache
