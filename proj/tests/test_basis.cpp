#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "cscache/basis.hpp"
#include "cscache/caching.hpp"
#include "oracles.hpp"

using namespace cscache;

namespace {

// DCT-II atoms straight from the textbook formula, row k = atom k.
Eigen::MatrixXd dct_by_formula(std::size_t n) {
  const auto sz = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd c(sz, sz);
  for (Eigen::Index k = 0; k < sz; ++k)
    for (Eigen::Index i = 0; i < sz; ++i)
      c(k, i) = std::sqrt((k == 0 ? 1.0 : 2.0) / static_cast<double>(n)) *
                std::cos(std::numbers::pi * (2.0 * static_cast<double>(i) + 1.0) *
                         static_cast<double>(k) / (2.0 * static_cast<double>(n)));
  return c;
}

Eigen::MatrixXd kron_by_loops(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd k(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < k.rows(); ++i)
    for (Eigen::Index j = 0; j < k.cols(); ++j)
      k(i, j) = a(i / b.rows(), j / b.cols()) * b(i % b.rows(), j % b.cols());
  return k;
}

Eigen::MatrixXd reference_psi(std::size_t n, std::size_t w) {
  const auto side = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(n))));
  const Eigen::MatrixXd cs = dct_by_formula(side);
  const Eigen::MatrixXd psi_s = kron_by_loops(cs, cs).transpose();
  const Eigen::MatrixXd psi_t = dct_by_formula(w).transpose();
  return kron_by_loops(psi_t, psi_s);
}

Eigen::VectorXd random_vector(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Eigen::VectorXd v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

}  // namespace

TEST(Basis, FactorsAreOrthonormal) {
  for (auto [n, w] : {std::pair{4, 1}, std::pair{9, 4}, std::pair{100, 4}}) {
    const SparsifyingBasis b(static_cast<std::size_t>(n), static_cast<std::size_t>(w));
    EXPECT_TRUE((b.spatial().transpose() * b.spatial()).isIdentity(1e-10));
    EXPECT_TRUE((b.temporal().transpose() * b.temporal()).isIdentity(1e-10));
  }
}

TEST(Basis, WindowOneTemporalIsScalarOne) {
  const SparsifyingBasis b(4, 1);
  ASSERT_EQ(b.temporal().rows(), 1);
  EXPECT_NEAR(b.temporal()(0, 0), 1.0, 1e-15);
}

TEST(Basis, DenseMatchesIndependentKronecker) {
  const SparsifyingBasis b(4, 2);
  const Eigen::MatrixXd psi = b.dense();
  EXPECT_LT((psi - reference_psi(4, 2)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_TRUE((psi.transpose() * psi).isIdentity(1e-12));
}

TEST(Basis, SynthesizeMatchesDenseProduct) {
  for (auto [n, w] : {std::pair{4, 2}, std::pair{9, 3}, std::pair{16, 4}}) {
    const SparsifyingBasis b(static_cast<std::size_t>(n), static_cast<std::size_t>(w));
    const Eigen::MatrixXd psi = reference_psi(static_cast<std::size_t>(n), static_cast<std::size_t>(w));
    const Eigen::VectorXd z = random_vector(n * w, 3);
    EXPECT_LT((b.synthesize(z) - psi * z).norm(), 1e-12);
    EXPECT_LT((b.analyze(z) - psi.transpose() * z).norm(), 1e-12);
  }
}

TEST(Basis, FirstAtomIsConstant) {
  const SparsifyingBasis b(9, 4);
  Eigen::VectorXd e1 = Eigen::VectorXd::Zero(36);
  e1(0) = 1.0;
  const Eigen::VectorXd x = b.synthesize(e1);
  EXPECT_LT((x.array() - 1.0 / 6.0).abs().maxCoeff(), 1e-12);  // 1/sqrt(NW)
  EXPECT_EQ(b.synthesize(Eigen::VectorXd::Zero(36)), Eigen::VectorXd::Zero(36));
}

TEST(Basis, RoundTripAndEnergy) {
  const SparsifyingBasis b(100, 4);
  const Eigen::VectorXd x = random_vector(400, 9);
  const Eigen::VectorXd z = b.analyze(x);
  EXPECT_LT((b.synthesize(z) - x).norm(), 1e-10);
  EXPECT_NEAR(z.norm(), x.norm(), 1e-10);
}

TEST(Basis, AnalyzeOfAtomIsUnitVector) {
  const SparsifyingBasis b(9, 4);
  const Eigen::MatrixXd psi = b.dense();
  for (Eigen::Index k : {0, 7, 35}) {
    Eigen::VectorXd ek = Eigen::VectorXd::Zero(36);
    ek(k) = 1.0;
    EXPECT_LT((b.analyze(psi.col(k)) - ek).norm(), 1e-12);
  }
}

TEST(Basis, KroneckerVecIdentity) {
  // vec(A Z B^T) = (B (x) A) vec(Z)
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  Eigen::MatrixXd a(3, 3), bm(2, 2), z(3, 2);
  for (auto* m : {&a, &bm, &z})
    for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = g(rng);
  const Eigen::MatrixXd lhs = a * z * bm.transpose();
  const Eigen::VectorXd vz = Eigen::Map<const Eigen::VectorXd>(z.data(), z.size());
  const Eigen::VectorXd rhs = SparsifyingBasis::kronecker(bm, a) * vz;
  EXPECT_LT((Eigen::Map<const Eigen::VectorXd>(lhs.data(), lhs.size()) - rhs).norm(), 1e-12);
}

TEST(Basis, Linearity) {
  const SparsifyingBasis b(16, 3);
  const Eigen::VectorXd u = random_vector(48, 1);
  const Eigen::VectorXd v = random_vector(48, 2);
  EXPECT_LT((b.synthesize(2.5 * u - 0.5 * v) - (2.5 * b.synthesize(u) - 0.5 * b.synthesize(v))).norm(),
            1e-12);
}

TEST(Basis, RejectsBadShapes) {
  EXPECT_THROW(SparsifyingBasis(10, 4), std::invalid_argument);
  EXPECT_THROW(SparsifyingBasis(9, 0), std::invalid_argument);
  const SparsifyingBasis b(9, 2);
  EXPECT_THROW(b.synthesize(Eigen::VectorXd::Zero(17)), std::invalid_argument);
}

TEST(Rip, IdentityAndOrthonormalColumnsAreZero) {
  EXPECT_NEAR(rip_constant(Eigen::MatrixXd::Identity(8, 8), 2), 0.0, 1e-12);
  const Eigen::MatrixXd q = SparsifyingBasis(9, 1).dense().leftCols(5);
  EXPECT_NEAR(rip_constant(q, 3), 0.0, 1e-12);
}

TEST(Rip, MatchesSvdBruteForce) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> g(0.0, 1.0 / std::sqrt(6.0));
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::MatrixXd a(6, 8);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = g(rng);
    for (std::size_t order : {1u, 2u, 3u})
      EXPECT_NEAR(rip_constant(a, order), oracle::rip_by_svd(a, order), 1e-10);
  }
}

TEST(Rip, RejectsOversizedEnumeration) {
  EXPECT_THROW(rip_constant(Eigen::MatrixXd::Identity(4, 4), 5), UnsupportedSize);
  EXPECT_THROW(rip_constant(Eigen::MatrixXd::Identity(21, 21), 2), UnsupportedSize);
}

// If the anchor rows of the basis satisfy delta_2S < 1, two S-sparse vectors
// that agree on the anchors are equal. Checked exhaustively on a value grid.
TEST(AnchorIdentifiability, SparseVectorsAgreeingOnAnchorsAreEqual) {
  const SparsifyingBasis b(9, 1);
  const Eigen::MatrixXd psi = b.dense();
  // (corners + centre would not do: the two axis-aligned second-harmonic atoms
  // take identical values there)
  const IndexList anchors{0, 1, 3};
  const Eigen::MatrixXd gp = oracle::rows_of(psi, anchors);
  const std::size_t s = 1;
  ASSERT_LT(rip_constant(gp, 2 * s), 1.0);

  std::vector<Eigen::VectorXd> vectors{Eigen::VectorXd::Zero(9)};
  for (Eigen::Index i = 0; i < 9; ++i)
    for (double v : {-2.0, -1.0, -0.5, 0.5, 1.0, 2.0}) {
      Eigen::VectorXd z = Eigen::VectorXd::Zero(9);
      z(i) = v;
      vectors.push_back(z);
    }
  for (std::size_t i = 0; i < vectors.size(); ++i)
    for (std::size_t j = i + 1; j < vectors.size(); ++j)
      EXPECT_GT((gp * (vectors[i] - vectors[j])).norm(), 1e-9);
}
