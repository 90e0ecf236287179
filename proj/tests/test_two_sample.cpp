#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace pfair;

namespace {

Matrix gaussian(std::size_t n, std::size_t d, double shift, std::uint64_t seed) {
  return (oracle::random_matrix(n, d, seed).array() + shift).matrix();
}

PermutationConfig perms(std::uint64_t seed, std::size_t n = 1000) { return {n, seed, 1}; }

}  // namespace

TEST(Euclidean, Basics) {
  EXPECT_DOUBLE_EQ(euclidean(Eigen::Vector2d(0, 0), Eigen::Vector2d(3, 4)), 5.0);
  EXPECT_DOUBLE_EQ(euclidean(std::vector<double>{1, 2}, std::vector<double>{1, 2}), 0.0);
  const Matrix p = oracle::random_matrix(60, 3, 1);
  for (Eigen::Index i = 0; i + 2 < p.rows(); i += 3) {
    const Vector a = p.row(i), b = p.row(i + 1), c = p.row(i + 2);
    EXPECT_LE(euclidean(a, c), euclidean(a, b) + euclidean(b, c) + 1e-15);
  }
  EXPECT_THROW(euclidean(Eigen::Vector2d(0, 0), Eigen::Vector3d(0, 0, 0)), Error);
}

TEST(Kernel, Values) {
  KernelConfig fixed{KernelKind::exponential, 1.0};
  Matrix a(1, 2), b(1, 2);
  a << 0, 0;
  b << 1, 0;
  EXPECT_NEAR(kernel_matrix(a, b, fixed)(0, 0), std::exp(-1.0), 1e-15);
  EXPECT_DOUBLE_EQ(kernel_matrix(a, a, fixed)(0, 0), 1.0);
  KernelConfig gauss{KernelKind::gaussian, 2.0};
  EXPECT_NEAR(kernel_matrix(a, b, gauss)(0, 0), std::exp(-1.0 / 8.0), 1e-15);
  const Matrix x = oracle::random_matrix(5, 3, 1), y = oracle::random_matrix(4, 3, 2);
  EXPECT_LT((kernel_matrix(x, y, {}) - kernel_matrix(y, x, {}).transpose()).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_THROW(kernel_matrix(x, y, KernelConfig{KernelKind::exponential, -1.0}), Error);
}

TEST(Bandwidth, MedianAndFallback) {
  Matrix p(3, 1);
  p << 0, 1, 3;
  // Distances 1, 3, 2 -> median 2.
  EXPECT_DOUBLE_EQ(median_heuristic(p).sigma, 2.0);
  Matrix q(4, 1);
  q << 0, 1, 3, 7;
  // Distances 1,3,7,2,6,4 -> median (3+4)/2.
  EXPECT_DOUBLE_EQ(median_heuristic(q).sigma, 3.5);
  const auto bw = median_heuristic(Matrix::Ones(5, 2));
  EXPECT_TRUE(bw.fallback);
  EXPECT_DOUBLE_EQ(bw.sigma, 1.0);
}

TEST(Mmd, IdenticalAndSeparated) {
  const Matrix a = oracle::random_matrix(20, 3, 4);
  EXPECT_NEAR(mmd2(a, a, {}), 0.0, 1e-12);
  const Matrix far1 = Matrix::Zero(10, 2);
  const Matrix far2 = Matrix::Constant(10, 2, 1000.0);
  EXPECT_NEAR(mmd2(far1, far2, KernelConfig{KernelKind::exponential, 1.0}), 2.0, 1e-9);
  const Matrix b = gaussian(25, 3, 0.5, 5);
  EXPECT_NEAR(mmd2(a, b, {}), mmd2(b, a, {}), 1e-12);
}

TEST(Mmd, MatchesDirectDefinition) {
  const Matrix a = oracle::random_matrix(7, 2, 1), b = gaussian(9, 2, 0.3, 2);
  const KernelConfig k{KernelKind::exponential, 0.8};
  const auto mean = [&](const Matrix& u, const Matrix& v) { return kernel_matrix(u, v, k).mean(); };
  EXPECT_NEAR(mmd2(a, b, k), mean(a, a) + mean(b, b) - 2 * mean(a, b), 1e-14);
}

TEST(Permutation, ShiftedGaussiansAreRejected) {
  const auto r = permutation_test(gaussian(100, 1, 0.0, 1), gaussian(100, 1, 3.0, 2), {}, perms(3));
  std::vector<double> sorted = r.null_statistics;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_GT(r.statistic, sorted[949]);
  EXPECT_DOUBLE_EQ(r.p_value, 1.0 / 1001.0);
}

TEST(Permutation, RowPermutationOfSameSetIsNotRejected) {
  const Matrix a = oracle::random_matrix(50, 2, 7);
  Matrix b = a.colwise().reverse();
  const auto p = permutation_pvalue(a, b, {}, perms(1));
  EXPECT_GE(p, 0.5);
}

TEST(Permutation, DeterministicAndBounded) {
  const Matrix a = oracle::random_matrix(30, 2, 1), b = gaussian(30, 2, 0.2, 2);
  const auto r1 = permutation_test(a, b, {}, perms(5));
  const auto r2 = permutation_test(a, b, {}, PermutationConfig{1000, 5, 4});
  EXPECT_EQ(r1.p_value, r2.p_value);
  EXPECT_EQ(r1.null_statistics, r2.null_statistics);
  EXPECT_GE(r1.p_value, 1.0 / 1001.0);
  EXPECT_LE(r1.p_value, 1.0);
  EXPECT_THROW(permutation_pvalue(a, b, {}, perms(1, 50)), Error);
}

TEST(Permutation, InvariantUnderRowRelabelling) {
  const Matrix a = oracle::random_matrix(40, 2, 11), b = gaussian(40, 2, 0.4, 12);
  const Matrix a_rev = a.colwise().reverse();
  // The statistic is exactly invariant; the p-value up to Monte Carlo noise.
  const auto r1 = permutation_test(a, b, {}, perms(2));
  const auto r2 = permutation_test(a_rev, b, {}, perms(2));
  EXPECT_NEAR(r1.statistic, r2.statistic, 1e-12);
  EXPECT_NEAR(r1.p_value, r2.p_value, 0.06);
}

TEST(Permutation, NullCalibration) {
  int rejected = 0;
  for (std::uint64_t t = 0; t < 200; ++t) {
    const Matrix a = oracle::random_matrix(100, 4, 1000 + 2 * t);
    const Matrix b = oracle::random_matrix(100, 4, 1001 + 2 * t);
    rejected += permutation_pvalue(a, b, {}, perms(t, 200)) <= 0.05;
  }
  EXPECT_NEAR(rejected / 200.0, 0.05, 0.03);
}

TEST(Pca, RankOneAndIsometry) {
  Matrix line(20, 2);
  for (Eigen::Index i = 0; i < 20; ++i) line.row(i) << i, 2.0 * i;
  const auto p = pca_project(line, 1);
  EXPECT_NEAR(p.explained_variance_ratio(0), 1.0, 1e-12);

  // Points inside a 2-D subspace of R^4 keep their pairwise distances.
  const Matrix coeffs = oracle::random_matrix(15, 2, 3);
  Matrix basis(2, 4);
  basis << 1, 0, 1, 0, 0, 1, 0, -1;
  basis.row(0).normalize();
  basis.row(1).normalize();
  const Matrix x = coeffs * basis;
  const auto q = pca_project(x, 2);
  for (Eigen::Index i = 0; i < 15; ++i)
    for (Eigen::Index j = 0; j < 15; ++j)
      EXPECT_NEAR((q.projected.row(i) - q.projected.row(j)).norm(), (x.row(i) - x.row(j)).norm(), 1e-10);
  EXPECT_LT((q.reconstruct(q.projected) - x).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Pca, SpectrumAndSigns) {
  const auto p = pca_project(oracle::random_matrix(200, 5, 9), 3);
  EXPECT_LE(p.explained_variance_ratio.sum(), 1.0 + 1e-12);
  EXPECT_LT((p.components * p.components.transpose() - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-12);
  for (Eigen::Index c = 0; c < 3; ++c) {
    Eigen::Index arg;
    p.components.row(c).cwiseAbs().maxCoeff(&arg);
    EXPECT_GT(p.components(c, arg), 0.0);
  }
  EXPECT_THROW(pca_project(oracle::random_matrix(10, 2, 1), 3), Error);
}
