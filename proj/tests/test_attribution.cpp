#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace pfair;

namespace {

Evaluator mlp_eval(const MlpModel& m) {
  return [m](const Matrix& x) { return predict_proba(m, x); };
}

ShapConfig config_with(const Matrix& background, std::uint64_t seed = 0) {
  ShapConfig c;
  c.background = background;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(KernelShap, LinearModelClosedForm) {
  const Eigen::Vector4d w(1.5, -2.0, 0.25, 3.0);
  const Evaluator f = [w](const Matrix& x) { return Vector((x * w).array() + 0.7); };
  const Matrix bg = oracle::random_matrix(30, 4, 1);
  const Vector x = oracle::random_matrix(1, 4, 2).row(0).transpose();
  const auto e = kernel_shap(f, x, config_with(bg));
  const Vector mean = bg.colwise().mean().transpose();
  for (Eigen::Index j = 0; j < 4; ++j) EXPECT_NEAR(e.values(j), w(j) * (x(j) - mean(j)), 1e-10);
}

TEST(KernelShap, ConstantModelIsNullEverywhere) {
  const Evaluator f = [](const Matrix& x) { return Vector(Vector::Constant(x.rows(), 0.42)); };
  const auto e = kernel_shap(f, Eigen::Vector3d(1, 2, 3), config_with(oracle::random_matrix(10, 3, 3)));
  EXPECT_LT(e.values.cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_DOUBLE_EQ(e.base_value, 0.42);
}

TEST(KernelShap, EqualsExactShapleyUnderFullEnumeration) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    for (std::size_t d : {2u, 4u, 6u, 8u}) {
      const auto m = oracle::random_mlp(d, 6, s);
      const auto f = mlp_eval(m);
      const Matrix bg = oracle::random_matrix(20, d, 50 + s);
      const Vector x = oracle::random_matrix(1, d, 70 + s).row(0).transpose();
      const auto ks = kernel_shap(f, x, config_with(bg));
      const auto ex = exact_shapley(f, x, bg);
      EXPECT_LT((ks.values - ex.values).cwiseAbs().maxCoeff(), 1e-6) << "d=" << d << " seed " << s;
      EXPECT_NEAR(ks.base_value + ks.values.sum(), ks.target, 1e-6);
      EXPECT_NEAR(ex.base_value + ex.values.sum(), ex.target, 1e-12);
    }
  }
}

TEST(ExactShapley, HandComputedProduct) {
  const Evaluator f = [](const Matrix& x) { return Vector(x.col(0).cwiseProduct(x.col(1))); };
  const auto e = exact_shapley(f, Eigen::Vector2d(1, 1), Matrix::Zero(1, 2));
  EXPECT_NEAR(e.values(0), 0.5, 1e-15);
  EXPECT_NEAR(e.values(1), 0.5, 1e-15);
}

TEST(ExactShapley, SymmetryAndLimits) {
  const Evaluator f = [](const Matrix& x) { return Vector(x.col(0) + x.col(1)); };
  Matrix bg(2, 2);
  bg << 1, -1, -1, 1;
  const auto e = exact_shapley(f, Eigen::Vector2d(0.3, 0.3), bg);
  EXPECT_DOUBLE_EQ(e.values(0), e.values(1));
  EXPECT_THROW(exact_shapley(f, Vector::Zero(16), Matrix::Zero(1, 16)), Error);
}

TEST(KernelShap, NullFeature) {
  auto m = oracle::random_mlp(5, 8, 4);
  m.w1.col(3).setZero();
  const auto f = mlp_eval(m);
  const Matrix bg = oracle::random_matrix(25, 5, 5);
  const Vector x = oracle::random_matrix(1, 5, 6).row(0).transpose();
  const auto ex = exact_shapley(f, x, bg);
  EXPECT_LE(std::abs(ex.values(3)), 1e-8);
  const auto ks = kernel_shap(f, x, config_with(bg));
  EXPECT_LE(std::abs(ks.values(3)), 0.01 * ks.values.cwiseAbs().maxCoeff());
}

TEST(KernelShap, SampledCoalitionsKeepLocalAccuracy) {
  const auto m = oracle::random_mlp(14, 10, 2);
  const auto f = mlp_eval(m);
  auto cfg = config_with(oracle::random_matrix(10, 14, 3), 9);
  const auto design = make_coalitions(14, 0, 9);
  EXPECT_FALSE(design.exhaustive);
  EXPECT_EQ(design.masks.rows(), 2048);
  // Paired sampling: every coalition is followed by its complement.
  for (Eigen::Index r = 0; r < design.masks.rows(); r += 2)
    EXPECT_TRUE((design.masks.row(r) + design.masks.row(r + 1)).isOnes());
  const Vector x = oracle::random_matrix(1, 14, 4).row(0).transpose();
  const auto e = kernel_shap(f, x, cfg);
  EXPECT_NEAR(e.base_value + e.values.sum(), e.target, 1e-9);
  EXPECT_EQ(kernel_shap(f, x, cfg).values, e.values);
  // The estimate tracks the exact values closely at this budget.
  const auto ex = exact_shapley(f, x, cfg.background);
  EXPECT_LT((e.values - ex.values).cwiseAbs().maxCoeff(), 0.05 * ex.values.cwiseAbs().maxCoeff() + 1e-3);
}

TEST(Coalitions, ExhaustiveWeights) {
  const auto c = make_coalitions(4, 0, 0);
  EXPECT_TRUE(c.exhaustive);
  EXPECT_EQ(c.masks.rows(), 14);
  EXPECT_NEAR(c.weights.sum(), 1.0, 1e-15);
  // Sizes 1 and 3 carry kernel weight 3/(4*1*3) = 1/4; size 2 carries 3/(6*2*2) = 1/8.
  for (Eigen::Index r = 0; r < 14; ++r) {
    const double size = c.masks.row(r).sum();
    const double expected = (size == 2 ? 0.125 : 0.25) / (8 * 0.25 + 6 * 0.125);
    EXPECT_NEAR(c.weights(r), expected, 1e-15);
  }
  EXPECT_EQ(default_coalitions(4), 14u);
  EXPECT_EQ(default_coalitions(20), 2048u);
  EXPECT_THROW(make_coalitions(5, 3, 0), Error);
}

TEST(ExplainSet, DuplicatesAndOrder) {
  const auto m = oracle::random_mlp(3, 5, 1);
  Matrix x = oracle::random_matrix(4, 3, 2);
  x.row(3) = x.row(1);
  const auto cfg = config_with(oracle::random_matrix(15, 3, 3));
  const auto a = explain_set(mlp_eval(m), x, cfg, {"a", "b", "c"}, 1);
  const auto b = explain_set(mlp_eval(m), x, cfg, {"a", "b", "c"}, 3);
  EXPECT_EQ(a.values, b.values);
  EXPECT_EQ(a.values.row(1), a.values.row(3));
  EXPECT_EQ(a.size(), 4u);
  EXPECT_EQ(explain_set(mlp_eval(m), x.topRows(1), cfg).size(), 1u);
  EXPECT_THROW(explain_set(mlp_eval(m), x, cfg, {"a"}), Error);
}

TEST(ExplainSet, CsvLayout) {
  ExplanationSet e;
  e.values = Matrix::Constant(2, 2, 0.5);
  e.base = Vector::Constant(2, 0.1);
  e.target = Vector::Constant(2, 1.1);
  e.feature_names = {"x1", "x2"};
  const auto p = std::filesystem::temp_directory_path() / "pfair_expl.csv";
  write_explanations_csv(e, p);
  std::ifstream in(p);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(header, "x1,x2,base,target");
  EXPECT_EQ(row, "0.5,0.5,0.10000000000000001,1.1000000000000001");
}

TEST(Background, SamplingIsSeededAndDistinct) {
  const Matrix x = oracle::random_matrix(300, 2, 1);
  const Matrix a = sample_background(x, 100, 5);
  EXPECT_EQ(a.rows(), 100);
  EXPECT_EQ(a, sample_background(x, 100, 5));
  EXPECT_NE(a, sample_background(x, 100, 6));
  EXPECT_EQ(sample_background(x, 1000, 5).rows(), 300);
}
