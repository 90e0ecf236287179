#pragma once

#include "pfair/core.hpp"

#include <bit>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

namespace pfair {

// Batched model output: one value per input row.
using Evaluator = std::function<Vector(const Matrix&)>;

struct Explanation {
  Vector values;
  double base_value = 0;
  double target = 0;
};

// Attribution rows for one sample of instances.
struct ExplanationSet {
  Matrix values;  // n x d
  Vector base;    // n
  Vector target;  // n
  std::vector<std::string> feature_names;

  std::size_t size() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(values.cols()); }

  Explanation row(std::size_t i) const {
    const auto r = static_cast<Eigen::Index>(i);
    return {values.row(r).transpose(), base(r), target(r)};
  }
};

struct ShapConfig {
  Matrix background;            // k x d
  std::size_t n_coalitions = 0;  // 0: min(2^d - 2, 2048)
  double ridge = 1e-6;
  std::uint64_t seed = 0;
};

// Up to `count` distinct rows of x drawn without replacement.
inline Matrix sample_background(const Matrix& x, std::size_t count, std::uint64_t seed) {
  const auto m = static_cast<std::size_t>(x.rows());
  std::vector<std::size_t> idx(m);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (count < m) {
    Rng rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(count);
    std::sort(idx.begin(), idx.end());
  }
  return select_rows(x, idx);
}

// Coalition masks (rows of 0/1) with their regression weights. Empty and
// full coalitions are excluded; they enter through the efficiency
// constraint.
struct CoalitionDesign {
  Matrix masks;
  Vector weights;
  bool exhaustive = false;
};

namespace detail {

inline double binomial(std::size_t n, std::size_t k) {
  double r = 1;
  for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

inline double shapley_kernel(std::size_t d, std::size_t s) {
  return static_cast<double>(d - 1) /
         (binomial(d, s) * static_cast<double>(s) * static_cast<double>(d - s));
}

}  // namespace detail

inline std::size_t default_coalitions(std::size_t d) {
  if (d >= 12) return 2048;
  return std::min<std::size_t>((std::size_t{1} << d) - 2, 2048);
}

inline CoalitionDesign make_coalitions(std::size_t d, std::size_t requested, std::uint64_t seed) {
  require(d >= 1, "need at least one feature");
  CoalitionDesign cd;
  if (d == 1) {
    cd.masks.resize(0, 1);
    cd.weights.resize(0);
    cd.exhaustive = true;
    return cd;
  }
  const std::size_t n = requested ? requested : default_coalitions(d);
  require(n >= d, "n_coalitions must be at least d");
  const bool enumerate = d < 63 && (std::size_t{1} << d) - 2 <= n;
  const auto di = static_cast<Eigen::Index>(d);
  if (enumerate) {
    const std::size_t total = (std::size_t{1} << d) - 2;
    cd.masks.resize(static_cast<Eigen::Index>(total), di);
    cd.weights.resize(static_cast<Eigen::Index>(total));
    for (std::size_t mask = 1; mask <= total; ++mask) {
      const auto r = static_cast<Eigen::Index>(mask - 1);
      std::size_t s = 0;
      for (std::size_t j = 0; j < d; ++j) {
        const bool on = (mask >> j) & 1u;
        cd.masks(r, static_cast<Eigen::Index>(j)) = on;
        s += on;
      }
      cd.weights(r) = detail::shapley_kernel(d, s);
    }
    cd.exhaustive = true;
  } else {
    // Paired sampling: sizes drawn in proportion to the kernel's total mass
    // per size, each coalition followed by its complement, equal weights.
    Rng rng(seed);
    std::vector<double> size_mass(d - 1);
    for (std::size_t s = 1; s < d; ++s)
      size_mass[s - 1] = static_cast<double>(d - 1) / (static_cast<double>(s) * static_cast<double>(d - s));
    std::discrete_distribution<std::size_t> pick_size(size_mass.begin(), size_mass.end());
    const std::size_t pairs = (n + 1) / 2;
    cd.masks = Matrix::Zero(static_cast<Eigen::Index>(2 * pairs), di);
    std::vector<std::size_t> order(d);
    for (std::size_t p = 0; p < pairs; ++p) {
      const std::size_t s = pick_size(rng) + 1;
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), rng);
      const auto r = static_cast<Eigen::Index>(2 * p);
      cd.masks.row(r + 1).setOnes();
      for (std::size_t k = 0; k < s; ++k) {
        cd.masks(r, static_cast<Eigen::Index>(order[k])) = 1;
        cd.masks(r + 1, static_cast<Eigen::Index>(order[k])) = 0;
      }
    }
    cd.weights = Vector::Ones(cd.masks.rows());
  }
  cd.weights /= cd.weights.sum();
  return cd;
}

namespace detail {

// Mean model output over the background with the features in `mask` taken
// from x. One batched evaluation for all masks.
inline Vector coalition_values(const Evaluator& f, const Vector& x, const Matrix& background,
                               const Matrix& masks) {
  const auto k = background.rows();
  const auto c = masks.rows();
  Matrix batch(c * k, background.cols());
  for (Eigen::Index s = 0; s < c; ++s) {
    auto block = batch.middleRows(s * k, k);
    block = background;
    for (Eigen::Index j = 0; j < masks.cols(); ++j)
      if (masks(s, j) != 0) block.col(j).setConstant(x(j));
  }
  const Vector out = f(batch);
  require(out.size() == c * k, "evaluator returned the wrong number of outputs");
  Vector v(c);
  for (Eigen::Index s = 0; s < c; ++s) v(s) = out.segment(s * k, k).mean();
  return v;
}

inline Explanation solve_kernel_shap(const CoalitionDesign& cd, const Vector& v, double base,
                                     double fx, double ridge) {
  const auto d = cd.masks.cols();
  Explanation e;
  e.base_value = base;
  e.target = fx;
  e.values = Vector::Zero(d);
  const double total = fx - base;
  if (d == 1) {
    e.values(0) = total;
    return e;
  }
  // Eliminate the last coordinate with the efficiency constraint
  // sum(phi) = f(x) - base, then solve the weighted normal equations.
  const Eigen::Index q = d - 1;
  Matrix a = cd.masks.leftCols(q).colwise() - cd.masks.col(q);
  Vector t = v.array() - base - cd.masks.col(q).array() * total;
  const Matrix aw = a.transpose() * cd.weights.asDiagonal();
  Matrix gram = aw * a;
  if (!cd.exhaustive) gram.diagonal().array() += ridge;
  Eigen::LDLT<Matrix> ldlt(gram);
  require(ldlt.info() == Eigen::Success && ldlt.isPositive() && ldlt.rcond() > 1e-14,
          "Kernel SHAP regression system is singular");
  const Vector phi = ldlt.solve(aw * t);
  e.values.head(q) = phi;
  e.values(q) = total - phi.sum();
  return e;
}

}  // namespace detail

inline Explanation kernel_shap(const Evaluator& f, const Vector& x, const ShapConfig& cfg,
                               const CoalitionDesign* design = nullptr) {
  const auto d = static_cast<std::size_t>(x.size());
  require(cfg.background.rows() >= 1, "background needs at least one row");
  require(static_cast<std::size_t>(cfg.background.cols()) == d, "background width mismatch");
  CoalitionDesign local;
  if (!design) {
    local = make_coalitions(d, cfg.n_coalitions, cfg.seed);
    design = &local;
  }
  const double base = f(cfg.background).mean();
  const double fx = f(x.transpose())(0);
  const Vector v = detail::coalition_values(f, x, cfg.background, design->masks);
  return detail::solve_kernel_shap(*design, v, base, fx, cfg.ridge);
}

// Exact Shapley values over all 2^d coalitions with the same marginal
// value function.
inline Explanation exact_shapley(const Evaluator& f, const Vector& x, const Matrix& background) {
  const auto d = static_cast<std::size_t>(x.size());
  require(d >= 1 && d <= 15, "exact Shapley enumeration supports 1 <= d <= 15");
  require(static_cast<std::size_t>(background.cols()) == d && background.rows() >= 1,
          "background shape mismatch");
  const std::size_t count = std::size_t{1} << d;
  Matrix masks(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(d));
  for (std::size_t s = 0; s < count; ++s)
    for (std::size_t j = 0; j < d; ++j)
      masks(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(j)) = (s >> j) & 1u;
  const Vector v = detail::coalition_values(f, x, background, masks);

  std::vector<double> fact(d + 1, 1.0);
  for (std::size_t i = 1; i <= d; ++i) fact[i] = fact[i - 1] * static_cast<double>(i);
  Explanation e;
  e.values = Vector::Zero(static_cast<Eigen::Index>(d));
  for (std::size_t s = 0; s < count; ++s) {
    const auto size = static_cast<std::size_t>(std::popcount(s));
    if (size == d) continue;
    const double w = fact[size] * fact[d - size - 1] / fact[d];
    for (std::size_t j = 0; j < d; ++j) {
      if ((s >> j) & 1u) continue;
      const double gain = v(static_cast<Eigen::Index>(s | (std::size_t{1} << j))) -
                          v(static_cast<Eigen::Index>(s));
      e.values(static_cast<Eigen::Index>(j)) += w * gain;
    }
  }
  e.base_value = v(0);
  e.target = v(static_cast<Eigen::Index>(count - 1));
  return e;
}

// Row-wise Kernel SHAP with one coalition sample shared by every row, so
// equal rows get equal explanations.
inline ExplanationSet explain_set(const Evaluator& f, const Matrix& x, const ShapConfig& cfg,
                                  std::vector<std::string> feature_names = {},
                                  std::size_t threads = 1) {
  require(x.rows() >= 1, "nothing to explain");
  const auto d = static_cast<std::size_t>(x.cols());
  if (feature_names.empty())
    for (std::size_t j = 0; j < d; ++j) feature_names.push_back("f" + std::to_string(j));
  require(feature_names.size() == d, "feature name count mismatch");
  const auto design = make_coalitions(d, cfg.n_coalitions, cfg.seed);
  ExplanationSet out;
  out.values.resize(x.rows(), x.cols());
  out.base.resize(x.rows());
  out.target.resize(x.rows());
  out.feature_names = std::move(feature_names);
  parallel_for(static_cast<std::size_t>(x.rows()), threads, [&](std::size_t i) {
    const auto r = static_cast<Eigen::Index>(i);
    const auto e = kernel_shap(f, x.row(r).transpose(), cfg, &design);
    out.values.row(r) = e.values.transpose();
    out.base(r) = e.base_value;
    out.target(r) = e.target;
  });
  return out;
}

// Header: feature names, base, target.
inline void write_explanations_csv(const ExplanationSet& e, const std::filesystem::path& path) {
  std::ofstream out(path);
  require(out.good(), "cannot write " + path.string());
  for (const auto& n : e.feature_names) out << n << ',';
  out << "base,target\n";
  char buf[32];
  const auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
  };
  for (std::size_t i = 0; i < e.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (Eigen::Index j = 0; j < e.values.cols(); ++j) {
      put(e.values(r, j));
      out << ',';
    }
    put(e.base(r));
    out << ',';
    put(e.target(r));
    out << '\n';
  }
}

}  // namespace pfair
