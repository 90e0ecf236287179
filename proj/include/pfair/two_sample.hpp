#pragma once

#include "pfair/core.hpp"

#include <nlohmann/json.hpp>
#include <numeric>
#include <optional>

namespace pfair {

enum class KernelKind { exponential, gaussian };

struct KernelConfig {
  KernelKind kind = KernelKind::exponential;
  std::optional<double> bandwidth;  // empty: median heuristic

  void validate() const {
    require(!bandwidth || *bandwidth > 0, "fixed kernel bandwidth must be positive");
  }
};

struct PermutationConfig {
  std::size_t n_permutations = 1000;
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  void validate() const { require(n_permutations >= 100, "need at least 100 permutations"); }
};

inline std::string to_string(KernelKind k) {
  return k == KernelKind::exponential ? "exponential" : "gaussian";
}

inline KernelKind kernel_kind_from_string(const std::string& s) {
  if (s == "exponential") return KernelKind::exponential;
  if (s == "gaussian") return KernelKind::gaussian;
  throw Error("unknown kernel kind: " + s);
}

inline void to_json(nlohmann::ordered_json& j, const KernelConfig& c) {
  j = nlohmann::ordered_json{{"kind", to_string(c.kind)}};
  j["bandwidth"] = c.bandwidth ? nlohmann::ordered_json(*c.bandwidth)
                               : nlohmann::ordered_json("median-heuristic");
}

inline void to_json(nlohmann::ordered_json& j, const PermutationConfig& c) {
  j = nlohmann::ordered_json{{"n_permutations", c.n_permutations}, {"seed", c.seed}};
}

inline double euclidean(const Vector& u, const Vector& v) {
  require(u.size() == v.size(), "euclidean: dimension mismatch");
  return (u - v).norm();
}

inline double euclidean(const std::vector<double>& u, const std::vector<double>& v) {
  require(u.size() == v.size(), "euclidean: dimension mismatch");
  double s = 0;
  for (std::size_t i = 0; i < u.size(); ++i) s += (u[i] - v[i]) * (u[i] - v[i]);
  return std::sqrt(s);
}

// All pairwise Euclidean distances between rows of a and rows of b.
inline Matrix pairwise_distances(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.cols(), "pairwise distances need a common dimension");
  Matrix d(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.rows(); ++j) d(i, j) = (a.row(i) - b.row(j)).norm();
  return d;
}

struct Bandwidth {
  double sigma = 1.0;
  bool fallback = false;  // all pooled distances were zero
};

// Median of the nonzero entries above the diagonal of a pooled distance
// matrix.
inline Bandwidth median_heuristic_from_distances(const Matrix& dist) {
  std::vector<double> vals;
  const auto n = dist.rows();
  vals.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      if (dist(i, j) > 0) vals.push_back(dist(i, j));
  if (vals.empty()) return {1.0, true};
  const auto mid = vals.begin() + static_cast<std::ptrdiff_t>(vals.size() / 2);
  std::nth_element(vals.begin(), mid, vals.end());
  double med = *mid;
  if (vals.size() % 2 == 0) med = 0.5 * (med + *std::max_element(vals.begin(), mid));
  return {med, false};
}

inline Bandwidth median_heuristic(const Matrix& pooled) {
  return median_heuristic_from_distances(pairwise_distances(pooled, pooled));
}

inline Bandwidth resolve_bandwidth(const Matrix& pooled, const KernelConfig& cfg) {
  cfg.validate();
  if (cfg.bandwidth) return {*cfg.bandwidth, false};
  return median_heuristic(pooled);
}

inline Bandwidth resolve_bandwidth_from_distances(const Matrix& dist, const KernelConfig& cfg) {
  cfg.validate();
  if (cfg.bandwidth) return {*cfg.bandwidth, false};
  return median_heuristic_from_distances(dist);
}

inline double kernel_value(double distance, KernelKind kind, double sigma) {
  return kind == KernelKind::exponential ? std::exp(-distance / sigma)
                                         : std::exp(-distance * distance / (2.0 * sigma * sigma));
}

inline Matrix kernel_from_distances(const Matrix& dist, KernelKind kind, double sigma) {
  return dist.unaryExpr([&](double v) { return kernel_value(v, kind, sigma); });
}

// Bandwidth resolved on the pooled rows of a and b when median-heuristic.
inline Matrix kernel_matrix(const Matrix& a, const Matrix& b, const KernelConfig& cfg) {
  Matrix pooled(a.rows() + b.rows(), a.cols());
  pooled << a, b;
  const auto bw = resolve_bandwidth(pooled, cfg);
  return kernel_from_distances(pairwise_distances(a, b), cfg.kind, bw.sigma);
}

namespace detail {

// Biased MMD^2 from a pooled kernel matrix given the rows in the first set.
struct PooledKernel {
  Matrix k;
  Vector row_sums;
  double total = 0;

  explicit PooledKernel(Matrix kernel) : k(std::move(kernel)) {
    row_sums = k.rowwise().sum();
    total = row_sums.sum();
  }

  double mmd2(const std::vector<Eigen::Index>& first) const {
    const auto n1 = static_cast<double>(first.size());
    const auto n2 = static_cast<double>(k.rows()) - n1;
    double s11 = 0, r1 = 0;
    for (auto i : first) {
      r1 += row_sums(i);
      for (auto j : first) s11 += k(i, j);
    }
    const double s12 = r1 - s11;
    const double s22 = total - 2.0 * r1 + s11;
    return std::max(0.0, s11 / (n1 * n1) + s22 / (n2 * n2) - 2.0 * s12 / (n1 * n2));
  }
};

inline Matrix pool(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.cols(), "two-sample sets need a common dimension");
  Matrix pooled(a.rows() + b.rows(), a.cols());
  pooled << a, b;
  return pooled;
}

}  // namespace detail

// Biased estimator mean(K11) + mean(K22) - 2 mean(K12).
inline double mmd2(const Matrix& e1, const Matrix& e2, const KernelConfig& cfg) {
  require(e1.rows() >= 2 && e2.rows() >= 2, "MMD needs at least two rows per set");
  const Matrix pooled = detail::pool(e1, e2);
  const Matrix dist = pairwise_distances(pooled, pooled);
  const auto bw = resolve_bandwidth_from_distances(dist, cfg);
  detail::PooledKernel pk(kernel_from_distances(dist, cfg.kind, bw.sigma));
  std::vector<Eigen::Index> first(static_cast<std::size_t>(e1.rows()));
  std::iota(first.begin(), first.end(), Eigen::Index{0});
  return pk.mmd2(first);
}

struct TwoSampleResult {
  double p_value = 1.0;
  double statistic = 0.0;
  double bandwidth = 1.0;
  bool bandwidth_fallback = false;
  std::vector<double> null_statistics;
};

// Permutation test on the pooled kernel matrix; the bandwidth is fixed once
// on the pooled sample. p = (1 + #{null >= observed}) / (1 + P).
inline TwoSampleResult permutation_test(const Matrix& e1, const Matrix& e2, const KernelConfig& kcfg,
                                        const PermutationConfig& pcfg) {
  pcfg.validate();
  require(e1.rows() >= 2 && e2.rows() >= 2, "MMD needs at least two rows per set");
  const Matrix pooled = detail::pool(e1, e2);
  const Matrix dist = pairwise_distances(pooled, pooled);
  const auto bw = resolve_bandwidth_from_distances(dist, kcfg);
  detail::PooledKernel pk(kernel_from_distances(dist, kcfg.kind, bw.sigma));
  const auto n = static_cast<std::size_t>(pooled.rows());
  const auto n1 = static_cast<std::size_t>(e1.rows());

  std::vector<Eigen::Index> first(n1);
  std::iota(first.begin(), first.end(), Eigen::Index{0});
  TwoSampleResult res;
  res.statistic = pk.mmd2(first);
  res.bandwidth = bw.sigma;
  res.bandwidth_fallback = bw.fallback;
  res.null_statistics.resize(pcfg.n_permutations);
  parallel_for(pcfg.n_permutations, pcfg.threads, [&](std::size_t b) {
    Rng rng(derive_seed(pcfg.seed, b));
    std::vector<Eigen::Index> perm(n);
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    perm.resize(n1);
    res.null_statistics[b] = pk.mmd2(perm);
  });
  const double tol = 1e-12 * (1.0 + std::abs(res.statistic));
  std::size_t exceed = 0;
  for (double s : res.null_statistics) exceed += s >= res.statistic - tol;
  res.p_value = static_cast<double>(1 + exceed) / static_cast<double>(1 + pcfg.n_permutations);
  return res;
}

inline double permutation_pvalue(const Matrix& e1, const Matrix& e2, const KernelConfig& kcfg,
                                 const PermutationConfig& pcfg) {
  return permutation_test(e1, e2, kcfg, pcfg).p_value;
}

struct PcaResult {
  Matrix projected;   // m x k
  Matrix components;  // k x d, orthonormal rows
  Vector mean;        // d
  Vector explained_variance_ratio;  // k

  // Maps plane coordinates back into input space.
  Matrix reconstruct(const Matrix& coords) const {
    return (coords * components).rowwise() + mean.transpose();
  }
  Matrix project(const Matrix& x) const {
    return (x.rowwise() - mean.transpose()) * components.transpose();
  }
};

inline PcaResult pca_project(const Matrix& x, std::size_t k = 2) {
  require(x.rows() >= 2, "PCA needs at least two rows");
  require(k >= 1 && k <= static_cast<std::size_t>(x.cols()), "PCA rank exceeds input dimension");
  PcaResult r;
  r.mean = x.colwise().mean().transpose();
  const Matrix centered = x.rowwise() - r.mean.transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const auto ki = static_cast<Eigen::Index>(k);
  Eigen::MatrixXd v = svd.matrixV().leftCols(ki);
  for (Eigen::Index c = 0; c < ki; ++c) {
    Eigen::Index arg = 0;
    v.col(c).cwiseAbs().maxCoeff(&arg);
    if (v(arg, c) < 0) v.col(c) = -v.col(c);
  }
  r.components = v.transpose();
  r.projected = centered * v;
  const Vector sv = svd.singularValues();
  const double total = sv.squaredNorm();
  r.explained_variance_ratio =
      total > 0 ? Vector(sv.head(ki).array().square() / total) : Vector(Vector::Zero(ki));
  return r;
}

}  // namespace pfair
