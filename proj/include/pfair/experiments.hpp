#pragma once

#include "pfair/mitigation.hpp"

namespace pfair {

// Generated, split 4:1 and z-scored with training statistics.
inline SplitDataset prepare_synthetic(SyntheticConfig cfg, double ratio = 0.8) {
  const auto ds = generate_synthetic(cfg);
  return normalize_split(train_test_split(ds, ratio, cfg.seed)).first;
}

inline std::vector<std::string> synthetic_fair_features() { return {"x1", "x2"}; }
inline std::vector<std::string> synthetic_all_features() { return {"x1", "x2", "xs", "xp"}; }

// Pool-adjacent-violators fit of a non-increasing sequence.
inline std::vector<double> isotonic_nonincreasing(const std::vector<double>& v) {
  struct Block {
    double sum;
    std::size_t count;
  };
  std::vector<Block> blocks;
  for (double x : v) {
    blocks.push_back({x, 1});
    while (blocks.size() > 1) {
      const auto& b = blocks[blocks.size() - 1];
      const auto& a = blocks[blocks.size() - 2];
      if (a.sum / static_cast<double>(a.count) >= b.sum / static_cast<double>(b.count)) break;
      const Block merged{a.sum + b.sum, a.count + b.count};
      blocks.pop_back();
      blocks.back() = merged;
    }
  }
  std::vector<double> out;
  for (const auto& b : blocks) out.insert(out.end(), b.count, b.sum / static_cast<double>(b.count));
  return out;
}

inline double median(std::vector<double> v) {
  require(!v.empty(), "median of an empty sample");
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct Summary {
  double mean = 0, stddev = 0, median = 0;
};

inline Summary summarize(const std::vector<double>& v) {
  Summary s;
  s.median = pfair::median(v);
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  for (double x : v) s.stddev += (x - s.mean) * (x - s.mean);
  s.stddev = v.size() > 1 ? std::sqrt(s.stddev / static_cast<double>(v.size() - 1)) : 0.0;
  return s;
}

inline std::vector<std::uint64_t> seed_range(std::uint64_t first, std::size_t count) {
  std::vector<std::uint64_t> s(count);
  std::iota(s.begin(), s.end(), first);
  return s;
}

inline std::vector<double> linspace(double lo, double hi, std::size_t points) {
  require(points >= 1, "grid needs at least one point");
  if (points == 1) return {lo};
  std::vector<double> g(points);
  for (std::size_t i = 0; i < points; ++i)
    g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
  return g;
}

// ---------------------------------------------------------------------------
// w_s sweep: logistic regression on the fair features plus the sensitive
// column, with the sensitive weight overwritten along a grid.

struct WsSweepConfig {
  double lo = 0.0, hi = 5.0;
  std::size_t points = 50;
  std::vector<std::uint64_t> seeds = seed_range(0, 10);
  SyntheticConfig data;
  TrainConfig train;
  AuditConfig audit;
};

struct WsRow {
  double ws = 0;
  double ws_normalized = 0;
  Summary gpf;
  double isotonic = 0;  // smoothed median
  std::vector<double> per_seed;
};

inline std::vector<WsRow> sweep_ws(const WsSweepConfig& cfg) {
  require(cfg.hi >= cfg.lo, "w_s grid upper bound is below the lower bound");
  require(!cfg.seeds.empty(), "sweep needs at least one seed");
  const auto grid = linspace(cfg.lo, cfg.hi, cfg.points);
  std::vector<WsRow> rows(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    rows[g].ws = grid[g];
    rows[g].ws_normalized = cfg.hi > 0 ? grid[g] / cfg.hi : 0.0;
  }
  for (auto seed : cfg.seeds) {
    SyntheticConfig dcfg = cfg.data;
    dcfg.seed = seed;
    const auto split = prepare_synthetic(dcfg);
    TrainConfig tcfg = cfg.train;
    tcfg.seed = seed;
    auto features = synthetic_fair_features();
    features.push_back(split.train.feature_names[split.train.sensitive_index]);
    Classifier base = fit_classifier(ModelKind::logistic, split.train, features, tcfg);
    AuditConfig acfg = cfg.audit;
    acfg.seed = seed;
    for (std::size_t g = 0; g < grid.size(); ++g) {
      Classifier m = base;
      m.net = set_sensitive_weight(std::get<LogisticModel>(base.net), features.size() - 1, grid[g]);
      rows[g].per_seed.push_back(gpf_fae(m, split.test, split.train, acfg).value);
    }
  }
  std::vector<double> medians;
  for (auto& r : rows) {
    r.gpf = summarize(r.per_seed);
    medians.push_back(r.gpf.median);
  }
  const auto iso = isotonic_nonincreasing(medians);
  for (std::size_t g = 0; g < rows.size(); ++g) rows[g].isotonic = iso[g];
  return rows;
}

// ---------------------------------------------------------------------------
// n sweep: GPF_FAE of one model for several pair counts, over audit seeds.

struct NRow {
  std::size_t n = 0;
  Summary gpf;
};

inline std::vector<NRow> sweep_n(const Classifier& model, const SplitDataset& split,
                                 const std::vector<std::size_t>& ns,
                                 const std::vector<std::uint64_t>& seeds, AuditConfig cfg) {
  require(!seeds.empty(), "sweep needs at least one seed");
  const TabularDataset pool = cfg.pool == PoolScope::test ? split.test : concat_rows(split.train, split.test);
  std::vector<NRow> rows;
  for (auto n : ns) {
    require(n <= pool.rows(), "n = " + std::to_string(n) + " exceeds the pool of " +
                                  std::to_string(pool.rows()) + " rows");
    cfg.n_pairs = n;
    std::vector<double> vals;
    for (auto s : seeds) {
      cfg.seed = s;
      vals.push_back(gpf_fae(model, pool, split.train, cfg).value);
    }
    rows.push_back({n, summarize(vals)});
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Pool-size sweep on nested pools drawn from train + test.

struct PoolRow {
  std::size_t pool_size = 0;
  Summary mean_distance;
  Summary gpf;
};

inline std::vector<PoolRow> sweep_pool(const Classifier& model, const SplitDataset& split,
                                       const std::vector<std::size_t>& sizes,
                                       const std::vector<std::uint64_t>& seeds, AuditConfig cfg) {
  require(!seeds.empty(), "sweep needs at least one seed");
  const TabularDataset full = concat_rows(split.train, split.test);
  std::vector<PoolRow> rows(sizes.size());
  std::vector<std::vector<double>> dist(sizes.size()), gpf(sizes.size());
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    require(sizes[i] >= 2 * cfg.n_pairs, "pool of " + std::to_string(sizes[i]) +
                                             " rows is smaller than 2n = " +
                                             std::to_string(2 * cfg.n_pairs));
    require(sizes[i] <= full.rows(), "pool size exceeds the dataset");
  }
  for (auto s : seeds) {
    std::vector<std::size_t> order(full.rows());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(s, 6));
    std::shuffle(order.begin(), order.end(), rng);
    cfg.seed = s;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      std::vector<std::size_t> rows_i(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(sizes[i]));
      std::sort(rows_i.begin(), rows_i.end());
      const auto g = gpf_fae(model, full.subset(rows_i), split.train, cfg);
      dist[i].push_back(g.pairs.mean_distance());
      gpf[i].push_back(g.value);
    }
  }
  for (std::size_t i = 0; i < sizes.size(); ++i)
    rows[i] = {sizes[i], summarize(dist[i]), summarize(gpf[i])};
  return rows;
}

// ---------------------------------------------------------------------------
// Decision boundaries on the PCA plane of the reference model's inputs.

struct BoundaryGrid {
  std::vector<std::string> models;  // column labels
  Matrix coords;                    // r^2 x 2
  std::vector<std::vector<int>> predictions;  // one per model
  PcaResult pca;

  // Grid points where model a and model b disagree.
  std::size_t disagreements(std::size_t a, std::size_t b) const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < predictions[a].size(); ++i) n += predictions[a][i] != predictions[b][i];
    return n;
  }
};

// `models[0]` fixes the input space; every other model must use a subset of
// its features.
inline BoundaryGrid decision_boundaries(const std::vector<std::pair<std::string, const Classifier*>>& models,
                                        const TabularDataset& data, std::size_t resolution) {
  require(!models.empty(), "no models to draw");
  require(resolution >= 2, "grid resolution must be at least 2");
  const Classifier& ref = *models.front().second;
  BoundaryGrid out;
  out.pca = pca_project(model_inputs(ref, data), 2);
  const Matrix& p = out.pca.projected;
  const auto r = static_cast<Eigen::Index>(resolution);
  out.coords.resize(r * r, 2);
  const Vector lo = p.colwise().minCoeff().transpose(), hi = p.colwise().maxCoeff().transpose();
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < r; ++j) {
      out.coords(i * r + j, 0) = lo(0) + (hi(0) - lo(0)) * static_cast<double>(j) / static_cast<double>(r - 1);
      out.coords(i * r + j, 1) = lo(1) + (hi(1) - lo(1)) * static_cast<double>(i) / static_cast<double>(r - 1);
    }
  const Matrix points = out.pca.reconstruct(out.coords);
  for (const auto& [name, m] : models) {
    std::vector<std::size_t> cols;
    for (const auto& f : m->features) {
      const auto it = std::find(ref.features.begin(), ref.features.end(), f);
      require(it != ref.features.end(), "model " + name + " uses feature " + f +
                                            " outside the reference input space");
      cols.push_back(static_cast<std::size_t>(it - ref.features.begin()));
    }
    out.models.push_back(name);
    out.predictions.push_back(m->labels(select_columns(points, cols)));
  }
  return out;
}

}  // namespace pfair
