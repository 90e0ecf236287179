#pragma once

#include "pfair/attribution.hpp"
#include "pfair/data.hpp"
#include "pfair/model.hpp"
#include "pfair/two_sample.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <limits>

namespace pfair {

// ---------------------------------------------------------------------------
// Training on a dataset

enum class ModelKind { mlp, logistic };

// Trains a fresh model on the named columns of `data`.
inline Classifier fit_classifier(ModelKind kind, const TabularDataset& data,
                                 std::vector<std::string> features, const TrainConfig& cfg,
                                 std::vector<double>* loss_trace = nullptr) {
  require(!features.empty(), "a model needs at least one feature");
  std::vector<std::size_t> cols;
  for (const auto& f : features) cols.push_back(data.index_of(f));
  const Matrix x = select_columns(data.features, cols);
  const Vector y = data.label_vector();
  const auto groups = data.group_indicator();
  Classifier c;
  c.features = std::move(features);
  c.config = cfg;
  const auto d = cols.size();
  if (kind == ModelKind::mlp) {
    if (c.config.hidden_size == 0) c.config.hidden_size = default_hidden_size(d);
    auto res = train(init_mlp(d, c.config.hidden_size, cfg.seed), x, y, c.config, &groups);
    if (loss_trace) *loss_trace = std::move(res.loss_trace);
    c.net = std::move(res.model);
  } else {
    auto res = train(init_logistic(d), x, y, c.config, &groups);
    if (loss_trace) *loss_trace = std::move(res.loss_trace);
    c.net = std::move(res.model);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Similar-pair selection

// Matched samples: row i of group1_rows (advantaged) is paired with row i of
// group2_rows (disadvantaged). Indices address the pool.
struct PairSelection {
  std::vector<std::size_t> group1_rows;
  std::vector<std::size_t> group2_rows;
  std::vector<double> distances;
  std::size_t pool_size = 0;
  std::uint64_t seed = 0;

  std::size_t size() const { return group1_rows.size(); }
  double mean_distance() const {
    if (distances.empty()) return 0.0;
    double s = 0;
    for (double d : distances) s += d;
    return s / static_cast<double>(distances.size());
  }
};

namespace detail {

// Nearest row of `candidates` to `anchor`; ties go to the lowest row index
// because candidates are scanned in increasing order.
inline std::pair<std::size_t, double> nearest(const Matrix& x, std::size_t anchor,
                                              const std::vector<std::size_t>& candidates) {
  std::size_t best = candidates.front();
  double best_d = std::numeric_limits<double>::infinity();
  const auto a = x.row(static_cast<Eigen::Index>(anchor));
  for (auto c : candidates) {
    const double d = (x.row(static_cast<Eigen::Index>(c)) - a).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return {best, std::sqrt(best_d)};
}

}  // namespace detail

// First floor(n/2) pairs: anchors drawn without replacement from the
// advantaged group, partner = nearest disadvantaged row. Remaining pairs
// reverse the roles. Partners may repeat.
inline PairSelection select_pairs(const Matrix& x, const std::vector<int>& advantaged, std::size_t n,
                                  std::uint64_t seed) {
  require(n >= 2, "need at least two pairs");
  require(static_cast<std::size_t>(x.rows()) == advantaged.size(), "group vector length mismatch");
  std::vector<std::size_t> d1, d2;
  for (std::size_t i = 0; i < advantaged.size(); ++i) (advantaged[i] ? d1 : d2).push_back(i);
  const std::size_t first_half = n / 2;
  const std::size_t second_half = n - first_half;
  require(d1.size() >= first_half,
          "advantaged group has " + std::to_string(d1.size()) + " rows, need " +
              std::to_string(first_half) + " anchors");
  require(d2.size() >= second_half,
          "disadvantaged group has " + std::to_string(d2.size()) + " rows, need " +
              std::to_string(second_half) + " anchors");

  Rng rng(seed);
  PairSelection sel;
  sel.pool_size = advantaged.size();
  sel.seed = seed;
  auto anchors1 = d1;
  std::shuffle(anchors1.begin(), anchors1.end(), rng);
  for (std::size_t k = 0; k < first_half; ++k) {
    const auto [partner, dist] = detail::nearest(x, anchors1[k], d2);
    sel.group1_rows.push_back(anchors1[k]);
    sel.group2_rows.push_back(partner);
    sel.distances.push_back(dist);
  }
  auto anchors2 = d2;
  std::shuffle(anchors2.begin(), anchors2.end(), rng);
  for (std::size_t k = 0; k < second_half; ++k) {
    const auto [partner, dist] = detail::nearest(x, anchors2[k], d1);
    sel.group1_rows.push_back(partner);
    sel.group2_rows.push_back(anchors2[k]);
    sel.distances.push_back(dist);
  }
  return sel;
}

// ---------------------------------------------------------------------------
// Distributive metrics on thresholded predictions.

namespace detail {

inline double rate(const std::vector<int>& pred, const std::vector<int>& groups, int g,
                   const std::vector<int>* truth, int y, const char* cell) {
  std::size_t n = 0, pos = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (groups[i] != g) continue;
    if (truth && (*truth)[i] != y) continue;
    ++n;
    pos += pred[i] == 1;
  }
  require(n > 0, std::string("empty conditioning cell: ") + cell);
  return static_cast<double>(pos) / static_cast<double>(n);
}

inline void check_lengths(const std::vector<int>& a, const std::vector<int>& b) {
  require(a.size() == b.size(), "metric inputs differ in length");
}

}  // namespace detail

// groups: 1 for the advantaged group, 0 otherwise.
inline double dp(const std::vector<int>& pred, const std::vector<int>& groups) {
  detail::check_lengths(pred, groups);
  return std::abs(detail::rate(pred, groups, 1, nullptr, 0, "s=s1") -
                  detail::rate(pred, groups, 0, nullptr, 0, "s=s2"));
}

inline double eo(const std::vector<int>& pred, const std::vector<int>& truth,
                 const std::vector<int>& groups) {
  detail::check_lengths(pred, groups);
  detail::check_lengths(truth, groups);
  return std::abs(detail::rate(pred, groups, 1, &truth, 1, "s=s1,y=1") -
                  detail::rate(pred, groups, 0, &truth, 1, "s=s2,y=1"));
}

inline double eod(const std::vector<int>& pred, const std::vector<int>& truth,
                  const std::vector<int>& groups) {
  detail::check_lengths(pred, groups);
  detail::check_lengths(truth, groups);
  const double fpr = std::abs(detail::rate(pred, groups, 1, &truth, 0, "s=s1,y=0") -
                              detail::rate(pred, groups, 0, &truth, 0, "s=s2,y=0"));
  const double tpr = std::abs(detail::rate(pred, groups, 1, &truth, 1, "s=s1,y=1") -
                              detail::rate(pred, groups, 0, &truth, 1, "s=s2,y=1"));
  return 0.5 * (fpr + tpr);
}

inline double accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
  detail::check_lengths(pred, truth);
  require(!pred.empty(), "accuracy of an empty set");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == truth[i];
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

struct IndividualFairness {
  double value = 0;
  bool applicable = true;  // false when the pair is farther apart than epsilon
};

inline IndividualFairness individual_fairness(const Classifier& model, const Vector& xi,
                                              const Vector& xj, double epsilon) {
  Matrix both(2, xi.size());
  both.row(0) = xi.transpose();
  both.row(1) = xj.transpose();
  const auto y = model.labels(both);
  return {static_cast<double>(std::abs(y[0] - y[1])), euclidean(xi, xj) <= epsilon};
}

// ---------------------------------------------------------------------------
// GPF_FAE

enum class PoolScope { test, full };

// Which model output the explanations attribute.
enum class OutputScale { probability, logit };

struct AuditConfig {
  std::size_t n_pairs = 100;
  std::size_t background_size = 100;
  std::size_t n_coalitions = 0;
  double ridge = 1e-6;
  KernelConfig kernel;
  std::size_t n_permutations = 1000;
  double procedural_threshold = 0.05;
  double distributive_threshold = 0.10;
  PoolScope pool = PoolScope::test;
  OutputScale output = OutputScale::logit;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

inline void to_json(nlohmann::ordered_json& j, const AuditConfig& c) {
  j = nlohmann::ordered_json{{"n_pairs", c.n_pairs},
                             {"background_size", c.background_size},
                             {"n_coalitions", c.n_coalitions},
                             {"ridge", c.ridge},
                             {"kernel", c.kernel},
                             {"n_permutations", c.n_permutations},
                             {"procedural_threshold", c.procedural_threshold},
                             {"distributive_threshold", c.distributive_threshold},
                             {"pool", c.pool == PoolScope::test ? "test" : "full"},
                             {"output", c.output == OutputScale::logit ? "logit" : "probability"},
                             {"seed", c.seed}};
}

inline void from_json(const nlohmann::ordered_json& j, AuditConfig& c) {
  c.n_pairs = j.value("n_pairs", c.n_pairs);
  c.background_size = j.value("background_size", c.background_size);
  c.n_coalitions = j.value("n_coalitions", c.n_coalitions);
  c.ridge = j.value("ridge", c.ridge);
  if (j.contains("kernel")) {
    const auto& k = j["kernel"];
    c.kernel.kind = kernel_kind_from_string(k.value("kind", std::string("exponential")));
    if (k.contains("bandwidth") && k["bandwidth"].is_number())
      c.kernel.bandwidth = k["bandwidth"].get<double>();
    else
      c.kernel.bandwidth.reset();
  }
  c.n_permutations = j.value("n_permutations", c.n_permutations);
  c.procedural_threshold = j.value("procedural_threshold", c.procedural_threshold);
  c.distributive_threshold = j.value("distributive_threshold", c.distributive_threshold);
  c.pool = j.value("pool", std::string("test")) == "full" ? PoolScope::full : PoolScope::test;
  c.output = j.value("output", std::string("logit")) == "logit" ? OutputScale::logit
                                                                     : OutputScale::probability;
  c.seed = j.value("seed", c.seed);
}

// Sub-streams of the audit seed.
enum SeedStream : std::uint64_t { kPairsStream = 1, kBackgroundStream, kCoalitionStream, kPermutationStream };

inline Evaluator evaluator_for(const Classifier& model, OutputScale scale = OutputScale::probability) {
  if (scale == OutputScale::logit) return [&model](const Matrix& x) { return model.logit(x); };
  return [&model](const Matrix& x) { return model.proba(x); };
}

// The model's input columns of a dataset.
inline Matrix model_inputs(const Classifier& model, const TabularDataset& ds) {
  std::vector<std::size_t> cols;
  cols.reserve(model.features.size());
  for (const auto& f : model.features) cols.push_back(ds.index_of(f));
  return select_columns(ds.features, cols);
}

struct GpfResult {
  double value = 1.0;  // permutation p-value, larger is fairer
  TwoSampleResult test;
  PairSelection pairs;
  ExplanationSet group1;
  ExplanationSet group2;
};

// Pairs are matched in the model's input space; explanations use a
// background drawn from `background_source` (normally the training split).
inline GpfResult gpf_fae(const Classifier& model, const TabularDataset& pool,
                         const TabularDataset& background_source, const AuditConfig& cfg) {
  const Matrix x = model_inputs(model, pool);
  GpfResult r;
  r.pairs = select_pairs(x, pool.group_indicator(), cfg.n_pairs, derive_seed(cfg.seed, kPairsStream));
  ShapConfig shap;
  shap.background = sample_background(model_inputs(model, background_source), cfg.background_size,
                                      derive_seed(cfg.seed, kBackgroundStream));
  shap.n_coalitions = cfg.n_coalitions;
  shap.ridge = cfg.ridge;
  shap.seed = derive_seed(cfg.seed, kCoalitionStream);
  const auto f = evaluator_for(model, cfg.output);
  r.group1 = explain_set(f, select_rows(x, r.pairs.group1_rows), shap, model.features, cfg.threads);
  r.group2 = explain_set(f, select_rows(x, r.pairs.group2_rows), shap, model.features, cfg.threads);
  PermutationConfig perm{cfg.n_permutations, derive_seed(cfg.seed, kPermutationStream), cfg.threads};
  r.test = permutation_test(r.group1.values, r.group2.values, cfg.kernel, perm);
  r.value = r.test.p_value;
  return r;
}

// ---------------------------------------------------------------------------
// Audit

struct AuditReport {
  double gpf_fae = 1.0;
  double dp = 0, eo = 0, eod = 0;
  double accuracy = 0;
  double mean_pair_distance = 0;
  double mmd2 = 0;
  double bandwidth = 0;
  std::size_t n_pairs = 0;
  std::size_t pool_size = 0;
  bool procedural_fair = true;
  bool dp_fair = true, eo_fair = true, eod_fair = true;
  std::vector<std::string> features;
  nlohmann::ordered_json config;

  bool operator==(const AuditReport&) const = default;
};

inline nlohmann::ordered_json report_to_json(const AuditReport& r) {
  const auto verdict = [](bool fair) { return fair ? "fair" : "unfair"; };
  nlohmann::ordered_json j;
  j["gpf_fae"] = r.gpf_fae;
  j["dp"] = r.dp;
  j["eo"] = r.eo;
  j["eod"] = r.eod;
  j["accuracy"] = r.accuracy;
  j["mean_pair_distance"] = r.mean_pair_distance;
  j["mmd2"] = r.mmd2;
  j["bandwidth"] = r.bandwidth;
  j["n_pairs"] = r.n_pairs;
  j["pool_size"] = r.pool_size;
  j["verdicts"] = {{"procedural", verdict(r.procedural_fair)},
                   {"distributive",
                    {{"dp", verdict(r.dp_fair)}, {"eo", verdict(r.eo_fair)}, {"eod", verdict(r.eod_fair)}}}};
  j["features"] = r.features;
  j["config"] = r.config;
  return j;
}

inline AuditReport report_from_json(const nlohmann::ordered_json& j) {
  AuditReport r;
  r.gpf_fae = j.at("gpf_fae").get<double>();
  r.dp = j.at("dp").get<double>();
  r.eo = j.at("eo").get<double>();
  r.eod = j.at("eod").get<double>();
  r.accuracy = j.at("accuracy").get<double>();
  r.mean_pair_distance = j.at("mean_pair_distance").get<double>();
  r.mmd2 = j.at("mmd2").get<double>();
  r.bandwidth = j.at("bandwidth").get<double>();
  r.n_pairs = j.at("n_pairs").get<std::size_t>();
  r.pool_size = j.at("pool_size").get<std::size_t>();
  const auto& v = j.at("verdicts");
  r.procedural_fair = v.at("procedural") == "fair";
  r.dp_fair = v.at("distributive").at("dp") == "fair";
  r.eo_fair = v.at("distributive").at("eo") == "fair";
  r.eod_fair = v.at("distributive").at("eod") == "fair";
  r.features = j.at("features").get<std::vector<std::string>>();
  r.config = j.at("config");
  return r;
}

inline std::string report_csv_header() {
  return "gpf_fae,dp,eo,eod,accuracy,mean_pair_distance,n_pairs,pool_size,procedural_fair";
}

inline std::string report_csv_row(const AuditReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%zu,%zu,%d", r.gpf_fae, r.dp, r.eo,
                r.eod, r.accuracy, r.mean_pair_distance, r.n_pairs, r.pool_size,
                r.procedural_fair ? 1 : 0);
  return buf;
}

inline TabularDataset concat_rows(const TabularDataset& a, const TabularDataset& b) {
  require(a.feature_names == b.feature_names, "cannot stack datasets with different columns");
  TabularDataset out = a;
  out.features.resize(a.features.rows() + b.features.rows(), a.features.cols());
  out.features << a.features, b.features;
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  return out;
}

// Accuracy and distributive metrics on the test split; GPF_FAE on the
// configured pool.
inline AuditReport audit(const Classifier& model, const SplitDataset& split, const AuditConfig& cfg,
                         GpfResult* details = nullptr) {
  AuditReport r;
  const Matrix xt = model_inputs(model, split.test);
  const auto pred = model.labels(xt);
  const auto groups = split.test.group_indicator();
  r.accuracy = accuracy(pred, split.test.labels);
  r.dp = dp(pred, groups);
  r.eo = eo(pred, split.test.labels, groups);
  r.eod = eod(pred, split.test.labels, groups);

  const TabularDataset pool =
      cfg.pool == PoolScope::test ? split.test : concat_rows(split.train, split.test);
  auto g = gpf_fae(model, pool, split.train, cfg);
  r.gpf_fae = g.value;
  r.mmd2 = g.test.statistic;
  r.bandwidth = g.test.bandwidth;
  r.mean_pair_distance = g.pairs.mean_distance();
  r.n_pairs = g.pairs.size();
  r.pool_size = g.pairs.pool_size;
  r.procedural_fair = r.gpf_fae > cfg.procedural_threshold;
  r.dp_fair = r.dp < cfg.distributive_threshold;
  r.eo_fair = r.eo < cfg.distributive_threshold;
  r.eod_fair = r.eod < cfg.distributive_threshold;
  r.features = model.features;
  r.config = cfg;
  if (details) *details = std::move(g);
  return r;
}

}  // namespace pfair
