#pragma once

#include "pfair/fairness.hpp"

namespace pfair {

// ---------------------------------------------------------------------------
// Unfair-feature detection

struct UnfairFeatureSet {
  std::vector<std::size_t> indices;  // into the model's feature list
  std::vector<double> pvalues;       // one per feature
  double threshold = 0.05;
  std::vector<std::string> feature_names;

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (auto i : indices) out.push_back(feature_names[i]);
    return out;
  }
  bool empty() const { return indices.empty(); }
};

// One-dimensional MMD permutation test on each column of E1 vs E2.
inline UnfairFeatureSet detect_unfair_features(const ExplanationSet& e1, const ExplanationSet& e2,
                                               const KernelConfig& kernel,
                                               std::size_t n_permutations, std::uint64_t seed,
                                               double beta = 0.05, std::size_t threads = 1) {
  require(e1.dim() == e2.dim(), "explanation sets differ in width");
  require(beta >= 0 && beta <= 1, "threshold must lie in [0, 1]");
  const auto d = e1.dim();
  UnfairFeatureSet u;
  u.threshold = beta;
  u.feature_names = e1.feature_names;
  u.pvalues.assign(d, 1.0);
  // Features run in parallel; each test is then sequential.
  parallel_for(d, threads, [&](std::size_t j) {
    const auto c = static_cast<Eigen::Index>(j);
    PermutationConfig perm{n_permutations, derive_seed(seed, j), 1};
    u.pvalues[j] = permutation_pvalue(e1.values.col(c), e2.values.col(c), kernel, perm);
  });
  for (std::size_t j = 0; j < d; ++j)
    if (u.pvalues[j] <= beta) u.indices.push_back(j);
  return u;
}

// Reuses the pairs and explanation sets of the GPF_FAE audit.
inline UnfairFeatureSet detect_unfair_features(const GpfResult& gpf, const AuditConfig& cfg,
                                               double beta = 0.05) {
  return detect_unfair_features(gpf.group1, gpf.group2, cfg.kernel, cfg.n_permutations,
                                derive_seed(cfg.seed, 5), beta, cfg.threads);
}

inline nlohmann::ordered_json to_json_value(const UnfairFeatureSet& u) {
  nlohmann::ordered_json j;
  j["features"] = u.names();
  j["indices"] = u.indices;
  j["threshold"] = u.threshold;
  nlohmann::ordered_json p = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < u.pvalues.size(); ++i) p[u.feature_names[i]] = u.pvalues[i];
  j["pvalues"] = p;
  return j;
}

// ---------------------------------------------------------------------------
// Explanation loss

namespace detail {

inline Vector uf_mask(std::size_t d, const std::vector<std::size_t>& ufs) {
  Vector mask = Vector::Zero(static_cast<Eigen::Index>(d));
  for (auto k : ufs) {
    require(k < d, "unfair feature index out of range");
    mask(static_cast<Eigen::Index>(k)) = 1.0;
  }
  return mask;
}

inline double sgn(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

}  // namespace detail

// zeta = sum over unfair features k of (1/m) sum_i |dL_i/dx_ik|, where L_i is
// the BCE loss of row i.
template <BinaryModel M>
double explanation_loss(const M& model, const Matrix& x, const Vector& y,
                        const std::vector<std::size_t>& ufs) {
  if (ufs.empty()) return 0.0;
  const Vector mask = detail::uf_mask(static_cast<std::size_t>(x.cols()), ufs);
  const Matrix g = input_gradient(model, x, y);  // already carries 1/m
  return (g.cwiseAbs() * mask).sum();
}

struct ZetaAndGradient {
  double zeta = 0;
  Vector gradient;  // d zeta / d theta, flat parameter layout
};

// Exact gradient of zeta in closed form. With u_i = d logit_i / d x_i and
// delta_i = p_i - y_i, row i contributes |delta_i u_ik| / m.
inline ZetaAndGradient explanation_loss_gradient(const MlpModel& m, const Matrix& x, const Vector& y,
                                                 const std::vector<std::size_t>& ufs) {
  ZetaAndGradient out;
  out.gradient = Vector::Zero(static_cast<Eigen::Index>(m.parameter_count()));
  if (ufs.empty()) return out;
  const double k = static_cast<double>(x.rows());
  const Vector mask = detail::uf_mask(static_cast<std::size_t>(x.cols()), ufs);
  const auto c = forward(m, x);
  const auto s = detail::logit_slopes(c.logit, y);
  const Matrix dact = (c.active.array().rowwise() * m.w2.transpose().array()).matrix();  // k x h
  const Matrix u = dact * m.w1;                                                          // k x d
  const Matrix g = s.delta.asDiagonal() * u;
  Matrix sign = g.unaryExpr([](double v) { return detail::sgn(v); });
  sign.array().rowwise() *= mask.transpose().array();
  out.zeta = (g.cwiseAbs() * mask).sum() / k;

  // Through delta: a_i = q_i * sum_k S_ik u_ik / m. Through u: E = diag(delta) S / m.
  const Vector a = (sign.cwiseProduct(u).rowwise().sum() / k).cwiseProduct(s.curvature);
  const Matrix e = s.delta.asDiagonal() * sign / k;
  MlpModel grad;
  grad.w1 = dact.transpose() * (a.asDiagonal() * x + e);
  grad.b1 = dact.transpose() * a;
  grad.w2 = c.hidden.transpose() * a +
            c.active.cwiseProduct(e * m.w1.transpose()).colwise().sum().transpose();
  grad.b2 = a.sum();
  out.gradient = grad.parameters();
  return out;
}

inline ZetaAndGradient explanation_loss_gradient(const LogisticModel& m, const Matrix& x,
                                                 const Vector& y,
                                                 const std::vector<std::size_t>& ufs) {
  ZetaAndGradient out;
  out.gradient = Vector::Zero(static_cast<Eigen::Index>(m.parameter_count()));
  if (ufs.empty()) return out;
  const double k = static_cast<double>(x.rows());
  const Vector mask = detail::uf_mask(static_cast<std::size_t>(x.cols()), ufs);
  const auto s = detail::logit_slopes(logits(m, x), y);
  const Matrix g = s.delta * m.w.transpose();
  Matrix sign = g.unaryExpr([](double v) { return detail::sgn(v); });
  sign.array().rowwise() *= mask.transpose().array();
  out.zeta = (g.cwiseAbs() * mask).sum() / k;
  const Vector a = ((sign * m.w) / k).cwiseProduct(s.curvature);
  const Matrix e = s.delta.asDiagonal() * sign / k;
  const auto d = x.cols();
  out.gradient.head(d) = x.transpose() * a + e.colwise().sum().transpose();
  out.gradient(d) = a.sum();
  return out;
}

// ---------------------------------------------------------------------------
// Model modification

struct ModifyConfig {
  double alpha = 15.0;
  std::size_t iterations = 200;
  int norm = 1;
  double learning_rate = 0.01;
  std::uint64_t seed = 0;

  void validate() const {
    require(alpha >= 0 && std::isfinite(alpha), "alpha must be a finite non-negative number");
    require(norm == 1, "only the L1 explanation loss is implemented");
    require(learning_rate > 0, "learning rate must be positive");
  }
};

inline void to_json(nlohmann::ordered_json& j, const ModifyConfig& c) {
  j = nlohmann::ordered_json{{"alpha", c.alpha},
                             {"iterations", c.iterations},
                             {"norm", c.norm},
                             {"learning_rate", c.learning_rate},
                             {"seed", c.seed}};
}

inline void from_json(const nlohmann::ordered_json& j, ModifyConfig& c) {
  c.alpha = j.value("alpha", c.alpha);
  c.iterations = j.value("iterations", c.iterations);
  c.norm = j.value("norm", c.norm);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.seed = j.value("seed", c.seed);
}

template <BinaryModel M>
struct ModifyTrace {
  M model;
  std::vector<double> loss_trace;  // BCE before each step
  std::vector<double> zeta_trace;  // explanation loss before each step
  double final_loss = 0;
  double final_zeta = 0;
};

// tau full-batch Adam steps on BCE + alpha * zeta from the given parameters.
// Adam's moment settings come from `train_cfg`; its rate from `cfg`.
template <BinaryModel M>
ModifyTrace<M> modify_network(M model, const Matrix& x, const Vector& y,
                              const std::vector<std::size_t>& ufs, const ModifyConfig& cfg,
                              TrainConfig train_cfg = {}) {
  cfg.validate();
  require(x.rows() > 0 && x.rows() == y.size(), "training data must be non-empty and aligned");
  train_cfg.learning_rate = cfg.learning_rate;
  Vector params = model.parameters();
  Adam opt(static_cast<std::size_t>(params.size()), train_cfg);
  ModifyTrace<M> out;
  for (std::size_t step = 0; step < cfg.iterations; ++step) {
    model.set_parameters(params);
    auto lg = loss_gradient(model, x, y);
    double zeta = 0;
    if (cfg.alpha != 0.0) {
      const auto zg = explanation_loss_gradient(model, x, y, ufs);
      zeta = zg.zeta;
      lg.gradient += cfg.alpha * zg.gradient;
    } else {
      zeta = explanation_loss(model, x, y, ufs);
    }
    if (!std::isfinite(lg.loss) || !std::isfinite(zeta) || !lg.gradient.allFinite())
      throw Error("model modification diverged at step " + std::to_string(step));
    out.loss_trace.push_back(lg.loss);
    out.zeta_trace.push_back(zeta);
    opt.step(params, lg.gradient);
  }
  model.set_parameters(params);
  out.final_loss = bce_loss(model, x, y);
  out.final_zeta = explanation_loss(model, x, y, ufs);
  out.model = std::move(model);
  return out;
}

struct MitigationResult {
  std::string method;  // "retrain" or "modify"
  Classifier model;
  AuditReport before;
  AuditReport after;
  UnfairFeatureSet ufs;
  std::vector<double> loss_trace;
  std::vector<double> zeta_trace;
  double zeta_initial = 0;
  double zeta_final = 0;
  nlohmann::ordered_json config;

  double accuracy_drop() const { return before.accuracy - after.accuracy; }
  double disagreement = 0;  // fraction of test predictions that changed
};

namespace detail {

inline double disagreement(const Classifier& a, const Classifier& b, const TabularDataset& ds) {
  const auto pa = a.labels(model_inputs(a, ds));
  const auto pb = b.labels(model_inputs(b, ds));
  std::size_t diff = 0;
  for (std::size_t i = 0; i < pa.size(); ++i) diff += pa[i] != pb[i];
  return pa.empty() ? 0.0 : static_cast<double>(diff) / static_cast<double>(pa.size());
}

// The unfair features among a model's inputs as column indices of X.
inline std::vector<std::size_t> uf_columns(const Classifier& model, const UnfairFeatureSet& ufs) {
  std::vector<std::size_t> cols;
  for (const auto& name : ufs.names()) {
    const auto it = std::find(model.features.begin(), model.features.end(), name);
    require(it != model.features.end(), "unfair feature " + name + " is not a model input");
    cols.push_back(static_cast<std::size_t>(it - model.features.begin()));
  }
  return cols;
}

}  // namespace detail

// Drops the unfair columns and retrains from scratch with the original
// hyperparameters and a fresh seed.
inline MitigationResult retrain_without(const Classifier& model, const SplitDataset& split,
                                        const UnfairFeatureSet& ufs, const AuditConfig& audit_cfg,
                                        std::uint64_t seed) {
  const auto drop = ufs.names();
  std::vector<std::string> keep;
  for (const auto& f : model.features)
    if (std::find(drop.begin(), drop.end(), f) == drop.end()) keep.push_back(f);
  require(!keep.empty(), "every feature is unfair; nothing left to retrain on");
  TrainConfig cfg = model.config;
  cfg.seed = seed;
  cfg.hidden_size = model.config.hidden_size;
  MitigationResult r;
  r.method = "retrain";
  r.ufs = ufs;
  r.model = fit_classifier(model.is_mlp() ? ModelKind::mlp : ModelKind::logistic, split.train, keep,
                           cfg, &r.loss_trace);
  r.before = audit(model, split, audit_cfg);
  r.after = audit(r.model, split, audit_cfg);
  r.disagreement = detail::disagreement(model, r.model, split.test);
  r.config = {{"removed", drop}, {"kept", keep}, {"seed", seed}};
  return r;
}

inline MitigationResult modify_model(const Classifier& model, const SplitDataset& split,
                                     const UnfairFeatureSet& ufs, const ModifyConfig& cfg,
                                     const AuditConfig& audit_cfg) {
  const Matrix x = model_inputs(model, split.train);
  const Vector y = split.train.label_vector();
  const auto cols = detail::uf_columns(model, ufs);
  MitigationResult r;
  r.method = "modify";
  r.ufs = ufs;
  r.model = model;
  std::visit(
      [&](const auto& net) {
        auto t = modify_network(net, x, y, cols, cfg, model.config);
        r.loss_trace = std::move(t.loss_trace);
        r.zeta_trace = std::move(t.zeta_trace);
        r.zeta_initial = explanation_loss(net, x, y, cols);
        r.zeta_final = t.final_zeta;
        r.model.net = std::move(t.model);
      },
      model.net);
  r.before = audit(model, split, audit_cfg);
  r.after = audit(r.model, split, audit_cfg);
  r.disagreement = detail::disagreement(model, r.model, split.test);
  r.config = cfg;
  return r;
}

inline nlohmann::ordered_json mitigation_to_json(const MitigationResult& r) {
  nlohmann::ordered_json j;
  j["method"] = r.method;
  j["config"] = r.config;
  j["unfair_features"] = to_json_value(r.ufs);
  j["before"] = report_to_json(r.before);
  j["after"] = report_to_json(r.after);
  j["accuracy_drop"] = r.accuracy_drop();
  j["disagreement"] = r.disagreement;
  if (r.method == "modify") {
    j["zeta_initial"] = r.zeta_initial;
    j["zeta_final"] = r.zeta_final;
    j["zeta_trace"] = r.zeta_trace;
  }
  j["loss_trace"] = r.loss_trace;
  return j;
}

// ---------------------------------------------------------------------------
// Alpha sweep

struct AlphaRow {
  double alpha = 0;
  double zeta_final = 0;
  double accuracy_drop = 0;
};

// One modification per alpha from the same starting model. Accuracy is
// measured on the test split; no audits are run.
inline std::vector<AlphaRow> alpha_sweep(const Classifier& model, const SplitDataset& split,
                                         const UnfairFeatureSet& ufs,
                                         const std::vector<double>& alphas, ModifyConfig cfg) {
  const Matrix x = model_inputs(model, split.train);
  const Vector y = split.train.label_vector();
  const Matrix xt = model_inputs(model, split.test);
  const auto cols = detail::uf_columns(model, ufs);
  const double acc0 = accuracy(model.labels(xt), split.test.labels);
  std::vector<AlphaRow> rows;
  for (double a : alphas) {
    cfg.alpha = a;
    std::visit(
        [&](const auto& net) {
          auto t = modify_network(net, x, y, cols, cfg, model.config);
          rows.push_back({a, t.final_zeta, acc0 - accuracy(predict_labels(t.model, xt), split.test.labels)});
        },
        model.net);
  }
  return rows;
}

inline std::string alpha_sweep_csv(const std::vector<AlphaRow>& rows) {
  std::string out = "alpha,zeta_final,accuracy_drop\n";
  char buf[96];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.6g,%.9f,%.6f\n", r.alpha, r.zeta_final, r.accuracy_drop);
    out += buf;
  }
  return out;
}

}  // namespace pfair
