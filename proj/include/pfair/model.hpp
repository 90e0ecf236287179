#pragma once

#include "pfair/core.hpp"

#include <concepts>
#include <nlohmann/json.hpp>
#include <variant>

namespace pfair {

inline constexpr double kProbClamp = 1e-7;

// Two-layer perceptron: sigmoid(w2 . relu(W1 x + b1) + b2).
struct MlpModel {
  Matrix w1;  // h x d
  Vector b1;  // h
  Vector w2;  // h
  double b2 = 0.0;

  std::size_t input_dim() const { return static_cast<std::size_t>(w1.cols()); }
  std::size_t hidden_dim() const { return static_cast<std::size_t>(w1.rows()); }
  std::size_t parameter_count() const {
    return static_cast<std::size_t>(w1.size() + b1.size() + w2.size() + 1);
  }

  // Flat layout: W1 row-major, b1, w2, b2.
  Vector parameters() const {
    Vector p(static_cast<Eigen::Index>(parameter_count()));
    Eigen::Index k = 0;
    for (Eigen::Index r = 0; r < w1.rows(); ++r)
      for (Eigen::Index c = 0; c < w1.cols(); ++c) p(k++) = w1(r, c);
    p.segment(k, b1.size()) = b1;
    k += b1.size();
    p.segment(k, w2.size()) = w2;
    k += w2.size();
    p(k) = b2;
    return p;
  }

  void set_parameters(const Vector& p) {
    require(static_cast<std::size_t>(p.size()) == parameter_count(), "parameter vector size mismatch");
    Eigen::Index k = 0;
    for (Eigen::Index r = 0; r < w1.rows(); ++r)
      for (Eigen::Index c = 0; c < w1.cols(); ++c) w1(r, c) = p(k++);
    b1 = p.segment(k, b1.size());
    k += b1.size();
    w2 = p.segment(k, w2.size());
    k += w2.size();
    b2 = p(k);
  }

  bool operator==(const MlpModel&) const = default;
};

// Logistic regression: sigmoid(w . x + b).
struct LogisticModel {
  Vector w;
  double b = 0.0;

  std::size_t input_dim() const { return static_cast<std::size_t>(w.size()); }
  std::size_t parameter_count() const { return static_cast<std::size_t>(w.size() + 1); }

  Vector parameters() const {
    Vector p(w.size() + 1);
    p.head(w.size()) = w;
    p(w.size()) = b;
    return p;
  }

  void set_parameters(const Vector& p) {
    require(static_cast<std::size_t>(p.size()) == parameter_count(), "parameter vector size mismatch");
    w = p.head(w.size());
    b = p(w.size());
  }

  bool operator==(const LogisticModel&) const = default;
};

template <class M>
concept BinaryModel = requires(const M& m, M& mm, const Vector& p) {
  { m.input_dim() } -> std::convertible_to<std::size_t>;
  { m.parameters() } -> std::convertible_to<Vector>;
  mm.set_parameters(p);
};

struct TrainConfig {
  std::size_t epochs = 300;
  double learning_rate = 0.01;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double dp_weight = 0.0;  // lambda in BCE + lambda * soft DP
  std::size_t hidden_size = 0;  // 0 selects by input width
  std::uint64_t seed = 0;

  void validate() const {
    require(learning_rate > 0, "learning_rate must be positive");
    require(adam_beta1 >= 0 && adam_beta1 < 1 && adam_beta2 >= 0 && adam_beta2 < 1,
            "Adam betas must lie in [0,1)");
    require(adam_eps > 0, "adam_eps must be positive");
  }
};

inline void to_json(nlohmann::ordered_json& j, const TrainConfig& c) {
  j = nlohmann::ordered_json{{"epochs", c.epochs},         {"learning_rate", c.learning_rate},
                             {"adam_beta1", c.adam_beta1}, {"adam_beta2", c.adam_beta2},
                             {"adam_eps", c.adam_eps},     {"dp_weight", c.dp_weight},
                             {"hidden_size", c.hidden_size}, {"seed", c.seed}};
}

inline void from_json(const nlohmann::ordered_json& j, TrainConfig& c) {
  c.epochs = j.value("epochs", c.epochs);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
  c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
  c.adam_eps = j.value("adam_eps", c.adam_eps);
  c.dp_weight = j.value("dp_weight", c.dp_weight);
  c.hidden_size = j.value("hidden_size", c.hidden_size);
  c.seed = j.value("seed", c.seed);
}

// 32 hidden units, 64 for wide inputs.
inline std::size_t default_hidden_size(std::size_t d) { return d > 18 ? 64 : 32; }

inline MlpModel init_mlp(std::size_t d, std::size_t h, std::uint64_t seed) {
  require(d >= 1 && h >= 1, "MLP needs d >= 1 and h >= 1");
  Rng rng(seed);
  MlpModel m;
  const auto di = static_cast<Eigen::Index>(d), hi = static_cast<Eigen::Index>(h);
  m.w1.resize(hi, di);
  m.b1 = Vector::Zero(hi);
  m.w2.resize(hi);
  const double a1 = 1.0 / std::sqrt(static_cast<double>(d));
  const double a2 = 1.0 / std::sqrt(static_cast<double>(h));
  std::uniform_real_distribution<double> u1(-a1, a1), u2(-a2, a2);
  for (Eigen::Index r = 0; r < hi; ++r)
    for (Eigen::Index c = 0; c < di; ++c) m.w1(r, c) = u1(rng);
  for (Eigen::Index r = 0; r < hi; ++r) m.w2(r) = u2(rng);
  return m;
}

inline LogisticModel init_logistic(std::size_t d) {
  require(d >= 1, "logistic model needs d >= 1");
  return LogisticModel{Vector::Zero(static_cast<Eigen::Index>(d)), 0.0};
}

// ---------------------------------------------------------------------------
// Forward passes

struct MlpCache {
  Matrix pre;     // k x h pre-activations
  Matrix active;  // k x h, 1 where pre > 0 (subgradient 0 at the kink)
  Matrix hidden;  // k x h relu output
  Vector logit;   // k
};

inline MlpCache forward(const MlpModel& m, const Matrix& x) {
  require(static_cast<std::size_t>(x.cols()) == m.input_dim(), "input width does not match model");
  MlpCache c;
  c.pre = (x * m.w1.transpose()).rowwise() + m.b1.transpose();
  c.active = (c.pre.array() > 0.0).cast<double>().matrix();
  c.hidden = c.pre.cwiseMax(0.0);
  c.logit = (c.hidden * m.w2).array() + m.b2;
  return c;
}

inline Vector logits(const MlpModel& m, const Matrix& x) { return forward(m, x).logit; }

inline Vector logits(const LogisticModel& m, const Matrix& x) {
  require(static_cast<std::size_t>(x.cols()) == m.input_dim(), "input width does not match model");
  return (x * m.w).array() + m.b;
}

template <BinaryModel M>
Vector predict_proba(const M& m, const Matrix& x) {
  return logits(m, x).unaryExpr([](double z) { return sigmoid(z); });
}

template <BinaryModel M>
std::vector<int> predict_labels(const M& m, const Matrix& x) {
  const Vector p = predict_proba(m, x);
  std::vector<int> out(static_cast<std::size_t>(p.size()));
  for (Eigen::Index i = 0; i < p.size(); ++i) out[static_cast<std::size_t>(i)] = p(i) >= 0.5 ? 1 : 0;
  return out;
}

// ---------------------------------------------------------------------------
// Losses

inline double bce_from_proba(const Vector& p, const Vector& y) {
  require(p.size() == y.size() && p.size() > 0, "loss needs matching non-empty vectors");
  double total = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double pc = std::clamp(p(i), kProbClamp, 1.0 - kProbClamp);
    total -= y(i) * std::log(pc) + (1.0 - y(i)) * std::log(1.0 - pc);
  }
  return total / static_cast<double>(p.size());
}

template <BinaryModel M>
double bce_loss(const M& m, const Matrix& x, const Vector& y) {
  return bce_from_proba(predict_proba(m, x), y);
}

namespace detail {

// d(per-row loss)/d(logit) and its derivative with respect to the logit.
// Both vanish where the probability clamp is active.
struct LogitSlopes {
  Vector delta;      // p - y
  Vector curvature;  // p (1 - p)
};

inline LogitSlopes logit_slopes(const Vector& z, const Vector& y) {
  LogitSlopes s{Vector(z.size()), Vector(z.size())};
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double p = sigmoid(z(i));
    const bool clamped = p < kProbClamp || p > 1.0 - kProbClamp;
    s.delta(i) = clamped ? 0.0 : p - y(i);
    s.curvature(i) = clamped ? 0.0 : p * (1.0 - p);
  }
  return s;
}

}  // namespace detail

// |mean p over group 1 - mean p over group 2|, on probabilities.
inline double soft_dp_from_proba(const Vector& p, const std::vector<int>& groups) {
  require(static_cast<std::size_t>(p.size()) == groups.size(), "group vector length mismatch");
  double s1 = 0, s2 = 0;
  std::size_t n1 = 0, n2 = 0;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (groups[i]) {
      s1 += p(static_cast<Eigen::Index>(i));
      ++n1;
    } else {
      s2 += p(static_cast<Eigen::Index>(i));
      ++n2;
    }
  }
  require(n1 > 0 && n2 > 0, "soft DP needs both groups present");
  return std::abs(s1 / static_cast<double>(n1) - s2 / static_cast<double>(n2));
}

template <BinaryModel M>
double soft_dp(const M& m, const Matrix& x, const std::vector<int>& groups) {
  return soft_dp_from_proba(predict_proba(m, x), groups);
}

// ---------------------------------------------------------------------------
// Gradients with respect to parameters, given dL/dlogit per row.

inline Vector backprop_logit(const MlpModel& m, const Matrix& x, const MlpCache& c,
                             const Vector& dz) {
  MlpModel g;
  g.w2 = c.hidden.transpose() * dz;
  g.b2 = dz.sum();
  const Matrix dpre = (dz * m.w2.transpose()).cwiseProduct(c.active);
  g.w1 = dpre.transpose() * x;
  g.b1 = dpre.colwise().sum().transpose();
  return g.parameters();
}

inline Vector backprop_logit(const LogisticModel&, const Matrix& x, const Vector& dz) {
  Vector g(x.cols() + 1);
  g.head(x.cols()) = x.transpose() * dz;
  g(x.cols()) = dz.sum();
  return g;
}

struct LossAndGradient {
  double loss = 0;
  Vector gradient;
};

namespace detail {

// dL/dlogit for mean BCE + dp_weight * soft DP.
inline Vector objective_slope(const Vector& z, const Vector& y, double dp_weight,
                              const std::vector<int>* groups, double& loss) {
  const auto k = static_cast<double>(z.size());
  const Vector p = z.unaryExpr([](double v) { return sigmoid(v); });
  loss = bce_from_proba(p, y);
  const auto slopes = logit_slopes(z, y);
  Vector dz = slopes.delta / k;
  if (dp_weight != 0.0) {
    require(groups != nullptr, "DP-weighted loss needs group membership");
    const auto& g = *groups;
    double s1 = 0, s2 = 0, n1 = 0, n2 = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      (g[i] ? s1 : s2) += p(static_cast<Eigen::Index>(i));
      (g[i] ? n1 : n2) += 1;
    }
    require(n1 > 0 && n2 > 0, "soft DP needs both groups present");
    const double diff = s1 / n1 - s2 / n2;
    loss += dp_weight * std::abs(diff);
    const double sgn = diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      const double q = p(r) * (1.0 - p(r));
      dz(r) += dp_weight * sgn * q * (g[i] ? 1.0 / n1 : -1.0 / n2);
    }
  }
  return dz;
}

}  // namespace detail

inline LossAndGradient loss_gradient(const MlpModel& m, const Matrix& x, const Vector& y,
                                     double dp_weight = 0.0,
                                     const std::vector<int>* groups = nullptr) {
  const auto c = forward(m, x);
  LossAndGradient out;
  const Vector dz = detail::objective_slope(c.logit, y, dp_weight, groups, out.loss);
  out.gradient = backprop_logit(m, x, c, dz);
  return out;
}

inline LossAndGradient loss_gradient(const LogisticModel& m, const Matrix& x, const Vector& y,
                                     double dp_weight = 0.0,
                                     const std::vector<int>* groups = nullptr) {
  LossAndGradient out;
  const Vector dz = detail::objective_slope(logits(m, x), y, dp_weight, groups, out.loss);
  out.gradient = backprop_logit(m, x, dz);
  return out;
}

// ---------------------------------------------------------------------------
// Input gradients: dL/dx for the mean BCE loss over the k rows of x.

// Rows of d(logit)/dx, one per input row.
inline Matrix logit_input_jacobian(const MlpModel& m, const MlpCache& c) {
  return (c.active.array().rowwise() * m.w2.transpose().array()).matrix() * m.w1;
}

inline Matrix input_gradient(const MlpModel& m, const Matrix& x, const Vector& y) {
  const auto c = forward(m, x);
  const auto s = detail::logit_slopes(c.logit, y);
  return (s.delta / static_cast<double>(x.rows())).asDiagonal() * logit_input_jacobian(m, c);
}

inline Matrix input_gradient(const LogisticModel& m, const Matrix& x, const Vector& y) {
  const auto s = detail::logit_slopes(logits(m, x), y);
  return (s.delta / static_cast<double>(x.rows())) * m.w.transpose();
}

// ---------------------------------------------------------------------------
// Adam, full batch.

class Adam {
 public:
  Adam(std::size_t n, const TrainConfig& cfg)
      : cfg_(cfg), m_(Vector::Zero(static_cast<Eigen::Index>(n))), v_(m_) {}

  void step(Vector& params, const Vector& grad) {
    ++t_;
    m_ = cfg_.adam_beta1 * m_ + (1.0 - cfg_.adam_beta1) * grad;
    v_ = cfg_.adam_beta2 * v_ + (1.0 - cfg_.adam_beta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(cfg_.adam_beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.adam_beta2, static_cast<double>(t_));
    params.array() -= cfg_.learning_rate * (m_.array() / c1) /
                      ((v_.array() / c2).sqrt() + cfg_.adam_eps);
  }

 private:
  TrainConfig cfg_;
  Vector m_, v_;
  long t_ = 0;
};

template <BinaryModel M>
struct TrainResult {
  M model;
  std::vector<double> loss_trace;  // objective evaluated before each step
};

// Full-batch Adam on BCE + dp_weight * soft DP, starting from `model`.
template <BinaryModel M>
TrainResult<M> train(M model, const Matrix& x, const Vector& y, const TrainConfig& cfg,
                     const std::vector<int>* groups = nullptr) {
  cfg.validate();
  require(x.rows() > 0 && x.rows() == y.size(), "training data must be non-empty and aligned");
  Vector params = model.parameters();
  Adam opt(static_cast<std::size_t>(params.size()), cfg);
  TrainResult<M> out;
  out.loss_trace.reserve(cfg.epochs);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    model.set_parameters(params);
    auto lg = loss_gradient(model, x, y, cfg.dp_weight, groups);
    if (!std::isfinite(lg.loss) || !lg.gradient.allFinite())
      throw Error("training diverged at epoch " + std::to_string(epoch));
    out.loss_trace.push_back(lg.loss);
    opt.step(params, lg.gradient);
  }
  model.set_parameters(params);
  out.model = std::move(model);
  return out;
}

inline LogisticModel set_sensitive_weight(LogisticModel m, std::size_t sensitive_coordinate,
                                          double ws) {
  require(sensitive_coordinate < m.input_dim(), "model has no such sensitive coordinate");
  m.w(static_cast<Eigen::Index>(sensitive_coordinate)) = ws;
  return m;
}

// ---------------------------------------------------------------------------
// A model together with the dataset columns it consumes.

using Network = std::variant<MlpModel, LogisticModel>;

struct Classifier {
  Network net;
  std::vector<std::string> features;
  TrainConfig config;

  std::size_t input_dim() const {
    return std::visit([](const auto& m) { return m.input_dim(); }, net);
  }
  Vector proba(const Matrix& x) const {
    return std::visit([&](const auto& m) { return predict_proba(m, x); }, net);
  }
  Vector logit(const Matrix& x) const {
    return std::visit([&](const auto& m) { return logits(m, x); }, net);
  }
  std::vector<int> labels(const Matrix& x) const {
    return std::visit([&](const auto& m) { return predict_labels(m, x); }, net);
  }
  bool is_mlp() const { return std::holds_alternative<MlpModel>(net); }
};

// JSON with row-major parameter arrays. Doubles are written in shortest
// round-trip form, so reloading is bit-exact.
inline nlohmann::ordered_json model_to_json(const Classifier& c) {
  nlohmann::ordered_json j;
  j["format_version"] = 1;
  const auto vec = [](const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  if (const auto* m = std::get_if<MlpModel>(&c.net)) {
    j["kind"] = "mlp";
    j["dims"] = {{"input", m->input_dim()}, {"hidden", m->hidden_dim()}};
    std::vector<double> w1(m->w1.data(), m->w1.data() + m->w1.size());
    j["parameters"] = {{"w1", w1}, {"b1", vec(m->b1)}, {"w2", vec(m->w2)}, {"b2", m->b2}};
  } else {
    const auto& l = std::get<LogisticModel>(c.net);
    j["kind"] = "logistic";
    j["dims"] = {{"input", l.input_dim()}};
    j["parameters"] = {{"w", vec(l.w)}, {"b", l.b}};
  }
  j["features"] = c.features;
  j["training_config"] = c.config;
  j["seed"] = c.config.seed;
  return j;
}

inline Classifier model_from_json(const nlohmann::ordered_json& j) {
  require(j.at("format_version").get<int>() == 1, "unsupported model format_version");
  Classifier c;
  c.features = j.at("features").get<std::vector<std::string>>();
  from_json(j.at("training_config"), c.config);
  const auto& p = j.at("parameters");
  const auto vec = [](const nlohmann::ordered_json& a) {
    const auto v = a.get<std::vector<double>>();
    return Vector(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
  };
  const auto kind = j.at("kind").get<std::string>();
  const auto d = j.at("dims").at("input").get<std::size_t>();
  if (kind == "mlp") {
    const auto h = j.at("dims").at("hidden").get<std::size_t>();
    MlpModel m;
    const auto w1 = p.at("w1").get<std::vector<double>>();
    require(w1.size() == h * d, "w1 size does not match dims");
    m.w1 = Eigen::Map<const Matrix>(w1.data(), static_cast<Eigen::Index>(h),
                                    static_cast<Eigen::Index>(d));
    m.b1 = vec(p.at("b1"));
    m.w2 = vec(p.at("w2"));
    m.b2 = p.at("b2").get<double>();
    require(static_cast<std::size_t>(m.b1.size()) == h && static_cast<std::size_t>(m.w2.size()) == h,
            "bias sizes do not match dims");
    c.net = std::move(m);
  } else if (kind == "logistic") {
    LogisticModel l{vec(p.at("w")), p.at("b").get<double>()};
    require(l.input_dim() == d, "weight size does not match dims");
    c.net = std::move(l);
  } else {
    throw Error("unknown model kind: " + kind);
  }
  require(c.features.size() == d, "feature list does not match model input width");
  return c;
}

}  // namespace pfair
