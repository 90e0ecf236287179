// Acceptance run: one PASS/FAIL line per criterion, with the measured values.
// Exit status is the number of failed criteria.

#include "oracles.hpp"

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;
using namespace pfair;
using json = nlohmann::ordered_json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void verdict(int id, bool ok, const std::string& what, const std::string& detail) {
  std::printf("criterion %2d: %s  %s\n    %s\n", id, ok ? "PASS" : "FAIL", what.c_str(), detail.c_str());
  std::fflush(stdout);
  failures += ok ? 0 : 1;
}

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

std::string list(const std::vector<double>& v, int digits = 4) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt(v[i], digits);
  return s + "]";
}

std::string names(const std::vector<std::string>& v) {
  std::string s = "{";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
  return s + "}";
}

// Everything the per-seed criteria need from one seed.
struct SeedRun {
  double fair_gpf = 0, fair_dp = 0, fair_seconds = 0;
  double unfair_gpf = 0, unfair_dp = 0, unfair_acc = 0;
  std::vector<std::string> detected;
  double retrain_gpf = 0, retrain_drop = 0, retrain_dp = 0;
  double modify_gpf = 0, modify_drop = 0, zeta_initial = 0, zeta_final = 0;
  double local_accuracy_error = 0;
};

double local_accuracy_error(const ExplanationSet& e) {
  const Vector sum = e.values.rowwise().sum();
  return (e.base + sum - e.target).cwiseAbs().maxCoeff();
}

SeedRun run_seed(std::uint64_t seed) {
  SeedRun r;
  SyntheticConfig dc;
  dc.seed = seed;
  const auto split = prepare_synthetic(dc);
  TrainConfig tc;
  tc.seed = seed;
  AuditConfig ac;
  ac.seed = seed;

  const auto t0 = Clock::now();
  const auto fair = fit_classifier(ModelKind::mlp, split.train, synthetic_fair_features(), tc);
  GpfResult fg;
  const auto fa = audit(fair, split, ac, &fg);
  r.fair_seconds = seconds_since(t0);
  r.fair_gpf = fa.gpf_fae;
  r.fair_dp = fa.dp;

  const auto unfair = fit_classifier(ModelKind::mlp, split.train, synthetic_all_features(), tc);
  GpfResult ug;
  const auto ua = audit(unfair, split, ac, &ug);
  r.unfair_gpf = ua.gpf_fae;
  r.unfair_dp = ua.dp;
  r.unfair_acc = ua.accuracy;
  r.local_accuracy_error = std::max({local_accuracy_error(fg.group1), local_accuracy_error(fg.group2),
                                     local_accuracy_error(ug.group1), local_accuracy_error(ug.group2)});

  const auto ufs = detect_unfair_features(ug, ac);
  r.detected = ufs.names();

  const auto rt = retrain_without(unfair, split, ufs, ac, derive_seed(seed, 7));
  r.retrain_gpf = rt.after.gpf_fae;
  r.retrain_drop = rt.accuracy_drop();
  r.retrain_dp = rt.after.dp;

  const auto md = modify_model(unfair, split, ufs, ModifyConfig{}, ac);
  r.modify_gpf = md.after.gpf_fae;
  r.modify_drop = md.accuracy_drop();
  r.zeta_initial = md.zeta_initial;
  r.zeta_final = md.zeta_final;
  return r;
}

template <class F>
std::vector<double> collect(const std::vector<SeedRun>& runs, F f) {
  std::vector<double> v;
  for (const auto& r : runs) v.push_back(f(r));
  return v;
}

// ---------------------------------------------------------------------------
// Determinism helpers

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Every regular file under dir, with `timing` removed from report JSON.
std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), dir).string();
    if (rel == "stdout.txt") continue;
    auto text = slurp(e.path());
    if (e.path().extension() == ".json") {
      auto j = json::parse(text);
      if (j.is_object()) j.erase("timing");
      text = j.dump(2);
    }
    out[rel] = std::move(text);
  }
  return out;
}

int run_cli(const std::string& args, const fs::path& dir) {
  const std::string cmd = std::string(PFAIR_CLI_PATH) + " " + args + " > " + (dir / "stdout.txt").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

int main() {
  const auto seeds = seed_range(0, 10);
  std::printf("acceptance run, seeds 0-9, toolkit %s\n\n", std::string(kVersion).c_str());

  // 1. Dataset fidelity.
  {
    std::vector<double> dps;
    double slowest = 0;
    for (auto s : seeds) {
      SyntheticConfig c;
      c.seed = s;
      const auto t0 = Clock::now();
      const auto ds = generate_synthetic(c);
      dps.push_back(dataset_dp(ds));
      slowest = std::max(slowest, seconds_since(t0));
    }
    const auto dir = fs::temp_directory_path() / "pfair_acceptance_gen";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const auto t0 = Clock::now();
    const int code = run_cli("gen-data --out " + dir.string(), dir);
    const double cli_seconds = seconds_since(t0);
    const double mean = summarize(dps).mean;
    verdict(1, std::abs(mean - 0.199) <= 0.02 && slowest < 1.0 && cli_seconds < 1.0 && code == 0,
            "synthetic dataset DP 0.199 +- 0.02 (mean over seeds), runtime < 1 s",
            "mean DP " + fmt(mean) + ", per seed " + list(dps) + "; slowest generation " + fmt(slowest, 3) +
                " s, CLI gen-data " + fmt(cli_seconds, 3) + " s");
  }

  // 2-6 share one pipeline per seed.
  std::vector<SeedRun> runs;
  const auto t_all = Clock::now();
  for (auto s : seeds) {
    const auto t0 = Clock::now();
    runs.push_back(run_seed(s));
    std::printf("  seed %llu pipeline done in %.1f s\n", static_cast<unsigned long long>(s), seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("  all seeds: %.1f s\n\n", seconds_since(t_all));

  {
    int ok = 0;
    for (const auto& r : runs) ok += r.fair_gpf >= 0.95 && r.fair_dp <= 0.10;
    const auto secs = collect(runs, [](auto& r) { return r.fair_seconds; });
    const double slowest = *std::max_element(secs.begin(), secs.end());
    verdict(2, ok >= 9 && slowest < 120.0,
            "fair MLP {x1,x2}: GPF_FAE >= 0.95 and DP <= 0.10 in >= 9/10 seeds, < 2 min per seed",
            std::to_string(ok) + "/10; GPF " + list(collect(runs, [](auto& r) { return r.fair_gpf; })) + ", DP " +
                list(collect(runs, [](auto& r) { return r.fair_dp; })) + "; slowest train+audit " + fmt(slowest, 1) +
                " s per seed");
  }
  {
    int ok = 0;
    for (const auto& r : runs) ok += r.unfair_gpf <= 0.05 && std::abs(r.unfair_dp - 0.251) <= 0.05;
    verdict(3, ok >= 9, "unfair MLP, all features: GPF_FAE <= 0.05 and DP 0.251 +- 0.05 in >= 9/10 seeds",
            std::to_string(ok) + "/10; GPF " + list(collect(runs, [](auto& r) { return r.unfair_gpf; })) + ", DP " +
                list(collect(runs, [](auto& r) { return r.unfair_dp; })) + ", accuracy " +
                list(collect(runs, [](auto& r) { return r.unfair_acc; })));
  }
  {
    int ok = 0;
    std::string sets;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      ok += runs[i].detected == std::vector<std::string>{"xs", "xp"};
      sets += (i ? " " : "") + names(runs[i].detected);
    }
    verdict(4, ok == 10, "unfair-feature detection returns exactly {xs,xp} in 10/10 seeds",
            std::to_string(ok) + "/10; detected " + sets);
  }
  {
    const auto gpf = summarize(collect(runs, [](auto& r) { return r.retrain_gpf; }));
    const auto drop = summarize(collect(runs, [](auto& r) { return 100 * r.retrain_drop; }));
    const auto dpv = summarize(collect(runs, [](auto& r) { return r.retrain_dp; }));
    verdict(5, gpf.median >= 0.95 && std::abs(drop.median - 2.0) <= 1.5 && dpv.median <= 0.10,
            "retraining without detected features: GPF >= 0.95, accuracy drop 2.0% +- 1.5, DP <= 0.10 (median over seeds)",
            "median GPF " + fmt(gpf.median) + ", median drop " + fmt(drop.median, 2) + "% (mean " + fmt(drop.mean, 2) +
                "%), median DP " + fmt(dpv.median) + "; per seed drop % " +
                list(collect(runs, [](auto& r) { return 100 * r.retrain_drop; }), 2) + ", GPF " +
                list(collect(runs, [](auto& r) { return r.retrain_gpf; })) + ", DP " +
                list(collect(runs, [](auto& r) { return r.retrain_dp; })));
  }
  {
    const auto gpf = summarize(collect(runs, [](auto& r) { return r.modify_gpf; }));
    const auto drop = summarize(collect(runs, [](auto& r) { return 100 * r.modify_drop; }));
    int zeta_down = 0;
    for (const auto& r : runs) zeta_down += r.zeta_final < r.zeta_initial;
    verdict(6, gpf.median > 0.05 && std::abs(drop.median - 5.5) <= 2.5 && zeta_down == 10,
            "modification alpha=15 tau=200: GPF > 0.05, accuracy drop 5.5% +- 2.5, zeta decreases (median over seeds)",
            "median GPF " + fmt(gpf.median) + ", median drop " + fmt(drop.median, 2) + "% (mean " + fmt(drop.mean, 2) +
                "%), zeta decreased in " + std::to_string(zeta_down) + "/10; per seed drop % " +
                list(collect(runs, [](auto& r) { return 100 * r.modify_drop; }), 2) + ", GPF " +
                list(collect(runs, [](auto& r) { return r.modify_gpf; })) + ", zeta " +
                list(collect(runs, [](auto& r) { return r.zeta_initial; })) + " -> " +
                list(collect(runs, [](auto& r) { return r.zeta_final; })));
  }

  // 7. w_s sweep.
  {
    const auto t0 = Clock::now();
    const auto rows = sweep_ws(WsSweepConfig{});
    std::vector<double> iso, med;
    for (const auto& r : rows) {
      iso.push_back(r.isotonic);
      med.push_back(r.gpf.median);
    }
    bool monotone = true;
    for (std::size_t i = 1; i < iso.size(); ++i) monotone = monotone && iso[i] <= iso[i - 1];
    verdict(7, rows.size() == 50 && monotone && iso.front() >= 0.9 && iso.back() < iso.front(),
            "LR w_s sweep on [0,5], 50 points, median of 10 seeds: smoothed curve non-increasing, starts >= 0.9",
            "smoothed start " + fmt(iso.front()) + ", end " + fmt(iso.back()) + ", non-increasing " +
                (monotone ? "yes" : "no") + "; raw medians " + list(med, 3) + "; " + fmt(seconds_since(t0), 1) + " s");
  }

  // 8. Null calibration.
  {
    int rejected = 0;
    for (std::uint64_t t = 0; t < 200; ++t) {
      const Matrix a = oracle::random_matrix(100, 4, 50000 + 2 * t);
      const Matrix b = oracle::random_matrix(100, 4, 50001 + 2 * t);
      rejected += permutation_pvalue(a, b, {}, PermutationConfig{1000, derive_seed(t, 11), 1}) <= 0.05;
    }
    const double frac = rejected / 200.0;
    verdict(8, std::abs(frac - 0.05) <= 0.03,
            "permutation test null calibration: P(p <= 0.05) = 0.05 +- 0.03 over 200 trials (n=100, d=4)",
            "rejection fraction " + fmt(frac, 3) + " (" + std::to_string(rejected) + "/200)");
  }

  // 9. Kernel SHAP against exact Shapley values.
  {
    double worst = 0, worst_local = 0;
    for (std::uint64_t s = 0; s < 20; ++s) {
      const auto m = oracle::random_mlp(4, 8, 900 + s);
      const Evaluator f = [m](const Matrix& x) { return predict_proba(m, x); };
      ShapConfig cfg;
      cfg.background = oracle::random_matrix(50, 4, 1900 + s);
      const Matrix xs = oracle::random_matrix(5, 4, 2900 + s);
      for (Eigen::Index i = 0; i < xs.rows(); ++i) {
        const Vector x = xs.row(i).transpose();
        const auto k = kernel_shap(f, x, cfg);
        const auto e = exact_shapley(f, x, cfg.background);
        worst = std::max(worst, (k.values - e.values).cwiseAbs().maxCoeff());
        worst_local = std::max(worst_local, std::abs(k.base_value + k.values.sum() - k.target));
      }
    }
    double audit_local = 0;
    for (const auto& r : runs) audit_local = std::max(audit_local, r.local_accuracy_error);
    verdict(9, worst <= 1e-6 && worst_local <= 1e-6 && audit_local <= 1e-6,
            "Kernel SHAP (full enumeration) = exact Shapley within 1e-6 on 20 random 4-feature MLPs; local accuracy",
            "max |kernel - exact| " + sci(worst) + ", max local-accuracy error " + sci(worst_local) +
                " (random MLPs), " + sci(audit_local) + " (all audit explanations)");
  }

  // 10. Derivatives against central finite differences.
  {
    double worst_x = 0, worst_theta = 0, abs_x = 0, abs_theta = 0;
    int checked = 0;
    for (std::uint64_t s = 0; checked < 10 && s < 100; ++s) {
      const auto m = oracle::random_mlp(4, 6, 700 + s);
      const Matrix x = oracle::random_matrix(20, 4, 1700 + s);
      const Vector y = oracle::random_labels(20, 2700 + s);
      const std::vector<std::size_t> ufs{2, 3};
      if (oracle::kink_margin(m, x) < 1e-3) continue;
      const Matrix g = input_gradient(m, x, y) * 20.0;
      bool smooth = true;
      for (auto k : ufs) smooth = smooth && g.col(static_cast<Eigen::Index>(k)).cwiseAbs().minCoeff() > 1e-3;
      if (!smooth) continue;
      ++checked;
      const Vector num_x = oracle::numeric_gradient(
          [&](const Vector& v) {
            Matrix xx = x;
            for (Eigen::Index i = 0; i < xx.rows(); ++i)
              for (Eigen::Index j = 0; j < xx.cols(); ++j) xx(i, j) = v(i * xx.cols() + j);
            return bce_loss(m, xx, y);
          },
          oracle::flatten(x));
      const Vector an_x = oracle::flatten(input_gradient(m, x, y));
      abs_x = std::max(abs_x, (an_x - num_x).cwiseAbs().maxCoeff());
      worst_x = std::max(worst_x, oracle::max_relative_error(an_x, num_x, 1e-9));
      const double alpha = 15.0;
      const Vector an = loss_gradient(m, x, y).gradient + alpha * explanation_loss_gradient(m, x, y, ufs).gradient;
      const Vector num = oracle::numeric_gradient(
          [&](const Vector& p) {
            MlpModel q = m;
            q.set_parameters(p);
            return bce_loss(q, x, y) + alpha * explanation_loss(q, x, y, ufs);
          },
          m.parameters());
      worst_theta = std::max(worst_theta, oracle::max_relative_error(an, num, 1e-7));
      abs_theta = std::max(abs_theta, (an - num).cwiseAbs().maxCoeff());
    }
    verdict(10, checked == 10 && worst_x <= 1e-4 && worst_theta <= 1e-3,
            "dL/dx within rel. 1e-4 and d(L + alpha zeta)/dtheta within rel. 1e-3 of central differences",
            std::to_string(checked) + " random MLPs away from kinks; max rel. error dL/dx " + sci(worst_x) +
                ", dL'/dtheta " + sci(worst_theta) + " (entries with absolute gap under 1e-9 / 1e-7 skipped); max abs. gap " +
                sci(abs_x) + " / " + sci(abs_theta));
  }

  // 11. Determinism of every CLI command.
  {
    const auto root = fs::temp_directory_path() / "pfair_acceptance_det";
    fs::remove_all(root);
    fs::create_directories(root);
    const auto o = " --seed 4 --out " + root.string();
    const auto model = " --model " + (root / "model.json").string();
    const std::vector<std::string> commands{
        "gen-data" + o,
        "train" + o + " --data " + (root / "data.csv").string(),
        "audit --explanations" + o + model,
        "detect" + o + model,
        "mitigate retrain" + o + model,
        "mitigate modify" + o + model,
        "sweep-ws --points 6 --seeds 2" + o,
        "sweep-n --seeds 2" + o + model,
        "sweep-pool --seeds 2 --sizes 200,1000,10000" + o + model,
        "boundary --resolution 40" + o + model,
    };
    std::vector<std::string> broken;
    for (const auto& c : commands) {
      const int first = run_cli(c, root);
      const auto a = snapshot(root);
      const int second = run_cli(c, root);
      const auto b = snapshot(root);
      if (first != 0 || second != 0 || a != b) broken.push_back(c.substr(0, c.find(" --")) + "(exit " +
                                                                std::to_string(first) + "/" + std::to_string(second) + ")");
    }
    std::string detail = std::to_string(commands.size() - broken.size()) + "/" + std::to_string(commands.size()) +
                         " commands byte-identical on rerun (report timing excluded)";
    for (const auto& b : broken) detail += "; differs: " + b;
    verdict(11, broken.empty(), "every command reproduces byte-identical outputs", detail);
  }

  std::printf("\n%d of 11 criteria failed\n", failures);
  return failures;
}
