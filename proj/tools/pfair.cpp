// pfair: command-line front end for the procedural-fairness toolkit.

#include "pfair/pfair.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace pfair;
using json = nlohmann::ordered_json;

namespace {

struct RunConfig {
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> data_seed;  // defaults to seed
  std::size_t threads = default_threads();
  std::string out = ".";

  std::string data_path;  // empty: synthetic data
  std::string schema_path;
  double split_ratio = 0.8;
  SyntheticConfig synthetic;

  std::string model_path, modified_path, retrained_path;
  std::string model_kind = "mlp";
  std::vector<std::string> features;  // empty: every column
  TrainConfig train;

  AuditConfig audit;
  double beta = 0.05;
  bool write_explanations = false;

  std::string method = "retrain";
  std::vector<std::string> unfair;  // empty: detect
  ModifyConfig modify;

  double ws_lo = 0.0, ws_hi = 5.0;
  std::size_t ws_points = 50;
  std::uint64_t first_seed = 0;
  std::size_t n_seeds = 10;
  std::vector<std::size_t> n_values{10, 20, 50, 100, 200, 500};
  std::vector<std::size_t> pool_sizes{200, 500, 1000, 2000, 5000, 10000};
  std::size_t resolution = 100;

  std::uint64_t resolved_data_seed() const { return data_seed.value_or(seed); }
};

json to_json_value(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["data_seed"] = c.resolved_data_seed();
  j["threads"] = c.threads;
  j["out"] = c.out;
  json synth = c.synthetic;
  synth["seed"] = c.resolved_data_seed();
  j["data"] = {{"path", c.data_path}, {"schema", c.schema_path}, {"split_ratio", c.split_ratio},
               {"synthetic", synth}};
  j["model"] = {{"path", c.model_path}, {"modified", c.modified_path}, {"retrained", c.retrained_path},
                {"kind", c.model_kind}, {"features", c.features}};
  j["train"] = c.train;
  j["audit"] = c.audit;
  j["detect"] = {{"beta", c.beta}, {"write_explanations", c.write_explanations}};
  j["mitigate"] = {{"method", c.method}, {"unfair", c.unfair}, {"modify", c.modify}};
  j["sweep"] = {{"ws", {{"lo", c.ws_lo}, {"hi", c.ws_hi}, {"points", c.ws_points}}},
                {"seeds", {{"first", c.first_seed}, {"count", c.n_seeds}}},
                {"n_values", c.n_values},
                {"pool_sizes", c.pool_sizes}};
  j["boundary"] = {{"resolution", c.resolution}};
  return j;
}

void apply_config_file(const fs::path& path, RunConfig& c) {
  std::ifstream in(path);
  require(in.good(), "cannot open config file: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  c.seed = j.value("seed", c.seed);
  if (j.contains("data_seed")) c.data_seed = j["data_seed"].get<std::uint64_t>();
  c.threads = j.value("threads", c.threads);
  c.out = j.value("out", c.out);
  if (j.contains("data")) {
    const auto& d = j["data"];
    c.data_path = d.value("path", c.data_path);
    c.schema_path = d.value("schema", c.schema_path);
    c.split_ratio = d.value("split_ratio", c.split_ratio);
    if (d.contains("synthetic")) from_json(d["synthetic"], c.synthetic);
  }
  if (j.contains("model")) {
    const auto& m = j["model"];
    c.model_path = m.value("path", c.model_path);
    c.modified_path = m.value("modified", c.modified_path);
    c.retrained_path = m.value("retrained", c.retrained_path);
    c.model_kind = m.value("kind", c.model_kind);
    c.features = m.value("features", c.features);
  }
  if (j.contains("train")) from_json(j["train"], c.train);
  if (j.contains("audit")) from_json(j["audit"], c.audit);
  if (j.contains("detect")) {
    c.beta = j["detect"].value("beta", c.beta);
    c.write_explanations = j["detect"].value("write_explanations", c.write_explanations);
  }
  if (j.contains("mitigate")) {
    const auto& m = j["mitigate"];
    c.method = m.value("method", c.method);
    c.unfair = m.value("unfair", c.unfair);
    if (m.contains("modify")) from_json(m["modify"], c.modify);
  }
  if (j.contains("sweep")) {
    const auto& s = j["sweep"];
    if (s.contains("ws")) {
      c.ws_lo = s["ws"].value("lo", c.ws_lo);
      c.ws_hi = s["ws"].value("hi", c.ws_hi);
      c.ws_points = s["ws"].value("points", c.ws_points);
    }
    if (s.contains("seeds")) {
      c.first_seed = s["seeds"].value("first", c.first_seed);
      c.n_seeds = s["seeds"].value("count", c.n_seeds);
    }
    c.n_values = s.value("n_values", c.n_values);
    c.pool_sizes = s.value("pool_sizes", c.pool_sizes);
  }
  if (j.contains("boundary")) c.resolution = j["boundary"].value("resolution", c.resolution);
}

// Flags given on the command line; each one overrides the config file.
struct Overrides {
  std::optional<std::uint64_t> seed, data_seed, first_seed;
  std::optional<std::size_t> threads, epochs, hidden, pairs, permutations, background, iterations,
      points, n_seeds, resolution, rows;
  std::optional<std::string> out, config, data, schema, model, modified, retrained, kind, pool,
      output, method;
  std::optional<double> dp_weight, lr, beta, alpha, modify_lr, ws_lo, ws_hi, ratio;
  std::vector<std::string> features, unfair;
  std::vector<std::size_t> n_values, pool_sizes;
  bool explanations = false;
};

template <class T>
void set_if(const std::optional<T>& v, T& target) {
  if (v) target = *v;
}

RunConfig resolve(const Overrides& o) {
  RunConfig c;
  if (o.config) apply_config_file(*o.config, c);
  set_if(o.seed, c.seed);
  if (o.data_seed) c.data_seed = *o.data_seed;
  set_if(o.threads, c.threads);
  set_if(o.out, c.out);
  set_if(o.data, c.data_path);
  set_if(o.schema, c.schema_path);
  set_if(o.ratio, c.split_ratio);
  if (o.rows) {
    c.synthetic.m = *o.rows;
    c.synthetic.n_advantaged = *o.rows * 3 / 5;
  }
  set_if(o.model, c.model_path);
  set_if(o.modified, c.modified_path);
  set_if(o.retrained, c.retrained_path);
  set_if(o.kind, c.model_kind);
  if (!o.features.empty()) c.features = o.features;
  set_if(o.epochs, c.train.epochs);
  set_if(o.hidden, c.train.hidden_size);
  set_if(o.dp_weight, c.train.dp_weight);
  set_if(o.lr, c.train.learning_rate);
  set_if(o.pairs, c.audit.n_pairs);
  set_if(o.permutations, c.audit.n_permutations);
  set_if(o.background, c.audit.background_size);
  if (o.pool) c.audit.pool = *o.pool == "full" ? PoolScope::full : PoolScope::test;
  if (o.output) c.audit.output = *o.output == "probability" ? OutputScale::probability : OutputScale::logit;
  set_if(o.beta, c.beta);
  if (o.explanations) c.write_explanations = true;
  set_if(o.method, c.method);
  if (!o.unfair.empty()) c.unfair = o.unfair;
  set_if(o.alpha, c.modify.alpha);
  set_if(o.iterations, c.modify.iterations);
  set_if(o.modify_lr, c.modify.learning_rate);
  set_if(o.ws_lo, c.ws_lo);
  set_if(o.ws_hi, c.ws_hi);
  set_if(o.points, c.ws_points);
  set_if(o.first_seed, c.first_seed);
  set_if(o.n_seeds, c.n_seeds);
  if (!o.n_values.empty()) c.n_values = o.n_values;
  if (!o.pool_sizes.empty()) c.pool_sizes = o.pool_sizes;
  set_if(o.resolution, c.resolution);

  require(c.threads >= 1, "threads must be at least 1");
  require(c.model_kind == "mlp" || c.model_kind == "logistic", "model kind must be mlp or logistic");
  require(c.method == "retrain" || c.method == "modify", "mitigation method must be retrain or modify");
  c.train.seed = c.seed;
  c.audit.seed = c.seed;
  c.audit.threads = c.threads;
  c.modify.seed = c.seed;
  c.synthetic.seed = c.resolved_data_seed();
  c.train.validate();
  c.modify.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Inputs and outputs

fs::path sidecar_for(const fs::path& csv) {
  fs::path p = csv;
  return p.replace_extension(".schema.json");
}

TabularDataset raw_dataset(const RunConfig& c) {
  if (c.data_path.empty()) return generate_synthetic(c.synthetic);
  const fs::path schema = c.schema_path.empty() ? sidecar_for(c.data_path) : fs::path(c.schema_path);
  return load_csv(c.data_path, load_schema(schema));
}

SplitDataset prepared(const RunConfig& c) {
  return normalize_split(train_test_split(raw_dataset(c), c.split_ratio, c.resolved_data_seed())).first;
}

Classifier load_model(const std::string& path, const char* what) {
  require(!path.empty(), std::string("no ") + what + " file given");
  std::ifstream in(path);
  require(in.good(), std::string("missing ") + what + " file: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(std::string(what) + " file " + path + " is not valid JSON: " + e.what());
  }
  return model_from_json(j);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot write " + path.string());
  out << text;
  require(out.good(), "failed writing " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

fs::path out_dir(const RunConfig& c) {
  const fs::path dir(c.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(fs::is_directory(dir), "cannot create output directory " + dir.string());
  return dir;
}

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

struct Context {
  std::string command;
  RunConfig cfg;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  void report(const fs::path& file, json results) const {
    json j;
    j["version"] = std::string(kVersion);
    j["command"] = command;
    j["config"] = to_json_value(cfg);
    j["results"] = std::move(results);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    j["timing"] = {{"seconds", secs}};
    write_json(file, j);
  }
};

std::vector<std::string> model_features(const RunConfig& c, const TabularDataset& ds) {
  if (!c.features.empty()) return c.features;
  return ds.feature_names;
}

UnfairFeatureSet unfair_from_names(const Classifier& model, const std::vector<std::string>& names) {
  UnfairFeatureSet u;
  u.feature_names = model.features;
  u.pvalues.assign(model.features.size(), std::numeric_limits<double>::quiet_NaN());
  for (const auto& n : names) {
    const auto it = std::find(model.features.begin(), model.features.end(), n);
    require(it != model.features.end(), "unfair feature " + n + " is not a model input");
    u.indices.push_back(static_cast<std::size_t>(it - model.features.begin()));
  }
  std::sort(u.indices.begin(), u.indices.end());
  return u;
}

UnfairFeatureSet detect(const Classifier& model, const SplitDataset& split, const RunConfig& c,
                        AuditReport* report = nullptr) {
  GpfResult g;
  const auto r = audit(model, split, c.audit, &g);
  if (report) *report = r;
  return detect_unfair_features(g, c.audit, c.beta);
}

std::uint64_t retrain_seed(const RunConfig& c) { return derive_seed(c.seed, 7); }

// ---------------------------------------------------------------------------
// Commands

void cmd_gen_data(const Context& ctx) {
  const auto& c = ctx.cfg;
  const auto dir = out_dir(c);
  const auto ds = raw_dataset(c);
  write_csv(ds, dir / "data.csv");
  write_text(dir / "data.schema.json", schema_for(ds).to_json().dump(2) + "\n");
  const double dp = dataset_dp(ds);
  std::cout << "dataset_dp=" << fixed(dp) << '\n';
  ctx.report(dir / "gen-data.json",
             {{"rows", ds.rows()}, {"columns", ds.feature_names}, {"dataset_dp", dp},
              {"files", {"data.csv", "data.schema.json"}}, {"provenance", ds.provenance}});
}

void cmd_train(const Context& ctx) {
  const auto& c = ctx.cfg;
  const auto dir = out_dir(c);
  const auto split = prepared(c);
  std::vector<double> trace;
  const auto kind = c.model_kind == "mlp" ? ModelKind::mlp : ModelKind::logistic;
  const auto model = fit_classifier(kind, split.train, model_features(c, split.train), c.train, &trace);
  write_json(dir / "model.json", model_to_json(model));
  const Matrix xt = model_inputs(model, split.test);
  const auto pred = model.labels(xt);
  const auto groups = split.test.group_indicator();
  const double acc = accuracy(pred, split.test.labels);
  const double d = dp(pred, groups);
  const double loss = trace.empty() ? bce_from_proba(model.proba(model_inputs(model, split.train)),
                                                     split.train.label_vector())
                                    : trace.back();
  std::cout << "accuracy=" << fixed(acc) << " dp=" << fixed(d) << " train_loss=" << fixed(loss) << '\n';
  ctx.report(dir / "train.json", {{"accuracy", acc},
                                  {"dp", d},
                                  {"final_train_loss", loss},
                                  {"epochs", c.train.epochs},
                                  {"features", model.features},
                                  {"model_file", "model.json"},
                                  {"loss_trace", trace}});
}

void cmd_audit(const Context& ctx) {
  const auto& c = ctx.cfg;
  const auto model = load_model(c.model_path, "model");
  const auto dir = out_dir(c);
  const auto split = prepared(c);
  GpfResult g;
  const auto r = audit(model, split, c.audit, &g);
  if (c.write_explanations) {
    write_explanations_csv(g.group1, dir / "explanations_group1.csv");
    write_explanations_csv(g.group2, dir / "explanations_group2.csv");
  }
  std::cout << "gpf_fae=" << fixed(r.gpf_fae) << " verdict=" << (r.procedural_fair ? "fair" : "unfair")
            << '\n';
  ctx.report(dir / "audit.json", report_to_json(r));
}

void cmd_detect(const Context& ctx) {
  const auto& c = ctx.cfg;
  const auto model = load_model(c.model_path, "model");
  const auto dir = out_dir(c);
  const auto split = prepared(c);
  AuditReport r;
  const auto ufs = detect(model, split, c, &r);
  std::string names;
  for (const auto& n : ufs.names()) names += (names.empty() ? "" : ",") + n;
  std::cout << "unfair_features=" << names << '\n';
  ctx.report(dir / "detect.json", {{"audit", report_to_json(r)}, {"unfair_features", to_json_value(ufs)}});
}

void cmd_mitigate(const Context& ctx) {
  const auto& c = ctx.cfg;
  const auto model = load_model(c.model_path, "model");
  const auto dir = out_dir(c);
  const auto split = prepared(c);
  const auto ufs = c.unfair.empty() ? detect(model, split, c) : unfair_from_names(model, c.unfair);
  const auto r = c.method == "retrain" ? retrain_without(model, split, ufs, c.audit, retrain_seed(c))
                                       : modify_model(model, split, ufs, c.modify, c.audit);
  write_json(dir / ("model_" + c.method + ".json"), model_to_json(r.model));
  std::cout << "method=" << c.method << " gpf_before=" << fixed(r.before.gpf_fae)
            << " gpf_after=" << fixed(r.after.gpf_fae) << " accuracy_drop=" << fixed(r.accuracy_drop())
            << '\n';
  auto results = mitigation_to_json(r);
  results["model_file"] = "model_" + c.method + ".json";
  ctx.report(dir / ("mitigate_" + c.method + ".json"), results);
}

std::vector<std::uint64_t> seeds_of(const RunConfig& c) { return seed_range(c.first_seed, c.n_seeds); }

void cmd_sweep_ws(const Context& ctx) {
  const auto& c = ctx.cfg;
  require(c.data_path.empty(), "sweep-ws runs on the synthetic generator; drop --data");
  const auto dir = out_dir(c);
  WsSweepConfig s;
  s.lo = c.ws_lo;
  s.hi = c.ws_hi;
  s.points = c.ws_points;
  s.seeds = seeds_of(c);
  s.data = c.synthetic;
  s.train = c.train;
  s.audit = c.audit;
  const auto rows = sweep_ws(s);
  std::string csv = "ws,ws_normalized,gpf_mean,gpf_std,gpf_median,gpf_isotonic\n";
  json per_seed = json::array();
  for (const auto& r : rows) {
    csv += fixed(r.ws) + ',' + fixed(r.ws_normalized) + ',' + fixed(r.gpf.mean) + ',' + fixed(r.gpf.stddev) +
           ',' + fixed(r.gpf.median) + ',' + fixed(r.isotonic) + '\n';
    per_seed.push_back({{"ws", r.ws}, {"gpf", r.per_seed}});
  }
  write_text(dir / "sweep_ws.csv", csv);
  ctx.report(dir / "sweep-ws.json", {{"csv", "sweep_ws.csv"}, {"seeds", s.seeds}, {"rows", per_seed}});
}

void cmd_sweep_n(const Context& ctx) {
  const auto& c = ctx.cfg;
  const auto model = load_model(c.model_path, "model");
  const auto dir = out_dir(c);
  const auto split = prepared(c);
  const auto rows = sweep_n(model, split, c.n_values, seeds_of(c), c.audit);
  std::string csv = "n,gpf_mean,gpf_std,gpf_median\n";
  for (const auto& r : rows)
    csv += std::to_string(r.n) + ',' + fixed(r.gpf.mean) + ',' + fixed(r.gpf.stddev) + ',' + fixed(r.gpf.median) + '\n';
  write_text(dir / "sweep_n.csv", csv);
  ctx.report(dir / "sweep-n.json", {{"csv", "sweep_n.csv"}, {"seeds", seeds_of(c)}});
}

void cmd_sweep_pool(const Context& ctx) {
  const auto& c = ctx.cfg;
  const auto model = load_model(c.model_path, "model");
  const auto dir = out_dir(c);
  const auto split = prepared(c);
  const auto rows = sweep_pool(model, split, c.pool_sizes, seeds_of(c), c.audit);
  std::string csv = "pool_size,mean_distance,mean_distance_std,gpf_mean,gpf_std\n";
  for (const auto& r : rows)
    csv += std::to_string(r.pool_size) + ',' + fixed(r.mean_distance.mean) + ',' +
           fixed(r.mean_distance.stddev) + ',' + fixed(r.gpf.mean) + ',' + fixed(r.gpf.stddev) + '\n';
  write_text(dir / "sweep_pool.csv", csv);
  ctx.report(dir / "sweep-pool.json", {{"csv", "sweep_pool.csv"}, {"seeds", seeds_of(c)}});
}

void cmd_boundary(const Context& ctx) {
  const auto& c = ctx.cfg;
  const auto original = load_model(c.model_path, "model");
  const auto dir = out_dir(c);
  const auto split = prepared(c);
  Classifier modified, retrained;
  if (c.modified_path.empty() || c.retrained_path.empty()) {
    const auto ufs = c.unfair.empty() ? detect(original, split, c) : unfair_from_names(original, c.unfair);
    modified = c.modified_path.empty() ? modify_model(original, split, ufs, c.modify, c.audit).model
                                       : load_model(c.modified_path, "modified model");
    retrained = c.retrained_path.empty()
                    ? retrain_without(original, split, ufs, c.audit, retrain_seed(c)).model
                    : load_model(c.retrained_path, "retrained model");
  } else {
    modified = load_model(c.modified_path, "modified model");
    retrained = load_model(c.retrained_path, "retrained model");
  }
  const auto grid = decision_boundaries(
      {{"original", &original}, {"modified", &modified}, {"retrained", &retrained}}, split.test, c.resolution);
  std::string csv = "pc1,pc2,original,modified,retrained\n";
  for (Eigen::Index i = 0; i < grid.coords.rows(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    csv += fixed(grid.coords(i, 0)) + ',' + fixed(grid.coords(i, 1)) + ',' +
           std::to_string(grid.predictions[0][k]) + ',' + std::to_string(grid.predictions[1][k]) + ',' +
           std::to_string(grid.predictions[2][k]) + '\n';
  }
  write_text(dir / "boundary.csv", csv);
  json comps = json::array();
  for (Eigen::Index r = 0; r < grid.pca.components.rows(); ++r) {
    std::vector<double> row(grid.pca.components.row(r).data(),
                            grid.pca.components.row(r).data() + grid.pca.components.cols());
    comps.push_back(row);
  }
  const auto n = grid.coords.rows();
  std::cout << "disagreement modified=" << grid.disagreements(0, 1) << " retrained=" << grid.disagreements(0, 2)
            << " of " << n << '\n';
  ctx.report(dir / "boundary.json",
             {{"csv", "boundary.csv"},
              {"resolution", c.resolution},
              {"features", original.features},
              {"pca_components", comps},
              {"explained_variance_ratio",
               std::vector<double>(grid.pca.explained_variance_ratio.data(),
                                   grid.pca.explained_variance_ratio.data() +
                                       grid.pca.explained_variance_ratio.size())},
              {"disagreement", {{"modified_vs_original", grid.disagreements(0, 1)},
                                {"retrained_vs_original", grid.disagreements(0, 2)},
                                {"grid_points", n}}}});
}

void error_out(const std::string& command, const std::string& kind, const std::string& message) {
  json e = {{"error", {{"command", command}, {"kind", kind}, {"message", message}}}};
  std::cerr << e.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Procedural-fairness auditing toolkit"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  Overrides o;

  const auto common = [&](CLI::App* s) {
    s->add_option("--seed", o.seed, "Global seed");
    s->add_option("--out", o.out, "Output directory");
    s->add_option("--threads", o.threads, "Worker threads")->check(CLI::PositiveNumber);
    s->add_option("--config", o.config, "JSON run configuration")->check(CLI::ExistingFile);
  };
  const auto data = [&](CLI::App* s) {
    s->add_option("--data", o.data, "CSV dataset (default: synthetic)");
    s->add_option("--schema", o.schema, "Schema JSON (default: <data>.schema.json)");
    s->add_option("--data-seed", o.data_seed, "Seed for generation and splitting (default: --seed)");
    s->add_option("--split", o.ratio, "Training fraction");
  };
  const auto audit_flags = [&](CLI::App* s) {
    s->add_option("--pairs", o.pairs, "Number of matched pairs n");
    s->add_option("--permutations", o.permutations, "Permutation count");
    s->add_option("--background", o.background, "Kernel SHAP background size");
    s->add_option("--pool", o.pool, "Pair pool")->check(CLI::IsMember({"test", "full"}));
    s->add_option("--output", o.output, "Explained output")->check(CLI::IsMember({"logit", "probability"}));
  };
  const auto model_flag = [&](CLI::App* s) { s->add_option("--model", o.model, "Model JSON"); };
  const auto seeds_flags = [&](CLI::App* s) {
    s->add_option("--seeds", o.n_seeds, "Number of seeds");
    s->add_option("--first-seed", o.first_seed, "First seed");
  };
  const auto modify_flags = [&](CLI::App* s) {
    s->add_option("--alpha", o.alpha, "Explanation-loss weight");
    s->add_option("--iterations", o.iterations, "Modification steps");
    s->add_option("--modify-lr", o.modify_lr, "Modification learning rate");
    s->add_option("--unfair", o.unfair, "Unfair features (skips detection)")->delimiter(',');
  };

  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic dataset");
  common(gen);
  gen->add_option("--data-seed", o.data_seed, "Generator seed (default: --seed)");
  gen->add_option("--rows", o.rows, "Rows (60% advantaged)");

  auto* tr = app.add_subcommand("train", "Train a classifier");
  common(tr);
  data(tr);
  tr->add_option("--features", o.features, "Comma-separated input columns")->delimiter(',');
  tr->add_option("--kind", o.kind, "Model family")->check(CLI::IsMember({"mlp", "logistic"}));
  tr->add_option("--dp-weight", o.dp_weight, "Soft demographic-parity weight lambda");
  tr->add_option("--epochs", o.epochs, "Full-batch epochs");
  tr->add_option("--hidden", o.hidden, "Hidden units (0: by input width)");
  tr->add_option("--lr", o.lr, "Adam learning rate");

  auto* au = app.add_subcommand("audit", "Audit a model");
  common(au);
  data(au);
  model_flag(au);
  audit_flags(au);
  au->add_flag("--explanations", o.explanations, "Also write the two explanation sets");

  auto* de = app.add_subcommand("detect", "Detect unfair features");
  common(de);
  data(de);
  model_flag(de);
  audit_flags(de);
  de->add_option("--beta", o.beta, "Per-feature significance threshold");

  auto* mi = app.add_subcommand("mitigate", "Retrain or modify a model");
  common(mi);
  data(mi);
  model_flag(mi);
  audit_flags(mi);
  modify_flags(mi);
  mi->add_option("method", o.method, "retrain or modify")->required()->check(CLI::IsMember({"retrain", "modify"}));
  mi->add_option("--beta", o.beta, "Per-feature significance threshold");

  auto* sw = app.add_subcommand("sweep-ws", "Logistic-regression sensitive-weight sweep");
  common(sw);
  audit_flags(sw);
  seeds_flags(sw);
  sw->add_option("--lo", o.ws_lo, "Grid start");
  sw->add_option("--hi", o.ws_hi, "Grid end");
  sw->add_option("--points", o.points, "Grid points")->check(CLI::PositiveNumber);
  sw->add_option("--rows", o.rows, "Rows per generated dataset");

  auto* sn = app.add_subcommand("sweep-n", "GPF_FAE versus number of pairs");
  common(sn);
  data(sn);
  model_flag(sn);
  audit_flags(sn);
  seeds_flags(sn);
  sn->add_option("--n", o.n_values, "Pair counts")->delimiter(',');

  auto* sp = app.add_subcommand("sweep-pool", "GPF_FAE versus pool size");
  common(sp);
  data(sp);
  model_flag(sp);
  audit_flags(sp);
  seeds_flags(sp);
  sp->add_option("--sizes", o.pool_sizes, "Pool sizes N")->delimiter(',');

  auto* bo = app.add_subcommand("boundary", "Decision boundaries on the PCA plane");
  common(bo);
  data(bo);
  model_flag(bo);
  audit_flags(bo);
  modify_flags(bo);
  bo->add_option("--modified", o.modified, "Modified model JSON (default: computed)");
  bo->add_option("--retrained", o.retrained, "Retrained model JSON (default: computed)");
  bo->add_option("--resolution", o.resolution, "Grid points per axis");

  std::string command = "pfair";
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    for (auto* s : app.get_subcommands()) command = s->get_name();
    error_out(command, "usage", e.what());
    return 2;
  }

  const auto* sub = app.get_subcommands().front();
  command = sub->get_name();
  try {
    Context ctx{command, resolve(o)};
    if (command == "gen-data") cmd_gen_data(ctx);
    else if (command == "train") cmd_train(ctx);
    else if (command == "audit") cmd_audit(ctx);
    else if (command == "detect") cmd_detect(ctx);
    else if (command == "mitigate") cmd_mitigate(ctx);
    else if (command == "sweep-ws") cmd_sweep_ws(ctx);
    else if (command == "sweep-n") cmd_sweep_n(ctx);
    else if (command == "sweep-pool") cmd_sweep_pool(ctx);
    else if (command == "boundary") cmd_boundary(ctx);
  } catch (const Error& e) {
    error_out(command, "pfair", e.what());
    return 1;
  } catch (const std::exception& e) {
    error_out(command, "internal", e.what());
    return 1;
  }
  return 0;
}
