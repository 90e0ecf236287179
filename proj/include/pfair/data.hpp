#pragma once

#include "pfair/core.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <unordered_map>
#include <utility>

namespace pfair {

// A binary-labelled table with one designated sensitive column. The
// sensitive column stays in the feature matrix; models that must not see it
// consume a column subset instead.
struct TabularDataset {
  Matrix features;
  std::vector<std::string> feature_names;
  std::vector<int> labels;
  std::size_t sensitive_index = 0;
  // Value the sensitive column takes for the advantaged (first) and
  // disadvantaged (second) group, in the column's current encoding.
  std::pair<double, double> group_values{1.0, 0.0};
  std::string provenance;

  std::size_t rows() const { return labels.size(); }
  std::size_t cols() const { return feature_names.size(); }

  bool advantaged(std::size_t row) const {
    return features(static_cast<Eigen::Index>(row),
                    static_cast<Eigen::Index>(sensitive_index)) == group_values.first;
  }

  // Row indices of the advantaged (true) or disadvantaged (false) group.
  std::vector<std::size_t> group_rows(bool advantaged_group) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < rows(); ++i)
      if (advantaged(i) == advantaged_group) out.push_back(i);
    return out;
  }

  std::vector<int> group_indicator() const {
    std::vector<int> g(rows());
    for (std::size_t i = 0; i < rows(); ++i) g[i] = advantaged(i) ? 1 : 0;
    return g;
  }

  std::size_t index_of(std::string_view name) const {
    for (std::size_t j = 0; j < feature_names.size(); ++j)
      if (feature_names[j] == name) return j;
    throw Error("unknown feature: " + std::string(name));
  }

  std::vector<std::size_t> all_columns() const {
    std::vector<std::size_t> c(cols());
    for (std::size_t j = 0; j < c.size(); ++j) c[j] = j;
    return c;
  }

  Vector label_vector() const {
    Vector y(static_cast<Eigen::Index>(rows()));
    for (std::size_t i = 0; i < rows(); ++i) y(static_cast<Eigen::Index>(i)) = labels[i];
    return y;
  }

  TabularDataset subset(const std::vector<std::size_t>& row_idx) const {
    TabularDataset out;
    out.features = select_rows(features, row_idx);
    out.feature_names = feature_names;
    out.labels.reserve(row_idx.size());
    for (auto r : row_idx) out.labels.push_back(labels.at(r));
    out.sensitive_index = sensitive_index;
    out.group_values = group_values;
    out.provenance = provenance;
    return out;
  }

  void validate() const {
    require(!feature_names.empty(), "dataset has no features");
    require(static_cast<std::size_t>(features.rows()) == labels.size(),
            "feature rows and labels differ in length");
    require(static_cast<std::size_t>(features.cols()) == feature_names.size(),
            "feature columns and names differ in length");
    require(sensitive_index < cols(), "sensitive_index addresses no column");
    require(group_values.first != group_values.second, "group values must differ");
    std::set<std::string> seen;
    for (const auto& n : feature_names)
      require(seen.insert(n).second, "duplicate feature name: " + n);
    for (int y : labels) require(y == 0 || y == 1, "labels must be 0 or 1");
    require(features.allFinite(), "feature values must be finite");
    bool has1 = false, has2 = false;
    for (std::size_t i = 0; i < rows(); ++i) {
      const double s = features(static_cast<Eigen::Index>(i),
                                static_cast<Eigen::Index>(sensitive_index));
      require(s == group_values.first || s == group_values.second,
              "sensitive column holds a value outside the group pair");
      (s == group_values.first ? has1 : has2) = true;
    }
    require(has1 && has2, "both sensitive groups must be present");
  }
};

struct SplitDataset {
  TabularDataset train;
  TabularDataset test;
  double ratio = 0.8;
  std::uint64_t seed = 0;
};

struct SyntheticConfig {
  std::size_t m = 10000;
  std::size_t n_advantaged = 6000;
  std::array<double, 5> weights{-0.2, 1.5, 0.5, 0.5, 0.5};
  double proxy_std = 0.1;
  double noise_std = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    require(n_advantaged > 0 && n_advantaged < m, "need 0 < n_advantaged < m");
    require(proxy_std > 0, "proxy_std must be positive");
    require(noise_std >= 0, "noise_std must be non-negative");
  }
};

inline void to_json(nlohmann::ordered_json& j, const SyntheticConfig& c) {
  j = nlohmann::ordered_json{{"m", c.m},
                             {"n_advantaged", c.n_advantaged},
                             {"weights", c.weights},
                             {"proxy_std", c.proxy_std},
                             {"noise_std", c.noise_std},
                             {"seed", c.seed}};
}

inline void from_json(const nlohmann::ordered_json& j, SyntheticConfig& c) {
  c.m = j.value("m", c.m);
  c.n_advantaged = j.value("n_advantaged", c.n_advantaged);
  c.weights = j.value("weights", c.weights);
  c.proxy_std = j.value("proxy_std", c.proxy_std);
  c.noise_std = j.value("noise_std", c.noise_std);
  c.seed = j.value("seed", c.seed);
}

// Column roles for CSV ingestion; mirrors the JSON schema sidecar.
struct CsvSchema {
  std::string label;
  std::string sensitive;
  std::optional<std::string> advantaged_value;
  std::optional<std::string> disadvantaged_value;
  std::optional<std::string> positive_label;

  static CsvSchema from_json(const nlohmann::json& j) {
    CsvSchema s;
    s.label = j.at("label").get<std::string>();
    s.sensitive = j.at("sensitive").get<std::string>();
    auto opt = [&](const char* key) -> std::optional<std::string> {
      if (!j.contains(key) || j[key].is_null()) return std::nullopt;
      return j[key].is_string() ? j[key].get<std::string>() : j[key].dump();
    };
    s.advantaged_value = opt("advantaged_value");
    s.disadvantaged_value = opt("disadvantaged_value");
    s.positive_label = opt("positive_label");
    return s;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j{{"label", label}, {"sensitive", sensitive}};
    j["advantaged_value"] = advantaged_value ? nlohmann::ordered_json(*advantaged_value) : nlohmann::ordered_json(nullptr);
    j["disadvantaged_value"] =
        disadvantaged_value ? nlohmann::ordered_json(*disadvantaged_value) : nlohmann::ordered_json(nullptr);
    j["positive_label"] = positive_label ? nlohmann::ordered_json(*positive_label) : nlohmann::ordered_json(nullptr);
    return j;
  }
};

// ---------------------------------------------------------------------------
// CSV text handling

// Raw string cells as read from disk, before any encoding.
struct RawTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trim(cell));
      cell.clear();
    } else {
      cell += c;
    }
  }
  out.push_back(trim(cell));
  return out;
}

inline std::optional<double> parse_number(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline RawTable read_csv_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open CSV file: " + path.string());
  RawTable t;
  std::string line;
  bool have_header = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto trimmed = detail::trim(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    auto cells = detail::split_csv_line(line);
    if (!have_header) {
      t.header = std::move(cells);
      have_header = true;
      continue;
    }
    require(cells.size() == t.header.size(),
            "ragged row at line " + std::to_string(line_no) + ": expected " +
                std::to_string(t.header.size()) + " cells, got " + std::to_string(cells.size()));
    t.rows.push_back(std::move(cells));
  }
  require(have_header, "CSV file has no header row: " + path.string());
  std::set<std::string> seen;
  for (const auto& h : t.header) require(seen.insert(h).second, "duplicate CSV header: " + h);
  return t;
}

// Result of label encoding: numeric cells plus, per categorical column, the
// code assigned to each category in order of first appearance.
struct EncodedTable {
  std::vector<std::string> header;
  Matrix values;
  std::map<std::string, std::vector<std::string>> categories;
};

// Columns where every cell parses as a number pass through unchanged; any
// other column is coded 0,1,2,... by first appearance.
inline EncodedTable label_encode(const RawTable& table) {
  EncodedTable out;
  out.header = table.header;
  const auto m = static_cast<Eigen::Index>(table.rows.size());
  const auto d = static_cast<Eigen::Index>(table.header.size());
  out.values.resize(m, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    bool numeric = true;
    for (Eigen::Index i = 0; i < m && numeric; ++i) {
      auto v = detail::parse_number(table.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
      if (v) out.values(i, j) = *v;
      else numeric = false;
    }
    if (numeric) continue;
    std::unordered_map<std::string, double> codes;
    std::vector<std::string> order;
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto& cell = table.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      auto [it, inserted] = codes.try_emplace(cell, static_cast<double>(order.size()));
      if (inserted) order.push_back(cell);
      out.values(i, j) = it->second;
    }
    out.categories[table.header[static_cast<std::size_t>(j)]] = std::move(order);
  }
  return out;
}

namespace detail {

// Numeric code of a raw cell value within an encoded column.
inline std::optional<double> encoded_value(const EncodedTable& t, const std::string& column,
                                           const std::string& raw) {
  if (auto it = t.categories.find(column); it != t.categories.end()) {
    const auto& cats = it->second;
    auto pos = std::find(cats.begin(), cats.end(), raw);
    if (pos == cats.end()) return std::nullopt;
    return static_cast<double>(pos - cats.begin());
  }
  return parse_number(raw);
}

}  // namespace detail

inline TabularDataset dataset_from_table(const RawTable& table, const CsvSchema& schema) {
  const auto find_col = [&](const std::string& name) -> std::size_t {
    for (std::size_t j = 0; j < table.header.size(); ++j)
      if (table.header[j] == name) return j;
    throw Error("schema names unknown column: " + name);
  };
  const std::size_t label_col = find_col(schema.label);
  const std::size_t sens_col = find_col(schema.sensitive);
  require(label_col != sens_col, "label and sensitive columns must differ");
  require(!table.rows.empty(), "CSV file has no data rows");

  // Labels: exactly two distinct raw values at most.
  std::vector<std::string> label_values;
  for (const auto& r : table.rows)
    if (std::find(label_values.begin(), label_values.end(), r[label_col]) == label_values.end())
      label_values.push_back(r[label_col]);
  require(label_values.size() <= 2, "non-binary label column '" + schema.label + "' (" +
                                        std::to_string(label_values.size()) + " distinct values)");
  std::vector<int> labels;
  labels.reserve(table.rows.size());
  for (const auto& r : table.rows) {
    const auto& v = r[label_col];
    if (schema.positive_label) {
      labels.push_back(v == *schema.positive_label ? 1 : 0);
    } else {
      auto num = detail::parse_number(v);
      require(num && (*num == 0.0 || *num == 1.0),
              "non-binary label value '" + v + "'; set positive_label in the schema");
      labels.push_back(*num == 1.0 ? 1 : 0);
    }
  }

  RawTable feats;
  for (std::size_t j = 0; j < table.header.size(); ++j)
    if (j != label_col) feats.header.push_back(table.header[j]);
  feats.rows.reserve(table.rows.size());
  for (const auto& r : table.rows) {
    std::vector<std::string> row;
    row.reserve(feats.header.size());
    for (std::size_t j = 0; j < r.size(); ++j)
      if (j != label_col) row.push_back(r[j]);
    feats.rows.push_back(std::move(row));
  }
  EncodedTable enc = label_encode(feats);

  TabularDataset ds;
  ds.features = std::move(enc.values);
  ds.feature_names = feats.header;
  ds.labels = std::move(labels);
  ds.sensitive_index = static_cast<std::size_t>(
      std::find(feats.header.begin(), feats.header.end(), schema.sensitive) - feats.header.begin());

  const auto sens_code = [&](const std::string& raw) {
    auto v = detail::encoded_value(enc, schema.sensitive, raw);
    require(v.has_value(), "group value '" + raw + "' not found in column " + schema.sensitive);
    return *v;
  };
  if (schema.advantaged_value && schema.disadvantaged_value) {
    ds.group_values = {sens_code(*schema.advantaged_value), sens_code(*schema.disadvantaged_value)};
  } else {
    require(!enc.categories.count(schema.sensitive),
            "categorical sensitive column needs advantaged_value and disadvantaged_value");
    ds.group_values = {1.0, 0.0};
  }

  std::ostringstream prov;
  prov << "csv";
  for (const auto& [col, cats] : enc.categories) {
    prov << "; label-encoded " << col << ":";
    for (std::size_t k = 0; k < cats.size(); ++k) prov << (k ? "," : "") << cats[k] << "=" << k;
  }
  ds.provenance = prov.str();
  ds.validate();
  return ds;
}

inline TabularDataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  require(std::filesystem::exists(path), "missing CSV file: " + path.string());
  return dataset_from_table(read_csv_table(path), schema);
}

inline CsvSchema load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open schema file: " + path.string());
  return CsvSchema::from_json(nlohmann::json::parse(in));
}

// Schema that reloads a dataset written by write_csv.
inline CsvSchema schema_for(const TabularDataset& ds) {
  CsvSchema s;
  s.label = "label";
  s.sensitive = ds.feature_names.at(ds.sensitive_index);
  s.advantaged_value = detail::format_double(ds.group_values.first);
  s.disadvantaged_value = detail::format_double(ds.group_values.second);
  s.positive_label = "1";
  return s;
}

// Writes features then a "label" column, 17 significant digits, followed by
// a provenance footer comment line.
inline void write_csv(const TabularDataset& ds, const std::filesystem::path& path,
                      const std::string& footer = {}) {
  std::ofstream out(path);
  require(out.good(), "cannot write CSV file: " + path.string());
  for (const auto& n : ds.feature_names) out << n << ',';
  out << "label\n";
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    for (std::size_t j = 0; j < ds.cols(); ++j)
      out << detail::format_double(ds.features(static_cast<Eigen::Index>(i),
                                               static_cast<Eigen::Index>(j)))
          << ',';
    out << ds.labels[i] << '\n';
  }
  out << "# provenance: " << (footer.empty() ? ds.provenance : footer) << '\n';
  require(out.good(), "failed writing CSV file: " + path.string());
}

// ---------------------------------------------------------------------------
// Preprocessing

struct ColumnStats {
  std::vector<double> mean;
  std::vector<double> stddev;  // population standard deviation
  std::vector<std::string> warnings;
};

inline ColumnStats fit_zscore(const TabularDataset& ds) {
  ColumnStats st;
  const auto m = static_cast<double>(ds.rows());
  require(ds.rows() > 0, "cannot normalise an empty dataset");
  for (std::size_t j = 0; j < ds.cols(); ++j) {
    const auto col = ds.features.col(static_cast<Eigen::Index>(j));
    const double mean = col.sum() / m;
    const double var = (col.array() - mean).square().sum() / m;
    st.mean.push_back(mean);
    st.stddev.push_back(std::sqrt(var));
    if (!(var > 0))
      st.warnings.push_back("column '" + ds.feature_names[j] +
                            "' has zero variance; passed through unscaled");
  }
  return st;
}

// Applies fitted statistics; constant columns pass through unscaled.
inline TabularDataset apply_zscore(const TabularDataset& ds, const ColumnStats& st) {
  require(st.mean.size() == ds.cols(), "statistics do not match dataset width");
  TabularDataset out = ds;
  const auto scale = [&](std::size_t j, double v) {
    return st.stddev[j] > 0 ? (v - st.mean[j]) / st.stddev[j] : v;
  };
  for (std::size_t j = 0; j < ds.cols(); ++j)
    for (Eigen::Index i = 0; i < out.features.rows(); ++i)
      out.features(i, static_cast<Eigen::Index>(j)) =
          scale(j, ds.features(i, static_cast<Eigen::Index>(j)));
  const auto s = ds.sensitive_index;
  out.group_values = {scale(s, ds.group_values.first), scale(s, ds.group_values.second)};
  return out;
}

inline std::pair<TabularDataset, ColumnStats> zscore_normalize(const TabularDataset& ds) {
  auto st = fit_zscore(ds);
  return {apply_zscore(ds, st), std::move(st)};
}

// Split sizes are ceil(ratio*m) / remainder.
inline SplitDataset train_test_split(const TabularDataset& ds, double ratio, std::uint64_t seed) {
  require(ratio > 0 && ratio < 1, "split ratio must lie in (0,1)");
  require(ds.rows() >= 2, "need at least two rows to split");
  const auto m = ds.rows();
  const auto n_train = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(m) - 1e-9));
  require(n_train < m, "split leaves the test set empty");
  std::vector<std::size_t> perm(m);
  for (std::size_t i = 0; i < m; ++i) perm[i] = i;
  Rng rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::size_t> tr(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> te(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
  SplitDataset sp{ds.subset(tr), ds.subset(te), ratio, seed};
  bool g1 = false, g2 = false, y0 = false, y1 = false;
  for (std::size_t i = 0; i < sp.train.rows(); ++i) {
    (sp.train.advantaged(i) ? g1 : g2) = true;
    (sp.train.labels[i] ? y1 : y0) = true;
  }
  require(g1 && g2 && y0 && y1,
          "split leaves a group or label class absent from the training set; choose another seed");
  return sp;
}

// Normalises with training statistics applied to both sides.
inline std::pair<SplitDataset, ColumnStats> normalize_split(const SplitDataset& sp) {
  auto st = fit_zscore(sp.train);
  SplitDataset out{apply_zscore(sp.train, st), apply_zscore(sp.test, st), sp.ratio, sp.seed};
  return {std::move(out), std::move(st)};
}

// Columns [x1, x2, xs, xp]; xs = 1 for the first n_advantaged rows. The
// label is 1 iff t >= 0, i.e. floor(sigmoid(t) + 0.5).
inline TabularDataset generate_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  TabularDataset ds;
  ds.features.resize(static_cast<Eigen::Index>(cfg.m), 4);
  ds.labels.resize(cfg.m);
  ds.feature_names = {"x1", "x2", "xs", "xp"};
  ds.sensitive_index = 2;
  ds.group_values = {1.0, 0.0};
  const auto& w = cfg.weights;
  for (std::size_t i = 0; i < cfg.m; ++i) {
    const double x1 = normal(rng);
    const double x2 = normal(rng);
    const double xs = i < cfg.n_advantaged ? 1.0 : 0.0;
    const double xp = xs + cfg.proxy_std * normal(rng);
    const double t = w[0] + w[1] * x1 + w[2] * x2 + w[3] * xs + w[4] * xp + cfg.noise_std * normal(rng);
    const auto r = static_cast<Eigen::Index>(i);
    ds.features.row(r) << x1, x2, xs, xp;
    ds.labels[i] = t >= 0 ? 1 : 0;
  }
  nlohmann::ordered_json j = cfg;
  std::ostringstream prov;
  prov << "synthetic seed=" << cfg.seed << " config_hash=" << std::hex << fnv1a(j.dump());
  ds.provenance = prov.str();
  return ds;
}

inline double positive_rate(const std::vector<int>& values, const std::vector<int>& group, int g) {
  std::size_t n = 0, pos = 0;
  for (std::size_t i = 0; i < values.size(); ++i)
    if (group[i] == g) {
      ++n;
      pos += values[i] == 1;
    }
  require(n > 0, g ? "advantaged group is empty" : "disadvantaged group is empty");
  return static_cast<double>(pos) / static_cast<double>(n);
}

// Demographic-parity gap of the dataset's own labels.
inline double dataset_dp(const TabularDataset& ds) {
  const auto g = ds.group_indicator();
  return std::abs(positive_rate(ds.labels, g, 1) - positive_rate(ds.labels, g, 0));
}

// Appends with-replacement copies of advantaged positive rows until the
// dataset DP first exceeds target_dp. Caps the number of appended rows at
// 10*m.
inline TabularDataset oversample_to_dp(const TabularDataset& ds, double target_dp,
                                       std::uint64_t seed) {
  std::vector<std::size_t> pool;
  std::size_t n1 = 0, p1 = 0, n2 = 0, p2 = 0;
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    if (ds.advantaged(i)) {
      ++n1;
      p1 += ds.labels[i];
      if (ds.labels[i] == 1) pool.push_back(i);
    } else {
      ++n2;
      p2 += ds.labels[i];
    }
  }
  require(!pool.empty(), "advantaged group has no positive rows to resample");
  require(n1 > 0 && n2 > 0, "both groups must be present");
  const auto dp = [&] {
    return std::abs(static_cast<double>(p1) / static_cast<double>(n1) -
                    static_cast<double>(p2) / static_cast<double>(n2));
  };
  require(dp() < target_dp, "dataset DP already meets the target");
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::vector<std::size_t> rows(ds.rows());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  const std::size_t cap = 10 * ds.rows();
  for (std::size_t added = 0; dp() <= target_dp; ++added) {
    require(added < cap, "target DP unreachable within " + std::to_string(cap) + " appended rows");
    rows.push_back(pool[pick(rng)]);
    ++n1;
    ++p1;
  }
  auto out = ds.subset(rows);
  out.provenance = ds.provenance + "; oversampled to DP>" + detail::format_double(target_dp) +
                   " seed=" + std::to_string(seed);
  return out;
}

inline double pearson_correlation(const TabularDataset& ds, std::size_t feature) {
  require(feature < ds.cols(), "feature index out of range");
  const auto a = ds.features.col(static_cast<Eigen::Index>(feature));
  const auto b = ds.features.col(static_cast<Eigen::Index>(ds.sensitive_index));
  const double ma = a.mean(), mb = b.mean();
  const auto da = (a.array() - ma).eval();
  const auto db = (b.array() - mb).eval();
  const double va = da.square().sum(), vb = db.square().sum();
  require(va > 0 && vb > 0, "zero-variance column in correlation");
  return std::clamp((da * db).sum() / std::sqrt(va * vb), -1.0, 1.0);
}

// Non-sensitive columns whose |Pearson r| with the sensitive column is below
// threshold. Constant columns carry no group information and are kept.
inline std::vector<std::size_t> select_fair_features(const TabularDataset& ds, double threshold) {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < ds.cols(); ++j) {
    if (j == ds.sensitive_index) continue;
    const auto col = ds.features.col(static_cast<Eigen::Index>(j));
    const bool constant = (col.array() == col(0)).all();
    if (constant || std::abs(pearson_correlation(ds, j)) < threshold) out.push_back(j);
  }
  require(!out.empty(), "no feature falls below correlation threshold " +
                            detail::format_double(threshold) + "; try a higher threshold");
  return out;
}

}  // namespace pfair
