#include "ttc/data.hpp"

#include <omp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

#include "json_util.hpp"
#include "ttc/engine.hpp"
#include "ttc/error.hpp"

namespace ttc {

using detail::json;

int ColumnSpec::width() const {
  switch (kind) {
    case Kind::Binary: return 1;
    case Kind::Categorical:
      if (top_k > 0) return top_k + 1;
      return static_cast<int>(categories.size()) + (missing_category ? 1 : 0);
    case Kind::Numeric:
      return quantile_bins > 0 ? quantile_bins : static_cast<int>(thresholds.size());
    case Kind::Ignore: return 0;
  }
  return 0;
}

int TabularSchema::feature_count() const {
  int n = 0;
  for (const auto& c : columns) n += c.width();
  return n;
}

bool TabularSchema::fitted() const {
  return std::all_of(columns.begin(), columns.end(), [](const ColumnSpec& c) {
    if (c.kind == ColumnSpec::Kind::Categorical) {
      return c.top_k == 0 || c.categories.size() == static_cast<std::size_t>(c.top_k);
    }
    return c.kind != ColumnSpec::Kind::Numeric || c.quantile_bins == 0 ||
           c.thresholds.size() == static_cast<std::size_t>(c.quantile_bins);
  });
}

TabularSchema parse_schema(std::string_view text) {
  using namespace detail;
  const json j = parse_json(text, "schema");
  TabularSchema s;
  if (j.contains("name")) s.name = get_string(j["name"], "name");
  if (j.contains("header")) s.header = get_bool(j["header"], "header");
  if (j.contains("delimiter")) {
    const std::string d = get_string(j["delimiter"], "delimiter");
    if (d.size() != 1) throw SchemaError("delimiter", "must be a single character");
    s.delimiter = d[0];
  }
  if (j.contains("missing")) s.missing_token = get_string(j["missing"], "missing");

  const json& label = require(j, "label", "schema");
  s.label_column = get_string(require(label, "column", "label"), "label.column");
  const json& values = require(label, "values", "label");
  if (!values.is_array() || values.empty()) throw SchemaError("label.values", "expected one list per class");
  for (std::size_t i = 0; i < values.size(); ++i) {
    s.label_values.push_back(get_strings(values[i], "label.values[" + std::to_string(i) + "]"));
  }

  const json& cols = require(j, "columns", "schema");
  if (!cols.is_array()) throw SchemaError("columns", "expected an array");
  bool saw_label = false;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    const std::string p = "columns[" + std::to_string(i) + "]";
    ColumnSpec c;
    c.name = get_string(require(cols[i], "name", p), p + ".name");
    c.position = static_cast<int>(i);
    if (c.name == s.label_column) {
      saw_label = true;
      s.label_position = c.position;
      continue;
    }
    const std::string kind = get_string(require(cols[i], "kind", p), p + ".kind");
    if (kind == "binary") {
      c.kind = ColumnSpec::Kind::Binary;
      c.true_values = get_strings(require(cols[i], "true_values", p), p + ".true_values");
    } else if (kind == "categorical") {
      c.kind = ColumnSpec::Kind::Categorical;
      if (cols[i].contains("top_k")) {
        c.top_k = get_count(cols[i]["top_k"], p + ".top_k", 1);
        if (cols[i].contains("categories")) throw SchemaError(p, "give either categories or top_k");
        c.missing_category = true;
      } else {
        c.categories = get_strings(require(cols[i], "categories", p), p + ".categories");
      }
      if (cols[i].contains("missing_category")) {
        c.missing_category = get_bool(cols[i]["missing_category"], p + ".missing_category");
        if (c.top_k > 0 && !c.missing_category) throw SchemaError(p, "top_k needs the missing slot");
      }
      if (c.width() == 0) throw SchemaError(p + ".categories", "must not be empty");
    } else if (kind == "numeric") {
      c.kind = ColumnSpec::Kind::Numeric;
      if (cols[i].contains("thresholds")) c.thresholds = get_reals(cols[i]["thresholds"], p + ".thresholds");
      if (cols[i].contains("quantile_bins")) {
        c.quantile_bins = get_count(cols[i]["quantile_bins"], p + ".quantile_bins", 1);
      }
      if (c.quantile_bins > 0 && !c.thresholds.empty()) {
        throw SchemaError(p, "give either thresholds or quantile_bins");
      }
      if (c.width() == 0) throw SchemaError(p, "numeric column needs thresholds or quantile_bins");
      if (!std::is_sorted(c.thresholds.begin(), c.thresholds.end())) {
        throw SchemaError(p + ".thresholds", "must be ascending");
      }
      if (cols[i].contains("impute")) c.impute = get_real(cols[i]["impute"], p + ".impute");
    } else if (kind == "ignore") {
      c.kind = ColumnSpec::Kind::Ignore;
    } else {
      throw SchemaError(p + ".kind", "unknown column kind '" + kind + "'");
    }
    s.columns.push_back(std::move(c));
  }
  s.file_columns = static_cast<int>(cols.size());
  if (!saw_label) throw SchemaError("label.column", "'" + s.label_column + "' is not among the columns");
  if (j.contains("expected_features")) {
    s.expected_features = get_count(j["expected_features"], "expected_features");
    if (s.expected_features != s.feature_count()) {
      throw SchemaError("expected_features", "columns expand to " + std::to_string(s.feature_count()) +
                                                 " features, schema declares " +
                                                 std::to_string(s.expected_features));
    }
  }
  return s;
}

TabularSchema load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError(path.string(), "cannot open schema");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_schema(ss.str());
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string trim(std::string_view s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  std::string out(s.substr(a, b - a));
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
  return out;
}

std::vector<std::string> split_line(std::string_view line, char delim) {
  std::vector<std::string> out;
  std::size_t start = 0;
  bool quoted = false;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i < line.size() && line[i] == '"') quoted = !quoted;
    if (i == line.size() || (line[i] == delim && !quoted)) {
      out.push_back(trim(line.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

bool blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(), [](char ch) { return std::isspace(static_cast<unsigned char>(ch)); });
}

}  // namespace

RawTable parse_csv(std::string_view text, const TabularSchema& schema) {
  RawTable t;
  std::vector<int> index;  // schema column -> cell position
  int label_pos = schema.label_position;
  std::size_t expected_cells = static_cast<std::size_t>(schema.file_columns);
  bool need_header = schema.header;
  for (const auto& c : schema.columns) index.push_back(c.position);

  std::size_t row_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++row_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (blank(line) || line.front() == '|') continue;
    auto cells = split_line(line, schema.delimiter);
    if (need_header) {
      std::unordered_map<std::string, int> at;
      for (std::size_t i = 0; i < cells.size(); ++i) at[cells[i]] = static_cast<int>(i);
      for (std::size_t k = 0; k < schema.columns.size(); ++k) {
        auto it = at.find(schema.columns[k].name);
        if (it == at.end()) throw ParseError("header", "column '" + schema.columns[k].name + "' not found");
        index[k] = it->second;
      }
      auto it = at.find(schema.label_column);
      if (it == at.end()) throw ParseError("header", "label column '" + schema.label_column + "' not found");
      label_pos = it->second;
      expected_cells = cells.size();
      need_header = false;
      continue;
    }
    if (cells.size() != expected_cells) {
      throw ParseError("row " + std::to_string(row_no),
                       "expected " + std::to_string(expected_cells) + " cells, got " +
                           std::to_string(cells.size()));
    }
    std::vector<std::string> row;
    row.reserve(index.size());
    for (int i : index) row.push_back(cells[i]);
    t.cells.push_back(std::move(row));
    t.labels.push_back(std::move(cells[label_pos]));
  }
  return t;
}

RawTable read_csv(const std::filesystem::path& path, const TabularSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string(), "cannot open data file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str(), schema);
}

// ---------------------------------------------------------------------------
// Binarization

namespace {

std::optional<double> parse_number(const std::string& cell, const TabularSchema& schema) {
  if (cell.empty() || cell == schema.missing_token) return std::nullopt;
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw std::invalid_argument(cell);
  }
  return v;
}

std::string where(std::size_t row, const ColumnSpec& c) {
  return "row " + std::to_string(row) + ", column '" + c.name + "'";
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size();
  return m % 2 == 1 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
}

}  // namespace

TabularSchema fit_schema(const TabularSchema& schema, const RawTable& raw,
                         std::span<const std::size_t> train_rows) {
  TabularSchema fitted = schema;
  for (std::size_t k = 0; k < fitted.columns.size(); ++k) {
    ColumnSpec& c = fitted.columns[k];
    if (c.kind == ColumnSpec::Kind::Categorical && c.top_k > 0 && c.categories.empty()) {
      std::unordered_map<std::string, std::size_t> freq;
      for (std::size_t r : train_rows) {
        if (r >= raw.rows()) throw ShapeError("train_rows", "row index out of range");
        const std::string& v = raw.cells[r][k];
        if (!v.empty() && v != schema.missing_token) ++freq[v];
      }
      std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
      std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
      });
      for (int i = 0; i < c.top_k; ++i) {
        // Unused slots keep the width fixed; they never match a cell.
        c.categories.push_back(i < static_cast<int>(ranked.size()) ? ranked[i].first
                                                                   : "\x01unused" + std::to_string(i));
      }
      continue;
    }
    if (c.kind != ColumnSpec::Kind::Numeric) continue;
    std::vector<double> values;
    for (std::size_t r : train_rows) {
      if (r >= raw.rows()) throw ShapeError("train_rows", "row index out of range");
      try {
        if (auto v = parse_number(raw.cells[r][k], schema)) values.push_back(*v);
      } catch (const std::invalid_argument&) {
        throw ParseError(where(r, c), "'" + raw.cells[r][k] + "' is not a number");
      }
    }
    if (values.empty()) throw DegenerateError(c.name, "no observed values in the training rows");
    if (!c.impute) c.impute = median(values);
    if (c.quantile_bins > 0 && c.thresholds.empty()) {
      std::sort(values.begin(), values.end());
      const std::size_t m = values.size();
      for (int i = 1; i <= c.quantile_bins; ++i) {
        const std::size_t at = std::min(m - 1, i * m / static_cast<std::size_t>(c.quantile_bins + 1));
        c.thresholds.push_back(values[at]);
      }
    }
  }
  return fitted;
}

Dataset binarize_table(const RawTable& raw, const TabularSchema& schema) {
  if (!schema.fitted()) throw InvariantError("schema", "quantile thresholds have not been fitted");
  Dataset d;
  d.features = schema.feature_count();
  d.bits.assign(raw.rows() * static_cast<std::size_t>(d.features), 0);
  d.labels.resize(raw.rows());

  std::unordered_map<std::string, int> label_of;
  for (int cls = 0; cls < schema.classes(); ++cls) {
    for (const auto& v : schema.label_values[cls]) label_of[v] = cls;
  }

  for (std::size_t r = 0; r < raw.rows(); ++r) {
    std::uint8_t* out = d.bits.data() + r * d.features;
    int at = 0;
    for (std::size_t k = 0; k < schema.columns.size(); ++k) {
      const ColumnSpec& c = schema.columns[k];
      const std::string& cell = raw.cells[r][k];
      switch (c.kind) {
        case ColumnSpec::Kind::Binary:
          out[at] = std::find(c.true_values.begin(), c.true_values.end(), cell) != c.true_values.end();
          break;
        case ColumnSpec::Kind::Categorical: {
          auto it = std::find(c.categories.begin(), c.categories.end(), cell);
          if (it != c.categories.end()) {
            out[at + (it - c.categories.begin())] = 1;
          } else if (c.missing_category) {
            out[at + static_cast<int>(c.categories.size())] = 1;
          } else {
            throw ParseError(where(r, c), "unknown category '" + cell + "'");
          }
          break;
        }
        case ColumnSpec::Kind::Numeric: {
          std::optional<double> v;
          try {
            v = parse_number(cell, schema);
          } catch (const std::invalid_argument&) {
            throw ParseError(where(r, c), "'" + cell + "' is not a number");
          }
          if (!v) v = c.impute;
          if (!v) throw ParseError(where(r, c), "missing value and no imputation");
          for (std::size_t i = 0; i < c.thresholds.size(); ++i) out[at + i] = *v >= c.thresholds[i];
          break;
        }
        case ColumnSpec::Kind::Ignore: break;
      }
      at += c.width();
    }
    auto it = label_of.find(raw.labels[r]);
    if (it == label_of.end()) {
      throw ParseError("row " + std::to_string(r) + ", column '" + schema.label_column + "'",
                       "unknown label '" + raw.labels[r] + "'");
    }
    d.labels[r] = it->second;
  }
  if (schema.expected_features > 0 && d.features != schema.expected_features) {
    throw SchemaError("expected_features", "emitted " + std::to_string(d.features) + " features");
  }
  return d;
}

Dataset load_tabular(const std::filesystem::path& path, const TabularSchema& schema,
                     std::optional<std::vector<std::size_t>> train_rows) {
  const RawTable raw = read_csv(path, schema);
  std::vector<std::size_t> rows;
  if (train_rows) {
    rows = std::move(*train_rows);
  } else {
    rows.resize(raw.rows());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
  }
  return binarize_table(raw, fit_schema(schema, raw, rows));
}

// ---------------------------------------------------------------------------
// Splits and accuracy

std::vector<Fold> make_splits(std::size_t n, const SplitPlan& plan) {
  if (plan.folds < 1) throw InvariantError("folds", "must be >= 1");
  if (n < static_cast<std::size_t>(plan.folds)) {
    throw InvariantError("rows", "need at least one row per fold");
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(plan.seed);
  for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng() % (i + 1)]);

  std::vector<Fold> folds(plan.folds);
  const auto k = static_cast<std::size_t>(plan.folds);
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t lo = f * n / k;
    const std::size_t hi = (f + 1) * n / k;
    std::vector<std::uint8_t> in_test(n, 0);
    for (std::size_t i = lo; i < hi; ++i) in_test[perm[i]] = 1;
    for (std::size_t i = 0; i < n; ++i) (in_test[i] ? folds[f].test : folds[f].train).push_back(i);
  }
  return folds;
}

double accuracy(const Circuit& c, const Dataset& data, std::span<const std::size_t> rows,
                int threads) {
  if (data.features != c.input_bits()) {
    throw ShapeError("features", "circuit takes " + std::to_string(c.input_bits()) +
                                     " inputs, dataset has " + std::to_string(data.features));
  }
  if (rows.empty()) return 0.0;
  for (std::size_t r : rows) {
    if (r >= data.rows()) throw ShapeError("rows", "row index out of range");
  }
  EvalOptions opts;
  opts.parallel = false;  // rows are the parallel axis here
  const auto count = static_cast<std::int64_t>(rows.size());
  std::int64_t correct = 0;
#pragma omp parallel for num_threads(threads > 0 ? threads : omp_get_max_threads()) \
    reduction(+ : correct) schedule(dynamic, 64)
  for (std::int64_t i = 0; i < count; ++i) {
    const std::size_t r = rows[i];
    correct += eval_cleartext(c, data.row(r), opts).label == data.labels[r];
  }
  return static_cast<double>(correct) / static_cast<double>(count);
}

namespace {

AccuracyReport summarize(std::vector<double> acc) {
  AccuracyReport r;
  r.fold_accuracy = std::move(acc);
  if (r.fold_accuracy.empty()) return r;
  const double n = static_cast<double>(r.fold_accuracy.size());
  r.mean = std::accumulate(r.fold_accuracy.begin(), r.fold_accuracy.end(), 0.0) / n;
  double var = 0.0;
  for (double a : r.fold_accuracy) var += (a - r.mean) * (a - r.mean);
  r.stddev = std::sqrt(var / n);
  return r;
}

}  // namespace

AccuracyReport evaluate_accuracy(const Circuit& c, const Dataset& data,
                                 const std::vector<Fold>& folds, int threads) {
  std::vector<double> acc;
  for (const Fold& f : folds) acc.push_back(accuracy(c, data, f.test, threads));
  return summarize(std::move(acc));
}

AccuracyReport evaluate_accuracy(const std::vector<Circuit>& per_fold, const Dataset& data,
                                 const std::vector<Fold>& folds, int threads) {
  if (per_fold.size() != folds.size()) {
    throw ShapeError("circuits", "one circuit per fold is required");
  }
  std::vector<double> acc;
  for (std::size_t i = 0; i < folds.size(); ++i) {
    acc.push_back(accuracy(per_fold[i], data, folds[i].test, threads));
  }
  return summarize(std::move(acc));
}

}  // namespace ttc
