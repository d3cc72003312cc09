#pragma once

// Tabular ingestion: CSV rows are expanded into binary features by a
// per-column schema (binary indicator, one-hot categorical, thermometer
// numeric), split into k 80/20 folds and scored through the LUT engine.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ttc/circuit.hpp"

namespace ttc {

struct ColumnSpec {
  enum class Kind { Binary, Categorical, Numeric, Ignore };
  std::string name;
  Kind kind = Kind::Ignore;
  std::vector<std::string> true_values;  // Binary: value in set -> 1
  std::vector<std::string> categories;   // Categorical
  bool missing_category = false;         // Categorical: extra slot for missing/unseen
  int top_k = 0;                         // Categorical: categories fitted as the k most frequent
  std::vector<double> thresholds;        // Numeric: bit i = x >= thresholds[i]
  int quantile_bins = 0;                 // Numeric: thresholds fitted on training rows
  std::optional<double> impute;          // Numeric: value to use when missing
  int position = -1;                     // column index in a headerless file

  int width() const;
};

struct TabularSchema {
  std::string name;
  std::vector<ColumnSpec> columns;
  std::string label_column;
  int label_position = -1;
  int file_columns = 0;   // cells per row in a headerless file
  std::vector<std::vector<std::string>> label_values;  // class index -> raw values
  int expected_features = 0;
  bool header = false;
  char delimiter = ',';
  std::string missing_token = "?";

  int feature_count() const;
  int classes() const { return static_cast<int>(label_values.size()); }
  bool fitted() const;
};

TabularSchema parse_schema(std::string_view json_text);
TabularSchema load_schema(const std::filesystem::path& path);

// Raw cells in schema column order plus the label column.
struct RawTable {
  std::vector<std::vector<std::string>> cells;  // [row][schema column]
  std::vector<std::string> labels;
  std::size_t rows() const { return cells.size(); }
};

RawTable read_csv(const std::filesystem::path& path, const TabularSchema& schema);
RawTable parse_csv(std::string_view text, const TabularSchema& schema);

// Resolves quantile thresholds, top-k categories and numeric medians from
// `train_rows` only.
TabularSchema fit_schema(const TabularSchema& schema, const RawTable& raw,
                         std::span<const std::size_t> train_rows);

struct Dataset {
  int features = 0;
  std::vector<std::uint8_t> bits;  // [row][feature]
  std::vector<int> labels;

  std::size_t rows() const { return labels.size(); }
  std::span<const std::uint8_t> row(std::size_t i) const {
    return {bits.data() + i * static_cast<std::size_t>(features),
            static_cast<std::size_t>(features)};
  }
};

// Schema must be fitted. Throws ParseError naming row and column.
Dataset binarize_table(const RawTable& raw, const TabularSchema& schema);

// Reads and binarizes; an unfitted schema is fitted on `train_rows`, or on
// all rows when none are given.
Dataset load_tabular(const std::filesystem::path& path, const TabularSchema& schema,
                     std::optional<std::vector<std::size_t>> train_rows = std::nullopt);

struct SplitPlan {
  int folds = 5;
  double test_ratio = 0.2;
  std::uint64_t seed = 0;
};

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Seeded permutation cut into `folds` disjoint test sets.
std::vector<Fold> make_splits(std::size_t n, const SplitPlan& plan);

struct AccuracyReport {
  std::vector<double> fold_accuracy;
  double mean = 0.0;
  double stddev = 0.0;
};

double accuracy(const Circuit& c, const Dataset& data, std::span<const std::size_t> rows,
                int threads = 0);
AccuracyReport evaluate_accuracy(const Circuit& c, const Dataset& data,
                                 const std::vector<Fold>& folds, int threads = 0);
AccuracyReport evaluate_accuracy(const std::vector<Circuit>& per_fold, const Dataset& data,
                                 const std::vector<Fold>& folds, int threads = 0);

}  // namespace ttc
