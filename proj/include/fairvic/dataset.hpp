#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fairvic/types.hpp"

namespace fairvic {

enum class ColumnKind { Continuous, Categorical, Protected, Target };

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::Continuous;
};

// Declarative description of one tabular dataset: the used columns in order,
// how the target maps to the favourable label (encoded 1) and how the
// protected column maps to privileged (encoded 1) / unprivileged (0).
struct DatasetSchema {
  std::string name;
  std::vector<ColumnSpec> columns;

  // Raw target cell equal to this value encodes to label 1.
  std::string favourable_value;

  // Protected encoding: categorical columns compare the raw cell against
  // privileged_value; numeric ones binarize with value > threshold -> 1.
  bool protected_is_numeric = false;
  std::string privileged_value;
  double protected_threshold = 0.0;

  void validate() const;  // exactly one target and one protected column
};

// Table-driven schemas for the three tabular benchmarks ("adult", "compas",
// "german").
DatasetSchema builtin_schema(const std::string& name);

// key = value schema file, one entry per line; see README for the format.
DatasetSchema load_schema(const std::string& path);

struct Dataset {
  Matrix features;           // rows x features; protected column binarized in place
  IntVector labels;          // {0,1}, favourable = 1
  IntVector protected_attr;  // {0,1}, privileged = 1 (copy of the protected column)
  std::vector<std::string> feature_names;
  int protected_col = -1;

  // Standardization bookkeeping; set by standardize().
  bool standardized = false;
  Vector feature_mean;
  Vector feature_std;

  Eigen::Index rows() const { return features.rows(); }
  Eigen::Index cols() const { return features.cols(); }
  Dataset subset(const std::vector<int>& indices) const;
};

// Header-checked CSV ingestion. Rows with missing cells ("" or "?") in used
// columns are dropped; categoricals are ordinal-encoded by sorted category
// name; target/protected encoded per schema. Unusable cells raise LoadError
// naming the row and column.
Dataset load_csv(const std::string& path, const DatasetSchema& schema);

// Z-scores every feature column with the train set's mean/std (floor 1e-8)
// and applies the same transform to the others; the protected column is
// exempt so Flip keeps working. Standardizing an already-standardized
// dataset is rejected.
std::pair<Dataset, std::vector<Dataset>> standardize(const Dataset& train,
                                                     const std::vector<Dataset>& others);

// Seeded permutation split; test gets round(rows * test_fraction) rows.
std::pair<Dataset, Dataset> train_test_split(const Dataset& data, double test_fraction,
                                             std::uint64_t seed);

}  // namespace fairvic
