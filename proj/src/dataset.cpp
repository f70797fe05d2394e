#include "fairvic/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "fairvic/rng.hpp"

namespace fairvic {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

// Minimal CSV line splitter; supports double-quoted fields with "" escapes.
std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cell += '"';
          ++i;
        } else {
          quoted = false;
        }
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

bool is_missing(const std::string& cell) { return cell.empty() || cell == "?"; }

double parse_number(const std::string& cell, long row, const std::string& column) {
  const char* begin = cell.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0' || !std::isfinite(v)) {
    throw LoadError("row " + std::to_string(row) + ", column '" + column +
                    "': cannot parse '" + cell + "' as a number");
  }
  return v;
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> parts;
  std::string item;
  std::stringstream ss(value);
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) parts.push_back(item);
  }
  return parts;
}

ColumnKind parse_kind(const std::string& text, const std::string& path) {
  if (text == "continuous") return ColumnKind::Continuous;
  if (text == "categorical") return ColumnKind::Categorical;
  if (text == "protected") return ColumnKind::Protected;
  if (text == "target") return ColumnKind::Target;
  throw LoadError(path + ": unknown column kind '" + text + "'");
}

}  // namespace

void DatasetSchema::validate() const {
  if (name.empty()) throw std::invalid_argument("schema: empty name");
  int targets = 0, protections = 0;
  for (const auto& col : columns) {
    if (col.name.empty()) throw std::invalid_argument("schema '" + name + "': unnamed column");
    if (col.kind == ColumnKind::Target) ++targets;
    if (col.kind == ColumnKind::Protected) ++protections;
  }
  if (targets != 1)
    throw std::invalid_argument("schema '" + name + "': expected exactly one target column, got " +
                                std::to_string(targets));
  if (protections != 1)
    throw std::invalid_argument("schema '" + name +
                                "': expected exactly one protected column, got " +
                                std::to_string(protections));
  if (columns.size() < 2)
    throw std::invalid_argument("schema '" + name + "': no feature columns");
  if (favourable_value.empty())
    throw std::invalid_argument("schema '" + name + "': favourable value not set");
  if (!protected_is_numeric && privileged_value.empty())
    throw std::invalid_argument("schema '" + name + "': privileged value not set");
}

DatasetSchema builtin_schema(const std::string& name) {
  DatasetSchema s;
  s.name = name;
  using CK = ColumnKind;
  if (name == "adult") {
    s.columns = {
        {"age", CK::Continuous},           {"workclass", CK::Categorical},
        {"education_num", CK::Continuous}, {"marital_status", CK::Categorical},
        {"occupation", CK::Categorical},   {"relationship", CK::Categorical},
        {"race", CK::Categorical},         {"sex", CK::Protected},
        {"capital_gain", CK::Continuous},  {"capital_loss", CK::Continuous},
        {"hours_per_week", CK::Continuous},{"income", CK::Target},
    };
    s.favourable_value = ">50K";
    s.privileged_value = "Male";
  } else if (name == "compas") {
    s.columns = {
        {"sex", CK::Categorical},          {"age", CK::Continuous},
        {"race", CK::Protected},           {"juv_fel_count", CK::Continuous},
        {"juv_misd_count", CK::Continuous},{"juv_other_count", CK::Continuous},
        {"priors_count", CK::Continuous},  {"c_charge_degree", CK::Categorical},
        {"two_year_recid", CK::Target},
    };
    s.favourable_value = "0";  // no recidivism
    s.privileged_value = "Caucasian";
  } else if (name == "german") {
    s.columns = {
        {"status", CK::Categorical},       {"duration", CK::Continuous},
        {"credit_history", CK::Categorical},{"purpose", CK::Categorical},
        {"credit_amount", CK::Continuous}, {"savings", CK::Categorical},
        {"employment", CK::Categorical},   {"installment_rate", CK::Continuous},
        {"personal_status", CK::Categorical},{"other_debtors", CK::Categorical},
        {"residence_since", CK::Continuous},{"property", CK::Categorical},
        {"age", CK::Protected},            {"other_installment", CK::Categorical},
        {"housing", CK::Categorical},      {"existing_credits", CK::Continuous},
        {"job", CK::Categorical},          {"num_dependents", CK::Continuous},
        {"telephone", CK::Categorical},    {"foreign_worker", CK::Categorical},
        {"risk", CK::Target},
    };
    s.favourable_value = "Good";
    s.protected_is_numeric = true;
    s.protected_threshold = 25.0;  // age > 25 counts as privileged
  } else {
    throw std::invalid_argument("unknown builtin schema '" + name + "'");
  }
  s.validate();
  return s;
}

DatasetSchema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open schema file '" + path + "'");
  DatasetSchema s;
  bool saw_privileged = false, saw_threshold = false;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw LoadError(path + ":" + std::to_string(lineno) + ": expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key == "name") {
      s.name = value;
    } else if (key == "column") {
      auto parts = split_list(value);
      if (parts.size() != 2)
        throw LoadError(path + ":" + std::to_string(lineno) +
                        ": column entries are 'column = <name>, <kind>'");
      s.columns.push_back({parts[0], parse_kind(parts[1], path)});
    } else if (key == "favourable") {
      s.favourable_value = value;
    } else if (key == "privileged") {
      s.privileged_value = value;
      saw_privileged = true;
    } else if (key == "threshold") {
      s.protected_threshold = parse_number(value, lineno, key);
      s.protected_is_numeric = true;
      saw_threshold = true;
    } else {
      throw LoadError(path + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
  if (saw_privileged && saw_threshold)
    throw LoadError(path + ": give either 'privileged' or 'threshold', not both");
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw LoadError(path + ": " + e.what());
  }
  return s;
}

Dataset load_csv(const std::string& path, const DatasetSchema& schema) {
  schema.validate();
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open '" + path + "'");

  std::string header_line;
  if (!std::getline(in, header_line)) throw LoadError(path + ": empty file");
  auto header = split_csv_line(header_line);

  // Map every schema column to its position in the file.
  std::vector<int> positions(schema.columns.size(), -1);
  for (size_t c = 0; c < schema.columns.size(); ++c) {
    auto it = std::find(header.begin(), header.end(), schema.columns[c].name);
    if (it == header.end())
      throw LoadError(path + ": header is missing column '" + schema.columns[c].name + "'");
    positions[c] = static_cast<int>(it - header.begin());
  }

  // First pass: keep complete rows as raw cells restricted to used columns.
  std::vector<std::vector<std::string>> rows;
  std::string line;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw LoadError(path + ": row " + std::to_string(lineno) + " has " +
                      std::to_string(cells.size()) + " cells, header has " +
                      std::to_string(header.size()));
    std::vector<std::string> used(schema.columns.size());
    bool missing = false;
    for (size_t c = 0; c < schema.columns.size(); ++c) {
      used[c] = cells[positions[c]];
      if (is_missing(used[c])) missing = true;
    }
    if (missing) continue;
    rows.push_back(std::move(used));
  }
  if (rows.empty()) throw LoadError(path + ": no usable data rows");

  // Ordinal codes for categoricals: sorted distinct raw values.
  std::vector<std::map<std::string, double>> codes(schema.columns.size());
  for (size_t c = 0; c < schema.columns.size(); ++c) {
    if (schema.columns[c].kind != ColumnKind::Categorical) continue;
    std::vector<std::string> values;
    for (const auto& r : rows) values.push_back(r[c]);
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    for (size_t i = 0; i < values.size(); ++i) codes[c][values[i]] = static_cast<double>(i);
  }

  const long n = static_cast<long>(rows.size());
  const int n_features = static_cast<int>(schema.columns.size()) - 1;  // all but target
  Dataset d;
  d.features.resize(n, n_features);
  d.labels.resize(n);
  d.protected_attr.resize(n);
  d.feature_names.reserve(n_features);

  std::vector<int> feature_of(schema.columns.size(), -1);
  int f = 0;
  for (size_t c = 0; c < schema.columns.size(); ++c) {
    if (schema.columns[c].kind == ColumnKind::Target) continue;
    feature_of[c] = f;
    d.feature_names.push_back(schema.columns[c].name);
    if (schema.columns[c].kind == ColumnKind::Protected) d.protected_col = f;
    ++f;
  }

  for (long r = 0; r < n; ++r) {
    for (size_t c = 0; c < schema.columns.size(); ++c) {
      const std::string& cell = rows[r][c];
      const std::string& cname = schema.columns[c].name;
      switch (schema.columns[c].kind) {
        case ColumnKind::Continuous:
          d.features(r, feature_of[c]) = parse_number(cell, r + 2, cname);
          break;
        case ColumnKind::Categorical:
          d.features(r, feature_of[c]) = codes[c].at(cell);
          break;
        case ColumnKind::Protected: {
          double v;
          if (schema.protected_is_numeric) {
            v = parse_number(cell, r + 2, cname) > schema.protected_threshold ? 1.0 : 0.0;
          } else {
            v = (cell == schema.privileged_value) ? 1.0 : 0.0;
          }
          d.features(r, feature_of[c]) = v;
          d.protected_attr(r) = static_cast<int>(v);
          break;
        }
        case ColumnKind::Target:
          d.labels(r) = (cell == schema.favourable_value) ? 1 : 0;
          break;
      }
    }
  }
  return d;
}

Dataset Dataset::subset(const std::vector<int>& indices) const {
  Dataset out;
  out.features.resize(static_cast<long>(indices.size()), features.cols());
  out.labels.resize(static_cast<long>(indices.size()));
  out.protected_attr.resize(static_cast<long>(indices.size()));
  for (size_t i = 0; i < indices.size(); ++i) {
    int r = indices[i];
    if (r < 0 || r >= features.rows())
      throw std::out_of_range("subset: row index " + std::to_string(r) + " out of range");
    out.features.row(static_cast<long>(i)) = features.row(r);
    out.labels(static_cast<long>(i)) = labels(r);
    out.protected_attr(static_cast<long>(i)) = protected_attr(r);
  }
  out.feature_names = feature_names;
  out.protected_col = protected_col;
  out.standardized = standardized;
  out.feature_mean = feature_mean;
  out.feature_std = feature_std;
  return out;
}

std::pair<Dataset, std::vector<Dataset>> standardize(const Dataset& train,
                                                     const std::vector<Dataset>& others) {
  if (train.standardized) throw std::invalid_argument("standardize: train set already standardized");
  for (const auto& o : others) {
    if (o.standardized) throw std::invalid_argument("standardize: dataset already standardized");
    if (o.features.cols() != train.features.cols())
      throw ShapeError("standardize: column count mismatch");
  }
  if (train.rows() < 1) throw std::invalid_argument("standardize: empty train set");

  const long n = train.rows();
  Vector mean = train.features.colwise().mean();
  Vector var = (train.features.rowwise() - mean.transpose()).array().square().colwise().sum() /
               static_cast<double>(n);
  Vector sd = var.array().sqrt().max(1e-8);
  if (train.protected_col >= 0) {
    mean(train.protected_col) = 0.0;
    sd(train.protected_col) = 1.0;  // leave the protected column untouched
  }

  auto apply = [&](const Dataset& d) {
    Dataset out = d;
    out.features = (d.features.rowwise() - mean.transpose()).array().rowwise() /
                   sd.transpose().array();
    out.standardized = true;
    out.feature_mean = mean;
    out.feature_std = sd;
    return out;
  };

  std::vector<Dataset> mapped;
  mapped.reserve(others.size());
  for (const auto& o : others) mapped.push_back(apply(o));
  return {apply(train), std::move(mapped)};
}

std::pair<Dataset, Dataset> train_test_split(const Dataset& data, double test_fraction,
                                             std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw std::invalid_argument("train_test_split: test_fraction must be in (0, 1)");
  const long n = data.rows();
  long test_n = std::lround(static_cast<double>(n) * test_fraction);
  if (test_n < 1 || test_n >= n)
    throw std::invalid_argument("train_test_split: split leaves an empty side");

  std::vector<int> order(n);
  for (long i = 0; i < n; ++i) order[i] = static_cast<int>(i);
  SplitMix64 rng(seed);
  shuffle(order, rng);

  std::vector<int> train_idx(order.begin(), order.end() - test_n);
  std::vector<int> test_idx(order.end() - test_n, order.end());
  return {data.subset(train_idx), data.subset(test_idx)};
}

}  // namespace fairvic
