#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace fairvic {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IntVector = Eigen::VectorXi;

// Dimension disagreement between two objects that must be congruent.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A fairness metric whose defining ratio has an empty cell. The message
// names the cell so callers can report it instead of propagating NaN.
struct UndefinedMetricError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// CSV / schema ingestion failure; message carries row and column context.
struct LoadError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shortest decimal string that round-trips the double exactly.
std::string format_double(double v);

}  // namespace fairvic
