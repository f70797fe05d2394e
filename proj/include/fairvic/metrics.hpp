#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>

#include "fairvic/dataset.hpp"
#include "fairvic/network.hpp"
#include "fairvic/types.hpp"

namespace fairvic {

// One evaluated model's worth of predictions, lined up with ground truth and
// the group attribute (0 = unprivileged, 1 = privileged).
struct EvalBundle {
  Vector pred_probs;
  IntVector pred_labels;
  IntVector true_labels;
  IntVector group;

  void validate() const;
  Eigen::Index size() const { return true_labels.size(); }
};

// label 1 iff prob >= 0.5
IntVector threshold(const Vector& pred_probs);

EvalBundle make_bundle(const Vector& pred_probs, const IntVector& true_labels,
                       const IntVector& group);

struct GroupConfusion {
  // indexed by group value (0 = unprivileged, 1 = privileged)
  std::array<long, 2> tp{}, fp{}, tn{}, fn{};

  long size(int g) const { return tp[g] + fp[g] + tn[g] + fn[g]; }
  long positives(int g) const { return tp[g] + fn[g]; }    // actual positives
  long negatives(int g) const { return fp[g] + tn[g]; }    // actual negatives
  long predicted_positive(int g) const { return tp[g] + fp[g]; }
};

GroupConfusion confusion_counts(const EvalBundle& b);

// Group fairness metrics. Each throws UndefinedMetricError naming the empty
// cell when a required rate has no denominator.
double equalized_odds_diff(const EvalBundle& b);
double average_abs_odds_diff(const EvalBundle& b);
double statistical_parity_diff(const EvalBundle& b);  // signed, u - p
double disparate_impact(const EvalBundle& b);         // u / p
std::pair<double, double> accuracy_f1(const EvalBundle& b);

// Flat record of the six metrics; metrics that came out undefined carry a
// reason instead of a value and are never NaN.
struct MetricReport {
  std::optional<double> accuracy;
  std::optional<double> f1;
  std::optional<double> equalized_odds;
  std::optional<double> absolute_odds;
  std::optional<double> statistical_parity;
  std::optional<double> disparate_impact;
  std::map<std::string, std::string> undefined;  // metric name -> reason

  static const std::array<std::string, 6>& metric_names();
  std::optional<double> value(const std::string& name) const;

  std::string csv_header() const;  // the six canonical names
  std::string csv_row() const;     // empty cell where undefined
  std::string to_json() const;     // flat object; undefined -> null + <name>_error
};

// Runs every metric, converting UndefinedMetricError into a recorded reason.
MetricReport evaluate_bundle(const EvalBundle& b);

// Eval-mode forward over the whole dataset, grouped by the protected column.
MetricReport evaluate_model(const Network& model, const Dataset& test);

struct CounterfactualReport {
  MetricReport regular;
  MetricReport cf;        // protected column flipped, groups follow the flip
  MetricReport abs_diff;  // per-metric |regular - cf|
};

CounterfactualReport counterfactual_report(const Network& model, const Dataset& test);

// Arithmetic mean of the six AD values; throws if any of them is undefined.
double mean_abs_difference(const MetricReport& abs_diff);

}  // namespace fairvic
