#include "fairvic/metrics.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "fairvic/loss.hpp"

namespace fairvic {

namespace {

const char* group_name(int g) { return g == 1 ? "privileged" : "unprivileged"; }

// Positive-prediction rate for one group; metric passed along for the error
// message when the group is empty.
double positive_rate(const GroupConfusion& c, int g, const std::string& metric) {
  long n = c.size(g);
  if (n == 0)
    throw UndefinedMetricError(metric + " is undefined: " + std::string(group_name(g)) +
                               " group is empty");
  return static_cast<double>(c.predicted_positive(g)) / static_cast<double>(n);
}

double tpr(const GroupConfusion& c, int g, const std::string& metric) {
  long n = c.positives(g);
  if (n == 0)
    throw UndefinedMetricError(metric + " is undefined: " + std::string(group_name(g)) +
                               " group has no positive true labels");
  return static_cast<double>(c.tp[g]) / static_cast<double>(n);
}

double fpr(const GroupConfusion& c, int g, const std::string& metric) {
  long n = c.negatives(g);
  if (n == 0)
    throw UndefinedMetricError(metric + " is undefined: " + std::string(group_name(g)) +
                               " group has no negative true labels");
  return static_cast<double>(c.fp[g]) / static_cast<double>(n);
}

}  // namespace

void EvalBundle::validate() const {
  const Eigen::Index n = true_labels.size();
  if (n == 0) throw std::invalid_argument("eval bundle: empty");
  if (pred_probs.size() != n || pred_labels.size() != n || group.size() != n)
    throw ShapeError("eval bundle: vector lengths differ");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (pred_labels(i) != 0 && pred_labels(i) != 1)
      throw std::invalid_argument("eval bundle: pred_labels must be 0/1");
    if (true_labels(i) != 0 && true_labels(i) != 1)
      throw std::invalid_argument("eval bundle: true_labels must be 0/1");
    if (group(i) != 0 && group(i) != 1)
      throw std::invalid_argument("eval bundle: group must be 0/1");
  }
}

IntVector threshold(const Vector& pred_probs) {
  IntVector out(pred_probs.size());
  for (Eigen::Index i = 0; i < pred_probs.size(); ++i) {
    double p = pred_probs(i);
    if (!(p >= 0.0 && p <= 1.0))
      throw std::invalid_argument("threshold: probability out of [0,1]: " + format_double(p));
    out(i) = p >= 0.5 ? 1 : 0;
  }
  return out;
}

EvalBundle make_bundle(const Vector& pred_probs, const IntVector& true_labels,
                       const IntVector& group) {
  EvalBundle b;
  b.pred_probs = pred_probs;
  b.pred_labels = threshold(pred_probs);
  b.true_labels = true_labels;
  b.group = group;
  b.validate();
  return b;
}

GroupConfusion confusion_counts(const EvalBundle& b) {
  b.validate();
  GroupConfusion c;
  for (Eigen::Index i = 0; i < b.size(); ++i) {
    int g = b.group(i);
    if (b.true_labels(i) == 1)
      (b.pred_labels(i) == 1 ? c.tp[g] : c.fn[g]) += 1;
    else
      (b.pred_labels(i) == 1 ? c.fp[g] : c.tn[g]) += 1;
  }
  return c;
}

double equalized_odds_diff(const EvalBundle& b) {
  GroupConfusion c = confusion_counts(b);
  const std::string m = "equalized_odds";
  double dfpr = std::abs(fpr(c, 0, m) - fpr(c, 1, m));
  double dtpr = std::abs(tpr(c, 0, m) - tpr(c, 1, m));
  return std::max(dfpr, dtpr);
}

double average_abs_odds_diff(const EvalBundle& b) {
  GroupConfusion c = confusion_counts(b);
  const std::string m = "absolute_odds";
  double dfpr = std::abs(fpr(c, 0, m) - fpr(c, 1, m));
  double dtpr = std::abs(tpr(c, 0, m) - tpr(c, 1, m));
  return 0.5 * (dfpr + dtpr);
}

double statistical_parity_diff(const EvalBundle& b) {
  GroupConfusion c = confusion_counts(b);
  const std::string m = "statistical_parity";
  return positive_rate(c, 0, m) - positive_rate(c, 1, m);
}

double disparate_impact(const EvalBundle& b) {
  GroupConfusion c = confusion_counts(b);
  const std::string m = "disparate_impact";
  double rate_u = positive_rate(c, 0, m);
  double rate_p = positive_rate(c, 1, m);
  if (rate_p == 0.0)
    throw UndefinedMetricError(
        "disparate_impact is undefined: privileged group has no positive predictions");
  return rate_u / rate_p;
}

std::pair<double, double> accuracy_f1(const EvalBundle& b) {
  GroupConfusion c = confusion_counts(b);
  long tp = c.tp[0] + c.tp[1];
  long fp = c.fp[0] + c.fp[1];
  long tn = c.tn[0] + c.tn[1];
  long fn = c.fn[0] + c.fn[1];
  double accuracy = static_cast<double>(tp + tn) / static_cast<double>(b.size());
  long denom = 2 * tp + fp + fn;
  double f1 = denom == 0 ? 0.0 : static_cast<double>(2 * tp) / static_cast<double>(denom);
  return {accuracy, f1};
}

const std::array<std::string, 6>& MetricReport::metric_names() {
  static const std::array<std::string, 6> names = {
      "accuracy",           "f1",
      "equalized_odds",     "absolute_odds",
      "statistical_parity", "disparate_impact"};
  return names;
}

namespace {

using Slot = std::optional<double> MetricReport::*;

const std::array<Slot, 6>& slots() {
  static const std::array<Slot, 6> s = {
      &MetricReport::accuracy,           &MetricReport::f1,
      &MetricReport::equalized_odds,     &MetricReport::absolute_odds,
      &MetricReport::statistical_parity, &MetricReport::disparate_impact};
  return s;
}

}  // namespace

std::optional<double> MetricReport::value(const std::string& name) const {
  const auto& names = metric_names();
  for (size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return this->*(slots()[i]);
  throw std::invalid_argument("unknown metric '" + name + "'");
}

std::string MetricReport::csv_header() const {
  std::string out;
  for (const auto& name : metric_names()) {
    if (!out.empty()) out += ',';
    out += name;
  }
  return out;
}

std::string MetricReport::csv_row() const {
  std::string out;
  for (size_t i = 0; i < metric_names().size(); ++i) {
    if (i) out += ',';
    const auto& v = this->*(slots()[i]);
    if (v) out += format_double(*v);
  }
  return out;
}

std::string MetricReport::to_json() const {
  nlohmann::ordered_json j;
  const auto& names = metric_names();
  for (size_t i = 0; i < names.size(); ++i) {
    const auto& v = this->*(slots()[i]);
    if (v)
      j[names[i]] = *v;
    else
      j[names[i]] = nullptr;
  }
  for (const auto& [name, reason] : undefined) j[name + "_error"] = reason;
  return j.dump();
}

MetricReport evaluate_bundle(const EvalBundle& b) {
  b.validate();
  MetricReport r;
  auto guard = [&](const std::string& name, auto compute) -> std::optional<double> {
    try {
      return compute();
    } catch (const UndefinedMetricError& e) {
      r.undefined[name] = e.what();
      return std::nullopt;
    }
  };
  auto [acc, f1] = accuracy_f1(b);
  r.accuracy = acc;
  r.f1 = f1;
  r.equalized_odds = guard("equalized_odds", [&] { return equalized_odds_diff(b); });
  r.absolute_odds = guard("absolute_odds", [&] { return average_abs_odds_diff(b); });
  r.statistical_parity = guard("statistical_parity", [&] { return statistical_parity_diff(b); });
  r.disparate_impact = guard("disparate_impact", [&] { return disparate_impact(b); });
  return r;
}

MetricReport evaluate_model(const Network& model, const Dataset& test) {
  ForwardResult fr = forward(model, test.features, ForwardMode::Eval);
  return evaluate_bundle(make_bundle(fr.predictions, test.labels, test.protected_attr));
}

CounterfactualReport counterfactual_report(const Network& model, const Dataset& test) {
  if (test.protected_col < 0 || test.protected_col >= test.features.cols())
    throw std::invalid_argument("counterfactual_report: test set has no protected column");

  CounterfactualReport out;
  out.regular = evaluate_model(model, test);

  Dataset flipped = test;
  flipped.features = flip_protected(test.features, test.protected_col);
  flipped.protected_attr = (1 - test.protected_attr.array()).matrix();
  out.cf = evaluate_model(model, flipped);

  const auto& names = MetricReport::metric_names();
  for (size_t i = 0; i < names.size(); ++i) {
    auto a = out.regular.*(slots()[i]);
    auto b = out.cf.*(slots()[i]);
    if (a && b) {
      out.abs_diff.*(slots()[i]) = std::abs(*a - *b);
    } else {
      out.abs_diff.undefined[names[i]] =
          names[i] + " absolute difference is undefined: metric undefined in " +
          (a ? "counterfactual" : "regular") + " report";
    }
  }
  return out;
}

double mean_abs_difference(const MetricReport& abs_diff) {
  double sum = 0.0;
  for (const auto& name : abs_diff.metric_names()) {
    auto v = abs_diff.value(name);
    if (!v)
      throw UndefinedMetricError("mean absolute difference is undefined: missing '" + name + "'");
    sum += *v;
  }
  return sum / 6.0;
}

}  // namespace fairvic
