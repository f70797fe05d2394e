#include "fairvic/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "fairvic/rng.hpp"
#include "fairvic/types.hpp"

namespace fairvic::synth {

namespace {

double normal(SplitMix64& rng) {
  double u1 = 1.0 - rng.uniform01();  // (0, 1]
  double u2 = rng.uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

int pick(SplitMix64& rng, const std::vector<double>& probs) {
  double u = rng.uniform01(), acc = 0.0;
  for (size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size()) - 1;
}

int poisson(SplitMix64& rng, double lambda) {
  double limit = std::exp(-lambda), p = 1.0;
  int k = 0;
  do {
    ++k;
    p *= rng.uniform01();
  } while (p > limit);
  return k - 1;
}

// Bins t at the given cut points; names are ordered low..high quality.
const std::string& binned(double t, const std::vector<double>& cuts,
                          const std::vector<std::string>& names) {
  size_t i = 0;
  while (i < cuts.size() && t > cuts[i]) ++i;
  return names[i];
}

long iclamp(double v, long lo, long hi) {
  long r = std::lround(v);
  return r < lo ? lo : (r > hi ? hi : r);
}

using RowFn = std::function<std::vector<std::string>(SplitMix64&)>;

void emit_csv(const std::string& path, const std::vector<std::string>& header, long n_clean,
              double miss_rate, size_t miss_col, SplitMix64& rng, const RowFn& make_row) {
  std::ofstream out(path);
  if (!out) throw LoadError("cannot write '" + path + "'");
  for (size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  auto write_row = [&](const std::vector<std::string>& row) {
    for (size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << '\n';
  };
  for (long i = 0; i < n_clean; ++i) {
    write_row(make_row(rng));
    if (rng.uniform01() < miss_rate) {
      auto bad = make_row(rng);
      bad[miss_col] = "?";
      write_row(bad);
    }
  }
  if (!out) throw LoadError("write failure on '" + path + "'");
}

void write_adult(const std::string& path, std::uint64_t seed) {
  // Label model: favourable (>50K) ~ Bernoulli(sigmoid(k*(S + b*(2P-1) + c)))
  const double k = 3.2, b = 0.55, c = -0.30;
  const std::vector<std::string> occupations = {
      "Other-service",   "Handlers-cleaners", "Machine-op-inspct", "Transport-moving",
      "Adm-clerical",    "Craft-repair",      "Sales",             "Tech-support",
      "Prof-specialty",  "Exec-managerial"};
  const std::vector<double> decile_cuts = {-1.2816, -0.8416, -0.5244, -0.2533, 0.0,
                                           0.2533,  0.5244,  0.8416,  1.2816};
  const std::vector<std::string> workclasses = {"Private",     "Self-emp-not-inc",
                                                "Self-emp-inc","Federal-gov",
                                                "Local-gov",   "State-gov",
                                                "Without-pay"};
  const std::vector<double> workclass_p = {0.70, 0.08, 0.035, 0.03, 0.065, 0.055, 0.035};
  const std::vector<std::string> marital = {"Married-civ-spouse", "Never-married", "Divorced",
                                            "Separated", "Widowed"};
  const std::vector<double> marital_p = {0.52, 0.28, 0.13, 0.03, 0.04};
  const std::vector<std::string> rels = {"Spouse", "Not-in-family", "Own-child", "Unmarried"};
  const std::vector<double> rel_p = {0.42, 0.30, 0.16, 0.12};
  const std::vector<std::string> races = {"White", "Black", "Asian-Pac-Islander",
                                          "Amer-Indian-Eskimo", "Other"};
  const std::vector<double> race_p = {0.853, 0.096, 0.031, 0.010, 0.010};

  SplitMix64 rng(seed);
  RowFn row = [&](SplitMix64& r) -> std::vector<std::string> {
    int P = r.uniform01() < 0.22 ? 1 : 0;
    double S = normal(r);
    bool y = r.uniform01() < sigmoid(k * (S + b * (2 * P - 1) + c));

    long age = iclamp(38.5 + 13.0 * (0.45 * S + 0.893 * normal(r)), 17, 90);
    const std::string& wc = workclasses[pick(r, workclass_p)];
    long edu = iclamp(10.0 + 2.6 * (0.95 * S + 0.312 * normal(r)), 1, 16);
    const std::string& mar = marital[pick(r, marital_p)];
    const std::string& occ = binned(0.85 * S + 0.527 * normal(r), decile_cuts, occupations);
    const std::string& rel = rels[pick(r, rel_p)];
    const std::string& race = races[pick(r, race_p)];
    long gain = r.uniform01() < 0.02 + 0.30 * sigmoid(3.0 * (S - 0.55))
                    ? std::lround(std::exp(8.3 + 0.9 * normal(r)))
                    : 0;
    long loss = r.uniform01() < 0.03 + 0.02 * sigmoid(S)
                    ? std::lround(std::exp(7.4 + 0.3 * normal(r)))
                    : 0;
    long hours = iclamp(40.5 + 11.0 * (0.65 * S + 0.760 * normal(r)), 1, 99);

    return {std::to_string(age), wc, std::to_string(edu), mar, occ, rel, race,
            P ? "Male" : "Female", std::to_string(gain), std::to_string(loss),
            std::to_string(hours), y ? ">50K" : "<=50K"};
  };
  emit_csv(path,
           {"age", "workclass", "education_num", "marital_status", "occupation", "relationship",
            "race", "sex", "capital_gain", "capital_loss", "hours_per_week", "income"},
           48842, 0.006, 1, rng, row);
}

void write_compas(const std::string& path, std::uint64_t seed) {
  // Favourable (no recidivism) ~ Bernoulli(sigmoid(k*(S + b*(2P-1) + c)))
  const double k = 2.4, b = 0.30, c = 0.0;
  SplitMix64 rng(seed);
  RowFn row = [&](SplitMix64& r) -> std::vector<std::string> {
    int P = r.uniform01() < 0.40 ? 1 : 0;  // Caucasian
    double S = normal(r);
    bool y = r.uniform01() < sigmoid(k * (S + b * (2 * P - 1) + c));
    double Sc = std::clamp(S, -2.5, 2.5);

    const char* sex = r.uniform01() < 0.81 ? "Male" : "Female";
    long age = iclamp(33.0 + 11.0 * (0.35 * S + 0.937 * normal(r)), 18, 83);
    int jf = poisson(r, std::exp(-2.2 - 0.7 * Sc));
    int jm = poisson(r, std::exp(-2.0 - 0.6 * Sc));
    int jo = poisson(r, std::exp(-2.3 - 0.5 * Sc));
    int priors = poisson(r, std::exp(0.55 - 0.7 * Sc));
    const char* degree = r.uniform01() < sigmoid(-0.4 * S) ? "F" : "M";

    return {sex,
            std::to_string(age),
            P ? "Caucasian" : "African-American",
            std::to_string(jf),
            std::to_string(jm),
            std::to_string(jo),
            std::to_string(priors),
            degree,
            y ? "0" : "1"};
  };
  emit_csv(path,
           {"sex", "age", "race", "juv_fel_count", "juv_misd_count", "juv_other_count",
            "priors_count", "c_charge_degree", "two_year_recid"},
           5278, 0.007, 7, rng, row);
}

void write_german(const std::string& path, std::uint64_t seed) {
  // Favourable (Good) ~ Bernoulli(sigmoid(k*(S + b*(2P-1) + c))), P = age>25
  const double k = 2.6, b = 0.35, c = 0.35;
  const std::vector<std::string> status_names = {"overdrawn", "under_200", "over_200",
                                                 "no_account"};
  const std::vector<double> status_cuts = {-0.52, 0.25, 0.84};
  const std::vector<std::string> history_names = {"serious_delinquency", "past_delays",
                                                  "existing_on_time", "all_repaid",
                                                  "no_credits_taken"};
  const std::vector<double> quintile_cuts = {-0.8416, -0.2533, 0.2533, 0.8416};
  const std::vector<std::string> purposes = {"car_new",   "car_used", "furniture", "radio_tv",
                                             "appliances","repairs",  "education", "business"};
  const std::vector<double> purpose_p = {0.23, 0.10, 0.18, 0.28, 0.05, 0.02, 0.06, 0.08};
  const std::vector<std::string> savings_names = {"under_100", "100_to_500", "500_to_1000",
                                                  "over_1000", "unknown_none"};
  const std::vector<double> savings_cuts = {0.1257, 0.4399, 0.6745, 1.0364};
  const std::vector<std::string> employ_names = {"unemployed", "under_1yr", "1_to_4yrs",
                                                 "4_to_7yrs", "over_7yrs"};
  const std::vector<double> employ_cuts = {-0.954, -0.332, 0.553, 1.175};
  const std::vector<std::string> prop_names = {"none", "car_or_other", "savings_insurance",
                                               "real_estate"};
  const std::vector<double> prop_cuts = {-0.583, 0.025, 0.994};
  const std::vector<std::string> job_names = {"unskilled_nonresident", "unskilled_resident",
                                              "skilled", "management"};
  const std::vector<double> job_cuts = {-2.054, -0.772, 1.036};

  SplitMix64 rng(seed);
  RowFn row = [&](SplitMix64& r) -> std::vector<std::string> {
    int P = r.uniform01() < 0.75 ? 1 : 0;
    double S = normal(r);
    bool y = r.uniform01() < sigmoid(k * (S + b * (2 * P - 1) + c));

    long age = P ? 26 + static_cast<long>(r.uniform01() * 45.0)
                 : 19 + static_cast<long>(r.uniform01() * 7.0);
    const std::string& status = binned(0.65 * S + 0.76 * normal(r), status_cuts, status_names);
    long duration = iclamp(20.9 + 12.0 * (-0.50 * S + 0.866 * normal(r)), 4, 72);
    const std::string& hist = binned(0.55 * S + 0.835 * normal(r), quintile_cuts, history_names);
    const std::string& purpose = purposes[pick(r, purpose_p)];
    long amount = std::lround(std::exp(7.9 + 0.6 * (-0.35 * S + 0.937 * normal(r))));
    const std::string& sav = binned(0.50 * S + 0.866 * normal(r), savings_cuts, savings_names);
    const std::string& emp = binned(0.35 * S + 0.937 * normal(r), employ_cuts, employ_names);
    long rate = 1 + pick(r, {0.14, 0.23, 0.16, 0.47});
    const std::string pstat =
        std::vector<std::string>{"single", "married", "divorced", "widowed"}[pick(
            r, {0.55, 0.31, 0.09, 0.05})];
    const std::string debtors = std::vector<std::string>{"none", "co_applicant", "guarantor"}[pick(
        r, {0.91, 0.04, 0.05})];
    long residence = 1 + pick(r, {0.13, 0.31, 0.15, 0.41});
    const std::string& prop = binned(0.40 * S + 0.917 * normal(r), prop_cuts, prop_names);
    const std::string plans = std::vector<std::string>{"none", "bank", "stores"}[pick(
        r, {0.81, 0.14, 0.05})];
    const std::string housing = std::vector<std::string>{"own", "rent", "free"}[pick(
        r, {0.71, 0.18, 0.11})];
    long credits = 1 + pick(r, {0.63, 0.33, 0.03, 0.01});
    const std::string& job = binned(0.30 * S + 0.954 * normal(r), job_cuts, job_names);
    long dependents = 1 + (r.uniform01() < 0.155 ? 1 : 0);
    const char* phone = r.uniform01() < 0.596 ? "none" : "yes";
    const char* foreign = r.uniform01() < 0.963 ? "yes" : "no";

    return {status,        std::to_string(duration), hist,
            purpose,       std::to_string(amount),   sav,
            emp,           std::to_string(rate),     pstat,
            debtors,       std::to_string(residence),prop,
            std::to_string(age), plans,              housing,
            std::to_string(credits), job,            std::to_string(dependents),
            phone,         foreign,                  y ? "Good" : "Bad"};
  };
  emit_csv(path,
           {"status", "duration", "credit_history", "purpose", "credit_amount", "savings",
            "employment", "installment_rate", "personal_status", "other_debtors",
            "residence_since", "property", "age", "other_installment", "housing",
            "existing_credits", "job", "num_dependents", "telephone", "foreign_worker", "risk"},
           1000, 0.012, 5, rng, row);
}

}  // namespace

void write_dataset_csv(const std::string& name, const std::string& path, std::uint64_t seed) {
  if (name == "adult")
    write_adult(path, seed);
  else if (name == "compas")
    write_compas(path, seed);
  else if (name == "german")
    write_german(path, seed);
  else
    throw std::invalid_argument("unknown dataset '" + name + "'");
}

void write_all(const std::string& dir, std::uint64_t seed) {
  for (const char* name : {"adult", "compas", "german"})
    write_dataset_csv(name, dir + "/" + name + ".csv",
                      derive_seed(seed, (std::string("synth-") + name).c_str()));
}

}  // namespace fairvic::synth
