#include "fairvic/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "fairvic/rng.hpp"

namespace fairvic {

namespace {

using nlohmann::ordered_json;

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot write '" + path + "'");
  out << content;
  if (!out) throw LoadError("write failure on '" + path + "'");
}

std::string mean_std_cell(const MetricAggregate& m) {
  if (!m.mean) return "undefined";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f ± %.4f", *m.mean, m.stddev ? *m.stddev : 0.0);
  std::string cell = buf;
  if (m.undefined_count > 0)
    cell += " (" + std::to_string(m.defined_count) + "/" +
            std::to_string(m.defined_count + m.undefined_count) + ")";
  return cell;
}

MetricAggregate aggregate_values(const std::vector<double>& values, int total) {
  MetricAggregate agg;
  agg.defined_count = static_cast<int>(values.size());
  agg.undefined_count = total - agg.defined_count;
  if (values.empty()) return agg;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size());
  agg.mean = mean;
  agg.stddev = std::sqrt(var);
  return agg;
}

ordered_json report_json(const MetricReport& r) {
  return ordered_json::parse(r.to_json());
}

ordered_json aggregate_json_fragment(const AggregateReport& agg) {
  ordered_json metrics;
  for (const auto& name : MetricReport::metric_names()) {
    const auto& m = agg.metrics.at(name);
    ordered_json entry;
    entry["mean"] = m.mean ? ordered_json(*m.mean) : ordered_json(nullptr);
    entry["std"] = m.stddev ? ordered_json(*m.stddev) : ordered_json(nullptr);
    entry["defined"] = m.defined_count;
    entry["undefined"] = m.undefined_count;
    metrics[name] = entry;
  }
  return metrics;
}

std::string model_name(ModelKind kind) {
  return kind == ModelKind::BaselineBce ? "baseline" : "fairvic";
}

ordered_json lambdas_json(const LambdaWeights& l) {
  return ordered_json{{"acc", l.acc}, {"var", l.var}, {"inv", l.inv}, {"cov", l.cov}};
}

}  // namespace

LambdaWeights default_lambdas(const std::string& dataset) {
  if (dataset == "adult") return LambdaWeights(0.2, 0.1, 0.1, 0.6);
  if (dataset == "compas" || dataset == "german") return LambdaWeights(0.1, 0.1, 0.1, 0.7);
  throw std::invalid_argument("no default lambdas for dataset '" + dataset + "'");
}

ExperimentSpec default_spec(const std::string& dataset) {
  ExperimentSpec spec;
  spec.dataset = dataset;
  spec.lambdas = default_lambdas(dataset);
  if (dataset == "adult") {
    spec.epochs = 40;
    spec.batch_size = 16;
    spec.learning_rate = 3e-3;
  }
  return spec;
}

LambdaWeights ExperimentSpec::effective_lambdas() const {
  return model == ModelKind::BaselineBce ? LambdaWeights(1.0, 0.0, 0.0, 0.0) : lambdas;
}

void ExperimentSpec::validate() const {
  if (seeds.empty()) throw std::invalid_argument("experiment spec: no seeds");
  std::set<std::uint64_t> unique(seeds.begin(), seeds.end());
  if (unique.size() != seeds.size())
    throw std::invalid_argument("experiment spec: duplicate seeds");
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw std::invalid_argument("experiment spec: test_fraction must be in (0, 1)");
  if (hidden_widths.empty())
    throw std::invalid_argument("experiment spec: no hidden layers");
  const LambdaWeights lw = effective_lambdas();
  LambdaWeights(lw.acc, lw.var, lw.inv, lw.cov);  // re-check the simplex invariant
}

Dataset load_experiment_dataset(const ExperimentSpec& spec) {
  return load_csv(spec.data_dir + "/" + spec.dataset + ".csv", builtin_schema(spec.dataset));
}

SeedRun run_seed(const ExperimentSpec& spec, const Dataset& full_data, std::uint64_t seed) {
  auto [train_raw, test_raw] =
      train_test_split(full_data, spec.test_fraction, derive_seed(seed, "split"));
  auto [train_std, others] = standardize(train_raw, {test_raw});

  std::vector<int> widths;
  widths.reserve(spec.hidden_widths.size() + 2);
  widths.push_back(static_cast<int>(full_data.cols()));
  widths.insert(widths.end(), spec.hidden_widths.begin(), spec.hidden_widths.end());
  widths.push_back(1);

  Network net = init_network(widths, derive_seed(seed, "init"));
  net.dropout_rate = spec.dropout_rate;
  net.l1_coeff = spec.l1_coeff;
  net.l2_coeff = spec.l2_coeff;

  TrainConfig cfg;
  cfg.epochs = spec.epochs;
  cfg.batch_size = spec.batch_size;
  cfg.learning_rate = spec.learning_rate;
  cfg.lambdas = spec.effective_lambdas();
  cfg.variance_cfg = spec.variance_cfg;
  cfg.seed = derive_seed(seed, "train");

  auto [trained, history] = train(net, train_std, cfg);

  SeedRun run;
  run.seed = seed;
  run.model = std::move(trained);
  run.test = std::move(others[0]);
  run.history = std::move(history);
  run.report = evaluate_model(run.model, run.test);
  if (spec.with_counterfactual) run.cf = counterfactual_report(run.model, run.test);
  return run;
}

AggregateReport aggregate_runs(const std::vector<SeedRun>& runs) {
  AggregateReport agg;
  const int total = static_cast<int>(runs.size());
  for (const auto& run : runs) {
    agg.seeds.push_back(run.seed);
    agg.per_seed.push_back(run.report);
  }
  for (const auto& name : MetricReport::metric_names()) {
    std::vector<double> values;
    for (const auto& run : runs) {
      auto v = run.report.value(name);
      if (v) values.push_back(*v);
    }
    agg.metrics[name] = aggregate_values(values, total);
  }

  const bool any_cf = std::any_of(runs.begin(), runs.end(),
                                  [](const SeedRun& r) { return r.cf.has_value(); });
  if (any_cf) {
    std::vector<double> mean_ads;
    for (const auto& run : runs) {
      if (!run.cf) throw std::logic_error("aggregate_runs: counterfactual results incomplete");
      agg.per_seed_cf.push_back(run.cf->cf);
      agg.per_seed_ad.push_back(run.cf->abs_diff);
      try {
        double ad = mean_abs_difference(run.cf->abs_diff);
        agg.per_seed_mean_ad.push_back(ad);
        mean_ads.push_back(ad);
      } catch (const UndefinedMetricError&) {
        agg.per_seed_mean_ad.push_back(std::nullopt);
      }
    }
    agg.mean_ad = aggregate_values(mean_ads, total);
  }
  return agg;
}

AggregateReport run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  Dataset data = load_experiment_dataset(spec);
  std::vector<SeedRun> runs;
  runs.reserve(spec.seeds.size());
  for (std::uint64_t seed : spec.seeds) runs.push_back(run_seed(spec, data, seed));
  AggregateReport agg = aggregate_runs(runs);

  if (!spec.out_dir.empty()) {
    std::filesystem::create_directories(spec.out_dir);
    write_text_file(spec.out_dir + "/per_seed.csv", per_seed_csv(agg));
    write_text_file(spec.out_dir + "/aggregate.json", aggregate_to_json(spec, agg));
    write_text_file(spec.out_dir + "/summary.md",
                    aggregate_markdown(spec.dataset + " / " + model_name(spec.model), agg));
  }
  return agg;
}

std::vector<AblationRow> ablation_equal(const ExperimentSpec& base,
                                        const std::vector<double>& acc_grid) {
  if (acc_grid.empty()) throw std::invalid_argument("ablation_equal: empty grid");
  Dataset data = load_experiment_dataset(base);
  std::vector<AblationRow> rows;
  for (double acc : acc_grid) {
    if (!(acc > 0.0 && acc < 1.0))
      throw std::invalid_argument("ablation_equal: lambda_acc must be in (0, 1)");
    double rest = (1.0 - acc) / 3.0;
    ExperimentSpec spec = base;
    spec.model = ModelKind::FairVIC;
    spec.lambdas = LambdaWeights(acc, rest, rest, rest);
    spec.validate();
    std::vector<SeedRun> runs;
    for (std::uint64_t seed : spec.seeds) runs.push_back(run_seed(spec, data, seed));
    char label[32];
    std::snprintf(label, sizeof(label), "lambda_acc=%.1f", acc);
    rows.push_back({label, spec.lambdas, aggregate_runs(runs)});
  }
  return rows;
}

std::vector<AblationRow> ablation_individual(const ExperimentSpec& base) {
  struct Mask {
    const char* label;
    bool var, inv, cov;
  };
  // Table 7 row structure: every single term, then every pair.
  const Mask masks[] = {{"var", true, false, false},     {"inv", false, true, false},
                        {"cov", false, false, true},     {"var+inv", true, true, false},
                        {"var+cov", true, false, true},  {"inv+cov", false, true, true}};
  Dataset data = load_experiment_dataset(base);
  std::vector<AblationRow> rows;
  for (const auto& m : masks) {
    int active = int(m.var) + int(m.inv) + int(m.cov);
    double w = active == 1 ? 0.9 : 0.45;
    ExperimentSpec spec = base;
    spec.model = ModelKind::FairVIC;
    spec.lambdas = LambdaWeights(0.1, m.var ? w : 0.0, m.inv ? w : 0.0, m.cov ? w : 0.0);
    spec.validate();
    std::vector<SeedRun> runs;
    for (std::uint64_t seed : spec.seeds) runs.push_back(run_seed(spec, data, seed));
    rows.push_back({m.label, spec.lambdas, aggregate_runs(runs)});
  }
  return rows;
}

Vector permutation_importance(const Network& model, const Dataset& test, int repeats,
                              std::uint64_t seed) {
  if (repeats < 1) throw std::invalid_argument("permutation_importance: repeats must be positive");
  if (test.rows() < 1) throw std::invalid_argument("permutation_importance: empty test set");

  auto accuracy_of = [&](const Matrix& features) {
    ForwardResult fr = forward(model, features, ForwardMode::Eval);
    IntVector pred = threshold(fr.predictions);
    long correct = 0;
    for (Eigen::Index i = 0; i < pred.size(); ++i)
      if (pred(i) == test.labels(i)) ++correct;
    return static_cast<double>(correct) / static_cast<double>(pred.size());
  };

  const double base = accuracy_of(test.features);
  const long n = test.rows();
  Vector importance = Vector::Zero(test.cols());
  for (Eigen::Index j = 0; j < test.cols(); ++j) {
    double drop_sum = 0.0;
    for (int r = 0; r < repeats; ++r) {
      std::vector<int> order(n);
      for (long i = 0; i < n; ++i) order[i] = static_cast<int>(i);
      SplitMix64 rng(derive_seed(seed, "perm", static_cast<std::uint64_t>(j),
                                 static_cast<std::uint64_t>(r)));
      shuffle(order, rng);
      Matrix shuffled = test.features;
      for (long i = 0; i < n; ++i) shuffled(i, j) = test.features(order[i], j);
      drop_sum += base - accuracy_of(shuffled);
    }
    importance(j) = drop_sum / static_cast<double>(repeats);
  }
  return importance;
}

void export_embeddings(const Network& model, const Dataset& data, const std::string& path) {
  if (model.bottleneck_index < 0)
    throw std::invalid_argument("export_embeddings: network has no bottleneck layer");
  ForwardResult fr = forward(model, data.features, ForwardMode::Eval);
  std::ostringstream out;
  const Eigen::Index k = fr.embeddings.cols();
  for (Eigen::Index j = 0; j < k; ++j) out << "x" << j << ",";
  out << "label,group\n";
  for (Eigen::Index i = 0; i < fr.embeddings.rows(); ++i) {
    for (Eigen::Index j = 0; j < k; ++j) out << format_double(fr.embeddings(i, j)) << ",";
    out << data.labels(i) << "," << data.protected_attr(i) << "\n";
  }
  write_text_file(path, out.str());
}

MetricReport audit_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw LoadError(path + ": empty file");

  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    return cells;
  };
  auto header = split(line);
  auto col = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw LoadError(path + ": header is missing column '" + name + "'");
    return static_cast<int>(it - header.begin());
  };
  const int c_prob = col("pred_prob"), c_label = col("true_label"), c_group = col("group");

  std::vector<double> probs;
  std::vector<int> labels, groups;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != header.size())
      throw LoadError(path + ": row " + std::to_string(lineno) + " has wrong cell count");
    try {
      probs.push_back(std::stod(cells[c_prob]));
      labels.push_back(std::stoi(cells[c_label]));
      groups.push_back(std::stoi(cells[c_group]));
    } catch (const std::exception&) {
      throw LoadError(path + ": row " + std::to_string(lineno) + ": unparseable cell");
    }
  }
  if (probs.empty()) throw LoadError(path + ": no data rows");

  const long n = static_cast<long>(probs.size());
  Vector p(n);
  IntVector y(n), g(n);
  for (long i = 0; i < n; ++i) {
    p(i) = probs[i];
    y(i) = labels[i];
    g(i) = groups[i];
  }
  return evaluate_bundle(make_bundle(p, y, g));
}

std::string per_seed_csv(const AggregateReport& agg) {
  std::string out = "seed,";
  MetricReport empty;
  out += empty.csv_header();
  out += '\n';
  for (size_t i = 0; i < agg.per_seed.size(); ++i) {
    out += std::to_string(agg.seeds[i]);
    out += ',';
    out += agg.per_seed[i].csv_row();
    out += '\n';
  }
  return out;
}

std::string aggregate_to_json(const ExperimentSpec& spec, const AggregateReport& agg) {
  ordered_json j;
  j["dataset"] = spec.dataset;
  j["model"] = model_name(spec.model);
  j["lambdas"] = lambdas_json(spec.effective_lambdas());
  j["gamma"] = spec.variance_cfg.gamma;
  j["epsilon"] = spec.variance_cfg.epsilon;
  j["epochs"] = spec.epochs;
  j["batch_size"] = spec.batch_size;
  j["learning_rate"] = spec.learning_rate;
  j["test_fraction"] = spec.test_fraction;
  j["seeds"] = agg.seeds;
  j["metrics"] = aggregate_json_fragment(agg);
  if (agg.mean_ad) {
    ordered_json cf;
    cf["mean_ad_mean"] = agg.mean_ad->mean ? ordered_json(*agg.mean_ad->mean) : ordered_json(nullptr);
    cf["mean_ad_std"] =
        agg.mean_ad->stddev ? ordered_json(*agg.mean_ad->stddev) : ordered_json(nullptr);
    cf["defined"] = agg.mean_ad->defined_count;
    cf["undefined"] = agg.mean_ad->undefined_count;
    ordered_json per_seed_ads = ordered_json::array();
    for (const auto& ad : agg.per_seed_mean_ad)
      per_seed_ads.push_back(ad ? ordered_json(*ad) : ordered_json(nullptr));
    cf["per_seed_mean_ad"] = per_seed_ads;
    ordered_json cf_reports = ordered_json::array();
    for (const auto& r : agg.per_seed_cf) cf_reports.push_back(report_json(r));
    cf["per_seed_cf"] = cf_reports;
    ordered_json ad_reports = ordered_json::array();
    for (const auto& r : agg.per_seed_ad) ad_reports.push_back(report_json(r));
    cf["per_seed_abs_diff"] = ad_reports;
    j["counterfactual"] = cf;
  }
  ordered_json per_seed = ordered_json::array();
  for (size_t i = 0; i < agg.per_seed.size(); ++i) {
    ordered_json row;
    row["seed"] = agg.seeds[i];
    row["metrics"] = report_json(agg.per_seed[i]);
    per_seed.push_back(row);
  }
  j["per_seed"] = per_seed;
  return j.dump(2) + "\n";
}

std::string aggregate_markdown(const std::string& label, const AggregateReport& agg) {
  std::string out = "| run |";
  for (const auto& name : MetricReport::metric_names()) out += " " + name + " |";
  out += "\n|---|";
  for (size_t i = 0; i < MetricReport::metric_names().size(); ++i) out += "---|";
  out += "\n| " + label + " |";
  for (const auto& name : MetricReport::metric_names())
    out += " " + mean_std_cell(agg.metrics.at(name)) + " |";
  out += "\n";
  return out;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = "label,lambda_acc,lambda_var,lambda_inv,lambda_cov";
  for (const auto& name : MetricReport::metric_names())
    out += "," + name + "_mean," + name + "_std," + name + "_undefined";
  out += "\n";
  for (const auto& row : rows) {
    out += row.label;
    out += ',' + format_double(row.lambdas.acc) + ',' + format_double(row.lambdas.var) + ',' +
           format_double(row.lambdas.inv) + ',' + format_double(row.lambdas.cov);
    for (const auto& name : MetricReport::metric_names()) {
      const auto& m = row.agg.metrics.at(name);
      out += ',';
      if (m.mean) out += format_double(*m.mean);
      out += ',';
      if (m.stddev) out += format_double(*m.stddev);
      out += ',' + std::to_string(m.undefined_count);
    }
    out += '\n';
  }
  return out;
}

std::string ablation_to_json(const ExperimentSpec& spec, const std::vector<AblationRow>& rows) {
  ordered_json j;
  j["dataset"] = spec.dataset;
  j["seeds"] = spec.seeds;
  ordered_json out_rows = ordered_json::array();
  for (const auto& row : rows) {
    ordered_json r;
    r["label"] = row.label;
    r["lambdas"] = lambdas_json(row.lambdas);
    r["metrics"] = aggregate_json_fragment(row.agg);
    out_rows.push_back(r);
  }
  j["rows"] = out_rows;
  return j.dump(2) + "\n";
}

std::string ablation_markdown(const std::vector<AblationRow>& rows) {
  std::string out = "| weights |";
  for (const auto& name : MetricReport::metric_names()) out += " " + name + " |";
  out += "\n|---|";
  for (size_t i = 0; i < MetricReport::metric_names().size(); ++i) out += "---|";
  out += "\n";
  for (const auto& row : rows) {
    out += "| " + row.label + " |";
    for (const auto& name : MetricReport::metric_names())
      out += " " + mean_std_cell(row.agg.metrics.at(name)) + " |";
    out += "\n";
  }
  return out;
}

}  // namespace fairvic
