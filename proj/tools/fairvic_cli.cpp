#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fairvic/experiments.hpp"
#include "fairvic/rng.hpp"
#include "fairvic/synth.hpp"

namespace {

using fairvic::ExperimentSpec;
using fairvic::LambdaWeights;
using fairvic::ModelKind;

struct CommonOpts {
  std::string dataset = "german";
  std::string data_dir = ".";
  std::string model = "fairvic";
  std::vector<double> lambdas;  // empty -> per-dataset default
  double gamma = 1.0;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  double test_fraction = 0.2;
  int epochs = 0;             // 0 -> dataset recipe
  int batch_size = 0;         // ditto
  double learning_rate = 0;   // ditto
  std::string out;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool with_model = true) {
  cmd->add_option("--dataset", o.dataset, "adult, compas or german")
      ->check(CLI::IsMember({"adult", "compas", "german"}));
  cmd->add_option("--data-dir", o.data_dir, "directory holding <dataset>.csv")
      ->envname("FAIRVIC_DATA_DIR");
  if (with_model)
    cmd->add_option("--model", o.model, "baseline or fairvic")
        ->check(CLI::IsMember({"baseline", "fairvic"}));
  cmd->add_option("--lambdas", o.lambdas, "acc,var,inv,cov (default: per-dataset)")
      ->delimiter(',')
      ->expected(4);
  cmd->add_option("--gamma", o.gamma, "variance hinge margin");
  cmd->add_option("--seeds", o.seeds, "comma-separated seed list")->delimiter(',');
  cmd->add_option("--test-fraction", o.test_fraction, "held-out fraction");
  cmd->add_option("--epochs", o.epochs, "training epochs (default: dataset recipe)");
  cmd->add_option("--batch-size", o.batch_size, "minibatch size (default: dataset recipe)");
  cmd->add_option("--learning-rate", o.learning_rate, "Adam step size (default: dataset recipe)");
}

ExperimentSpec build_spec(const CommonOpts& o) {
  ExperimentSpec spec = fairvic::default_spec(o.dataset);
  spec.data_dir = o.data_dir;
  spec.model = o.model == "baseline" ? ModelKind::BaselineBce : ModelKind::FairVIC;
  if (!o.lambdas.empty())
    spec.lambdas = LambdaWeights(o.lambdas[0], o.lambdas[1], o.lambdas[2], o.lambdas[3]);
  spec.variance_cfg.gamma = o.gamma;
  spec.seeds = o.seeds;
  spec.test_fraction = o.test_fraction;
  if (o.epochs > 0) spec.epochs = o.epochs;
  if (o.batch_size > 0) spec.batch_size = o.batch_size;
  if (o.learning_rate > 0) spec.learning_rate = o.learning_rate;
  spec.out_dir = o.out;
  spec.validate();
  return spec;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw fairvic::LoadError("cannot write '" + path + "'");
  f << content;
}

int run_cmd(const CommonOpts& o, bool counterfactual) {
  ExperimentSpec spec = build_spec(o);
  spec.with_counterfactual = counterfactual;
  fairvic::AggregateReport agg = fairvic::run_experiment(spec);
  std::cout << fairvic::aggregate_markdown(spec.dataset + " / " + o.model, agg);
  if (agg.mean_ad && agg.mean_ad->mean)
    std::cout << "mean counterfactual AD: " << fairvic::format_double(*agg.mean_ad->mean) << "\n";
  if (o.out.empty()) std::cout << fairvic::aggregate_to_json(spec, agg);
  return 0;
}

int ablate_cmd(const CommonOpts& o, const std::vector<double>& grid, bool equal) {
  ExperimentSpec spec = build_spec(o);
  std::vector<fairvic::AblationRow> rows =
      equal ? fairvic::ablation_equal(spec, grid) : fairvic::ablation_individual(spec);
  std::cout << fairvic::ablation_markdown(rows);
  if (!o.out.empty()) {
    std::filesystem::create_directories(o.out);
    const std::string stem = o.out + (equal ? "/ablation_equal" : "/ablation_individual");
    write_file(stem + ".csv", fairvic::ablation_csv(rows));
    write_file(stem + ".json", fairvic::ablation_to_json(spec, rows));
    write_file(stem + ".md", fairvic::ablation_markdown(rows));
  }
  return 0;
}

int importance_cmd(const CommonOpts& o, std::uint64_t seed, int repeats) {
  ExperimentSpec spec = build_spec(o);
  fairvic::Dataset data = fairvic::load_experiment_dataset(spec);
  fairvic::SeedRun run = fairvic::run_seed(spec, data, seed);
  fairvic::Vector imp =
      fairvic::permutation_importance(run.model, run.test, repeats, fairvic::derive_seed(seed, "importance"));
  std::string csv = "feature,importance\n";
  for (Eigen::Index j = 0; j < imp.size(); ++j)
    csv += data.feature_names[static_cast<size_t>(j)] + "," + fairvic::format_double(imp(j)) + "\n";
  std::cout << csv;
  if (!o.out.empty()) write_file(o.out, csv);
  return 0;
}

int embeddings_cmd(const CommonOpts& o, std::uint64_t seed) {
  if (o.out.empty()) throw std::invalid_argument("embeddings: --out file is required");
  ExperimentSpec spec = build_spec(o);
  fairvic::Dataset data = fairvic::load_experiment_dataset(spec);
  fairvic::SeedRun run = fairvic::run_seed(spec, data, seed);
  fairvic::export_embeddings(run.model, run.test, o.out);
  std::cout << "wrote " << o.out << "\n";
  return 0;
}

int audit_cmd(const std::string& predictions, const std::string& out) {
  fairvic::MetricReport report = fairvic::audit_csv(predictions);
  std::string json = report.to_json() + "\n";
  std::cout << json;
  if (!out.empty()) write_file(out, json);
  return 0;
}

void print_error_record(const std::string& kind, const std::string& message) {
  nlohmann::ordered_json j;
  j["error"] = kind;
  j["message"] = message;
  std::cerr << j.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FairVIC training and fairness evaluation"};
  app.require_subcommand(1);

  CommonOpts run_o, eq_o, ind_o, imp_o, emb_o;
  bool counterfactual = false;
  std::vector<double> grid = {0.1, 0.2, 0.3, 0.4, 0.5};
  std::uint64_t imp_seed = 1, emb_seed = 1;
  int repeats = 10;
  std::string audit_file, audit_out;

  CLI::App* run = app.add_subcommand("run", "train and evaluate over seeds");
  add_common(run, run_o);
  run->add_option("--out", run_o.out, "output directory");
  run->add_flag("--counterfactual", counterfactual, "also evaluate protected-flip predictions");

  CLI::App* eq = app.add_subcommand("ablate-equal", "equal-weight lambda_acc grid");
  add_common(eq, eq_o, false);
  eq->add_option("--grid", grid, "lambda_acc grid")->delimiter(',');
  eq->add_option("--out", eq_o.out, "output directory");

  CLI::App* ind = app.add_subcommand("ablate-individual", "single- and two-term masks");
  add_common(ind, ind_o, false);
  ind->add_option("--out", ind_o.out, "output directory");

  CLI::App* imp = app.add_subcommand("importance", "permutation feature importance");
  add_common(imp, imp_o);
  imp->add_option("--seed", imp_seed, "training seed");
  imp->add_option("--repeats", repeats, "shuffles per feature");
  imp->add_option("--out", imp_o.out, "output CSV file");

  CLI::App* emb = app.add_subcommand("embeddings", "export bottleneck coordinates");
  add_common(emb, emb_o);
  emb->add_option("--seed", emb_seed, "training seed");
  emb->add_option("--out", emb_o.out, "output CSV file")->required();

  CLI::App* audit = app.add_subcommand("audit", "metrics on an external predictions CSV");
  audit->add_option("--predictions", audit_file, "CSV with pred_prob,true_label,group")
      ->required();
  audit->add_option("--out", audit_out, "output JSON file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error_record("usage", e.what());
    return 2;
  }

  try {
    if (*run) return run_cmd(run_o, counterfactual);
    if (*eq) return ablate_cmd(eq_o, grid, true);
    if (*ind) return ablate_cmd(ind_o, grid, false);
    if (*imp) return importance_cmd(imp_o, imp_seed, repeats);
    if (*emb) return embeddings_cmd(emb_o, emb_seed);
    if (*audit) return audit_cmd(audit_file, audit_out);
  } catch (const fairvic::LoadError& e) {
    print_error_record("load", e.what());
    return 1;
  } catch (const fairvic::UndefinedMetricError& e) {
    print_error_record("undefined-metric", e.what());
    return 1;
  } catch (const fairvic::ShapeError& e) {
    print_error_record("shape", e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error_record("invalid", e.what());
    return 1;
  }
  return 0;
}
