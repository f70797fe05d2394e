#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fairvic/experiments.hpp"
#include "fairvic/rng.hpp"
#include "fairvic/synth.hpp"

using namespace fairvic;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// One shared german file; generating it per test would just repeat work.
const std::string& german_dir() {
  static const std::string dir = [] {
    auto d = std::filesystem::temp_directory_path() / "fairvic_exp_data";
    std::filesystem::create_directories(d);
    synth::write_dataset_csv("german", (d / "german.csv").string(), 99);
    return d.string();
  }();
  return dir;
}

ExperimentSpec small_spec() {
  ExperimentSpec spec;
  spec.dataset = "german";
  spec.data_dir = german_dir();
  spec.model = ModelKind::FairVIC;
  spec.lambdas = default_lambdas("german");
  spec.hidden_widths = {8, 2, 8};
  spec.epochs = 5;
  spec.batch_size = 128;
  spec.seeds = {1, 2, 3};
  spec.with_counterfactual = false;
  return spec;
}

}  // namespace

TEST_CASE("default_lambdas per dataset") {
  const LambdaWeights a = default_lambdas("adult");
  CHECK(a.acc == 0.2);
  CHECK(a.cov == 0.6);
  const LambdaWeights g = default_lambdas("german");
  CHECK(g.acc == 0.1);
  CHECK(g.cov == 0.7);
  const LambdaWeights c = default_lambdas("compas");
  CHECK(c.inv == 0.1);
  CHECK_THROWS_AS(default_lambdas("boston"), std::invalid_argument);
}

TEST_CASE("ExperimentSpec validation") {
  ExperimentSpec spec = small_spec();
  CHECK_NOTHROW(spec.validate());

  ExperimentSpec s = spec;
  s.seeds.clear();
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = spec;
  s.seeds = {1, 2, 1};
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = spec;
  s.test_fraction = 1.0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = spec;
  s.hidden_widths.clear();
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = spec;
  s.model = ModelKind::FairVIC;
  s.lambdas.acc = 0.0;  // field poke past the checking constructor: sum now < 1
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);

  ExperimentSpec base = spec;
  base.model = ModelKind::BaselineBce;
  base.lambdas.acc = 0.0;  // ignored for the baseline
  CHECK_NOTHROW(base.validate());
  CHECK(base.effective_lambdas().acc == 1.0);
}

TEST_CASE("default_spec carries the per-dataset recipe") {
  const ExperimentSpec adult = default_spec("adult");
  CHECK(adult.lambdas.cov == doctest::Approx(0.6));
  CHECK(adult.batch_size == 16);
  CHECK(adult.epochs == 40);
  CHECK(adult.learning_rate == doctest::Approx(3e-3));
  CHECK_NOTHROW(adult.validate());

  const ExperimentSpec german = default_spec("german");
  CHECK(german.lambdas.cov == doctest::Approx(0.7));
  CHECK(german.batch_size == 256);
  CHECK(german.epochs == 200);

  CHECK_THROWS_AS(default_spec("folktables"), std::invalid_argument);
}

TEST_CASE("run_seed is deterministic and differs across seeds") {
  const ExperimentSpec spec = small_spec();
  const Dataset full = load_experiment_dataset(spec);

  const SeedRun a = run_seed(spec, full, 1);
  const SeedRun b = run_seed(spec, full, 1);
  REQUIRE(a.model.layers.size() == b.model.layers.size());
  for (std::size_t k = 0; k < a.model.layers.size(); ++k) {
    CHECK(a.model.layers[k].weights == b.model.layers[k].weights);
    CHECK(a.model.layers[k].bias == b.model.layers[k].bias);
  }
  CHECK(a.report.csv_row() == b.report.csv_row());
  CHECK(a.test.features == b.test.features);

  const SeedRun c = run_seed(spec, full, 2);
  CHECK(a.model.layers[0].weights != c.model.layers[0].weights);
  CHECK(a.test.features != c.test.features);  // split stream keyed on the seed
}

TEST_CASE("aggregate_runs: means, population std, undefined exclusion") {
  auto mk = [](std::uint64_t seed, double acc, std::optional<double> di) {
    SeedRun r;
    r.seed = seed;
    r.report.accuracy = acc;
    r.report.f1 = acc - 0.1;
    r.report.equalized_odds = 0.2;
    r.report.absolute_odds = 0.1;
    r.report.statistical_parity = -0.05;
    if (di)
      r.report.disparate_impact = di;
    else
      r.report.undefined["disparate_impact"] = "privileged positive rate is zero";
    return r;
  };
  std::vector<SeedRun> runs = {mk(1, 0.7, 0.8), mk(2, 0.8, 0.9), mk(3, 0.9, std::nullopt)};
  const AggregateReport agg = aggregate_runs(runs);

  CHECK(agg.seeds == std::vector<std::uint64_t>{1, 2, 3});
  const auto& acc = agg.metrics.at("accuracy");
  REQUIRE(acc.mean);
  CHECK(*acc.mean == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(*acc.stddev == doctest::Approx(std::sqrt(0.02 / 3.0)).epsilon(1e-9));
  CHECK(acc.defined_count == 3);

  const auto& di = agg.metrics.at("disparate_impact");
  REQUIRE(di.mean);
  CHECK(*di.mean == doctest::Approx(0.85).epsilon(1e-12));
  CHECK(di.defined_count == 2);
  CHECK(di.undefined_count == 1);

  const AggregateReport one = aggregate_runs({mk(5, 0.75, 0.8)});
  CHECK(*one.metrics.at("accuracy").stddev == 0.0);
}

TEST_CASE("run_experiment writes byte-identical outputs on rerun") {
  const auto out1 = std::filesystem::temp_directory_path() / "fairvic_exp_out1";
  const auto out2 = std::filesystem::temp_directory_path() / "fairvic_exp_out2";
  std::filesystem::remove_all(out1);
  std::filesystem::remove_all(out2);

  ExperimentSpec spec = small_spec();
  spec.seeds = {1, 2};
  spec.with_counterfactual = true;
  spec.out_dir = out1.string();
  const AggregateReport agg = run_experiment(spec);

  for (const auto& name : MetricReport::metric_names()) CHECK(agg.metrics.count(name) == 1);
  REQUIRE(agg.per_seed.size() == 2);
  REQUIRE(agg.per_seed_ad.size() == 2);
  CHECK(agg.mean_ad.has_value());

  spec.out_dir = out2.string();
  run_experiment(spec);
  for (const char* f : {"per_seed.csv", "aggregate.json", "summary.md"})
    CHECK(slurp((out1 / f).string()) == slurp((out2 / f).string()));

  const std::string csv = slurp((out1 / "per_seed.csv").string());
  CHECK(csv.rfind("seed,accuracy,f1,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);  // header + 2 seeds

  const std::string md = slurp((out1 / "summary.md").string());
  CHECK(md.find("german / fairvic") != std::string::npos);

  std::filesystem::remove_all(out1);
  std::filesystem::remove_all(out2);
}

TEST_CASE("ablation_equal spreads the remainder over the three fairness terms") {
  ExperimentSpec spec = small_spec();
  spec.seeds = {1};
  spec.epochs = 2;
  const auto rows = ablation_equal(spec, {0.1, 0.4});
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].label == "lambda_acc=0.1");
  CHECK(rows[0].lambdas.acc == 0.1);
  CHECK(rows[0].lambdas.var == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(rows[1].lambdas.cov == doctest::Approx(0.2).epsilon(1e-12));
  for (const auto& r : rows) {
    CHECK(r.agg.per_seed.size() == 1);
    const double sum =
        r.lambdas.acc + r.lambdas.var + r.lambdas.inv + r.lambdas.cov;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
  CHECK_THROWS_AS(ablation_equal(spec, {}), std::invalid_argument);
  CHECK_THROWS_AS(ablation_equal(spec, {1.0}), std::invalid_argument);
}

TEST_CASE("ablation_individual enumerates singles then pairs at lambda_acc 0.1") {
  ExperimentSpec spec = small_spec();
  spec.seeds = {1};
  spec.epochs = 2;
  const auto rows = ablation_individual(spec);
  REQUIRE(rows.size() == 6);
  CHECK(rows[0].label == "var");
  CHECK(rows[0].lambdas.var == 0.9);
  CHECK(rows[0].lambdas.cov == 0.0);
  CHECK(rows[1].lambdas.inv == 0.9);
  CHECK(rows[2].lambdas.cov == 0.9);
  CHECK(rows[3].label == "var+inv");
  CHECK(rows[3].lambdas.var == 0.45);
  CHECK(rows[3].lambdas.inv == 0.45);
  CHECK(rows[5].lambdas.inv == 0.45);
  CHECK(rows[5].lambdas.cov == 0.45);
  for (const auto& r : rows) CHECK(r.lambdas.acc == 0.1);
}

TEST_CASE("permutation_importance: inert features score zero, used ones positive") {
  // y depends on feature 0 alone; feature 1 is dead weight.
  Network net;
  DenseLayer l;
  l.weights.resize(2, 1);
  l.weights << 4.0, 0.0;
  l.bias = Vector::Zero(1);
  l.activation = Activation::Sigmoid;
  net.layers.push_back(l);

  Dataset test;
  const int n = 40;
  test.features.resize(n, 2);
  test.labels.resize(n);
  test.protected_attr.resize(n);
  SplitMix64 rng(4);
  for (int i = 0; i < n; ++i) {
    test.features(i, 0) = rng.uniform(-1, 1);
    test.features(i, 1) = rng.uniform(-1, 1);
    test.labels(i) = test.features(i, 0) > 0 ? 1 : 0;
    test.protected_attr(i) = i % 2;
  }
  test.protected_col = 1;
  test.feature_names = {"signal", "noise"};

  const Vector imp = permutation_importance(net, test, 3, 11);
  REQUIRE(imp.size() == 2);
  CHECK(imp(0) > 0.2);
  CHECK(imp(1) == 0.0);

  CHECK(permutation_importance(net, test, 3, 11) == imp);  // seeded
  CHECK_THROWS_AS(permutation_importance(net, test, 0, 11), std::invalid_argument);
}

TEST_CASE("export_embeddings writes one row per sample plus a header") {
  const ExperimentSpec spec = small_spec();
  const Dataset full = load_experiment_dataset(spec);
  ExperimentSpec tiny = spec;
  tiny.epochs = 2;
  const SeedRun run = run_seed(tiny, full, 1);

  const auto path = std::filesystem::temp_directory_path() / "fairvic_emb.csv";
  export_embeddings(run.model, run.test, path.string());
  const std::string body = slurp(path.string());
  CHECK(body.rfind("x0,x1,label,group\n", 0) == 0);
  CHECK(std::count(body.begin(), body.end(), '\n') ==
        static_cast<long>(run.test.rows()) + 1);

  export_embeddings(run.model, run.test, path.string());
  CHECK(slurp(path.string()) == body);
  std::filesystem::remove(path);

  Network flat;
  DenseLayer l;
  l.weights = Matrix::Zero(1, 2);
  l.bias = Vector::Zero(1);
  l.activation = Activation::Sigmoid;
  flat.layers.push_back(l);
  CHECK_THROWS_AS(export_embeddings(flat, run.test, path.string()), std::invalid_argument);
}

TEST_CASE("audit_csv reproduces evaluate_bundle on the same predictions") {
  const int n = 12;
  Vector p(n);
  IntVector y(n), g(n);
  SplitMix64 rng(8);
  for (int i = 0; i < n; ++i) {
    p(i) = rng.uniform01();
    y(i) = rng.uniform01() < 0.5 ? 1 : 0;
    g(i) = i % 2;
  }
  std::ostringstream csv;
  csv << "pred_prob,true_label,group\n";
  for (int i = 0; i < n; ++i)
    csv << format_double(p(i)) << "," << y(i) << "," << g(i) << "\n";
  const auto path = std::filesystem::temp_directory_path() / "fairvic_audit.csv";
  {
    std::ofstream out(path);
    out << csv.str();
  }

  const MetricReport audited = audit_csv(path.string());
  const MetricReport direct = evaluate_bundle(make_bundle(p, y, g));
  CHECK(audited.csv_row() == direct.csv_row());
  std::filesystem::remove(path);
}

TEST_CASE("audit_csv error paths") {
  CHECK_THROWS_AS(audit_csv("/nonexistent/audit.csv"), LoadError);

  const auto dir = std::filesystem::temp_directory_path();
  const auto bad_header = dir / "fairvic_audit_hdr.csv";
  {
    std::ofstream out(bad_header);
    out << "prob,true_label,group\n0.5,1,0\n";
  }
  CHECK_THROWS_AS(audit_csv(bad_header.string()), LoadError);

  const auto ragged = dir / "fairvic_audit_ragged.csv";
  {
    std::ofstream out(ragged);
    out << "pred_prob,true_label,group\n0.5,1\n";
  }
  CHECK_THROWS_AS(audit_csv(ragged.string()), LoadError);

  const auto unparseable = dir / "fairvic_audit_nan.csv";
  {
    std::ofstream out(unparseable);
    out << "pred_prob,true_label,group\nmaybe,1,0\n";
  }
  CHECK_THROWS_AS(audit_csv(unparseable.string()), LoadError);

  const auto empty = dir / "fairvic_audit_empty.csv";
  {
    std::ofstream out(empty);
    out << "pred_prob,true_label,group\n";
  }
  CHECK_THROWS_AS(audit_csv(empty.string()), LoadError);

  for (const auto& p2 : {bad_header, ragged, unparseable, empty})
    std::filesystem::remove(p2);
}
