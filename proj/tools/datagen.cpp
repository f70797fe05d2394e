#include <iostream>
#include <filesystem>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "fairvic/synth.hpp"
#include "fairvic/rng.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Deterministic tabular dataset generator (adult, compas, german)"};
  std::string dir = ".";
  std::string dataset = "all";
  std::uint64_t seed = fairvic::synth::kDefaultDataSeed;
  app.add_option("--dir", dir, "output directory")->envname("FAIRVIC_DATA_DIR");
  app.add_option("--dataset", dataset, "adult, compas, german or all")
      ->check(CLI::IsMember({"adult", "compas", "german", "all"}));
  app.add_option("--seed", seed, "generator seed");

  try {
    app.parse(argc, argv);
    std::filesystem::create_directories(dir);
    if (dataset == "all") {
      fairvic::synth::write_all(dir, seed);
      std::cout << "wrote " << dir << "/{adult,compas,german}.csv\n";
    } else {
      const std::string path = dir + "/" + dataset + ".csv";
      fairvic::synth::write_dataset_csv(dataset, path,
                                        fairvic::derive_seed(seed, ("synth-" + dataset).c_str()));
      std::cout << "wrote " << path << "\n";
    }
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    nlohmann::ordered_json j;
    j["error"] = "datagen";
    j["message"] = e.what();
    std::cerr << j.dump() << "\n";
    return 1;
  }
  return 0;
}
