#pragma once

#include <cstdint>
#include <string>

namespace fairvic::synth {

inline constexpr std::uint64_t kDefaultDataSeed = 90210;

// Writes a schema-compatible CSV for "adult", "compas" or "german" at `path`.
// Deterministic in `seed`; row counts match the loaders' expectations exactly
// after missing-value rows are dropped.
void write_dataset_csv(const std::string& name, const std::string& path, std::uint64_t seed);

// All three files (<dir>/adult.csv etc.), each from its own derived stream.
void write_all(const std::string& dir, std::uint64_t seed = kDefaultDataSeed);

}  // namespace fairvic::synth
