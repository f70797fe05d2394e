#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "fairvic/dataset.hpp"
#include "fairvic/loss.hpp"
#include "fairvic/network.hpp"

namespace fairvic {

struct TrainConfig {
  int epochs = 200;
  int batch_size = 256;
  double learning_rate = 5e-2;
  std::uint64_t seed = 0;
  LambdaWeights lambdas;
  VarianceConfig variance_cfg;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  void validate() const;
};

// First/second moment accumulators, shape-congruent with the Network.
struct AdamState {
  std::vector<Matrix> m_weights, v_weights;
  std::vector<Vector> m_biases, v_biases;
  long timestep = 0;

  static AdamState zeros_like(const Network& net);
};

struct TrainHistory {
  std::vector<LossBreakdown> epochs;  // per-epoch batch averages
};

// Seeded permutation of the dataset's row indices for one epoch, chunked
// into batches. The stream is keyed on (seed, epoch). A final short batch is
// kept when it has at least 2 rows (the variance term needs N >= 2) and
// dropped when it is a single row.
std::vector<std::vector<int>> batch_iterator(const Dataset& data, int batch_size,
                                             std::uint64_t seed, int epoch);

// Standard Adam with bias correction; mutates net and state in place.
void adam_step(Network& net, const GradientSet& grads, AdamState& state,
               const TrainConfig& cfg);

// Full training loop: per epoch, shuffle and iterate batches; per batch, run
// the original branch (and the protected-flipped branch when the invariance
// weight is nonzero), assemble the weighted loss, backprop through every
// branch, and Adam-update. Terms with zero weight are skipped and logged as
// zero. Deterministic: identical (net, data, cfg) give a bit-identical model.
std::pair<Network, TrainHistory> train(const Network& net, const Dataset& data,
                                       const TrainConfig& cfg);

}  // namespace fairvic
