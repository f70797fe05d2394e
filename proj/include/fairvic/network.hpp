#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fairvic/types.hpp"

namespace fairvic {

enum class Activation { ReLU, Sigmoid, Identity };

struct DenseLayer {
  Matrix weights;  // in x out
  Vector bias;     // out
  Activation activation = Activation::ReLU;

  Eigen::Index in_width() const { return weights.rows(); }
  Eigen::Index out_width() const { return weights.cols(); }
};

// Hourglass dense net. The bottleneck layer's activation is the embedding
// surface the variance loss acts on; the width-1 sigmoid head emits the
// favourable-class probability.
struct Network {
  std::vector<DenseLayer> layers;
  int bottleneck_index = -1;  // narrowest hidden layer; -1 if no hidden layer
  double dropout_rate = 0.0;
  double l1_coeff = 0.0;
  double l2_coeff = 0.0;

  Eigen::Index input_width() const { return layers.front().in_width(); }
  Eigen::Index output_width() const { return layers.back().out_width(); }
  std::size_t depth() const { return layers.size(); }
};

enum class ForwardMode { Train, Eval };

// Everything backward() needs to replay one forward pass. Shapes follow the
// batch that produced it.
struct ForwardCache {
  Matrix input;
  std::vector<Matrix> pre_activations;  // per layer
  std::vector<Matrix> activations;      // per layer, before dropout
  std::vector<Matrix> dropout_scale;    // per layer; empty when no dropout applied
  std::vector<Matrix> outputs;          // per layer, after dropout (== activations in Eval)

  Eigen::Index rows() const { return input.rows(); }
};

struct ForwardResult {
  Vector predictions;  // favourable-class probabilities, one per row
  Matrix embeddings;   // bottleneck activations (rows x bottleneck width)
  ForwardCache cache;
};

// Per-layer weight/bias gradients, shape-congruent with the owning Network.
struct GradientSet {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  static GradientSet zeros_like(const Network& net);
};

// Glorot-uniform weights from a seeded stream, zero biases. widths lists
// every layer width including input and output; hidden layers get ReLU and
// the final layer Sigmoid. Identical seeds give bit-identical networks.
Network init_network(const std::vector<int>& widths, std::uint64_t seed);

// Runs the batch through the net. Train mode applies inverted dropout after
// every hidden activation using a stream derived from `seed` and records the
// masks in the cache; Eval mode is deterministic and dropout-free. The
// embedding tap is the bottleneck activation before dropout.
ForwardResult forward(const Network& net, const Matrix& batch, ForwardMode mode,
                      std::uint64_t seed = 0);

// Reverse-mode gradients of a scalar loss over one or more forward branches
// that share the net's parameters (their gradients add). output_grads[i] is
// dL/dprediction for caches[i]; embedding_grad, when non-null, is dL/dZ for
// the first cache's bottleneck activation. L1 (sign, 0 at 0) and L2
// contributions are added once, scaled by the net's coefficients.
GradientSet backward(const Network& net, const std::vector<const ForwardCache*>& caches,
                     const std::vector<Vector>& output_grads,
                     const Matrix* embedding_grad = nullptr);

// l1 * sum|w| + l2 * sum w^2 over all weights (biases exempt).
double regularization_penalty(const Network& net);

// Flat binary round-trip (bit-exact). Layout: magic, layer count, widths,
// activations, bottleneck index, dropout/l1/l2, then per layer the row-major
// weight block and the bias block as raw little-endian doubles.
void save_network(const Network& net, const std::string& path);
Network load_network(const std::string& path);

}  // namespace fairvic
