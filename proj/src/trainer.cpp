#include "fairvic/trainer.hpp"

#include <cmath>
#include <optional>
#include <stdexcept>

#include "fairvic/rng.hpp"

namespace fairvic {

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("train config: epochs must be positive");
  if (batch_size < 2) throw std::invalid_argument("train config: batch_size must be at least 2");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("train config: learning_rate must be positive");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
    throw std::invalid_argument("train config: betas must lie in [0, 1)");
  if (!(adam_epsilon > 0.0)) throw std::invalid_argument("train config: adam_epsilon must be positive");
}

AdamState AdamState::zeros_like(const Network& net) {
  AdamState s;
  s.m_weights.reserve(net.layers.size());
  for (const auto& layer : net.layers) {
    s.m_weights.push_back(Matrix::Zero(layer.weights.rows(), layer.weights.cols()));
    s.v_weights.push_back(Matrix::Zero(layer.weights.rows(), layer.weights.cols()));
    s.m_biases.push_back(Vector::Zero(layer.bias.size()));
    s.v_biases.push_back(Vector::Zero(layer.bias.size()));
  }
  return s;
}

std::vector<std::vector<int>> batch_iterator(const Dataset& data, int batch_size,
                                             std::uint64_t seed, int epoch) {
  if (batch_size < 2) throw std::invalid_argument("batch_iterator: batch_size must be at least 2");
  const long n = data.rows();
  std::vector<int> order(n);
  for (long i = 0; i < n; ++i) order[i] = static_cast<int>(i);
  SplitMix64 rng(derive_seed(seed, "shuffle", static_cast<std::uint64_t>(epoch)));
  shuffle(order, rng);

  std::vector<std::vector<int>> batches;
  for (long start = 0; start < n; start += batch_size) {
    long end = std::min(n, start + batch_size);
    if (end - start < 2) break;  // a single leftover row cannot form a batch
    batches.emplace_back(order.begin() + start, order.begin() + end);
  }
  return batches;
}

void adam_step(Network& net, const GradientSet& grads, AdamState& state, const TrainConfig& cfg) {
  if (grads.weights.size() != net.layers.size() || state.m_weights.size() != net.layers.size())
    throw ShapeError("adam_step: gradient/state layer count mismatch");
  state.timestep += 1;
  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.timestep));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.timestep));
  for (size_t k = 0; k < net.layers.size(); ++k) {
    auto& layer = net.layers[k];
    state.m_weights[k] = b1 * state.m_weights[k] + (1.0 - b1) * grads.weights[k];
    state.v_weights[k] =
        b2 * state.v_weights[k].array() + (1.0 - b2) * grads.weights[k].array().square();
    layer.weights.array() -= cfg.learning_rate * (state.m_weights[k].array() / c1) /
                             ((state.v_weights[k].array() / c2).sqrt() + cfg.adam_epsilon);

    state.m_biases[k] = b1 * state.m_biases[k] + (1.0 - b1) * grads.biases[k];
    state.v_biases[k] =
        b2 * state.v_biases[k].array() + (1.0 - b2) * grads.biases[k].array().square();
    layer.bias.array() -= cfg.learning_rate * (state.m_biases[k].array() / c1) /
                          ((state.v_biases[k].array() / c2).sqrt() + cfg.adam_epsilon);
  }
}

std::pair<Network, TrainHistory> train(const Network& initial, const Dataset& data,
                                       const TrainConfig& cfg) {
  cfg.validate();
  if (data.rows() < 2) throw std::invalid_argument("train: need at least two rows");
  if (data.features.cols() != initial.input_width())
    throw ShapeError("train: dataset has " + std::to_string(data.features.cols()) +
                     " features, network expects " + std::to_string(initial.input_width()));
  const bool needs_protected = cfg.lambdas.inv > 0.0 || cfg.lambdas.cov > 0.0;
  if (needs_protected && (data.protected_col < 0 || data.protected_col >= data.features.cols()))
    throw std::invalid_argument("train: invariance/covariance terms need a protected column");
  if (cfg.lambdas.var > 0.0 && initial.bottleneck_index < 0)
    throw std::invalid_argument("train: variance term needs a bottleneck layer");

  Network net = initial;
  AdamState adam = AdamState::zeros_like(net);
  TrainHistory history;
  history.epochs.reserve(cfg.epochs);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto batches = batch_iterator(data, cfg.batch_size, cfg.seed, epoch);
    if (batches.empty()) throw std::invalid_argument("train: no usable batches");

    double sum_acc = 0, sum_var = 0, sum_inv = 0, sum_cov = 0, sum_reg = 0;
    for (size_t b = 0; b < batches.size(); ++b) {
      const auto& idx = batches[b];
      const long m = static_cast<long>(idx.size());
      Matrix x(m, data.features.cols());
      Vector y(m);
      for (long i = 0; i < m; ++i) {
        x.row(i) = data.features.row(idx[i]);
        y(i) = static_cast<double>(data.labels(idx[i]));
      }

      // Both branches share one dropout stream so the flipped pass sees the
      // same thinned network.
      const std::uint64_t drop_seed = derive_seed(cfg.seed, "dropout",
                                                  static_cast<std::uint64_t>(epoch),
                                                  static_cast<std::uint64_t>(b));
      ForwardResult fr = forward(net, x, ForwardMode::Train, drop_seed);

      double l_acc = 0, l_var = 0, l_inv = 0, l_cov = 0;
      Vector out_grad = Vector::Zero(m);
      Matrix emb_grad;
      bool has_emb_grad = false;
      std::optional<ForwardResult> flipped;
      Vector flip_grad;

      if (cfg.lambdas.acc > 0.0) {
        LossWithGrad bce = bce_loss(fr.predictions, y);
        l_acc = bce.value;
        out_grad += cfg.lambdas.acc * bce.grad;
      }
      if (cfg.lambdas.var > 0.0) {
        EmbeddingLossWithGrad vr = variance_loss(fr.embeddings, cfg.variance_cfg);
        l_var = vr.value;
        emb_grad = cfg.lambdas.var * vr.grad;
        has_emb_grad = true;
      }
      if (cfg.lambdas.inv > 0.0) {
        Matrix x_flip = flip_protected(x, data.protected_col);
        flipped = forward(net, x_flip, ForwardMode::Train, drop_seed);
        PairLossWithGrad ir = invariance_loss(fr.predictions, flipped->predictions);
        l_inv = ir.value;
        out_grad += cfg.lambdas.inv * ir.grad_a;
        flip_grad = cfg.lambdas.inv * ir.grad_b;
      }
      if (cfg.lambdas.cov > 0.0) {
        LossWithGrad cr = covariance_loss(fr.predictions, x.col(data.protected_col));
        l_cov = cr.value;
        out_grad += cfg.lambdas.cov * cr.grad;
      }
      const double l_reg = regularization_penalty(net);

      std::vector<const ForwardCache*> caches{&fr.cache};
      std::vector<Vector> out_grads{out_grad};
      if (flipped) {
        caches.push_back(&flipped->cache);
        out_grads.push_back(flip_grad);
      }
      GradientSet grads = backward(net, caches, out_grads, has_emb_grad ? &emb_grad : nullptr);
      adam_step(net, grads, adam, cfg);

      sum_acc += l_acc;
      sum_var += l_var;
      sum_inv += l_inv;
      sum_cov += l_cov;
      sum_reg += l_reg;
    }

    const double nb = static_cast<double>(batches.size());
    history.epochs.push_back(total_loss(sum_acc / nb, sum_var / nb, sum_inv / nb, sum_cov / nb,
                                        sum_reg / nb, cfg.lambdas));
  }
  return {std::move(net), std::move(history)};
}

}  // namespace fairvic
