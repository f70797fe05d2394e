#include "fairvic/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>

#include "fairvic/rng.hpp"

namespace fairvic {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  // Trim to the shortest representation that still round-trips.
  for (int prec = 1; prec < 17; ++prec) {
    char shorter[64];
    std::snprintf(shorter, sizeof(shorter), "%.*g", prec, v);
    if (std::strtod(shorter, nullptr) == v) return shorter;
  }
  return buf;
}

GradientSet GradientSet::zeros_like(const Network& net) {
  GradientSet g;
  g.weights.reserve(net.layers.size());
  g.biases.reserve(net.layers.size());
  for (const DenseLayer& layer : net.layers) {
    g.weights.push_back(Matrix::Zero(layer.in_width(), layer.out_width()));
    g.biases.push_back(Vector::Zero(layer.out_width()));
  }
  return g;
}

Network init_network(const std::vector<int>& widths, std::uint64_t seed) {
  if (widths.size() < 2)
    throw std::invalid_argument("init_network: need at least input and output widths");
  for (const int w : widths) {
    if (w <= 0)
      throw std::invalid_argument("init_network: layer width must be positive, got " +
                                  std::to_string(w));
  }

  Network net;
  SplitMix64 rng(derive_seed(seed, "glorot"));
  for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
    DenseLayer layer;
    const int fan_in = widths[k];
    const int fan_out = widths[k + 1];
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    layer.weights.resize(fan_in, fan_out);
    for (Eigen::Index r = 0; r < fan_in; ++r)
      for (Eigen::Index c = 0; c < fan_out; ++c)
        layer.weights(r, c) = rng.uniform(-limit, limit);
    layer.bias = Vector::Zero(fan_out);
    layer.activation =
        (k + 2 == widths.size()) ? Activation::Sigmoid : Activation::ReLU;
    net.layers.push_back(std::move(layer));
  }

  // Bottleneck = narrowest hidden layer (first one on ties).
  net.bottleneck_index = -1;
  int best = std::numeric_limits<int>::max();
  for (std::size_t k = 0; k + 1 < net.layers.size(); ++k) {
    const int w = static_cast<int>(net.layers[k].out_width());
    if (w < best) {
      best = w;
      net.bottleneck_index = static_cast<int>(k);
    }
  }
  return net;
}

namespace {

void apply_activation(Activation act, const Matrix& pre, Matrix& out) {
  switch (act) {
    case Activation::ReLU:
      out = pre.cwiseMax(0.0);
      break;
    case Activation::Sigmoid:
      // Clamped away from the rails so the BCE gradient composed with the
      // stored slope stays exactly (p - y)/n however far the input saturates.
      out = (1.0 + (-pre.array()).exp())
                .inverse()
                .cwiseMax(1e-7)
                .cwiseMin(1.0 - 1e-7)
                .matrix();
      break;
    case Activation::Identity:
      out = pre;
      break;
  }
}

// Derivative w.r.t. the pre-activation, given both tensors. ReLU takes the
// subgradient 0 at the kink.
Matrix activation_derivative(Activation act, const Matrix& pre, const Matrix& post) {
  switch (act) {
    case Activation::ReLU:
      return (pre.array() > 0.0).cast<double>().matrix();
    case Activation::Sigmoid:
      return (post.array() * (1.0 - post.array())).matrix();
    case Activation::Identity:
      return Matrix::Ones(pre.rows(), pre.cols());
  }
  return Matrix();
}

}  // namespace

ForwardResult forward(const Network& net, const Matrix& batch, ForwardMode mode,
                      std::uint64_t seed) {
  if (batch.cols() != net.input_width())
    throw ShapeError("forward: batch has " + std::to_string(batch.cols()) +
                     " columns, network expects " + std::to_string(net.input_width()));

  const std::size_t depth = net.layers.size();
  const bool use_dropout = mode == ForwardMode::Train && net.dropout_rate > 0.0;
  const double keep = 1.0 - net.dropout_rate;
  SplitMix64 rng(derive_seed(seed, "dropout-mask"));

  ForwardResult res;
  ForwardCache& cache = res.cache;
  cache.input = batch;
  cache.pre_activations.resize(depth);
  cache.activations.resize(depth);
  cache.outputs.resize(depth);
  cache.dropout_scale.resize(depth);

  const Matrix* current = &batch;
  for (std::size_t k = 0; k < depth; ++k) {
    const DenseLayer& layer = net.layers[k];
    Matrix& pre = cache.pre_activations[k];
    pre.noalias() = (*current) * layer.weights;
    pre.rowwise() += layer.bias.transpose();
    apply_activation(layer.activation, pre, cache.activations[k]);

    const bool hidden = k + 1 < depth;
    if (hidden && use_dropout) {
      Matrix& scale = cache.dropout_scale[k];
      scale.resize(pre.rows(), pre.cols());
      for (Eigen::Index r = 0; r < scale.rows(); ++r)
        for (Eigen::Index c = 0; c < scale.cols(); ++c)
          scale(r, c) = rng.uniform01() < keep ? 1.0 / keep : 0.0;
      cache.outputs[k] = cache.activations[k].cwiseProduct(scale);
    } else {
      cache.outputs[k] = cache.activations[k];
    }
    current = &cache.outputs[k];
  }

  res.predictions = cache.outputs[depth - 1].col(0);
  if (net.bottleneck_index >= 0)
    res.embeddings = cache.activations[static_cast<std::size_t>(net.bottleneck_index)];
  return res;
}

GradientSet backward(const Network& net, const std::vector<const ForwardCache*>& caches,
                     const std::vector<Vector>& output_grads,
                     const Matrix* embedding_grad) {
  if (caches.size() != output_grads.size())
    throw ShapeError("backward: " + std::to_string(caches.size()) + " caches vs " +
                     std::to_string(output_grads.size()) + " output gradients");
  const std::size_t depth = net.layers.size();

  GradientSet grads = GradientSet::zeros_like(net);
  for (std::size_t branch = 0; branch < caches.size(); ++branch) {
    const ForwardCache& cache = *caches[branch];
    const Vector& ograd = output_grads[branch];
    if (ograd.size() != cache.rows())
      throw ShapeError("backward: output gradient length " + std::to_string(ograd.size()) +
                       " vs batch of " + std::to_string(cache.rows()));
    const bool attach_embedding = branch == 0 && embedding_grad != nullptr;
    if (attach_embedding) {
      const Matrix& bneck = cache.activations[static_cast<std::size_t>(net.bottleneck_index)];
      if (embedding_grad->rows() != bneck.rows() || embedding_grad->cols() != bneck.cols())
        throw ShapeError("backward: embedding gradient shape does not match bottleneck");
    }

    // d(loss)/d(activation) of the layer being processed.
    Matrix dact = ograd;
    if (attach_embedding && net.bottleneck_index == static_cast<int>(depth) - 1)
      dact += *embedding_grad;

    for (std::size_t k = depth; k-- > 0;) {
      const DenseLayer& layer = net.layers[k];
      const Matrix dpre = dact.cwiseProduct(
          activation_derivative(layer.activation, cache.pre_activations[k],
                                cache.activations[k]));
      const Matrix& layer_input = k == 0 ? cache.input : cache.outputs[k - 1];
      grads.weights[k].noalias() += layer_input.transpose() * dpre;
      grads.biases[k] += dpre.colwise().sum().transpose();
      if (k > 0) {
        Matrix dout;
        dout.noalias() = dpre * layer.weights.transpose();
        if (!cache.dropout_scale[k - 1].size())
          dact = std::move(dout);
        else
          dact = dout.cwiseProduct(cache.dropout_scale[k - 1]);
        if (attach_embedding && static_cast<int>(k) - 1 == net.bottleneck_index)
          dact += *embedding_grad;
      }
    }
  }

  if (net.l1_coeff != 0.0 || net.l2_coeff != 0.0) {
    for (std::size_t k = 0; k < depth; ++k) {
      const Matrix& w = net.layers[k].weights;
      if (net.l1_coeff != 0.0)
        grads.weights[k] += net.l1_coeff * w.unaryExpr([](double x) {
          return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
        });
      if (net.l2_coeff != 0.0) grads.weights[k] += (2.0 * net.l2_coeff) * w;
    }
  }
  return grads;
}

double regularization_penalty(const Network& net) {
  double l1 = 0.0, l2 = 0.0;
  for (const DenseLayer& layer : net.layers) {
    l1 += layer.weights.cwiseAbs().sum();
    l2 += layer.weights.squaredNorm();
  }
  return net.l1_coeff * l1 + net.l2_coeff * l2;
}

namespace {

constexpr char kNetMagic[8] = {'F', 'V', 'N', 'E', 'T', '0', '1', '\n'};

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

}  // namespace

void save_network(const Network& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("save_network: cannot open " + path);
  out.write(kNetMagic, sizeof(kNetMagic));
  write_pod(out, static_cast<std::int64_t>(net.layers.size()));
  write_pod(out, static_cast<std::int64_t>(net.bottleneck_index));
  write_pod(out, net.dropout_rate);
  write_pod(out, net.l1_coeff);
  write_pod(out, net.l2_coeff);
  for (const DenseLayer& layer : net.layers) {
    write_pod(out, static_cast<std::int64_t>(layer.in_width()));
    write_pod(out, static_cast<std::int64_t>(layer.out_width()));
    write_pod(out, static_cast<std::int32_t>(layer.activation));
    for (Eigen::Index r = 0; r < layer.in_width(); ++r)
      for (Eigen::Index c = 0; c < layer.out_width(); ++c)
        write_pod(out, layer.weights(r, c));
    for (Eigen::Index i = 0; i < layer.out_width(); ++i) write_pod(out, layer.bias(i));
  }
  if (!out) throw LoadError("save_network: write failed for " + path);
}

Network load_network(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("load_network: cannot open " + path);
  char magic[sizeof(kNetMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kNetMagic, sizeof(magic)) != 0)
    throw LoadError("load_network: " + path + " is not a network file");

  Network net;
  const auto n_layers = read_pod<std::int64_t>(in);
  net.bottleneck_index = static_cast<int>(read_pod<std::int64_t>(in));
  net.dropout_rate = read_pod<double>(in);
  net.l1_coeff = read_pod<double>(in);
  net.l2_coeff = read_pod<double>(in);
  if (!in || n_layers <= 0) throw LoadError("load_network: corrupt header in " + path);
  for (std::int64_t k = 0; k < n_layers; ++k) {
    DenseLayer layer;
    const auto rows = read_pod<std::int64_t>(in);
    const auto cols = read_pod<std::int64_t>(in);
    layer.activation = static_cast<Activation>(read_pod<std::int32_t>(in));
    if (!in || rows <= 0 || cols <= 0)
      throw LoadError("load_network: corrupt layer header in " + path);
    layer.weights.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) layer.weights(r, c) = read_pod<double>(in);
    layer.bias.resize(cols);
    for (Eigen::Index i = 0; i < cols; ++i) layer.bias(i) = read_pod<double>(in);
    net.layers.push_back(std::move(layer));
  }
  if (!in) throw LoadError("load_network: truncated file " + path);
  return net;
}

}  // namespace fairvic
