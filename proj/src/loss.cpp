#include "fairvic/loss.hpp"

#include <cmath>

namespace fairvic {

LambdaWeights::LambdaWeights(double acc_, double var_, double inv_, double cov_)
    : acc(acc_), var(var_), inv(inv_), cov(cov_) {
  if (acc < 0.0 || var < 0.0 || inv < 0.0 || cov < 0.0)
    throw std::invalid_argument("LambdaWeights: weights must be nonnegative");
  const double sum = acc + var + inv + cov;
  if (std::abs(sum - 1.0) > 1e-6)
    throw std::invalid_argument("LambdaWeights: weights must sum to 1, got " +
                                std::to_string(sum));
}

VarianceConfig::VarianceConfig(double gamma_, double epsilon_)
    : gamma(gamma_), epsilon(epsilon_) {
  if (gamma <= 0.0) throw std::invalid_argument("VarianceConfig: gamma must be positive");
  if (epsilon < 0.0) throw std::invalid_argument("VarianceConfig: epsilon must be nonnegative");
}

LossWithGrad bce_loss(const Vector& preds, const Vector& labels) {
  if (preds.size() != labels.size())
    throw ShapeError("bce_loss: " + std::to_string(preds.size()) + " predictions vs " +
                     std::to_string(labels.size()) + " labels");
  const Eigen::Index n = preds.size();
  constexpr double lo = 1e-7;
  constexpr double hi = 1.0 - 1e-7;

  LossWithGrad res;
  res.grad = Vector::Zero(n);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double y = labels(i);
    const double p = std::min(std::max(preds(i), lo), hi);
    sum -= y * std::log(p) + (1.0 - y) * std::log1p(-p);
    // Gradient at the clamped prediction. Kept finite and nonzero even when
    // the clamp is active so a saturated sigmoid upstream can still recover
    // (with the sigmoid derivative this composes to (p - y)/n).
    res.grad(i) = (-y / p + (1.0 - y) / (1.0 - p)) / static_cast<double>(n);
  }
  res.value = sum / static_cast<double>(n);
  return res;
}

EmbeddingLossWithGrad variance_loss(const Matrix& embeddings, const VarianceConfig& cfg) {
  const Eigen::Index n = embeddings.rows();
  const Eigen::Index dims = embeddings.cols();
  if (n < 2)
    throw std::invalid_argument("variance_loss: needs at least 2 rows, got " +
                                std::to_string(n));

  EmbeddingLossWithGrad res;
  res.grad = Matrix::Zero(n, dims);
  double sum = 0.0;
  for (Eigen::Index j = 0; j < dims; ++j) {
    const double mean = embeddings.col(j).mean();
    const double popvar =
        (embeddings.col(j).array() - mean).square().sum() / static_cast<double>(n);
    const double sd = std::sqrt(popvar + cfg.epsilon);
    const double hinge = cfg.gamma - sd;
    if (hinge > 0.0) {
      sum += hinge;
      // d sd / d z_ij = (z_ij - mean_j) / (n * sd); hinge contributes -1/dims.
      if (sd > 0.0)
        res.grad.col(j) = (embeddings.col(j).array() - mean).matrix() *
                          (-1.0 / (static_cast<double>(dims) * static_cast<double>(n) * sd));
    }
  }
  res.value = sum / static_cast<double>(dims);
  return res;
}

PairLossWithGrad invariance_loss(const Vector& preds, const Vector& preds_flipped) {
  if (preds.size() != preds_flipped.size())
    throw ShapeError("invariance_loss: " + std::to_string(preds.size()) + " vs " +
                     std::to_string(preds_flipped.size()) + " predictions");
  const double n = static_cast<double>(preds.size());
  const Vector delta = preds - preds_flipped;
  PairLossWithGrad res;
  res.value = delta.squaredNorm() / n;
  res.grad_a = (2.0 / n) * delta;
  res.grad_b = (-2.0 / n) * delta;
  return res;
}

LossWithGrad covariance_loss(const Vector& preds, const Vector& protected_attr) {
  if (preds.size() != protected_attr.size())
    throw ShapeError("covariance_loss: " + std::to_string(preds.size()) +
                     " predictions vs " + std::to_string(protected_attr.size()) +
                     " protected values");
  if (preds.size() == 0)
    throw std::invalid_argument("covariance_loss: empty prediction vector");
  const Eigen::Index n = preds.size();
  const double nd = static_cast<double>(n);
  const double mean = preds.mean();
  const Vector weighted = (preds.array() - mean).matrix().cwiseProduct(protected_attr);
  const double under_root = weighted.squaredNorm();

  LossWithGrad res;
  res.value = std::sqrt(under_root) / nd;
  if (under_root > 0.0) {
    // dS/dy_k = 2 (c_k P_k - mean_i(c_i P_i)); dL = dS / (2 sqrt(S) n).
    const Vector cp = weighted.cwiseProduct(protected_attr);
    res.grad = (cp.array() - cp.mean()).matrix() / (std::sqrt(under_root) * nd);
  } else {
    res.grad = Vector::Zero(n);  // subgradient at the root's cusp
  }
  return res;
}

LossBreakdown total_loss(double l_acc, double l_var, double l_inv, double l_cov,
                         double l_reg, const LambdaWeights& weights) {
  LossBreakdown b;
  b.l_acc = l_acc;
  b.l_var = l_var;
  b.l_inv = l_inv;
  b.l_cov = l_cov;
  b.l_reg = l_reg;
  b.l_total = weights.acc * l_acc + weights.var * l_var + weights.inv * l_inv +
              weights.cov * l_cov + l_reg;
  return b;
}

Matrix flip_protected(const Matrix& batch, Eigen::Index protected_col) {
  if (protected_col < 0 || protected_col >= batch.cols())
    throw std::invalid_argument("flip_protected: column " + std::to_string(protected_col) +
                                " out of range for " + std::to_string(batch.cols()) +
                                " columns");
  Matrix flipped = batch;
  for (Eigen::Index r = 0; r < batch.rows(); ++r) {
    const double v = batch(r, protected_col);
    if (v != 0.0 && v != 1.0)
      throw std::invalid_argument("flip_protected: non-binary value " +
                                  format_double(v) + " at row " + std::to_string(r));
    flipped(r, protected_col) = 1.0 - v;
  }
  return flipped;
}

}  // namespace fairvic
