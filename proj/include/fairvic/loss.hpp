#pragma once

#include "fairvic/types.hpp"

namespace fairvic {

// Convex-combination weights over the accuracy/variance/invariance/covariance
// terms. Constructor rejects negative entries and any tuple whose sum is more
// than 1e-6 away from one.
struct LambdaWeights {
  double acc = 1.0;
  double var = 0.0;
  double inv = 0.0;
  double cov = 0.0;

  LambdaWeights() = default;
  LambdaWeights(double acc_, double var_, double inv_, double cov_);
};

// gamma is the per-dimension std margin below which the variance hinge
// activates; epsilon sits inside the square root and keeps the gradient
// finite at zero variance.
struct VarianceConfig {
  double gamma = 1.0;
  double epsilon = 1e-4;

  VarianceConfig() = default;
  VarianceConfig(double gamma_, double epsilon_);
};

struct LossBreakdown {
  double l_acc = 0.0;
  double l_var = 0.0;
  double l_inv = 0.0;
  double l_cov = 0.0;
  double l_reg = 0.0;
  double l_total = 0.0;
};

struct LossWithGrad {
  double value = 0.0;
  Vector grad;  // w.r.t. the prediction vector
};

struct PairLossWithGrad {
  double value = 0.0;
  Vector grad_a;
  Vector grad_b;
};

struct EmbeddingLossWithGrad {
  double value = 0.0;
  Matrix grad;  // w.r.t. the embedding matrix
};

// Mean binary cross-entropy; predictions are clamped to [1e-7, 1-1e-7]
// before the logs and the gradient is evaluated at the clamped point.
LossWithGrad bce_loss(const Vector& preds, const Vector& labels);

// Per-dimension hinge on the batch std of the embeddings: mean over
// dimensions of max(0, gamma - sqrt(popvar + eps)). Needs at least two rows.
EmbeddingLossWithGrad variance_loss(const Matrix& embeddings, const VarianceConfig& cfg);

// Mean squared gap between the original and protected-flipped predictions.
// Gradients flow to both branches (+2d/N and -2d/N).
PairLossWithGrad invariance_loss(const Vector& preds, const Vector& preds_flipped);

// sqrt(sum_i ((y_i - mean(y)) * P_i)^2) / N with subgradient 0 when the sum
// under the root vanishes.
LossWithGrad covariance_loss(const Vector& preds, const Vector& protected_attr);

// Weighted combination; the regularization penalty enters unweighted.
LossBreakdown total_loss(double l_acc, double l_var, double l_inv, double l_cov,
                         double l_reg, const LambdaWeights& weights);

// Copy of the batch with the protected column mapped 0 <-> 1; every other
// entry bit-identical. The column must hold only the two encoded levels.
Matrix flip_protected(const Matrix& batch, Eigen::Index protected_col);

}  // namespace fairvic
