#pragma once

#include <cmath>
#include <string>
#include <utility>

#include "npga/autoencoder.hpp"
#include "npga/common.hpp"
#include "npga/kernels.hpp"

namespace npga {

// ---------------------------------------------------------------------------
// GP guidance
// ---------------------------------------------------------------------------

/// One GP marginal-likelihood term: acts on a contiguous slab of hidden units
/// through the low-rank projection, against one named label set.
struct GpGuidanceSpec {
  Index partition_begin = 0;
  Index partition_end = 0;   // half-open [begin, end)
  Matrix projection;         // H x P
  KernelSpec kernel;
  double noise_variance = 1e-2;
  std::string target_label_set;

  Index partition_width() const { return partition_end - partition_begin; }
  Index latent_dim() const { return projection.rows(); }

  void validate(Index hidden_units) const {
    if (partition_begin < 0 || partition_end > hidden_units ||
        partition_begin >= partition_end) {
      throw InvalidSpecError("gp spec: partition out of range");
    }
    const Index p = partition_width();
    const Index h = projection.rows();
    if (projection.cols() != p) {
      throw InvalidSpecError("gp spec: projection columns must equal partition width");
    }
    if (h < 1 || h > p) {
      throw InvalidSpecError("gp spec: latent dim must satisfy 1 <= H <= partition width");
    }
    if (!(noise_variance > 0.0)) {
      throw InvalidSpecError("gp spec: noise_variance must be > 0");
    }
    kernel.validate();
  }
};

namespace detail {

struct GpNllCore {
  double cost = 0.0;
  Matrix dcost_dgram;  // N x N, derivative wrt the (noise-free) Gram matrix
};

/// (1/M) sum_m [ ln|K + s2 I| + z_m' (K + s2 I)^-1 z_m ] with its derivative
/// with respect to K. Cholesky everywhere; one jitter retry of
/// 1e-8 * mean(diag), then a loud failure carrying the attempted jitter.
inline GpNllCore gp_nll_core(const ConstMatrixRef& gram_matrix, double noise_variance,
                             const ConstMatrixRef& targets) {
  const Index n = gram_matrix.rows();
  require_shape(gram_matrix.cols() == n, "gp cost: Gram matrix must be square");
  require_shape(targets.rows() == n, "gp cost: targets rows must match Gram size");
  require_finite(targets, "gp targets");
  const Index m = targets.cols();

  Matrix ksig = gram_matrix;
  ksig.diagonal().array() += noise_variance;
  Eigen::LLT<Matrix> llt(ksig);
  if (llt.info() != Eigen::Success) {
    const double jitter = 1e-8 * ksig.diagonal().mean();
    ksig.diagonal().array() += jitter;
    llt.compute(ksig);
    if (llt.info() != Eigen::Success) {
      throw ConditioningError(
          "gp cost: Cholesky failed even with jitter " + std::to_string(jitter),
          jitter);
    }
  }

  double logdet = 0.0;
  for (Index i = 0; i < n; ++i) logdet += std::log(llt.matrixL()(i, i));
  logdet *= 2.0;

  Matrix alpha = llt.solve(targets);  // (K + s2 I)^-1 Z, one column per m
  GpNllCore out;
  out.cost = logdet + (targets.array() * alpha.array()).sum() / static_cast<double>(m);
  // d/dK [ln|Ks|] = Ks^-1 ; d/dK [z' Ks^-1 z] = -a a' with a = Ks^-1 z.
  out.dcost_dgram = llt.solve(Matrix::Identity(n, n));
  out.dcost_dgram.noalias() -=
      (alpha * alpha.transpose()) / static_cast<double>(m);
  return out;
}

}  // namespace detail

struct GpCostResult {
  double value = 0.0;
  Matrix grad_partition;   // N x P, gradient over the hidden slab
  Matrix grad_projection;  // H x P
};

/// GP marginal-likelihood guidance cost on a hidden batch, with exact
/// gradients over the partition's hidden units and the projection.
inline GpCostResult l_gp_and_grad(const ConstMatrixRef& hidden_batch,
                                  const GpGuidanceSpec& spec,
                                  const ConstMatrixRef& targets) {
  spec.validate(hidden_batch.cols());
  require_shape(hidden_batch.rows() >= 1, "l_gp: empty batch");
  require_shape(targets.rows() == hidden_batch.rows(),
                "l_gp: targets rows must match batch");
  require_finite(hidden_batch, "l_gp hidden batch");

  const Matrix slab = hidden_batch.middleCols(spec.partition_begin, spec.partition_width());
  const Matrix projected = slab * spec.projection.transpose();  // N x H
  const Matrix k = gram(projected, spec.kernel);
  detail::GpNllCore core = detail::gp_nll_core(k, spec.noise_variance, targets);

  GramPointGrad kgrad = gram_grad_points(projected, spec.kernel);
  const Matrix dprojected = kgrad.chain(core.dcost_dgram);  // N x H

  GpCostResult res;
  res.value = core.cost;
  res.grad_partition = dprojected * spec.projection;        // N x P
  res.grad_projection = dprojected.transpose() * slab;      // H x P
  return res;
}

// ---------------------------------------------------------------------------
// Parametric (logistic regression) guidance
// ---------------------------------------------------------------------------

/// Multi-class logistic regression head over the full hidden layer.
struct LrGuidanceSpec {
  Matrix weights;  // M x J
  Vector bias;     // M

  void validate() const {
    if (!weights.allFinite() || !bias.allFinite()) {
      throw InvalidInputError("lr spec contains non-finite entries");
    }
    require_shape(bias.size() == weights.rows(), "lr spec: bias size mismatch");
  }
};

struct LrCostResult {
  double value = 0.0;
  Matrix grad_hidden;   // N x J
  Matrix grad_weights;  // M x J
  Vector grad_bias;     // M
};

namespace detail {

inline void require_one_hot_rows(const ConstMatrixRef& targets) {
  for (Index i = 0; i < targets.rows(); ++i) {
    double sum = 0.0;
    for (Index j = 0; j < targets.cols(); ++j) {
      const double v = targets(i, j);
      if (v != 0.0 && v != 1.0) {
        throw InvalidLabelError("row " + std::to_string(i) + " is not one-hot");
      }
      sum += v;
    }
    if (sum != 1.0) {
      throw InvalidLabelError("row " + std::to_string(i) + " is not one-hot");
    }
  }
}

// Row-wise softmax with the max subtracted for stability.
inline Matrix softmax_rows(const ConstMatrixRef& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    p.row(i) = (logits.row(i).array() - mx).exp();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

}  // namespace detail

/// Softmax cross-entropy, averaged over the batch.
inline LrCostResult l_lr_and_grad(const ConstMatrixRef& hidden_batch,
                                  const LrGuidanceSpec& spec,
                                  const ConstMatrixRef& one_hot_targets) {
  spec.validate();
  require_shape(hidden_batch.cols() == spec.weights.cols(),
                "l_lr: hidden width does not match weights");
  require_shape(one_hot_targets.rows() == hidden_batch.rows() &&
                    one_hot_targets.cols() == spec.weights.rows(),
                "l_lr: target shape mismatch");
  detail::require_one_hot_rows(one_hot_targets);

  const double n = static_cast<double>(hidden_batch.rows());
  Matrix logits =
      (hidden_batch * spec.weights.transpose()).rowwise() + spec.bias.transpose();
  Matrix probs = detail::softmax_rows(logits);

  double cost = 0.0;
  for (Index i = 0; i < probs.rows(); ++i) {
    for (Index j = 0; j < probs.cols(); ++j) {
      if (one_hot_targets(i, j) == 1.0) cost -= std::log(probs(i, j));
    }
  }
  cost /= n;

  Matrix dlogits = (probs - one_hot_targets) / n;
  LrCostResult res;
  res.value = cost;
  res.grad_weights = dlogits.transpose() * hidden_batch;
  res.grad_bias = dlogits.colwise().sum().transpose();
  res.grad_hidden = dlogits * spec.weights;
  return res;
}

/// Least-squares linear head (for continuous targets in partitioned
/// parametric-guidance baselines): mean over batch and target columns of the
/// squared residual.
inline LrCostResult l_linreg_and_grad(const ConstMatrixRef& hidden_batch,
                                      const LrGuidanceSpec& spec,
                                      const ConstMatrixRef& targets) {
  spec.validate();
  require_shape(hidden_batch.cols() == spec.weights.cols(),
                "l_linreg: hidden width does not match weights");
  require_shape(targets.rows() == hidden_batch.rows() &&
                    targets.cols() == spec.weights.rows(),
                "l_linreg: target shape mismatch");
  const double scale =
      1.0 / static_cast<double>(targets.rows() * targets.cols());
  Matrix pred =
      (hidden_batch * spec.weights.transpose()).rowwise() + spec.bias.transpose();
  Matrix diff = pred - targets;
  LrCostResult res;
  res.value = scale * diff.squaredNorm();
  Matrix dpred = (2.0 * scale) * diff;
  res.grad_weights = dpred.transpose() * hidden_batch;
  res.grad_bias = dpred.colwise().sum().transpose();
  res.grad_hidden = dpred * spec.weights;
  return res;
}

}  // namespace npga
