#pragma once

#include <cmath>
#include <random>

#include "npga/common.hpp"

namespace npga {

// ---------------------------------------------------------------------------
// Parameters and specs
// ---------------------------------------------------------------------------

/// Tied-weight autoencoder parameters. The decoder weight is always the
/// transpose of `weight`; it is never stored separately.
struct AutoencoderParams {
  Matrix weight;    // J x K, encoder weight
  Vector enc_bias;  // J
  Vector dec_bias;  // K

  Index hidden_units() const { return weight.rows(); }
  Index input_dim() const { return weight.cols(); }

  void validate() const {
    if (!weight.allFinite() || !enc_bias.allFinite() || !dec_bias.allFinite()) {
      throw InvalidInputError("autoencoder params contain non-finite entries");
    }
    require_shape(enc_bias.size() == weight.rows() && dec_bias.size() == weight.cols(),
                  "autoencoder params: bias sizes do not match weight");
  }
};

enum class EncodeMode { deterministic, nrelu_noisy };

struct CorruptionSpec {
  enum class Scheme { gaussian, mask };
  Scheme scheme = Scheme::gaussian;
  double gaussian_std = 0.05;
  double mask_fraction = 0.2;

  void validate() const {
    if (scheme == Scheme::gaussian && !(gaussian_std >= 0.0)) {
      throw InvalidSpecError("corruption gaussian_std must be >= 0");
    }
    if (scheme == Scheme::mask &&
        !(mask_fraction >= 0.0 && mask_fraction <= 1.0)) {
      throw InvalidSpecError("corruption mask_fraction must be in [0,1]");
    }
  }
};

namespace detail {

inline double sigmoid(double a) { return 1.0 / (1.0 + std::exp(-a)); }

// Pre-activation of the encoder over a batch (rows are examples).
inline Matrix encoder_preactivation(const ConstMatrixRef& inputs,
                                    const ConstMatrixRef& weight,
                                    const ConstVectorRef& enc_bias) {
  require_shape(inputs.cols() == weight.cols(),
                "encode: input dimension does not match weight");
  return (inputs * weight.transpose()).rowwise() + enc_bias.transpose();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Per-unit noise for the NReLU activation: eps ~ N(0, sigmoid(a)), drawn for
/// a whole batch of pre-activations. The draw is made once per training
/// iteration and then held fixed, so downstream costs stay deterministic.
inline Matrix draw_activation_noise(const ConstMatrixRef& preactivation, Rng& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Matrix eps(preactivation.rows(), preactivation.cols());
  for (Index j = 0; j < eps.cols(); ++j) {
    for (Index i = 0; i < eps.rows(); ++i) {
      eps(i, j) = std::sqrt(detail::sigmoid(preactivation(i, j))) * n01(rng);
    }
  }
  return eps;
}

/// Batch encode; `activation_noise` must be supplied in nrelu_noisy mode
/// (pre-drawn with draw_activation_noise) and is ignored otherwise.
inline Matrix encode_batch(const ConstMatrixRef& inputs,
                           const AutoencoderParams& params, EncodeMode mode,
                           const Matrix* activation_noise = nullptr) {
  Matrix pre = detail::encoder_preactivation(inputs, params.weight, params.enc_bias);
  if (mode == EncodeMode::nrelu_noisy) {
    if (activation_noise == nullptr) {
      throw InvalidInputError("nrelu_noisy encode needs pre-drawn activation noise");
    }
    require_shape(activation_noise->rows() == pre.rows() &&
                      activation_noise->cols() == pre.cols(),
                  "activation noise shape mismatch");
    pre += *activation_noise;
  }
  return pre.cwiseMax(0.0);
}

inline Vector encode(const ConstVectorRef& input, const AutoencoderParams& params,
                     EncodeMode mode, Rng& rng) {
  Matrix row = input.transpose();
  if (mode == EncodeMode::deterministic) {
    return encode_batch(row, params, mode).row(0).transpose();
  }
  Matrix pre = detail::encoder_preactivation(row, params.weight, params.enc_bias);
  Matrix eps = draw_activation_noise(pre, rng);
  return encode_batch(row, params, mode, &eps).row(0).transpose();
}

inline Vector encode(const ConstVectorRef& input, const AutoencoderParams& params) {
  Matrix row = input.transpose();
  return encode_batch(row, params, EncodeMode::deterministic).row(0).transpose();
}

/// Linear decoder: weight' * x + dec_bias, no output nonlinearity.
inline Vector decode(const ConstVectorRef& code, const AutoencoderParams& params) {
  require_shape(code.size() == params.weight.rows(),
                "decode: code dimension does not match weight");
  return params.weight.transpose() * code + params.dec_bias;
}

inline Matrix decode_batch(const ConstMatrixRef& codes, const AutoencoderParams& params) {
  require_shape(codes.cols() == params.weight.rows(),
                "decode: code dimension does not match weight");
  return (codes * params.weight).rowwise() + params.dec_bias.transpose();
}

/// Applies the corruption scheme to a batch. Same seed, same output.
inline Matrix corrupt(const ConstMatrixRef& batch, const CorruptionSpec& spec, Rng& rng) {
  spec.validate();
  Matrix out = batch;
  if (spec.scheme == CorruptionSpec::Scheme::gaussian) {
    if (spec.gaussian_std == 0.0) return out;
    std::normal_distribution<double> n(0.0, spec.gaussian_std);
    for (Index j = 0; j < out.cols(); ++j)
      for (Index i = 0; i < out.rows(); ++i) out(i, j) += n(rng);
  } else {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (Index j = 0; j < out.cols(); ++j)
      for (Index i = 0; i < out.rows(); ++i)
        if (u(rng) < spec.mask_fraction) out(i, j) = 0.0;
  }
  return out;
}

struct AutoencoderGrad {
  Matrix weight;
  Vector enc_bias;
  Vector dec_bias;
};

struct AutoCostResult {
  double value = 0.0;
  AutoencoderGrad grad;
};

namespace detail {

// Shared forward/backward pieces, written against Refs so both the owning
// AutoencoderParams API and the flat-parameter objective use the same code.
struct EncoderForward {
  Matrix preactivation;  // includes activation noise when present
  Matrix hidden;         // max(0, preactivation)
};

inline EncoderForward encoder_forward(const ConstMatrixRef& inputs,
                                      const ConstMatrixRef& weight,
                                      const ConstVectorRef& enc_bias,
                                      const Matrix* activation_noise) {
  EncoderForward f;
  f.preactivation = encoder_preactivation(inputs, weight, enc_bias);
  if (activation_noise != nullptr) {
    require_shape(activation_noise->rows() == f.preactivation.rows() &&
                      activation_noise->cols() == f.preactivation.cols(),
                  "activation noise shape mismatch");
    f.preactivation += *activation_noise;
  }
  f.hidden = f.preactivation.cwiseMax(0.0);
  return f;
}

// Reconstruction term: accumulates scaled gradients for the decoder path and
// the hidden-layer cotangent; returns the unscaled cost.
// L_auto = (1/K) sum_n sum_k (clean - reconstruction)^2.
inline double auto_term(const ConstMatrixRef& clean, const EncoderForward& fwd,
                        const ConstMatrixRef& weight, const ConstVectorRef& dec_bias,
                        double scale, MatrixRef dweight, VectorRef ddec_bias,
                        MatrixRef dhidden) {
  const double k = static_cast<double>(clean.cols());
  Matrix recon = (fwd.hidden * weight).rowwise() + dec_bias.transpose();
  Matrix diff = recon - clean;
  const double cost = diff.squaredNorm() / k;
  Matrix drecon = (2.0 / k) * diff;
  dweight.noalias() += scale * (fwd.hidden.transpose() * drecon);
  ddec_bias.noalias() += scale * drecon.colwise().sum().transpose();
  dhidden.noalias() += scale * (drecon * weight.transpose());
  return cost;
}

// Backward through the rectifier and encoder affine map. Subgradient 0 at
// exactly zero pre-activation.
inline void encoder_backward(const ConstMatrixRef& inputs, const EncoderForward& fwd,
                             const ConstMatrixRef& dhidden, MatrixRef dweight,
                             VectorRef denc_bias) {
  Matrix dpre =
      (fwd.preactivation.array() > 0.0).cast<double>() * dhidden.array();
  dweight.noalias() += dpre.transpose() * inputs;
  denc_bias.noalias() += dpre.colwise().sum().transpose();
}

}  // namespace detail

/// Reconstruction cost and exact gradient of the tied-weight denoising
/// autoencoder: encodes the corrupted batch, reconstructs the clean one.
/// In nrelu_noisy mode the caller supplies the (frozen) activation noise.
inline AutoCostResult l_auto_and_grad(const ConstMatrixRef& clean_batch,
                                      const ConstMatrixRef& corrupted_batch,
                                      const AutoencoderParams& params,
                                      EncodeMode mode,
                                      const Matrix* activation_noise = nullptr,
                                      Matrix* hidden_out = nullptr) {
  params.validate();
  require_shape(clean_batch.rows() == corrupted_batch.rows() &&
                    clean_batch.cols() == corrupted_batch.cols(),
                "l_auto: clean/corrupted batch shapes differ");
  require_shape(clean_batch.cols() == params.input_dim(),
                "l_auto: batch dimension does not match params");
  if (mode == EncodeMode::nrelu_noisy && activation_noise == nullptr) {
    throw InvalidInputError("nrelu_noisy cost needs pre-drawn activation noise");
  }
  const Matrix* noise = (mode == EncodeMode::nrelu_noisy) ? activation_noise : nullptr;

  AutoCostResult res;
  res.grad.weight = Matrix::Zero(params.weight.rows(), params.weight.cols());
  res.grad.enc_bias = Vector::Zero(params.enc_bias.size());
  res.grad.dec_bias = Vector::Zero(params.dec_bias.size());

  detail::EncoderForward fwd =
      detail::encoder_forward(corrupted_batch, params.weight, params.enc_bias, noise);
  Matrix dhidden = Matrix::Zero(fwd.hidden.rows(), fwd.hidden.cols());
  res.value = detail::auto_term(clean_batch, fwd, params.weight, params.dec_bias,
                                1.0, res.grad.weight, res.grad.dec_bias, dhidden);
  detail::encoder_backward(corrupted_batch, fwd, dhidden, res.grad.weight,
                           res.grad.enc_bias);
  if (hidden_out != nullptr) *hidden_out = std::move(fwd.hidden);
  return res;
}

/// Fan-in scaled init: weights U[-1/sqrt(K), 1/sqrt(K)], biases zero.
inline AutoencoderParams init_autoencoder(Index hidden_units, Index input_dim, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(input_dim));
  std::uniform_real_distribution<double> u(-bound, bound);
  AutoencoderParams p;
  p.weight.resize(hidden_units, input_dim);
  for (Index j = 0; j < input_dim; ++j)
    for (Index i = 0; i < hidden_units; ++i) p.weight(i, j) = u(rng);
  p.enc_bias = Vector::Zero(hidden_units);
  p.dec_bias = Vector::Zero(input_dim);
  return p;
}

}  // namespace npga
