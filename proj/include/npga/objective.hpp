#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "npga/autoencoder.hpp"
#include "npga/common.hpp"
#include "npga/data.hpp"
#include "npga/guidance.hpp"
#include "npga/optimizer.hpp"

namespace npga {

// ---------------------------------------------------------------------------
// Model configuration
// ---------------------------------------------------------------------------

/// Partitioned parametric head, the baseline counterpart of a GP spec:
/// softmax for discrete targets, least squares for continuous ones.
struct ParametricHeadSpec {
  enum class Kind { logistic, gaussian };
  Index partition_begin = 0;
  Index partition_end = 0;
  std::string target_label_set;
  Kind kind = Kind::logistic;

  Index partition_width() const { return partition_end - partition_begin; }

  void validate(Index hidden_units) const {
    if (partition_begin < 0 || partition_end > hidden_units ||
        partition_begin >= partition_end) {
      throw InvalidSpecError("head spec: partition out of range");
    }
  }
};

/// Which encoding the guidance costs see. `shared_noisy` reuses L_auto's
/// corrupted, noisy-activation hidden batch; `clean` gives guidance the
/// deterministic encoding of the clean inputs (the input noise stays confined
/// to L_auto, which resolves the corruption-in-the-GP-path ambiguity in favor
/// of a far less jittery guidance signal).
enum class GuidancePath { shared_noisy, clean };

struct ModelConfig {
  double alpha = 0.5;
  double beta = 1.0;
  Index hidden_units = 250;
  CorruptionSpec corruption;
  std::vector<GpGuidanceSpec> gp_specs;
  bool lr_enabled = false;
  std::string lr_target = "class";
  std::vector<ParametricHeadSpec> head_specs;
  bool noisy_activations = true;
  GuidancePath guidance_path = GuidancePath::clean;
  Index minibatch_size = 350;
  int cg_iters_per_batch = 3;
  int epochs = 1;
  std::uint64_t seed = 0;
  CgOptions cg;

  bool has_parametric_guidance() const { return lr_enabled || !head_specs.empty(); }

  /// Beta with the no-parametric-head rule applied: without a parametric
  /// term there is nothing at beta < 1, so beta is forced to 1.
  double effective_beta() const { return has_parametric_guidance() ? beta : 1.0; }

  void validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidSpecError("alpha must be in [0,1]");
    if (!(beta >= 0.0 && beta <= 1.0)) throw InvalidSpecError("beta must be in [0,1]");
    if (hidden_units < 1) throw InvalidSpecError("hidden_units must be >= 1");
    if (minibatch_size < 1) throw InvalidSpecError("minibatch_size must be >= 1");
    if (cg_iters_per_batch < 1) throw InvalidSpecError("cg_iters_per_batch must be >= 1");
    if (epochs < 1) throw InvalidSpecError("epochs must be >= 1");
    corruption.validate();
    cg.validate();
    if (lr_enabled && !head_specs.empty()) {
      throw InvalidSpecError("lr_enabled and head_specs are mutually exclusive");
    }
    std::vector<std::pair<Index, Index>> ranges;
    for (const auto& s : gp_specs) {
      s.validate(hidden_units);
      ranges.push_back({s.partition_begin, s.partition_end});
    }
    std::sort(ranges.begin(), ranges.end());
    for (size_t i = 1; i < ranges.size(); ++i) {
      if (ranges[i].first < ranges[i - 1].second) {
        throw InvalidSpecError("gp spec partitions overlap");
      }
    }
    for (const auto& h : head_specs) h.validate(hidden_units);
  }
};

// ---------------------------------------------------------------------------
// Flat parameter layout
// ---------------------------------------------------------------------------

struct ParamBlock {
  std::string name;
  Index rows = 0;
  Index cols = 0;  // 1 for vectors
  Index offset = 0;

  Index size() const { return rows * cols; }
};

/// Deterministic mapping between named parameter blocks and one flat vector:
/// autoencoder (weight, enc_bias, dec_bias), then each projection, then any
/// parametric head parameters.
struct ParamLayout {
  std::vector<ParamBlock> blocks;
  Index total = 0;
  Index input_dim = 0;
  Index hidden_units = 0;

  const ParamBlock& block(const std::string& name) const {
    for (const auto& b : blocks)
      if (b.name == name) return b;
    throw LayoutError("no parameter block named '" + name + "'");
  }

  bool has_block(const std::string& name) const {
    for (const auto& b : blocks)
      if (b.name == name) return true;
    return false;
  }

  static ParamLayout from_config(const ModelConfig& config, Index input_dim,
                                 const std::map<std::string, Index>& label_widths) {
    config.validate();
    ParamLayout l;
    l.input_dim = input_dim;
    l.hidden_units = config.hidden_units;
    auto push = [&l](const std::string& name, Index rows, Index cols) {
      l.blocks.push_back({name, rows, cols, l.total});
      l.total += rows * cols;
    };
    push("weight", config.hidden_units, input_dim);
    push("enc_bias", config.hidden_units, 1);
    push("dec_bias", input_dim, 1);
    for (size_t i = 0; i < config.gp_specs.size(); ++i) {
      const auto& s = config.gp_specs[i];
      push("gamma" + std::to_string(i), s.latent_dim(), s.partition_width());
    }
    auto width_of = [&label_widths](const std::string& name) {
      auto it = label_widths.find(name);
      if (it == label_widths.end()) {
        throw LayoutError("no label width recorded for target '" + name + "'");
      }
      return it->second;
    };
    if (config.lr_enabled) {
      const Index m = width_of(config.lr_target);
      push("lr_weights", m, config.hidden_units);
      push("lr_bias", m, 1);
    }
    for (size_t i = 0; i < config.head_specs.size(); ++i) {
      const auto& h = config.head_specs[i];
      const Index m = width_of(h.target_label_set);
      push("head" + std::to_string(i) + "_weights", m, h.partition_width());
      push("head" + std::to_string(i) + "_bias", m, 1);
    }
    return l;
  }

  static ParamLayout from_config(const ModelConfig& config, const Dataset& data) {
    std::map<std::string, Index> widths;
    for (const auto& l : data.label_sets) widths[l.name] = l.width();
    return from_config(config, data.dim(), widths);
  }

  void check_vector(const ConstVectorRef& v) const {
    if (v.size() != total) {
      throw LayoutError("parameter vector has length " + std::to_string(v.size()) +
                        ", layout expects " + std::to_string(total));
    }
  }

  Eigen::Map<const Matrix> matrix_view(const ConstVectorRef& v, const std::string& name) const {
    check_vector(v);
    const ParamBlock& b = block(name);
    return Eigen::Map<const Matrix>(v.data() + b.offset, b.rows, b.cols);
  }

  Eigen::Map<Matrix> matrix_view(Vector& v, const std::string& name) const {
    check_vector(v);
    const ParamBlock& b = block(name);
    return Eigen::Map<Matrix>(v.data() + b.offset, b.rows, b.cols);
  }

  Eigen::Map<const Vector> vector_view(const ConstVectorRef& v, const std::string& name) const {
    check_vector(v);
    const ParamBlock& b = block(name);
    return Eigen::Map<const Vector>(v.data() + b.offset, b.size());
  }

  Eigen::Map<Vector> vector_view(Vector& v, const std::string& name) const {
    check_vector(v);
    const ParamBlock& b = block(name);
    return Eigen::Map<Vector>(v.data() + b.offset, b.size());
  }
};

// ---------------------------------------------------------------------------
// Owning parameter bundle and pack/unpack
// ---------------------------------------------------------------------------

struct ModelParams {
  AutoencoderParams autoenc;
  std::vector<Matrix> projections;          // one per gp spec
  std::optional<LrGuidanceSpec> lr;         // full-hidden softmax head
  std::vector<LrGuidanceSpec> heads;        // partitioned parametric heads
};

inline Vector pack(const ModelParams& p, const ParamLayout& layout) {
  Vector flat(layout.total);
  layout.matrix_view(flat, "weight") = p.autoenc.weight;
  layout.vector_view(flat, "enc_bias") = p.autoenc.enc_bias;
  layout.vector_view(flat, "dec_bias") = p.autoenc.dec_bias;
  for (size_t i = 0; i < p.projections.size(); ++i) {
    layout.matrix_view(flat, "gamma" + std::to_string(i)) = p.projections[i];
  }
  if (p.lr.has_value()) {
    layout.matrix_view(flat, "lr_weights") = p.lr->weights;
    layout.vector_view(flat, "lr_bias") = p.lr->bias;
  }
  for (size_t i = 0; i < p.heads.size(); ++i) {
    layout.matrix_view(flat, "head" + std::to_string(i) + "_weights") = p.heads[i].weights;
    layout.vector_view(flat, "head" + std::to_string(i) + "_bias") = p.heads[i].bias;
  }
  return flat;
}

inline ModelParams unpack(const ConstVectorRef& flat, const ParamLayout& layout) {
  layout.check_vector(flat);
  ModelParams p;
  p.autoenc.weight = layout.matrix_view(flat, "weight");
  p.autoenc.enc_bias = layout.vector_view(flat, "enc_bias");
  p.autoenc.dec_bias = layout.vector_view(flat, "dec_bias");
  for (size_t i = 0; layout.has_block("gamma" + std::to_string(i)); ++i) {
    p.projections.push_back(layout.matrix_view(flat, "gamma" + std::to_string(i)));
  }
  if (layout.has_block("lr_weights")) {
    p.lr = LrGuidanceSpec{layout.matrix_view(flat, "lr_weights"),
                          layout.vector_view(flat, "lr_bias")};
  }
  for (size_t i = 0; layout.has_block("head" + std::to_string(i) + "_weights"); ++i) {
    p.heads.push_back(LrGuidanceSpec{
        layout.matrix_view(flat, "head" + std::to_string(i) + "_weights"),
        layout.vector_view(flat, "head" + std::to_string(i) + "_bias")});
  }
  return p;
}

// ---------------------------------------------------------------------------
// Blended objective
// ---------------------------------------------------------------------------

struct BlendedResult {
  double value = 0.0;
  Vector grad;
  // Unweighted term values, for traces and diagnostics. A term that did not
  // enter the blend (zero coefficient) reports 0.
  double l_auto = 0.0;
  double l_gp = 0.0;
  double l_parametric = 0.0;
};

namespace detail {

inline const LabelSet& find_labels(const std::vector<LabelSet>& labels,
                                   const std::string& name) {
  for (const auto& l : labels)
    if (l.name == name) return l;
  throw InvalidInputError("no label set named '" + name + "' in batch");
}

}  // namespace detail

/// Blended cost over one batch with all noise held fixed (corrupted batch and
/// optional additive pre-activation noise supplied by the caller):
///   L = (1 - alpha) L_auto + alpha ((1 - beta) L_param + beta L_GP)
/// with L_GP the unweighted mean over GP specs (and likewise L_param over
/// partitioned heads). Every cost term sees the same hidden batch.
inline BlendedResult blended_cost_and_grad_fixed(
    const ConstMatrixRef& clean_batch, const ConstMatrixRef& corrupted_batch,
    const Matrix* activation_noise, const std::vector<LabelSet>& labels,
    const ModelConfig& config, const ParamLayout& layout,
    const ConstVectorRef& params) {
  layout.check_vector(params);
  require_shape(clean_batch.rows() == corrupted_batch.rows() &&
                    clean_batch.cols() == corrupted_batch.cols(),
                "blended cost: clean/corrupted shapes differ");
  require_shape(clean_batch.cols() == layout.input_dim,
                "blended cost: batch dimension does not match layout");
  if (clean_batch.rows() == 0) throw InvalidInputError("blended cost: empty batch");

  const double alpha = config.alpha;
  const double beta = config.effective_beta();

  BlendedResult res;
  res.grad = Vector::Zero(layout.total);

  auto weight = layout.matrix_view(params, "weight");
  auto enc_bias = layout.vector_view(params, "enc_bias");
  auto dec_bias = layout.vector_view(params, "dec_bias");
  auto dweight = layout.matrix_view(res.grad, "weight");
  auto denc_bias = layout.vector_view(res.grad, "enc_bias");
  auto ddec_bias = layout.vector_view(res.grad, "dec_bias");

  const bool guidance_active =
      alpha > 0.0 && ((beta > 0.0 && !config.gp_specs.empty()) ||
                      (beta < 1.0 && config.has_parametric_guidance()));
  const bool clean_guidance =
      guidance_active && config.guidance_path == GuidancePath::clean;

  detail::EncoderForward fwd =
      detail::encoder_forward(corrupted_batch, weight, enc_bias, activation_noise);
  Matrix dhidden = Matrix::Zero(fwd.hidden.rows(), fwd.hidden.cols());

  // Guidance either shares L_auto's noisy hidden batch or gets its own
  // noise-free encoding of the clean inputs.
  detail::EncoderForward clean_fwd;
  Matrix dhidden_clean;
  if (clean_guidance) {
    clean_fwd = detail::encoder_forward(clean_batch, weight, enc_bias, nullptr);
    dhidden_clean = Matrix::Zero(clean_fwd.hidden.rows(), clean_fwd.hidden.cols());
  }
  const Matrix& guide_hidden = clean_guidance ? clean_fwd.hidden : fwd.hidden;
  Matrix& dguide = clean_guidance ? dhidden_clean : dhidden;

  if (alpha < 1.0) {
    res.l_auto = detail::auto_term(clean_batch, fwd, weight, dec_bias,
                                   1.0 - alpha, dweight, ddec_bias, dhidden);
    res.value += (1.0 - alpha) * res.l_auto;
  }

  if (alpha > 0.0 && beta > 0.0 && !config.gp_specs.empty()) {
    const double coeff =
        alpha * beta / static_cast<double>(config.gp_specs.size());
    double gp_total = 0.0;
    for (size_t i = 0; i < config.gp_specs.size(); ++i) {
      GpGuidanceSpec spec = config.gp_specs[i];
      spec.projection = layout.matrix_view(params, "gamma" + std::to_string(i));
      const LabelSet& targets = detail::find_labels(labels, spec.target_label_set);
      GpCostResult gp = l_gp_and_grad(guide_hidden, spec, targets.values);
      gp_total += gp.value;
      dguide.middleCols(spec.partition_begin, spec.partition_width()) +=
          coeff * gp.grad_partition;
      layout.matrix_view(res.grad, "gamma" + std::to_string(i)) +=
          coeff * gp.grad_projection;
    }
    res.l_gp = gp_total / static_cast<double>(config.gp_specs.size());
    res.value += alpha * beta * res.l_gp;
  }

  // The parametric costs are defined as batch means; inside the blend they
  // are weighted per example (times N) so that beta trades off guidance terms
  // of comparable magnitude against the batch-summed L_auto and L_GP.
  const double param_scale = static_cast<double>(clean_batch.rows());
  if (alpha > 0.0 && beta < 1.0 && config.has_parametric_guidance()) {
    if (config.lr_enabled) {
      LrGuidanceSpec spec{layout.matrix_view(params, "lr_weights"),
                          layout.vector_view(params, "lr_bias")};
      const LabelSet& targets = detail::find_labels(labels, config.lr_target);
      LrCostResult lr = l_lr_and_grad(guide_hidden, spec, targets.values);
      res.l_parametric = param_scale * lr.value;
      const double coeff = alpha * (1.0 - beta) * param_scale;
      dguide += coeff * lr.grad_hidden;
      layout.matrix_view(res.grad, "lr_weights") += coeff * lr.grad_weights;
      layout.vector_view(res.grad, "lr_bias") += coeff * lr.grad_bias;
    } else {
      const double coeff = alpha * (1.0 - beta) * param_scale /
                           static_cast<double>(config.head_specs.size());
      double head_total = 0.0;
      for (size_t i = 0; i < config.head_specs.size(); ++i) {
        const auto& h = config.head_specs[i];
        LrGuidanceSpec spec{
            layout.matrix_view(params, "head" + std::to_string(i) + "_weights"),
            layout.vector_view(params, "head" + std::to_string(i) + "_bias")};
        const LabelSet& targets = detail::find_labels(labels, h.target_label_set);
        const auto slab =
            guide_hidden.middleCols(h.partition_begin, h.partition_width());
        LrCostResult r = (h.kind == ParametricHeadSpec::Kind::logistic)
                             ? l_lr_and_grad(slab, spec, targets.values)
                             : l_linreg_and_grad(slab, spec, targets.values);
        head_total += r.value;
        dguide.middleCols(h.partition_begin, h.partition_width()) +=
            coeff * r.grad_hidden;
        layout.matrix_view(res.grad, "head" + std::to_string(i) + "_weights") +=
            coeff * r.grad_weights;
        layout.vector_view(res.grad, "head" + std::to_string(i) + "_bias") +=
            coeff * r.grad_bias;
      }
      res.l_parametric =
          param_scale * head_total / static_cast<double>(config.head_specs.size());
    }
    res.value += alpha * (1.0 - beta) * res.l_parametric;
  }

  detail::encoder_backward(corrupted_batch, fwd, dhidden, dweight, denc_bias);
  if (clean_guidance) {
    detail::encoder_backward(clean_batch, clean_fwd, dhidden_clean, dweight, denc_bias);
  }
  return res;
}

/// Convenience wrapper that draws corruption and activation noise once from
/// the supplied stream, then evaluates the fixed-noise objective.
inline BlendedResult blended_cost_and_grad(const ConstMatrixRef& clean_batch,
                                           const std::vector<LabelSet>& labels,
                                           const ModelConfig& config,
                                           const ParamLayout& layout,
                                           const ConstVectorRef& params, Rng& rng) {
  Matrix corrupted = corrupt(clean_batch, config.corruption, rng);
  Matrix noise;
  const Matrix* noise_ptr = nullptr;
  if (config.noisy_activations) {
    Matrix pre = detail::encoder_preactivation(
        corrupted, layout.matrix_view(params, "weight"),
        layout.vector_view(params, "enc_bias"));
    noise = draw_activation_noise(pre, rng);
    noise_ptr = &noise;
  }
  return blended_cost_and_grad_fixed(clean_batch, corrupted, noise_ptr, labels,
                                     config, layout, params);
}

}  // namespace npga
