#pragma once

#include <numeric>
#include <string>
#include <vector>

#include "npga/data.hpp"
#include "npga/objective.hpp"
#include "npga/optimizer.hpp"

namespace npga {

struct TraceRow {
  int epoch = 0;
  Index minibatch = 0;
  double cost_before = 0.0;
  double cost_after = 0.0;
};

struct TrainResult {
  Vector params;
  ParamLayout layout;
  std::vector<TraceRow> trace;
  bool degraded = false;
};

/// Seeded fresh initialization: autoencoder weights at fan-in scale, each
/// projection uniform in [-1/sqrt(P), 1/sqrt(P)], parametric heads at zero.
/// Each block draws from its own named stream, so configurations that share a
/// seed agree on every block they have in common.
inline Vector init_params(const ModelConfig& config, const ParamLayout& layout) {
  Vector flat = Vector::Zero(layout.total);
  {
    Rng rng = make_rng(config.seed, "init/ae");
    const double bound = 1.0 / std::sqrt(static_cast<double>(layout.input_dim));
    std::uniform_real_distribution<double> u(-bound, bound);
    auto w = layout.matrix_view(flat, "weight");
    for (Index j = 0; j < w.cols(); ++j)
      for (Index i = 0; i < w.rows(); ++i) w(i, j) = u(rng);
  }
  for (size_t i = 0; i < config.gp_specs.size(); ++i) {
    Rng rng = make_rng(config.seed, "init/gamma/" + std::to_string(i));
    const double bound =
        1.0 / std::sqrt(static_cast<double>(config.gp_specs[i].partition_width()));
    std::uniform_real_distribution<double> u(-bound, bound);
    auto g = layout.matrix_view(flat, "gamma" + std::to_string(i));
    for (Index j = 0; j < g.cols(); ++j)
      for (Index i2 = 0; i2 < g.rows(); ++i2) g(i2, j) = u(rng);
  }
  return flat;
}

/// Minibatch CG training on the blended objective.
///
/// Per epoch: seeded shuffle, split into minibatches (one full batch when
/// minibatch_size >= N); per minibatch visit, draw the corruption and
/// activation noise once, then run cg_iters_per_batch CG iterations on that
/// frozen-noise objective. Noise streams are separate from init streams.
inline TrainResult train(const Dataset& dataset, const ModelConfig& config,
                         const Vector* initial = nullptr) {
  config.validate();
  if (dataset.n() == 0) throw InvalidInputError("train: empty dataset");
  dataset.validate();
  for (const auto& s : config.gp_specs) {
    if (!dataset.has_label_set(s.target_label_set)) {
      throw InvalidInputError("train: dataset lacks label set '" + s.target_label_set + "'");
    }
  }
  if (config.lr_enabled && !dataset.has_label_set(config.lr_target)) {
    throw InvalidInputError("train: dataset lacks label set '" + config.lr_target + "'");
  }
  for (const auto& h : config.head_specs) {
    if (!dataset.has_label_set(h.target_label_set)) {
      throw InvalidInputError("train: dataset lacks label set '" + h.target_label_set + "'");
    }
  }

  TrainResult res;
  res.layout = ParamLayout::from_config(config, dataset);
  if (initial != nullptr) {
    res.layout.check_vector(*initial);
    res.params = *initial;
  } else {
    res.params = init_params(config, res.layout);
  }

  Rng shuffle_rng = make_rng(config.seed, "train/shuffle");
  Rng noise_rng = make_rng(config.seed, "train/noise");

  const Index n = dataset.n();
  const Index batch = std::min<Index>(config.minibatch_size, n);
  std::vector<Index> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});

  CgOptions cg = config.cg;
  cg.max_iters = config.cg_iters_per_batch;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    Index mb_index = 0;
    for (Index start = 0; start < n; start += batch, ++mb_index) {
      const Index count = std::min(batch, n - start);
      std::vector<Index> idx(order.begin() + start, order.begin() + start + count);
      Dataset mb = dataset.rows(idx);

      Matrix corrupted = corrupt(mb.features, config.corruption, noise_rng);
      Matrix noise;
      const Matrix* noise_ptr = nullptr;
      if (config.noisy_activations) {
        Matrix pre = detail::encoder_preactivation(
            corrupted, res.layout.matrix_view(res.params, "weight"),
            res.layout.vector_view(res.params, "enc_bias"));
        noise = draw_activation_noise(pre, noise_rng);
        noise_ptr = &noise;
      }

      CostGradFn fn = [&](const Vector& x, Vector& g) {
        BlendedResult r = blended_cost_and_grad_fixed(
            mb.features, corrupted, noise_ptr, mb.label_sets, config, res.layout, x);
        g = std::move(r.grad);
        return r.value;
      };
      CgResult cgres = cg_minimize(fn, res.params, cg);
      res.params = std::move(cgres.point);
      res.degraded = res.degraded || cgres.degraded;
      res.trace.push_back({epoch, mb_index, cgres.trace.front(), cgres.trace.back()});
    }
  }
  return res;
}

}  // namespace npga
