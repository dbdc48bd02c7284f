#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "npga/data.hpp"
#include "npga/guidance.hpp"
#include "npga/objective.hpp"
#include "npga/optimizer.hpp"

namespace npga {

// ---------------------------------------------------------------------------
// Linear probes
// ---------------------------------------------------------------------------

struct ProbeParams {
  Matrix weights;  // M x F
  Vector bias;     // M
};

/// Fits a softmax probe on frozen features: cross-entropy plus
/// l2_strength * ||weights||^2, minimized by CG from zero init. The objective
/// is convex, so the fit is deterministic.
inline ProbeParams fit_probe(const ConstMatrixRef& features,
                             const ConstMatrixRef& one_hot_labels,
                             double l2_strength, const CgOptions& budget) {
  require_shape(features.rows() == one_hot_labels.rows(),
                "fit_probe: features/labels row mismatch");
  if (!(l2_strength >= 0.0)) {
    throw InvalidSpecError("fit_probe: l2_strength must be >= 0");
  }
  const Index f = features.cols();
  const Index m = one_hot_labels.cols();

  CostGradFn fn = [&](const Vector& flat, Vector& grad) {
    LrGuidanceSpec spec{Eigen::Map<const Matrix>(flat.data(), m, f),
                        flat.tail(m)};
    LrCostResult r = l_lr_and_grad(features, spec, one_hot_labels);
    grad.resize(flat.size());
    Eigen::Map<Matrix>(grad.data(), m, f) =
        r.grad_weights + 2.0 * l2_strength * spec.weights;
    grad.tail(m) = r.grad_bias;
    return r.value + l2_strength * spec.weights.squaredNorm();
  };
  CgResult r = cg_minimize(fn, Vector::Zero(m * f + m), budget);
  ProbeParams p;
  p.weights = Eigen::Map<const Matrix>(r.point.data(), m, f);
  p.bias = r.point.tail(m);
  return p;
}

inline ProbeParams fit_probe(const ConstMatrixRef& features,
                             const ConstMatrixRef& one_hot_labels,
                             double l2_strength = 1e-4) {
  CgOptions budget;
  budget.max_iters = 1000;
  budget.gradient_tolerance = 1e-9;
  return fit_probe(features, one_hot_labels, l2_strength, budget);
}

/// Fraction of rows whose argmax prediction matches the argmax label.
/// Ties break toward the lowest class index on both sides.
inline double probe_accuracy(const ProbeParams& probe, const ConstMatrixRef& features,
                             const ConstMatrixRef& one_hot_labels) {
  require_shape(features.rows() == one_hot_labels.rows(),
                "probe_accuracy: row mismatch");
  require_shape(features.cols() == probe.weights.cols(),
                "probe_accuracy: feature width mismatch");
  if (features.rows() == 0) return 0.0;
  Matrix logits = (features * probe.weights.transpose()).rowwise() + probe.bias.transpose();
  Index correct = 0;
  for (Index i = 0; i < logits.rows(); ++i) {
    Index pred = 0, truth = 0;
    logits.row(i).maxCoeff(&pred);
    one_hot_labels.row(i).maxCoeff(&truth);
    if (pred == truth) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(features.rows());
}

// ---------------------------------------------------------------------------
// Latent export
// ---------------------------------------------------------------------------

struct LatentExport {
  std::vector<std::string> columns;
  Matrix table;  // one row per example
};

/// Deterministic (noise-free) latent coordinates of one GP spec's projected
/// space, with every label set appended: discrete sets as a single class
/// index column, continuous/periodic sets with their value columns.
inline LatentExport export_latent(const Dataset& dataset, const ModelConfig& config,
                                  const ParamLayout& layout, const ConstVectorRef& params,
                                  size_t spec_index) {
  if (spec_index >= config.gp_specs.size()) {
    throw InvalidInputError("export_latent: spec index " + std::to_string(spec_index) +
                            " out of range");
  }
  layout.check_vector(params);
  ModelParams p = unpack(params, layout);
  GpGuidanceSpec spec = config.gp_specs[spec_index];
  spec.projection = p.projections[spec_index];

  Matrix hidden = encode_batch(dataset.features, p.autoenc, EncodeMode::deterministic);
  Matrix coords = hidden.middleCols(spec.partition_begin, spec.partition_width()) *
                  spec.projection.transpose();  // N x H

  LatentExport out;
  Index label_cols = 0;
  for (const auto& l : dataset.label_sets) {
    label_cols += (l.kind == LabelKind::discrete) ? 1 : l.width();
  }
  out.table.resize(dataset.n(), coords.cols() + label_cols);
  out.table.leftCols(coords.cols()) = coords;
  for (Index h = 0; h < coords.cols(); ++h) {
    out.columns.push_back("latent_" + std::to_string(h));
  }
  Index col = coords.cols();
  for (const auto& l : dataset.label_sets) {
    if (l.kind == LabelKind::discrete) {
      std::vector<Index> idx = argmax_rows(l.values);
      for (Index i = 0; i < dataset.n(); ++i) {
        out.table(i, col) = static_cast<double>(idx[static_cast<size_t>(i)]);
      }
      out.columns.push_back(l.name);
      ++col;
    } else {
      for (Index j = 0; j < l.width(); ++j) {
        out.table.col(col) = l.values.col(j);
        out.columns.push_back(l.width() == 1 ? l.name : l.name + "_" + std::to_string(j));
        ++col;
      }
    }
  }
  return out;
}

/// Writes a table as delimited text with a header row.
inline void write_delimited(const LatentExport& e, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInputError("cannot write '" + path + "'");
  out.precision(17);
  for (size_t i = 0; i < e.columns.size(); ++i) {
    if (i) out << ' ';
    out << e.columns[i];
  }
  out << "\n";
  for (Index i = 0; i < e.table.rows(); ++i) {
    for (Index j = 0; j < e.table.cols(); ++j) {
      if (j) out << ' ';
      out << e.table(i, j);
    }
    out << "\n";
  }
}

}  // namespace npga
