#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "npga/common.hpp"

namespace npga {

// ---------------------------------------------------------------------------
// Kernel specification
// ---------------------------------------------------------------------------

enum class KernelKind { linear, rbf, arcsine, periodic };

inline const char* kernel_kind_name(KernelKind k) {
  switch (k) {
    case KernelKind::linear: return "linear";
    case KernelKind::rbf: return "rbf";
    case KernelKind::arcsine: return "arcsine";
    case KernelKind::periodic: return "periodic";
  }
  return "?";
}

inline KernelKind parse_kernel_kind(const std::string& s) {
  if (s == "linear") return KernelKind::linear;
  if (s == "rbf") return KernelKind::rbf;
  if (s == "arcsine") return KernelKind::arcsine;
  if (s == "periodic") return KernelKind::periodic;
  throw InvalidSpecError("unknown kernel kind '" + s + "'");
}

/// Covariance function on the projected latent space. Hyperparameters are
/// fixed at construction time, never optimized.
struct KernelSpec {
  KernelKind kind = KernelKind::rbf;
  double signal_variance = 1.0;
  double lengthscale = 1.0;    // rbf, periodic
  double period = kTwoPi;      // periodic
  double input_weight = 1.0;   // arcsine augmentation scale
  double bias_weight = 1.0;    // arcsine

  void validate() const {
    if (!(signal_variance > 0.0)) {
      throw InvalidSpecError("kernel signal_variance must be > 0");
    }
    if (kind == KernelKind::rbf || kind == KernelKind::periodic) {
      if (!(lengthscale > 0.0)) {
        throw InvalidSpecError("kernel lengthscale must be > 0");
      }
    }
    if (kind == KernelKind::periodic) {
      if (!(period > 0.0) || !std::isfinite(period)) {
        throw InvalidSpecError("kernel period must be finite and > 0");
      }
    }
    if (kind == KernelKind::arcsine) {
      if (!(input_weight > 0.0)) {
        throw InvalidSpecError("kernel input_weight must be > 0");
      }
      if (!(bias_weight > 0.0)) {
        throw InvalidSpecError("kernel bias_weight must be > 0");
      }
    }
  }
};

namespace detail {

// Augmented inner product for the arcsine kernel: with x~ = (1, x) and
// Sigma = diag(bias_weight, input_weight * I), s(x, y) = x~' Sigma y~.
inline double arcsine_s(const KernelSpec& spec, const ConstVectorRef& x,
                        const ConstVectorRef& y) {
  return spec.bias_weight + spec.input_weight * x.dot(y);
}

inline double kernel_value(const KernelSpec& spec, const ConstVectorRef& x,
                           const ConstVectorRef& y) {
  switch (spec.kind) {
    case KernelKind::linear:
      return spec.signal_variance * x.dot(y);
    case KernelKind::rbf: {
      const double d2 = (x - y).squaredNorm();
      return spec.signal_variance *
             std::exp(-d2 / (2.0 * spec.lengthscale * spec.lengthscale));
    }
    case KernelKind::arcsine: {
      const double sxy = arcsine_s(spec, x, y);
      const double qx = 1.0 + 2.0 * arcsine_s(spec, x, x);
      const double qy = 1.0 + 2.0 * arcsine_s(spec, y, y);
      const double u = 2.0 * sxy / std::sqrt(qx * qy);
      return spec.signal_variance * (2.0 / M_PI) * std::asin(u);
    }
    case KernelKind::periodic: {
      double e = 0.0;
      for (Index h = 0; h < x.size(); ++h) {
        const double s = std::sin(M_PI * (x[h] - y[h]) / spec.period);
        e += s * s;
      }
      return spec.signal_variance *
             std::exp(-2.0 * e / (spec.lengthscale * spec.lengthscale));
    }
  }
  return 0.0;
}

// Partial of k(x, y) with respect to the first argument x, written into out.
inline void kernel_grad_first_into(const KernelSpec& spec, const ConstVectorRef& x,
                                   const ConstVectorRef& y, Vector& out) {
  switch (spec.kind) {
    case KernelKind::linear:
      out = spec.signal_variance * y;
      return;
    case KernelKind::rbf: {
      const double ls2 = spec.lengthscale * spec.lengthscale;
      const double k = kernel_value(spec, x, y);
      out = (-k / ls2) * (x - y);
      return;
    }
    case KernelKind::arcsine: {
      const double w = spec.input_weight;
      const double sxy = arcsine_s(spec, x, y);
      const double qx = 1.0 + 2.0 * arcsine_s(spec, x, x);
      const double qy = 1.0 + 2.0 * arcsine_s(spec, y, y);
      const double den = std::sqrt(qx * qy);
      const double u = 2.0 * sxy / den;
      // du/dx = (2w/den) * (y - (2 sxy / qx) x); |u| < 1 strictly by
      // Cauchy-Schwarz on the augmented inputs, so asin' is finite.
      const double scale =
          spec.signal_variance * (2.0 / M_PI) / std::sqrt(1.0 - u * u);
      out = (scale * 2.0 * w / den) * (y - (2.0 * sxy / qx) * x);
      return;
    }
    case KernelKind::periodic: {
      const double k = kernel_value(spec, x, y);
      const double ls2 = spec.lengthscale * spec.lengthscale;
      out.resize(x.size());
      for (Index h = 0; h < x.size(); ++h) {
        out[h] = -k * (2.0 * M_PI / (ls2 * spec.period)) *
                 std::sin(2.0 * M_PI * (x[h] - y[h]) / spec.period);
      }
      return;
    }
  }
  out = Vector::Zero(x.size());
}

inline Vector kernel_grad_first(const KernelSpec& spec, const ConstVectorRef& x,
                                const ConstVectorRef& y) {
  Vector out(x.size());
  kernel_grad_first_into(spec, x, y, out);
  return out;
}

// Rows copied out once so the hot pair loops bind contiguous vectors.
inline std::vector<Vector> cache_rows(const ConstMatrixRef& m) {
  std::vector<Vector> rows(static_cast<size_t>(m.rows()));
  for (Index i = 0; i < m.rows(); ++i) rows[static_cast<size_t>(i)] = m.row(i).transpose();
  return rows;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Gram matrices
// ---------------------------------------------------------------------------

/// Cross-covariance matrix between two point sets (rows are points).
inline Matrix gram(const ConstMatrixRef& points_a, const ConstMatrixRef& points_b,
                   const KernelSpec& spec) {
  spec.validate();
  require_shape(points_a.cols() == points_b.cols(),
                "gram: point sets have different dimension");
  require_shape(points_a.cols() >= 1, "gram: points must have dimension >= 1");
  require_finite(points_a, "gram points");
  require_finite(points_b, "gram points");
  const std::vector<Vector> ra = detail::cache_rows(points_a);
  const std::vector<Vector> rb = detail::cache_rows(points_b);
  Matrix out(points_a.rows(), points_b.rows());
  for (Index i = 0; i < points_a.rows(); ++i) {
    for (Index j = 0; j < points_b.rows(); ++j) {
      out(i, j) = detail::kernel_value(spec, ra[static_cast<size_t>(i)],
                                       rb[static_cast<size_t>(j)]);
    }
  }
  return out;
}

/// Self-covariance matrix; symmetric by construction.
inline Matrix gram(const ConstMatrixRef& points, const KernelSpec& spec) {
  spec.validate();
  require_shape(points.cols() >= 1, "gram: points must have dimension >= 1");
  require_finite(points, "gram points");
  const Index n = points.rows();
  const std::vector<Vector> rows = detail::cache_rows(points);
  Matrix out(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i; j < n; ++j) {
      const double v = detail::kernel_value(spec, rows[static_cast<size_t>(i)],
                                            rows[static_cast<size_t>(j)]);
      out(i, j) = v;
      out(j, i) = v;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gram gradient with respect to the input points
// ---------------------------------------------------------------------------

/// Partials of a self-Gram matrix with respect to its input points.
///
/// K[n,m] depends on points only through rows n and m, so the full tensor
/// dK[n,m]/dpoints[i,h] is stored compactly as the first-slot partials
/// first_slot[h](n,m) = dK[n,m]/dpoints[n,h]; the second-slot partial follows
/// from the symmetry of the kernel in its two arguments.
struct GramPointGrad {
  std::vector<Matrix> first_slot;  // one N x N matrix per input dimension

  Index dim() const { return static_cast<Index>(first_slot.size()); }
  Index n() const { return first_slot.empty() ? 0 : first_slot[0].rows(); }

  /// dK[n,m]/dpoints[i,h] assembled from the compact storage.
  double partial(Index n_, Index m, Index i, Index h) const {
    double v = 0.0;
    if (i == n_) v += first_slot[static_cast<size_t>(h)](n_, m);
    if (i == m) v += first_slot[static_cast<size_t>(h)](m, n_);
    return v;
  }

  /// Chain rule contraction: given dcost/dK, returns dcost/dpoints (N x H).
  Matrix chain(const ConstMatrixRef& dcost_dgram) const {
    require_shape(dcost_dgram.rows() == n() && dcost_dgram.cols() == n(),
                  "GramPointGrad::chain: dcost/dK has wrong shape");
    Matrix out(n(), dim());
    const Matrix sym = dcost_dgram + dcost_dgram.transpose();
    for (Index h = 0; h < dim(); ++h) {
      out.col(h) =
          (sym.array() * first_slot[static_cast<size_t>(h)].array())
              .rowwise()
              .sum();
    }
    return out;
  }
};

inline GramPointGrad gram_grad_points(const ConstMatrixRef& points,
                                      const KernelSpec& spec) {
  spec.validate();
  require_finite(points, "gram_grad_points points");
  const Index n = points.rows();
  const Index h = points.cols();
  const std::vector<Vector> rows = detail::cache_rows(points);
  GramPointGrad g;
  g.first_slot.assign(static_cast<size_t>(h), Matrix::Zero(n, n));
  Vector d(h);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      detail::kernel_grad_first_into(spec, rows[static_cast<size_t>(i)],
                                     rows[static_cast<size_t>(j)], d);
      for (Index c = 0; c < h; ++c) g.first_slot[static_cast<size_t>(c)](i, j) = d[c];
    }
  }
  return g;
}

}  // namespace npga
