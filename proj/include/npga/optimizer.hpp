#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "npga/common.hpp"

namespace npga {

/// Nonlinear CG settings. Backtracking (Armijo) line search; Polak-Ribiere+
/// directions with periodic steepest-descent restarts.
struct CgOptions {
  int max_iters = 100;
  double gradient_tolerance = 0.0;
  double initial_step = 1.0;
  double shrink = 0.5;
  double sufficient_decrease = 1e-4;
  int restart_period = 20;
  int max_line_search_steps = 40;

  void validate() const {
    if (max_iters < 0) throw InvalidSpecError("cg: max_iters must be >= 0");
    if (!(gradient_tolerance >= 0.0)) {
      throw InvalidSpecError("cg: gradient_tolerance must be >= 0");
    }
    if (!(initial_step > 0.0)) throw InvalidSpecError("cg: initial_step must be > 0");
    if (!(shrink > 0.0 && shrink < 1.0)) {
      throw InvalidSpecError("cg: shrink factor must be in (0,1)");
    }
    if (!(sufficient_decrease > 0.0 && sufficient_decrease < 1.0)) {
      throw InvalidSpecError("cg: sufficient_decrease must be in (0,1)");
    }
    if (restart_period < 1) throw InvalidSpecError("cg: restart_period must be >= 1");
  }
};

/// Evaluates cost and writes the gradient (resized by the callee if needed).
using CostGradFn = std::function<double(const Vector&, Vector&)>;

struct CgResult {
  Vector point;
  std::vector<double> trace;  // cost at the start, then after each accepted step
  bool degraded = false;      // line search ran out of shrinks at some iterate
  int iterations = 0;
};

/// Minimizes a deterministic cost. The trace is non-increasing: every step
/// must satisfy the sufficient-decrease condition or the search stops with
/// the degraded flag set (it never throws for line-search failure).
inline CgResult cg_minimize(const CostGradFn& cost_grad, Vector initial,
                            const CgOptions& options) {
  options.validate();
  CgResult res;
  res.point = std::move(initial);
  if (options.max_iters == 0) return res;

  const Index dim = res.point.size();
  Vector grad(dim), new_grad(dim), direction(dim), trial(dim);
  double cost = cost_grad(res.point, grad);
  res.trace.push_back(cost);

  double prev_step = options.initial_step;
  for (int iter = 0; iter < options.max_iters; ++iter) {
    const double gnorm = grad.norm();
    if (gnorm <= options.gradient_tolerance) break;

    if (iter == 0 || iter % options.restart_period == 0) {
      direction = -grad;
    }
    double slope = grad.dot(direction);
    if (slope >= 0.0) {  // not a descent direction: fall back to steepest
      direction = -grad;
      slope = -grad.squaredNorm();
    }

    // Backtracking line search from a step that adapts to the last accepted
    // one (growth allowed, so flat objectives are not starved).
    double step = (iter == 0) ? options.initial_step : 4.0 * prev_step;
    bool accepted = false;
    double trial_cost = 0.0;
    for (int ls = 0; ls < options.max_line_search_steps; ++ls) {
      trial = res.point + step * direction;
      trial_cost = cost_grad(trial, new_grad);
      if (std::isfinite(trial_cost) &&
          trial_cost <= cost + options.sufficient_decrease * step * slope) {
        accepted = true;
        break;
      }
      step *= options.shrink;
    }
    if (!accepted) {
      res.degraded = true;
      break;
    }
    prev_step = step;
    res.point.swap(trial);

    // Polak-Ribiere+ coefficient, clamped at zero (automatic reset).
    const double denom = grad.squaredNorm();
    double beta = new_grad.dot(new_grad - grad) / denom;
    if (beta < 0.0) beta = 0.0;
    direction = -new_grad + beta * direction;
    grad.swap(new_grad);
    cost = trial_cost;
    res.trace.push_back(cost);
    res.iterations = iter + 1;
  }
  return res;
}

}  // namespace npga
