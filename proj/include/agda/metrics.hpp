#pragma once

// Potential-function metrics shared by the solvers and the diagnostics.

#include "agda/problems.hpp"

namespace agda {

struct Potential {
  double a;  // g(x) - g*
  double b;  // g(x) - f(x, y)
  double P;  // a + weight * b
};

/// P = a + weight * b with a = g(x) - g* and b = g(x) - f(x, y).
[[nodiscard]] inline Potential potential(const MinimaxProblem& p, const Iterate& it, double weight) {
  if (!(weight > 0.0)) throw std::invalid_argument("potential: weight must be positive");
  const double a = p.g_gap(it.x);
  const double b = p.response_gap(it);
  return {a, b, a + weight * b};
}

/// Snapshot of the metrics at one checkpoint. Potential fields stay empty for
/// problems without an exact best response.
[[nodiscard]] inline TraceRecord make_record(const MinimaxProblem& p, const Iterate& it, std::uint64_t iter,
                                             std::uint64_t grad_evals, double weight) {
  TraceRecord r;
  r.iter = iter;
  r.grad_evals = grad_evals;
  if (it.is_finite()) {
    const Gradient g = p.grad(it);
    r.grad_x_norm = g.gx.norm();
    r.grad_y_norm = g.gy.norm();
    if (p.has_exact_best_response()) {
      const Potential pot = potential(p, it, weight);
      r.a = pot.a;
      r.b = pot.b;
      r.potential = pot.P;
    }
    if (auto s = p.saddle()) r.dist_to_saddle_sq = it.squared_distance(*s);
  } else {
    r.grad_x_norm = r.grad_y_norm = std::numeric_limits<double>::infinity();
  }
  return r;
}

}  // namespace agda
