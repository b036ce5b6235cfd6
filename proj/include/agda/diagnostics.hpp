#pragma once

// Checks that turn convergence guarantees into runtime verdicts: grid
// certification of the two-sided PL inequalities, per-step contraction and
// 1/t decay of the potential, saddle probing, rate fitting and gradient
// checking by central differences.

#include "agda/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

namespace agda {

/// Axis-aligned box applied coordinate-wise: every x_k in [x_lo, x_hi], every
/// y_k in [y_lo, y_hi].
struct Box {
  double x_lo = -1.0, x_hi = 1.0;
  double y_lo = -1.0, y_hi = 1.0;
};

struct GridSpec {
  Box region;
  Index resolution = 0;  // points per axis
};

struct PlEstimate {
  double mu1_hat = std::numeric_limits<double>::infinity();
  double mu2_hat = std::numeric_limits<double>::infinity();
  std::optional<Iterate> mu1_witness;
  std::optional<Iterate> mu2_witness;
  GridSpec grid;
};

/// Grid lower-bound evidence for the two-sided PL constants:
///   mu1_hat = min ||grad_x f||^2 / (2 (f - min_x f)),
///   mu2_hat = min ||grad_y f||^2 / (2 (max_y f - f)),
/// skipping points whose denominator is below 1e-12.
[[nodiscard]] inline PlEstimate pl_estimate_grid(const MinimaxProblem& p, const Box& region, Index resolution) {
  if (!p.has_exact_best_response() || !p.has_exact_best_response_x())
    throw UnsupportedOperation(p.name() + ": PL estimation needs exact inner min and max");
  if (resolution < 2) throw std::invalid_argument("pl_estimate_grid: resolution must be at least 2");
  if (!(region.x_lo < region.x_hi) || !(region.y_lo < region.y_hi))
    throw std::invalid_argument("pl_estimate_grid: degenerate region");
  const Index dims = p.dim_x() + p.dim_y();
  const double total = std::pow(static_cast<double>(resolution), static_cast<double>(dims));
  if (total > 5e7) throw std::invalid_argument("pl_estimate_grid: grid too large");

  constexpr double kCutoff = 1e-12;
  PlEstimate est;
  est.grid = {region, resolution};
  auto coord = [&](double lo, double hi, Index k) {
    return lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(resolution - 1);
  };

  std::vector<Index> idx(static_cast<std::size_t>(dims), 0);
  Iterate it{Vector(p.dim_x()), Vector(p.dim_y())};
  for (;;) {
    for (Index k = 0; k < p.dim_x(); ++k) it.x[k] = coord(region.x_lo, region.x_hi, idx[k]);
    for (Index k = 0; k < p.dim_y(); ++k) it.y[k] = coord(region.y_lo, region.y_hi, idx[p.dim_x() + k]);

    const double f = p.value(it);
    const Gradient g = p.grad(it);
    const double gap_x = f - p.value(Iterate{p.best_response_x(it.y), it.y});
    const double gap_y = p.value(Iterate{it.x, p.best_response_y(it.x)}) - f;
    if (gap_x >= kCutoff) {
      const double r = g.gx.squaredNorm() / (2.0 * gap_x);
      if (r < est.mu1_hat) {
        est.mu1_hat = r;
        est.mu1_witness = it;
      }
    }
    if (gap_y >= kCutoff) {
      const double r = g.gy.squaredNorm() / (2.0 * gap_y);
      if (r < est.mu2_hat) {
        est.mu2_hat = r;
        est.mu2_witness = it;
      }
    }

    Index k = 0;
    while (k < dims && ++idx[k] == resolution) idx[k++] = 0;
    if (k == dims) break;
  }
  return est;
}

namespace detail {
inline double require_potential(const TraceRecord& r) {
  if (!r.potential) throw std::invalid_argument("trace record has no potential");
  return *r.potential;
}
}  // namespace detail

/// Indices t with P_{t+1} > rho P_t + delta + 1e-12. The trace must hold
/// consecutive iterations.
[[nodiscard]] inline std::vector<std::size_t> contraction_check(const Trace& trace, double rho, double delta) {
  if (trace.size() < 2) throw std::invalid_argument("contraction_check: trace needs at least 2 records");
  std::vector<std::size_t> violations;
  for (std::size_t t = 0; t + 1 < trace.size(); ++t) {
    if (trace[t + 1].iter != trace[t].iter + 1)
      throw std::invalid_argument("contraction_check: trace records are not consecutive iterations");
    const double now = detail::require_potential(trace[t]);
    const double next = detail::require_potential(trace[t + 1]);
    if (next > rho * now + delta + 1e-12) violations.push_back(t);
  }
  return violations;
}

/// Neighbourhood size of the constant-stepsize stochastic bound:
/// [(1 - mu2 tau2)(L + l) tau1^2 + l tau2^2 + 10 L tau1^2] sigma^2 / (10 mu1 tau1).
[[nodiscard]] inline double stochastic_neighbourhood(const ProblemConstants& c, double tau1, double tau2,
                                                     double sigma_sq) {
  const double L = c.g_smoothness();
  return ((1.0 - c.mu2 * tau2) * (L + c.l) * tau1 * tau1 + c.l * tau2 * tau2 + 10.0 * L * tau1 * tau1) * sigma_sq /
         (10.0 * c.mu1 * tau1);
}

/// nu = max over the last 20% of the trace of P_t (gamma + t).
[[nodiscard]] inline double estimate_nu(const Trace& trace, double gamma) {
  if (trace.size() < 2) throw std::invalid_argument("estimate_nu: trace too short");
  const std::size_t begin = trace.size() - std::max<std::size_t>(1, trace.size() / 5);
  double nu = 0.0;
  for (std::size_t k = begin; k < trace.size(); ++k)
    nu = std::max(nu, detail::require_potential(trace[k]) * (gamma + static_cast<double>(trace[k].iter)));
  return nu;
}

/// Trace indices with P_t > 1.05 nu / (gamma + t).
[[nodiscard]] inline std::vector<std::size_t> sublinear_check(const Trace& trace, double nu, double gamma) {
  if (trace.size() < 2) throw std::invalid_argument("sublinear_check: trace needs at least 2 records");
  if (!(nu > 0.0) || !(gamma > 0.0)) throw std::invalid_argument("sublinear_check: nu and gamma must be positive");
  std::vector<std::size_t> violations;
  for (std::size_t k = 0; k < trace.size(); ++k) {
    const double bound = nu / (gamma + static_cast<double>(trace[k].iter)) * 1.05;
    if (detail::require_potential(trace[k]) > bound) violations.push_back(k);
  }
  return violations;
}

/// ||grad g(x)|| = ||grad_x f(x, y*(x))||.
[[nodiscard]] inline double stationarity_of_g(const MinimaxProblem& p, const Vector& x) {
  return p.grad_x(Iterate{x, p.best_response_y(x)}).norm();
}

/// Tests f(x*, y) <= f(x*, y*) + eps and f(x*, y*) <= f(x, y*) + eps for
/// n_probes perturbations drawn uniformly from the unit ball around it.
[[nodiscard]] inline bool saddle_probe(const MinimaxProblem& p, const Iterate& it, double epsilon,
                                       std::uint64_t n_probes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const Index dx = p.dim_x(), dy = p.dim_y();
  const double center = p.value(it);
  for (std::uint64_t k = 0; k < n_probes; ++k) {
    Vector dir(dx + dy);
    for (Index i = 0; i < dir.size(); ++i) dir[i] = normal(rng);
    const double radius = std::pow(unif(rng), 1.0 / static_cast<double>(dir.size()));
    dir *= radius / dir.norm();
    const Vector px = it.x + dir.head(dx);
    const Vector py = it.y + dir.tail(dy);
    if (p.value(Iterate{it.x, py}) > center + epsilon) return false;
    if (center > p.value(Iterate{px, it.y}) + epsilon) return false;
  }
  return true;
}

struct RateFit {
  double rho_hat = 1.0;
  double r_squared = 1.0;
  std::size_t first = 0;  // trace index range [first, last)
  std::size_t last = 0;
};

/// Least-squares fit of log P_t against t over trace[first, last).
[[nodiscard]] inline RateFit rate_fit(const Trace& trace, std::size_t first, std::size_t last) {
  last = std::min(last, trace.size());
  if (last < first + 10) throw std::invalid_argument("rate_fit: need at least 10 trace points");
  double st = 0, sy = 0;
  const double m = static_cast<double>(last - first);
  std::vector<double> ys;
  ys.reserve(last - first);
  for (std::size_t k = first; k < last; ++k) {
    const double P = detail::require_potential(trace[k]);
    if (!(P > 0.0)) throw std::invalid_argument("rate_fit: potential must be positive in the window");
    ys.push_back(std::log(P));
    st += static_cast<double>(trace[k].iter);
    sy += ys.back();
  }
  const double tbar = st / m, ybar = sy / m;
  double stt = 0, sty = 0, syy = 0;
  for (std::size_t k = first; k < last; ++k) {
    const double dt = static_cast<double>(trace[k].iter) - tbar, dyv = ys[k - first] - ybar;
    stt += dt * dt;
    sty += dt * dyv;
    syy += dyv * dyv;
  }
  if (!(stt > 0.0)) throw std::invalid_argument("rate_fit: window spans a single iteration");
  const double slope = sty / stt;
  RateFit fit;
  fit.rho_hat = std::exp(slope);
  fit.r_squared = syy > 0.0 ? std::clamp(sty * sty / (stt * syy), 0.0, 1.0) : 1.0;
  fit.first = first;
  fit.last = last;
  return fit;
}

[[nodiscard]] inline RateFit rate_fit(const Trace& trace) { return rate_fit(trace, 0, trace.size()); }

/// Worst coordinate error of central differences against grad(p, it), scaled
/// by max(|g_k|, 1).
[[nodiscard]] inline double fd_gradient_check(const MinimaxProblem& p, const Iterate& it, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("fd_gradient_check: h must be positive");
  const Gradient g = p.grad(it);
  double worst = 0.0;
  auto compare = [&](double fd, double exact) {
    worst = std::max(worst, std::abs(fd - exact) / std::max(std::abs(exact), 1.0));
  };
  Iterate probe = it;
  for (Index k = 0; k < p.dim_x(); ++k) {
    const double v = it.x[k];
    probe.x[k] = v + h;
    const double up = p.value(probe);
    probe.x[k] = v - h;
    const double down = p.value(probe);
    probe.x[k] = v;
    compare((up - down) / (2.0 * h), g.gx[k]);
  }
  for (Index k = 0; k < p.dim_y(); ++k) {
    const double v = it.y[k];
    probe.y[k] = v + h;
    const double up = p.value(probe);
    probe.y[k] = v - h;
    const double down = p.value(probe);
    probe.y[k] = v;
    compare((up - down) / (2.0 * h), g.gy[k]);
  }
  return worst;
}

}  // namespace agda
