#pragma once

// Shared value types, stepsize schedules and theory-backed parameter presets
// for the alternating gradient descent ascent family.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace agda {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Primal-dual pair (x, y): x is minimized, y is maximized.
struct Iterate {
  Vector x;
  Vector y;

  Iterate() = default;
  Iterate(Vector x_, Vector y_) : x(std::move(x_)), y(std::move(y_)) {}

  [[nodiscard]] bool is_finite() const { return x.allFinite() && y.allFinite(); }

  [[nodiscard]] double max_abs() const {
    double m = 0.0;
    if (x.size() > 0) m = std::max(m, x.cwiseAbs().maxCoeff());
    if (y.size() > 0) m = std::max(m, y.cwiseAbs().maxCoeff());
    return m;
  }

  [[nodiscard]] double squared_distance(const Iterate& other) const {
    return (x - other.x).squaredNorm() + (y - other.y).squaredNorm();
  }
};

/// Partial gradients (grad_x f, grad_y f).
struct Gradient {
  Vector gx;
  Vector gy;

  [[nodiscard]] double squared_norm() const { return gx.squaredNorm() + gy.squaredNorm(); }
  [[nodiscard]] double norm() const { return std::sqrt(squared_norm()); }
};

struct StepPair {
  double tau1;
  double tau2;
};

enum class ScheduleKind { Constant, Diminishing };

/// Time-indexed stepsizes. For the diminishing kind the bases are numerators
/// that share the decay 1/(gamma_offset + t).
struct StepSchedule {
  ScheduleKind kind = ScheduleKind::Constant;
  double tau1_base = 0.0;
  double tau2_base = 0.0;
  double gamma_offset = 0.0;

  static StepSchedule constant(double tau1, double tau2) {
    StepSchedule s{ScheduleKind::Constant, tau1, tau2, 0.0};
    s.validate();
    return s;
  }

  static StepSchedule diminishing(double tau1_numerator, double tau2_numerator, double gamma) {
    StepSchedule s{ScheduleKind::Diminishing, tau1_numerator, tau2_numerator, gamma};
    s.validate();
    return s;
  }

  void validate() const {
    auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
    if (!positive(tau1_base) || !positive(tau2_base))
      throw std::invalid_argument("step schedule: stepsizes must be finite and positive");
    if (kind == ScheduleKind::Diminishing && !positive(gamma_offset))
      throw std::invalid_argument("step schedule: diminishing offset gamma must be positive");
  }
};

[[nodiscard]] inline StepPair schedule_at(const StepSchedule& s, std::uint64_t t) {
  if (s.kind == ScheduleKind::Constant) return {s.tau1_base, s.tau2_base};
  const double denom = s.gamma_offset + static_cast<double>(t);
  return {s.tau1_base / denom, s.tau2_base / denom};
}

struct SolverConfig {
  std::uint64_t max_iters = 1000;
  std::uint64_t seed = 0;
  std::uint64_t metrics_every = 1;
  double potential_weight = 0.1;  // lambda in P = a + lambda * b
  std::uint64_t vr_inner_N = 1;
  std::uint64_t vr_outer_T = 1;
  std::uint64_t vr_epochs_K = 1;
  // Early stop once the potential at a checkpoint drops to this value (0 disables).
  double stop_potential = 0.0;

  static constexpr double kDefaultWeight = 0.1;
  static constexpr double kDefaultVrWeight = 0.05;

  void validate() const {
    if (metrics_every == 0) throw std::invalid_argument("solver config: metrics_every must be positive");
    if (!(potential_weight > 0.0 && potential_weight <= 1.0))
      throw std::invalid_argument("solver config: potential_weight must lie in (0, 1]");
    if (vr_inner_N == 0 || vr_outer_T == 0 || vr_epochs_K == 0)
      throw std::invalid_argument("solver config: VR loop counts must be positive");
    if (!(stop_potential >= 0.0)) throw std::invalid_argument("solver config: stop_potential must be >= 0");
  }
};

struct TraceRecord {
  std::uint64_t iter = 0;
  std::uint64_t grad_evals = 0;
  // Empty when the problem has no exact best response.
  std::optional<double> a;
  std::optional<double> b;
  std::optional<double> potential;
  double grad_x_norm = 0.0;
  double grad_y_norm = 0.0;
  std::optional<double> dist_to_saddle_sq;

  bool operator==(const TraceRecord&) const = default;
};

using Trace = std::vector<TraceRecord>;

// ---------------------------------------------------------------------------
// Parameter presets. None of these clamp: inconsistent constants are errors.

struct ProblemConstants {
  double l;
  double mu1;
  double mu2;

  [[nodiscard]] double mu() const { return std::min(mu1, mu2); }
  /// l / min(mu1, mu2).
  [[nodiscard]] double kappa() const { return l / mu(); }
  /// Smoothness of g(x) = max_y f(x, y): l + l^2 / mu2.
  [[nodiscard]] double g_smoothness() const { return l + l * l / mu2; }

  void validate() const {
    auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
    if (!positive(l) || !positive(mu1) || !positive(mu2))
      throw std::invalid_argument("problem constants must be finite and positive");
    if (mu1 > l || mu2 > l)
      throw std::invalid_argument("problem constants inconsistent: a PL constant exceeds the smoothness modulus");
  }
};

/// Constant stepsizes tau1 = mu2^2 / (18 l^3), tau2 = 1 / l.
[[nodiscard]] inline StepSchedule preset_agda_theoretical(double l, double mu1, double mu2) {
  const ProblemConstants c{l, mu1, mu2};
  c.validate();
  return StepSchedule::constant(mu2 * mu2 / (18.0 * l * l * l), 1.0 / l);
}

/// Smallest gamma for which the diminishing schedule starts inside the caps
/// tau1^0 <= min{1/L, mu2^2/(18 l^2)} and tau2^0 <= 1/l.
[[nodiscard]] inline double minimal_diminishing_gamma(double l, double mu1, double mu2, double beta) {
  const ProblemConstants c{l, mu1, mu2};
  c.validate();
  const double L = c.g_smoothness();
  const double ratio = 18.0 * l * l / (mu2 * mu2);  // tau2 / tau1
  // tau1^0 = beta / gamma; each cap gives gamma >= beta * (1 / cap).
  return beta * std::max({L, ratio, ratio * l});
}

/// tau1^t = beta / (gamma + t), tau2^t = 18 l^2 beta / (mu2^2 (gamma + t)).
[[nodiscard]] inline StepSchedule preset_stoc_diminishing(double l, double mu1, double mu2, double beta,
                                                          double gamma) {
  const ProblemConstants c{l, mu1, mu2};
  c.validate();
  if (!(beta > 2.0 / mu1)) throw std::invalid_argument("diminishing preset: beta must exceed 2 / mu1");
  if (!(gamma > 0.0)) throw std::invalid_argument("diminishing preset: gamma must be positive");
  const double min_gamma = minimal_diminishing_gamma(l, mu1, mu2, beta);
  // Relative slack so that gamma == minimal_diminishing_gamma(...) is accepted.
  if (gamma < min_gamma * (1.0 - 1e-12))
    throw std::invalid_argument("diminishing preset: gamma too small, initial stepsize exceeds its cap");
  const double tau2_numerator = 18.0 * l * l * beta / (mu2 * mu2);
  return StepSchedule::diminishing(beta, tau2_numerator, gamma);
}

/// Stepsizes for AGDA on a one-sided PL game: tau1 = 1/(20 kappa^2 l),
/// tau2 = 1/l with kappa = l / mu_y (mu_y is the PL constant of -f(x, .)).
[[nodiscard]] inline StepSchedule preset_one_sided(double l, double mu_y) {
  if (!(l > 0.0 && mu_y > 0.0 && mu_y <= l))
    throw std::invalid_argument("one-sided preset: need 0 < mu <= l");
  const double kappa = l / mu_y;
  return StepSchedule::constant(1.0 / (20.0 * kappa * kappa * l), 1.0 / l);
}

enum class VrRegime { Auto, Regime1, Regime2 };

struct VrParams {
  double tau1;
  double tau2;
  std::uint64_t N;
  std::uint64_t T;
  VrRegime regime;  // the regime actually used (never Auto)
};

/// The side conditions the convergence proof places on the (alpha, beta)
/// constants once k3 = beta kappa^-6 (regime 1) or beta n^-2/3 (regime 2):
///   sqrt(k3) + k3^2 <= 1,
///   k3^2 (k3/28 + 28/sqrt(k3)) / kappa^2 <= 1/4,
///   2 (e^alpha - 1) k3 <= 1/20.
[[nodiscard]] inline bool vr_constants_admissible(double alpha, double k3, double kappa) {
  const bool first = std::sqrt(k3) + k3 * k3 <= 1.0;
  const bool second = k3 * k3 * (k3 / 28.0 + 28.0 / std::sqrt(k3)) / (kappa * kappa) <= 0.25;
  const bool third = 2.0 * std::expm1(alpha) * k3 <= 1.0 / 20.0;
  return first && second && third;
}

[[nodiscard]] inline VrParams preset_vr_agda(std::uint64_t n, double l, double mu1, double mu2, double alpha = 0.05,
                                             double beta = 0.05, VrRegime regime = VrRegime::Auto) {
  const ProblemConstants c{l, mu1, mu2};
  c.validate();
  if (n == 0) throw std::invalid_argument("VR preset: n must be positive");
  if (!(alpha > 0.0) || !(beta > 0.0)) throw std::invalid_argument("VR preset: alpha and beta must be positive");

  const double kappa = c.kappa();
  const double nd = static_cast<double>(n);
  const double kappa9 = std::pow(kappa, 9.0);
  const bool small_n = nd <= kappa9 * (1.0 + 1e-12);

  if (regime == VrRegime::Regime2 && !small_n)
    throw std::invalid_argument("VR preset: regime 2 requires n <= kappa^9");
  const VrRegime used = regime == VrRegime::Auto ? (small_n ? VrRegime::Regime2 : VrRegime::Regime1) : regime;

  auto to_count = [](double v) -> std::uint64_t {
    if (!std::isfinite(v) || v >= 1.8e19) throw std::overflow_error("VR preset: iteration count overflows");
    return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(v));
  };

  VrParams p{};
  p.regime = used;
  double k3 = 0.0;
  if (used == VrRegime::Regime1) {
    k3 = beta * std::pow(kappa, -6.0);
    p.tau1 = beta / (28.0 * std::pow(kappa, 8.0) * l);
    p.tau2 = beta / (l * std::pow(kappa, 6.0));
    p.N = to_count(std::floor(alpha * std::pow(beta, -2.0 / 3.0) * kappa9 /
                              (2.0 + 4.0 * std::sqrt(beta) * std::pow(kappa, -3.0))));
    p.T = 1;
  } else {
    const double n23 = std::pow(nd, 2.0 / 3.0);
    k3 = beta / n23;
    p.tau1 = beta / (28.0 * kappa * kappa * l * n23);
    p.tau2 = beta / (l * n23);
    p.N = to_count(std::floor(alpha * std::pow(beta, -2.0 / 3.0) * nd /
                              (2.0 + 4.0 * std::sqrt(beta) * std::pow(nd, -1.0 / 3.0))));
    // Shrink by a few ulps so n == kappa^9 gives T = 1 despite rounding in pow/cbrt.
    const double t_real = kappa * kappa * kappa / std::cbrt(nd);
    p.T = to_count(std::ceil(t_real * (1.0 - 1e-12)));
  }
  if (!vr_constants_admissible(alpha, k3, kappa))
    throw std::invalid_argument("VR preset: alpha/beta violate the admissibility conditions");
  return p;
}

}  // namespace agda
