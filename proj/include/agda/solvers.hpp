#pragma once

// Gradient descent ascent iterations: deterministic alternating (AGDA) and
// simultaneous (SGDA) updates, stochastic AGDA, variance-reduced AGDA and
// AGDA with a uniformly drawn output iterate.

#include "agda/metrics.hpp"

#include <random>
#include <string_view>
#include <vector>

namespace agda {

enum class RunStatus { Completed, Diverged };

[[nodiscard]] inline std::string_view to_string(RunStatus s) {
  return s == RunStatus::Completed ? "Completed" : "Diverged";
}

struct RunResult {
  Iterate final;
  Trace trace;
  std::uint64_t rng_draws = 0;
  std::optional<Iterate> selected;
  RunStatus status = RunStatus::Completed;
  std::uint64_t iterations = 0;  // steps actually taken (inner steps for VR-AGDA)
  // VR-AGDA: per-epoch index into the N*T inner iterates that was selected.
  std::vector<std::uint64_t> selections;
  // one_sided_agda_run: every iterate (x_t, y_t), t = 0..T.
  std::vector<Iterate> path;
};

/// Magnitude beyond which an iterate counts as diverged.
inline constexpr double kDivergenceBound = 1e12;

[[nodiscard]] inline bool diverged(const Iterate& it) {
  return !it.is_finite() || it.max_abs() > kDivergenceBound;
}

/// x+ = x - tau1 grad_x f(x, y);  y+ = y + tau2 grad_y f(x+, y).
[[nodiscard]] inline Iterate agda_step(const MinimaxProblem& p, const Iterate& it, double tau1, double tau2) {
  if (!(tau1 > 0.0) || !(tau2 > 0.0)) throw std::invalid_argument("agda_step: stepsizes must be positive");
  Iterate next = it;
  next.x -= tau1 * p.grad_x(it);
  next.y += tau2 * p.grad_y(Iterate{next.x, it.y});
  return next;
}

/// Both partial gradients taken at the old iterate.
[[nodiscard]] inline Iterate sgda_step(const MinimaxProblem& p, const Iterate& it, double tau1, double tau2) {
  if (!(tau1 > 0.0) || !(tau2 > 0.0)) throw std::invalid_argument("sgda_step: stepsizes must be positive");
  const Gradient g = p.grad(it);
  return Iterate{it.x - tau1 * g.gx, it.y + tau2 * g.gy};
}

/// How stochastic gradients are formed in stoc_agda_run.
struct NoiseModel {
  enum class Kind { None, ComponentSampling, Gaussian };
  Kind kind = Kind::None;
  // Gaussian: E||G_x - grad_x f||^2 = E||G_y - grad_y f||^2 = sigma^2.
  double sigma = 0.0;

  static NoiseModel none() { return {Kind::None, 0.0}; }
  static NoiseModel component_sampling() { return {Kind::ComponentSampling, 0.0}; }
  static NoiseModel gaussian(double sigma) {
    if (!(sigma >= 0.0)) throw std::invalid_argument("noise model: sigma must be nonnegative");
    return {Kind::Gaussian, sigma};
  }
};

namespace detail {

class Recorder {
 public:
  Recorder(const MinimaxProblem& p, const SolverConfig& cfg) : p_(p), cfg_(cfg) {}

  /// Appends a record; returns true when the early-stop potential is reached.
  bool record(const Iterate& it, std::uint64_t iter, std::uint64_t evals) {
    trace_.push_back(make_record(p_, it, iter, evals, cfg_.potential_weight));
    const auto& pot = trace_.back().potential;
    return cfg_.stop_potential > 0.0 && pot && *pot <= cfg_.stop_potential;
  }

  [[nodiscard]] bool last_is(std::uint64_t iter) const { return !trace_.empty() && trace_.back().iter == iter; }
  Trace take() { return std::move(trace_); }

 private:
  const MinimaxProblem& p_;
  const SolverConfig& cfg_;
  Trace trace_;
};

inline Vector gaussian_vector(Index d, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(d);
  for (Index i = 0; i < d; ++i) v[i] = stddev * normal(rng);
  return v;
}

inline void check_start(const MinimaxProblem& p, const Iterate& start) {
  if (start.x.size() != p.dim_x() || start.y.size() != p.dim_y())
    throw std::invalid_argument(p.name() + ": starting point has wrong dimension");
  if (!start.is_finite()) throw std::invalid_argument("starting point must be finite");
}

}  // namespace detail

/// Stochastic AGDA:
///   x_{t+1} = x_t - tau1^t G_x(x_t, y_t; xi_t1)
///   y_{t+1} = y_t + tau2^t G_y(x_{t+1}, y_t; xi_t2)
/// with two independent draws per iteration. NoiseModel::none() gives
/// deterministic AGDA.
///
/// grad_evals counts partial gradients of single components: a full partial
/// gradient of an n-component problem costs n.
[[nodiscard]] inline RunResult stoc_agda_run(const MinimaxProblem& p, const StepSchedule& schedule,
                                             const Iterate& start, const SolverConfig& cfg,
                                             NoiseModel noise = NoiseModel::none()) {
  schedule.validate();
  cfg.validate();
  detail::check_start(p, start);

  const Index n = p.num_components();
  const auto nu = static_cast<std::uint64_t>(n);
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<Index> pick(0, n - 1);
  const double sx = noise.sigma / std::sqrt(static_cast<double>(std::max<Index>(1, p.dim_x())));
  const double sy = noise.sigma / std::sqrt(static_cast<double>(std::max<Index>(1, p.dim_y())));

  RunResult res;
  detail::Recorder rec(p, cfg);
  Iterate it = start;
  std::uint64_t evals = 0;
  bool stop = rec.record(it, 0, 0);

  std::uint64_t t = 0;
  for (; t < cfg.max_iters && !stop; ++t) {
    const StepPair tau = schedule_at(schedule, t);
    switch (noise.kind) {
      case NoiseModel::Kind::None:
        it.x -= tau.tau1 * p.grad_x(it);
        it.y += tau.tau2 * p.grad_y(it);
        evals += 2 * nu;
        break;
      case NoiseModel::Kind::ComponentSampling: {
        const Index i1 = pick(rng);
        it.x -= tau.tau1 * p.component_grad_x(i1, it);
        const Index i2 = pick(rng);
        it.y += tau.tau2 * p.component_grad_y(i2, it);
        res.rng_draws += 2;
        evals += 2;
        break;
      }
      case NoiseModel::Kind::Gaussian: {
        it.x -= tau.tau1 * (p.grad_x(it) + detail::gaussian_vector(p.dim_x(), sx, rng));
        it.y += tau.tau2 * (p.grad_y(it) + detail::gaussian_vector(p.dim_y(), sy, rng));
        res.rng_draws += 2;
        evals += 2 * nu;
        break;
      }
    }
    if (diverged(it)) {
      res.status = RunStatus::Diverged;
      ++t;
      break;
    }
    if ((t + 1) % cfg.metrics_every == 0) stop = rec.record(it, t + 1, evals);
  }
  if (!rec.last_is(t)) rec.record(it, t, evals);

  res.iterations = t;
  res.final = it;
  res.trace = rec.take();
  return res;
}

/// Deterministic AGDA with full gradients.
[[nodiscard]] inline RunResult agda_run(const MinimaxProblem& p, const StepSchedule& schedule, const Iterate& start,
                                        const SolverConfig& cfg) {
  return stoc_agda_run(p, schedule, start, cfg, NoiseModel::none());
}

/// Deterministic simultaneous GDA.
[[nodiscard]] inline RunResult sgda_run(const MinimaxProblem& p, const StepSchedule& schedule, const Iterate& start,
                                        const SolverConfig& cfg) {
  schedule.validate();
  cfg.validate();
  detail::check_start(p, start);
  const auto nu = static_cast<std::uint64_t>(p.num_components());

  RunResult res;
  detail::Recorder rec(p, cfg);
  Iterate it = start;
  std::uint64_t evals = 0;
  bool stop = rec.record(it, 0, 0);
  std::uint64_t t = 0;
  for (; t < cfg.max_iters && !stop; ++t) {
    const StepPair tau = schedule_at(schedule, t);
    it = sgda_step(p, it, tau.tau1, tau.tau2);
    evals += 2 * nu;
    if (diverged(it)) {
      res.status = RunStatus::Diverged;
      ++t;
      break;
    }
    if ((t + 1) % cfg.metrics_every == 0) stop = rec.record(it, t + 1, evals);
  }
  if (!rec.last_is(t)) rec.record(it, t, evals);
  res.iterations = t;
  res.final = it;
  res.trace = rec.take();
  return res;
}

/// Variance-reduced AGDA (SVRG-style snapshots with randomized restarts).
///
/// Epoch k runs T outer iterations from the snapshot (x~_0, y~_0). Each outer
/// iteration takes both full gradients at its snapshot, then N inner steps
///   x_{j+1} = x_j - tau1 [grad_x f_i1(x_j, y_j) - grad_x f_i1(x~, y~) + grad_x f(x~, y~)]
///   y_{j+1} = y_j + tau2 [grad_y f_i2(x_{j+1}, y_j) - grad_y f_i2(x~, y~) + grad_y f(x~, y~)]
/// with independent uniform indices i1, i2. The last inner iterate is the next
/// snapshot. The next epoch starts from one of the N*T iterates {x_{t,j}},
/// j < N, drawn uniformly.
///
/// Counts (config fields vr_inner_N, vr_outer_T, vr_epochs_K): each outer
/// iteration adds 2n evaluations for the snapshot gradients and each inner
/// step adds 2. Snapshot-side component gradients in the correction are not
/// counted. The trace holds every snapshot plus, when metrics_every < N, inner
/// iterates every metrics_every inner steps.
[[nodiscard]] inline RunResult vr_agda_run(const MinimaxProblem& p, double tau1, double tau2, const Iterate& start,
                                           const SolverConfig& cfg) {
  cfg.validate();
  detail::check_start(p, start);
  if (!(tau1 > 0.0) || !(tau2 > 0.0)) throw std::invalid_argument("vr_agda_run: stepsizes must be positive");
  const Index n = p.num_components();
  if (n < 1) throw std::invalid_argument("vr_agda_run: problem must be finite-sum");
  const auto nu = static_cast<std::uint64_t>(n);
  const std::uint64_t N = cfg.vr_inner_N, T = cfg.vr_outer_T, K = cfg.vr_epochs_K;

  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<Index> pick(0, n - 1);
  std::uniform_int_distribution<std::uint64_t> pick_iterate(0, N * T - 1);

  RunResult res;
  detail::Recorder rec(p, cfg);
  std::uint64_t evals = 0, inner = 0;
  Iterate snap = start;
  bool stop = false;
  const bool record_inner = cfg.metrics_every < N;

  for (std::uint64_t k = 0; k < K && !stop && res.status == RunStatus::Completed; ++k) {
    const std::uint64_t chosen_index = pick_iterate(rng);
    res.rng_draws += 1;
    res.selections.push_back(chosen_index);
    Iterate chosen;

    for (std::uint64_t t = 0; t < T; ++t) {
      if (rec.record(snap, inner, evals)) {
        stop = true;
        break;
      }
      const Gradient full = p.grad(snap);
      evals += 2 * nu;
      Iterate cur = snap;
      for (std::uint64_t j = 0; j < N; ++j) {
        if (t * N + j == chosen_index) chosen = cur;
        const Index i1 = pick(rng);
        cur.x -= tau1 * (p.component_grad_x(i1, cur) - p.component_grad_x(i1, snap) + full.gx);
        const Index i2 = pick(rng);
        cur.y += tau2 * (p.component_grad_y(i2, cur) - p.component_grad_y(i2, snap) + full.gy);
        res.rng_draws += 2;
        evals += 2;
        ++inner;
        if (diverged(cur)) {
          res.status = RunStatus::Diverged;
          snap = cur;
          break;
        }
        if (record_inner && j + 1 < N && inner % cfg.metrics_every == 0 && rec.record(cur, inner, evals)) {
          stop = true;
          snap = cur;
          break;
        }
      }
      if (stop || res.status == RunStatus::Diverged) break;
      snap = cur;
    }
    if (stop || res.status == RunStatus::Diverged) break;
    snap = chosen;
    res.selected = chosen;
  }
  if (!stop) rec.record(snap, inner, evals);

  res.iterations = inner;
  res.final = snap;
  res.trace = rec.take();
  return res;
}

/// T deterministic AGDA steps; the output is drawn uniformly from the T + 1
/// iterates (x_t, y_t), t = 0..T. Every iterate is kept in RunResult::path.
[[nodiscard]] inline RunResult one_sided_agda_run(const MinimaxProblem& p, double tau1, double tau2, std::uint64_t T,
                                                  const Iterate& start, std::uint64_t seed,
                                                  std::uint64_t metrics_every = 1) {
  detail::check_start(p, start);
  SolverConfig cfg;
  cfg.max_iters = T;
  cfg.metrics_every = metrics_every;
  cfg.seed = seed;
  cfg.validate();
  const auto nu = static_cast<std::uint64_t>(p.num_components());

  RunResult res;
  detail::Recorder rec(p, cfg);
  res.path.reserve(T + 1);
  res.path.push_back(start);
  rec.record(start, 0, 0);
  Iterate it = start;
  std::uint64_t t = 0;
  for (; t < T; ++t) {
    it = agda_step(p, it, tau1, tau2);
    res.path.push_back(it);
    if (diverged(it)) {
      res.status = RunStatus::Diverged;
      ++t;
      break;
    }
    if ((t + 1) % metrics_every == 0) rec.record(it, t + 1, 2 * nu * (t + 1));
  }
  if (!rec.last_is(t)) rec.record(it, t, 2 * nu * t);

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, res.path.size() - 1);
  const std::size_t s = pick(rng);
  res.rng_draws = 1;
  res.selections.push_back(s);
  res.selected = res.path[s];
  res.iterations = t;
  res.final = it;
  res.trace = rec.take();
  return res;
}

}  // namespace agda
