// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria (0 when everything passes).

#include "agda/diagnostics.hpp"
#include "agda/rls.hpp"
#include "agda/solvers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace agda;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

Iterate point(double x, double y) { return Iterate{Vector::Constant(1, x), Vector::Constant(1, y)}; }
Iterate zeros(const MinimaxProblem& p) { return Iterate{Vector::Zero(p.dim_x()), Vector::Zero(p.dim_y())}; }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

/// Small Dataset1-recipe instance: 50 samples, 20 features.
ProblemPtr small_rls() { return make_rls(gen_rls_dataset({RlsRecipe::Dataset1, 50, 20, 1})); }

/// Dataset3-recipe instance with a large condition number.
ProblemPtr large_kappa_rls() { return make_rls(gen_rls_dataset({RlsRecipe::Dataset3, 200, 50, 1})); }

/// First trace index whose potential is at or below the target.
std::optional<std::size_t> first_hit(const Trace& t, double target) {
  for (std::size_t k = 0; k < t.size(); ++k)
    if (t[k].potential && *t[k].potential <= target) return k;
  return std::nullopt;
}

// 1 -------------------------------------------------------------------------
Verdict gradient_oracles() {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> normal;
  double worst = 0.0;
  for (const auto& p : {make_toy(), make_logistic_bilinear(), small_rls()}) {
    for (int k = 0; k < 100; ++k) {
      Iterate it{Vector(p->dim_x()), Vector(p->dim_y())};
      for (Index i = 0; i < it.x.size(); ++i) it.x[i] = normal(rng);
      for (Index i = 0; i < it.y.size(); ++i) it.y[i] = normal(rng);
      worst = std::max(worst, fd_gradient_check(*p, it, 1e-5));
    }
  }
  return {worst < 1e-5, "worst relative error " + fmt(worst) + " over 300 probes (limit 1e-5)"};
}

// 2 -------------------------------------------------------------------------
Verdict pl_certification() {
  const PlEstimate e = pl_estimate_grid(*make_toy(), Box{-2, 2, -2, 2}, 101);
  const bool ok = e.mu1_hat >= 1.0 / 16.0 - 1e-6 && e.mu2_hat >= 1.0 / 14.0 - 1e-6;
  return {ok, "mu1_hat " + fmt(e.mu1_hat) + " (>= 1/16), mu2_hat " + fmt(e.mu2_hat) + " (>= 1/14)"};
}

// 3 -------------------------------------------------------------------------
Verdict per_iteration_contraction() {
  std::ostringstream os;
  bool ok = true;
  const std::vector<std::pair<ProblemPtr, Iterate>> cases{{make_toy(), point(1, 1)}, {small_rls(), Iterate{}}};
  for (const auto& [p, start0] : cases) {
    const Iterate start = start0.x.size() ? start0 : zeros(*p);
    const auto c = *p->constants();
    const auto s = preset_agda_theoretical(c.l, c.mu1, c.mu2);
    SolverConfig cfg;
    cfg.max_iters = 1000;
    cfg.potential_weight = SolverConfig::kDefaultWeight;
    const RunResult r = agda_run(*p, s, start, cfg);
    const auto v = contraction_check(r.trace, 1.0 - 0.5 * c.mu1 * s.tau1_base, 0.0);
    ok = ok && v.empty() && r.trace.size() == 1001;
    os << p->name() << ": " << v.size() << " violations in 1000 steps, P " << fmt(*r.trace.front().potential)
       << " -> " << fmt(*r.trace.back().potential) << "; ";
  }
  return {ok, os.str()};
}

// 4 -------------------------------------------------------------------------
Verdict linear_convergence_sweep() {
  const auto toy = make_toy();
  struct Cell {
    double t1, t2;
    std::size_t hit;
    double r2;
  };
  std::optional<Cell> best;
  int qualifying = 0;
  for (double t1 : {1e-3, 3e-3, 1e-2, 3e-2, 0.1})
    for (double t2 : {1e-2, 2e-2, 5e-2, 0.1, 0.2, 0.5}) {
      SolverConfig cfg;
      cfg.max_iters = 10000;
      const RunResult r = agda_run(*toy, StepSchedule::constant(t1, t2), point(1, 1), cfg);
      if (r.status != RunStatus::Completed) continue;
      const auto hit = first_hit(r.trace, 1e-10);
      if (!hit || *hit < 10) continue;
      std::size_t last = *hit + 1;
      const RateFit fit = rate_fit(r.trace, 0, last);
      const bool probe = saddle_probe(*toy, r.final, 1e-6, 1000, 7);
      const double dist = std::sqrt(r.final.squared_distance(point(0, 0)));
      if (fit.r_squared >= 0.99 && probe && dist <= 1e-4) {
        ++qualifying;
        if (!best || *hit < best->hit) best = Cell{t1, t2, *hit, fit.r_squared};
      }
    }
  if (!best) return {false, "no stepsize pair met all conditions"};
  return {true, std::to_string(qualifying) + " of 30 cells qualify; fastest tau=(" + fmt(best->t1) + ", " +
                    fmt(best->t2) + ") reaches P<=1e-10 at t=" + std::to_string(best->hit) +
                    ", r^2=" + fmt(best->r2)};
}

// 5 -------------------------------------------------------------------------
Verdict stochastic_plateau() {
  const auto p = small_rls();
  const double tau1 = 1e-4, tau2 = 2e-3;
  const std::uint64_t iters = 200000, every = 1000;
  // Plateau level of one run: median P over the trailing quarter of the
  // records; "plateaued" compares the two halves of that window.
  auto run = [&](double t1, double t2, std::uint64_t seed, double& level, double& drift) {
    SolverConfig cfg;
    cfg.max_iters = iters;
    cfg.metrics_every = every;
    cfg.seed = seed;
    const RunResult r = stoc_agda_run(*p, StepSchedule::constant(t1, t2), zeros(*p), cfg,
                                      NoiseModel::component_sampling());
    const std::size_t n = r.trace.size(), w = n / 4, begin = n - w, mid = n - w / 2;
    std::vector<double> all, first, second;
    for (std::size_t k = begin; k < n; ++k) {
      all.push_back(*r.trace[k].potential);
      (k < mid ? first : second).push_back(*r.trace[k].potential);
    }
    level = median(all);
    drift = median(second) / median(first);
  };
  std::vector<double> base, reduced, drift_base, drift_reduced;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    double l, d;
    run(tau1, tau2, seed, l, d);
    base.push_back(l);
    drift_base.push_back(d);
    run(tau1 / 4, tau2 / 2, seed, l, d);
    reduced.push_back(l);
    drift_reduced.push_back(d);
  }
  const double mb = median(base), mr = median(reduced);
  const double db = median(drift_base), dr = median(drift_reduced);
  const bool plateaued = db > 0.5 && db < 2.0 && dr > 0.5 && dr < 2.0;
  const bool ok = plateaued && mr < mb;
  return {ok, "median plateau " + fmt(mb) + " at tau=(1e-4, 2e-3), " + fmt(mr) +
                  " at (tau1/4, tau2/2); window drift ratios " + fmt(db) + ", " + fmt(dr)};
}

// 6 -------------------------------------------------------------------------
Verdict diminishing_decay() {
  const auto p = small_rls();
  const auto c = *p->constants();
  const double beta = 3.0 / c.mu1;
  const double gamma = minimal_diminishing_gamma(c.l, c.mu1, c.mu2, beta);
  const auto s = preset_stoc_diminishing(c.l, c.mu1, c.mu2, beta, gamma);
  std::vector<double> at3, at4;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SolverConfig cfg;
    cfg.max_iters = 10000;
    cfg.metrics_every = 1000;
    cfg.seed = seed;
    const RunResult r = stoc_agda_run(*p, s, zeros(*p), cfg, NoiseModel::component_sampling());
    for (const auto& rec : r.trace) {
      if (rec.iter == 1000) at3.push_back(1e3 * *rec.potential);
      if (rec.iter == 10000) at4.push_back(1e4 * *rec.potential);
    }
  }
  const double m3 = median(at3), m4 = median(at4), ratio = m4 / m3;
  const bool ok = ratio <= 3.0 && ratio >= 1.0 / 3.0;
  return {ok, "median t*P_t: " + fmt(m3) + " at t=1e3, " + fmt(m4) + " at t=1e4, ratio " + fmt(ratio) +
                  " (limit 3); preset gamma " + fmt(gamma) + " makes the stepsizes nearly constant for t <= 1e4"};
}

// 7 -------------------------------------------------------------------------
Verdict vr_unbiased() {
  const auto p = make_rls(gen_rls_dataset({RlsRecipe::Dataset1, 10, 4, 5}));
  const Index n = p->num_components();
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    Iterate snap = zeros(*p), cur = zeros(*p);
    for (Index i = 0; i < snap.x.size(); ++i) snap.x[i] = normal(rng), cur.x[i] = normal(rng);
    for (Index i = 0; i < snap.y.size(); ++i) snap.y[i] = normal(rng), cur.y[i] = normal(rng);
    const Gradient fs = p->grad(snap), fc = p->grad(cur);
    Vector ex = Vector::Zero(p->dim_x()), ey = Vector::Zero(p->dim_y());
    for (Index i = 0; i < n; ++i) {
      ex += p->component_grad_x(i, cur) - p->component_grad_x(i, snap) + fs.gx;
      ey += p->component_grad_y(i, cur) - p->component_grad_y(i, snap) + fs.gy;
    }
    ex /= static_cast<double>(n);
    ey /= static_cast<double>(n);
    const double scale = std::max({1.0, fc.gx.cwiseAbs().maxCoeff(), fc.gy.cwiseAbs().maxCoeff()});
    worst = std::max({worst, (ex - fc.gx).cwiseAbs().maxCoeff() / scale, (ey - fc.gy).cwiseAbs().maxCoeff() / scale});
  }
  return {worst < 1e-12, "worst relative deviation " + fmt(worst) + " over 20 point pairs, n=10 (limit 1e-12)"};
}

Verdict vr_speedup() {
  const auto p = large_kappa_rls();
  const double n = static_cast<double>(p->num_components());
  const double target = 1e-8, weight = SolverConfig::kDefaultVrWeight;
  const auto inf = std::numeric_limits<double>::infinity();

  auto agda_cost = [&](double t1, double t2) {
    SolverConfig cfg;
    cfg.max_iters = 30000;
    cfg.metrics_every = 10;
    cfg.potential_weight = weight;
    cfg.stop_potential = target;
    const RunResult r = agda_run(*p, StepSchedule::constant(t1, t2), zeros(*p), cfg);
    const auto hit = first_hit(r.trace, target);
    return hit ? static_cast<double>(r.trace[*hit].grad_evals) / n : inf;
  };
  auto vr_cost = [&](double t1, double t2, std::uint64_t N, std::uint64_t seed) {
    SolverConfig cfg;
    cfg.vr_inner_N = N;
    cfg.vr_outer_T = 1;
    cfg.vr_epochs_K = 30000 * 2 * 160 / (2 * 160 + 2 * N);  // same budget as the AGDA runs
    cfg.metrics_every = 40;
    cfg.potential_weight = weight;
    cfg.stop_potential = target;
    cfg.seed = seed;
    const RunResult r = vr_agda_run(*p, t1, t2, zeros(*p), cfg);
    const auto hit = first_hit(r.trace, target);
    return hit ? static_cast<double>(r.trace[*hit].grad_evals) / n : inf;
  };

  double best_agda = inf, a1 = 0, a2 = 0;
  for (double t1 : {5e-5, 1e-4, 1.5e-4, 2e-4})
    for (double t2 : {0.02, 0.05, 0.1, 0.2}) {
      const double cost = agda_cost(t1, t2);
      if (cost < best_agda) best_agda = cost, a1 = t1, a2 = t2;
    }

  // Tune VR-AGDA on a separate seed, then evaluate on five fresh seeds.
  double best_vr = inf, v1 = 0, v2 = 0;
  std::uint64_t vN = 0;
  for (double t1 : {5e-6, 1e-5, 2e-5})
    for (double t2 : {5e-4, 1e-3, 2e-3})
      for (std::uint64_t N : {160u, 640u}) {
        const double cost = vr_cost(t1, t2, N, 100);
        if (cost < best_vr) best_vr = cost, v1 = t1, v2 = t2, vN = N;
      }
  if (!std::isfinite(best_vr)) return {false, "no VR-AGDA configuration reached the target"};
  std::vector<double> costs;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) costs.push_back(vr_cost(v1, v2, vN, seed));
  const double vr_median = median(costs);
  return {vr_median < best_agda, "kappa=" + fmt(p->constants()->kappa()) + "; full gradients to P<=1e-8: AGDA " +
                                     fmt(best_agda) + " at tau=(" + fmt(a1) + ", " + fmt(a2) + "), VR-AGDA median " +
                                     fmt(vr_median) + " at tau=(" + fmt(v1) + ", " + fmt(v2) + "), N=" +
                                     std::to_string(vN)};
}

Verdict vr_correctness_and_speedup() {
  const Verdict a = vr_unbiased(), b = vr_speedup();
  return {a.pass && b.pass, "(a) " + std::string(a.pass ? "ok: " : "FAIL: ") + a.detail + "; (b) " +
                                (b.pass ? "ok: " : "FAIL: ") + b.detail};
}

// 8 -------------------------------------------------------------------------
Verdict agda_vs_sgda() {
  const auto lb = make_logistic_bilinear();
  const auto s = StepSchedule::constant(0.025, 0.025);
  auto track = [&](bool alternating, double& max_norm, std::optional<std::uint64_t>& hit) {
    Iterate it = point(1, 1);
    max_norm = std::sqrt(it.x.squaredNorm() + it.y.squaredNorm());
    for (std::uint64_t t = 0; t < 100000; ++t) {
      if (!hit && lb->grad(it).norm() < 1e-6) hit = t;
      it = alternating ? agda_step(*lb, it, s.tau1_base, s.tau2_base) : sgda_step(*lb, it, s.tau1_base, s.tau2_base);
      if (!it.is_finite()) {
        max_norm = std::numeric_limits<double>::infinity();
        return;
      }
      max_norm = std::max(max_norm, std::sqrt(it.x.squaredNorm() + it.y.squaredNorm()));
    }
    if (!hit && lb->grad(it).norm() < 1e-6) hit = 100000;
  };
  double agda_max = 0, sgda_max = 0;
  std::optional<std::uint64_t> agda_hit, sgda_hit;
  track(true, agda_max, agda_hit);
  track(false, sgda_max, sgda_hit);
  const bool agda_ok = agda_max < 10.0 && agda_hit.has_value();
  const bool sgda_fails = !sgda_hit.has_value();
  auto when = [](const std::optional<std::uint64_t>& h) { return h ? "t=" + std::to_string(*h) : std::string("never"); };
  return {agda_ok && sgda_fails, "AGDA max norm " + fmt(agda_max) + ", grad<1e-6 at " + when(agda_hit) +
                                     "; SGDA max norm " + fmt(sgda_max) + ", grad<1e-6 at " + when(sgda_hit) +
                                     " (criterion needs SGDA to fail)"};
}

// 9 -------------------------------------------------------------------------
Verdict one_sided_bound() {
  const auto toy = make_toy();
  const auto c = *toy->constants();
  const double kappa = c.l / c.mu2;
  const auto s = preset_one_sided(c.l, c.mu2);
  const std::uint64_t T = 1000;
  const Iterate start = point(1, 1);
  const RunResult r = one_sided_agda_run(*toy, s.tau1_base, s.tau2_base, T, start, 0);
  double sum = 0.0;
  for (const auto& it : r.path) {
    const double g = stationarity_of_g(*toy, it.x);
    sum += g * g;
  }
  const double avg = sum / static_cast<double>(r.path.size());
  const double a0 = toy->g_gap(start.x), b0 = toy->response_gap(start);
  const double bound = 8.0 / (T + 1.0) * (10.0 * kappa * kappa * c.l * a0 + kappa * kappa * c.l * b0);
  return {r.path.size() == T + 1 && avg <= bound + 1e-9,
          "average ||grad g||^2 " + fmt(avg) + " <= bound " + fmt(bound)};
}

// 10 ------------------------------------------------------------------------
Verdict optimality_equivalence() {
  struct Case {
    ProblemPtr p;
    double t1, t2;
    std::uint64_t iters;
  };
  const auto toy = make_toy();
  const auto rls = small_rls();
  const std::vector<Case> cases{{toy, 0.01, 0.02, 10000}, {toy, 0.03, 0.05, 10000}, {toy, 0.1, 0.02, 10000},
                                {rls, 1e-3, 0.05, 20000}, {rls, 2e-3, 0.1, 20000}};
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal;
  int converged = 0, agreeing = 0;
  std::ostringstream os;
  for (const auto& cs : cases) {
    for (int start_k = 0; start_k < 3; ++start_k) {
      Iterate start = zeros(*cs.p);
      for (Index i = 0; i < start.x.size(); ++i) start.x[i] = 2.0 * normal(rng);
      for (Index i = 0; i < start.y.size(); ++i) start.y[i] = 2.0 * normal(rng);
      SolverConfig cfg;
      cfg.max_iters = cs.iters;
      cfg.metrics_every = cs.iters;
      const auto sched = StepSchedule::constant(cs.t1, cs.t2);
      const RunResult r = agda_run(*cs.p, sched, start, cfg);
      if (r.status != RunStatus::Completed) continue;
      // Converged: the endpoint is a numerical fixed point of the iteration.
      const Iterate next = agda_step(*cs.p, r.final, cs.t1, cs.t2);
      if (std::sqrt(next.squared_distance(r.final)) > 1e-10) continue;
      ++converged;
      const bool stationary = cs.p->grad(r.final).norm() < 1e-6;
      const bool saddle = saddle_probe(*cs.p, r.final, 1e-5, 200, 11);
      const bool minimax = cs.p->g_gap(r.final.x) < 1e-8;
      if (stationary && saddle && minimax) ++agreeing;
      else
        os << cs.p->name() << " endpoint disagrees (stationary " << stationary << ", saddle " << saddle
           << ", minimax " << minimax << "); ";
    }
  }
  os << agreeing << " of " << converged << " converged endpoints pass all three certificates";
  return {converged >= 10 && agreeing == converged, os.str()};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit_s;
    std::function<Verdict()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "gradient oracles match finite differences", 5, gradient_oracles},
      {2, "two-sided PL certified on the toy grid", 5, pl_certification},
      {3, "per-iteration contraction with theoretical stepsizes", 10, per_iteration_contraction},
      {4, "linear convergence at tuned stepsizes", 30, linear_convergence_sweep},
      {5, "stochastic AGDA constant-stepsize plateau", 120, stochastic_plateau},
      {6, "stochastic AGDA O(1/t) decay with diminishing stepsizes", 120, diminishing_decay},
      {7, "VR-AGDA unbiasedness and speedup", 300, vr_correctness_and_speedup},
      {8, "AGDA stable where SGDA fails", 30, agda_vs_sgda},
      {9, "one-sided PL stationarity bound", 10, one_sided_bound},
      {10, "stationary, saddle and minimax certificates agree", 30, optimality_equivalence},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.limit_s;
    const bool pass = v.pass && in_time;
    failed += !pass;
    std::printf("criterion %2d: %s - %s | %s | %.2fs (limit %.0fs%s)\n", c.id, pass ? "PASS" : "FAIL", c.name,
                v.detail.c_str(), secs, c.limit_s, in_time ? "" : ", exceeded");
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed;
}
