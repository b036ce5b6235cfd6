#pragma once

// Config-driven experiment harness behind the command-line tool: JSON
// experiment definitions, single runs with a JSON summary, stepsize sweeps
// and PL verification reports.
//
// Config layout (unknown keys anywhere are errors):
//   {
//     "problem":  {"name": "toy" | "logistic_bilinear" | "rls", ...rls fields},
//     "solver":   "agda" | "sgda" | "stoc_agda" | "vr_agda" | "one_sided_agda"
//                 or {"name": ..., "noise": "none" | "component" | "gaussian", "sigma": s},
//     "schedule": {"kind": "constant", "tau1": a, "tau2": b}
//               | {"kind": "diminishing", "tau1": a, "tau2": b, "gamma": g}
//               | {"kind": "preset", "preset": "agda_theoretical" | "stoc_diminishing" |
//                  "vr_agda" | "one_sided", "alpha": ..., "beta": ..., "gamma": ..., "regime": ...},
//     "init":     {"x0": [...], "y0": [...]} | {"seed": s, "scale": r},
//     "cfg":      {SolverConfig fields},
//     "output":   "trace.csv",
//     "sweep":    {"tau1": [...], "tau2": [...], "seeds": [...]}
//   }
// rls fields: "recipe" ("dataset1" | "dataset3" | "csv"), "n_samples", "m",
// "seed", "rank_fraction", "A", "y0", "C" (CSV paths), "lambda_reg".

#include "agda/diagnostics.hpp"
#include "agda/rls.hpp"
#include "agda/solvers.hpp"
#include "agda/trace_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace agda {

/// Invalid experiment definition or unreadable input; the CLI maps it to exit 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Json = nlohmann::json;

struct ProblemSpec {
  std::string name = "toy";
  std::string recipe = "dataset1";
  Index n_samples = 50;
  Index m = 20;
  std::uint64_t seed = 0;
  double rank_fraction = 0.8;
  std::string A_path, y0_path, C_path;
  std::optional<double> lambda_reg;
};

struct SolverSpec {
  std::string name = "agda";
  std::string noise = "none";
  double sigma = 0.0;
};

struct ScheduleSpec {
  std::string kind = "constant";
  std::string preset;
  std::optional<double> tau1, tau2, gamma, alpha, beta;
  std::string regime = "auto";
};

struct InitSpec {
  std::optional<std::vector<double>> x0, y0;
  std::optional<std::uint64_t> seed;
  double scale = 1.0;
};

struct SweepSpec {
  std::vector<double> tau1, tau2;
  std::vector<std::uint64_t> seeds;
};

struct ExperimentConfig {
  ProblemSpec problem;
  SolverSpec solver;
  ScheduleSpec schedule;
  InitSpec init;
  SolverConfig cfg;
  bool weight_given = false;
  std::string output;
  std::optional<SweepSpec> sweep;
};

namespace detail {

inline void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <class T>
T get_as(const Json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

template <class T>
void read_opt(const Json& j, const char* key, const std::string& where, T& out) {
  if (j.contains(key)) out = get_as<T>(j, key, where);
}

template <class T>
void read_opt(const Json& j, const char* key, const std::string& where, std::optional<T>& out) {
  if (j.contains(key)) out = get_as<T>(j, key, where);
}

}  // namespace detail

[[nodiscard]] inline ExperimentConfig parse_experiment_config(const Json& j) {
  using detail::check_keys;
  using detail::read_opt;
  check_keys(j, {"problem", "solver", "schedule", "init", "cfg", "output", "sweep"}, "config");
  ExperimentConfig c;

  if (!j.contains("problem")) throw ConfigError("config: missing 'problem'");
  const Json& jp = j.at("problem");
  check_keys(jp, {"name", "recipe", "n_samples", "m", "seed", "rank_fraction", "A", "y0", "C", "lambda_reg"},
             "problem");
  c.problem.name = detail::get_as<std::string>(jp, "name", "problem");
  read_opt(jp, "recipe", "problem", c.problem.recipe);
  read_opt(jp, "n_samples", "problem", c.problem.n_samples);
  read_opt(jp, "m", "problem", c.problem.m);
  read_opt(jp, "seed", "problem", c.problem.seed);
  read_opt(jp, "rank_fraction", "problem", c.problem.rank_fraction);
  read_opt(jp, "A", "problem", c.problem.A_path);
  read_opt(jp, "y0", "problem", c.problem.y0_path);
  read_opt(jp, "C", "problem", c.problem.C_path);
  read_opt(jp, "lambda_reg", "problem", c.problem.lambda_reg);

  if (!j.contains("solver")) throw ConfigError("config: missing 'solver'");
  const Json& js = j.at("solver");
  if (js.is_string()) {
    c.solver.name = js.get<std::string>();
  } else {
    check_keys(js, {"name", "noise", "sigma"}, "solver");
    c.solver.name = detail::get_as<std::string>(js, "name", "solver");
    read_opt(js, "noise", "solver", c.solver.noise);
    read_opt(js, "sigma", "solver", c.solver.sigma);
  }

  if (j.contains("schedule")) {
    const Json& jsch = j.at("schedule");
    check_keys(jsch, {"kind", "preset", "tau1", "tau2", "gamma", "alpha", "beta", "regime"}, "schedule");
    read_opt(jsch, "kind", "schedule", c.schedule.kind);
    read_opt(jsch, "preset", "schedule", c.schedule.preset);
    read_opt(jsch, "tau1", "schedule", c.schedule.tau1);
    read_opt(jsch, "tau2", "schedule", c.schedule.tau2);
    read_opt(jsch, "gamma", "schedule", c.schedule.gamma);
    read_opt(jsch, "alpha", "schedule", c.schedule.alpha);
    read_opt(jsch, "beta", "schedule", c.schedule.beta);
    read_opt(jsch, "regime", "schedule", c.schedule.regime);
  }

  if (j.contains("init")) {
    const Json& ji = j.at("init");
    check_keys(ji, {"x0", "y0", "seed", "scale"}, "init");
    read_opt(ji, "x0", "init", c.init.x0);
    read_opt(ji, "y0", "init", c.init.y0);
    read_opt(ji, "seed", "init", c.init.seed);
    read_opt(ji, "scale", "init", c.init.scale);
    if (c.init.x0.has_value() != c.init.y0.has_value()) throw ConfigError("init: give both x0 and y0");
    if (c.init.x0 && c.init.seed) throw ConfigError("init: explicit point and random seed are exclusive");
  }

  if (j.contains("cfg")) {
    const Json& jc = j.at("cfg");
    check_keys(jc,
               {"max_iters", "seed", "metrics_every", "potential_weight", "vr_inner_N", "vr_outer_T", "vr_epochs_K",
                "stop_potential"},
               "cfg");
    read_opt(jc, "max_iters", "cfg", c.cfg.max_iters);
    read_opt(jc, "seed", "cfg", c.cfg.seed);
    read_opt(jc, "metrics_every", "cfg", c.cfg.metrics_every);
    c.weight_given = jc.contains("potential_weight");
    read_opt(jc, "potential_weight", "cfg", c.cfg.potential_weight);
    read_opt(jc, "vr_inner_N", "cfg", c.cfg.vr_inner_N);
    read_opt(jc, "vr_outer_T", "cfg", c.cfg.vr_outer_T);
    read_opt(jc, "vr_epochs_K", "cfg", c.cfg.vr_epochs_K);
    read_opt(jc, "stop_potential", "cfg", c.cfg.stop_potential);
  }
  if (!c.weight_given && c.solver.name == "vr_agda") c.cfg.potential_weight = SolverConfig::kDefaultVrWeight;

  detail::read_opt(j, "output", "config", c.output);

  if (j.contains("sweep")) {
    const Json& jw = j.at("sweep");
    check_keys(jw, {"tau1", "tau2", "seeds"}, "sweep");
    SweepSpec s;
    s.tau1 = detail::get_as<std::vector<double>>(jw, "tau1", "sweep");
    s.tau2 = detail::get_as<std::vector<double>>(jw, "tau2", "sweep");
    s.seeds = jw.contains("seeds") ? detail::get_as<std::vector<std::uint64_t>>(jw, "seeds", "sweep")
                                   : std::vector<std::uint64_t>{c.cfg.seed};
    c.sweep = std::move(s);
  }

  static const std::vector<std::string> solvers{"agda", "sgda", "stoc_agda", "vr_agda", "one_sided_agda"};
  if (std::find(solvers.begin(), solvers.end(), c.solver.name) == solvers.end())
    throw ConfigError("solver: unknown name '" + c.solver.name + "'");
  if (c.solver.noise != "none" && c.solver.noise != "component" && c.solver.noise != "gaussian")
    throw ConfigError("solver: noise must be none, component or gaussian");
  try {
    c.cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

[[nodiscard]] inline ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config " + path.string());
  Json j;
  try {
    j = Json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return parse_experiment_config(j);
}

/// Builds the problem a ProblemSpec describes. Data-loading failures become ConfigError.
[[nodiscard]] inline ProblemPtr build_problem(const ProblemSpec& s) {
  try {
    if (s.name == "toy") return make_toy();
    if (s.name == "logistic_bilinear") return make_logistic_bilinear();
    if (s.name != "rls") throw ConfigError("problem: unknown name '" + s.name + "'");
    RlsDataset d;
    if (s.recipe == "csv") {
      if (s.A_path.empty() || s.y0_path.empty()) throw ConfigError("problem: csv recipe needs A and y0 paths");
      d = load_rls_dataset({s.A_path, s.y0_path, s.C_path}, s.lambda_reg.value_or(2.0));
    } else {
      RlsGenOptions o;
      if (s.recipe == "dataset1")
        o.recipe = RlsRecipe::Dataset1;
      else if (s.recipe == "dataset3")
        o.recipe = RlsRecipe::Dataset3;
      else
        throw ConfigError("problem: unknown rls recipe '" + s.recipe + "'");
      o.n_samples = s.n_samples;
      o.m = s.m;
      o.seed = s.seed;
      o.rank_fraction = s.rank_fraction;
      d = gen_rls_dataset(o);
      if (s.lambda_reg) d.lambda_reg = *s.lambda_reg;
    }
    return make_rls(std::move(d));
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("problem: ") + e.what());
  }
}

[[nodiscard]] inline Iterate build_start(const MinimaxProblem& p, const InitSpec& s) {
  Iterate it{Vector::Zero(p.dim_x()), Vector::Zero(p.dim_y())};
  if (s.x0) {
    if (static_cast<Index>(s.x0->size()) != p.dim_x() || static_cast<Index>(s.y0->size()) != p.dim_y())
      throw ConfigError("init: x0/y0 lengths do not match the problem dimensions");
    it.x = Eigen::Map<const Vector>(s.x0->data(), p.dim_x());
    it.y = Eigen::Map<const Vector>(s.y0->data(), p.dim_y());
  } else if (s.seed) {
    std::mt19937_64 rng(*s.seed);
    std::normal_distribution<double> normal(0.0, s.scale);
    for (Index i = 0; i < it.x.size(); ++i) it.x[i] = normal(rng);
    for (Index i = 0; i < it.y.size(); ++i) it.y[i] = normal(rng);
  }
  if (!it.is_finite()) throw ConfigError("init: starting point must be finite");
  return it;
}

/// Fully resolved run: stepsizes, loop counts and noise model.
struct ResolvedRun {
  std::string solver;
  StepSchedule schedule;
  SolverConfig cfg;
  NoiseModel noise;
};

[[nodiscard]] inline ResolvedRun resolve_run(const ExperimentConfig& c, const MinimaxProblem& p) {
  ResolvedRun r;
  r.solver = c.solver.name;
  r.cfg = c.cfg;
  const ScheduleSpec& s = c.schedule;
  try {
    if (s.kind == "constant" || s.kind == "diminishing") {
      if (!s.tau1 || !s.tau2) throw ConfigError("schedule: tau1 and tau2 are required");
      if (s.kind == "constant") {
        r.schedule = StepSchedule::constant(*s.tau1, *s.tau2);
      } else {
        if (!s.gamma) throw ConfigError("schedule: diminishing schedule needs gamma");
        r.schedule = StepSchedule::diminishing(*s.tau1, *s.tau2, *s.gamma);
      }
    } else if (s.kind == "preset") {
      const auto consts = p.constants();
      if (!consts) throw ConfigError("schedule: preset '" + s.preset + "' needs the problem's analytic constants");
      const ProblemConstants k = *consts;
      if (s.preset == "agda_theoretical") {
        r.schedule = preset_agda_theoretical(k.l, k.mu1, k.mu2);
      } else if (s.preset == "stoc_diminishing") {
        const double beta = s.beta.value_or(3.0 / k.mu1);
        const double gamma = s.gamma.value_or(minimal_diminishing_gamma(k.l, k.mu1, k.mu2, beta));
        r.schedule = preset_stoc_diminishing(k.l, k.mu1, k.mu2, beta, gamma);
      } else if (s.preset == "one_sided") {
        r.schedule = preset_one_sided(k.l, k.mu2);
      } else if (s.preset == "vr_agda") {
        VrRegime regime = VrRegime::Auto;
        if (s.regime == "1")
          regime = VrRegime::Regime1;
        else if (s.regime == "2")
          regime = VrRegime::Regime2;
        else if (s.regime != "auto")
          throw ConfigError("schedule: regime must be auto, 1 or 2");
        const VrParams vp = preset_vr_agda(static_cast<std::uint64_t>(p.num_components()), k.l, k.mu1, k.mu2,
                                           s.alpha.value_or(0.05), s.beta.value_or(0.05), regime);
        r.schedule = StepSchedule::constant(vp.tau1, vp.tau2);
        r.cfg.vr_inner_N = vp.N;
        r.cfg.vr_outer_T = vp.T;
      } else {
        throw ConfigError("schedule: unknown preset '" + s.preset + "'");
      }
    } else {
      throw ConfigError("schedule: kind must be constant, diminishing or preset");
    }
    if (c.solver.noise == "component")
      r.noise = NoiseModel::component_sampling();
    else if (c.solver.noise == "gaussian")
      r.noise = NoiseModel::gaussian(c.solver.sigma);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("schedule: ") + e.what());
  }
  if (r.noise.kind != NoiseModel::Kind::None && r.solver != "stoc_agda")
    throw ConfigError("solver: noise applies to stoc_agda only");
  if ((r.solver == "vr_agda" || r.solver == "one_sided_agda") && r.schedule.kind != ScheduleKind::Constant)
    throw ConfigError("solver: " + r.solver + " needs constant stepsizes");
  return r;
}

[[nodiscard]] inline RunResult execute(const MinimaxProblem& p, const ResolvedRun& r, const Iterate& start) {
  if (r.solver == "agda") return agda_run(p, r.schedule, start, r.cfg);
  if (r.solver == "sgda") return sgda_run(p, r.schedule, start, r.cfg);
  if (r.solver == "stoc_agda") return stoc_agda_run(p, r.schedule, start, r.cfg, r.noise);
  if (r.solver == "vr_agda") return vr_agda_run(p, r.schedule.tau1_base, r.schedule.tau2_base, start, r.cfg);
  return one_sided_agda_run(p, r.schedule.tau1_base, r.schedule.tau2_base, r.cfg.max_iters, start, r.cfg.seed,
                            r.cfg.metrics_every);
}

/// Log-linear fit over the longest prefix of the trace whose potentials are
/// finite and positive; empty when that prefix is shorter than 10 records.
[[nodiscard]] inline std::optional<RateFit> trace_rate_fit(const Trace& trace) {
  std::size_t last = 0;
  while (last < trace.size() && trace[last].potential && std::isfinite(*trace[last].potential) &&
         *trace[last].potential > 0.0)
    ++last;
  if (last < 10) return std::nullopt;
  return rate_fit(trace, 0, last);
}

namespace detail {
inline Json number_or_null(std::optional<double> v) {
  if (!v || !std::isfinite(*v)) return nullptr;
  return *v;
}
}  // namespace detail

[[nodiscard]] inline Json run_summary(const MinimaxProblem& p, const ResolvedRun& r, const RunResult& res,
                                      const std::string& trace_path) {
  Json j;
  j["problem"] = p.name();
  j["solver"] = r.solver;
  j["status"] = std::string(to_string(res.status));
  j["iterations"] = res.iterations;
  j["tau1"] = r.schedule.tau1_base;
  j["tau2"] = r.schedule.tau2_base;
  const TraceRecord& last = res.trace.back();
  j["grad_evals"] = last.grad_evals;
  j["full_gradients"] = static_cast<double>(last.grad_evals) / static_cast<double>(p.num_components());
  j["final_potential"] = detail::number_or_null(last.potential);
  j["final_grad_norm"] = detail::number_or_null(std::hypot(last.grad_x_norm, last.grad_y_norm));
  if (const auto fit = trace_rate_fit(res.trace))
    j["rate_fit"] = {{"rho_hat", fit->rho_hat}, {"r_squared", fit->r_squared}, {"first", fit->first},
                     {"last", fit->last}};
  else
    j["rate_fit"] = nullptr;
  j["trace"] = trace_path;
  return j;
}

struct SweepRow {
  double tau1 = 0.0, tau2 = 0.0;
  std::uint64_t seed = 0;
  RunStatus status = RunStatus::Completed;
  std::optional<double> final_potential;
  double final_grad_norm = 0.0;
  std::optional<double> rho_hat;
  std::uint64_t iterations = 0;
  std::uint64_t grad_evals = 0;
  bool best = false;
};

/// Runs every (tau1, tau2, seed) cell with constant stepsizes. Rows come back
/// in grid order (tau1 outermost, seed innermost) whatever the thread count.
/// The best row has the smallest final potential among Completed runs (the
/// final gradient norm when the problem has no potential).
[[nodiscard]] inline std::vector<SweepRow> run_sweep(const ExperimentConfig& c, unsigned threads) {
  if (!c.sweep) throw ConfigError("sweep: config has no 'sweep' block");
  const SweepSpec& g = *c.sweep;
  if (g.tau1.empty() || g.tau2.empty() || g.seeds.empty()) throw ConfigError("sweep: grid is empty");
  const ProblemPtr p = build_problem(c.problem);
  const Iterate start = build_start(*p, c.init);
  ExperimentConfig base = c;
  base.schedule = ScheduleSpec{};
  base.schedule.tau1 = g.tau1.front();
  base.schedule.tau2 = g.tau2.front();
  if (c.schedule.kind == "preset" && c.schedule.preset == "vr_agda") {
    // Keep the preset's loop counts; only the stepsizes are swept.
    const ResolvedRun preset = resolve_run(c, *p);
    base.cfg.vr_inner_N = preset.cfg.vr_inner_N;
    base.cfg.vr_outer_T = preset.cfg.vr_outer_T;
  }
  for (double t : g.tau1)
    if (!(t > 0.0 && std::isfinite(t))) throw ConfigError("sweep: stepsizes must be positive");
  for (double t : g.tau2)
    if (!(t > 0.0 && std::isfinite(t))) throw ConfigError("sweep: stepsizes must be positive");
  const ResolvedRun templ = resolve_run(base, *p);

  std::vector<SweepRow> rows;
  for (double t1 : g.tau1)
    for (double t2 : g.tau2)
      for (std::uint64_t seed : g.seeds) {
        SweepRow r;
        r.tau1 = t1;
        r.tau2 = t2;
        r.seed = seed;
        rows.push_back(r);
      }

  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto worker = [&] {
    for (std::size_t k = next++; k < rows.size(); k = next++) {
      try {
        SweepRow& row = rows[k];
        ResolvedRun run = templ;
        run.schedule = StepSchedule::constant(row.tau1, row.tau2);
        run.cfg.seed = row.seed;
        const RunResult res = execute(*p, run, start);
        const TraceRecord& last = res.trace.back();
        row.status = res.status;
        row.final_potential = last.potential;
        row.final_grad_norm = std::hypot(last.grad_x_norm, last.grad_y_norm);
        if (const auto fit = trace_rate_fit(res.trace)) row.rho_hat = fit->rho_hat;
        row.iterations = res.iterations;
        row.grad_evals = last.grad_evals;
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  const unsigned n_threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(rows.size())));
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < n_threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);

  std::optional<std::size_t> best;
  auto score = [](const SweepRow& r) { return r.final_potential ? *r.final_potential : r.final_grad_norm; };
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k].status != RunStatus::Completed || !std::isfinite(score(rows[k]))) continue;
    if (!best || score(rows[k]) < score(rows[*best])) best = k;
  }
  if (best) rows[*best].best = true;
  return rows;
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "tau1,tau2,seed,status,final_potential,final_grad_norm,rho_hat,iterations,grad_evals,best\n";
  for (const auto& r : rows) {
    os << format_double(r.tau1) << ',' << format_double(r.tau2) << ',' << r.seed << ',' << to_string(r.status) << ','
       << (r.final_potential ? format_double(*r.final_potential) : "") << ',' << format_double(r.final_grad_norm)
       << ',' << (r.rho_hat ? format_double(*r.rho_hat) : "") << ',' << r.iterations << ',' << r.grad_evals << ','
       << (r.best ? 1 : 0) << '\n';
  }
}

[[nodiscard]] inline Json pl_estimate_json(const MinimaxProblem& p, const PlEstimate& e) {
  auto witness = [](const std::optional<Iterate>& w) -> Json {
    if (!w) return nullptr;
    return {{"x", std::vector<double>(w->x.data(), w->x.data() + w->x.size())},
            {"y", std::vector<double>(w->y.data(), w->y.data() + w->y.size())}};
  };
  Json j;
  j["problem"] = p.name();
  j["mu1_hat"] = detail::number_or_null(e.mu1_hat);
  j["mu2_hat"] = detail::number_or_null(e.mu2_hat);
  j["mu1_witness"] = witness(e.mu1_witness);
  j["mu2_witness"] = witness(e.mu2_witness);
  j["region"] = {{"x_lo", e.grid.region.x_lo},
                 {"x_hi", e.grid.region.x_hi},
                 {"y_lo", e.grid.region.y_lo},
                 {"y_hi", e.grid.region.y_hi}};
  j["resolution"] = e.grid.resolution;
  if (const auto c = p.constants()) j["analytic"] = {{"l", c->l}, {"mu1", c->mu1}, {"mu2", c->mu2}};
  return j;
}

}  // namespace agda
