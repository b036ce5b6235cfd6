// Command-line front end: run, sweep, gen-data and verify.
//
// Exit codes: 0 success (including diverged runs, which are reported in the
// summary), 1 unexpected I/O failure, 2 invalid configuration or arguments.

#include "agda/experiment.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <sstream>

namespace {

constexpr int kExitIo = 1;
constexpr int kExitConfig = 2;

agda::ExperimentConfig load(const std::string& path, const std::optional<std::uint64_t>& seed) {
  agda::ExperimentConfig c = agda::load_experiment_config(path);
  if (seed) c.cfg.seed = *seed;
  return c;
}

int cmd_run(const std::string& config, const std::string& out, const std::optional<std::uint64_t>& seed) {
  const agda::ExperimentConfig c = load(config, seed);
  const agda::ProblemPtr p = agda::build_problem(c.problem);
  const agda::ResolvedRun run = agda::resolve_run(c, *p);
  const agda::Iterate start = agda::build_start(*p, c.init);
  const agda::RunResult res = agda::execute(*p, run, start);
  const std::string trace_path = out.empty() ? c.output : out;
  if (!trace_path.empty()) agda::write_trace_csv(trace_path, res.trace);
  std::cout << agda::run_summary(*p, run, res, trace_path).dump() << std::endl;
  return 0;
}

int cmd_sweep(const std::string& config, const std::string& out, const std::optional<std::uint64_t>& seed,
              unsigned threads) {
  agda::ExperimentConfig c = load(config, seed);
  if (seed && c.sweep) c.sweep->seeds = {*seed};
  const auto rows = agda::run_sweep(c, threads);
  const std::string path = out.empty() ? c.output : out;
  if (path.empty()) {
    agda::write_sweep_csv(std::cout, rows);
  } else {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    agda::write_sweep_csv(os, rows);
  }
  return 0;
}

int cmd_gen_data(const std::string& recipe, agda::Index n_samples, agda::Index m, std::uint64_t seed,
                 double rank_fraction, const std::string& out) {
  agda::RlsGenOptions o;
  if (recipe == "dataset1")
    o.recipe = agda::RlsRecipe::Dataset1;
  else if (recipe == "dataset3")
    o.recipe = agda::RlsRecipe::Dataset3;
  else
    throw agda::ConfigError("gen-data: recipe must be dataset1 or dataset3");
  o.n_samples = n_samples;
  o.m = m;
  o.seed = seed;
  o.rank_fraction = rank_fraction;
  agda::RlsDataset d;
  try {
    d = agda::gen_rls_dataset(o);
  } catch (const std::invalid_argument& e) {
    throw agda::ConfigError(e.what());
  }
  agda::save_rls_dataset(d, out);
  agda::Json j{{"recipe", recipe},     {"n_samples", n_samples}, {"m", m},
               {"seed", seed},         {"C_rows", d.C.rows()},   {"lambda_reg", d.lambda_reg},
               {"dir", out}};
  std::cout << j.dump() << std::endl;
  return 0;
}

int cmd_verify(const std::string& config, const std::string& problem, const std::vector<double>& region,
               agda::Index resolution) {
  agda::ProblemSpec spec;
  if (!config.empty())
    spec = agda::load_experiment_config(config).problem;
  else
    spec.name = problem;
  const agda::ProblemPtr p = agda::build_problem(spec);
  if (region.size() != 4) throw agda::ConfigError("verify: --region needs x_lo,x_hi,y_lo,y_hi");
  const agda::Box box{region[0], region[1], region[2], region[3]};
  agda::PlEstimate est;
  try {
    est = agda::pl_estimate_grid(*p, box, resolution);
  } catch (const std::logic_error& e) {
    throw agda::ConfigError(e.what());
  }
  std::cout << agda::pl_estimate_json(*p, est).dump() << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Alternating gradient descent ascent experiments"};
  app.require_subcommand(1);

  std::string config, out;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;

  auto* run = app.add_subcommand("run", "Run one experiment and write its trace CSV");
  run->add_option("--config", config, "Experiment JSON")->required();
  run->add_option("--out", out, "Trace CSV path (overrides the config)");
  run->add_option("--seed", seed, "Solver seed (overrides the config)");

  auto* sweep = app.add_subcommand("sweep", "Grid over constant stepsizes and seeds");
  sweep->add_option("--config", config, "Experiment JSON with a sweep block")->required();
  sweep->add_option("--out", out, "Summary CSV path (default: standard output)");
  sweep->add_option("--seed", seed, "Single seed replacing the sweep seeds");
  sweep->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);

  std::string recipe = "dataset1";
  agda::Index n_samples = 1000, m = 500;
  std::uint64_t data_seed = 0;
  double rank_fraction = 0.8;
  auto* gen = app.add_subcommand("gen-data", "Generate a robust least squares dataset (A.csv, y0.csv, C.csv)");
  gen->add_option("--recipe", recipe, "dataset1 or dataset3");
  gen->add_option("--n-samples", n_samples, "Rows of A");
  gen->add_option("--m", m, "Columns of A");
  gen->add_option("--seed", data_seed, "Generator seed");
  gen->add_option("--rank-fraction", rank_fraction, "dataset3: rank of M as a fraction of n-samples");
  gen->add_option("--out", out, "Output directory")->required();

  std::string problem = "toy";
  std::vector<double> region{-2.0, 2.0, -2.0, 2.0};
  agda::Index resolution = 101;
  auto* verify = app.add_subcommand("verify", "Grid estimate of the two-sided PL constants, printed as JSON");
  verify->add_option("--problem", problem, "Problem name");
  verify->add_option("--config", config, "Take the problem from an experiment JSON");
  verify->add_option("--region", region, "x_lo,x_hi,y_lo,y_hi")->delimiter(',');
  verify->add_option("--resolution", resolution, "Grid points per axis");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (run->parsed()) return cmd_run(config, out, seed);
    if (sweep->parsed()) return cmd_sweep(config, out, seed, threads);
    if (gen->parsed()) return cmd_gen_data(recipe, n_samples, m, data_seed, rank_fraction, out);
    if (verify->parsed()) return cmd_verify(config, problem, region, resolution);
  } catch (const agda::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  }
  return kExitConfig;
}
