// ste: fit, evaluate and simulate Taylor-expansion point process estimators.

#include <cstdint>
#include <exception>
#include <iostream>
#include <new>
#include <optional>
#include <stdexcept>
#include <string>

#include <CLI11.hpp>

#include "ste/cli.hpp"

namespace {

using namespace ste::cli;

std::optional<std::vector<double>> optional_list(const std::string& s, const char* what) {
  if (s.empty()) return std::nullopt;
  return parse_list(s, what);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Taylor-expansion Poisson point process estimator"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  // fit
  FitOptions fit;
  std::string fit_x0, fit_rescale, fit_rule = "adjusted";
  auto* c_fit = app.add_subcommand("fit", "Fit models with 1..M_max components and select M");
  c_fit->add_option("--input", fit.input, "Training CSV: x_1..x_d, y")->required();
  c_fit->add_option("--m-max", fit.m_max, "Largest number of components")->required();
  c_fit->add_option("--starts", fit.starts, "Optimizer starts per M")->capture_default_str();
  c_fit->add_option("--seed", fit.seed, "Random seed")->capture_default_str();
  c_fit->add_option("--delta-frac", fit.delta_frac, "Origin offset as a fraction of each input range")
      ->capture_default_str();
  c_fit->add_option("--x0", fit_x0, "Expansion origin in original units, v1,...,vd");
  c_fit->add_option("--rescale", fit_rescale, "Column divisors c1,...,c(d+1), or one value for all");
  c_fit->add_option("--max-iters", fit.max_iters, "Optimizer iterations per start")->capture_default_str();
  c_fit->add_option("--select-tol", fit.select_tol, "Relative tie window for choosing M")->capture_default_str();
  c_fit->add_option("--rule", fit_rule, "Order rule: adjusted or raw")
      ->check(CLI::IsMember({"adjusted", "raw"}))
      ->capture_default_str();
  c_fit->add_option("--threads", fit.threads, "Worker threads (0: all cores)")->capture_default_str();
  c_fit->add_option("--out", fit.out, "Model JSON path")->required();

  // predict
  PredictOptions pred;
  std::string pred_grid, pred_points;
  auto* c_pred = app.add_subcommand("predict", "Evaluate a fitted model on a grid or at listed points");
  c_pred->add_option("--model", pred.model, "Model JSON")->required();
  auto* o_grid = c_pred->add_option("--grid", pred_grid, "lo:hi:n per dimension, comma separated");
  auto* o_points = c_pred->add_option("--points", pred_points, "CSV whose first d columns are coordinates");
  o_grid->excludes(o_points);
  c_pred->add_option("--out", pred.out, "Output CSV")->required();

  // envelope
  EnvelopeOptions env;
  auto* c_env = app.add_subcommand("envelope", "Pointwise quantile bands of simulated expansions");
  c_env->add_option("--model", env.model, "Model JSON")->required();
  c_env->add_option("--grid", env.grid, "lo:hi:n per dimension, comma separated")->required();
  c_env->add_option("--n-real", env.n_real, "Number of realizations")->capture_default_str();
  c_env->add_option("--alpha", env.alpha, "Two-sided band level")->capture_default_str();
  c_env->add_option("--seed", env.seed, "Random seed")->capture_default_str();
  c_env->add_option("--out", env.out, "Output CSV")->required();

  // simulate
  SimulateOptions sim;
  std::string sim_grid, sim_curves;
  auto* c_sim = app.add_subcommand("simulate", "Draw point patterns from a fitted model");
  c_sim->add_option("--model", sim.model, "Model JSON")->required();
  c_sim->add_option("--n", sim.n, "Number of realizations")->required();
  c_sim->add_option("--seed", sim.seed, "Random seed")->capture_default_str();
  c_sim->add_option("--out", sim.out, "Event CSV")->required();
  c_sim->add_option("--grid", sim_grid, "Also evaluate each realization on this grid");
  c_sim->add_option("--curves", sim_curves, "CSV for the realization values on --grid");

  // distance
  DistanceOptions dist;
  auto* c_dist = app.add_subcommand("distance", "Integrated squared and absolute distance of two grid CSVs");
  c_dist->add_option("--pred", dist.pred, "Estimate on the grid")->required();
  c_dist->add_option("--truth", dist.truth, "Reference on the grid")->required();
  c_dist->add_option("--grid", dist.grid, "lo:hi:n per dimension, same n on every axis")->required();

  // bench
  BenchOptions bench;
  std::size_t bench_seeds = 0;
  std::string bench_timing;
  auto* c_bench = app.add_subcommand("bench", "Run simulation-study experiments");
  c_bench->add_option("--spec", bench.spec, "Experiment spec JSON")->required();
  auto* o_seeds = c_bench->add_option("--seeds", bench_seeds, "Seeds per experiment (overrides the spec)");
  c_bench->add_option("--out", bench.out, "Output directory")->required();
  c_bench->add_option("--timing", bench_timing, "Also write wall times to this CSV");

  // gen
  GenOptions gen;
  double gen_sigma = 0.0;
  auto* c_gen = app.add_subcommand("gen", "Write a synthetic dataset");
  c_gen->add_option("--function", gen.function_id, "identity, cubic, trigmix, expquad2d, poly2d or two_index")
      ->required();
  c_gen->add_option("--k", gen.k, "Number of rows")->capture_default_str();
  auto* o_sigma = c_gen->add_option("--sigma", gen_sigma, "Noise standard deviation");
  c_gen->add_option("--seed", gen.seed, "Random seed")->capture_default_str();
  c_gen->add_option("--out", gen.out, "Output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error(std::cerr, "usage", e.what(), kUsage);
  }

  try {
    if (*c_fit) {
      fit.x0 = optional_list(fit_x0, "--x0");
      if (!fit_rescale.empty()) fit.rescale = parse_list(fit_rescale, "--rescale");
      fit.rule = fit_rule == "raw" ? ste::OrderRule::raw : ste::OrderRule::adjusted;
      const auto result = cmd_fit(fit);
      std::cout << "chosen_m " << result.chosen_m << " rss " << ste::format_double(result.chosen.rss) << '\n';
    } else if (*c_pred) {
      if (!pred_grid.empty()) pred.grid = pred_grid;
      if (!pred_points.empty()) pred.points = pred_points;
      cmd_predict(pred);
    } else if (*c_env) {
      cmd_envelope(env);
    } else if (*c_sim) {
      if (!sim_grid.empty()) sim.grid = sim_grid;
      if (!sim_curves.empty()) sim.curves = sim_curves;
      cmd_simulate(sim);
    } else if (*c_dist) {
      std::cout << distance_json(cmd_distance(dist));
    } else if (*c_bench) {
      if (o_seeds->count() > 0) bench.seeds = bench_seeds;
      if (!bench_timing.empty()) bench.timing = bench_timing;
      for (const auto& rep : cmd_bench(bench))
        std::cout << rep.spec.name << " median_chosen_m " << ste::format_double(rep.median_chosen_m) << " median_d_sq "
                  << ste::format_double(rep.median_d_sq) << '\n';
    } else if (*c_gen) {
      if (o_sigma->count() > 0) gen.sigma = gen_sigma;
      cmd_gen(gen);
    }
  } catch (const UsageError& e) {
    return report_error(std::cerr, "usage", e.what(), kUsage);
  } catch (const ste::RangeError& e) {
    return report_error(std::cerr, "numeric", e.what(), kNumeric);
  } catch (const ste::FitError& e) {
    return report_error(std::cerr, "numeric", e.what(), kNumeric);
  } catch (const ste::Error& e) {
    return report_error(std::cerr, "data", e.what(), kData);
  } catch (const std::invalid_argument& e) {
    return report_error(std::cerr, "data", e.what(), kData);
  } catch (const std::bad_alloc&) {
    return report_error(std::cerr, "numeric", "out of memory", kNumeric);
  } catch (const std::exception& e) {
    return report_error(std::cerr, "numeric", e.what(), kNumeric);
  }
  return kOk;
}
