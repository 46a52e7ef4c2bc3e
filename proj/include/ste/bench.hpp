#ifndef STE_BENCH_HPP
#define STE_BENCH_HPP

// Simulation-study harness: registry of test functions, synthetic data,
// experiment execution and report emission.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ste/core.hpp"
#include "ste/csv.hpp"
#include "ste/fitting.hpp"
#include "ste/metrics.hpp"
#include "ste/parallel.hpp"
#include "ste/rng.hpp"

namespace ste {

struct TestFunction {
  std::string id;
  std::size_t d = 1;
  std::function<double(std::span<const double>)> eval;
  std::vector<double> fit_lower;  // inputs are drawn from (fit_lower, fit_upper]
  std::vector<double> fit_upper;
  GridSpec domain;  // evaluation window
  std::vector<double> x0;
  double sigma = 0.0;
  std::size_t m_max = 1;
  std::vector<std::size_t> k_list;
};

namespace detail {

inline std::vector<TestFunction> build_registry() {
  std::vector<TestFunction> fns;
  fns.push_back({"identity", 1, [](std::span<const double> x) { return x[0]; }, {0.0}, {5.0},
                 GridSpec{{0.0}, {7.0}, 1000}, {0.0}, 1e-5, 15, {500}});
  fns.push_back({"cubic", 1, [](std::span<const double> x) { return x[0] * x[0] * x[0] - 6.0 * x[0]; }, {0.0},
                 {3.0}, GridSpec{{0.0}, {4.0}, 1000}, {0.0}, 1.0, 5, {25, 100, 500}});
  fns.push_back({"trigmix", 1,
                 [](std::span<const double> x) {
                   const double t = x[0];
                   return t * std::sin(t) + std::exp(-t * t) + t * std::cos(t) / (t * t + 1.0);
                 },
                 {0.0}, {3.0}, GridSpec{{0.0}, {4.0}, 1000}, {0.0}, 0.2, 6, {25, 100, 500}});
  fns.push_back({"expquad2d", 2, [](std::span<const double> x) { return std::exp(-x[0] * x[0] + x[1]); },
                 {0.0, 0.0}, {1.0, 1.0}, GridSpec{{0.0, 0.0}, {1.2, 1.2}, 200}, {-0.05, -0.05}, 0.5, 6, {500}});
  fns.push_back({"poly2d", 2,
                 [](std::span<const double> x) {
                   const double a = x[0], b = x[1];
                   return a * a * a * b - b * b * std::exp(a) + 3.0 * a * b;
                 },
                 {0.0, 0.0}, {1.0, 1.0}, GridSpec{{0.0, 0.0}, {1.2, 1.2}, 200}, {-0.1, -0.1}, 0.05, 8, {500}});
  return fns;
}

}  // namespace detail

inline const std::vector<TestFunction>& test_functions() {
  static const std::vector<TestFunction> registry = detail::build_registry();
  return registry;
}

inline const TestFunction& test_function(std::string_view id) {
  for (const auto& f : test_functions())
    if (f.id == id) return f;
  throw DataError("unknown test function '" + std::string(id) + "'");
}

/// K inputs uniform on the fit window, sorted lexicographically, with
/// y = f(x) + N(0, sigma^2).
inline Dataset make_dataset(const TestFunction& fn, std::size_t k, double sigma, const RngStream& rng) {
  if (k < 1) throw std::invalid_argument("make_dataset needs K >= 1");
  if (!(sigma >= 0.0)) throw std::invalid_argument("noise sigma must be >= 0");
  auto eng = rng.engine();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::vector<double>> pts(k, std::vector<double>(fn.d));
  for (auto& p : pts)
    for (std::size_t r = 0; r < fn.d; ++r)
      p[r] = fn.fit_lower[r] + (fn.fit_upper[r] - fn.fit_lower[r]) * (1.0 - unit(eng));
  std::sort(pts.begin(), pts.end());
  std::normal_distribution<double> noise(0.0, 1.0);
  Dataset data;
  data.d = fn.d;
  for (const auto& p : pts) {
    data.X.insert(data.X.end(), p.begin(), p.end());
    data.y.push_back(fn.eval(p) + (sigma > 0.0 ? sigma * noise(eng) : 0.0));
  }
  return data;
}

/// Smooth surface of time t and an index level x used by the two-index
/// forecasting dataset.
inline double two_index_surface(double t, double x) { return 0.5 + 0.25 * t + 0.08 * x + 0.04 * t * x; }

/// Daily series over t in (0, 1.2]: an index x(t) that trends with
/// oscillations and noise, and a response y = surface(t, x) + noise.
inline Dataset make_two_index_dataset(std::size_t k, double sigma, const RngStream& rng) {
  if (k < 2) throw std::invalid_argument("two-index dataset needs K >= 2");
  auto eng = rng.engine();
  std::normal_distribution<double> noise(0.0, 1.0);
  Dataset data;
  data.d = 2;
  for (std::size_t i = 0; i < k; ++i) {
    const double t = 1.2 * static_cast<double>(i + 1) / static_cast<double>(k);
    const double x = 1.6 + 1.8 * t + 0.25 * std::sin(5.0 * t) + 0.03 * noise(eng);
    data.X.push_back(t);
    data.X.push_back(x);
    data.y.push_back(two_index_surface(t, x) + sigma * noise(eng));
  }
  return data;
}

struct ExperimentSpec {
  std::string name;
  std::string function_id;
  std::size_t k = 500;
  double sigma = 0.0;
  std::size_t m_max = 1;
  std::vector<double> fit_lower;
  std::vector<double> fit_upper;
  std::vector<double> eval_lower;
  std::vector<double> eval_upper;
  std::size_t points_per_dim = 1000;
  std::optional<std::vector<double>> x0;  // absent: choose_origin
  std::size_t n_seeds = 5;
  std::uint64_t seed = 1;
  std::size_t n_starts = 20;
  int max_iters = 500;
  double select_tol = 1e-3;
  double delta_frac = 0.05;

  void validate() const {
    const auto& fn = test_function(function_id);
    if (k < 1 || m_max < 1 || n_seeds < 1 || n_starts < 1 || max_iters < 1)
      throw DataError("experiment '" + name + "': counts must be positive");
    if (fit_lower.size() != fn.d || fit_upper.size() != fn.d || eval_lower.size() != fn.d ||
        eval_upper.size() != fn.d)
      throw DataError("experiment '" + name + "': window dimension does not match the function");
    for (std::size_t r = 0; r < fn.d; ++r) {
      if (!(fit_lower[r] < fit_upper[r]) || !(eval_lower[r] < eval_upper[r]))
        throw DataError("experiment '" + name + "': empty window");
      if (eval_lower[r] > fit_lower[r] || eval_upper[r] < fit_upper[r])
        throw DataError("experiment '" + name + "': evaluation window must contain the fit window");
    }
    if (x0 && x0->size() != fn.d) throw DataError("experiment '" + name + "': x0 dimension mismatch");
    if (points_per_dim < 2) throw DataError("experiment '" + name + "': points_per_dim must be >= 2");
  }
};

/// The simulation-study settings for one function and sample size.
inline ExperimentSpec default_spec(std::string_view function_id, std::size_t k) {
  const auto& fn = test_function(function_id);
  ExperimentSpec s;
  s.name = fn.id + "_k" + std::to_string(k);
  s.function_id = fn.id;
  s.k = k;
  s.sigma = fn.sigma;
  s.m_max = fn.m_max;
  s.fit_lower = fn.fit_lower;
  s.fit_upper = fn.fit_upper;
  s.eval_lower = fn.domain.lower;
  s.eval_upper = fn.domain.upper;
  s.points_per_dim = fn.domain.points_per_dim;
  s.x0 = fn.x0;
  return s;
}

inline void to_json(nlohmann::ordered_json& j, const ExperimentSpec& s) {
  j = nlohmann::ordered_json{{"name", s.name},
                             {"function", s.function_id},
                             {"K", s.k},
                             {"sigma", s.sigma},
                             {"m_max", s.m_max},
                             {"fit_lower", s.fit_lower},
                             {"fit_upper", s.fit_upper},
                             {"eval_lower", s.eval_lower},
                             {"eval_upper", s.eval_upper},
                             {"points_per_dim", s.points_per_dim}};
  if (s.x0) j["x0"] = *s.x0;
  j["n_seeds"] = s.n_seeds;
  j["seed"] = s.seed;
  j["n_starts"] = s.n_starts;
  j["max_iters"] = s.max_iters;
  j["select_tol"] = s.select_tol;
  j["delta_frac"] = s.delta_frac;
}

/// Reads a spec; omitted fields take the function's defaults.
inline ExperimentSpec spec_from_json(const nlohmann::json& j) {
  try {
    const std::string fid = j.at("function").get<std::string>();
    ExperimentSpec s = default_spec(fid, j.value("K", test_function(fid).k_list.back()));
    s.name = j.value("name", s.name);
    s.sigma = j.value("sigma", s.sigma);
    s.m_max = j.value("m_max", s.m_max);
    s.fit_lower = j.value("fit_lower", s.fit_lower);
    s.fit_upper = j.value("fit_upper", s.fit_upper);
    s.eval_lower = j.value("eval_lower", s.eval_lower);
    s.eval_upper = j.value("eval_upper", s.eval_upper);
    s.points_per_dim = j.value("points_per_dim", s.points_per_dim);
    if (j.contains("x0")) {
      if (j["x0"].is_null())
        s.x0.reset();
      else
        s.x0 = j["x0"].get<std::vector<double>>();
    }
    s.n_seeds = j.value("n_seeds", s.n_seeds);
    s.seed = j.value("seed", s.seed);
    s.n_starts = j.value("n_starts", s.n_starts);
    s.max_iters = j.value("max_iters", s.max_iters);
    s.select_tol = j.value("select_tol", s.select_tol);
    s.delta_frac = j.value("delta_frac", s.delta_frac);
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("experiment spec: ") + e.what());
  }
}

/// A spec file holds one spec object, an array of them, or
/// {"experiments": [...]}.
inline std::vector<ExperimentSpec> specs_from_json(const nlohmann::json& j) {
  std::vector<ExperimentSpec> out;
  const nlohmann::json* list = &j;
  if (j.is_object() && j.contains("experiments")) list = &j["experiments"];
  if (list->is_array()) {
    for (const auto& e : *list) out.push_back(spec_from_json(e));
  } else if (list->is_object()) {
    out.push_back(spec_from_json(*list));
  } else {
    throw DataError("experiment spec must be an object or an array");
  }
  if (out.empty()) throw DataError("experiment spec file lists no experiments");
  return out;
}

struct SeedOutcome {
  std::size_t seed_index = 0;
  bool ok = false;
  std::string error;
  std::size_t chosen_m = 0;
  double rss = 0.0;
  double sigma2_hat = 0.0;
  double d_sq = 0.0;
  double d_l1 = 0.0;
  double wall_time = 0.0;  // seconds
  std::optional<SteModel> model;
};

struct ExperimentReport {
  ExperimentSpec spec;
  std::vector<SeedOutcome> seeds;
  double median_chosen_m = 0.0;
  double median_rss = 0.0;
  double median_sigma2_hat = 0.0;
  double median_d_sq = 0.0;
  double median_d_l1 = 0.0;
  double median_wall_time = 0.0;
};

inline double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Fit configuration used for seed i of an experiment.
inline FitConfig seed_fit_config(const ExperimentSpec& spec, std::size_t seed_index) {
  FitConfig cfg;
  cfg.n_starts = spec.n_starts;
  cfg.max_iters = spec.max_iters;
  cfg.select_tol = spec.select_tol;
  cfg.delta_frac = spec.delta_frac;
  cfg.seed = RngStream::mix(spec.seed, 0x5eed0000ULL + seed_index);
  cfg.threads = 1;
  return cfg;
}

inline SeedOutcome run_seed(const ExperimentSpec& spec, std::size_t seed_index) {
  const auto& fn = test_function(spec.function_id);
  SeedOutcome out;
  out.seed_index = seed_index;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    TestFunction window = fn;
    window.fit_lower = spec.fit_lower;
    window.fit_upper = spec.fit_upper;
    const Dataset data = make_dataset(window, spec.k, spec.sigma, RngStream{spec.seed, seed_index});
    const FitConfig cfg = seed_fit_config(spec, seed_index);
    const std::vector<double> x0 = spec.x0 ? *spec.x0 : choose_origin(data, cfg.delta_frac);
    const SelectedFit sel = select_model(data, spec.m_max, cfg, x0);
    out.chosen_m = sel.chosen_m;
    out.rss = sel.chosen.rss;
    out.sigma2_hat = sel.chosen.sigma2;
    out.model = sel.chosen.model;

    const GridSpec grid = open_lower_grid(spec.eval_lower, spec.eval_upper, spec.points_per_dim);
    const auto pts = grid.points();
    const auto f_hat = predict_grid(sel.chosen.model, pts);
    std::vector<double> truth(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) truth[i] = fn.eval(pts[i]);
    out.d_sq = integrated_sq_distance(f_hat, truth, grid);
    out.d_l1 = l1_distance(f_hat, truth, grid);
    out.ok = true;
  } catch (const Error& e) {
    out.error = e.what();
  }
  out.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

/// Runs every seed and attaches medians over the successful ones. Throws
/// FitError only when all seeds fail.
inline ExperimentReport run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  ExperimentReport rep;
  rep.spec = spec;
  rep.seeds.resize(spec.n_seeds);
  parallel_for(spec.n_seeds, [&](std::size_t i) { rep.seeds[i] = run_seed(spec, i); });
  std::vector<double> m, rss_v, s2, dsq, dl1, wt;
  for (const auto& s : rep.seeds) {
    if (!s.ok) continue;
    m.push_back(static_cast<double>(s.chosen_m));
    rss_v.push_back(s.rss);
    s2.push_back(s.sigma2_hat);
    dsq.push_back(s.d_sq);
    dl1.push_back(s.d_l1);
    wt.push_back(s.wall_time);
  }
  if (m.empty()) throw FitError("experiment '" + spec.name + "': every seed failed: " + rep.seeds.front().error);
  rep.median_chosen_m = median(m);
  rep.median_rss = median(rss_v);
  rep.median_sigma2_hat = median(s2);
  rep.median_d_sq = median(dsq);
  rep.median_d_l1 = median(dl1);
  rep.median_wall_time = median(wt);
  return rep;
}

/// One row per seed and a final median row. Wall times are left out so the
/// report is reproducible byte for byte; see timing_csv.
inline std::string report_csv(const ExperimentReport& rep) {
  std::string out = "seed,status,chosen_m,rss,sigma2_hat,d_sq,d_l1\n";
  for (const auto& s : rep.seeds) {
    out += std::to_string(s.seed_index) + ',' + (s.ok ? "ok" : "failed");
    if (s.ok) {
      out += ',' + std::to_string(s.chosen_m) + ',' + format_double(s.rss) + ',' + format_double(s.sigma2_hat) +
             ',' + format_double(s.d_sq) + ',' + format_double(s.d_l1);
    } else {
      out += ",,,,,";
    }
    out += '\n';
  }
  out += "median,ok," + format_double(rep.median_chosen_m) + ',' + format_double(rep.median_rss) + ',' +
         format_double(rep.median_sigma2_hat) + ',' + format_double(rep.median_d_sq) + ',' +
         format_double(rep.median_d_l1) + '\n';
  return out;
}

inline std::string timing_csv(const std::vector<ExperimentReport>& reports) {
  std::string out = "experiment,seed,wall_time_s\n";
  for (const auto& rep : reports) {
    for (const auto& s : rep.seeds)
      out += rep.spec.name + ',' + std::to_string(s.seed_index) + ',' + format_double(s.wall_time) + '\n';
    out += rep.spec.name + ",median," + format_double(rep.median_wall_time) + '\n';
  }
  return out;
}

}  // namespace ste

#endif  // STE_BENCH_HPP
