#ifndef STE_CLI_HPP
#define STE_CLI_HPP

// Command implementations behind the ste command-line tool. Argument parsing
// lives in the tool; these functions take parsed options, read and write
// files, and throw ste::Error subclasses on failure.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ste/bench.hpp"
#include "ste/core.hpp"
#include "ste/csv.hpp"
#include "ste/error.hpp"
#include "ste/fitting.hpp"
#include "ste/json.hpp"
#include "ste/metrics.hpp"
#include "ste/rng.hpp"
#include "ste/sim.hpp"

namespace ste::cli {

/// Process exit codes.
enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

/// Thrown for malformed option values that the parser could not catch.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// One axis of a tensor grid: n evenly spaced nodes from lo to hi inclusive.
struct Axis {
  double lo = 0.0;
  double hi = 1.0;
  std::size_t n = 2;
};

namespace detail {

inline double parse_real(std::string_view s, std::string_view what) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (s.empty() || ec != std::errc() || ptr != last || !std::isfinite(v))
    throw UsageError("invalid number '" + std::string(s) + "' in " + std::string(what));
  return v;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t p = s.find(sep, start);
    out.push_back(s.substr(start, p == std::string_view::npos ? std::string_view::npos : p - start));
    if (p == std::string_view::npos) return out;
    start = p + 1;
  }
}

}  // namespace detail

/// Comma-separated reals, e.g. "0.1,2".
inline std::vector<double> parse_list(std::string_view s, std::string_view what) {
  std::vector<double> out;
  for (auto part : detail::split(s, ',')) out.push_back(detail::parse_real(part, what));
  return out;
}

/// "lo:hi:n[,lo:hi:n...]", one group per dimension.
inline std::vector<Axis> parse_grid(std::string_view s) {
  std::vector<Axis> axes;
  for (auto group : detail::split(s, ',')) {
    const auto f = detail::split(group, ':');
    if (f.size() != 3) throw UsageError("grid axis '" + std::string(group) + "' is not lo:hi:n");
    Axis a;
    a.lo = detail::parse_real(f[0], "--grid");
    a.hi = detail::parse_real(f[1], "--grid");
    const double n = detail::parse_real(f[2], "--grid");
    if (n < 2 || n != std::floor(n) || n > 1e8) throw UsageError("grid axis needs an integer count >= 2");
    a.n = static_cast<std::size_t>(n);
    if (!(a.lo < a.hi)) throw UsageError("grid axis needs lo < hi");
    axes.push_back(a);
  }
  return axes;
}

/// Tensor-product nodes, row-major with the last axis varying fastest; the
/// final node of each axis is exactly hi.
inline std::vector<std::vector<double>> grid_points(const std::vector<Axis>& axes) {
  std::size_t total = 1;
  for (const auto& a : axes) total *= a.n;
  std::vector<std::vector<double>> pts(total, std::vector<double>(axes.size()));
  for (std::size_t i = 0; i < total; ++i) {
    std::size_t rest = i;
    for (std::size_t r = axes.size(); r-- > 0;) {
      const auto& a = axes[r];
      const std::size_t j = rest % a.n;
      rest /= a.n;
      pts[i][r] = j + 1 == a.n ? a.hi : a.lo + static_cast<double>(j) * (a.hi - a.lo) / static_cast<double>(a.n - 1);
    }
  }
  return pts;
}

inline GridSpec grid_spec(const std::vector<Axis>& axes) {
  GridSpec g;
  for (const auto& a : axes) {
    if (a.n != axes.front().n) throw UsageError("distance grid needs the same node count on every axis");
    g.lower.push_back(a.lo);
    g.upper.push_back(a.hi);
  }
  g.points_per_dim = axes.front().n;
  return g;
}

inline std::vector<std::string> coord_header(std::size_t d) {
  std::vector<std::string> h;
  for (std::size_t r = 0; r < d; ++r) h.push_back("x" + std::to_string(r + 1));
  return h;
}

inline void require_dim(const std::vector<Axis>& axes, std::size_t d) {
  if (axes.size() != d)
    throw UsageError("grid has " + std::to_string(axes.size()) + " axes, model has dimension " + std::to_string(d));
}

/// Converts points in original units to the model's rescaled units.
inline std::vector<std::vector<double>> to_model_units(const SteModel& model, std::vector<std::vector<double>> pts) {
  for (auto& p : pts)
    for (std::size_t r = 0; r < model.d; ++r) p[r] /= model.rescale[r];
  return pts;
}

// ---------------------------------------------------------------- fit

struct FitOptions {
  std::filesystem::path input;
  std::size_t m_max = 1;
  std::size_t starts = 20;
  std::uint64_t seed = 0;
  double delta_frac = 0.05;
  std::optional<std::vector<double>> x0;  // original units
  std::vector<double> rescale;            // empty: none; one value: all columns
  int max_iters = 500;
  double select_tol = 1e-3;
  OrderRule rule = OrderRule::adjusted;
  unsigned threads = 0;
  std::filesystem::path out;
};

/// Path of the per-M table written next to the model file.
inline std::filesystem::path per_m_path(const std::filesystem::path& model_path) {
  auto p = model_path;
  p.replace_extension();
  p += "_per_m.csv";
  return p;
}

inline SelectedFit cmd_fit(const FitOptions& o) {
  const CsvTable table = read_csv(o.input);
  const Dataset data = dataset_from_table(table, o.rescale);
  std::vector<double> rescale = o.rescale;
  if (rescale.empty()) rescale.assign(data.d + 1, 1.0);
  if (rescale.size() == 1) rescale.assign(data.d + 1, rescale.front());

  FitConfig cfg;
  cfg.n_starts = o.starts;
  cfg.max_iters = o.max_iters;
  cfg.delta_frac = o.delta_frac;
  cfg.select_tol = o.select_tol;
  cfg.rule = o.rule;
  cfg.seed = o.seed;
  cfg.threads = o.threads;
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (o.m_max < 1) throw UsageError("--m-max must be at least 1");

  std::vector<double> x0;
  if (o.x0) {
    if (o.x0->size() != data.d)
      throw UsageError("--x0 has " + std::to_string(o.x0->size()) + " values, data has " + std::to_string(data.d) +
                       " inputs");
    for (std::size_t r = 0; r < data.d; ++r) x0.push_back((*o.x0)[r] / rescale[r]);
  } else {
    x0 = choose_origin(data, cfg.delta_frac);
  }

  SelectedFit fit = select_model(data, o.m_max, cfg, x0);
  for (auto& f : fit.per_m)
    if (f) f->model.rescale = rescale;
  fit.chosen.model.rescale = rescale;
  write_atomic(o.out, selected_fit_to_json(fit).dump(2) + '\n');
  write_atomic(per_m_path(o.out), per_m_csv(fit));
  return fit;
}

// ---------------------------------------------------------------- predict

struct PredictOptions {
  std::filesystem::path model;
  std::optional<std::string> grid;
  std::optional<std::filesystem::path> points;
  std::filesystem::path out;
};

/// Points from a CSV whose first d columns are coordinates; further columns
/// (such as a response) are ignored.
inline std::vector<std::vector<double>> read_points(const std::filesystem::path& path, std::size_t d) {
  const CsvTable t = read_csv(path);
  if (t.columns() < d)
    throw DataError(path.string() + ": needs at least " + std::to_string(d) + " coordinate columns");
  std::vector<std::vector<double>> pts;
  pts.reserve(t.rows.size());
  for (const auto& row : t.rows) pts.emplace_back(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(d));
  return pts;
}

inline std::vector<std::vector<double>> predict_points(const SteModel& model, const std::vector<std::vector<double>>& pts) {
  std::vector<std::vector<double>> rows;
  rows.reserve(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double f;
    try {
      f = evaluate_original_units(model, pts[i]);
    } catch (const DomainError& e) {
      throw DomainError("point " + std::to_string(i + 1) + ": " + e.what());
    }
    auto row = pts[i];
    row.push_back(f);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline void cmd_predict(const PredictOptions& o) {
  if (o.grid.has_value() == o.points.has_value()) throw UsageError("predict needs exactly one of --grid or --points");
  const SteModel model = load_model(o.model);
  std::vector<std::vector<double>> pts;
  if (o.grid) {
    const auto axes = parse_grid(*o.grid);
    require_dim(axes, model.d);
    pts = grid_points(axes);
  } else {
    pts = read_points(*o.points, model.d);
  }
  auto header = coord_header(model.d);
  header.push_back("f");
  write_atomic(o.out, to_csv(header, predict_points(model, pts)));
}

// ---------------------------------------------------------------- envelope

struct EnvelopeOptions {
  std::filesystem::path model;
  std::string grid;
  std::size_t n_real = 10000;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  std::filesystem::path out;
};

/// Columns x..., lower, mean, upper, estimate; all in original units.
inline void cmd_envelope(const EnvelopeOptions& o) {
  if (!(o.alpha > 0.0 && o.alpha < 1.0)) throw UsageError("--alpha must lie in (0, 1)");
  if (o.n_real < 1) throw UsageError("--n-real must be at least 1");
  const SteModel model = load_model(o.model);
  const auto axes = parse_grid(o.grid);
  require_dim(axes, model.d);
  const auto pts = grid_points(axes);
  const auto scaled = to_model_units(model, pts);
  const Envelope env = envelope(to_general(model), scaled, o.n_real, o.alpha, RngStream{o.seed, 0});
  const auto estimate = predict_grid(model, scaled);
  const double cy = model.rescale[model.d];
  auto header = coord_header(model.d);
  for (const char* h : {"lower", "mean", "upper", "estimate"}) header.emplace_back(h);
  std::vector<std::vector<double>> rows;
  rows.reserve(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    auto row = pts[i];
    row.push_back(env.lower[i] * cy);
    row.push_back(env.mean[i] * cy);
    row.push_back(env.upper[i] * cy);
    row.push_back(estimate[i] * cy);
    rows.push_back(std::move(row));
  }
  write_atomic(o.out, to_csv(header, rows));
}

// ---------------------------------------------------------------- simulate

struct SimulateOptions {
  std::filesystem::path model;
  std::size_t n = 1;
  std::uint64_t seed = 0;
  std::filesystem::path out;
  std::optional<std::string> grid;                   // with curves: realization values
  std::optional<std::filesystem::path> curves;
};

/// Writes one row per event (realization, a, n_1..n_d) in model units.
/// With a grid and a curves path, also writes each realization evaluated on
/// the grid in original units.
inline void cmd_simulate(const SimulateOptions& o) {
  if (o.n < 1) throw UsageError("--n must be at least 1");
  if (o.grid.has_value() != o.curves.has_value()) throw UsageError("--grid and --curves go together");
  const SteModel model = load_model(o.model);
  const GeneralIntensity g = to_general(model);
  const auto samplers = ste::detail::make_samplers(g);
  std::vector<PointPattern> patterns(o.n);
  const RngStream rng{o.seed, 0};
  for (std::size_t i = 0; i < o.n; ++i) {
    auto eng = rng.with_offset(i).engine();
    patterns[i] = ste::detail::sample_with(g, samplers, eng);
  }
  std::vector<std::string> header{"realization", "a"};
  for (std::size_t r = 0; r < model.d; ++r) header.push_back("n" + std::to_string(r + 1));
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < o.n; ++i) {
    for (const auto& e : patterns[i].events) {
      std::vector<double> row{static_cast<double>(i + 1), e.a};
      row.insert(row.end(), e.n.begin(), e.n.end());
      rows.push_back(std::move(row));
    }
  }
  write_atomic(o.out, to_csv(header, rows));

  if (o.grid) {
    const auto axes = parse_grid(*o.grid);
    require_dim(axes, model.d);
    const auto pts = grid_points(axes);
    const auto scaled = to_model_units(model, pts);
    auto ch = coord_header(model.d);
    for (std::size_t i = 0; i < o.n; ++i) ch.push_back("r" + std::to_string(i + 1));
    std::vector<std::vector<double>> crow;
    crow.reserve(pts.size());
    for (std::size_t j = 0; j < pts.size(); ++j) {
      auto row = pts[j];
      for (std::size_t i = 0; i < o.n; ++i)
        row.push_back(ste_realization(patterns[i], scaled[j], model.x0) * model.rescale[model.d]);
      crow.push_back(std::move(row));
    }
    write_atomic(*o.curves, to_csv(ch, crow));
  }
}

// ---------------------------------------------------------------- distance

struct DistanceOptions {
  std::filesystem::path pred;
  std::filesystem::path truth;
  std::string grid;
};

struct DistanceResult {
  double d_sq = 0.0;
  double d_l1 = 0.0;
};

/// Reads the last column of a grid CSV after checking its coordinates
/// match the grid nodes.
inline std::vector<double> grid_values(const std::filesystem::path& path, const std::vector<std::vector<double>>& nodes) {
  const CsvTable t = read_csv(path);
  const std::size_t d = nodes.front().size();
  if (t.columns() != d + 1)
    throw DataError(path.string() + ": expected " + std::to_string(d + 1) + " columns (coordinates and value)");
  if (t.rows.size() != nodes.size())
    throw DataError(path.string() + ": has " + std::to_string(t.rows.size()) + " rows, grid has " +
                    std::to_string(nodes.size()) + " nodes");
  std::vector<double> v(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    for (std::size_t r = 0; r < d; ++r) {
      const double a = t.rows[i][r];
      const double b = nodes[i][r];
      if (std::abs(a - b) > 1e-9 * std::max({1.0, std::abs(a), std::abs(b)}))
        throw DataError(path.string() + ": row " + std::to_string(i + 1) + " does not match grid node " +
                        std::to_string(i + 1));
    }
    v[i] = t.rows[i][d];
  }
  return v;
}

inline DistanceResult cmd_distance(const DistanceOptions& o) {
  const auto axes = parse_grid(o.grid);
  const GridSpec spec = grid_spec(axes);
  const auto nodes = grid_points(axes);
  const auto f = grid_values(o.pred, nodes);
  const auto g = grid_values(o.truth, nodes);
  return {integrated_sq_distance(f, g, spec), l1_distance(f, g, spec)};
}

inline std::string distance_json(const DistanceResult& r) {
  return nlohmann::ordered_json{{"D_sq", r.d_sq}, {"D_l1", r.d_l1}}.dump() + '\n';
}

// ---------------------------------------------------------------- bench

struct BenchOptions {
  std::filesystem::path spec;
  std::optional<std::size_t> seeds;
  std::filesystem::path out;
  std::optional<std::filesystem::path> timing;
};

inline nlohmann::ordered_json report_json(const ExperimentReport& rep) {
  nlohmann::ordered_json spec;
  to_json(spec, rep.spec);
  nlohmann::ordered_json seeds = nlohmann::ordered_json::array();
  for (const auto& s : rep.seeds) {
    nlohmann::ordered_json j{{"seed", s.seed_index}, {"ok", s.ok}};
    if (s.ok) {
      j["chosen_m"] = s.chosen_m;
      j["rss"] = s.rss;
      j["sigma2_hat"] = s.sigma2_hat;
      j["D_sq"] = s.d_sq;
      j["D_l1"] = s.d_l1;
      j["model"] = model_to_json(*s.model);
    } else {
      j["error"] = s.error;
    }
    seeds.push_back(std::move(j));
  }
  return nlohmann::ordered_json{{"spec", spec},
                                {"seeds", seeds},
                                {"median",
                                 {{"chosen_m", rep.median_chosen_m},
                                  {"rss", rep.median_rss},
                                  {"sigma2_hat", rep.median_sigma2_hat},
                                  {"D_sq", rep.median_d_sq},
                                  {"D_l1", rep.median_d_l1}}}};
}

/// Runs every experiment in the spec file and writes <name>.csv and
/// <name>.json per experiment plus summary.csv into the output directory.
inline std::vector<ExperimentReport> cmd_bench(const BenchOptions& o) {
  auto specs = specs_from_json(parse_json(read_text(o.spec), o.spec.string()));
  if (o.seeds) {
    if (*o.seeds < 1) throw UsageError("--seeds must be at least 1");
    for (auto& s : specs) s.n_seeds = *o.seeds;
  }
  std::error_code ec;
  std::filesystem::create_directories(o.out, ec);
  if (ec) throw DataError("cannot create " + o.out.string() + ": " + ec.message());
  std::vector<ExperimentReport> reports;
  std::string summary = "experiment,function,K,n_seeds,median_chosen_m,median_rss,median_sigma2_hat,median_d_sq,median_d_l1\n";
  for (const auto& s : specs) {
    reports.push_back(run_experiment(s));
    const auto& rep = reports.back();
    write_atomic(o.out / (s.name + ".csv"), report_csv(rep));
    write_atomic(o.out / (s.name + ".json"), report_json(rep).dump(2) + '\n');
    summary += s.name + ',' + s.function_id + ',' + std::to_string(s.k) + ',' + std::to_string(s.n_seeds) + ',' +
               format_double(rep.median_chosen_m) + ',' + format_double(rep.median_rss) + ',' +
               format_double(rep.median_sigma2_hat) + ',' + format_double(rep.median_d_sq) + ',' +
               format_double(rep.median_d_l1) + '\n';
  }
  write_atomic(o.out / "summary.csv", summary);
  if (o.timing) write_atomic(*o.timing, timing_csv(reports));
  return reports;
}

// ---------------------------------------------------------------- gen

struct GenOptions {
  std::string function_id;  // a registered test function or "two_index"
  std::size_t k = 500;
  std::optional<double> sigma;
  std::uint64_t seed = 0;
  std::filesystem::path out;
};

/// Writes a synthetic dataset as x1..xd,y.
inline void cmd_gen(const GenOptions& o) {
  if (o.k < 1) throw UsageError("--k must be at least 1");
  Dataset data;
  if (o.function_id == "two_index") {
    data = make_two_index_dataset(o.k, o.sigma.value_or(0.02), RngStream{o.seed, 0});
  } else {
    const auto& fn = test_function(o.function_id);
    data = make_dataset(fn, o.k, o.sigma.value_or(fn.sigma), RngStream{o.seed, 0});
  }
  auto header = coord_header(data.d);
  header.emplace_back("y");
  std::vector<std::vector<double>> rows;
  for (std::size_t k = 0; k < data.size(); ++k) {
    auto row = std::vector<double>(data.row(k).begin(), data.row(k).end());
    row.push_back(data.y[k]);
    rows.push_back(std::move(row));
  }
  write_atomic(o.out, to_csv(header, rows));
}

/// Maps an exception to an exit code and a machine-readable stderr line.
inline int report_error(std::ostream& err, std::string_view kind, std::string_view message, int code) {
  err << nlohmann::ordered_json{{"error", kind}, {"message", message}}.dump() << '\n';
  return code;
}

}  // namespace ste::cli

#endif  // STE_CLI_HPP
