#ifndef STE_SIM_HPP
#define STE_SIM_HPP

// Simulation of the mixture-intensity Poisson process over (a, n_1..n_d),
// stochastic Taylor expansion realizations and Monte Carlo envelopes.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ste/core.hpp"
#include "ste/parallel.hpp"
#include "ste/rng.hpp"

namespace ste {

struct Event {
  double a = 0.0;
  std::vector<double> n;
};

/// One realization of the point process. May be empty.
struct PointPattern {
  std::size_t d = 1;
  std::vector<Event> events;

  std::size_t size() const noexcept { return events.size(); }
};

/// The structured covariance (sigma_a^2, rho_r sigma_a sigma_n_r, diagonal
/// sigma_n^2) is positive semidefinite iff sum_r rho_r^2 <= 1.
inline bool is_sampleable(const ComponentParams& c) {
  if (!(c.sigma_a >= 0.0)) return false;
  double rho2 = 0.0;
  for (std::size_t r = 0; r < c.rho.size(); ++r) {
    if (!(c.sigma_n[r] >= 0.0)) return false;
    rho2 += c.rho[r] * c.rho[r];
  }
  return rho2 <= 1.0 + 1e-12;
}

namespace detail {

inline constexpr double kZeroPivot = 1e-12;

/// Cholesky factor of the component covariance in the order (n_1..n_d, a):
///   n_r = mu_n_r + sigma_n_r z_r
///   a   = mu_a + sigma_a (sum_r rho_r z_r + sqrt(1 - sum rho^2) z_0)
/// Zero pivots (sigma = 0) give point-mass directions.
struct ComponentSampler {
  const ComponentParams* comp;
  double residual_scale;

  explicit ComponentSampler(const ComponentParams& c) : comp(&c) {
    double rho2 = 0.0;
    for (double r : c.rho) rho2 += r * r;
    const double schur = 1.0 - rho2;
    residual_scale = schur > kZeroPivot ? std::sqrt(schur) : 0.0;
  }

  template <class Engine>
  Event draw(Engine& eng, std::normal_distribution<double>& normal) const {
    const auto& c = *comp;
    Event e;
    e.n.resize(c.dim());
    double corr = 0.0;
    for (std::size_t r = 0; r < c.dim(); ++r) {
      const double z = normal(eng);
      e.n[r] = c.mu_n[r] + (c.sigma_n[r] > kZeroPivot ? c.sigma_n[r] * z : 0.0);
      corr += c.rho[r] * z;
    }
    const double z0 = normal(eng);
    e.a = c.mu_a + (c.sigma_a > kZeroPivot ? c.sigma_a * (corr + residual_scale * z0) : 0.0);
    return e;
  }
};

inline void require_sampleable(const GeneralIntensity& g) {
  for (std::size_t m = 0; m < g.components.size(); ++m)
    if (!is_sampleable(g.components[m]))
      throw DomainError("component " + std::to_string(m + 1) +
                        " is not sampleable: sum of squared correlations exceeds 1");
}

template <class Engine>
PointPattern sample_with(const GeneralIntensity& g, std::span<const ComponentSampler> samplers, Engine& eng) {
  std::poisson_distribution<long> count(g.lambda);
  std::discrete_distribution<std::size_t> pick(g.weights.begin(), g.weights.end());
  std::normal_distribution<double> normal(0.0, 1.0);
  PointPattern p;
  p.d = g.d;
  const long v = count(eng);
  p.events.reserve(static_cast<std::size_t>(v));
  for (long j = 0; j < v; ++j) p.events.push_back(samplers[pick(eng)].draw(eng, normal));
  return p;
}

inline std::vector<ComponentSampler> make_samplers(const GeneralIntensity& g) {
  require_sampleable(g);
  std::vector<ComponentSampler> s;
  s.reserve(g.components.size());
  for (const auto& c : g.components) s.emplace_back(c);
  return s;
}

}  // namespace detail

/// Draws v ~ Poisson(lambda) events, each from a component chosen by weight.
inline PointPattern sample_pattern(const GeneralIntensity& g, const RngStream& rng) {
  const auto samplers = detail::make_samplers(g);
  auto eng = rng.engine();
  return detail::sample_with(g, samplers, eng);
}

/// sum over events of a * prod_r (x_r - x0_r)^n_r.
inline double ste_realization(const PointPattern& pattern, std::span<const double> x, std::span<const double> x0) {
  check_above_origin(x, x0);
  std::vector<double> logs(x.size());
  for (std::size_t r = 0; r < x.size(); ++r) logs[r] = std::log(x[r] - x0[r]);
  double sum = 0.0;
  for (const auto& e : pattern.events) {
    if (e.n.size() != x.size()) throw DomainError("event dimension does not match the point");
    double exponent = 0.0;
    for (std::size_t r = 0; r < x.size(); ++r) exponent += e.n[r] * logs[r];
    sum += detail::scaled_exp(e.a, exponent);
  }
  if (!std::isfinite(sum)) throw RangeError("realization exceeds the floating-point range");
  return sum;
}

struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Monte Carlo mean of n_real realizations at x with its standard error.
inline McEstimate mc_mean(const GeneralIntensity& g, std::span<const double> x, std::size_t n_real,
                          const RngStream& rng) {
  if (n_real < 2) throw std::invalid_argument("mc_mean needs at least two realizations");
  check_above_origin(x, g.x0);
  const auto samplers = detail::make_samplers(g);
  std::vector<double> values(n_real);
  parallel_for(n_real, [&](std::size_t i) {
    auto eng = rng.with_offset(i).engine();
    values[i] = ste_realization(detail::sample_with(g, samplers, eng), x, g.x0);
  });
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n_real);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n_real - 1));
  return {mean, sd / std::sqrt(static_cast<double>(n_real))};
}

/// Nearest-rank (type 1) empirical quantile of sorted values.
inline double nearest_rank_quantile(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("quantile of an empty sample");
  const auto n = static_cast<double>(sorted.size());
  auto k = static_cast<std::size_t>(std::ceil(n * p - 1e-9));
  k = std::clamp<std::size_t>(k, 1, sorted.size());
  return sorted[k - 1];
}

/// Pointwise alpha/2 and 1 - alpha/2 quantiles and the mean of realizations.
struct Envelope {
  std::vector<std::vector<double>> grid;
  std::vector<double> lower;
  std::vector<double> mean;
  std::vector<double> upper;
  double alpha = 0.05;
  std::size_t n_real = 0;
};

/// Each simulated pattern is evaluated across the whole grid, so the bands
/// are built from coherent realization curves.
inline Envelope envelope(const GeneralIntensity& g, std::span<const std::vector<double>> grid, std::size_t n_real,
                         double alpha, const RngStream& rng) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  if (n_real < 1) throw std::invalid_argument("envelope needs at least one realization");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    try {
      check_above_origin(grid[i], g.x0);
    } catch (const DomainError& e) {
      throw DomainError("grid point " + std::to_string(i) + ": " + e.what());
    }
  }
  const auto samplers = detail::make_samplers(g);
  const std::size_t n_grid = grid.size();
  // values[i * n_real + j]: grid point i, realization j
  std::vector<double> values(n_grid * n_real);
  parallel_for(n_real, [&](std::size_t j) {
    auto eng = rng.with_offset(j).engine();
    const PointPattern p = detail::sample_with(g, samplers, eng);
    for (std::size_t i = 0; i < n_grid; ++i) values[i * n_real + j] = ste_realization(p, grid[i], g.x0);
  });

  Envelope env;
  env.grid.assign(grid.begin(), grid.end());
  env.alpha = alpha;
  env.n_real = n_real;
  env.lower.resize(n_grid);
  env.mean.resize(n_grid);
  env.upper.resize(n_grid);
  for (std::size_t i = 0; i < n_grid; ++i) {
    std::span<double> col(values.data() + i * n_real, n_real);
    double s = 0.0;
    for (double v : col) s += v;
    env.mean[i] = s / static_cast<double>(n_real);
    std::sort(col.begin(), col.end());
    env.lower[i] = nearest_rank_quantile(col, alpha / 2.0);
    env.upper[i] = nearest_rank_quantile(col, 1.0 - alpha / 2.0);
  }
  return env;
}

}  // namespace ste

#endif  // STE_SIM_HPP
