#ifndef STE_CORE_HPP
#define STE_CORE_HPP

// Mixture-intensity parameter types and closed-form evaluation of the
// Taylor-expansion Poisson point process estimator.
//
// A component m contributes
//
//   (mu_a + sum_r rho_r sigma_a sigma_n_r ln d_r) * prod_r d_r^(mu_n_r + sigma_n_r^2 ln d_r / 2)
//
// with d_r = x_r - x0_r > 0. The reduced model sums components with unit
// weight (lambda = M, p_m = 1/M); GeneralIntensity keeps lambda and p_m.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "ste/error.hpp"

namespace ste {

/// Parameters of one normal mixture component over (a, n_1, ..., n_d).
struct ComponentParams {
  double mu_a = 0.0;
  double sigma_a = 0.0;
  std::vector<double> mu_n;
  std::vector<double> sigma_n;
  std::vector<double> rho;

  std::size_t dim() const noexcept { return mu_n.size(); }

  void validate() const {
    const std::size_t d = mu_n.size();
    if (d == 0) throw std::invalid_argument("component has dimension 0");
    if (sigma_n.size() != d || rho.size() != d)
      throw std::invalid_argument("component vectors mu_n, sigma_n, rho differ in length");
    if (!std::isfinite(mu_a) || !std::isfinite(sigma_a) || sigma_a < 0.0)
      throw std::invalid_argument("component needs finite mu_a and sigma_a >= 0");
    for (std::size_t r = 0; r < d; ++r) {
      if (!std::isfinite(mu_n[r]) || !std::isfinite(sigma_n[r]) || !std::isfinite(rho[r]))
        throw std::invalid_argument("component has a non-finite parameter");
      if (sigma_n[r] < 0.0) throw std::invalid_argument("component has sigma_n < 0");
      if (std::abs(rho[r]) > 1.0) throw std::invalid_argument("component has |rho| > 1");
    }
  }

  friend bool operator==(const ComponentParams&, const ComponentParams&) = default;
};

/// Canonical component order: increasing mu_a, ties by mu_n, then by the
/// remaining fields so that the order is total.
inline bool canonical_less(const ComponentParams& a, const ComponentParams& b) {
  return std::tie(a.mu_a, a.mu_n, a.sigma_a, a.sigma_n, a.rho) <
         std::tie(b.mu_a, b.mu_n, b.sigma_a, b.sigma_n, b.rho);
}

/// Reduced-intensity model (lambda = M, equal weights) plus the expansion
/// origin, residual variance and the unit scale factors of the data it was
/// fitted on. x0 and all component parameters live in rescaled units.
struct SteModel {
  std::size_t d = 1;
  std::vector<ComponentParams> components;
  std::vector<double> x0;
  double sigma2 = 0.0;
  std::vector<double> rescale;  // d inputs followed by the response

  std::size_t size() const noexcept { return components.size(); }

  void canonicalize() { std::stable_sort(components.begin(), components.end(), canonical_less); }

  void validate() const {
    if (d == 0) throw std::invalid_argument("model dimension must be positive");
    if (components.empty()) throw std::invalid_argument("model needs at least one component");
    if (x0.size() != d) throw std::invalid_argument("x0 length does not match dimension");
    if (rescale.size() != d + 1) throw std::invalid_argument("rescale needs d + 1 entries");
    for (double v : x0)
      if (!std::isfinite(v)) throw std::invalid_argument("x0 must be finite");
    for (double c : rescale)
      if (!(c > 0.0) || !std::isfinite(c)) throw std::invalid_argument("rescale factors must be positive");
    if (!(sigma2 >= 0.0) || !std::isfinite(sigma2)) throw std::invalid_argument("sigma2 must be >= 0");
    for (const auto& c : components) {
      c.validate();
      if (c.dim() != d) throw std::invalid_argument("component dimension does not match model");
    }
    if (!std::is_sorted(components.begin(), components.end(), canonical_less))
      throw std::invalid_argument("components are not in canonical order");
  }
};

/// Validates, sorts into canonical order and fills default unit rescale.
inline SteModel make_model(std::vector<ComponentParams> components, std::vector<double> x0,
                           double sigma2 = 0.0, std::vector<double> rescale = {}) {
  SteModel m;
  m.d = x0.size();
  m.components = std::move(components);
  m.x0 = std::move(x0);
  m.sigma2 = sigma2;
  m.rescale = rescale.empty() ? std::vector<double>(m.d + 1, 1.0) : std::move(rescale);
  m.canonicalize();
  m.validate();
  return m;
}

/// Intensity lambda * sum_m p_m g_m with explicit rate and weights.
struct GeneralIntensity {
  double lambda = 1.0;
  std::vector<double> weights;
  std::vector<ComponentParams> components;
  std::size_t d = 1;
  std::vector<double> x0;

  void validate() const {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("lambda must be positive");
    if (components.empty() || weights.size() != components.size())
      throw std::invalid_argument("weights and components must be non-empty and of equal length");
    if (x0.size() != d) throw std::invalid_argument("x0 length does not match dimension");
    double total = 0.0;
    for (double p : weights) {
      if (!(p >= 0.0)) throw std::invalid_argument("weights must be non-negative");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("weights must sum to 1");
    for (const auto& c : components) {
      c.validate();
      if (c.dim() != d) throw std::invalid_argument("component dimension does not match intensity");
    }
  }

  /// Sorts (weight, component) pairs into canonical component order.
  void canonicalize() {
    std::vector<std::size_t> idx(components.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) {
      return canonical_less(components[i], components[j]);
    });
    std::vector<ComponentParams> c;
    std::vector<double> w;
    for (std::size_t i : idx) {
      c.push_back(components[i]);
      w.push_back(weights[i]);
    }
    components = std::move(c);
    weights = std::move(w);
  }
};

inline GeneralIntensity make_intensity(double lambda, std::vector<double> weights,
                                       std::vector<ComponentParams> components, std::vector<double> x0) {
  GeneralIntensity g;
  g.lambda = lambda;
  g.weights = std::move(weights);
  g.components = std::move(components);
  g.d = x0.size();
  g.x0 = std::move(x0);
  g.validate();
  g.canonicalize();
  return g;
}

/// The reduced model as an explicit intensity: lambda = M, p_m = 1/M.
inline GeneralIntensity to_general(const SteModel& model) {
  GeneralIntensity g;
  const auto m = static_cast<double>(model.size());
  g.lambda = m;
  g.weights.assign(model.size(), 1.0 / m);
  g.components = model.components;
  g.d = model.d;
  g.x0 = model.x0;
  return g;
}

namespace detail {

inline constexpr double kMaxLog = 709.782712893384;  // log(DBL_MAX)
inline constexpr double kSafeLog = 700.0;

inline std::string coord_message(std::size_t r, double x, double x0) {
  return "coordinate " + std::to_string(r + 1) + " is not above the origin (x=" + std::to_string(x) +
         ", x0=" + std::to_string(x0) + ")";
}

/// Returns coef * exp(exponent) without overflowing in the intermediate
/// exp(); throws RangeError if the product itself is not representable.
inline double scaled_exp(double coef, double exponent) {
  if (coef == 0.0) return 0.0;
  if (exponent < kMaxLog) {
    const double v = coef * std::exp(exponent);
    if (std::isfinite(v)) return v;
  } else {
    const double lm = std::log(std::abs(coef)) + exponent;
    if (lm < kMaxLog) return std::copysign(std::exp(lm), coef);
  }
  throw RangeError("value exceeds the floating-point range; rescale the inputs and response");
}

}  // namespace detail

/// Throws DomainError unless x[r] > x0[r] for every coordinate.
inline void check_above_origin(std::span<const double> x, std::span<const double> x0) {
  if (x.size() != x0.size())
    throw DomainError("point has " + std::to_string(x.size()) + " coordinates, expected " +
                      std::to_string(x0.size()));
  for (std::size_t r = 0; r < x.size(); ++r)
    if (!(x[r] > x0[r])) throw DomainError(detail::coord_message(r, x[r], x0[r]));
}

/// E[delta^n] for n ~ N(mu, sigma^2), i.e. delta^(mu + sigma^2 ln(delta) / 2).
inline double power_moment(double delta, double mu, double sigma) {
  if (!(delta > 0.0)) throw DomainError("power_moment needs delta > 0");
  if (sigma < 0.0) throw DomainError("power_moment needs sigma >= 0");
  const double l = std::log(delta);
  const double p = mu + 0.5 * sigma * sigma * l;
  if (std::abs(p * l) < detail::kSafeLog) return std::pow(delta, p);
  return detail::scaled_exp(1.0, p * l);
}

/// E[(n - mu) delta^n] for n ~ N(mu, sigma^2).
inline double centered_power_moment(double delta, double mu, double sigma) {
  if (!(delta > 0.0)) throw DomainError("centered_power_moment needs delta > 0");
  if (sigma < 0.0) throw DomainError("centered_power_moment needs sigma >= 0");
  const double l = std::log(delta);
  const double p = mu + 0.5 * sigma * sigma * l;
  if (std::abs(p * l) < detail::kSafeLog) return sigma * sigma * l * std::pow(delta, p);
  return detail::scaled_exp(sigma * sigma * l, p * l);
}

/// Expected contribution of one component at x (unit weight).
inline double eval_component(const ComponentParams& c, std::span<const double> x, std::span<const double> x0) {
  check_above_origin(x, x0);
  if (c.dim() != x.size()) throw DomainError("component dimension does not match the point");
  double coef = c.mu_a;
  double exponent = 0.0;
  bool direct = true;
  for (std::size_t r = 0; r < x.size(); ++r) {
    const double l = std::log(x[r] - x0[r]);
    coef += c.rho[r] * c.sigma_a * c.sigma_n[r] * l;
    const double t = (c.mu_n[r] + 0.5 * c.sigma_n[r] * c.sigma_n[r] * l) * l;
    exponent += t;
    direct = direct && std::abs(t) < detail::kSafeLog;
  }
  if (!direct || std::abs(exponent) >= detail::kSafeLog) return detail::scaled_exp(coef, exponent);
  double prod = 1.0;
  for (std::size_t r = 0; r < x.size(); ++r) {
    const double delta = x[r] - x0[r];
    prod *= std::pow(delta, c.mu_n[r] + 0.5 * c.sigma_n[r] * c.sigma_n[r] * std::log(delta));
  }
  return coef * prod;
}

/// Closed-form estimator of the reduced model at x.
inline double evaluate(const SteModel& model, std::span<const double> x) {
  check_above_origin(x, model.x0);
  double sum = 0.0;
  for (const auto& c : model.components) sum += eval_component(c, x, model.x0);
  if (!std::isfinite(sum)) throw RangeError("estimator sum exceeds the floating-point range");
  return sum;
}

/// Closed-form estimator under a general intensity: lambda * sum_m p_m I_m(x).
inline double evaluate_general(const GeneralIntensity& g, std::span<const double> x) {
  check_above_origin(x, g.x0);
  double sum = 0.0;
  for (std::size_t m = 0; m < g.components.size(); ++m) {
    const double w = g.lambda * g.weights[m];
    sum += w * eval_component(g.components[m], x, g.x0);
  }
  if (!std::isfinite(sum)) throw RangeError("estimator sum exceeds the floating-point range");
  return sum;
}

/// The degenerate model sum_m a_m (x - x0)^m of a one-dimensional
/// polynomial with the given coefficients.
inline SteModel from_taylor_polynomial(std::span<const double> coeffs, double x0) {
  if (coeffs.empty()) throw std::invalid_argument("from_taylor_polynomial needs at least one coefficient");
  std::vector<ComponentParams> comps;
  comps.reserve(coeffs.size());
  for (std::size_t m = 0; m < coeffs.size(); ++m)
    comps.push_back({coeffs[m], 0.0, {static_cast<double>(m)}, {0.0}, {0.0}});
  return make_model(std::move(comps), {x0});
}

/// Evaluates the model at each point of a row-major grid of d-vectors.
/// Domain errors name the offending point.
inline std::vector<double> predict_grid(const SteModel& model, std::span<const std::vector<double>> grid) {
  std::vector<double> out;
  out.reserve(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    try {
      out.push_back(evaluate(model, grid[i]));
    } catch (const DomainError& e) {
      throw DomainError("grid point " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

/// Evaluates at a point given in original data units and returns the
/// prediction in original response units.
inline double evaluate_original_units(const SteModel& model, std::span<const double> x_original) {
  if (x_original.size() != model.d) throw DomainError("point dimension does not match the model");
  std::vector<double> x(model.d);
  for (std::size_t r = 0; r < model.d; ++r) x[r] = x_original[r] / model.rescale[r];
  return evaluate(model, x) * model.rescale[model.d];
}

}  // namespace ste

#endif  // STE_CORE_HPP
