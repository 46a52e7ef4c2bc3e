#ifndef STE_FITTING_HPP
#define STE_FITTING_HPP

// Least-squares estimation of the reduced model for a fixed number of
// components, and selection of the number of components by residual sum
// of squares.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ste/core.hpp"
#include "ste/error.hpp"
#include "ste/lm.hpp"
#include "ste/parallel.hpp"
#include "ste/rng.hpp"

namespace ste {

/// Inputs (row-major K x d) and responses.
struct Dataset {
  std::size_t d = 1;
  std::vector<double> X;
  std::vector<double> y;

  std::size_t size() const noexcept { return y.size(); }
  std::span<const double> row(std::size_t k) const { return {X.data() + k * d, d}; }

  void validate() const {
    if (d == 0) throw DataError("dataset dimension must be positive");
    if (y.empty()) throw DataError("dataset has no rows");
    if (X.size() != y.size() * d) throw DataError("dataset X has the wrong number of entries");
    for (std::size_t i = 0; i < X.size(); ++i)
      if (!std::isfinite(X[i])) throw DataError("non-finite input in row " + std::to_string(i / d + 1));
    for (std::size_t k = 0; k < y.size(); ++k)
      if (!std::isfinite(y[k])) throw DataError("non-finite response in row " + std::to_string(k + 1));
  }
};

/// How the number of components is chosen from the per-M fits.
///   adjusted: smallest M whose RSS_M / (K - p_M) lies within (1 + select_tol)
///             of the smallest such ratio; fits with K <= p_M are not eligible
///             unless no fit is.
///   raw:      smallest M whose RSS_M lies within (1 + select_tol) of min RSS.
enum class OrderRule { adjusted, raw };

struct FitConfig {
  std::size_t n_starts = 20;
  int max_iters = 500;
  double rel_tol = 1e-10;
  double delta_frac = 0.05;
  double select_tol = 1e-3;
  OrderRule rule = OrderRule::adjusted;
  std::uint64_t seed = 0;
  unsigned threads = 0;  // 0: hardware concurrency

  void validate() const {
    if (n_starts < 1 || max_iters < 1 || !(rel_tol > 0.0) || !(delta_frac > 0.0) || !(select_tol >= 0.0))
      throw std::invalid_argument("invalid fit configuration");
  }
};

struct FitResult {
  SteModel model;
  double rss = 0.0;
  double sigma2 = 0.0;
  std::size_t n_starts_converged = 0;
  std::size_t best_start_index = 0;
  bool underdetermined = false;  // fewer observations than parameters
};

struct SelectedFit {
  std::vector<std::optional<FitResult>> per_m;  // index m - 1
  std::vector<std::string> failures;            // same indexing, empty on success
  std::size_t chosen_m = 0;
  FitResult chosen;
};

inline constexpr double kSigmaFloor = 1e-8;

inline std::size_t param_count(std::size_t m, std::size_t d) { return m * (3 * d + 2); }

/// Origin placed strictly below the data: min - max(delta_frac * range, 1e-6)
/// per coordinate.
inline std::vector<double> choose_origin(const Dataset& data, double delta_frac) {
  data.validate();
  std::vector<double> x0(data.d);
  for (std::size_t r = 0; r < data.d; ++r) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t k = 0; k < data.size(); ++k) {
      lo = std::min(lo, data.row(k)[r]);
      hi = std::max(hi, data.row(k)[r]);
    }
    x0[r] = lo - std::max(delta_frac * (hi - lo), 1e-6);
  }
  return x0;
}

/// Residual sum of squares of the closed-form estimator on the data.
inline double rss(const SteModel& model, const Dataset& data) {
  double s = 0.0;
  for (std::size_t k = 0; k < data.size(); ++k) {
    double f;
    try {
      f = evaluate(model, data.row(k));
    } catch (const DomainError& e) {
      throw DomainError("row " + std::to_string(k + 1) + ": " + e.what());
    }
    const double e = data.y[k] - f;
    s += e * e;
  }
  return s;
}

inline double sigma2_mle(double rss_value, std::size_t k) {
  if (k == 0) throw std::invalid_argument("sigma2_mle needs K >= 1");
  return rss_value / static_cast<double>(k);
}

// Unconstrained layout per component (block of 3d + 2 entries):
//   mu_a, log(sigma_a - floor), mu_n[0..d), log(sigma_n - floor)[0..d), z[0..d)
// with rho = z / sqrt(1 + |z|^2), so that sum rho^2 < 1.

inline double pack_sigma(double sigma) { return std::log(std::max(sigma - kSigmaFloor, 1e-300)); }
inline double unpack_sigma(double u) { return kSigmaFloor + std::exp(u); }

inline Eigen::VectorXd pack_params(const SteModel& model) {
  const std::size_t d = model.d;
  const std::size_t block = 3 * d + 2;
  Eigen::VectorXd v(static_cast<Eigen::Index>(param_count(model.size(), d)));
  for (std::size_t m = 0; m < model.size(); ++m) {
    const auto& c = model.components[m];
    const auto o = static_cast<Eigen::Index>(m * block);
    v(o) = c.mu_a;
    v(o + 1) = pack_sigma(c.sigma_a);
    double rho2 = 0.0;
    for (double r : c.rho) rho2 += r * r;
    // Points on the unit sphere have no preimage; pull them just inside.
    const double shrink = rho2 < 1.0 - 1e-12 ? 1.0 : std::sqrt((1.0 - 1e-12) / rho2);
    const double denom = std::sqrt(1.0 - rho2 * shrink * shrink);
    for (std::size_t r = 0; r < d; ++r) {
      const auto i = static_cast<Eigen::Index>(r);
      const auto dd = static_cast<Eigen::Index>(d);
      v(o + 2 + i) = c.mu_n[r];
      v(o + 2 + dd + i) = pack_sigma(c.sigma_n[r]);
      v(o + 2 + 2 * dd + i) = c.rho[r] * shrink / denom;
    }
  }
  return v;
}

inline std::vector<ComponentParams> unpack_components(const Eigen::VectorXd& v, std::size_t m_count, std::size_t d) {
  if (static_cast<std::size_t>(v.size()) != param_count(m_count, d))
    throw std::invalid_argument("parameter vector has length " + std::to_string(v.size()) + ", expected " +
                                std::to_string(param_count(m_count, d)));
  const std::size_t block = 3 * d + 2;
  const auto dd = static_cast<Eigen::Index>(d);
  std::vector<ComponentParams> comps(m_count);
  for (std::size_t m = 0; m < m_count; ++m) {
    auto& c = comps[m];
    const auto o = static_cast<Eigen::Index>(m * block);
    c.mu_a = v(o);
    c.sigma_a = unpack_sigma(v(o + 1));
    c.mu_n.resize(d);
    c.sigma_n.resize(d);
    c.rho.resize(d);
    const double norm = std::sqrt(1.0 + v.segment(o + 2 + 2 * dd, dd).squaredNorm());
    for (std::size_t r = 0; r < d; ++r) {
      const auto i = static_cast<Eigen::Index>(r);
      c.mu_n[r] = v(o + 2 + i);
      c.sigma_n[r] = unpack_sigma(v(o + 2 + dd + i));
      c.rho[r] = v(o + 2 + 2 * dd + i) / norm;
    }
  }
  return comps;
}

inline SteModel unpack_params(const Eigen::VectorXd& v, std::size_t m_count, std::size_t d, std::vector<double> x0) {
  if (x0.size() != d) throw std::invalid_argument("x0 length does not match dimension");
  return make_model(unpack_components(v, m_count, d), std::move(x0));
}

/// Residuals r_k = y_k - f(x_k) of the unconstrained parameter vector with
/// the analytic Jacobian dr/dp.
class SteObjective {
 public:
  SteObjective(const Dataset& data, std::size_t m_count, std::vector<double> x0)
      : data_(&data), m_(m_count), d_(data.d), x0_(std::move(x0)) {
    if (x0_.size() != d_) throw std::invalid_argument("x0 length does not match dimension");
    const std::size_t k_count = data.size();
    logs_.resize(static_cast<Eigen::Index>(k_count), static_cast<Eigen::Index>(d_));
    for (std::size_t k = 0; k < k_count; ++k) {
      const auto row = data.row(k);
      for (std::size_t r = 0; r < d_; ++r) {
        const double delta = row[r] - x0_[r];
        if (!(delta > 0.0))
          throw DomainError("row " + std::to_string(k + 1) + ": " + detail::coord_message(r, row[r], x0_[r]));
        logs_(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(r)) = std::log(delta);
      }
    }
  }

  std::size_t components() const noexcept { return m_; }
  std::size_t dim() const noexcept { return d_; }
  Eigen::Index num_params() const { return static_cast<Eigen::Index>(param_count(m_, d_)); }
  const std::vector<double>& origin() const noexcept { return x0_; }

  bool residuals(const Eigen::VectorXd& p, Eigen::VectorXd& r) const { return compute(p, r, nullptr); }

  bool residuals_and_jacobian(const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd& jac) const {
    jac.resize(static_cast<Eigen::Index>(data_->size()), num_params());
    return compute(p, r, &jac);
  }

  /// Sum of squared residuals; +inf when the model overflows.
  double cost(const Eigen::VectorXd& p) const {
    Eigen::VectorXd r;
    return residuals(p, r) ? r.squaredNorm() : std::numeric_limits<double>::infinity();
  }

  /// Gradient of cost(): 2 J^T r.
  Eigen::VectorXd gradient(const Eigen::VectorXd& p) const {
    Eigen::VectorXd r;
    Eigen::MatrixXd jac;
    if (!residuals_and_jacobian(p, r, jac)) throw RangeError("objective is not finite at this point");
    return 2.0 * jac.transpose() * r;
  }

 private:
  struct Unpacked {
    double mu_a, sigma_a, u_scale_a;
    std::vector<double> mu_n, sigma_n, u_scale_n, z, rho;
    double norm;
  };

  std::vector<Unpacked> unpack(const Eigen::VectorXd& p) const {
    const std::size_t block = 3 * d_ + 2;
    const auto dd = static_cast<Eigen::Index>(d_);
    std::vector<Unpacked> out(m_);
    for (std::size_t m = 0; m < m_; ++m) {
      auto& c = out[m];
      const auto o = static_cast<Eigen::Index>(m * block);
      c.mu_a = p(o);
      c.u_scale_a = std::exp(p(o + 1));
      c.sigma_a = kSigmaFloor + c.u_scale_a;
      c.mu_n.resize(d_);
      c.sigma_n.resize(d_);
      c.u_scale_n.resize(d_);
      c.z.resize(d_);
      c.rho.resize(d_);
      c.norm = std::sqrt(1.0 + p.segment(o + 2 + 2 * dd, dd).squaredNorm());
      for (std::size_t r = 0; r < d_; ++r) {
        const auto i = static_cast<Eigen::Index>(r);
        c.mu_n[r] = p(o + 2 + i);
        c.u_scale_n[r] = std::exp(p(o + 2 + dd + i));
        c.sigma_n[r] = kSigmaFloor + c.u_scale_n[r];
        c.z[r] = p(o + 2 + 2 * dd + i);
        c.rho[r] = c.z[r] / c.norm;
      }
    }
    return out;
  }

  bool compute(const Eigen::VectorXd& p, Eigen::VectorXd& res, Eigen::MatrixXd* jac) const {
    if (p.size() != num_params()) throw std::invalid_argument("parameter vector has the wrong length");
    if (!p.allFinite()) return false;
    const auto comps = unpack(p);
    const std::size_t k_count = data_->size();
    const std::size_t block = 3 * d_ + 2;
    const auto dd = static_cast<Eigen::Index>(d_);
    const auto kn = static_cast<Eigen::Index>(k_count);
    res = Eigen::Map<const Eigen::VectorXd>(data_->y.data(), kn);
    // Component-major so each Jacobian column is written contiguously.
    for (std::size_t m = 0; m < m_; ++m) {
      const auto& c = comps[m];
      const auto o = static_cast<Eigen::Index>(m * block);
      const double n3 = c.norm * c.norm * c.norm;
      for (Eigen::Index kk = 0; kk < kn; ++kk) {
        double exponent = 0.0;
        double b = 0.0;   // sum_r rho_r sigma_n_r L_r
        double zl = 0.0;  // sum_r z_r sigma_n_r L_r
        for (std::size_t r = 0; r < d_; ++r) {
          const double l = logs_(kk, static_cast<Eigen::Index>(r));
          exponent += (c.mu_n[r] + 0.5 * c.sigma_n[r] * c.sigma_n[r] * l) * l;
          b += c.rho[r] * c.sigma_n[r] * l;
          zl += c.z[r] * c.sigma_n[r] * l;
        }
        if (exponent > detail::kMaxLog) return false;
        const double pw = std::exp(exponent);
        const double a = c.mu_a + c.sigma_a * b;
        res(kk) -= a * pw;
        if (jac) {
          auto& J = *jac;
          J(kk, o) = -pw;
          J(kk, o + 1) = -b * pw * c.u_scale_a;
          for (std::size_t r = 0; r < d_; ++r) {
            const auto i = static_cast<Eigen::Index>(r);
            const double l = logs_(kk, i);
            J(kk, o + 2 + i) = -a * pw * l;
            J(kk, o + 2 + dd + i) =
                -(c.sigma_a * c.rho[r] * l * pw + a * pw * c.sigma_n[r] * l * l) * c.u_scale_n[r];
            J(kk, o + 2 + 2 * dd + i) = -c.sigma_a * pw * (c.sigma_n[r] * l / c.norm - c.z[r] * zl / n3);
          }
        }
      }
    }
    if (!res.allFinite()) return false;
    return !jac || jac->allFinite();
  }

  const Dataset* data_;
  std::size_t m_;
  std::size_t d_;
  std::vector<double> x0_;
  Eigen::MatrixXd logs_;
};

namespace detail {

/// Sets mu_a of every component by linear least squares of y on the
/// component shapes, holding the powers, spreads and correlations fixed.
inline void solve_linear_coefficients(const SteObjective& obj, Eigen::VectorXd& p) {
  const std::size_t m_count = obj.components();
  const std::size_t d = obj.dim();
  const std::size_t block = 3 * d + 2;
  // With mu_a = 0 the residual is y - sum_m sigma_a B P; each unit of mu_a_m adds P_m.
  Eigen::VectorXd base = p;
  for (std::size_t m = 0; m < m_count; ++m) base(static_cast<Eigen::Index>(m * block)) = 0.0;
  Eigen::VectorXd r0;
  Eigen::MatrixXd jac;
  if (!obj.residuals_and_jacobian(base, r0, jac)) return;
  Eigen::MatrixXd phi(jac.rows(), static_cast<Eigen::Index>(m_count));
  for (std::size_t m = 0; m < m_count; ++m)
    phi.col(static_cast<Eigen::Index>(m)) = -jac.col(static_cast<Eigen::Index>(m * block));
  Eigen::VectorXd scale = phi.colwise().norm().transpose();
  for (Eigen::Index j = 0; j < scale.size(); ++j)
    if (!(scale(j) > 0.0) || !std::isfinite(scale(j))) scale(j) = 1.0;
  const Eigen::MatrixXd scaled = phi * scale.cwiseInverse().asDiagonal();
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(scaled);
  cod.setThreshold(1e-12);
  const Eigen::VectorXd coef = cod.solve(r0).cwiseQuotient(scale);
  if (!coef.allFinite()) return;
  for (std::size_t m = 0; m < m_count; ++m)
    p(static_cast<Eigen::Index>(m * block)) = coef(static_cast<Eigen::Index>(m));
}

/// Start 0: powers m - 1, sigma_n = 0.1, sigma_a = 0.5, rho = 0, mu_a by
/// linear least squares. Later starts perturb powers, spreads and
/// correlations with a scale that grows with the start index.
inline Eigen::VectorXd initial_params(const SteObjective& obj, std::size_t start, std::uint64_t seed) {
  const std::size_t m_count = obj.components();
  const std::size_t d = obj.dim();
  const std::size_t block = 3 * d + 2;
  const auto dd = static_cast<Eigen::Index>(d);
  Eigen::VectorXd p(obj.num_params());
  for (std::size_t m = 0; m < m_count; ++m) {
    const auto o = static_cast<Eigen::Index>(m * block);
    p(o) = 0.0;
    p(o + 1) = pack_sigma(0.5);
    for (Eigen::Index r = 0; r < dd; ++r) {
      p(o + 2 + r) = static_cast<double>(m);
      p(o + 2 + dd + r) = pack_sigma(0.1);
      p(o + 2 + 2 * dd + r) = 0.0;
    }
  }
  if (start > 0) {
    auto eng = RngStream{seed, start}.engine();
    std::normal_distribution<double> normal(0.0, 1.0);
    const double scale = 0.3 * std::sqrt(static_cast<double>(start));
    for (std::size_t m = 0; m < m_count; ++m) {
      const auto o = static_cast<Eigen::Index>(m * block);
      p(o + 1) += 0.5 * normal(eng);
      for (Eigen::Index r = 0; r < dd; ++r) {
        p(o + 2 + r) += scale * normal(eng);
        p(o + 2 + dd + r) += 0.5 * normal(eng);
        p(o + 2 + 2 * dd + r) = 0.3 * normal(eng);
      }
    }
  }
  solve_linear_coefficients(obj, p);
  return p;
}

}  // namespace detail

/// Best of cfg.n_starts local least-squares fits with m_count components.
inline FitResult fit_fixed_m(const Dataset& data, std::size_t m_count, const FitConfig& cfg,
                             const std::vector<double>& x0) {
  data.validate();
  cfg.validate();
  if (m_count < 1) throw std::invalid_argument("fit needs at least one component");
  const SteObjective obj(data, m_count, x0);

  LmOptions opt;
  opt.max_iters = cfg.max_iters;
  opt.rel_tol = cfg.rel_tol;
  std::vector<LmResult> runs(cfg.n_starts);
  parallel_for(
      cfg.n_starts,
      [&](std::size_t s) {
        runs[s] = levenberg_marquardt(obj, detail::initial_params(obj, s, cfg.seed), opt);
      },
      cfg.threads);

  std::optional<std::size_t> best;
  std::size_t converged = 0;
  for (std::size_t s = 0; s < runs.size(); ++s) {
    if (!runs[s].finite) continue;
    if (runs[s].converged) ++converged;
    if (!best || runs[s].cost < runs[*best].cost) best = s;
  }
  if (!best)
    throw FitError("all " + std::to_string(cfg.n_starts) + " starts diverged for M = " + std::to_string(m_count));

  FitResult out;
  out.model = unpack_params(runs[*best].params, m_count, data.d, x0);
  out.rss = rss(out.model, data);
  out.sigma2 = sigma2_mle(out.rss, data.size());
  out.model.sigma2 = out.sigma2;
  out.n_starts_converged = converged;
  out.best_start_index = *best;
  out.underdetermined = data.size() < param_count(m_count, data.d);
  return out;
}

/// Selection score of each fitted M under the rule; empty entries are not
/// eligible.
/// RSS values below tie_floor are raised to it, so fits that agree to
/// round-off tie.
inline std::vector<std::optional<double>> order_scores(std::span<const std::optional<FitResult>> per_m,
                                                       std::size_t k, std::size_t d, OrderRule rule,
                                                       double tie_floor = 0.0) {
  std::vector<std::optional<double>> score(per_m.size());
  bool any = false;
  if (rule == OrderRule::adjusted) {
    for (std::size_t i = 0; i < per_m.size(); ++i) {
      const std::size_t p = param_count(i + 1, d);
      if (per_m[i] && k > p) {
        score[i] = std::max(per_m[i]->rss, tie_floor) / static_cast<double>(k - p);
        any = true;
      }
    }
  }
  if (!any)
    for (std::size_t i = 0; i < per_m.size(); ++i)
      if (per_m[i]) score[i] = std::max(per_m[i]->rss, tie_floor);
  return score;
}

/// Round-off level of the RSS for a response vector: 1e-14 sum y^2.
inline double rss_floor(std::span<const double> y) {
  double s = 0.0;
  for (double v : y) s += v * v;
  return 1e-14 * s;
}

/// Smallest M whose score is within (1 + select_tol) of the best score.
inline std::size_t select_order(std::span<const std::optional<FitResult>> per_m, double select_tol, std::size_t k,
                                std::size_t d, OrderRule rule = OrderRule::adjusted, double tie_floor = 0.0) {
  const auto score = order_scores(per_m, k, d, rule, tie_floor);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& s : score)
    if (s) best = std::min(best, *s);
  for (std::size_t i = 0; i < score.size(); ++i)
    if (score[i] && *score[i] <= (1.0 + select_tol) * best) return i + 1;
  throw FitError("no number of components could be fitted");
}

/// Fits M = 1..m_max and selects the number of components.
inline SelectedFit select_model(const Dataset& data, std::size_t m_max, const FitConfig& cfg,
                                const std::vector<double>& x0) {
  if (m_max < 1) throw std::invalid_argument("m_max must be at least 1");
  SelectedFit out;
  out.per_m.resize(m_max);
  out.failures.resize(m_max);
  for (std::size_t m = 1; m <= m_max; ++m) {
    try {
      out.per_m[m - 1] = fit_fixed_m(data, m, cfg, x0);
    } catch (const FitError& e) {
      out.failures[m - 1] = e.what();
    }
  }
  out.chosen_m = select_order(out.per_m, cfg.select_tol, data.size(), data.d, cfg.rule, rss_floor(data.y));
  out.chosen = *out.per_m[out.chosen_m - 1];
  return out;
}

/// As above with the origin from choose_origin(data, cfg.delta_frac).
inline SelectedFit select_model(const Dataset& data, std::size_t m_max, const FitConfig& cfg) {
  return select_model(data, m_max, cfg, choose_origin(data, cfg.delta_frac));
}

}  // namespace ste

#endif  // STE_FITTING_HPP
