#ifndef STE_METRICS_HPP
#define STE_METRICS_HPP

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ste/error.hpp"

namespace ste {

/// Uniform tensor grid over [lower, upper] with points_per_dim nodes per axis.
struct GridSpec {
  std::vector<double> lower;
  std::vector<double> upper;
  std::size_t points_per_dim = 2;

  std::size_t dim() const noexcept { return lower.size(); }

  std::size_t total_points() const {
    std::size_t n = 1;
    for (std::size_t r = 0; r < dim(); ++r) n *= points_per_dim;
    return n;
  }

  double step(std::size_t r) const {
    return (upper[r] - lower[r]) / static_cast<double>(points_per_dim - 1);
  }

  void validate() const {
    if (lower.empty() || lower.size() != upper.size())
      throw std::invalid_argument("grid bounds must be non-empty and of equal length");
    if (points_per_dim < 2) throw std::invalid_argument("grid needs at least two points per dimension");
    for (std::size_t r = 0; r < dim(); ++r)
      if (!(lower[r] < upper[r])) throw std::invalid_argument("grid lower bound must be below upper bound");
  }

  /// Grid nodes in row-major order (last coordinate varies fastest).
  std::vector<std::vector<double>> points() const {
    validate();
    const std::size_t d = dim();
    const std::size_t total = total_points();
    std::vector<std::vector<double>> pts(total, std::vector<double>(d));
    for (std::size_t i = 0; i < total; ++i) {
      std::size_t rest = i;
      for (std::size_t r = d; r-- > 0;) {
        const std::size_t j = rest % points_per_dim;
        rest /= points_per_dim;
        pts[i][r] = j + 1 == points_per_dim ? upper[r] : lower[r] + static_cast<double>(j) * step(r);
      }
    }
    return pts;
  }
};

/// A grid over a window whose lower edge is open: each axis starts one step
/// h = (upper - lower) / n above lower and keeps n nodes with spacing h.
inline GridSpec open_lower_grid(std::vector<double> lower, std::vector<double> upper, std::size_t points_per_dim) {
  if (points_per_dim < 2) throw std::invalid_argument("grid needs at least two points per dimension");
  for (std::size_t r = 0; r < lower.size(); ++r)
    lower[r] += (upper[r] - lower[r]) / static_cast<double>(points_per_dim);
  GridSpec g{std::move(lower), std::move(upper), points_per_dim};
  g.validate();
  return g;
}

namespace detail {

/// Composite trapezoid integral of values on the tensor grid.
template <class F>
double trapezoid(std::span<const double> f_hat, std::span<const double> f_true, const GridSpec& grid, F integrand) {
  grid.validate();
  const std::size_t total = grid.total_points();
  if (f_hat.size() != total || f_true.size() != total)
    throw DataError("value vectors have " + std::to_string(f_hat.size()) + " and " +
                    std::to_string(f_true.size()) + " entries, grid has " + std::to_string(total));
  const std::size_t d = grid.dim();
  const std::size_t n = grid.points_per_dim;
  double cell = 1.0;
  for (std::size_t r = 0; r < d; ++r) cell *= grid.step(r);
  double sum = 0.0;
  for (std::size_t i = 0; i < total; ++i) {
    if (!std::isfinite(f_hat[i]) || !std::isfinite(f_true[i])) throw DataError("non-finite value in distance input");
    double w = 1.0;
    std::size_t rest = i;
    for (std::size_t r = 0; r < d; ++r) {
      const std::size_t j = rest % n;
      rest /= n;
      if (j == 0 || j + 1 == n) w *= 0.5;
    }
    sum += w * integrand(f_hat[i] - f_true[i]);
  }
  return sum * cell;
}

}  // namespace detail

/// Integral of (f_hat - f_true)^2 over the grid window.
inline double integrated_sq_distance(std::span<const double> f_hat, std::span<const double> f_true,
                                     const GridSpec& grid) {
  return detail::trapezoid(f_hat, f_true, grid, [](double e) { return e * e; });
}

/// Integral of |f_hat - f_true| over the grid window.
inline double l1_distance(std::span<const double> f_hat, std::span<const double> f_true, const GridSpec& grid) {
  return detail::trapezoid(f_hat, f_true, grid, [](double e) { return std::abs(e); });
}

}  // namespace ste

#endif  // STE_METRICS_HPP
