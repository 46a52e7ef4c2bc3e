#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "ste/metrics.hpp"

namespace {

std::vector<double> sample(const ste::GridSpec& g, double (*f)(const std::vector<double>&)) {
  std::vector<double> v;
  for (const auto& p : g.points()) v.push_back(f(p));
  return v;
}

}  // namespace

TEST(GridSpec, NodesAndOrder) {
  const ste::GridSpec g{{0.0, 10.0}, {1.0, 12.0}, 3};
  const auto pts = g.points();
  ASSERT_EQ(pts.size(), 9u);
  EXPECT_EQ(pts[0], (std::vector<double>{0.0, 10.0}));
  EXPECT_EQ(pts[1], (std::vector<double>{0.0, 11.0}));
  EXPECT_EQ(pts[3], (std::vector<double>{0.5, 10.0}));
  EXPECT_EQ(pts[8], (std::vector<double>{1.0, 12.0}));
}

TEST(GridSpec, Validation) {
  EXPECT_THROW((ste::GridSpec{{1.0}, {1.0}, 10}.validate()), std::invalid_argument);
  EXPECT_THROW((ste::GridSpec{{0.0}, {1.0}, 1}.validate()), std::invalid_argument);
}

TEST(GridSpec, OpenLowerEdge) {
  const auto g = ste::open_lower_grid({0.0}, {7.0}, 1000);
  const auto pts = g.points();
  ASSERT_EQ(pts.size(), 1000u);
  EXPECT_NEAR(pts.front()[0], 0.007, 1e-15);
  EXPECT_EQ(pts.back()[0], 7.0);
  EXPECT_NEAR(g.step(0), 0.007, 1e-15);
}

TEST(Distance, IdenticalIsZero) {
  const ste::GridSpec g{{0.0}, {2.0}, 11};
  const std::vector<double> f(11, 3.0);
  EXPECT_EQ(ste::integrated_sq_distance(f, f, g), 0.0);
  EXPECT_EQ(ste::l1_distance(f, f, g), 0.0);
}

TEST(Distance, ConstantDifference) {
  const ste::GridSpec g{{1.0}, {3.5}, 17};
  const std::vector<double> a(17, 1.0), b(17, -0.5);
  EXPECT_NEAR(ste::integrated_sq_distance(a, b, g), 2.25 * 2.5, 1e-12 * 5.625);
  EXPECT_NEAR(ste::l1_distance(a, b, g), 1.5 * 2.5, 1e-12 * 3.75);
}

TEST(Distance, AnalyticIntegrals) {
  const ste::GridSpec g{{0.0}, {1.0}, 1001};
  const auto x = sample(g, [](const std::vector<double>& p) { return p[0]; });
  const auto half = sample(g, [](const std::vector<double>& p) { return p[0] - 0.5; });
  const std::vector<double> zero(1001, 0.0);
  EXPECT_NEAR(ste::integrated_sq_distance(x, zero, g), 1.0 / 3.0, 1e-5);
  EXPECT_NEAR(ste::l1_distance(half, zero, g), 0.25, 1e-4);
}

TEST(Distance, TwoDimensionalProduct) {
  const ste::GridSpec g{{0.0, 0.0}, {1.0, 2.0}, 201};
  const auto f = sample(g, [](const std::vector<double>& p) { return p[0] * p[1]; });
  const std::vector<double> zero(f.size(), 0.0);
  // integral of x^2 y^2 over [0,1] x [0,2] = (1/3)(8/3)
  EXPECT_NEAR(ste::integrated_sq_distance(f, zero, g), 8.0 / 9.0, 1e-4);
}

TEST(Distance, SymmetryAndScaling) {
  const ste::GridSpec g{{0.0}, {3.0}, 301};
  const auto a = sample(g, [](const std::vector<double>& p) { return std::sin(p[0]); });
  const auto b = sample(g, [](const std::vector<double>& p) { return p[0] * p[0] / 4.0; });
  EXPECT_EQ(ste::integrated_sq_distance(a, b, g), ste::integrated_sq_distance(b, a, g));
  EXPECT_EQ(ste::l1_distance(a, b, g), ste::l1_distance(b, a, g));
  const double d2 = ste::integrated_sq_distance(a, b, g);
  const double d1 = ste::l1_distance(a, b, g);
  for (double c : {-2.0, 0.5}) {
    std::vector<double> ca(a.size()), cb(b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      ca[i] = c * a[i];
      cb[i] = c * b[i];
    }
    EXPECT_NEAR(ste::integrated_sq_distance(ca, cb, g), c * c * d2, 1e-12 * c * c * d2);
    EXPECT_NEAR(ste::l1_distance(ca, cb, g), std::abs(c) * d1, 1e-12 * std::abs(c) * d1);
  }
}

TEST(Distance, SecondOrderConvergence) {
  const double exact = (std::exp(2.0) - 1.0) / 2.0;  // integral of e^{2x} over [0, 1]
  double prev_err = 0.0;
  for (std::size_t n : {11u, 21u, 41u, 81u}) {
    const ste::GridSpec g{{0.0}, {1.0}, n};
    const auto f = sample(g, [](const std::vector<double>& p) { return std::exp(p[0]); });
    const std::vector<double> zero(f.size(), 0.0);
    const double err = std::abs(ste::integrated_sq_distance(f, zero, g) - exact);
    if (prev_err > 0.0) EXPECT_NEAR(prev_err / err, 4.0, 0.3);
    prev_err = err;
  }
}

TEST(Distance, Errors) {
  const ste::GridSpec g{{0.0}, {1.0}, 5};
  const std::vector<double> a(5, 0.0), b(4, 0.0);
  EXPECT_THROW(ste::integrated_sq_distance(a, b, g), ste::DataError);
  std::vector<double> c(5, 0.0);
  c[2] = NAN;
  EXPECT_THROW(ste::l1_distance(a, c, g), ste::DataError);
}
