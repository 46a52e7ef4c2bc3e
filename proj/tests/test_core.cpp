#include <gtest/gtest.h>

#include <cfloat>
#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "ste/core.hpp"

namespace {

using ste::ComponentParams;

ComponentParams comp1(double mu_a, double sigma_a, double mu_n, double sigma_n, double rho) {
  return {mu_a, sigma_a, {mu_n}, {sigma_n}, {rho}};
}

}  // namespace

TEST(PowerMoment, DegenerateSpreadIsPlainPower) {
  EXPECT_EQ(ste::power_moment(2.0, 3.0, 0.0), 8.0);
  EXPECT_EQ(ste::power_moment(1.0, 7.5, 2.0), 1.0);
  EXPECT_EQ(ste::centered_power_moment(2.0, 3.0, 0.0), 0.0);
}

TEST(PowerMoment, MatchesGaussianIntegral) {
  std::mt19937_64 eng(11);
  std::uniform_real_distribution<double> ud(0.2, 3.0), um(-2.0, 3.0), us(0.0, 0.8);
  for (int i = 0; i < 20; ++i) {
    const double delta = ud(eng), mu = um(eng), sigma = us(eng);
    const double ref = oracle::gauss_expect([&](double z) { return std::pow(delta, mu + sigma * z); });
    const double ref_c = oracle::gauss_expect([&](double z) { return sigma * z * std::pow(delta, mu + sigma * z); });
    EXPECT_NEAR(ste::power_moment(delta, mu, sigma), ref, 1e-10 * std::abs(ref));
    EXPECT_NEAR(ste::centered_power_moment(delta, mu, sigma), ref_c, 1e-10 * std::max(1.0, std::abs(ref)));
  }
}

TEST(PowerMoment, RejectsBadDomain) {
  EXPECT_THROW(ste::power_moment(0.0, 1.0, 0.1), ste::DomainError);
  EXPECT_THROW(ste::power_moment(-1.0, 1.0, 0.1), ste::DomainError);
  EXPECT_THROW(ste::centered_power_moment(1.0, 1.0, -0.1), ste::DomainError);
}

TEST(PowerMoment, LargeExponentsUseLogSpace) {
  // delta^mu with mu * ln(delta) just below the overflow threshold
  const double v = ste::power_moment(10.0, 305.0, 0.0);
  EXPECT_NEAR(v / 1e305, 1.0, 1e-12);
  EXPECT_THROW(ste::power_moment(10.0, 400.0, 0.0), ste::RangeError);
  EXPECT_EQ(ste::power_moment(10.0, -400.0, 0.0), 0.0);
}

TEST(Evaluate, SingleComponentMatchesIntegral1d) {
  std::mt19937_64 eng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 10; ++i) {
    const auto c = comp1(2.0 * u(eng), 0.5 + 0.4 * u(eng), 1.5 + u(eng), 0.3 + 0.2 * u(eng), 0.9 * u(eng));
    const auto model = ste::make_model({c}, {0.0});
    for (double x : {0.3, 1.0, 2.7}) {
      const double ref = oracle::component_expectation(c, {x});
      EXPECT_NEAR(ste::evaluate(model, std::vector<double>{x}), ref, 1e-9 * std::max(1.0, std::abs(ref)));
    }
  }
}

TEST(Evaluate, SingleComponentMatchesIntegral2d) {
  const ComponentParams c{0.7, 0.8, {1.2, 0.5}, {0.3, 0.2}, {0.6, -0.5}};
  const auto model = ste::make_model({c}, {-0.1, -0.2});
  const std::vector<double> x{1.4, 0.9};
  const double ref = oracle::component_expectation(c, {1.5, 1.1});
  EXPECT_NEAR(ste::evaluate(model, x), ref, 1e-8 * std::abs(ref));
}

TEST(Evaluate, UnitOffsetCollapsesToSumOfMeans) {
  const auto model = ste::make_model({comp1(1.5, 0.3, 2.0, 0.4, 0.5), comp1(-0.25, 1.0, -1.0, 0.1, -0.9)}, {2.0});
  EXPECT_EQ(ste::evaluate(model, std::vector<double>{3.0}), 1.25);
}

TEST(Evaluate, PermutationInvariantAndCanonical) {
  const auto a = comp1(1.0, 0.2, 0.5, 0.1, 0.3);
  const auto b = comp1(-2.0, 0.4, 1.5, 0.2, -0.1);
  const auto c = comp1(0.5, 0.1, 2.5, 0.05, 0.0);
  const auto m1 = ste::make_model({a, b, c}, {0.0});
  const auto m2 = ste::make_model({c, a, b}, {0.0});
  EXPECT_EQ(m1.components, m2.components);
  EXPECT_LT(m1.components[0].mu_a, m1.components[1].mu_a);
  EXPECT_LT(m1.components[1].mu_a, m1.components[2].mu_a);
  for (double x : {0.1, 1.0, 3.3})
    EXPECT_EQ(ste::evaluate(m1, std::vector<double>{x}), ste::evaluate(m2, std::vector<double>{x}));
}

TEST(Evaluate, TiesOnMeanBreakByPowers) {
  const auto a = comp1(1.0, 0.2, 2.0, 0.1, 0.3);
  const auto b = comp1(1.0, 0.2, 0.5, 0.1, 0.3);
  const auto m = ste::make_model({a, b}, {0.0});
  EXPECT_EQ(m.components[0].mu_n[0], 0.5);
}

TEST(Evaluate, RejectsPointsAtOrBelowOrigin) {
  const auto model = ste::make_model({comp1(1.0, 0.1, 1.0, 0.1, 0.0)}, {0.5});
  EXPECT_THROW(ste::evaluate(model, std::vector<double>{0.5}), ste::DomainError);
  EXPECT_THROW(ste::evaluate(model, std::vector<double>{0.2}), ste::DomainError);
  try {
    ste::evaluate(model, std::vector<double>{0.5});
  } catch (const ste::DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("coordinate 1"), std::string::npos);
  }
}

TEST(Evaluate, OverflowIsRangeError) {
  const auto model = ste::make_model({comp1(1.0, 0.0, 400.0, 0.0, 0.0)}, {0.0});
  EXPECT_THROW(ste::evaluate(model, std::vector<double>{10.0}), ste::RangeError);
  // large exponent offset by a tiny coefficient stays representable
  const auto tiny = ste::make_model({comp1(1e-100, 0.0, 400.0, 0.0, 0.0)}, {0.0});
  EXPECT_NEAR(ste::evaluate(tiny, std::vector<double>{10.0}) / 1e300, 1.0, 1e-10);
}

TEST(Evaluate, ReducedEqualsGeneralForUnitWeights) {
  std::mt19937_64 eng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int m = 1; m <= 8; ++m) {
    std::vector<ComponentParams> comps;
    for (int j = 0; j < m; ++j) comps.push_back(comp1(u(eng), 0.5 + 0.3 * u(eng), 1.0 + u(eng), 0.2, 0.5 * u(eng)));
    const auto model = ste::make_model(comps, {0.0});
    const auto g = ste::to_general(model);
    for (double x : {0.25, 1.5, 4.0})
      EXPECT_EQ(ste::evaluate(model, std::vector<double>{x}), ste::evaluate_general(g, std::vector<double>{x}));
  }
}

TEST(Evaluate, GeneralWeightsScaleComponents) {
  const auto a = comp1(1.0, 0.2, 1.0, 0.1, 0.3);
  const auto b = comp1(2.0, 0.3, 2.0, 0.2, -0.4);
  const auto g = ste::make_intensity(3.0, {0.25, 0.75}, {a, b}, {0.0});
  const std::vector<double> x{1.7};
  const double expect = 3.0 * (0.25 * ste::eval_component(a, x, g.x0) + 0.75 * ste::eval_component(b, x, g.x0));
  EXPECT_NEAR(ste::evaluate_general(g, x), expect, 1e-14 * std::abs(expect));
  EXPECT_THROW(ste::make_intensity(1.0, {0.5, 0.6}, {a, b}, {0.0}), std::invalid_argument);
  EXPECT_THROW(ste::make_intensity(0.0, {1.0}, {a}, {0.0}), std::invalid_argument);
}

TEST(Evaluate, ValidatesParameters) {
  EXPECT_THROW(ste::make_model({comp1(1.0, -0.1, 1.0, 0.1, 0.0)}, {0.0}), std::invalid_argument);
  EXPECT_THROW(ste::make_model({comp1(1.0, 0.1, 1.0, 0.1, 1.5)}, {0.0}), std::invalid_argument);
  EXPECT_NO_THROW(ste::make_model({comp1(1.0, 0.1, 1.0, 0.1, 1.0)}, {0.0}));
  EXPECT_THROW(ste::make_model({comp1(NAN, 0.1, 1.0, 0.1, 0.0)}, {0.0}), std::invalid_argument);
  EXPECT_THROW(ste::make_model({}, {0.0}), std::invalid_argument);
}

TEST(TaylorPolynomial, ReproducesPolynomial) {
  const std::vector<double> coeffs{1.0, -2.0, 0.5, 3.0};
  const auto model = ste::from_taylor_polynomial(coeffs, 1.0);
  for (double x : {1.1, 2.0, 3.5}) {
    const double ref = oracle::polynomial(coeffs, x - 1.0);
    EXPECT_NEAR(ste::evaluate(model, std::vector<double>{x}), ref, 1e-12 * std::abs(ref));
  }
}

TEST(TaylorPolynomial, ConstantIsExact) {
  const std::vector<double> coeffs{4.25};
  const auto model = ste::from_taylor_polynomial(coeffs, 0.0);
  EXPECT_EQ(ste::evaluate(model, std::vector<double>{123.0}), 4.25);
}

TEST(OriginalUnits, DividesInputsAndScalesOutput) {
  const auto model = ste::make_model({comp1(2.0, 0.0, 1.0, 0.0, 0.0)}, {0.0}, 0.0, {6000.0, 6000.0});
  // in model units f(t) = 2 t, so f(x) = 6000 * 2 * x / 6000 = 2 x
  EXPECT_NEAR(ste::evaluate_original_units(model, std::vector<double>{3000.0}), 6000.0, 1e-9);
}

TEST(PredictGrid, NamesOffendingPoint) {
  const auto model = ste::make_model({comp1(1.0, 0.0, 1.0, 0.0, 0.0)}, {0.0});
  const std::vector<std::vector<double>> grid{{1.0}, {2.0}, {-1.0}};
  try {
    ste::predict_grid(model, grid);
    FAIL() << "expected DomainError";
  } catch (const ste::DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("grid point 2"), std::string::npos);
  }
}
