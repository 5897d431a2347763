#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <random>

#include "phs/coeffs.hpp"

using namespace phs;

namespace {

double central(const ScalarCoefficient& c, double xi) {
  const double h = 1e-5 * (1.0 + std::abs(xi));
  return (c(xi + h) - c(xi - h)) / (2.0 * h);
}

std::vector<ScalarCoefficient> closed_forms() {
  return {ScalarCoefficient::constant(2.0),
          ScalarCoefficient::affine_reciprocal(1.0, 1.0),
          ScalarCoefficient::affine(1.0, 1.0),
          ScalarCoefficient::power_tail(1.0, -3.0, 1.0, 0.0),
          ScalarCoefficient::power_tail(1.0, -1.0, 1.0, 0.0),
          ScalarCoefficient::power_tail(1.0, 1.0, 1.0, 0.0),
          ScalarCoefficient::power_tail(-2.0, 0.5, -3.0, 1.0)};
}

}  // namespace

TEST(Coeffs, EvalExamples) {
  EXPECT_EQ(ScalarCoefficient::constant(2.0)(7.0), 2.0);
  EXPECT_DOUBLE_EQ(ScalarCoefficient::affine_reciprocal(1.0, 1.0)(1.0), 0.5);
  EXPECT_DOUBLE_EQ(ScalarCoefficient::power_tail(1.0, -3.0, 1.0, 0.0)(2.0), 0.125);
}

TEST(Coeffs, DerivativeExamples) {
  EXPECT_EQ(ScalarCoefficient::constant(2.0).derivative(3.0), 0.0);
  EXPECT_DOUBLE_EQ(ScalarCoefficient::affine_reciprocal(1.0, 1.0).derivative(0.0), -1.0);
  const auto tail = ScalarCoefficient::power_tail(1.0, -1.0, 1.0, 0.0);
  EXPECT_NEAR(tail.derivative(2.0), -0.25, 1e-15);
  EXPECT_NEAR(tail.derivative(2.0), central(tail, 2.0), 1e-9);
}

TEST(Coeffs, IntegrateExamples) {
  EXPECT_DOUBLE_EQ(ScalarCoefficient::constant(2.0).integrate(0.0, 3.0), 6.0);
  EXPECT_NEAR(ScalarCoefficient::affine(1.0, 1.0).integrate(0.0, 2.0), 4.0, 1e-14);
  EXPECT_NEAR(ScalarCoefficient::power_tail(1.0, 1.0, 1.0, 0.0).integrate(1.0, 3.0), 4.0, 1e-13);
  // the reciprocal of 1/(1+xi) integrates to xi + xi^2/2
  EXPECT_NEAR(ScalarCoefficient::affine_reciprocal(1.0, 1.0).integrate_reciprocal(0.0, 2.0), 4.0, 1e-14);
}

TEST(Coeffs, BlendMatchesTailWithC1Seam) {
  const auto c = ScalarCoefficient::power_tail(1.0, -3.0, 1.0, 0.0);
  EXPECT_DOUBLE_EQ(c(0.0), 1.0);
  EXPECT_NEAR(c.derivative(0.0), 0.0, 1e-15);
  EXPECT_NEAR(c(1.0 - 1e-12), 1.0, 1e-10);
  EXPECT_NEAR(c.derivative(1.0 - 1e-12), -3.0, 1e-9);
  EXPECT_NEAR(c.derivative(1.0 + 1e-12), -3.0, 1e-9);
  // cubic blend 1 + 3s^2 - 3s^3 for the string tension
  EXPECT_NEAR(c(0.5), 1.0 + 0.75 - 0.375, 1e-15);
}

TEST(Coeffs, DerivativeMatchesCentralDifference) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 20.0);
  for (const auto& c : closed_forms()) {
    for (int k = 0; k < 100; ++k) {
      const double xi = u(rng) + 1e-4;
      const double d = c.derivative(xi);
      EXPECT_LE(std::abs(d - central(c, xi)), 1e-6 * (1.0 + std::abs(d))) << c.kind_name() << " at " << xi;
    }
  }
}

TEST(Coeffs, IntegrateIsAdditive) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 30.0);
  const double tol = 1e-10;
  auto table = ScalarCoefficient::tabulated({0.0, 0.5, 1.0, 2.0, 4.0}, {1.0, 0.8, 0.5, 0.3, 0.2});
  auto all = closed_forms();
  all.push_back(table);
  for (const auto& c : all) {
    for (int k = 0; k < 20; ++k) {
      double a = u(rng), b = u(rng), d = u(rng);
      if (a > b) std::swap(a, b);
      if (b > d) std::swap(b, d);
      if (a > b) std::swap(a, b);
      for (bool recip : {false, true}) {
        auto I = [&](double x, double y) {
          return recip ? c.integrate_reciprocal(x, y, tol) : c.integrate(x, y, tol);
        };
        const double whole = I(a, d);
        EXPECT_LE(std::abs(whole - I(a, b) - I(b, d)), 2 * tol + 1e-14 * std::abs(whole)) << c.kind_name();
      }
    }
  }
}

TEST(Coeffs, ClosedFormIntegralsAgreeWithQuadrature) {
  for (const auto& c : closed_forms()) {
    for (auto [a, b] : {std::pair{0.0, 0.7}, std::pair{0.2, 3.5}, std::pair{1.5, 9.0}}) {
      const double q = quad::integrate([&](double x) { return c(x); }, a, b, 1e-13).value;
      EXPECT_NEAR(c.integrate(a, b), q, 1e-11 * (1.0 + std::abs(q))) << c.kind_name();
      const double qr = quad::integrate([&](double x) { return 1.0 / c(x); }, a, b, 1e-13).value;
      EXPECT_NEAR(c.integrate_reciprocal(a, b), qr, 1e-11 * (1.0 + std::abs(qr))) << c.kind_name();
    }
  }
}

TEST(Coeffs, TabulatedIntegralsAgreeWithQuadratureAfterScaling) {
  const auto table = ScalarCoefficient::tabulated({0.0, 0.5, 1.0, 2.0, 4.0}, {1.0, 0.8, 0.5, 0.3, 0.2});
  for (double f : {1.0, -1.0, 2.5}) {
    const auto c = table.scaled(f);
    for (auto [a, b] : {std::pair{0.1, 0.3}, std::pair{0.2, 3.5}, std::pair{1.5, 9.0}, std::pair{5.0, 6.0}}) {
      const double q = quad::integrate([&](double x) { return c(x); }, a, b, 1e-13).value;
      EXPECT_NEAR(c.integrate(a, b), q, 1e-11 * (1.0 + std::abs(q))) << f;
      const double qr = quad::integrate([&](double x) { return 1.0 / c(x); }, a, b, 1e-13).value;
      EXPECT_NEAR(c.integrate_reciprocal(a, b), qr, 1e-11 * (1.0 + std::abs(qr))) << f;
    }
  }
}

TEST(Coeffs, FullLineIsEvenExtension) {
  const auto c = ScalarCoefficient::affine_reciprocal(1.0, 1.0, Domain::full_line);
  EXPECT_DOUBLE_EQ(c(-1.0), 0.5);
  EXPECT_DOUBLE_EQ(c.derivative(-1.0), 0.25);
  EXPECT_NEAR(c.integrate_reciprocal(-2.0, 2.0), 8.0, 1e-14);
  EXPECT_NEAR(c.integrate_reciprocal(-3.0, -1.0), 6.0, 1e-13);
}

TEST(Coeffs, SignInvarianceOnLogSamples) {
  auto all = closed_forms();
  all.push_back(ScalarCoefficient::tabulated({0.0, 1.0, 10.0}, {3.0, 0.01, 2.0}));
  for (const auto& c : all) {
    for (int k = 0; k < 10000; ++k) {
      const double xi = k == 0 ? 0.0 : std::pow(10.0, -6.0 + 12.0 * k / 9999.0);
      const double v = c(xi);
      if (c.sign() == Sign::positive) ASSERT_GT(v, 0.0);
      else ASSERT_LT(v, 0.0);
    }
  }
}

TEST(Coeffs, Errors) {
  const auto c = ScalarCoefficient::constant(1.0);
  EXPECT_THROW(c(-1.0), DomainError);
  EXPECT_THROW(ScalarCoefficient::tabulated({0.0, 1.0, 1.0}, {1.0, 2.0, 3.0}), DataError);
  EXPECT_THROW(ScalarCoefficient::tabulated({0.0, 1.0}, {1.0, -2.0}), SignViolation);
  EXPECT_THROW(ScalarCoefficient::tabulated({0.5, 1.0}, {1.0, 2.0})(0.2), DomainError);
  // a blend that must dip through zero to reach the tail
  EXPECT_THROW(ScalarCoefficient::power_tail(1.0, 0.0, 0.1, -3.0), SignViolation);
  auto stubborn = [](double x) { return 1.0 / std::sqrt(std::abs(x - 0.3)); };
  try {
    quad::integrate(stubborn, 0.0, 1.0, 1e-14, 50);
    FAIL() << "expected a quadrature error";
  } catch (const QuadratureError& e) {
    EXPECT_GT(e.best_estimate(), 0.0);
    EXPECT_GT(e.achieved_error(), 1e-14);
  }
}

TEST(Coeffs, TabulatedIsMonotoneAndReadsCsv) {
  const std::string path = testing::TempDir() + "/table.csv";
  {
    std::ofstream out(path);
    out << "xi,value\n0,1\n1,2\n2,2\n3,5\n";
  }
  const auto c = ScalarCoefficient::from_csv(path);
  EXPECT_DOUBLE_EQ(c(1.0), 2.0);
  for (double x = 1.0; x <= 2.0; x += 0.01) EXPECT_NEAR(c(x), 2.0, 1e-15);  // flat data stays flat
  EXPECT_DOUBLE_EQ(c(10.0), 5.0);
  EXPECT_EQ(c.derivative(10.0), 0.0);
  EXPECT_NEAR(c.integrate(3.0, 5.0), 10.0, 1e-14);
  std::remove(path.c_str());
}

TEST(Coeffs, NonintegrabilityHeuristic) {
  EXPECT_FALSE(ScalarCoefficient::constant(1.0).nonintegrability_warning());
  EXPECT_FALSE(ScalarCoefficient::affine_reciprocal(1.0, 1.0).nonintegrability_warning());
  EXPECT_TRUE(ScalarCoefficient::power_tail(1.0, 2.0, 1.0, 0.0).nonintegrability_warning());
}

TEST(Coeffs, MatrixCoefficientFlags) {
  const auto h = MatrixCoefficient::diagonal(
      {ScalarCoefficient::affine(1.0, 1.0), ScalarCoefficient::power_tail(1.0, -3.0, 1.0, 0.0)});
  EXPECT_TRUE(h.flags().positive_definite);
  EXPECT_NO_THROW(h.validate({0.0, 0.5, 2.0, 100.0}));
  EXPECT_NEAR(h(2.0)(0, 0).real(), 3.0, 1e-15);
  EXPECT_NEAR(h.derivative(2.0)(1, 1).real(), -3.0 / 16.0, 1e-15);

  CMatrix bad(2, 2);
  bad << 1.0, 2.0, 0.0, 1.0;
  auto entries = std::vector<MatrixCoefficient::Entry>{
      MatrixCoefficient::entry(bad(0, 0)), MatrixCoefficient::entry(bad(0, 1)),
      MatrixCoefficient::entry(bad(1, 0)), MatrixCoefficient::entry(bad(1, 1))};
  MatrixCoefficient m(2, entries, {true, false, false, true});
  EXPECT_THROW(m.validate({0.0}), DataError);
}
