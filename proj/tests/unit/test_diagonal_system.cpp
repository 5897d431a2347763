#include <gtest/gtest.h>

#include <random>

#include "phs/diagonal_system.hpp"
#include "support/oracles.hpp"

using namespace phs;

namespace {

CMatrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  CMatrix m(rows.size(), rows.begin()->size());
  int i = 0;
  for (auto& r : rows) {
    int j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

const ScalarCoefficient one = ScalarCoefficient::constant(1.0);
const ScalarCoefficient minus_one = ScalarCoefficient::constant(-1.0);

// Five unit-speed edges with x4(0) = x2(0) - x3(0) and x5(0) = x2(0) - x1(0).
DiagonalSystem network() {
  return DiagonalSystem({one, one, one}, {minus_one, minus_one}, -mat({{0, 1}, {1, 0}}),
                        mat({{1, -1, 0}, {0, -1, 1}}));
}

}  // namespace

TEST(DiagonalSystem, Verdicts) {
  const DiagonalSystem weiss({one, one, one}, {minus_one, minus_one}, mat({{0, 1}, {1, 0}}),
                             mat({{1, -1, 0}, {0, -1, 1}}));
  EXPECT_TRUE(check_generation_diagonal(weiss).generator);
  EXPECT_EQ(check_generation_diagonal(weiss).branch, "general");

  const DiagonalSystem singular({one}, {minus_one}, mat({{0}}), mat({{1}}));
  const auto v = check_generation_diagonal(singular);
  EXPECT_FALSE(v.generator);
  EXPECT_EQ(v.sigma_min_K, 0.0);

  const DiagonalSystem outgoing({one, ScalarCoefficient::affine_reciprocal(1.0, 1.0)}, {}, CMatrix(0, 0),
                                CMatrix(0, 2));
  EXPECT_TRUE(check_generation_diagonal(outgoing).generator);
  EXPECT_EQ(check_generation_diagonal(outgoing).branch, "no incoming components");

  EXPECT_THROW(DiagonalSystem({one}, {minus_one}, mat({{0}}), mat({{0}})), DataError);
  EXPECT_THROW(DiagonalSystem({minus_one}, {}, CMatrix(0, 0), CMatrix(0, 1)), SignViolation);
  EXPECT_THROW(DiagonalSystem({one}, {minus_one}, mat({{1, 0}}), mat({{1}})), DimensionError);
}

TEST(DiagonalSystem, BoundaryTraceSolve) {
  const DiagonalSystem identity({}, {minus_one, minus_one}, CMatrix::Identity(2, 2), CMatrix(2, 0));
  CVector u(2);
  u << 1.0, 2.0;
  EXPECT_LE((boundary_trace_solve(identity, CVector(0), u) - u).norm(), 1e-15);

  const DiagonalSystem weiss({one, one, one}, {minus_one, minus_one}, mat({{0, 1}, {1, 0}}),
                             mat({{1, -1, 0}, {0, -1, 1}}));
  std::mt19937_64 rng(1);
  std::normal_distribution<double> d;
  for (int k = 0; k < 10; ++k) {
    CVector tr(3);
    tr << Complex(d(rng), d(rng)), Complex(d(rng), d(rng)), Complex(d(rng), d(rng));
    const CVector y = boundary_trace_solve(weiss, tr, CVector::Zero(2));
    EXPECT_LE(std::abs(y(0) - (tr(1) - tr(2))), 1e-14);
    EXPECT_LE(std::abs(y(1) - (tr(1) - tr(0))), 1e-14);
  }
  EXPECT_EQ(boundary_trace_solve(weiss, CVector::Zero(3), CVector::Zero(2)).norm(), 0.0);

  const DiagonalSystem singular({one}, {minus_one}, mat({{0}}), mat({{1}}));
  EXPECT_THROW(boundary_trace_solve(singular, CVector::Ones(1), CVector::Zero(1)), ClassificationError);
  EXPECT_THROW(DiagonalStepper(singular, Grid::uniform(0.0, 1.0, 11), 0.1), ClassificationError);
}

TEST(DiagonalSystem, ShiftsWithZeroInput) {
  const DiagonalSystem sys({one}, {minus_one}, mat({{1}}), mat({{0}}));
  auto g = Grid::uniform(0.0, 10.0, 1001);
  auto f = [](double xi) { return oracle::bump(xi, 2.0, 4.0); };
  const auto x = State::sample(g, 2, [&](double xi) {
    CVector v(2);
    v << f(xi), 2.0 * f(xi);
    return v;
  });
  const auto y = evolve_diagonal(sys, x, 1.0);
  for (std::size_t i = 0; i < g->size(); ++i) {
    const double xi = (*g)[i];
    EXPECT_NEAR(y.values()(0, i).real(), f(xi + 1.0), 1e-12);
    EXPECT_NEAR(y.values()(1, i).real(), 2.0 * f(xi - 1.0), 1e-12);
  }
}

TEST(DiagonalSystem, InflowRamp) {
  // K = 1, Q = 0: theta(0) g_-(0, t) = c, so g_- = c / theta = -c behind the front
  const DiagonalSystem sys({one}, {minus_one}, mat({{1}}), mat({{0}}));
  auto g = Grid::uniform(0.0, 4.0, 401);
  const Complex c(0.75, -0.25);
  const InputFn u = [&](double) { return CVector::Constant(1, c); };
  const DiagonalStepper stepper(sys, g, 0.1);
  State x = State::zeros(g, 2);
  for (int k = 0; k < 7; ++k) x = stepper.step(x, 0.1 * k, u);
  for (std::size_t i = 0; i < g->size(); ++i) {
    const double xi = (*g)[i];
    if (xi < 0.7 - 1e-9) {
      EXPECT_NEAR(std::abs(x.values()(1, i) + c), 0.0, 1e-12) << xi;
    } else if (xi > 0.7 + 1e-9) {
      EXPECT_EQ(x.values()(1, i), Complex(0.0)) << xi;
    }
    EXPECT_EQ(x.values()(0, i), Complex(0.0));
  }
}

TEST(DiagonalSystem, InflowFollowsTimeDependentInput) {
  // theta = -2/(1+xi): the value at xi entered at time t - |p(xi)| = t - (xi + xi^2/2)/2
  const auto theta = ScalarCoefficient::affine_reciprocal(-2.0, 1.0);
  const DiagonalSystem sys({}, {theta}, mat({{1}}), CMatrix(1, 0));
  auto g = Grid::uniform(0.0, 3.0, 301);
  const InputFn u = [](double t) { return CVector::Constant(1, Complex(std::sin(3.0 * t))); };
  const auto y = evolve_diagonal(sys, State::zeros(g, 1), 1.5, u);
  for (std::size_t i = 0; i < g->size(); ++i) {
    const double xi = (*g)[i], flight = 0.5 * (xi + 0.5 * xi * xi);
    const double expected = flight <= 1.5 ? std::sin(3.0 * (1.5 - flight)) / theta(xi) : 0.0;
    EXPECT_NEAR(y.values()(0, i).real(), expected, 1e-8) << xi;
  }
}

TEST(DiagonalSystem, NetworkCoupling) {
  const auto sys = network();
  auto g = Grid::uniform(0.0, 6.0, 601);
  auto f = [](int c, double xi) { return oracle::bump(xi, 0.5 + 0.3 * c, 2.5 + 0.2 * c) * (1.0 + c); };
  const auto x = State::sample(g, 5, [&](double xi) {
    CVector v(5);
    for (int c = 0; c < 5; ++c) v(c) = f(c, xi);
    return v;
  });
  const auto y = evolve_diagonal(sys, x, 1.0);
  for (std::size_t i = 0; i < g->size(); ++i) {
    const double xi = (*g)[i];
    if (xi >= 1.0) continue;
    EXPECT_NEAR(y.values()(3, i).real(), f(1, 1.0 - xi) - f(2, 1.0 - xi), 1e-12);
    EXPECT_NEAR(y.values()(4, i).real(), f(1, 1.0 - xi) - f(0, 1.0 - xi), 1e-12);
  }
}

TEST(DiagonalSystem, ZeroInputKeepsBoundaryCondition) {
  const auto sys = network();
  auto g = Grid::uniform(0.0, 8.0, 801);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> a(0.0, 2.0);
  std::vector<double> c0(5);
  for (auto& c : c0) c = a(rng);
  const auto x0 = State::sample(g, 5, [&](double xi) {
    CVector v(5);
    for (int c = 0; c < 5; ++c) v(c) = oracle::bump(xi, c0[c], c0[c] + 3.0);
    return v;
  });
  const DiagonalStepper stepper(sys, g, 0.05);
  State x = x0;
  for (int k = 0; k < 40; ++k) {
    x = stepper.step(x, 0.05 * k, {});
    const double trace = std::hypot(outgoing_trace(sys, x).norm(), inflow_trace(sys, x).norm());
    EXPECT_LE(boundary_residual(sys, x, CVector::Zero(2)), 1e-8 * (sys.K().norm() + sys.Q().norm()) * trace + 1e-300);
  }
}

TEST(DiagonalSystem, SemigroupProperty) {
  auto g = Grid::uniform(0.0, 12.0, 2401);
  const auto x0 = State::sample(g, 5, [](double xi) {
    CVector v(5);
    for (int c = 0; c < 5; ++c) v(c) = oracle::bump(xi, 0.4 * c, 3.0 + 0.4 * c);
    return v;
  }, Interp::cubic_spline);
  const auto sys = network();
  const auto once = evolve_diagonal(sys, x0, 1.3);
  const auto twice = evolve_diagonal(sys, evolve_diagonal(sys, x0, 0.65), 0.65, {}, 0.65);
  EXPECT_LE((once.values() - twice.values()).cwiseAbs().maxCoeff(), 1e-10);

  const DiagonalSystem varying({ScalarCoefficient::power_tail(1.0, -1.0, 1.0, 0.0),
                                ScalarCoefficient::affine_reciprocal(2.0, 1.0)},
                               {ScalarCoefficient::affine_reciprocal(-1.0, 1.0)}, mat({{2}}), mat({{1, -1}}));
  const auto y0 = State::sample(g, 3, [](double xi) {
    CVector v(3);
    v << oracle::bump(xi, 1.0, 4.0), oracle::bump(xi, 0.5, 2.0), oracle::bump(xi, 0.2, 1.5);
    return v;
  }, Interp::cubic_spline);
  const auto a = evolve_diagonal(varying, y0, 1.0);
  const auto b = evolve_diagonal(varying, evolve_diagonal(varying, y0, 0.5), 0.5, {}, 0.5);
  EXPECT_LE((a.values() - b.values()).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(DiagonalSystem, UpwindConvergesAtFirstOrder) {
  const auto sys = network();
  const double L = 6.0, T = 1.0;
  auto init = [](double xi) {
    Eigen::VectorXcd v(5);
    for (int c = 0; c < 5; ++c) v(c) = std::exp(-4.0 * (xi - 2.0 - 0.2 * c) * (xi - 2.0 - 0.2 * c));
    return v;
  };
  std::vector<std::function<double(double)>> speeds = {[](double) { return 1.0; }, [](double) { return 1.0; },
                                                       [](double) { return 1.0; }, [](double) { return -1.0; },
                                                       [](double) { return -1.0; }};
  auto fine = Grid::uniform(0.0, L, 6001);
  const auto exact = evolve_diagonal(sys, State::sample(fine, 5, init, Interp::cubic_spline), T);
  std::vector<double> errors;
  for (int cells : {200, 400, 800}) {
    const double h = L / cells;
    const auto fv = oracle::upwind_fv(speeds, 3, sys.K(), sys.Q(), init, L, cells, T);
    double e = 0.0;
    for (int i = 0; i < cells; ++i) e += h * (fv.col(i) - exact.at((i + 0.5) * h)).squaredNorm();
    errors.push_back(std::sqrt(e));
  }
  for (std::size_t k = 1; k < errors.size(); ++k) EXPECT_GE(std::log2(errors[k - 1] / errors[k]), 0.9);
}

TEST(DiagonalSystem, TransferFunctionVanishes) {
  const DiagonalSystem unit({}, {minus_one}, mat({{1}}), CMatrix(1, 0));
  const auto r = verify_transfer_zero(unit, 1.0, CVector::Ones(1));
  EXPECT_NEAR(r.norm_squared(0), 0.5, 1e-10);
  EXPECT_TRUE(r.passed);
  EXPECT_EQ(r.G.size(), 0);

  const DiagonalSystem two({one}, {ScalarCoefficient::affine_reciprocal(-1.0, 1.0, Domain::half_line),
                                   ScalarCoefficient::power_tail(-2.0, 0.0, -1.0, 0.0)},
                           CMatrix::Identity(2, 2), mat({{1}, {0}}));
  std::mt19937_64 rng(9);
  std::normal_distribution<double> d;
  CVector u0(2);
  u0 << Complex(d(rng), d(rng)), Complex(d(rng), d(rng));
  const auto s = verify_transfer_zero(two, Complex(2.0, 3.0), u0);
  EXPECT_LE(s.max_relative_error, 1e-4);
  EXPECT_EQ(s.input_residual, 0.0);
  EXPECT_EQ(s.G.norm(), 0.0);
  EXPECT_TRUE(s.passed);

  const auto z = verify_transfer_zero(two, 1.0, CVector::Zero(2));
  EXPECT_EQ(z.norm_squared.norm(), 0.0);
  EXPECT_TRUE(z.passed);
  EXPECT_THROW(verify_transfer_zero(two, Complex(0.0, 1.0), u0), DomainError);
}
