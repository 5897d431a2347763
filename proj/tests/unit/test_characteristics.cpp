#include <gtest/gtest.h>

#include <random>
#include <thread>

#include "phs/characteristics.hpp"

using namespace phs;

namespace {

CharacteristicMap unit() { return CharacteristicMap(ScalarCoefficient::constant(1.0)); }
CharacteristicMap two() { return CharacteristicMap(ScalarCoefficient::constant(2.0)); }
CharacteristicMap decaying() { return CharacteristicMap(ScalarCoefficient::affine_reciprocal(1.0, 1.0)); }
CharacteristicMap backward() { return CharacteristicMap(ScalarCoefficient::constant(-1.0)); }
CharacteristicMap string_speed() {
  return CharacteristicMap(ScalarCoefficient::power_tail(1.0, -1.0, 1.0, 0.0));
}

// p(xi) = xi + xi^2/2 inverted by the quadratic formula
double decaying_inverse(double tau) { return -1.0 + std::sqrt(1.0 + 2.0 * tau); }

}  // namespace

TEST(Characteristics, TimeOfFlightExamples) {
  EXPECT_DOUBLE_EQ(unit().p(5.0), 5.0);
  EXPECT_NEAR(decaying().p(2.0), 4.0, 1e-14);
  EXPECT_DOUBLE_EQ(backward().p(3.0), -3.0);
  EXPECT_EQ(decaying().p(0.0), 0.0);
}

TEST(Characteristics, InverseExamples) {
  EXPECT_NEAR(*unit().p_inverse(5.0), 5.0, 1e-12);
  EXPECT_NEAR(*decaying().p_inverse(4.0), 2.0, 1e-12);
  EXPECT_NEAR(*two().p_inverse(1.5), 3.0, 1e-12);
  EXPECT_FALSE(unit().p_inverse(-1.0));
  EXPECT_FALSE(backward().p_inverse(1.0));
  EXPECT_NEAR(*backward().p_inverse(-2.0), 2.0, 1e-12);
}

TEST(Characteristics, DisplacementAndFlowExamples) {
  EXPECT_DOUBLE_EQ(*unit().mu(3.0, 2.0), 2.0);
  EXPECT_NEAR(*decaying().mu(0.0, 1.5), 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(*backward().mu(3.0, 1.0), -1.0);
  EXPECT_DOUBLE_EQ(two().flow(1.0, 3.0), 7.0);
  EXPECT_NEAR(decaying().flow(0.0, 1.5), 1.0, 1e-12);
  EXPECT_EQ(unit().flow(4.0, 0.0), 4.0);
  EXPECT_EQ(*decaying().mu(2.5, 0.0), 0.0);
}

TEST(Characteristics, OutOfRangeOnHalfLine) {
  EXPECT_FALSE(backward().mu(1.0, 1.5));
  EXPECT_TRUE(std::isinf(backward().flow(1.0, 1.5)));
  EXPECT_FALSE(decaying().mu(1.0, -2.0));  // p(1) = 1.5
  EXPECT_NEAR(*decaying().mu(1.0, -1.5), -1.0, 1e-12);
  EXPECT_FALSE(CharacteristicMap(ScalarCoefficient::affine_reciprocal(-1.0, 1.0)).mu(1.0, 1.6));
}

TEST(Characteristics, RoundTrip) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 40.0);
  for (const auto& map : {unit(), decaying(), string_speed(), backward()}) {
    for (int k = 0; k < 1000; ++k) {
      const double xi = u(rng);
      const auto back = map.p_inverse(map.p(xi));
      ASSERT_TRUE(back);
      EXPECT_LE(std::abs(*back - xi), 10 * map.tol_inv() * (1.0 + xi));
    }
  }
  for (int k = 0; k < 100; ++k) {
    const double tau = 1000.0 * std::uniform_real_distribution<double>(0, 1)(rng);
    EXPECT_NEAR(*decaying().p_inverse(tau), decaying_inverse(tau), 1e-9 * (1 + decaying_inverse(tau)));
  }
}

TEST(Characteristics, CocycleAndSign) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  for (const auto& map : {decaying(), string_speed()}) {
    for (int k = 0; k < 200; ++k) {
      const double xi = u(rng), t = u(rng), s = u(rng);
      const double a = *map.mu(xi, t), b = *map.mu(xi + a, s), c = *map.mu(xi, s + t);
      EXPECT_LE(std::abs(a + b - c), 1e-6 * (1.0 + std::abs(c)));
      EXPECT_GT(a, 0.0);
    }
  }
  const auto neg = CharacteristicMap(ScalarCoefficient::affine_reciprocal(-1.0, 1.0));
  EXPECT_LT(*neg.mu(5.0, 1.0), 0.0);
}

TEST(Characteristics, FlowDerivative) {
  const auto map = decaying();
  const double h = 1e-5;
  for (double xi : {0.0, 0.3, 2.0, 7.0})
    for (double t : {0.1, 1.0, 4.0}) {
      const double d = (map.flow(xi, t + h) - map.flow(xi, t - h)) / (2 * h);
      EXPECT_LE(std::abs(d - map.weight()(map.flow(xi, t))), 1e-4);
    }
}

TEST(Characteristics, FullLine) {
  const CharacteristicMap line(ScalarCoefficient::affine_reciprocal(1.0, 1.0, Domain::full_line));
  EXPECT_NEAR(line.p(-2.0), -4.0, 1e-14);
  EXPECT_NEAR(*line.p_inverse(-4.0), -2.0, 1e-12);
  EXPECT_NEAR(*line.mu(-1.0, 3.0), 1.0 + decaying_inverse(1.5), 1e-11);
}

TEST(Characteristics, LemmaSuite) {
  for (const auto& map : {unit(), two(), decaying(), string_speed()}) {
    const auto rep = verify_lemma1(map, 100, 7);
    for (const auto& p : rep.properties)
      EXPECT_TRUE(p.passed) << p.name << " residual " << p.max_residual;
  }
  EXPECT_LE(verify_lemma1(unit(), 100, 1).properties.back().max_residual, 1e-8);
  const auto rep = verify_lemma1(backward(), 100, 1);
  EXPECT_TRUE(rep.passed());
  EXPECT_EQ(rep.properties.back().name, "x");
  EXPECT_EQ(rep.properties.back().max_residual, 0.0);
}

TEST(Characteristics, ConcurrentUse) {
  const auto map = string_speed();
  std::vector<double> out(4000);
  std::vector<std::thread> pool;
  for (int w = 0; w < 4; ++w)
    pool.emplace_back([&, w] {
      for (int i = w; i < 4000; i += 4) out[i] = *map.p_inverse(map.p(0.01 * i));
    });
  for (auto& t : pool) t.join();
  for (int i = 0; i < 4000; ++i) EXPECT_NEAR(out[i], 0.01 * i, 1e-8 * (1 + 0.01 * i));
}
