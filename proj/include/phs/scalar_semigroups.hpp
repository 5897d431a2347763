#pragma once

#include <cmath>
#include <optional>
#include <string>

#include "phs/characteristics.hpp"
#include "phs/statespace.hpp"

namespace phs {

namespace detail {

// out(xi) = w(xi + mu)/w(xi) * x(xi + mu); characteristics that leave the
// half-line give 0 when `zero_fill` is set and an error otherwise.
inline State weighted_shift(const CharacteristicMap& map, const State& x, double t, bool zero_fill) {
  if (t == 0.0) return x;
  const Grid& g = *x.grid();
  const auto& w = map.weight();
  CMatrix out = CMatrix::Zero(x.n(), g.size());
  parallel_for(g.size(), [&](std::size_t i) {
    const double xi = g[i];
    const auto m = map.mu(xi, t);
    if (!m) {
      if (zero_fill) return;
      throw DomainError("characteristic leaves the domain; 1/w is integrable");
    }
    const double eta = xi + *m;
    if (!g.contains(eta)) {
      if (x.tail() == Tail::zero) return;
      throw ExtrapolationError("shifted point lies outside the grid of a state with a nonzero tail");
    }
    const double ratio = w(eta) / w(xi);
    for (int c = 0; c < x.n(); ++c) out(c, i) = ratio * x.at(c, eta);
  });
  return x.with_values(std::move(out));
}

}  // namespace detail

/// Weighted shift group on the line: (T(t)x)(xi) = w(xi+mu)/w(xi) x(xi+mu), t real.
inline State apply_group_line(const CharacteristicMap& map, const State& x, double t) {
  if (map.domain() != Domain::full_line || x.grid()->domain() != Domain::full_line)
    throw DomainError("the shift group acts on states over the whole line");
  if (!map.weight().reciprocal_nonintegrable())
    throw DataError("the shift group needs 1/|w| non-integrable on both half-lines");
  return detail::weighted_shift(map, x, t, false);
}

inline State apply_group_line(const ScalarCoefficient& w, const State& x, double t) {
  return apply_group_line(CharacteristicMap(w, Domain::full_line), x, t);
}

/// Left-shift semigroup on [0, inf) for a positive speed; no boundary condition is needed.
inline State apply_semigroup_left(const CharacteristicMap& map, const State& x, double t) {
  if (!map.positive()) throw SignViolation("left-shift semigroup needs a positive weight");
  if (t < 0.0) throw DomainError("semigroup time must be nonnegative");
  if (x.grid()->left() < 0.0) throw DomainError("half-line semigroup applied to a state on the line");
  return detail::weighted_shift(map, x, t, false);
}

inline State apply_semigroup_left(const ScalarCoefficient& lambda, const State& x, double t) {
  return apply_semigroup_left(CharacteristicMap(lambda, Domain::half_line), x, t);
}

/// Right-shift semigroup on [0, inf) for a negative speed with (theta x)(0) = 0: zero inflow.
inline State apply_semigroup_right(const CharacteristicMap& map, const State& x, double t) {
  if (map.positive()) throw SignViolation("right-shift semigroup needs a negative weight");
  if (t < 0.0) throw DomainError("semigroup time must be nonnegative");
  if (x.grid()->left() < 0.0) throw DomainError("half-line semigroup applied to a state on the line");
  return detail::weighted_shift(map, x, t, true);
}

inline State apply_semigroup_right(const ScalarCoefficient& theta, const State& x, double t) {
  return apply_semigroup_right(CharacteristicMap(theta, Domain::half_line), x, t);
}

struct ResolventResult {
  State value;
  std::optional<std::string> warning;
};

/// Resolvent of the line generator x -> (wx)' at real theta > 0:
/// y(xi) = 1/w(xi) int_xi^inf exp(-theta (p(s) - p(xi))) x(s) ds.
inline ResolventResult resolvent_line(const CharacteristicMap& map, double theta, const State& x) {
  if (!(theta > 0.0)) throw DomainError("resolvent needs theta > 0");
  if (!map.positive()) throw SignViolation("resolvent on the line is implemented for positive weights");
  const Grid& g = *x.grid();
  const std::size_t n = g.size();
  std::vector<double> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = map.p(g[i]);

  // per-cell kernel integrals, then a backward recursion Y_i = e^{-theta dp} Y_{i+1} + cell_i
  CMatrix cells = CMatrix::Zero(x.n(), n);
  parallel_for(n - 1, [&](std::size_t i) {
    for (int c = 0; c < x.n(); ++c) {
      auto re = [&](double s) { return std::exp(-theta * (map.p(s) - p[i])) * x.at(c, s).real(); };
      auto im = [&](double s) { return std::exp(-theta * (map.p(s) - p[i])) * x.at(c, s).imag(); };
      cells(c, i) = Complex(quad::gk15(re, g[i], g[i + 1]), quad::gk15(im, g[i], g[i + 1]));
    }
  });
  CMatrix y = CMatrix::Zero(x.n(), n);
  CVector acc = CVector::Zero(x.n());
  for (std::size_t i = n - 1; i-- > 0;) {
    acc = std::exp(-theta * (p[i + 1] - p[i])) * acc + cells.col(i);
    y.col(i) = acc / map.weight()(g[i]);
  }

  ResolventResult r{x.with_values(std::move(y)), std::nullopt};
  const double peak = x.values().cwiseAbs().maxCoeff();
  const double edge = x.values().col(n - 1).cwiseAbs().maxCoeff();
  if (x.tail() == Tail::hold_last || edge > 1e-12 * peak)
    r.warning = "input does not decay within the grid; the resolvent integral is truncated at the right end";
  return r;
}

inline ResolventResult resolvent_line(const ScalarCoefficient& w, double theta, const State& x) {
  return resolvent_line(CharacteristicMap(w, Domain::full_line), theta, x);
}

/// ||theta y - (w y)' - x||_w / ||x||_w with the derivative taken by finite differences.
inline double resolvent_residual(const ScalarCoefficient& w, double theta, const State& x, const State& y) {
  const Grid& g = *x.grid();
  CMatrix wy = y.values();
  RMatrix wn(1, g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    wn(0, i) = std::abs(w(g[i]));
    wy.col(i) *= w(g[i]);
  }
  const CMatrix r = theta * y.values() - differentiate(g, wy) - x.values();
  const RMatrix weight = RMatrix::Ones(x.n(), 1) * wn;
  const double rn = diagonal_norm_squared(x.with_values(r), weight);
  const double xn = diagonal_norm_squared(x, weight);
  return xn > 0 ? std::sqrt(rn / xn) : std::sqrt(rn);
}

struct BarbalatReport {
  double sup = 0.0;       // sup |w x| over the grid
  double argsup = 0.0;
  double bound = 0.0;     // |w x(0)|^2 + 2 ||x||_w ||(w x)'||_w
  bool passed = true;     // sup^2 <= bound (1 + 1e-6)
  bool weight_bounded = false;
  double tail_value = 0.0;  // |w x| at the last node, reported when w is bounded
  double tail_threshold = 0.0;
  bool tail_small = true;
};

/// Checks sup|wx|^2 <= |wx(0)|^2 + 2 ||x||_w ||(wx)'||_w on the grid.
/// `derivative` supplies (wx)' when known; otherwise it is taken by finite differences.
inline BarbalatReport barbalat_check(const ScalarCoefficient& w, const State& x,
                                     const std::optional<State>& derivative = std::nullopt) {
  const Grid& g = *x.grid();
  const std::size_t n = g.size();
  CMatrix wx = x.values();
  RMatrix wn(1, n);
  for (std::size_t i = 0; i < n; ++i) {
    wn(0, i) = std::abs(w(g[i]));
    wx.col(i) *= w(g[i]);
  }
  const CMatrix d = derivative ? derivative->values() : differentiate(g, wx);
  const RMatrix weight = RMatrix::Ones(x.n(), 1) * wn;
  const double norm_x = std::sqrt(diagonal_norm_squared(x, weight));
  const double norm_d = std::sqrt(diagonal_norm_squared(x.with_values(d), weight));

  BarbalatReport r;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = wx.col(i).norm();
    if (v > r.sup) {
      r.sup = v;
      r.argsup = g[i];
    }
  }
  const State wx_state = x.with_values(wx);
  const double at_zero = g.contains(0.0) ? wx_state.at(0.0).norm() : 0.0;
  r.bound = at_zero * at_zero + 2.0 * norm_x * norm_d;
  r.passed = r.sup * r.sup <= r.bound * (1.0 + 1e-6) + 1e-300;
  r.weight_bounded = w.bounded();
  if (r.weight_bounded) {
    r.tail_value = wx.col(n - 1).norm();
    r.tail_threshold = 1e-6 * std::max(1.0, r.sup);
    r.tail_small = r.tail_value <= r.tail_threshold;
  }
  return r;
}

}  // namespace phs
