#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <vector>

#include "phs/error.hpp"

namespace phs::quad {

struct Result {
  double value = 0.0;
  double error = 0.0;
  int panels = 0;
};

namespace detail {

// 15-point Kronrod abscissae (nonnegative half) and weights; odd entries carry the 7-point Gauss rule.
inline constexpr double xgk[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr double wgk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr double wg[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
  double a, b, value, error;
  bool operator<(const Panel& o) const { return error < o.error; }
};

template <class F>
Panel gk15(F& f, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(center);
  double kronrod = fc * wgk[7];
  double gauss = fc * wg[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = half * xgk[j];
    const double fsum = f(center - dx) + f(center + dx);
    kronrod += wgk[j] * fsum;
    if (j % 2 == 1) gauss += wg[j / 2] * fsum;
  }
  return {a, b, kronrod * half, std::abs((kronrod - gauss) * half)};
}

}  // namespace detail

/// Single 15-point Kronrod panel; exact for polynomials up to degree 22.
template <class F>
double gk15(F&& f, double a, double b) {
  return detail::gk15(f, a, b).value;
}

/// Globally adaptive Gauss-Kronrod quadrature on [a, b].
///
/// Bisects the panel with the largest error estimate until the summed estimate is
/// below max(tol, 1e-14 |I|) or `max_panels` is reached, in which case a
/// QuadratureError carrying the best estimate is thrown.
template <class F>
Result integrate(F&& f, double a, double b, double tol = 1e-10, int max_panels = 10000) {
  if (a == b) return {};
  if (a > b) {
    Result r = integrate(f, b, a, tol, max_panels);
    r.value = -r.value;
    return r;
  }
  std::priority_queue<detail::Panel> panels;
  detail::Panel first = detail::gk15(f, a, b);
  double total = first.value, error = first.error;
  panels.push(first);
  int count = 1;
  auto done = [&] { return error <= std::max(tol, 1e-14 * std::abs(total)); };
  while (!done()) {
    if (count >= max_panels) {
      throw QuadratureError("adaptive quadrature exceeded its panel budget", total, error);
    }
    const detail::Panel worst = panels.top();
    panels.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (mid <= worst.a || mid >= worst.b) {
      // panel cannot be split further in double precision
      throw QuadratureError("adaptive quadrature hit the resolution limit", total, error);
    }
    const detail::Panel left = detail::gk15(f, worst.a, mid);
    const detail::Panel right = detail::gk15(f, mid, worst.b);
    total += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    panels.push(left);
    panels.push(right);
    ++count;
  }
  // Re-sum to shed the drift of incremental updates.
  double sum = 0.0, err = 0.0;
  while (!panels.empty()) {
    sum += panels.top().value;
    err += panels.top().error;
    panels.pop();
  }
  return {sum, err, count};
}

}  // namespace phs::quad
