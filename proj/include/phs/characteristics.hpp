#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <string>
#include <vector>

#include "phs/coeffs.hpp"

namespace phs {

/// Time-of-flight p(xi) = int_0^xi 1/w and displacement mu(xi, t) along xi' = w(xi).
///
/// Copies share one lazily grown bracketing table; growth is guarded so a map
/// can be used from several threads at once.
class CharacteristicMap {
 public:
  explicit CharacteristicMap(ScalarCoefficient weight, double tol_p = 1e-10, double tol_inv = 1e-9)
      : CharacteristicMap(weight, weight.domain(), tol_p, tol_inv) {}

  CharacteristicMap(ScalarCoefficient weight, Domain domain, double tol_p = 1e-10,
                    double tol_inv = 1e-9)
      : weight_(std::move(weight)),
        domain_(domain),
        tol_p_(tol_p),
        tol_inv_(tol_inv),
        cache_(std::make_shared<Cache>()) {
    if (domain_ == Domain::full_line && weight_.domain() != Domain::full_line)
      throw DomainError("full-line map needs a full-line weight");
  }

  const ScalarCoefficient& weight() const { return weight_; }
  Domain domain() const { return domain_; }
  double tol_p() const { return tol_p_; }
  double tol_inv() const { return tol_inv_; }
  bool positive() const { return weight_.sign() == Sign::positive; }

  /// Largest |xi| the map will explore when searching for preimages.
  static constexpr double horizon = 1e12;

  /// p(xi); exactly 0 at xi = 0.
  double p(double xi) const {
    check(xi);
    if (xi == 0.0) return 0.0;
    if (exact_kind()) return weight_.integrate_reciprocal(0.0, xi, tol_p_);
    const Side& side = grow_to(xi);
    std::shared_lock lock(cache_->mutex);
    return side.p_at(xi, *this);
  }

  /// Preimage of tau under p, or nullopt when tau lies outside the range of p.
  std::optional<double> p_inverse(double tau) const {
    if (!std::isfinite(tau)) return std::nullopt;
    if (tau == 0.0) return 0.0;
    // p has the sign of w on the positive side and the opposite sign on the negative side
    const bool go_right = (tau > 0) == positive();
    if (!go_right && domain_ == Domain::half_line) return std::nullopt;
    const double dir = go_right ? 1.0 : -1.0;
    auto node = bracket_node(dir, tau);
    if (!node) return std::nullopt;
    auto m = solve_local(node->first, tau - node->second);
    if (!m) return std::nullopt;
    return node->first + *m;
  }

  /// mu(xi, t) = p^{-1}(p(xi) + t) - xi, or nullopt when the characteristic leaves the domain.
  std::optional<double> mu(double xi, double t) const {
    check(xi);
    if (t == 0.0) return 0.0;
    return solve_local(xi, t);
  }

  /// xi + mu(xi, t); -infinity signals that the characteristic left the half-line.
  double flow(double xi, double t) const {
    auto m = mu(xi, t);
    return m ? xi + *m : -std::numeric_limits<double>::infinity();
  }

  CharacteristicMap negated() const { return CharacteristicMap(weight_.negated(), domain_, tol_p_, tol_inv_); }

 private:
  struct Side {
    std::vector<double> xs{0.0};
    std::vector<double> ps{0.0};
    bool exhausted = false;

    double p_at(double xi, const CharacteristicMap& map) const {
      // nearest cached node, then a short local integral
      const double axi = std::abs(xi);
      auto it = std::lower_bound(xs.begin(), xs.end(), axi,
                                 [](double node, double v) { return std::abs(node) < v; });
      std::size_t k = static_cast<std::size_t>(it - xs.begin());
      if (k == xs.size()) k = xs.size() - 1;
      if (k > 0 && axi - std::abs(xs[k - 1]) < std::abs(xs[k]) - axi) --k;
      return ps[k] + map.weight_.integrate_reciprocal(xs[k], xi, 1e-3 * map.tol_p_);
    }
  };
  struct Cache {
    std::shared_mutex mutex;
    Side right, left;
  };

  bool exact_kind() const {
    const auto& k = weight_.kind();
    return std::holds_alternative<ScalarCoefficient::Constant>(k) ||
           std::holds_alternative<ScalarCoefficient::AffineReciprocal>(k);
  }

  void check(double xi) const {
    if (!std::isfinite(xi)) throw DomainError("characteristic map evaluated at a non-finite point");
    if (domain_ == Domain::half_line && xi < -1e-12)
      throw DomainError("half-line characteristic map evaluated at xi < 0");
  }

  double next_step(double xi) const {
    const double scale = 1.0 + std::abs(xi);
    return std::clamp(std::abs(weight_(xi)), 0.125 * scale, 1e3 * scale);
  }

  // Appends one node to the side; returns false once the horizon is reached.
  bool extend(Side& side, double dir) const {
    if (side.exhausted) return false;
    const double x0 = side.xs.back();
    const double x1 = x0 + dir * next_step(x0);
    if (std::abs(x1) > horizon) {
      side.exhausted = true;
      return false;
    }
    side.ps.push_back(side.ps.back() + weight_.integrate_reciprocal(x0, x1, 1e-3 * tol_p_));
    side.xs.push_back(x1);
    return true;
  }

  const Side& grow_to(double xi) const {
    Side& side = xi >= 0 ? cache_->right : cache_->left;
    const double dir = xi >= 0 ? 1.0 : -1.0;
    {
      std::shared_lock lock(cache_->mutex);
      if (std::abs(side.xs.back()) >= std::abs(xi)) return side;
    }
    std::unique_lock lock(cache_->mutex);
    while (std::abs(side.xs.back()) < std::abs(xi))
      if (!extend(side, dir)) break;
    return side;
  }

  // Cached node (xi_k, p_k) closest below tau in time-of-flight along direction dir.
  std::optional<std::pair<double, double>> bracket_node(double dir, double tau) const {
    Side& side = dir > 0 ? cache_->right : cache_->left;
    auto passed = [&](const Side& s) { return std::abs(s.ps.back()) >= std::abs(tau); };
    {
      std::shared_lock lock(cache_->mutex);
      if (!passed(side)) lock.unlock();
      else return locate(side, tau);
    }
    std::unique_lock lock(cache_->mutex);
    while (!passed(side))
      if (!extend(side, dir)) return std::nullopt;
    return locate(side, tau);
  }

  static std::pair<double, double> locate(const Side& s, double tau) {
    auto it = std::lower_bound(s.ps.begin(), s.ps.end(), std::abs(tau),
                               [](double p, double v) { return std::abs(p) < v; });
    std::size_t k = static_cast<std::size_t>(it - s.ps.begin());
    if (k > 0) --k;
    return {s.xs[k], s.ps[k]};
  }

  // Solves int_xi^eta 1/w = t for eta and returns eta - xi.
  std::optional<double> solve_local(double xi, double t) const {
    if (t == 0.0) return 0.0;
    const double dir = ((t > 0) == positive()) ? 1.0 : -1.0;
    const double goal = std::abs(t);
    if (auto* c = std::get_if<ScalarCoefficient::Constant>(&weight_.kind())) {
      const double m = c->c * t;
      if (domain_ == Domain::half_line && xi + m < 0.0) return std::nullopt;
      return m;
    }
    // F(eta) = |int_xi^eta 1/w| is increasing in dir * (eta - xi).
    auto flight = [&](double a, double b) { return std::abs(weight_.integrate_reciprocal(a, b, 1e-14 * std::max(1.0, goal))); };

    double lo = xi, f_lo = 0.0;
    double hi, f_hi;
    if (dir < 0 && domain_ == Domain::half_line) {
      const double to_zero = std::abs(p(xi));
      if (goal > to_zero * (1.0 + 1e-14)) return std::nullopt;
      if (goal >= to_zero) return -xi;
      hi = 0.0;
      f_hi = to_zero;
    } else {
      double step = std::max(std::abs(weight_(xi)) * goal, 1e-12 * (1.0 + std::abs(xi)));
      hi = xi + dir * step;
      f_hi = flight(xi, hi);
      while (f_hi < goal) {
        lo = hi;
        f_lo = f_hi;
        step *= 2.0;
        hi = xi + dir * step;
        if (std::abs(hi) > horizon) return std::nullopt;
        f_hi += flight(lo, hi);
      }
    }
    // Safeguarded Newton on F(eta) - goal with F' = 1/|w|.
    double eta = f_hi - f_lo > 0 ? lo + (hi - lo) * (goal - f_lo) / (f_hi - f_lo) : hi;
    double f = f_lo + flight(lo, eta);
    for (int it = 0; it < 200; ++it) {
      const double r = f - goal;
      if (r == 0.0) break;
      if (r < 0) {
        lo = eta;
        f_lo = f;
      } else {
        hi = eta;
        f_hi = f;
      }
      double next = eta - dir * r * std::abs(weight_(eta));
      const double a = std::min(lo, hi), b = std::max(lo, hi);
      if (!(next > a && next < b)) next = 0.5 * (lo + hi);
      const double delta = next - eta;
      // integrate from the nearer bracket end to limit error accumulation
      f = std::abs(next - lo) <= std::abs(next - hi) ? f_lo + flight(lo, next) : f_hi - flight(next, hi);
      eta = next;
      if (std::abs(delta) <= 1e-15 * (1.0 + std::abs(eta)) ||
          std::abs(hi - lo) <= 4 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(eta)))
        break;
    }
    if (domain_ == Domain::half_line && eta < 0.0) eta = 0.0;
    return eta - xi;
  }

  ScalarCoefficient weight_;
  Domain domain_;
  double tol_p_, tol_inv_;
  std::shared_ptr<Cache> cache_;
};

/// Outcome of one numerically checked property.
struct PropertyResult {
  std::string name;
  bool passed = true;
  double max_residual = 0.0;
  double tolerance = 0.0;
  std::string note;
};

struct PropertyReport {
  std::string suite;
  std::vector<PropertyResult> properties;
  bool passed() const {
    return std::all_of(properties.begin(), properties.end(), [](const auto& p) { return p.passed; });
  }
};

namespace detail {
inline void absorb(PropertyResult& r, double residual) {
  if (!std::isfinite(residual)) residual = std::numeric_limits<double>::infinity();
  r.max_residual = std::max(r.max_residual, residual);
}
inline void close(PropertyResult& r) { r.passed = r.max_residual <= r.tolerance; }
}  // namespace detail

/// Numerical check of the characteristic-map identities over seeded random samples.
inline PropertyReport verify_lemma1(const CharacteristicMap& map, int sample_count, unsigned seed) {
  const auto& kind = map.weight().kind();
  const bool exact = std::holds_alternative<ScalarCoefficient::Constant>(kind) ||
                     std::holds_alternative<ScalarCoefficient::AffineReciprocal>(kind);
  const double tol = exact ? 1e-6 : 1e-5;
  const bool toward_zero = map.domain() == Domain::half_line && !map.positive();
  const double w_sign = map.positive() ? 1.0 : -1.0;

  PropertyReport rep{"lemma1", {}};
  auto make = [&](const char* name, const char* note) { return PropertyResult{name, true, 0.0, tol, note}; };
  PropertyResult nonzero = make("iii", "mu(xi,t) != 0 with the sign of w for t > 0");
  PropertyResult origin = make("iv", "mu(xi,0) = 0 and mu(0,t) = p^-1(t)");
  PropertyResult flight = make("v", "t = p(xi + mu) - p(xi)");
  PropertyResult cocycle = make("vi", "cocycle identity");
  PropertyResult limit = make("viii", "mu(xi,t)/t -> w(xi)");
  PropertyResult partials = make("ix", "partial derivatives of mu");
  PropertyResult symmetry = make("x", "mu_{-w}(xi,t) = mu_w(xi,-t)");
  const CharacteristicMap reflected = map.negated();

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double inf = std::numeric_limits<double>::infinity();
  auto val = [&](std::optional<double> v) { return v ? *v : std::numeric_limits<double>::quiet_NaN(); };

  for (int k = 0; k < sample_count; ++k) {
    double xi = map.domain() == Domain::full_line ? -10.0 + 20.0 * unit(rng) : 10.0 * unit(rng);
    if (toward_zero) xi = 0.5 + 9.5 * unit(rng);
    const double budget = toward_zero ? 0.45 * std::abs(map.p(xi)) : 3.0;
    const double t = budget * (0.01 + 0.99 * unit(rng));
    const double s = budget * (0.01 + 0.99 * unit(rng));

    const auto m_t = map.mu(xi, t);
    if (!m_t || *m_t == 0.0 || (*m_t > 0) != (w_sign > 0)) detail::absorb(nonzero, inf);

    detail::absorb(origin, std::abs(val(map.mu(xi, 0.0))));
    {
      const double tt = w_sign * t;  // moves away from the origin
      const double a = val(map.mu(0.0, tt)), b = val(map.p_inverse(tt));
      detail::absorb(origin, std::abs(a - b) / (1.0 + std::abs(b)));
    }

    if (m_t) {
      const double back = map.p(xi + *m_t) - map.p(xi);
      detail::absorb(flight, std::abs(t - back) / (1.0 + std::abs(t)));
    } else {
      detail::absorb(flight, inf);
    }

    {
      const double lhs_a = val(m_t);
      const double lhs_b = m_t ? val(map.mu(xi + *m_t, s)) : std::numeric_limits<double>::quiet_NaN();
      const double rhs = val(map.mu(xi, s + t));
      detail::absorb(cocycle, std::abs(lhs_a + lhs_b - rhs) / (1.0 + std::abs(rhs)));
    }

    {
      // quadratic extrapolation of mu/t to t = 0 through three small times
      const double ts[3] = {1e-2, 1e-3, 1e-4};
      double q[3];
      for (int i = 0; i < 3; ++i) q[i] = val(map.mu(xi, ts[i])) / ts[i];
      double at_zero = 0.0;
      for (int i = 0; i < 3; ++i) {
        double l = 1.0;
        for (int j = 0; j < 3; ++j)
          if (j != i) l *= (0.0 - ts[j]) / (ts[i] - ts[j]);
        at_zero += l * q[i];
      }
      const double w = map.weight()(xi);
      detail::absorb(limit, std::abs(at_zero - w) / (1.0 + std::abs(w)));
    }

    if (m_t) {
      const double h = 1e-5 * (1.0 + std::abs(xi));
      const double w_xi = map.weight()(xi), w_flow = map.weight()(xi + *m_t);
      double xl = xi - h, xr = xi + h, span = 2.0 * h;
      if (map.domain() == Domain::half_line && xl < 0.0) {
        xl = xi;
        span = h;
      }
      const double d_xi = (val(map.mu(xr, t)) - val(map.mu(xl, t))) / span;
      const double exact_xi = w_flow / w_xi - 1.0;
      detail::absorb(partials, std::abs(d_xi - exact_xi) / (1.0 + std::abs(exact_xi)));
      const double d_t = (val(map.mu(xi, t + h)) - val(map.mu(xi, t - h))) / (2.0 * h);
      detail::absorb(partials, std::abs(d_t - w_flow) / (1.0 + std::abs(w_flow)));
    } else {
      detail::absorb(partials, inf);
    }

    {
      // both sides move toward the origin for one of the two maps, so keep t inside p's range
      const double reach = std::abs(map.p(xi));
      const double tx = map.domain() == Domain::half_line ? 0.9 * reach * unit(rng) : t;
      const double a = val(reflected.mu(xi, tx)), b = val(map.mu(xi, -tx));
      detail::absorb(symmetry, std::abs(a - b) / (1.0 + std::abs(b)));
    }
  }
  for (auto* r : {&nonzero, &origin, &flight, &cocycle, &limit, &partials, &symmetry}) {
    detail::close(*r);
    rep.properties.push_back(*r);
  }
  return rep;
}

}  // namespace phs
