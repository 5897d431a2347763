#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "phs/characteristics.hpp"
#include "phs/quadrature.hpp"
#include "phs/statespace.hpp"

namespace phs {

/// Delta = diag(Lambda, Theta) on [0, inf) with the boundary coupling
/// K Theta(0) g_-(0) + Q Lambda(0) g_+(0) = u. Positive components come first.
class DiagonalSystem {
 public:
  DiagonalSystem(std::vector<ScalarCoefficient> lambdas, std::vector<ScalarCoefficient> thetas, CMatrix K,
                 CMatrix Q, bool bounded = true)
      : lambdas_(std::move(lambdas)), thetas_(std::move(thetas)), K_(std::move(K)), Q_(std::move(Q)),
        bounded_(bounded) {
    const int np = n_plus(), nm = n_minus();
    if (np + nm == 0) throw DimensionError("diagonal system needs at least one component");
    for (const auto& l : lambdas_) {
      if (l.sign() != Sign::positive) throw SignViolation("lambda entries must be strictly positive");
      lambda_maps_.emplace_back(l, Domain::half_line);
    }
    for (const auto& t : thetas_) {
      if (t.sign() != Sign::negative) throw SignViolation("theta entries must be strictly negative");
      theta_maps_.emplace_back(t, Domain::half_line);
    }
    // with no incoming components there is no boundary condition at all
    if (nm == 0) {
      K_.resize(0, 0);
      Q_.resize(0, np);
    }
    if (K_.rows() != nm || K_.cols() != nm) throw DimensionError("K must be n_minus x n_minus");
    if (Q_.rows() != nm || Q_.cols() != np) throw DimensionError("Q must be n_minus x n_plus");
    if (nm > 0) {
      CMatrix kq(nm, nm + np);
      kq << K_, Q_;
      if (linalg::rank(kq) != nm) throw DataError("boundary matrix [K Q] must have rank n_minus");
      const auto sv = linalg::singular_values(K_);
      sigma_max_K_ = sv(0);
      sigma_min_K_ = sv(sv.size() - 1);
      invertible_ = sigma_min_K_ > 1e-10 * sigma_max_K_;
      if (invertible_) lu_ = Eigen::FullPivLU<CMatrix>(K_);
    }
  }

  int n_plus() const { return static_cast<int>(lambdas_.size()); }
  int n_minus() const { return static_cast<int>(thetas_.size()); }
  int n() const { return n_plus() + n_minus(); }
  bool bounded() const { return bounded_; }

  const ScalarCoefficient& lambda(int k) const { return lambdas_.at(k); }
  const ScalarCoefficient& theta(int j) const { return thetas_.at(j); }
  const CharacteristicMap& lambda_map(int k) const { return lambda_maps_.at(k); }
  const CharacteristicMap& theta_map(int j) const { return theta_maps_.at(j); }
  const CMatrix& K() const { return K_; }
  const CMatrix& Q() const { return Q_; }

  /// Entry c of Delta (positive block first).
  double delta(int c, double xi) const { return c < n_plus() ? lambdas_[c](xi) : thetas_[c - n_plus()](xi); }

  double sigma_min_K() const { return sigma_min_K_; }
  double sigma_max_K() const { return sigma_max_K_; }
  bool K_invertible() const { return n_minus() == 0 || invertible_; }

  /// Solves K y = rhs with one step of refinement.
  CVector solve_K(const CVector& rhs) const {
    CVector y = lu_.solve(rhs);
    y += lu_.solve(rhs - K_ * y);
    return y;
  }

 private:
  std::vector<ScalarCoefficient> lambdas_, thetas_;
  std::vector<CharacteristicMap> lambda_maps_, theta_maps_;
  CMatrix K_, Q_;
  bool bounded_;
  double sigma_min_K_ = 0.0, sigma_max_K_ = 0.0;
  bool invertible_ = false;
  Eigen::FullPivLU<CMatrix> lu_;
};

struct DiagonalVerdict {
  bool generator = false;
  double sigma_min_K = 0.0;
  double sigma_max_K = 0.0;
  std::string branch;  // "no incoming components", "no outgoing components" or "general"
};

inline DiagonalVerdict check_generation_diagonal(const DiagonalSystem& sys) {
  DiagonalVerdict v;
  v.sigma_min_K = sys.sigma_min_K();
  v.sigma_max_K = sys.sigma_max_K();
  if (sys.n_minus() == 0) {
    v.branch = "no incoming components";
    v.generator = true;
    return v;
  }
  v.branch = sys.n_plus() == 0 ? "no outgoing components" : "general";
  v.generator = sys.K_invertible();
  return v;
}

/// Theta(0) g_-(0) from the outgoing weighted trace Lambda(0) g_+(0) and the input u.
inline CVector boundary_trace_solve(const DiagonalSystem& sys, const CVector& lambda_trace, const CVector& u) {
  if (lambda_trace.size() != sys.n_plus() || u.size() != sys.n_minus())
    throw DimensionError("boundary trace sizes must be n_plus and n_minus");
  if (sys.n_minus() == 0) return CVector(0);
  if (!sys.K_invertible())
    throw ClassificationError("K is singular; check_generation_diagonal reports not_generator, no inflow trace exists");
  const CVector rhs = sys.n_plus() > 0 ? CVector(u - sys.Q() * lambda_trace) : u;
  const CVector y = sys.solve_K(rhs);
  const double scale = sys.K().norm() * y.norm() + rhs.norm();
  if ((sys.K() * y - rhs).norm() > 1e-12 * std::max(scale, 1e-300) && scale > 0)
    throw ClassificationError("inflow trace solve did not reach relative residual 1e-12");
  return y;
}

/// Lambda(0) g_+(0) read off the first node.
inline CVector outgoing_trace(const DiagonalSystem& sys, const State& g) {
  CVector v(sys.n_plus());
  for (int k = 0; k < sys.n_plus(); ++k) v(k) = sys.lambda(k)(0.0) * g.values()(k, 0);
  return v;
}

/// Theta(0) g_-(0) read off the first node.
inline CVector inflow_trace(const DiagonalSystem& sys, const State& g) {
  CVector v(sys.n_minus());
  for (int j = 0; j < sys.n_minus(); ++j) v(j) = sys.theta(j)(0.0) * g.values()(sys.n_plus() + j, 0);
  return v;
}

/// |K Theta(0) g_-(0) + Q Lambda(0) g_+(0) - u|.
inline double boundary_residual(const DiagonalSystem& sys, const State& g, const CVector& u) {
  if (sys.n_minus() == 0) return 0.0;
  CVector r = sys.K() * inflow_trace(sys, g) - u;
  if (sys.n_plus() > 0) r += sys.Q() * outgoing_trace(sys, g);
  return r.norm();
}

/// |Delta| sampled on the grid, one row per component (for diagonal_norm_squared).
inline RMatrix abs_delta_weights(const DiagonalSystem& sys, const Grid& g) {
  RMatrix w(sys.n(), g.size());
  for (int c = 0; c < sys.n(); ++c)
    for (std::size_t i = 0; i < g.size(); ++i) w(c, i) = std::abs(sys.delta(c, g[i]));
  return w;
}

/// Piecewise linear input through (time, value) samples, held constant outside the sampled range.
class SampledInput {
 public:
  SampledInput() = default;
  SampledInput(std::vector<double> times, CMatrix values) : times_(std::move(times)), values_(std::move(values)) {
    if (times_.empty() || values_.cols() != static_cast<Eigen::Index>(times_.size()))
      throw DimensionError("input samples need one column per time");
    for (std::size_t i = 1; i < times_.size(); ++i)
      if (!(times_[i] > times_[i - 1])) throw DataError("input sample times must be strictly increasing");
  }

  static SampledInput zero(int m) { return SampledInput({0.0}, CMatrix::Zero(m, 1)); }

  int dim() const { return static_cast<int>(values_.rows()); }
  const std::vector<double>& times() const { return times_; }
  const CMatrix& values() const { return values_; }

  CVector operator()(double t) const {
    if (t <= times_.front()) return values_.col(0);
    if (t >= times_.back()) return values_.col(values_.cols() - 1);
    const auto it = std::upper_bound(times_.begin(), times_.end(), t);
    const std::size_t i = static_cast<std::size_t>(it - times_.begin()) - 1;
    const double s = (t - times_[i]) / (times_[i + 1] - times_[i]);
    return (1.0 - s) * values_.col(i) + s * values_.col(i + 1);
  }

 private:
  std::vector<double> times_;
  CMatrix values_;
};

using InputFn = std::function<CVector(double)>;

/// Exact transport of the diagonal system over a fixed step on a fixed grid.
/// Departure points and inflow entry times depend only on (grid, dt), so they
/// are computed once and reused for every step.
class DiagonalStepper {
 public:
  DiagonalStepper(const DiagonalSystem& sys, GridPtr grid, double dt) : sys_(sys), grid_(std::move(grid)), dt_(dt) {
    if (!(dt > 0.0)) throw DomainError("time step must be positive");
    if (grid_->left() != 0.0) throw DomainError("diagonal system lives on a grid starting at 0");
    const auto verdict = check_generation_diagonal(sys_);
    if (!verdict.generator)
      throw ClassificationError("K is singular (sigma_min = " + std::to_string(verdict.sigma_min_K) +
                                "); the diagonal operator is not a generator");
    const Grid& g = *grid_;
    const std::size_t N = g.size();
    const int np = sys_.n_plus();
    carried_.assign(sys_.n(), std::vector<Carried>(N));
    inflow_.assign(sys_.n_minus(), {});
    for (int c = 0; c < sys_.n(); ++c) {
      const bool positive = c < np;
      const CharacteristicMap& map = positive ? sys_.lambda_map(c) : sys_.theta_map(c - np);
      parallel_for(N, [&](std::size_t i) {
        const double xi = g[i];
        const auto m = map.mu(xi, dt_);
        if (m) {
          const double eta = xi + *m;
          carried_[c][i] = {eta, map.weight()(eta) / map.weight()(xi), true};
        } else {
          carried_[c][i].carried = false;
        }
      });
      if (positive) continue;
      for (std::size_t i = 0; i < N; ++i) {
        if (carried_[c][i].carried) continue;
        Inflow in;
        in.node = i;
        in.offset = std::max(0.0, dt_ - std::abs(map.p(g[i])));
        in.factor = 1.0 / map.weight()(g[i]);
        for (int k = 0; k < np; ++k) {
          const double eta = in.offset > 0.0 ? sys_.lambda_map(k).flow(0.0, in.offset) : 0.0;
          in.trace_points.push_back(eta);
          in.trace_weights.push_back(std::isfinite(eta) ? sys_.lambda(k)(eta) : 0.0);
        }
        inflow_[c - np].push_back(std::move(in));
      }
    }
  }

  double dt() const { return dt_; }
  const GridPtr& grid() const { return grid_; }
  const DiagonalSystem& system() const { return sys_; }

  /// g(t0) -> g(t0 + dt) with input u (absolute time) feeding the inflow traces.
  State step(const State& g, double t0, const InputFn& u) const {
    if (g.grid() != grid_ && g.grid()->nodes() != grid_->nodes())
      throw DimensionError("state grid differs from the stepper grid");
    if (g.n() != sys_.n()) throw DimensionError("state dimension differs from the system");
    const Grid& grid = *grid_;
    const std::size_t N = grid.size();
    const int np = sys_.n_plus();
    CMatrix out = CMatrix::Zero(sys_.n(), N);
    parallel_for(N, [&](std::size_t i) {
      for (int c = 0; c < sys_.n(); ++c) {
        const Carried& k = carried_[c][i];
        if (k.carried) out(c, i) = k.ratio * value_at(g, c, k.eta);
      }
    });
    for (int j = 0; j < sys_.n_minus(); ++j) {
      for (const Inflow& in : inflow_[j]) {
        CVector trace(np);
        for (int k = 0; k < np; ++k) trace(k) = in.trace_weights[k] * value_at(g, k, in.trace_points[k]);
        const CVector uin = u ? u(t0 + in.offset) : CVector(CVector::Zero(sys_.n_minus()));
        if (uin.size() != sys_.n_minus()) throw DimensionError("input must have n_minus entries");
        const CVector v = boundary_trace_solve(sys_, trace, uin);
        out(np + j, in.node) = v(j) * in.factor;
      }
    }
    return g.with_values(std::move(out));
  }

 private:
  struct Carried {
    double eta = 0.0;
    double ratio = 0.0;
    bool carried = false;
  };
  struct Inflow {
    std::size_t node = 0;
    double offset = 0.0;  // entry time measured from the start of the step
    double factor = 0.0;  // 1 / theta_j(xi)
    std::vector<double> trace_points, trace_weights;
  };

  static Complex value_at(const State& g, int c, double eta) {
    if (!std::isfinite(eta)) return 0.0;
    if (!g.covers(eta)) {
      if (g.tail() == Tail::zero) return 0.0;
      throw ExtrapolationError("transport reaches beyond the grid of a state with a nonzero tail");
    }
    return g.at(c, eta);
  }

  DiagonalSystem sys_;
  GridPtr grid_;
  double dt_;
  std::vector<std::vector<Carried>> carried_;
  std::vector<std::vector<Inflow>> inflow_;
};

/// One exact step of length dt starting at time t0.
inline State evolve_diagonal(const DiagonalSystem& sys, const State& g, double dt, const InputFn& u = {},
                             double t0 = 0.0) {
  return DiagonalStepper(sys, g.grid(), dt).step(g, t0, u);
}

struct TransferReport {
  Complex s;
  CVector u0;
  RVector norm_squared;  // ||x_-^(0)_j||^2 in the |theta_j| weight
  RVector expected;      // |u0_j|^2 / (2 Re s)
  double max_relative_error = 0.0;
  double input_residual = 0.0;  // |B x0 - u0|
  CVector G;                     // C x0 = Lambda(0) x_+(0) = 0
  bool passed = false;
};

/// Builds the exponential solution x0 of (s - A) x0 = 0 with B x0 = u0 for the
/// open system (no boundary feedback) and checks that it has the predicted norm
/// and produces zero output.
inline TransferReport verify_transfer_zero(const DiagonalSystem& sys, Complex s, const CVector& u0,
                                           double tol = 1e-12) {
  if (!(s.real() > 0.0)) throw DomainError("transfer function is evaluated at Re s > 0");
  if (!sys.bounded()) throw DataError("transfer check needs a bounded Delta");
  if (u0.size() != sys.n_minus()) throw DimensionError("u0 must have n_minus entries");
  TransferReport r;
  r.s = s;
  r.u0 = u0;
  r.norm_squared = RVector::Zero(sys.n_minus());
  r.expected = RVector::Zero(sys.n_minus());
  CVector bx(sys.n_minus());
  for (int j = 0; j < sys.n_minus(); ++j) {
    const CharacteristicMap& map = sys.theta_map(j);
    const auto& th = sys.theta(j);
    // x_j(xi) = u0_j / theta_j(xi) * exp(s p(xi)); p < 0 so the profile decays
    const double a = std::norm(u0(j));
    r.expected(j) = a / (2.0 * s.real());
    bx(j) = th(0.0) * (u0(j) / th(0.0)) * std::exp(s * map.p(0.0));
    if (a == 0.0) continue;
    const auto reach = map.p_inverse(-40.0 / s.real());
    if (!reach) throw DataError("1/theta is integrable; the exponential profile does not decay");
    auto integrand = [&](double xi) {
      const double w = std::abs(th(xi));
      const Complex x = u0(j) / th(xi) * std::exp(s * map.p(xi));
      return w * std::norm(x);
    };
    // split by equal decay so each piece carries a comparable share
    double total = 0.0, left = 0.0;
    for (int k = 1; k <= 16; ++k) {
      const double right = k == 16 ? *reach : *map.p_inverse(-40.0 / s.real() * k / 16.0);
      total += quad::integrate(integrand, left, right, tol * a).value;
      left = right;
    }
    r.norm_squared(j) = total;
    r.max_relative_error = std::max(r.max_relative_error, std::abs(total - r.expected(j)) / r.expected(j));
  }
  r.input_residual = (bx - u0).norm();
  r.G = CVector::Zero(sys.n_plus());  // x_+ = 0 identically
  r.passed = r.max_relative_error <= 1e-4 && r.input_residual == 0.0;
  return r;
}

}  // namespace phs
