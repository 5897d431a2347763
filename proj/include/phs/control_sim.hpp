#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "phs/diagonal_system.hpp"
#include "phs/hamiltonian.hpp"

namespace phs {

/// Port-Hamiltonian system with boundary input u = W_B1 H(0) x(0), the remaining
/// boundary condition W_B2 H(0) x(0) = 0 and output y = W_C H(0) x(0).
struct BoundaryControlSystem {
  PortHamiltonianSystem phs;
  CMatrix W_B1;
  CMatrix W_B2;
  CMatrix W_C;

  int p() const { return static_cast<int>(W_B1.rows()); }
  int q() const { return static_cast<int>(W_C.rows()); }

  /// Builds W_B from the input and remaining rows.
  static BoundaryControlSystem make(PortHamiltonianSystem sys, CMatrix W_B1, CMatrix W_B2, CMatrix W_C) {
    const int n = sys.n();
    if (W_B2.size() == 0) W_B2.resize(0, n);
    if (W_B1.size() == 0) W_B1.resize(0, n);
    if (W_B1.cols() != n || W_B2.cols() != n || W_C.cols() != n)
      throw DimensionError("W_B1, W_B2 and W_C must have n columns");
    sys.W_B.resize(W_B1.rows() + W_B2.rows(), n);
    sys.W_B << W_B1, W_B2;
    return {std::move(sys), std::move(W_B1), std::move(W_B2), std::move(W_C)};
  }
};

inline void check_dimensions(const BoundaryControlSystem& bcs, const Inertia& in) {
  const int p = bcs.p(), q = bcs.q();
  if (in.n_minus > 0 && (p < 1 || p > in.n_minus)) throw DimensionError("need 1 <= p <= n_minus inputs");
  if (in.n_minus == 0 && p != 0) throw DimensionError("no inputs are possible when n_minus = 0");
  if (in.n_plus > 0 && (q < 1 || q > in.n_plus)) throw DimensionError("need 1 <= q <= n_plus outputs");
  if (in.n_plus == 0 && q != 0) throw DimensionError("no outputs are possible when n_plus = 0");
  if (bcs.W_B2.rows() != in.n_minus - p) throw DimensionError("W_B2 must have n_minus - p rows");
  if (bcs.phs.W_B.rows() != in.n_minus) throw DimensionError("stacked W_B must have n_minus rows");
  for (int r = 0; r < p; ++r)
    if (bcs.phs.W_B.row(r) != bcs.W_B1.row(r)) throw DataError("W_B does not stack W_B1 over W_B2");
}

struct CompatibilityReport {
  bool rank_ok = false;
  double input_mismatch = 0.0;   // |u0 - W_B1 H(0) x0(0)|
  double remaining_mismatch = 0.0;  // |W_B2 H(0) x0(0)|
  double scale = 1.0;
  std::string status;  // "classical" or "mild"
};

inline CompatibilityReport validate_bcs(const BoundaryControlSystem& bcs, const State& x0, const CVector& u0) {
  const Inertia in = inertia(bcs.phs.P1, bcs.phs.H, probe_points());
  check_dimensions(bcs, in);
  CompatibilityReport r;
  r.rank_ok = in.n_minus == 0 || linalg::rank(bcs.phs.W_B) == in.n_minus;
  if (!r.rank_ok) throw DataError("stacked W_B must have rank n_minus");
  if (u0.size() != bcs.p()) throw DimensionError("u0 must have p entries");
  if (x0.n() != bcs.phs.n()) throw DimensionError("x0 must have n components");
  const CVector hx = bcs.phs.H(0.0) * x0.at(0.0);
  r.scale = std::max({1.0, linalg::norm2(bcs.phs.W_B) * hx.norm(), u0.norm()});
  r.input_mismatch = bcs.p() ? (u0 - bcs.W_B1 * hx).norm() : 0.0;
  r.remaining_mismatch = bcs.W_B2.rows() ? (bcs.W_B2 * hx).norm() : 0.0;
  const bool ok = r.input_mismatch <= 1e-8 * r.scale && r.remaining_mismatch <= 1e-8 * r.scale;
  r.status = ok ? "classical" : "mild";
  return r;
}

struct AuditReport {
  std::vector<double> residual;  // centered d/dt |g|^2 minus (|in|^2 - |out|^2), 0 at the end points
  double max_residual = 0.0;
  double bound = 0.0;
  bool multipliers = false;
  bool passed = false;
};

struct SimulationResult {
  std::vector<double> times;
  std::vector<double> snapshot_times;
  std::vector<State> snapshots;  // x coordinates
  CMatrix y;                     // q x times
  CMatrix u;                     // p x times
  std::vector<double> energy_x;  // |x|_H^2
  std::vector<double> energy_g;  // |g|_{|Delta|}^2
  std::vector<double> inflow_power, outflow_power;  // |Theta(0) g_-(0)|^2, |Lambda(0) g_+(0)|^2
  AuditReport audit;
  std::string status = "classical";
  double dt = 0.0;
  double h = 0.0;
};

struct SimulationOptions {
  GridPtr grid;
  double T = 1.0;
  double dt = 0.0;  // 0 picks min(0.01, h / sup|Delta|)
  int snapshot_every = 0;  // 0 stores only the initial and final states
  Interp interp = Interp::cubic_spline;
  double c_audit = 100.0;
};

/// Energy audit of a finished run; `multiplier_bound` is K with |M g| <= sqrt(K) |g| in the |Delta| norm.
inline AuditReport energy_audit(const SimulationResult& r, double multiplier_bound, double c_audit = 100.0) {
  AuditReport a;
  const std::size_t m = r.times.size();
  a.residual.assign(m, 0.0);
  double emax = 0.0;
  for (double e : r.energy_g) emax = std::max(emax, e);
  // the power is averaged over the same window as the difference quotient (Simpson),
  // so a smooth exact solution leaves an O(dt^4) residual instead of O(dt^2)
  for (std::size_t k = 1; k + 1 < m; ++k) {
    const double h0 = r.times[k] - r.times[k - 1], h1 = r.times[k + 1] - r.times[k], s = h0 + h1;
    const double rate = (r.energy_g[k + 1] - r.energy_g[k - 1]) / s;
    auto net = [&](std::size_t j) { return r.inflow_power[j] - r.outflow_power[j]; };
    const double mean = ((2.0 - h1 / h0) * net(k - 1) + s * s / (h0 * h1) * net(k) + (2.0 - h0 / h1) * net(k + 1)) / 6.0;
    a.residual[k] = rate - mean;
    a.max_residual = std::max(a.max_residual, std::abs(a.residual[k]));
  }
  a.multipliers = multiplier_bound > 0.0;
  a.bound = c_audit * (r.dt * r.dt + r.h * r.h) * std::max(1.0, emax);
  if (a.multipliers) a.bound += 2.0 * std::max(multiplier_bound, std::sqrt(multiplier_bound)) * emax;
  a.passed = a.max_residual <= a.bound;
  return a;
}

/// Strang-split simulation in diagonal coordinates g = S x: half a step of the
/// bounded multiplier M = B + S P0 H S^{-1}, exact transport with inflow from u,
/// and another half step of M.
/// Entries of Delta as coefficients, positive block first: constant when flat
/// to rounding, otherwise tabulated from the node samples.
inline std::pair<std::vector<ScalarCoefficient>, std::vector<ScalarCoefficient>> delta_coefficients(
    const Diagonalization& d) {
  const Grid& g = *d.grid;
  std::vector<ScalarCoefficient> lambdas, thetas;
  for (int c = 0; c < d.n(); ++c) {
    std::vector<double> vals(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) vals[i] = d.delta[i](c);
    const auto [lo, hi] = std::minmax_element(vals.begin(), vals.end());
    const bool flat = *hi - *lo <= 1e-14 * std::abs(*hi);
    auto coef = flat ? ScalarCoefficient::constant(vals[0]) : ScalarCoefficient::tabulated(g.nodes(), vals);
    (c < d.n_plus ? lambdas : thetas).push_back(std::move(coef));
  }
  return {std::move(lambdas), std::move(thetas)};
}

class Simulator {
 public:
  Simulator(BoundaryControlSystem bcs, SimulationOptions opt) : bcs_(std::move(bcs)), opt_(std::move(opt)) {
    if (!opt_.grid) throw DomainError("simulation needs a grid");
    if (opt_.grid->left() != 0.0) throw DomainError("simulation grid must start at 0");
    if (!(opt_.T > 0.0)) throw DomainError("simulation horizon T must be positive");
    GenerationOptions gopt;
    gopt.probe_radius = std::max(opt_.grid->right(), 1.0);
    report_ = check_generation(bcs_.phs, gopt);
    check_dimensions(bcs_, {report_.n_plus, report_.n_minus});
    if (!report_.generator)
      throw ClassificationError("the boundary conditions do not give a generator (sigma_min(U2) = " +
                                std::to_string(report_.sigma_min_U2) + ")");
    diag_ = diagonalize_pointwise(bcs_.phs.P1, bcs_.phs.H, opt_.grid, bcs_.phs.scale);
    const Grid& g = *opt_.grid;
    const std::size_t N = g.size();
    const int np = diag_.n_plus, nm = diag_.n_minus;

    auto [lambdas, thetas] = delta_coefficients(diag_);
    double sup_delta = 0.0;
    for (std::size_t i = 0; i < N; ++i) sup_delta = std::max(sup_delta, diag_.delta[i].cwiseAbs().maxCoeff());

    // W~ = W_B P1^{-1} S^{-1}(0) acts on (Delta g)(0); P inverts its Theta block
    const CMatrix Wt = bcs_.phs.W_B * bcs_.phs.P1.inverse() * diag_.S_inv.front();
    CMatrix K = CMatrix::Identity(nm, nm), Q = CMatrix::Zero(nm, np);
    P_ = CMatrix::Identity(nm, nm);
    if (nm > 0) {
      Eigen::ColPivHouseholderQR<CMatrix> qr(Wt.rightCols(nm));
      P_ = qr.solve(CMatrix::Identity(nm, nm));
      K = P_ * Wt.rightCols(nm);
      Q = P_ * Wt.leftCols(np);
    }
    dsys_ = std::make_unique<DiagonalSystem>(lambdas, thetas, K, Q, true);

    h_ = g.max_spacing();
    dt_ = opt_.dt > 0.0 ? opt_.dt : std::min(0.01, h_ / sup_delta);
    if (dt_ > opt_.T) throw DomainError("time step exceeds the horizon T");
    steps_ = static_cast<int>(std::ceil(opt_.T / dt_ - 1e-9));
    dt_ = opt_.T / steps_;
    stepper_ = std::make_unique<DiagonalStepper>(*dsys_, opt_.grid, dt_);

    // bounded multipliers and their half-step exponentials
    half_.resize(N);
    H_nodes_.resize(N);
    energy_weight_.resize(N);
    for (std::size_t i = 0; i < N; ++i) {
      H_nodes_[i] = bcs_.phs.H(g[i]);
      energy_weight_[i] = diag_.S_inv[i].adjoint() * H_nodes_[i] * diag_.S_inv[i];
      const CMatrix M = diag_.B(i) + diag_.S[i] * bcs_.phs.P0 * H_nodes_[i] * diag_.S_inv[i];
      // rounding leaves ~1e-16 entries where the multipliers vanish identically
      if (M.norm() > 1e-12 * std::max(1.0, sup_delta)) {
        has_multiplier_ = true;
        const CMatrix ad = diag_.abs_delta(i);
        multiplier_bound_ = std::max(multiplier_bound_, linalg::pencil_bounds(M.adjoint() * ad * M, ad).max);
      }
      half_[i] = linalg::expm(0.5 * dt_ * M);
    }
    weights_ = abs_delta_weights(*dsys_, g);
    out_map_ = bcs_.W_C * H_nodes_.front() * diag_.S_inv.front();
  }

  const GenerationReport& generation() const { return report_; }
  const Diagonalization& diagonalization() const { return diag_; }
  const DiagonalSystem& diagonal_system() const { return *dsys_; }
  double dt() const { return dt_; }
  int steps() const { return steps_; }
  double multiplier_bound() const { return multiplier_bound_; }
  bool has_multiplier() const { return has_multiplier_; }
  const CMatrix& input_transform() const { return P_; }

  /// Runs from x0 (x coordinates) with input samples u (p-dimensional).
  SimulationResult run(const State& x0_in, const SampledInput& u) const {
    const Grid& g = *opt_.grid;
    const int p = bcs_.p(), nm = diag_.n_minus;
    if (u.dim() != p) throw DimensionError("input must have p components");
    const State x0 = x0_in.grid()->nodes() == g.nodes()
                         ? x0_in.with_interp(opt_.interp)
                         : resample(x0_in.with_interp(opt_.interp), opt_.grid).state;
    if (x0.n() != diag_.n()) throw DimensionError("initial state must have n components");

    SimulationResult r;
    r.dt = dt_;
    r.h = h_;
    r.status = validate_bcs(bcs_, x0, p ? u(0.0) : CVector(0)).status;
    const InputFn uin = [&](double t) {
      CVector full = CVector::Zero(nm);
      if (p) full.head(p) = u(t);
      return CVector(P_ * full);
    };

    State gs = to_diagonal(x0, diag_);
    auto record = [&](double t, const State& gcur) {
      r.times.push_back(t);
      r.energy_x.push_back(energy_x(gcur));
      r.energy_g.push_back(diagonal_norm_squared(gcur, weights_));
      r.inflow_power.push_back(inflow_trace(*dsys_, gcur).squaredNorm());
      r.outflow_power.push_back(outgoing_trace(*dsys_, gcur).squaredNorm());
      const auto k = r.times.size() - 1;
      r.y.conservativeResize(bcs_.q(), k + 1);
      r.y.col(k) = out_map_ * gcur.values().col(0);
      r.u.conservativeResize(p, k + 1);
      if (p) r.u.col(k) = u(t);
      const bool snap = k == 0 || k == static_cast<std::size_t>(steps_) ||
                        (opt_.snapshot_every > 0 && k % opt_.snapshot_every == 0);
      if (snap) {
        r.snapshot_times.push_back(t);
        r.snapshots.push_back(from_diagonal(gcur, diag_));
      }
    };
    record(0.0, gs);
    if (!has_multiplier_) {
      // pure transport: every time level comes straight from the initial data, so
      // the result does not depend on dt and interpolation errors do not pile up
      const State g0 = gs;
      for (int k = 0; k < steps_; ++k) {
        const double t = (k + 1) * dt_;
        record(t, DiagonalStepper(*dsys_, opt_.grid, t).step(g0, 0.0, uin));
      }
    } else {
      for (int k = 0; k < steps_; ++k) {
        const double t0 = k * dt_;
        gs = apply_half(gs);
        gs = stepper_->step(gs, t0, uin);
        gs = apply_half(gs);
        record((k + 1) * dt_, gs);
      }
    }
    r.audit = energy_audit(r, has_multiplier_ ? multiplier_bound_ : 0.0, opt_.c_audit);
    return r;
  }

 private:
  // |x|_H^2 evaluated in diagonal coordinates as g* S^{-*} H S^{-1} g
  double energy_x(const State& g) const {
    const auto& q = g.grid()->weights();
    double s = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
      const auto v = g.values().col(i);
      if (v.squaredNorm() == 0.0) continue;
      s += q[i] * v.dot(energy_weight_[i] * v).real();
    }
    return std::max(0.0, s);
  }

  State apply_half(const State& g) const {
    if (!has_multiplier_) return g;
    CMatrix v(g.n(), g.grid()->size());
    for (std::size_t i = 0; i < half_.size(); ++i) v.col(i) = half_[i] * g.values().col(i);
    return g.with_values(std::move(v));
  }

  BoundaryControlSystem bcs_;
  SimulationOptions opt_;
  GenerationReport report_;
  Diagonalization diag_;
  std::unique_ptr<DiagonalSystem> dsys_;
  std::unique_ptr<DiagonalStepper> stepper_;
  CMatrix P_;
  CMatrix out_map_;
  NodeMatrices H_nodes_;
  std::vector<CMatrix> energy_weight_;
  std::vector<CMatrix> half_;
  RMatrix weights_;
  double h_ = 0.0, dt_ = 0.0;
  int steps_ = 0;
  bool has_multiplier_ = false;
  double multiplier_bound_ = 0.0;
};

inline SimulationResult simulate(const BoundaryControlSystem& bcs, const State& x0, const SampledInput& u,
                                 const SimulationOptions& opt) {
  return Simulator(bcs, opt).run(x0, u);
}

struct CertificateReport {
  double tau = 0.0;
  int trials = 0;
  std::vector<double> ratios;
  double m_tau = 0.0;          // max ratio on the base grid
  double m_tau_refined = 0.0;  // same trials on the refined grid
  double drift = 0.0;          // |m_tau_refined - m_tau| / m_tau
  bool finite = false;
  bool stable = false;
  bool passed = false;
};

namespace detail {

inline GridPtr refine(const Grid& g) {
  std::vector<double> x;
  for (std::size_t i = 0; i + 1 < g.size(); ++i) {
    x.push_back(g[i]);
    x.push_back(0.5 * (g[i] + g[i + 1]));
  }
  x.push_back(g.right());
  return Grid::from_nodes(std::move(x));
}

// Integral of |column|^2 over the time series (composite Simpson from three samples on).
inline double time_energy(const std::vector<double>& t, const CMatrix& v) {
  if (t.size() < 3) {
    return t.size() == 2 ? 0.5 * (t[1] - t[0]) * (v.col(0).squaredNorm() + v.col(1).squaredNorm()) : 0.0;
  }
  const auto& w = Grid::from_nodes(t)->weights();
  double s = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) s += w[k] * v.col(k).squaredNorm();
  return s;
}

inline double smooth_bump(double s) { return s <= 0.0 || s >= 1.0 ? 0.0 : std::exp(1.0 - 1.0 / (1.0 - (2 * s - 1) * (2 * s - 1))); }

}  // namespace detail

/// Empirical m_tau in |x(tau)|^2 + int |y|^2 <= m_tau (|x0|^2 + int |u|^2) over seeded
/// random compatible data: smooth bumps away from 0 and smooth inputs vanishing at t = 0.
inline CertificateReport well_posedness_certificate(const BoundaryControlSystem& bcs, SimulationOptions opt,
                                                    double tau, int trials, unsigned seed) {
  CertificateReport rep;
  rep.tau = tau;
  rep.trials = trials;
  opt.T = tau;
  opt.snapshot_every = 0;
  SimulationOptions fine = opt;
  fine.grid = detail::refine(*opt.grid);
  const Simulator base(bcs, opt);
  fine.dt = base.dt() / 2;
  const Simulator refined(bcs, fine);

  const double L = opt.grid->right();
  const int n = bcs.phs.n(), p = bcs.p();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal;
  auto ratio = [&](const Simulator& sim, const State& x0, const SampledInput& u) {
    const auto r = sim.run(x0, u);
    const double lhs = r.energy_x.back() + detail::time_energy(r.times, r.y);
    const double rhs = r.energy_x.front() + detail::time_energy(r.times, r.u);
    return rhs > 0.0 ? lhs / rhs : 0.0;
  };
  double worst_fine = 0.0;
  for (int k = 0; k < trials; ++k) {
    std::vector<double> a(n), w(n);
    std::vector<Complex> amp(n);
    for (int c = 0; c < n; ++c) {
      a[c] = 0.05 * L + 0.3 * L * unit(rng);
      w[c] = 0.05 * L + 0.2 * L * unit(rng);
      amp[c] = Complex(normal(rng), normal(rng));
    }
    auto x0_fn = [&](double xi) {
      CVector v(n);
      for (int c = 0; c < n; ++c) v(c) = amp[c] * detail::smooth_bump((xi - a[c]) / w[c]);
      return v;
    };
    std::vector<double> start(p), width(p);
    std::vector<Complex> uamp(p);
    for (int j = 0; j < p; ++j) {
      start[j] = 0.5 * tau * unit(rng);
      width[j] = 0.2 * tau + 0.5 * tau * unit(rng);
      uamp[j] = Complex(normal(rng), normal(rng));
    }
    auto input = [&](double dt) {
      const int m = static_cast<int>(std::ceil(tau / dt)) + 1;
      std::vector<double> ts(m);
      CMatrix vals(p, m);
      for (int i = 0; i < m; ++i) {
        ts[i] = std::min(tau, i * dt);
        if (i == m - 1) ts[i] = tau;
        for (int j = 0; j < p; ++j) vals(j, i) = uamp[j] * detail::smooth_bump((ts[i] - start[j]) / width[j]);
      }
      if (m >= 2 && ts[m - 1] <= ts[m - 2]) {
        ts.pop_back();
        vals.conservativeResize(p, m - 1);
      }
      return p ? SampledInput(ts, vals) : SampledInput::zero(0);
    };
    const auto x0 = State::sample(opt.grid, n, x0_fn, opt.interp);
    const auto x0f = State::sample(fine.grid, n, x0_fn, opt.interp);
    const double r0 = ratio(base, x0, input(base.dt()));
    const double r1 = ratio(refined, x0f, input(refined.dt()));
    rep.ratios.push_back(r0);
    rep.m_tau = std::max(rep.m_tau, r0);
    worst_fine = std::max(worst_fine, r1);
  }
  rep.m_tau_refined = worst_fine;
  rep.finite = std::isfinite(rep.m_tau) && std::isfinite(rep.m_tau_refined);
  rep.drift = rep.m_tau > 0.0 ? std::abs(rep.m_tau_refined - rep.m_tau) / rep.m_tau : 0.0;
  rep.stable = rep.drift <= 0.05;
  rep.passed = rep.finite && rep.stable;
  return rep;
}

}  // namespace phs
