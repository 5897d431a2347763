#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "phs/statespace.hpp"

namespace phs {

/// P1 (H x)' + P0 H x on [0, inf) with boundary condition W_B H(0) x(0) = 0.
/// `scale` fixes the normalization S* |Delta| S = scale * H of the diagonalizing S.
struct PortHamiltonianSystem {
  CMatrix P1;
  CMatrix P0;
  MatrixCoefficient H;
  CMatrix W_B;
  double scale = 1.0;

  int n() const { return static_cast<int>(P1.rows()); }
};

struct Inertia {
  int n_plus = 0;
  int n_minus = 0;
  bool operator==(const Inertia&) const = default;
};

/// Signs of the eigenvalues of H^{1/2} P1 H^{1/2} at xi.
inline Inertia inertia(const CMatrix& P1, const MatrixCoefficient& H, double xi) {
  const auto root = linalg::hermitian_sqrt(H(xi));
  const CMatrix a = root.root * P1 * root.root;
  Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (a + a.adjoint()), Eigen::EigenvaluesOnly);
  const RVector& ev = es.eigenvalues();
  const double radius = ev.cwiseAbs().maxCoeff();
  Inertia r;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (std::abs(ev(i)) <= 1e-10 * radius)
      throw DiagonalizationError("P1 H has an eigenvalue near 0 at xi = " + std::to_string(xi) +
                                     " (degenerate pencil)",
                                 xi, xi);
    (ev(i) > 0 ? r.n_plus : r.n_minus)++;
  }
  return r;
}

/// Probe nodes used for xi-independence checks: 0 and 15 log-spaced points up to r.
inline std::vector<double> probe_points(double r = 500.0, int count = 16) {
  return Grid::log_stretched(r, count)->nodes();
}

/// Inertia checked to be the same at every probe point.
inline Inertia inertia(const CMatrix& P1, const MatrixCoefficient& H, const std::vector<double>& probe) {
  const Inertia first = inertia(P1, H, probe.front());
  for (double xi : probe)
    if (!(inertia(P1, H, xi) == first))
      throw DataError("inertia of P1 H changes between xi = " + std::to_string(probe.front()) + " and xi = " +
                      std::to_string(xi));
  return first;
}

inline void validate(const PortHamiltonianSystem& sys, const std::vector<double>& probe = probe_points()) {
  const int n = sys.n();
  if (n == 0 || sys.P1.cols() != n) throw DimensionError("P1 must be square and nonempty");
  if (sys.P0.rows() != n || sys.P0.cols() != n) throw DimensionError("P0 must be n x n");
  if (sys.H.n() != n) throw DimensionError("H must be n x n");
  if (sys.W_B.cols() != n) throw DimensionError("W_B must have n columns");
  if (!linalg::is_hermitian(sys.P1)) throw DataError("P1 must be Hermitian");
  if (!(linalg::sigma_min(sys.P1) > 1e-10 * linalg::sigma_max(sys.P1))) throw DataError("P1 must be invertible");
  if (!(sys.scale > 0.0)) throw DataError("normalization scale must be positive");
  for (double xi : probe) {
    const CMatrix h = sys.H(xi);
    if (!h.allFinite()) throw DataError("H is not finite at xi = " + std::to_string(xi));
    if (!linalg::is_hermitian(h)) throw DataError("H is not Hermitian at xi = " + std::to_string(xi));
  }
  const Inertia in = inertia(sys.P1, sys.H, probe);
  if (sys.W_B.rows() != in.n_minus)
    throw DimensionError("W_B must have n_minus = " + std::to_string(in.n_minus) + " rows, found " +
                         std::to_string(sys.W_B.rows()));
}

/// Pointwise P1 H = S^{-1} Delta S on a grid, positive entries first, both blocks descending.
struct Diagonalization {
  GridPtr grid;
  int n_plus = 0;
  int n_minus = 0;
  double scale = 1.0;
  std::vector<CMatrix> S, S_inv, dS, dS_inv;
  std::vector<RVector> delta;
  std::string derivative_mode;  // "analytic" or "finite differences"
  double max_reconstruction = 0.0;

  int n() const { return n_plus + n_minus; }

  /// B = S (S^{-1})' Delta at node i.
  CMatrix B(std::size_t i) const { return S[i] * dS_inv[i] * delta[i].cast<Complex>().asDiagonal(); }
  /// C = S' P1 H at node i.
  CMatrix C(std::size_t i, const CMatrix& P1, const MatrixCoefficient& H) const {
    return dS[i] * P1 * H((*grid)[i]);
  }
  CMatrix abs_delta(std::size_t i) const { return delta[i].cwiseAbs().cast<Complex>().asDiagonal(); }
};

namespace detail {

struct NodeDecomposition {
  RVector delta;
  CMatrix V;  // orthonormal eigenvectors of H^{1/2} P1 H^{1/2}
  linalg::HermitianRoot root;
};

// Eigenvalues in descending order; ties keep the order of each vector's dominant index.
inline NodeDecomposition decompose(const CMatrix& P1, const CMatrix& h) {
  NodeDecomposition d;
  d.root = linalg::hermitian_sqrt(h);
  const CMatrix a = d.root.root * P1 * d.root.root;
  Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (a + a.adjoint()));
  if (es.info() != Eigen::Success) throw DataError("eigendecomposition of H^{1/2} P1 H^{1/2} failed");
  const RVector& ev = es.eigenvalues();
  const Eigen::Index n = ev.size();
  const double radius = ev.cwiseAbs().maxCoeff();
  std::vector<Eigen::Index> order(n), dominant(n);
  std::iota(order.begin(), order.end(), 0);
  for (Eigen::Index j = 0; j < n; ++j) es.eigenvectors().col(j).cwiseAbs().maxCoeff(&dominant[j]);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index p, Eigen::Index q) {
    if (std::abs(ev(p) - ev(q)) > 1e-12 * radius) return ev(p) > ev(q);
    return dominant[p] < dominant[q];
  });
  d.delta.resize(n);
  d.V.resize(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    d.delta(j) = ev(order[j]);
    d.V.col(j) = es.eigenvectors().col(order[j]);
  }
  return d;
}

// Groups of indices with (numerically) equal eigenvalues.
inline std::vector<std::pair<Eigen::Index, Eigen::Index>> eigen_groups(const RVector& delta) {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> groups;
  const double radius = delta.cwiseAbs().maxCoeff();
  Eigen::Index start = 0;
  for (Eigen::Index j = 1; j <= delta.size(); ++j) {
    if (j == delta.size() || std::abs(delta(j) - delta(j - 1)) > 1e-9 * radius) {
      groups.emplace_back(start, j - start);
      start = j;
    }
  }
  return groups;
}

// First node: make the largest-magnitude entry of each S^{-1} column real positive (last one on ties).
inline void fix_first_phases(NodeDecomposition& d) {
  const CMatrix r = d.root.inv_root * d.V;
  for (Eigen::Index j = 0; j < r.cols(); ++j) {
    const double peak = r.col(j).cwiseAbs().maxCoeff();
    Eigen::Index pick = 0;
    for (Eigen::Index i = 0; i < r.rows(); ++i)
      if (std::abs(r(i, j)) >= peak * (1.0 - 1e-10)) pick = i;
    const Complex z = r(pick, j);
    d.V.col(j) *= std::conj(z) / std::abs(z);
  }
}

// Later nodes: rotate each eigen-group onto the previous node's vectors (a phase for
// simple eigenvalues) and reject jumps that look like a crossing.
inline void align(NodeDecomposition& d, const CMatrix& prev, double left, double right) {
  for (auto [start, len] : eigen_groups(d.delta)) {
    const CMatrix m = d.V.middleCols(start, len).adjoint() * prev.middleCols(start, len);
    Eigen::JacobiSVD<CMatrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    if (svd.singularValues().minCoeff() < 0.7)
      throw DiagonalizationError("eigenvectors change too fast between xi = " + std::to_string(left) + " and xi = " +
                                     std::to_string(right) + " (possible eigenvalue crossing); refine the grid there",
                                 left, right);
    d.V.middleCols(start, len) = d.V.middleCols(start, len) * (svd.matrixU() * svd.matrixV().adjoint());
  }
}

struct NodeFactors {
  CMatrix S, S_inv;
};

inline NodeFactors factors(const NodeDecomposition& d, double scale) {
  const RVector dn = (scale / d.delta.cwiseAbs().array()).sqrt().matrix();
  NodeFactors f;
  f.S_inv = d.root.inv_root * d.V * dn.cwiseInverse().cast<Complex>().asDiagonal();
  f.S = dn.cast<Complex>().asDiagonal() * d.V.adjoint() * d.root.root;
  return f;
}

// dS and dS^{-1} from H' by first-order perturbation of the eigenpairs of P1 H with
// the normalization r_i* H r_i = |delta_i| / scale held fixed. nullopt on degenerate coupling.
inline std::optional<std::pair<CMatrix, CMatrix>> analytic_derivatives(const CMatrix& P1, const CMatrix& dh,
                                                                       const NodeFactors& f, const RVector& delta,
                                                                       double scale) {
  const Eigen::Index n = delta.size();
  const CMatrix m = f.S * P1 * dh * f.S_inv;
  const double radius = delta.cwiseAbs().maxCoeff();
  const double mscale = m.norm() + 1.0;
  CMatrix c = CMatrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double gap = delta(j) - delta(i);
      if (std::abs(gap) <= 1e-9 * radius) {
        if (std::abs(m(i, j)) > 1e-12 * mscale) return std::nullopt;
        continue;
      }
      c(i, j) = m(i, j) / gap;
    }
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d_delta = m(i, i).real();
    const double sign = delta(i) > 0 ? 1.0 : -1.0;
    const double hh = (f.S_inv.col(i).adjoint() * dh * f.S_inv.col(i))(0, 0).real();
    c(i, i) = (sign * d_delta - scale * hh) / (2.0 * std::abs(delta(i)));
  }
  return std::make_pair(CMatrix(-c * f.S), CMatrix(f.S_inv * c));
}

inline bool is_real(const CMatrix& m) { return m.imag().cwiseAbs().maxCoeff() == 0.0; }

}  // namespace detail

/// Diagonalizes P1 H node by node. Derivatives of S and S^{-1} come from H' when
/// P1 and H are real (signs are then the only gauge freedom), otherwise from
/// finite differences on the grid.
inline Diagonalization diagonalize_pointwise(const CMatrix& P1, const MatrixCoefficient& H, GridPtr grid,
                                             double scale = 1.0) {
  const Grid& g = *grid;
  const std::size_t N = g.size();
  const Inertia in = inertia(P1, H, g.nodes());
  Diagonalization out;
  out.grid = grid;
  out.n_plus = in.n_plus;
  out.n_minus = in.n_minus;
  out.scale = scale;
  out.S.resize(N);
  out.S_inv.resize(N);
  out.dS.resize(N);
  out.dS_inv.resize(N);
  out.delta.resize(N);

  bool real = detail::is_real(P1);
  CMatrix prev;
  for (std::size_t i = 0; i < N; ++i) {
    const CMatrix h = H(g[i]);
    real = real && detail::is_real(h) && detail::is_real(H.derivative(g[i]));
    auto d = detail::decompose(P1, h);
    if (i == 0)
      detail::fix_first_phases(d);
    else
      detail::align(d, prev, g[i - 1], g[i]);
    prev = d.V;
    const auto f = detail::factors(d, scale);
    out.S[i] = f.S;
    out.S_inv[i] = f.S_inv;
    out.delta[i] = d.delta;
    const CMatrix target = P1 * h;
    const double res = (f.S_inv * d.delta.cast<Complex>().asDiagonal() * f.S - target).norm() /
                       std::max(target.norm(), 1e-300);
    out.max_reconstruction = std::max(out.max_reconstruction, res);
  }

  bool analytic = real;
  if (analytic) {
    for (std::size_t i = 0; i < N && analytic; ++i) {
      const auto ds = detail::analytic_derivatives(P1, H.derivative(g[i]), {out.S[i], out.S_inv[i]}, out.delta[i],
                                                   scale);
      if (!ds) {
        analytic = false;
        break;
      }
      out.dS[i] = ds->first;
      out.dS_inv[i] = ds->second;
    }
  }
  out.derivative_mode = analytic ? "analytic" : "finite differences";
  if (!analytic) {
    const int n = in.n_plus + in.n_minus;
    for (auto [src, dst] : {std::pair{&out.S, &out.dS}, std::pair{&out.S_inv, &out.dS_inv}}) {
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) {
          CMatrix row(1, N);
          for (std::size_t i = 0; i < N; ++i) row(0, i) = (*src)[i](r, c);
          const CMatrix d = differentiate(g, row);
          for (std::size_t i = 0; i < N; ++i) {
            if (r == 0 && c == 0) (*dst)[i].resize(n, n);
            (*dst)[i](r, c) = d(0, i);
          }
        }
    }
  }
  return out;
}

/// Span of the eigenvectors of P1 H(0) for negative eigenvalues: the last n_minus columns of S(0)^{-1}.
inline CMatrix z_minus_space(const CMatrix& P1, const MatrixCoefficient& H, double scale = 1.0) {
  auto d = detail::decompose(P1, H(0.0));
  detail::fix_first_phases(d);
  const auto f = detail::factors(d, scale);
  Eigen::Index nm = 0;
  for (Eigen::Index j = 0; j < d.delta.size(); ++j) nm += d.delta(j) < 0;
  const CMatrix z = f.S_inv.rightCols(nm);
  const CMatrix a = P1 * H(0.0);
  for (Eigen::Index j = 0; j < nm; ++j) {
    const double delta = d.delta(d.delta.size() - nm + j);
    if ((a * z.col(j) - delta * z.col(j)).norm() > 1e-8 * z.col(j).norm())
      throw DiagonalizationError("negative eigenvector check failed at xi = 0", 0.0, 0.0);
  }
  return z;
}

/// Independent basis of the negative eigenspace of P1 H(0) from the non-Hermitian eigensolver.
inline CMatrix z_minus_direct(const CMatrix& P1, const CMatrix& h0) {
  Eigen::ComplexEigenSolver<CMatrix> es(P1 * h0);
  std::vector<Eigen::Index> neg;
  for (Eigen::Index j = 0; j < es.eigenvalues().size(); ++j)
    if (es.eigenvalues()(j).real() < 0) neg.push_back(j);
  CMatrix z(P1.rows(), static_cast<Eigen::Index>(neg.size()));
  for (std::size_t k = 0; k < neg.size(); ++k) z.col(k) = es.eigenvectors().col(neg[k]).normalized();
  return z;
}

struct USplit {
  CMatrix U1, U2;
};

/// [U1 U2] = W_B H(0) S(0)^{-1}, split after column n_plus.
inline USplit compute_U(const PortHamiltonianSystem& sys, const Diagonalization& d) {
  if (d.grid->nodes().front() != 0.0) throw DomainError("diagonalization grid must start at 0");
  const CMatrix full = sys.W_B * sys.H(0.0) * d.S_inv.front();
  return {full.leftCols(d.n_plus), full.rightCols(d.n_minus)};
}

struct AssumptionVerdicts {
  // (a) Delta bounded
  double delta_sup = 0.0;
  bool a_pass = false;
  // (b) S an isomorphism: generalized eigenvalues of (S*|Delta|S, H)
  double pencil_min = 0.0, pencil_max = 0.0;
  bool b_pass = false;
  // (c) B bounded: sup of the largest generalized eigenvalue of (B*|Delta|B, |Delta|)
  double K1 = 0.0;
  std::vector<double> K1_profile;
  bool c_pass = false;
  // (d) C well-defined: sup of the largest generalized eigenvalue of (C*|Delta|C, H)
  double K2 = 0.0;
  bool d_pass = false;
  // (e) rank W_B = n_minus
  int rank_W_B = 0;
  bool e_pass = false;
  std::string note = "(a)-(d) are sampled suprema on the probe grid: heuristic (grid-limited), not proofs";
};

inline AssumptionVerdicts check_assumptions(const PortHamiltonianSystem& sys, const Diagonalization& d) {
  AssumptionVerdicts v;
  const Grid& g = *d.grid;
  const std::size_t N = g.size();
  v.pencil_min = std::numeric_limits<double>::infinity();
  v.pencil_max = 0.0;
  v.K1_profile.resize(N);
  for (std::size_t i = 0; i < N; ++i) {
    const CMatrix h = sys.H(g[i]);
    const CMatrix ad = d.abs_delta(i);
    v.delta_sup = std::max(v.delta_sup, d.delta[i].cwiseAbs().maxCoeff());
    const auto b = linalg::pencil_bounds(d.S[i].adjoint() * ad * d.S[i], h);
    v.pencil_min = std::min(v.pencil_min, b.min);
    v.pencil_max = std::max(v.pencil_max, b.max);
    const CMatrix B = d.B(i);
    v.K1_profile[i] = std::max(0.0, linalg::pencil_bounds(B.adjoint() * ad * B, ad).max);
    v.K1 = std::max(v.K1, v.K1_profile[i]);
    const CMatrix C = d.C(i, sys.P1, sys.H);
    v.K2 = std::max(v.K2, linalg::pencil_bounds(C.adjoint() * ad * C, h).max);
  }
  v.a_pass = std::isfinite(v.delta_sup);
  v.b_pass = v.pencil_min > 1e-8 && v.pencil_max < 1e8;
  v.c_pass = std::isfinite(v.K1);
  v.d_pass = std::isfinite(v.K2);
  v.rank_W_B = sys.W_B.rows() ? linalg::rank(sys.W_B) : 0;
  v.e_pass = v.rank_W_B == d.n_minus;
  return v;
}

struct GenerationReport {
  int n_plus = 0, n_minus = 0;
  CMatrix U1, U2;
  double sigma_min_U2 = 0.0, sigma_max_U2 = 0.0;
  CMatrix Z_minus_basis;
  int rank_cross = 0;      // rank of W_B H(0) Z^-(0) with an independently computed basis
  bool verdict_ii = false;  // U2 invertible
  bool verdict_iii = false; // W_B H(0) Z^-(0) = C^{n_minus}
  bool criterion_agree = false;
  AssumptionVerdicts assumptions;
  bool P0_present = false;
  double H_bound = 0.0;  // sampled sup |H|, the multiplier bound needed for P0
  bool H_bounded = true;
  std::string derivative_mode;
  std::string branch;
  bool generator = false;
  std::vector<std::string> notes;
};

struct GenerationOptions {
  double probe_radius = 500.0;
  int probe_nodes = 256;
  GridPtr grid;  // overrides the probe grid when set
};

inline GenerationReport check_generation(const PortHamiltonianSystem& sys, const GenerationOptions& opt = {}) {
  const GridPtr grid = opt.grid ? opt.grid : Grid::log_stretched(opt.probe_radius, opt.probe_nodes);
  validate(sys, probe_points(grid->right()));
  const auto d = diagonalize_pointwise(sys.P1, sys.H, grid, sys.scale);
  GenerationReport r;
  r.n_plus = d.n_plus;
  r.n_minus = d.n_minus;
  r.derivative_mode = d.derivative_mode;
  r.assumptions = check_assumptions(sys, d);
  r.notes.push_back(
      "criterion (iii) is read with Z^-(0), the negative eigenspace, where the statement prints Z^{-1}(0)");
  if (d.n_minus == 0) {
    r.branch = "n_minus = 0: no boundary condition";
    r.U1 = CMatrix(0, d.n_plus);
    r.U2 = CMatrix(0, 0);
    r.Z_minus_basis = CMatrix(d.n(), 0);
    r.verdict_ii = r.verdict_iii = r.criterion_agree = true;
  } else {
    r.branch = d.n_plus == 0 ? "n_plus = 0: U2 = W_B H(0) S(0)^{-1}" : "general";
    const auto u = compute_U(sys, d);
    r.U1 = u.U1;
    r.U2 = u.U2;
    const auto sv = linalg::singular_values(r.U2);
    r.sigma_max_U2 = sv(0);
    r.sigma_min_U2 = sv(sv.size() - 1);
    r.verdict_ii = r.sigma_min_U2 > 1e-10 * std::max(r.sigma_max_U2, 1.0);
    r.Z_minus_basis = d.S_inv.front().rightCols(d.n_minus);
    const CMatrix h0 = sys.H(0.0);
    const CMatrix z = z_minus_direct(sys.P1, h0);
    const CMatrix m = sys.W_B * h0 * z;
    // rank relative to the scale of W_B H(0) so a zero image is not rescued by normalization
    const double ref = std::max(linalg::sigma_max(sys.W_B * h0), 1.0);
    const auto ms = linalg::singular_values(m);
    r.rank_cross = 0;
    for (Eigen::Index k = 0; k < ms.size(); ++k) r.rank_cross += ms(k) > 1e-10 * ref;
    r.verdict_iii = r.rank_cross == d.n_minus;
    r.criterion_agree = r.verdict_ii == r.verdict_iii;
  }
  r.P0_present = sys.P0.norm() > 0.0;
  if (r.P0_present) {
    for (double xi : grid->nodes()) r.H_bound = std::max(r.H_bound, linalg::norm2(sys.H(xi)));
    r.H_bounded = std::isfinite(r.H_bound) && r.H_bound < 1e8;
    r.notes.push_back("P0 H handled as a bounded perturbation; H bound is a sampled supremum");
  }
  r.generator = r.verdict_ii && r.assumptions.e_pass && (!r.P0_present || r.H_bounded);
  return r;
}

/// g = S x node by node.
inline State to_diagonal(const State& x, const Diagonalization& d) {
  if (x.grid()->nodes() != d.grid->nodes()) throw DimensionError("state and diagonalization grids differ");
  if (x.n() != d.n()) throw DimensionError("state dimension differs from the diagonalization");
  CMatrix v(x.n(), x.grid()->size());
  for (std::size_t i = 0; i < d.S.size(); ++i) v.col(i) = d.S[i] * x.values().col(i);
  return x.with_values(std::move(v));
}

/// x = S^{-1} g node by node.
inline State from_diagonal(const State& g, const Diagonalization& d) {
  if (g.grid()->nodes() != d.grid->nodes()) throw DimensionError("state and diagonalization grids differ");
  if (g.n() != d.n()) throw DimensionError("state dimension differs from the diagonalization");
  CMatrix v(g.n(), g.grid()->size());
  for (std::size_t i = 0; i < d.S_inv.size(); ++i) v.col(i) = d.S_inv[i] * g.values().col(i);
  return g.with_values(std::move(v));
}

}  // namespace phs
