#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "phs/coeffs.hpp"
#include "phs/error.hpp"
#include "phs/linalg.hpp"

namespace phs {

enum class Layout { uniform, log_stretched, custom };
enum class Interp { linear, monotone_cubic, cubic_spline };
enum class Tail { zero, hold_last };

class Grid;
using GridPtr = std::shared_ptr<const Grid>;

/// Strictly increasing nodes on [left, right] with cached composite Simpson weights.
class Grid {
 public:
  static GridPtr uniform(double left, double right, int nodes) {
    if (nodes < 3 || !(right > left)) throw DomainError("uniform grid needs right > left and >= 3 nodes");
    std::vector<double> x(nodes);
    const double h = (right - left) / (nodes - 1);
    for (int i = 0; i < nodes; ++i) x[i] = left + h * i;
    x.back() = right;
    return std::shared_ptr<const Grid>(new Grid(std::move(x), Layout::uniform));
  }

  /// Nodes xi_k = c (exp(k s) - 1) on [0, r_max], clustered near the boundary at 0.
  static GridPtr log_stretched(double r_max = 50.0, int nodes = 2048, double cluster = 1.0) {
    if (nodes < 3 || !(r_max > 0) || !(cluster > 0)) throw DomainError("invalid log-stretched grid");
    std::vector<double> x(nodes);
    const double s = std::log1p(r_max / cluster) / (nodes - 1);
    for (int i = 0; i < nodes; ++i) x[i] = cluster * std::expm1(s * i);
    x.front() = 0.0;
    x.back() = r_max;
    return std::shared_ptr<const Grid>(new Grid(std::move(x), Layout::log_stretched));
  }

  /// Log-stretched on both sides of 0, for states on the line.
  static GridPtr symmetric(double r_max, int nodes_per_side, double cluster = 1.0) {
    auto half = log_stretched(r_max, nodes_per_side, cluster);
    std::vector<double> x;
    for (auto it = half->nodes().rbegin(); it != half->nodes().rend(); ++it)
      if (*it > 0) x.push_back(-*it);
    x.insert(x.end(), half->nodes().begin(), half->nodes().end());
    return std::shared_ptr<const Grid>(new Grid(std::move(x), Layout::log_stretched));
  }

  static GridPtr from_nodes(std::vector<double> x) {
    if (x.size() < 3) throw DomainError("grid needs at least 3 nodes");
    for (std::size_t i = 1; i < x.size(); ++i)
      if (!(x[i] > x[i - 1])) throw DomainError("grid nodes must be strictly increasing");
    return std::shared_ptr<const Grid>(new Grid(std::move(x), Layout::custom));
  }

  const std::vector<double>& nodes() const { return x_; }
  double operator[](std::size_t i) const { return x_[i]; }
  std::size_t size() const { return x_.size(); }
  double left() const { return x_.front(); }
  double right() const { return x_.back(); }
  Layout layout() const { return layout_; }
  Domain domain() const { return left() < 0.0 ? Domain::full_line : Domain::half_line; }
  const std::vector<double>& weights() const { return w_; }

  double max_spacing() const {
    double h = 0.0;
    for (std::size_t i = 1; i < x_.size(); ++i) h = std::max(h, x_[i] - x_[i - 1]);
    return h;
  }

  /// Index i of the cell [x_i, x_{i+1}] containing xi (clamped to the valid range).
  std::size_t cell(double xi) const {
    const std::size_t last = x_.size() - 2;
    if (layout_ == Layout::uniform) {
      const double h = (right() - left()) / (x_.size() - 1);
      const double k = std::floor((xi - left()) / h);
      if (k <= 0) return 0;
      std::size_t i = std::min(static_cast<std::size_t>(k), last);
      // guard against rounding at the cell edges
      if (xi < x_[i] && i > 0) --i;
      else if (i < last && xi >= x_[i + 1]) ++i;
      return i;
    }
    auto it = std::upper_bound(x_.begin(), x_.end(), xi);
    const std::size_t i = static_cast<std::size_t>(it - x_.begin());
    return std::min(i == 0 ? 0 : i - 1, last);
  }

  bool contains(double xi) const { return xi >= left() && xi <= right(); }

 private:
  Grid(std::vector<double> x, Layout layout) : x_(std::move(x)), layout_(layout) { build_weights(); }

  // Composite Simpson on pairs of cells with quadratic fits; an odd trailing cell
  // integrates the quadratic through the last three nodes over that cell only.
  void build_weights() {
    const std::size_t n = x_.size();
    w_.assign(n, 0.0);
    std::size_t i = 0;
    for (; i + 2 < n; i += 2) {
      const double h0 = x_[i + 1] - x_[i], h1 = x_[i + 2] - x_[i + 1], s = h0 + h1;
      w_[i] += s / 6.0 * (2.0 - h1 / h0);
      w_[i + 1] += s / 6.0 * s * s / (h0 * h1);
      w_[i + 2] += s / 6.0 * (2.0 - h0 / h1);
    }
    if (i + 1 == n - 1) {
      const double h0 = x_[n - 2] - x_[n - 3], h1 = x_[n - 1] - x_[n - 2];
      w_[n - 3] += -h1 * h1 * h1 / (6.0 * h0 * (h0 + h1));
      w_[n - 2] += h1 * (h1 + 3.0 * h0) / (6.0 * h0);
      w_[n - 1] += h1 * (2.0 * h1 + 3.0 * h0) / (6.0 * (h0 + h1));
    }
  }

  std::vector<double> x_;
  Layout layout_;
  std::vector<double> w_;
};

namespace detail {

// Derivative at x[0] of the cubic through the first four points.
inline Complex lagrange_end_slope(const double* x, const Complex* y, int stride) {
  Complex d(0.0);
  for (int j = 0; j < 4; ++j) {
    double num = 1.0, den = 1.0;
    if (j == 0) {
      double s = 0.0;
      for (int k = 1; k < 4; ++k) s += 1.0 / (x[0] - x[k]);
      d += y[0] * s;
      continue;
    }
    for (int k = 0; k < 4; ++k) {
      if (k == j) continue;
      den *= x[j] - x[k];
      if (k != 0) num *= x[0] - x[k];
    }
    d += y[j * stride] * (num / den);
  }
  return d;
}

inline CVector spline_slopes(const std::vector<double>& x, const CVector& y) {
  const std::size_t n = x.size();
  CVector m(n);
  if (n < 4) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t a = i == 0 ? 0 : i - 1, b = i + 1 == n ? i : i + 1;
      m(i) = (y(b) - y(a)) / (x[b] - x[a]);
    }
    return m;
  }
  // clamped ends from one-sided cubic fits, Thomas sweep on the interior rows
  std::vector<double> rx(x.rbegin(), x.rbegin() + 4);
  CVector ry(4);
  for (int k = 0; k < 4; ++k) ry(k) = y(n - 1 - k);
  const Complex m0 = lagrange_end_slope(x.data(), y.data(), 1);
  const Complex mn = lagrange_end_slope(rx.data(), ry.data(), 1);
  std::vector<double> lower(n, 0.0), diag(n, 1.0), upper(n, 0.0);
  CVector rhs(n);
  rhs(0) = m0;
  rhs(n - 1) = mn;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double h0 = x[i] - x[i - 1], h1 = x[i + 1] - x[i];
    const Complex d0 = (y(i) - y(i - 1)) / h0, d1 = (y(i + 1) - y(i)) / h1;
    lower[i] = h1;
    diag[i] = 2.0 * (h0 + h1);
    upper[i] = h0;
    rhs(i) = 3.0 * (h1 * d0 + h0 * d1);
  }
  for (std::size_t i = 1; i < n; ++i) {
    const double f = lower[i] / diag[i - 1];
    diag[i] -= f * upper[i - 1];
    rhs(i) -= f * rhs(i - 1);
  }
  m(n - 1) = rhs(n - 1) / diag[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) m(i) = (rhs(i) - upper[i] * m(i + 1)) / diag[i];
  return m;
}

inline double pchip_edge(double h0, double h1, double d0, double d1) {
  const double s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
  if (d0 == 0.0 || (s > 0) != (d0 > 0)) return 0.0;
  if ((d0 > 0) != (d1 > 0) && std::abs(s) > 3.0 * std::abs(d0)) return 3.0 * d0;
  return s;
}

inline RVector pchip_slopes(const std::vector<double>& x, const RVector& y) {
  const std::size_t n = x.size();
  RVector m = RVector::Zero(n);
  std::vector<double> h(n - 1), d(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    h[i] = x[i + 1] - x[i];
    d[i] = (y(i + 1) - y(i)) / h[i];
  }
  for (std::size_t k = 1; k + 1 < n; ++k) {
    if (d[k - 1] * d[k] <= 0.0) continue;
    const double w1 = 2.0 * h[k] + h[k - 1], w2 = h[k] + 2.0 * h[k - 1];
    m(k) = (w1 + w2) / (w1 / d[k - 1] + w2 / d[k]);
  }
  m(0) = pchip_edge(h[0], h[1], d[0], d[1]);
  m(n - 1) = pchip_edge(h[n - 2], h[n - 3], d[n - 2], d[n - 3]);
  return m;
}

}  // namespace detail

/// C^n-valued function sampled on a grid; values are stored component-major (n x N).
class State {
 public:
  State() = default;

  State(GridPtr grid, CMatrix values, Interp interp = Interp::monotone_cubic, Tail tail = Tail::zero)
      : grid_(std::move(grid)), values_(std::move(values)), interp_(interp), tail_(tail) {
    if (!grid_) throw DimensionError("state without grid");
    if (values_.cols() != static_cast<Eigen::Index>(grid_->size()) || values_.rows() < 1)
      throw DimensionError("state values must be n x (grid size)");
    if (!values_.allFinite()) throw DataError("state values must be finite");
    build_slopes();
  }

  static State zeros(GridPtr grid, int n, Interp interp = Interp::monotone_cubic, Tail tail = Tail::zero) {
    const auto N = static_cast<Eigen::Index>(grid->size());
    return State(std::move(grid), CMatrix::Zero(n, N), interp, tail);
  }

  /// Samples f(xi) -> CVector (or a scalar when n == 1) at every node.
  template <class F>
  static State sample(GridPtr grid, int n, F&& f, Interp interp = Interp::monotone_cubic,
                      Tail tail = Tail::zero) {
    CMatrix v(n, grid->size());
    for (std::size_t i = 0; i < grid->size(); ++i) {
      if constexpr (std::is_convertible_v<decltype(f(0.0)), Complex>) {
        v(0, i) = f((*grid)[i]);
      } else {
        v.col(i) = f((*grid)[i]);
      }
    }
    return State(std::move(grid), std::move(v), interp, tail);
  }

  const GridPtr& grid() const { return grid_; }
  int n() const { return static_cast<int>(values_.rows()); }
  const CMatrix& values() const { return values_; }
  Interp interp() const { return interp_; }
  Tail tail() const { return tail_; }

  State with_values(CMatrix v) const { return State(grid_, std::move(v), interp_, tail_); }
  State with_interp(Interp interp) const { return State(grid_, values_, interp, tail_); }

  bool covers(double xi) const { return grid_->contains(xi); }

  Complex at(int comp, double xi) const {
    const Grid& g = *grid_;
    if (xi < g.left() || xi > g.right()) {
      if (tail_ == Tail::zero) return 0.0;
      return xi < g.left() ? values_(comp, 0) : values_(comp, values_.cols() - 1);
    }
    const std::size_t i = g.cell(xi);
    const double x0 = g[i], h = g[i + 1] - x0, s = (xi - x0) / h;
    const Complex y0 = values_(comp, i), y1 = values_(comp, i + 1);
    if (interp_ == Interp::linear) return y0 + s * (y1 - y0);
    const double s2 = s * s, s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * h * slopes_(comp, i) +
           (-2 * s3 + 3 * s2) * y1 + (s3 - s2) * h * slopes_(comp, i + 1);
  }

  CVector at(double xi) const {
    CVector v(n());
    for (int c = 0; c < n(); ++c) v(c) = at(c, xi);
    return v;
  }

 private:
  void build_slopes() {
    if (interp_ == Interp::linear) return;
    const auto& x = grid_->nodes();
    slopes_.resize(values_.rows(), values_.cols());
    for (Eigen::Index c = 0; c < values_.rows(); ++c) {
      if (interp_ == Interp::cubic_spline) {
        slopes_.row(c) = detail::spline_slopes(x, values_.row(c).transpose()).transpose();
      } else {
        const RVector re = detail::pchip_slopes(x, values_.row(c).real().transpose());
        const RVector im = detail::pchip_slopes(x, values_.row(c).imag().transpose());
        for (Eigen::Index i = 0; i < values_.cols(); ++i) slopes_(c, i) = Complex(re(i), im(i));
      }
    }
  }

  GridPtr grid_;
  CMatrix values_;
  CMatrix slopes_;
  Interp interp_ = Interp::monotone_cubic;
  Tail tail_ = Tail::zero;
};

/// Per-node weight matrices (e.g. H or |Delta| sampled on a grid).
using NodeMatrices = std::vector<CMatrix>;

inline NodeMatrices sample_matrix(const MatrixCoefficient& w, const Grid& g) {
  NodeMatrices out(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = w(g[i]);
  return out;
}

namespace detail {
inline void check_pair(const State& x, const State& y) {
  if (x.n() != y.n()) throw DimensionError("states have different dimensions");
  if (x.grid() != y.grid() && x.grid()->nodes() != y.grid()->nodes())
    throw DimensionError("states live on different grids");
}
inline void warn_tail(const State& x) {
  if (x.tail() == Tail::hold_last)
    warn("weighted norm of a hold-last state ignores its (possibly divergent) tail");
}
}  // namespace detail

/// <x, y>_W = int x* W y over the grid, with W given per node.
inline Complex weighted_inner(const State& x, const State& y, const NodeMatrices& w) {
  detail::check_pair(x, y);
  if (w.size() != x.grid()->size()) throw DimensionError("weight samples do not match the grid");
  detail::warn_tail(x);
  const auto& q = x.grid()->weights();
  Complex s(0.0);
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (w[i].rows() != x.n()) throw DimensionError("weight dimension does not match the state");
    s += q[i] * x.values().col(i).dot(w[i] * y.values().col(i));
  }
  return s;
}

inline Complex weighted_inner(const State& x, const State& y, const MatrixCoefficient& w) {
  if (w.n() != x.n()) throw DimensionError("weight dimension does not match the state");
  return weighted_inner(x, y, sample_matrix(w, *x.grid()));
}

/// Unweighted L2 inner product.
inline Complex inner(const State& x, const State& y) {
  detail::check_pair(x, y);
  const auto& q = x.grid()->weights();
  Complex s(0.0);
  for (std::size_t i = 0; i < q.size(); ++i) s += q[i] * x.values().col(i).dot(y.values().col(i));
  return s;
}

template <class W>
double weighted_norm_squared(const State& x, const W& w) {
  return std::max(0.0, weighted_inner(x, x, w).real());
}

template <class W>
double weighted_norm(const State& x, const W& w) {
  return std::sqrt(weighted_norm_squared(x, w));
}

inline double l2_norm(const State& x) { return std::sqrt(std::max(0.0, inner(x, x).real())); }

/// Norm squared with a diagonal weight given per node as an n x N real matrix.
inline double diagonal_norm_squared(const State& x, const RMatrix& w) {
  if (w.rows() != x.n() || w.cols() != x.values().cols()) throw DimensionError("diagonal weight shape mismatch");
  const auto& q = x.grid()->weights();
  double s = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i)
    s += q[i] * (w.col(i).array() * x.values().col(i).array().abs2()).sum();
  return std::max(0.0, s);
}

struct Resampled {
  State state;
  double norm_before = 0.0;
  double norm_after = 0.0;
  double drift = 0.0;  // |norm_after - norm_before|, an interpolation error indicator
};

inline Resampled resample(const State& x, GridPtr g) {
  CMatrix v(x.n(), g->size());
  if (g->nodes() == x.grid()->nodes()) {
    v = x.values();
  } else {
    for (std::size_t i = 0; i < g->size(); ++i) v.col(i) = x.at((*g)[i]);
  }
  Resampled r{State(g, std::move(v), x.interp(), x.tail()), l2_norm(x), 0.0, 0.0};
  r.norm_after = l2_norm(r.state);
  r.drift = std::abs(r.norm_after - r.norm_before);
  return r;
}

/// Row-wise derivative on the grid: three-point nonuniform stencils, one-sided at the ends.
inline CMatrix differentiate(const Grid& g, const CMatrix& v) {
  const std::size_t n = g.size();
  CMatrix d(v.rows(), v.cols());
  auto stencil = [&](std::size_t a, std::size_t b, std::size_t c, double at) {
    const double xa = g[a], xb = g[b], xc = g[c];
    const double wa = (2 * at - xb - xc) / ((xa - xb) * (xa - xc));
    const double wb = (2 * at - xa - xc) / ((xb - xa) * (xb - xc));
    const double wc = (2 * at - xa - xb) / ((xc - xa) * (xc - xb));
    return std::array<double, 3>{wa, wb, wc};
  };
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t a = i == 0 ? 0 : (i + 1 == n ? n - 3 : i - 1);
    const auto w = stencil(a, a + 1, a + 2, g[i]);
    d.col(i) = w[0] * v.col(a) + w[1] * v.col(a + 1) + w[2] * v.col(a + 2);
  }
  return d;
}

inline State differentiate(const State& x) { return x.with_values(differentiate(*x.grid(), x.values())); }

/// Snapshot in the CSV format `xi,re_0,im_0,...`.
inline void write_csv(const State& x, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "xi";
  for (int c = 0; c < x.n(); ++c) out << ",re_" << c << ",im_" << c;
  out << '\n' << std::setprecision(17);
  for (std::size_t i = 0; i < x.grid()->size(); ++i) {
    out << (*x.grid())[i];
    for (int c = 0; c < x.n(); ++c) out << ',' << x.values()(c, i).real() << ',' << x.values()(c, i).imag();
    out << '\n';
  }
}

inline State read_csv(const std::string& path, Interp interp = Interp::monotone_cubic, Tail tail = Tail::zero) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::string line;
  std::getline(in, line);
  const auto columns = std::count(line.begin(), line.end(), ',') + 1;
  if (columns < 3 || columns % 2 == 0) throw DataError(path + ": header must be xi,re_0,im_0,...");
  const int n = static_cast<int>((columns - 1) / 2);
  std::vector<double> xs;
  std::vector<std::vector<Complex>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    double xi;
    std::vector<Complex> vals(n);
    if (!(row >> xi)) throw DataError(path + ":" + std::to_string(lineno) + ": bad row");
    for (int c = 0; c < n; ++c) {
      double re, im;
      if (!(row >> re >> im)) throw DataError(path + ":" + std::to_string(lineno) + ": bad row");
      vals[c] = Complex(re, im);
    }
    xs.push_back(xi);
    rows.push_back(std::move(vals));
  }
  auto g = Grid::from_nodes(xs);
  CMatrix v(n, xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i)
    for (int c = 0; c < n; ++c) v(c, i) = rows[i][c];
  return State(g, std::move(v), interp, tail);
}

}  // namespace phs
