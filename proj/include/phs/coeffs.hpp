#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "phs/error.hpp"
#include "phs/linalg.hpp"
#include "phs/quadrature.hpp"

namespace phs {

enum class Sign { positive, negative };
enum class Domain { half_line, full_line };

inline const char* to_string(Domain d) { return d == Domain::half_line ? "half-line" : "full-line"; }

/// Real, zero-free coefficient of the spatial variable.
///
/// Closed-form kinds are defined through |xi|, so on the full line they are
/// even extensions of their half-line profile. The sign is fixed at
/// construction from the data and re-checked on every evaluation.
class ScalarCoefficient {
 public:
  struct Constant {
    double c;
  };
  // c * (a + |xi|)^power with power = -1 (the reciprocal form) or +1.
  struct AffineReciprocal {
    double c, a;
    int power;
  };
  // Cubic blend on [0, 1] from (value0, slope0) into c * xi^alpha on [1, inf).
  struct PowerTail {
    double c, alpha, value0, slope0;
    std::array<double, 4> poly;  // blend coefficients in ascending powers
  };
  // Monotone cubic (PCHIP) through the nodes, constant beyond the last node.
  struct Tabulated {
    std::vector<double> x, y, m;
    std::vector<double> cum, rcum;  // integrals of w and 1/w from x.front() to each node
  };
  using Kind = std::variant<Constant, AffineReciprocal, PowerTail, Tabulated>;

  static ScalarCoefficient constant(double c, Domain domain = Domain::half_line,
                                    bool reciprocal_nonintegrable = true) {
    if (c == 0.0 || !std::isfinite(c)) throw DataError("constant coefficient must be finite and nonzero");
    return ScalarCoefficient(Constant{c}, domain, reciprocal_nonintegrable);
  }

  /// c / (a + |xi|), a > 0.
  static ScalarCoefficient affine_reciprocal(double c, double a, Domain domain = Domain::half_line,
                                             bool reciprocal_nonintegrable = true) {
    check_affine(c, a);
    return ScalarCoefficient(AffineReciprocal{c, a, -1}, domain, reciprocal_nonintegrable);
  }

  /// c * (a + |xi|), a > 0; the reciprocal of affine_reciprocal(1/c, a).
  static ScalarCoefficient affine(double c, double a, Domain domain = Domain::half_line,
                                  bool reciprocal_nonintegrable = true) {
    check_affine(c, a);
    return ScalarCoefficient(AffineReciprocal{c, a, 1}, domain, reciprocal_nonintegrable);
  }

  static ScalarCoefficient power_tail(double c, double alpha, double value0, double slope0,
                                      Domain domain = Domain::half_line,
                                      bool reciprocal_nonintegrable = true) {
    if (c == 0.0 || !std::isfinite(c) || !std::isfinite(alpha) || !std::isfinite(value0) ||
        !std::isfinite(slope0))
      throw DataError("power-tail parameters must be finite with c != 0");
    if ((c > 0) != (value0 > 0) || value0 == 0.0)
      throw DataError("power-tail value at 0 must be nonzero with the sign of c");
    const double v1 = c, d1 = c * alpha;
    PowerTail k{c, alpha, value0, slope0, {}};
    k.poly = {value0, slope0, 3.0 * (v1 - value0) - 2.0 * slope0 - d1,
              2.0 * (value0 - v1) + slope0 + d1};
    ScalarCoefficient out(k, domain, reciprocal_nonintegrable);
    for (int i = 0; i <= 1000; ++i) out.check_sign(blend(k.poly, i / 1000.0), i / 1000.0);
    return out;
  }

  static ScalarCoefficient tabulated(std::vector<double> nodes, std::vector<double> values,
                                     Domain domain = Domain::half_line,
                                     bool reciprocal_nonintegrable = true) {
    if (nodes.size() != values.size() || nodes.size() < 2)
      throw DataError("tabulated coefficient needs at least two (xi, value) pairs");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (!std::isfinite(nodes[i]) || !std::isfinite(values[i]))
        throw DataError("tabulated coefficient has non-finite data");
      if (i > 0 && !(nodes[i] > nodes[i - 1]))
        throw DataError("tabulated nodes must be strictly increasing");
      if (values[i] == 0.0 || (values[i] > 0) != (values[0] > 0))
        throw SignViolation("tabulated values must be nonzero and share one sign");
    }
    Tabulated t{std::move(nodes), std::move(values), {}};
    t.m = pchip_slopes(t.x, t.y);
    ScalarCoefficient out(std::move(t), domain, reciprocal_nonintegrable);
    const auto& tab = std::get<Tabulated>(out.kind_);
    for (std::size_t i = 0; i + 1 < tab.x.size(); ++i)
      for (double f : {0.25, 0.5, 0.75}) {
        const double xi = tab.x[i] + f * (tab.x[i + 1] - tab.x[i]);
        out.check_sign(hermite(tab, i, xi), xi);
      }
    auto& tw = std::get<Tabulated>(out.kind_);
    tw.cum.assign(tw.x.size(), 0.0);
    tw.rcum.assign(tw.x.size(), 0.0);
    for (std::size_t i = 0; i + 1 < tw.x.size(); ++i) {
      tw.cum[i + 1] = tw.cum[i] + cell_integral(tw, i, tw.x[i], tw.x[i + 1], 0.0, false);
      tw.rcum[i + 1] = tw.rcum[i] + cell_integral(tw, i, tw.x[i], tw.x[i + 1], 1e-15 * (tw.x[i + 1] - tw.x[i]), true);
    }
    return out;
  }

  /// Two-column CSV (xi, value) with a header row.
  static ScalarCoefficient from_csv(const std::string& path, Domain domain = Domain::half_line,
                                    bool reciprocal_nonintegrable = true) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open coefficient table " + path);
    std::string line;
    std::getline(in, line);
    std::vector<double> xs, ys;
    int lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      std::replace(line.begin(), line.end(), ',', ' ');
      std::istringstream row(line);
      double x, y;
      if (!(row >> x >> y)) throw DataError(path + ":" + std::to_string(lineno) + ": expected two numbers");
      xs.push_back(x);
      ys.push_back(y);
    }
    return tabulated(std::move(xs), std::move(ys), domain, reciprocal_nonintegrable);
  }

  const Kind& kind() const { return kind_; }
  Domain domain() const { return domain_; }
  Sign sign() const { return sign_; }
  bool reciprocal_nonintegrable() const { return reciprocal_nonintegrable_; }

  std::string kind_name() const {
    return std::visit(
        [](const auto& k) -> std::string {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, Constant>) return "constant";
          else if constexpr (std::is_same_v<K, AffineReciprocal>)
            return k.power < 0 ? "affine_reciprocal" : "affine";
          else if constexpr (std::is_same_v<K, PowerTail>) return "power_tail";
          else return "tabulated";
        },
        kind_);
  }

  /// Closed-form kinds have analytic derivatives; the tabulated kind does not.
  bool closed_form() const { return !std::holds_alternative<Tabulated>(kind_); }

  bool bounded() const {
    if (auto* a = std::get_if<AffineReciprocal>(&kind_)) return a->power < 0;
    if (auto* p = std::get_if<PowerTail>(&kind_)) return p->alpha <= 0.0;
    return true;
  }

  double operator()(double xi) const { return eval(xi); }

  double eval(double xi) const {
    xi = check_domain(xi);
    const double v = std::visit([&](const auto& k) { return value_of(k, xi); }, kind_);
    check_sign(v, xi);
    return v;
  }

  double derivative(double xi) const {
    xi = check_domain(xi);
    return std::visit([&](const auto& k) { return derivative_of(k, xi); }, kind_);
  }

  /// Definite integral of the coefficient; closed form where available.
  double integrate(double a, double b, double tol = 1e-10) const {
    return integral(a, b, tol, false);
  }

  /// Definite integral of 1/coefficient.
  double integrate_reciprocal(double a, double b, double tol = 1e-10) const {
    return integral(a, b, tol, true);
  }

  ScalarCoefficient negated() const { return scaled(-1.0); }

  ScalarCoefficient scaled(double f) const {
    if (f == 0.0 || !std::isfinite(f)) throw DataError("scale factor must be finite and nonzero");
    Kind k = std::visit(
        [&](auto k) -> Kind {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, Constant>) k.c *= f;
          else if constexpr (std::is_same_v<K, AffineReciprocal>) k.c *= f;
          else if constexpr (std::is_same_v<K, PowerTail>) {
            k.c *= f;
            k.value0 *= f;
            k.slope0 *= f;
            for (double& p : k.poly) p *= f;
          } else {
            for (double& y : k.y) y *= f;
            for (double& m : k.m) m *= f;
            for (double& c : k.cum) c *= f;
            for (double& c : k.rcum) c /= f;
          }
          return k;
        },
        kind_);
    return ScalarCoefficient(std::move(k), domain_, reciprocal_nonintegrable_);
  }

  /// Heuristic cross-check of the declared nonintegrability of 1/|w|.
  /// Returns a warning when the declaration looks inconsistent with the data.
  std::optional<std::string> nonintegrability_warning(double radius = 1e6,
                                                      double threshold = 1e3) const {
    if (!reciprocal_nonintegrable_) return std::nullopt;
    double mass = std::abs(integrate_reciprocal(0.0, radius, 1e-6));
    if (domain_ == Domain::full_line)
      mass = std::min(mass, std::abs(integrate_reciprocal(-radius, 0.0, 1e-6)));
    if (mass > threshold) return std::nullopt;
    std::ostringstream os;
    os << "1/|w| declared non-integrable but its integral up to " << radius << " is only " << mass;
    return os.str();
  }

 private:
  ScalarCoefficient(Kind k, Domain domain, bool nonint)
      : kind_(std::move(k)), domain_(domain), reciprocal_nonintegrable_(nonint) {
    const double v = std::visit(
        [](const auto& k) -> double {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, Constant>) return k.c;
          else if constexpr (std::is_same_v<K, AffineReciprocal>) return k.c;
          else if constexpr (std::is_same_v<K, PowerTail>) return k.c;
          else return k.y.front();
        },
        kind_);
    sign_ = v > 0 ? Sign::positive : Sign::negative;
  }

  static void check_affine(double c, double a) {
    if (c == 0.0 || !std::isfinite(c) || !(a > 0.0) || !std::isfinite(a))
      throw DataError("affine coefficient needs c != 0 and a > 0");
  }

  double check_domain(double xi) const {
    if (!std::isfinite(xi)) throw DomainError("coefficient evaluated at a non-finite point");
    if (domain_ == Domain::half_line && xi < 0.0) {
      if (xi < -1e-12) throw DomainError("coefficient on the half-line evaluated at xi < 0");
      xi = 0.0;
    }
    if (auto* t = std::get_if<Tabulated>(&kind_); t && xi < t->x.front())
      throw DomainError("tabulated coefficient evaluated below its first node");
    return xi;
  }

  void check_sign(double v, double xi) const {
    const bool ok = sign_ == Sign::positive ? v > 0.0 : v < 0.0;
    if (!ok || !std::isfinite(v)) {
      std::ostringstream os;
      os << "coefficient value " << v << " at xi = " << xi << " violates its declared sign";
      throw SignViolation(os.str());
    }
  }

  static double blend(const std::array<double, 4>& p, double s) {
    return p[0] + s * (p[1] + s * (p[2] + s * p[3]));
  }
  static double blend_derivative(const std::array<double, 4>& p, double s) {
    return p[1] + s * (2.0 * p[2] + s * 3.0 * p[3]);
  }
  static double blend_antiderivative(const std::array<double, 4>& p, double s) {
    return s * (p[0] + s * (p[1] / 2.0 + s * (p[2] / 3.0 + s * p[3] / 4.0)));
  }

  // integral of x^beta over [x, y], 0 < x <= y, without cancellation
  static double power_integral(double beta, double x, double y) {
    if (y == x) return 0.0;
    const double l = std::log1p((y - x) / x);
    const double e = beta + 1.0;
    if (e == 0.0) return l;
    return std::pow(x, e) * std::expm1(e * l) / e;
  }

  static std::vector<double> pchip_slopes(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    std::vector<double> h(n - 1), d(n - 1), m(n, 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      h[i] = x[i + 1] - x[i];
      d[i] = (y[i + 1] - y[i]) / h[i];
    }
    if (n == 2) return {d[0], d[0]};
    for (std::size_t k = 1; k + 1 < n; ++k) {
      if (d[k - 1] * d[k] <= 0.0) continue;
      const double w1 = 2.0 * h[k] + h[k - 1], w2 = h[k] + 2.0 * h[k - 1];
      m[k] = (w1 + w2) / (w1 / d[k - 1] + w2 / d[k]);
    }
    auto edge = [](double h0, double h1, double d0, double d1) {
      double s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
      if ((s > 0) != (d0 > 0) || d0 == 0.0) return 0.0;
      if ((d0 > 0) != (d1 > 0) && std::abs(s) > 3.0 * std::abs(d0)) return 3.0 * d0;
      return s;
    };
    m[0] = edge(h[0], h[1], d[0], d[1]);
    m[n - 1] = edge(h[n - 2], h[n - 3], d[n - 2], d[n - 3]);
    return m;
  }

  static std::size_t cell(const Tabulated& t, double xi) {
    auto it = std::upper_bound(t.x.begin(), t.x.end(), xi);
    std::size_t i = static_cast<std::size_t>(it - t.x.begin());
    return std::min(i == 0 ? 0 : i - 1, t.x.size() - 2);
  }

  static double hermite(const Tabulated& t, std::size_t i, double xi) {
    const double h = t.x[i + 1] - t.x[i], s = (xi - t.x[i]) / h;
    const double s2 = s * s, s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * t.y[i] + (s3 - 2 * s2 + s) * h * t.m[i] +
           (-2 * s3 + 3 * s2) * t.y[i + 1] + (s3 - s2) * h * t.m[i + 1];
  }

  static double hermite_derivative(const Tabulated& t, std::size_t i, double xi) {
    const double h = t.x[i + 1] - t.x[i], s = (xi - t.x[i]) / h;
    const double s2 = s * s;
    return ((6 * s2 - 6 * s) * t.y[i] + (-6 * s2 + 6 * s) * t.y[i + 1]) / h +
           (3 * s2 - 4 * s + 1) * t.m[i] + (3 * s2 - 2 * s) * t.m[i + 1];
  }

  static double value_of(const Constant& k, double) { return k.c; }
  static double value_of(const AffineReciprocal& k, double xi) {
    const double r = k.a + std::abs(xi);
    return k.power < 0 ? k.c / r : k.c * r;
  }
  static double value_of(const PowerTail& k, double xi) {
    const double r = std::abs(xi);
    return r <= 1.0 ? blend(k.poly, r) : k.c * std::pow(r, k.alpha);
  }
  static double value_of(const Tabulated& k, double xi) {
    if (xi >= k.x.back()) return k.y.back();
    return hermite(k, cell(k, xi), xi);
  }

  static double sgn(double xi) { return xi < 0.0 ? -1.0 : 1.0; }
  static double derivative_of(const Constant&, double) { return 0.0; }
  static double derivative_of(const AffineReciprocal& k, double xi) {
    const double r = k.a + std::abs(xi);
    return sgn(xi) * (k.power < 0 ? -k.c / (r * r) : k.c);
  }
  static double derivative_of(const PowerTail& k, double xi) {
    const double r = std::abs(xi);
    return sgn(xi) * (r <= 1.0 ? blend_derivative(k.poly, r)
                               : k.c * k.alpha * std::pow(r, k.alpha - 1.0));
  }
  static double derivative_of(const Tabulated& k, double xi) {
    if (xi >= k.x.back()) return 0.0;
    return hermite_derivative(k, cell(k, xi), xi);
  }

  // Integral over [r0, r1] with 0 <= r0 <= r1 of the half-line profile (or its reciprocal).
  double radial_integral(double r0, double r1, double tol, bool recip) const {
    if (r0 == r1) return 0.0;
    return std::visit(
        [&](const auto& k) -> double {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, Constant>) {
            return recip ? (r1 - r0) / k.c : k.c * (r1 - r0);
          } else if constexpr (std::is_same_v<K, AffineReciprocal>) {
            const double log_part = std::log1p((r1 - r0) / (k.a + r0));
            const double lin_part = (r1 - r0) * (k.a + 0.5 * (r0 + r1));
            const bool use_log = (k.power < 0) != recip;
            if (use_log) return recip ? log_part / k.c : k.c * log_part;
            return recip ? lin_part / k.c : k.c * lin_part;
          } else if constexpr (std::is_same_v<K, PowerTail>) {
            double total = 0.0;
            const double b0 = std::min(r1, 1.0);
            if (r0 < b0) {
              if (!recip) {
                total += blend_antiderivative(k.poly, b0) - blend_antiderivative(k.poly, r0);
              } else {
                auto f = [&](double s) { return 1.0 / blend(k.poly, s); };
                total += quad::integrate(f, r0, b0, 0.5 * tol).value;
              }
            }
            const double t0 = std::max(r0, 1.0);
            if (t0 < r1) {
              total += recip ? power_integral(-k.alpha, t0, r1) / k.c
                             : k.c * power_integral(k.alpha, t0, r1);
            }
            return total;
          } else {
            return 0.0;  // tabulated is handled on signed coordinates
          }
        },
        kind_);
  }

  // Integral over [a, b] inside cell i; the Hermite cubic itself is integrated exactly by Gauss-Kronrod.
  static double cell_integral(const Tabulated& t, std::size_t i, double a, double b, double tol, bool recip) {
    if (!recip) return quad::gk15([&](double xi) { return hermite(t, i, xi); }, a, b);
    return quad::integrate([&](double xi) { return 1.0 / hermite(t, i, xi); }, a, b, tol).value;
  }

  static double primitive(const Tabulated& t, double xi, double tol, bool recip) {
    const auto& c = recip ? t.rcum : t.cum;
    if (xi >= t.x.back()) return c.back() + (xi - t.x.back()) * (recip ? 1.0 / t.y.back() : t.y.back());
    const std::size_t i = cell(t, xi);
    return c[i] + cell_integral(t, i, t.x[i], xi, tol, recip);
  }

  double tabulated_integral(const Tabulated& t, double a, double b, double tol, bool recip) const {
    if (b <= t.x.back() && cell(t, a) == cell(t, b)) return cell_integral(t, cell(t, a), a, b, tol, recip);
    if (a >= t.x.back()) return (b - a) * (recip ? 1.0 / t.y.back() : t.y.back());
    return primitive(t, b, 0.5 * tol, recip) - primitive(t, a, 0.5 * tol, recip);
  }

  double integral(double a, double b, double tol, bool recip) const {
    if (a > b) return -integral(b, a, tol, recip);
    a = check_domain(a);
    b = check_domain(b);
    if (auto* t = std::get_if<Tabulated>(&kind_)) return tabulated_integral(*t, a, b, tol, recip);
    if (a >= 0.0) return radial_integral(a, b, tol, recip);
    if (b <= 0.0) return radial_integral(-b, -a, tol, recip);
    return radial_integral(0.0, -a, 0.5 * tol, recip) + radial_integral(0.0, b, 0.5 * tol, recip);
  }

  Kind kind_;
  Domain domain_;
  Sign sign_ = Sign::positive;
  bool reciprocal_nonintegrable_ = true;
};

/// Matrix-valued coefficient with per-entry value and derivative.
class MatrixCoefficient {
 public:
  struct Entry {
    std::function<Complex(double)> value;
    std::function<Complex(double)> derivative;
  };
  struct Flags {
    bool hermitian = false;
    bool positive_definite = false;
    bool diagonal = false;
    bool constant = false;
  };

  static Entry entry(const ScalarCoefficient& c) {
    return {[c](double xi) { return Complex(c(xi)); },
            [c](double xi) { return Complex(c.derivative(xi)); }};
  }
  static Entry entry(Complex c) {
    return {[c](double) { return c; }, [](double) { return Complex(0.0); }};
  }

  MatrixCoefficient() = default;

  MatrixCoefficient(int n, std::vector<Entry> entries, Flags flags)
      : n_(n), entries_(std::move(entries)), flags_(flags) {
    if (n <= 0 || entries_.size() != static_cast<std::size_t>(n) * n)
      throw DimensionError("matrix coefficient needs n*n entries");
    for (auto& e : entries_) {
      if (!e.value) e = entry(Complex(0.0));
      if (!e.derivative) e.derivative = [](double) { return Complex(0.0); };
    }
  }

  static MatrixCoefficient constant(const CMatrix& m) {
    if (m.rows() != m.cols() || m.rows() == 0) throw DimensionError("constant coefficient must be square");
    const int n = static_cast<int>(m.rows());
    std::vector<Entry> es;
    bool diag = true;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        es.push_back(entry(m(i, j)));
        if (i != j && m(i, j) != Complex(0.0)) diag = false;
      }
    Flags f;
    f.constant = true;
    f.diagonal = diag;
    f.hermitian = linalg::is_hermitian(m);
    if (f.hermitian) {
      Eigen::SelfAdjointEigenSolver<CMatrix> es2(m, Eigen::EigenvaluesOnly);
      f.positive_definite = es2.eigenvalues()(0) > 0.0;
    }
    return MatrixCoefficient(n, std::move(es), f);
  }

  static MatrixCoefficient diagonal(const std::vector<ScalarCoefficient>& d) {
    const int n = static_cast<int>(d.size());
    std::vector<Entry> es(static_cast<std::size_t>(n) * n);
    bool positive = true;
    for (int i = 0; i < n; ++i) {
      es[i * n + i] = entry(d[i]);
      positive = positive && d[i].sign() == Sign::positive;
    }
    return MatrixCoefficient(n, std::move(es), Flags{true, positive, true, false});
  }

  int n() const { return n_; }
  const Flags& flags() const { return flags_; }

  CMatrix operator()(double xi) const { return eval(xi); }

  CMatrix eval(double xi) const {
    CMatrix m(n_, n_);
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) m(i, j) = entries_[i * n_ + j].value(xi);
    return m;
  }

  CMatrix derivative(double xi) const {
    CMatrix m(n_, n_);
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) m(i, j) = entries_[i * n_ + j].derivative(xi);
    return m;
  }

  /// Checks the Hermitian / positive-definite flags at the probe points.
  void validate(const std::vector<double>& probe) const {
    for (double xi : probe) {
      const CMatrix m = eval(xi);
      if (!m.allFinite()) throw DataError("matrix coefficient is not finite at xi = " + std::to_string(xi));
      if (flags_.hermitian && !linalg::is_hermitian(m))
        throw DataError("matrix coefficient is not Hermitian at xi = " + std::to_string(xi));
      if (flags_.positive_definite) {
        Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (m + m.adjoint()), Eigen::EigenvaluesOnly);
        if (!(es.eigenvalues()(0) > 0.0))
          throw DataError("matrix coefficient is not positive definite at xi = " + std::to_string(xi));
      }
    }
  }

 private:
  int n_ = 0;
  std::vector<Entry> entries_;
  Flags flags_;
};

}  // namespace phs
