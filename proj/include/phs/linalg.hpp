#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <limits>
#include <thread>
#include <vector>

#include "phs/error.hpp"

namespace phs {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

namespace linalg {

/// Singular values in decreasing order; empty matrices give an empty vector.
inline RVector singular_values(const CMatrix& m) {
  if (m.size() == 0) return RVector();
  Eigen::JacobiSVD<CMatrix> svd(m);
  return svd.singularValues();
}

inline double sigma_max(const CMatrix& m) {
  const RVector s = singular_values(m);
  return s.size() ? s(0) : 0.0;
}

inline double sigma_min(const CMatrix& m) {
  const RVector s = singular_values(m);
  return s.size() ? s(s.size() - 1) : 0.0;
}

/// Numerical rank with relative threshold `rel` against the largest singular value.
inline int rank(const CMatrix& m, double rel = 1e-10) {
  const RVector s = singular_values(m);
  if (s.size() == 0 || s(0) == 0.0) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > rel * s(0)) ++r;
  return r;
}

inline double norm2(const CMatrix& m) { return sigma_max(m); }

inline bool is_hermitian(const CMatrix& m, double rel = 1e-12) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(norm2(m), std::numeric_limits<double>::min());
  return (m - m.adjoint()).norm() <= rel * scale;
}

/// Square root and inverse square root of a Hermitian positive definite matrix.
struct HermitianRoot {
  CMatrix root;
  CMatrix inv_root;
  RVector eigenvalues;  // ascending
  CMatrix eigenvectors;
};

inline HermitianRoot hermitian_sqrt(const CMatrix& h) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h);
  if (es.info() != Eigen::Success) throw DataError("eigendecomposition of H failed");
  const RVector& ev = es.eigenvalues();
  if (ev.size() && ev(0) <= 0.0) throw DataError("H is not positive definite");
  HermitianRoot r;
  r.eigenvalues = ev;
  r.eigenvectors = es.eigenvectors();
  const RVector sq = ev.cwiseSqrt();
  r.root = r.eigenvectors * sq.cast<Complex>().asDiagonal() * r.eigenvectors.adjoint();
  r.inv_root = r.eigenvectors * sq.cwiseInverse().cast<Complex>().asDiagonal() *
               r.eigenvectors.adjoint();
  return r;
}

/// Largest generalized eigenvalue range of the Hermitian pencil (a, b), b positive definite.
struct PencilBounds {
  double min = 0.0;
  double max = 0.0;
};

inline PencilBounds pencil_bounds(const CMatrix& a, const CMatrix& b) {
  // Symmetrize to suppress rounding asymmetry before handing to the solver.
  const CMatrix as = 0.5 * (a + a.adjoint());
  const CMatrix bs = 0.5 * (b + b.adjoint());
  Eigen::GeneralizedSelfAdjointEigenSolver<CMatrix> es(as, bs, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw DataError("generalized eigenproblem failed");
  const RVector& ev = es.eigenvalues();
  return {ev.minCoeff(), ev.maxCoeff()};
}

/// Matrix exponential by scaling and squaring with the diagonal Padé(6) approximant.
inline CMatrix expm(const CMatrix& a) {
  const Eigen::Index n = a.rows();
  if (n == 0) return a;
  const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm1 > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm1 / 0.5)));
  const CMatrix x = a / std::ldexp(1.0, squarings);

  // c_k = (2q-k)! q! / ((2q)! k! (q-k)!), q = 6
  constexpr double c[7] = {1.0,
                           0.5,
                           5.0 / 44.0,
                           1.0 / 66.0,
                           1.0 / 792.0,
                           1.0 / 15840.0,
                           1.0 / 665280.0};
  const CMatrix id = CMatrix::Identity(n, n);
  const CMatrix x2 = x * x;
  const CMatrix x4 = x2 * x2;
  const CMatrix x6 = x4 * x2;
  const CMatrix even = c[0] * id + c[2] * x2 + c[4] * x4 + c[6] * x6;
  const CMatrix odd = x * (c[1] * id + c[3] * x2 + c[5] * x4);
  CMatrix r = (even - odd).partialPivLu().solve(even + odd);
  for (int i = 0; i < squarings; ++i) r = r * r;
  return r;
}

}  // namespace linalg

/// Worker count: PHS_THREADS when set, else hardware concurrency.
inline unsigned worker_count() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("PHS_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) hw = std::min<unsigned>(hw, static_cast<unsigned>(v));
  }
  return hw;
}

/// Runs fn(i) for i in [0, count) split into contiguous blocks over worker threads.
template <class Fn>
void parallel_for(std::size_t count, Fn&& fn) {
  const unsigned workers = static_cast<unsigned>(
      std::min<std::size_t>(worker_count(), std::max<std::size_t>(1, count / 64)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  const std::size_t block = (count + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        const std::size_t lo = w * block, hi = std::min(count, lo + block);
        for (std::size_t i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace phs
