#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <stdexcept>
#include <string>
#include <utility>

namespace phs {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the declared domain of a coefficient, map or grid.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A sign-declared coefficient evaluated to zero or to the wrong sign.
class SignViolation : public Error {
 public:
  using Error::Error;
};

/// Shapes of matrices or states do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Adaptive quadrature could not reach the requested tolerance.
class QuadratureError : public Error {
 public:
  QuadratureError(const std::string& what, double best_estimate, double achieved_error)
      : Error(what), best_estimate_(best_estimate), achieved_error_(achieved_error) {}

  double best_estimate() const noexcept { return best_estimate_; }
  double achieved_error() const noexcept { return achieved_error_; }

 private:
  double best_estimate_;
  double achieved_error_;
};

/// Interpolation requested outside a grid whose tail rule cannot supply values.
class ExtrapolationError : public Error {
 public:
  using Error::Error;
};

/// Invalid system data: non-Hermitian P1, rank-deficient boundary matrices, ...
class DataError : public Error {
 public:
  using Error::Error;
};

/// The boundary conditions do not produce a generator; carries a short reason.
class ClassificationError : public Error {
 public:
  using Error::Error;
};

/// Pointwise diagonalization failed (eigenvalue crossing, degenerate pencil).
class DiagonalizationError : public Error {
 public:
  DiagonalizationError(const std::string& what, double left, double right)
      : Error(what), left_(left), right_(right) {}

  /// Interval that needs refinement.
  double left() const noexcept { return left_; }
  double right() const noexcept { return right_; }

 private:
  double left_;
  double right_;
};

/// Malformed configuration; `where` names the offending line or field.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, std::string where)
      : Error(where.empty() ? what : where + ": " + what), where_(std::move(where)) {}

  const std::string& where() const noexcept { return where_; }

 private:
  std::string where_;
};

namespace detail {
inline std::mutex& warning_mutex() {
  static std::mutex m;
  return m;
}
inline std::function<void(const std::string&)>& warning_handler() {
  static std::function<void(const std::string&)> h = [](const std::string& msg) {
    std::cerr << "phs: warning: " << msg << '\n';
  };
  return h;
}
}  // namespace detail

/// Replaces the warning sink (stderr by default); returns the previous one.
inline std::function<void(const std::string&)> set_warning_handler(
    std::function<void(const std::string&)> handler) {
  std::lock_guard lock(detail::warning_mutex());
  return std::exchange(detail::warning_handler(), std::move(handler));
}

inline void warn(const std::string& msg) {
  std::lock_guard lock(detail::warning_mutex());
  if (detail::warning_handler()) detail::warning_handler()(msg);
}

}  // namespace phs
