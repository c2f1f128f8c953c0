#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace lqteam {

/// Base class of every error thrown by the library. Messages are prefixed
/// with the module and check that failed, e.g. "riccati.dare_solve: ...".
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent problem data (dimension mismatch, bad schema,
/// violated precondition such as stabilizability).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Bad invocation: missing file, unreadable output path.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure failed: singular system, non-convergence.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what, double last_residual = 0.0,
                          std::vector<double> series = {})
      : Error(what), last_residual_(last_residual), series_(std::move(series)) {}

  double last_residual() const { return last_residual_; }
  const std::vector<double>& series() const { return series_; }

 private:
  double last_residual_;
  std::vector<double> series_;
};

}  // namespace lqteam
