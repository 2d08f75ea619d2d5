#pragma once

#include <Eigen/Dense>

#include <chrono>
#include <stdexcept>
#include <string>

namespace bilevel {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A documented precondition was violated (domain, dimension or sign).
class InputError : public Error {
 public:
  using Error::Error;
};

/// A non-finite value appeared while iterating. Carries the last finite iterate.
class NumericalFailure : public Error {
 public:
  NumericalFailure(const std::string& what, Vec last_iterate);
  const Vec& last_iterate() const { return last_; }

 private:
  Vec last_;
};

/// An iteration cap was exhausted before the termination test passed.
/// Carries the best iterate seen so far.
class NonConvergence : public Error {
 public:
  NonConvergence(const std::string& what, Vec best_iterate);
  const Vec& best_iterate() const { return best_; }

 private:
  Vec best_;
};

/// A wall clock deadline passed before the termination test passed.
class DeadlineExceeded : public NonConvergence {
 public:
  using NonConvergence::NonConvergence;
};

/// Wall clock limit shared by the iterative solvers; the default never expires.
struct Deadline {
  std::chrono::steady_clock::time_point at = std::chrono::steady_clock::time_point::max();

  /// A deadline `seconds` from now.
  static Deadline in_seconds(double seconds);
  bool expired() const { return std::chrono::steady_clock::now() >= at; }
};

/// An optional capability (for example linear minimization) is not provided.
class CapabilityError : public Error {
 public:
  using Error::Error;
};

/// The high accuracy lower level value oracle could not agree with itself.
class OracleFailure : public Error {
 public:
  using Error::Error;
};

/// Malformed text input; reports the 1-based line number, or 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, long line);
  long line() const { return line_; }

 private:
  long line_;
};

/// Throws InputError when the vector contains NaN or infinite entries.
void require_finite(const Vec& v, const char* name);

/// Throws InputError when the dimension differs from the expected one.
void require_size(const Vec& v, Index expected, const char* name);

}  // namespace bilevel
