#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dirackit {

/// Base class of every error thrown by the library.
class error : public std::runtime_error {
 public:
  explicit error(const std::string& what) : std::runtime_error(what) {}
};

/// A precondition on arguments was violated (empty window, bad index set, ...).
class invalid_argument_error : public error {
 public:
  using error::error;
};

/// Operands live on different grids, or a requested subgrid is not aligned.
class grid_mismatch_error : public error {
 public:
  using error::error;
};

/// The operation is outside the supported domain (e.g. conv_power(f, 0)).
class unsupported_operation_error : public error {
 public:
  using error::error;
};

/// Non-finite values appeared, or an argument drives the solver out of range.
class numeric_range_error : public error {
 public:
  using error::error;
};

/// A linear system is too ill-conditioned to trust.
class conditioning_error : public error {
 public:
  conditioning_error(const std::string& what, double estimate)
      : error(what), condition_estimate(estimate) {}
  double condition_estimate = 0.0;
};

/// Supplied data contradicts the known part of the problem.
class inconsistent_data_error : public error {
 public:
  inconsistent_data_error(const std::string& what, double residual_)
      : error(what), residual(residual_) {}
  double residual = 0.0;
};

/// An iteration failed to reach its tolerance; carries the mismatch history.
class convergence_error : public error {
 public:
  convergence_error(const std::string& what, std::vector<double> history_)
      : error(what), history(std::move(history_)) {}
  std::vector<double> history;
};

namespace detail {

/// Rethrow a caught library error with a stage prefix, preserving its type
/// for the concrete classes that carry payloads.
[[noreturn]] inline void rethrow_tagged(const error& e, const std::string& stage) {
  const std::string msg = stage + ": " + e.what();
  if (auto* c = dynamic_cast<const conditioning_error*>(&e))
    throw conditioning_error(msg, c->condition_estimate);
  if (auto* i = dynamic_cast<const inconsistent_data_error*>(&e))
    throw inconsistent_data_error(msg, i->residual);
  if (auto* v = dynamic_cast<const convergence_error*>(&e))
    throw convergence_error(msg, v->history);
  if (dynamic_cast<const grid_mismatch_error*>(&e)) throw grid_mismatch_error(msg);
  if (dynamic_cast<const unsupported_operation_error*>(&e))
    throw unsupported_operation_error(msg);
  if (dynamic_cast<const numeric_range_error*>(&e)) throw numeric_range_error(msg);
  if (dynamic_cast<const invalid_argument_error*>(&e)) throw invalid_argument_error(msg);
  throw error(msg);
}

}  // namespace detail
}  // namespace dirackit
