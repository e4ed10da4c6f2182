#ifndef ECSKIT_ERRORS_HPP
#define ECSKIT_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace ecs {

/// Metric matrix is numerically singular (condition number above the abort
/// threshold) at a queried chart point.
struct degenerate_metric_error : std::runtime_error {
  explicit degenerate_metric_error(const std::string& what)
      : std::runtime_error(what) {}
};

/// Non-finite values coming out of an evaluator, or a point outside the
/// evaluator's domain.
struct evaluation_domain_error : std::runtime_error {
  explicit evaluation_domain_error(const std::string& what)
      : std::runtime_error(what) {}
};

/// Input data fails its validity contract (caller error, CLI exit code 2).
struct invalid_input_error : std::runtime_error {
  explicit invalid_input_error(const std::string& what)
      : std::runtime_error(what) {}
};

/// Kernel-dimension decision could not be made: the singular-value gap
/// between kept and dropped values is too small.  Carries both candidates.
struct ambiguous_dimension_error : std::runtime_error {
  int dim_low;
  int dim_high;
  ambiguous_dimension_error(const std::string& what, int lo, int hi)
      : std::runtime_error(what), dim_low(lo), dim_high(hi) {}
};

/// A numerical search did not converge.  The message carries diagnostics.
struct solver_failure : std::runtime_error {
  explicit solver_failure(const std::string& what)
      : std::runtime_error(what) {}
};

/// Two internally redundant computations disagree: engine bug, not bad input.
struct internal_consistency_error : std::logic_error {
  explicit internal_consistency_error(const std::string& what)
      : std::logic_error(what) {}
};

}  // namespace ecs

#endif
