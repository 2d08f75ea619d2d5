#pragma once

#include "bilevel/errors.hpp"
#include "bilevel/prox.hpp"

#include <functional>
#include <vector>

namespace bilevel {

/**
 * min Psi(x) = phi(x) + P(x) with phi convex (sigma-strongly convex when
 * sigma > 0) with an L-Lipschitz gradient on dom P, and dom P compact.
 */
struct CompositeConvexProblem {
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> gradient;
  double lipschitz = 0.0;
  double sigma = 0.0;
  ProxFriendlyFn P;
};

/// Oracle calls made by one solve.
struct ApgCounts {
  long grad = 0;
  long prox = 0;
};

struct ApgResult {
  Vec point;
  /// Certified upper bound on Psi(point) - Psi*.
  double gap_bound = 0.0;
  long iterations = 0;
  ApgCounts calls;
  /// False when the run stopped at the worst case iteration cap, in which case
  /// the gap bound rests on the complexity theorem rather than a measurement.
  bool certified = false;
};

struct ApgOptions {
  /// Hard safety cap; exceeding it raises NonConvergence.
  long max_iterations = 100000000;
  /// Raises DeadlineExceeded once passed.
  Deadline deadline;
  /// Called after every iteration with (k + 1, x^{k+1}, Psi(x^{k+1}), lower bound).
  /// The lower bound is -infinity when no certificate is available.
  std::function<void(long, const Vec&, double, double)> observer;
};

/// One linearization phi(y) + <grad phi(y), . - y> of the smooth part.
struct Linearization {
  double phi = 0.0;
  Vec grad;
  Vec point;
};

/**
 * Running form of the weighted linearization lower bound.
 *
 * With weights w_i = (i + 2) / 2 the bound is
 *   (1 / W) min_x sum_i w_i (phi(y_i) + <grad_i, x - y_i> + P(x)),  W = sum_i w_i,
 * and only sum w_i grad_i, sum w_i (phi(y_i) - <grad_i, y_i>) and W are stored.
 */
class LinearizationBound {
 public:
  explicit LinearizationBound(Index dim);
  void add(double weight, double phi_y, const Vec& grad_y, const Vec& y);
  /// Requires P.linear_minimizer; throws CapabilityError otherwise.
  double value(const ProxFriendlyFn& P) const;
  double total_weight() const { return weight_; }

 private:
  Vec grad_sum_;
  double const_sum_ = 0.0;
  double weight_ = 0.0;
};

/// Lower bound on Psi* from the linearizations at y^0, ..., y^k with the
/// accelerated method's weights (i + 2) / 2.
double lower_bound_certificate(const std::vector<Linearization>& history, const ProxFriendlyFn& P);

/// Worst case iteration count ceil(D sqrt(2 L / tol)) for the merely convex method.
long apg_convex_cap(double lipschitz, double diameter, double tol);

/// Worst case iteration count for the strongly convex method.
long apg_strongly_convex_cap(double lipschitz, double sigma, double diameter, double tol);

/// Accelerated method for sigma = 0 with the duality gap termination test.
ApgResult apg_convex(const CompositeConvexProblem& prob, double tol, const Vec& x0,
                     const ApgOptions& options = {});

/// Accelerated method for sigma > 0 with the prox residual termination test.
ApgResult apg_strongly_convex(const CompositeConvexProblem& prob, double tol, const Vec& x0,
                              const ApgOptions& options = {});

/// Dispatches on prob.sigma.
ApgResult apg_solve(const CompositeConvexProblem& prob, double tol, const Vec& x0,
                    const ApgOptions& options = {});

}  // namespace bilevel
