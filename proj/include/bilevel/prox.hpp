#pragma once

#include "bilevel/errors.hpp"

#include <functional>

namespace bilevel {

/**
 * A closed convex function whose proximal operator is exact.
 *
 * All domains used by the solvers are compact, so every instance carries the
 * diameter of its domain. The two optional members give exact answers that the
 * generic interface can only approximate: `linear_minimizer` enables the
 * running lower bound of the accelerated method for merely convex problems, and
 * `prox_residual` evaluates (v - prox(v - s g, s)) / s without the cancellation
 * that the direct formula suffers when s is tiny.
 */
struct ProxFriendlyFn {
  Index dim = 0;
  /// Function value; +infinity outside the domain.
  std::function<double(const Vec&)> value;
  /// prox(v, s) = argmin_u { s * P(u) + 0.5 * ||u - v||^2 }.
  std::function<Vec(const Vec&, double)> prox;
  /// max ||u - v|| over the domain.
  double diameter = 0.0;
  /// Exact domain membership.
  std::function<bool(const Vec&)> contains;
  /// Optional: argmin_u { <g, u> + w * P(u) } for w > 0.
  std::function<Vec(const Vec&, double)> linear_minimizer;
  /// Optional: (v - prox(v - s g, s)) / s evaluated stably.
  std::function<Vec(const Vec&, const Vec&, double)> prox_residual;
};

/// Indicator of the box [lo, hi]; prox is coordinatewise clamping.
ProxFriendlyFn box_indicator(const Vec& lo, const Vec& hi);

/// The function c * P for c > 0.
ProxFriendlyFn scaled(const ProxFriendlyFn& p, double c);

/// The separable sum P(u) + Q(v) acting on the concatenation (u, v).
ProxFriendlyFn product(const ProxFriendlyFn& p, const ProxFriendlyFn& q);

/// (v - prox(v - s g, s)) / s, through the stable member when available.
Vec prox_residual(const ProxFriendlyFn& p, const Vec& v, const Vec& g, double s);

/// argmin_u { <g, u> + w P(u) }; throws CapabilityError when unsupported.
Vec linear_minimizer(const ProxFriendlyFn& p, const Vec& g, double w);

/// Clamps v into [lo, hi] coordinatewise.
Vec clamp(const Vec& v, const Vec& lo, const Vec& hi);

}  // namespace bilevel
