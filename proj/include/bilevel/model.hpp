#pragma once

#include "bilevel/errors.hpp"
#include "bilevel/prox.hpp"

#include <functional>
#include <string>

namespace bilevel {

/**
 * A smooth function of the two blocks (x, y).
 *
 * `lipschitz_grad` bounds the Lipschitz constant of the joint gradient and
 * `lipschitz_val` bounds the Lipschitz constant of the value on the domain.
 */
struct SmoothFn {
  std::function<double(const Vec& x, const Vec& y)> value;
  /// Writes the partial gradients into gx and gy (resized by the callee).
  std::function<void(const Vec& x, const Vec& y, Vec& gx, Vec& gy)> gradient;
  double lipschitz_grad = 0.0;
  double lipschitz_val = 0.0;
};

/**
 * The lower level constraint map g(x, z) with l components.
 *
 * `jacobian` returns the l x (n + m) matrix whose rows are the component
 * gradients. `jacobian_transpose_times` is an optional fast path for
 * J(x, z)^T v split into its x and z parts.
 */
struct ConstraintMap {
  Index dim = 0;
  std::function<Vec(const Vec& x, const Vec& z)> value;
  std::function<Mat(const Vec& x, const Vec& z)> jacobian;
  std::function<void(const Vec& x, const Vec& z, const Vec& v, Vec& gx, Vec& gz)>
      jacobian_transpose_times;
  double lipschitz_val = 0.0;   ///< Lipschitz constant of g on the domain.
  double lipschitz_grad = 0.0;  ///< Lipschitz constant of the Jacobian.
  double sup_norm = 0.0;        ///< Upper bound on ||g(x, z)|| over the domain.
};

/// J(x, z)^T v through the fast path when present, otherwise the full Jacobian.
void jacobian_transpose_times(const ConstraintMap& g, const Vec& x, const Vec& z, const Vec& v,
                              Vec& gx, Vec& gz);

/// Problem-level constants that enter the complexity bounds and the KKT bounds.
struct ProblemConstants {
  double D_x = 0.0;         ///< Diameter of the upper domain.
  double D_y = 0.0;         ///< Diameter of the lower domain.
  double f_hi = 0.0;        ///< Upper bound on f over the domain.
  double f_low = 0.0;       ///< Lower bound on f over the domain.
  double tf_low = 0.0;      ///< Lower bound on the lower level objective.
  double tf_star_hi = 0.0;  ///< Upper bound on the lower level value function.
  double g_hi = 0.0;        ///< Upper bound on ||g|| over the domain.
  double slater_G = 0.0;    ///< Uniform strict feasibility margin of the lower level.

  /// Throws InputError when a constant is non-finite or the pairs are inverted.
  void validate() const;
};

/**
 * min f1(x, y) + f2(x) subject to y minimizing tf1(x, z) + tf2(z) over
 * g(x, z) <= 0. The domains of f2 and tf2 are compact; tf1(x, .) is
 * sigma-strongly convex (sigma = 0 allowed).
 */
struct BilevelProblem {
  std::string name;
  Index n = 0;  ///< Dimension of x.
  Index m = 0;  ///< Dimension of y and z.
  SmoothFn f1;
  ProxFriendlyFn f2;
  SmoothFn tf1;
  ProxFriendlyFn tf2;
  ConstraintMap g;
  double sigma = 0.0;
  ProblemConstants constants;
  /// Optional exact solver of the lower level value at x, used by the KKT oracle.
  std::function<double(const Vec& x)> lower_value_solver;

  /// Checks dimensions, finiteness of constants and bounded domains.
  void validate() const;
  double f(const Vec& x, const Vec& y) const { return f1.value(x, y) + f2.value(x); }
  double tf(const Vec& x, const Vec& z) const { return tf1.value(x, z) + tf2.value(z); }
};

/// Lower level multipliers; kept componentwise nonnegative.
using Multipliers = Vec;

/// ||[lam + mu g]_+||^2.
double clipped_sq_norm(const Vec& lam, double mu, const Vec& g_val);

/// tf(x, z) + ||[lam + mu g(x, z)]_+||^2 / (2 rho mu).
double eval_lower_al(const BilevelProblem& prob, const Vec& x, const Vec& z,
                     const Multipliers& lam, double rho, double mu);

/// f(x, y) + rho tf(x, y) + ||[lam + mu g(x, y)]_+||^2 / (2 mu)
///        - rho tf(x, z) - ||[lam + mu g(x, z)]_+||^2 / (2 mu).
double eval_minimax_lagrangian(const BilevelProblem& prob, const Vec& x, const Vec& y,
                               const Vec& z, const Multipliers& lam, double rho, double mu);

/// [lam + mu g_val]_+ componentwise.
Multipliers update_multiplier(const Multipliers& lam, double mu, const Vec& g_val);

/// Smoothness constant of the minimax coupling for penalty parameters (rho, mu).
double lipschitz_outer(const BilevelProblem& prob, double rho, double mu, double lam_norm);

/// Smoothness constant of the lower augmented Lagrangian in z.
double lipschitz_lower(const BilevelProblem& prob, double rho, double mu, double lam_norm);

/// Analytic constants for box domains and an affine constraint A x + B z - b.
struct BoxAffineConstants {
  double D_x = 0.0;
  double D_y = 0.0;
  double g_hi = 0.0;   ///< Coordinatewise worst case bound on ||A x + B z - b||.
  double L_g = 0.0;    ///< Spectral norm of [A B].
};

BoxAffineConstants box_affine_constants(const Vec& x_lo, const Vec& x_hi, const Vec& y_lo,
                                        const Vec& y_hi, const Mat& A, const Mat& B,
                                        const Vec& b);

/// Largest spectral norm of a matrix (exact, by singular values).
double spectral_norm(const Mat& M);

}  // namespace bilevel
