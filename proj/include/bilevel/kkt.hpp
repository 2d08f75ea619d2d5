#pragma once

#include "bilevel/model.hpp"

#include <utility>

namespace bilevel {

/// Multipliers attached to the final point: lambda_y for g(x, y), lambda_z for g(x, z).
struct RecoveredMultipliers {
  Vec lambda_y;
  Vec lambda_z;
};

/**
 * lambda_y = [lamK + muK g_y]_+ and lambda_z = [lamK + muK g_z]_+ / rhoK.
 *
 * @param lamK  multiplier of the last subproblem (nonnegative)
 * @param muK   its mu parameter
 * @param rhoK  its rho parameter
 * @param g_y   g(x, y) at the output
 * @param g_z   g(x, z) at the output
 */
RecoveredMultipliers recover_multipliers(const Vec& lamK, double muK, double rhoK, const Vec& g_y,
                                         const Vec& g_z);

/// Configuration of the lower level value oracle.
struct LowerValueOracle {
  enum class Method {
    Auto,                ///< The registered exact solver when present, otherwise escalation.
    Registered,          ///< Only the registered solver; CapabilityError when absent.
    AugmentedLagrangian  ///< Always the escalation scheme.
  };
  double tolerance = 1e-9;
  Method method = Method::Auto;
  int max_escalations = 40;
  /// Initial mu of the escalation; doubled at each step.
  double mu0 = 1.0;
};

/// Outcome of a value oracle call with its provenance.
struct LowerValue {
  double value = 0.0;
  Vec minimizer;  ///< Approximate minimizer when the escalation scheme ran.
  bool registered = false;
  int escalations = 0;
};

/**
 * The optimal value of min_z { tf(x, z) : g(x, z) <= 0 }.
 *
 * The escalation scheme minimizes the lower augmented Lagrangian with rho = 1
 * by the accelerated method, then updates lambda <- [lambda + mu g]_+ and
 * doubles mu. It stops when two successive values agree to the tolerance and
 * the constraint violation is below the tolerance.
 *
 * @throws OracleFailure when the escalation does not settle within its cap
 */
LowerValue lower_optimal_value_detail(const BilevelProblem& prob, const Vec& x,
                                      const LowerValueOracle& oracle = {});

/// Value only.
double lower_optimal_value(const BilevelProblem& prob, const Vec& x,
                           const LowerValueOracle& oracle = {});

/**
 * Residuals of the approximate KKT conditions at (x, y) with the auxiliary
 * point z and the multipliers recovered from the last subproblem.
 *
 * Distances to subdifferentials of the nonsmooth parts are measured by
 * proximal gradient residuals with step 1 / L_K.
 */
struct KktReport {
  double stationarity_xy = 0.0;
  double stationarity_z = 0.0;
  double feas_z = 0.0;   ///< ||[g(x, z)]_+||.
  double compl_z = 0.0;  ///< |<lambda_z, g(x, z)>|.
  double feas_y = 0.0;   ///< ||[g(x, y)]_+||.
  double compl_y = 0.0;  ///< |<lambda_y, g(x, y)>|, the pairing of the KKT definition.
  double compl_y_cross = 0.0;  ///< |<lambda_y, g(x, z)>|, the pairing of the final bound.
  double value_gap = 0.0;      ///< |tf(x, y) - tf*(x)|.
  double lower_gap = 0.0;      ///< tf(x, y) - tf*(x), signed.
  double tf_star = 0.0;
  Vec lambda_y;
  Vec lambda_z;
  double eps_used = 0.0;
  double rho_used = 0.0;
  double mu_used = 0.0;
  double step_used = 0.0;

  /// Largest of the seven residuals of the definition (compl_y with its own pairing).
  double max_residual() const;
};

/**
 * @param prob  the bilevel problem
 * @param x,y,z the output point and its auxiliary lower point
 * @param lamK  multiplier of the last subproblem
 * @param rhoK,muK penalty parameters of the last subproblem
 * @param eps   tolerance recorded in the report
 */
KktReport kkt_report(const BilevelProblem& prob, const Vec& x, const Vec& y, const Vec& z,
                     const Vec& lamK, double rhoK, double muK, double eps,
                     const LowerValueOracle& oracle = {});

}  // namespace bilevel
