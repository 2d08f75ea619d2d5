#pragma once

#include "bilevel/apg.hpp"
#include "bilevel/minimax.hpp"
#include "bilevel/model.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace bilevel {

/// Evaluations of each oracle of a bilevel problem.
struct OracleCounts {
  long grad_f1 = 0;
  long grad_tf1 = 0;
  long grad_g = 0;
  long prox_f2 = 0;
  long prox_tf2 = 0;
  long total() const { return grad_f1 + grad_tf1 + grad_g + prox_f2 + prox_tf2; }
  OracleCounts& operator+=(const OracleCounts& o);
};

/// Oracle calls implied by a minimax solve on the penalized subproblem: each
/// coupling gradient evaluates grad f1 once and grad tf1, grad g at the two
/// points (x, y) and (x, z); prox of p touches f2 and tf2, prox of q touches tf2.
OracleCounts subproblem_counts(const MinimaxCounts& c);

/// Oracle calls implied by a lower level accelerated solve.
OracleCounts lower_counts(const ApgCounts& c);

struct SmoConfig {
  double eps = 1e-2;
  double tau = 0.8;
  double eps0 = 1.0;
  std::optional<Multipliers> lambda0;  ///< Defaults to zero.
  Vec x0;
  Vec y0;
  std::optional<Vec> z0;  ///< Defaults to y0.
  NccOptions ncc;
  ApgOptions apg;
  /// Called after every outer iteration.
  std::function<void(const struct SmoIterate&)> observer;

  /// Throws InputError unless tau * eps < eps0 <= 1, 0 < eps, tau < 1 and the
  /// starting points lie in their domains.
  void validate(const BilevelProblem& prob) const;
};

struct Schedule {
  double eps = 0.0;
  double rho = 0.0;
  double mu = 0.0;
};

/// eps_k = eps0 tau^k, rho_k = 1 / eps_k, mu_k = 1 / eps_k^3.
Schedule schedule(const SmoConfig& config, long k);

/// K = ceil((log eps - log eps0) / log tau)_+; the driver runs K + 1 iterations.
long outer_iteration_count(double eps, double eps0, double tau);

struct SmoIterate {
  long k = 0;
  double eps = 0.0;
  double rho = 0.0;
  double mu = 0.0;
  double lambda_norm = 0.0;     ///< ||lambda^k||.
  double lemma_bound = 0.0;     ///< 2 rho_k mu_k theta.
  bool lemma_holds = false;     ///< ||lambda^k||^2 <= 2 rho_k mu_k theta.
  double L_outer = 0.0;         ///< L_k.
  double L_lower = 0.0;         ///< Ltilde_k.
  double warm_gap = 0.0;        ///< Certified gap of y_init.
  long warm_iterations = 0;
  double step3_residual = 0.0;  ///< Certificate residual on the subproblem.
  bool step3_flagged = false;
  long ncc_outer = 0;
  OracleCounts calls;           ///< Cumulative oracle calls after this iteration.
};

struct SmoTrace {
  std::vector<SmoIterate> iterations;
};

/// Closed-form constants of the complexity analysis.
struct TheoremBounds {
  long K = 0;
  double theta = 0.0;
  double L = 0.0;
  double L_tilde = 0.0;
  bool strongly_convex = false;
  // sigma = 0 branch
  double alpha = 0.0, delta = 0.0, M = 0.0, T = 0.0, N = 0.0;
  // sigma > 0 branch
  double alpha_s = 0.0, delta_s = 0.0, M_s = 0.0, T_s = 0.0, N_s = 0.0;
  /// eps^{-2} >= 8 tau^{-3} G^{-2} theta.
  bool hypothesis_holds = false;
  // Right-hand sides of the final KKT bounds.
  double feas_z_rhs = 0.0;   ///< ||[g(x, z)]_+||.
  double compl_z_rhs = 0.0;  ///< |<lambda_z, g(x, z)>|.
  double feas_y_rhs = 0.0;   ///< ||[g(x, y)]_+||.
  double compl_y_rhs = 0.0;  ///< |<lambda_y, g(x, z)>|.
  double value_gap_rhs = 0.0;
};

/// Evaluates every constant; the unknown optimal value f* is replaced by its
/// upper bound f_hi, which can only enlarge the bounds.
TheoremBounds theorem_bounds(const BilevelProblem& prob, const SmoConfig& config);

struct WarmStart {
  Vec y;
  double gap = 0.0;
  ApgResult solve;
};

/// Approximate minimizer of the lower augmented Lagrangian in z at xk.
WarmStart warm_start_lower(const BilevelProblem& prob, const Vec& xk, const Multipliers& lam,
                           double rho, double mu, double tol, const Vec& start,
                           const ApgOptions& options = {});

/// The minimax subproblem min_{(x, y)} max_z of the penalized Lagrangian.
MinimaxProblem build_subproblem(const BilevelProblem& prob, const Multipliers& lam, double rho,
                                double mu);

struct SubproblemResult {
  Vec x;
  Vec y;
  Vec z;
  NccResult solve;
};

/// Solves the subproblem from ((xk, y_init), zk) to an eps-primal-dual point.
SubproblemResult solve_subproblem(const BilevelProblem& prob, const Vec& xk, const Vec& y_init,
                                  const Vec& zk, const Multipliers& lam, double rho, double mu,
                                  double tol, const NccOptions& options = {});

struct SmoResult {
  Vec x;
  Vec y;
  Vec z;
  Multipliers lambda;       ///< lambda^{K+1}.
  Multipliers lambda_last;  ///< lambda^K, the multiplier of the final subproblem.
  Schedule last;            ///< (eps_K, rho_K, mu_K).
  SmoTrace trace;
  TheoremBounds bounds;
  OracleCounts calls;
  /// False when the theorem hypothesis fails or a certificate was flagged.
  bool certified = true;
  std::vector<std::string> warnings;
};

/// Sequential minimax optimization driver.
SmoResult run_smo(const BilevelProblem& prob, const SmoConfig& config);

}  // namespace bilevel
