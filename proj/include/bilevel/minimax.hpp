#pragma once

#include "bilevel/errors.hpp"
#include "bilevel/prox.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace bilevel {

/// A smooth coupling h(x, y) with its partial gradients.
struct Coupling {
  std::function<double(const Vec& x, const Vec& y)> value;
  std::function<void(const Vec& x, const Vec& y, Vec& gx, Vec& gy)> gradient;
};

/**
 * min_x max_y H(x, y) = h(x, y) + p(x) - q(y) with h L-smooth and
 * h(x, .) sigma_y-strongly concave (sigma_y = 0 allowed).
 */
struct MinimaxProblem {
  Coupling h;
  double lipschitz = 0.0;
  ProxFriendlyFn p;
  ProxFriendlyFn q;
  double sigma_y = 0.0;
};

/// Evaluations of grad h and of the proximal operators of p and q.
struct MinimaxCounts {
  long grad = 0;
  long prox_p = 0;
  long prox_q = 0;
  MinimaxCounts& operator+=(const MinimaxCounts& o) {
    grad += o.grad;
    prox_p += o.prox_p;
    prox_q += o.prox_q;
    return *this;
  }
};

/**
 * A strongly convex strongly concave instance: hbar is sigma_x-strongly convex
 * in x, sigma_y-strongly concave in y and L-smooth.
 */
struct ScscSpec {
  Coupling hbar;
  double sigma_x = 0.0;
  double sigma_y = 0.0;
  double lipschitz = 0.0;
  ProxFriendlyFn p;
  ProxFriendlyFn q;
};

/// Step sizes and weights of the optimal method, derived from the moduli.
struct ScscConstants {
  double alpha_bar = 0.0;
  double eta_z = 0.0;
  double eta_y = 0.0;
  double zeta = 0.0;
  double gamma = 0.0;  ///< gamma_x = gamma_y.
  double zeta_hat = 0.0;
};

ScscConstants scsc_constants(const ScscSpec& spec);

/// Witness of approximate primal-dual stationarity at (x, y).
struct PdCertificate {
  Vec x;
  Vec y;
  /// Norm of an explicit element of (d_x H, -d_y H) at (x, y).
  double residual = 0.0;
  /// Step used by the forward-backward map that produced (x, y).
  double step = 0.0;
  /// Point at which the forward-backward step was taken.
  Vec base_x;
  Vec base_y;
  /// True when a from-scratch recomputation reproduced the residual and it met
  /// the requested tolerance.
  bool recomputed_ok = false;
};

struct PdResidual {
  double residual = 0.0;
  Vec x_hat;
  Vec y_hat;
};

/**
 * One forward-backward step of length `step` from (x, y):
 *   x_hat = prox_{step p}(x - step grad_x h),  y_hat = prox_{step q}(y + step grad_y h),
 * and the norm of
 *   (x - x_hat) / step - grad_x h(x, y) + grad_x h(x_hat, y_hat),
 *   (y_hat - y) / step - grad_y h(x, y) + grad_y h(x_hat, y_hat),
 * which lies in (d_x H, -d_y H)(x_hat, y_hat) for every base point and step.
 */
PdResidual pd_residual(const Coupling& h, const ProxFriendlyFn& p, const ProxFriendlyFn& q,
                       double step, const Vec& x, const Vec& y);

/// pd_residual with the step zeta_hat = min(sigma_x, sigma_y) / L^2.
PdResidual pd_residual(const ScscSpec& spec, const Vec& x, const Vec& y);

/// pd_residual on a general minimax problem with an explicit step.
PdResidual pd_residual(const MinimaxProblem& prob, double step, const Vec& x, const Vec& y);

struct ScscOptions {
  /// Cap on inner while-loop iterations within one outer step.
  long max_inner_per_outer = 1000000;
  /// Cap on outer steps plus inner iterations over the whole solve.
  long max_total = 10000000;
  /// Raises DeadlineExceeded once passed; checked at every outer step.
  Deadline deadline;
};

struct ScscResult {
  PdCertificate certificate;
  long outer_iterations = 0;
  long inner_iterations = 0;
  MinimaxCounts calls;
};

/**
 * Optimal first-order method for strongly convex strongly concave problems.
 *
 * Starts from z0 in -sigma_x dom p (the scaled dual of x) and y0 in dom q. The
 * residual test is applied at the averaged point (x^{k+1}, y^{k+1}) and, as a
 * second witness, at the last inner iterate (x_f, y_f), which is a prox output
 * and therefore lies exactly on the active faces of the domain. Either test
 * certifies the returned point.
 */
ScscResult solve_scsc(const ScscSpec& spec, double tau, const Vec& z0, const Vec& y0,
                      const ScscOptions& options = {});

/// Proximal point regularization of a nonconvex concave coupling.
struct RegularizedCoupling {
  Coupling h;
  double sigma_y_hat = 0.0;
  double lipschitz_hat = 0.0;
};

/**
 * h_k(x, y) = h(x, y) - eps ||y - y_anchor||^2 / (4 D_q) + L ||x - xk||^2 when
 * sigma_y = 0, and h(x, y) + L ||x - xk||^2 otherwise.
 */
RegularizedCoupling regularized_h(const MinimaxProblem& base, const Vec& xk, const Vec& y_anchor,
                                  double eps);

struct NccOptions {
  ScscOptions inner;
  /// Outer cap used when no value gap estimate is supplied.
  long max_outer = 100000;
  /// Optional estimate of max_y H(x0, y) - H*; enables the theoretical outer cap.
  std::optional<double> value_gap;
};

struct NccStep {
  long k = 0;
  double displacement = 0.0;
  double inner_tol = 0.0;
  long inner_outer_iterations = 0;
  long inner_iterations = 0;
  double inner_residual = 0.0;
};

struct NccResult {
  /// Certificate recomputed on the original coupling.
  PdCertificate certificate;
  std::vector<NccStep> trace;
  MinimaxCounts calls;
  long outer_iterations = 0;
  double sigma_y_hat = 0.0;
  double lipschitz_hat = 0.0;
  /// True when the recomputed residual exceeds eps.
  bool flagged = false;
};

/// Theoretical outer cap T + 1 given an estimate of max_y H(x0, y) - H*.
long ncc_outer_cap(const MinimaxProblem& base, double eps, double eps_hat0, double value_gap);

/**
 * Proximal point method for nonconvex concave problems: each outer step solves
 * the regularized strongly convex strongly concave problem to tolerance
 * eps_hat0 / (k + 1) and the loop stops once ||x^{k+1} - x^k|| <= eps / (4 L).
 */
NccResult solve_ncc(const MinimaxProblem& base, double eps, double eps_hat0, const Vec& x0,
                    const Vec& y0, const NccOptions& options = {});

}  // namespace bilevel
