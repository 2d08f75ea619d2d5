#include "bilevel/apg.hpp"

#include <cmath>
#include <limits>

namespace bilevel {

namespace {

void check_problem(const CompositeConvexProblem& prob, double tol, const Vec& x0) {
  if (!(tol > 0)) throw InputError("tolerance must be positive");
  if (!(prob.lipschitz > 0) || !std::isfinite(prob.lipschitz))
    throw InputError("gradient Lipschitz constant must be positive and finite");
  if (!std::isfinite(prob.P.diameter)) throw InputError("dom P must be bounded");
  if (x0.size() != prob.P.dim || !prob.P.contains(x0))
    throw InputError("starting point lies outside dom P");
}

}  // namespace

LinearizationBound::LinearizationBound(Index dim) : grad_sum_(Vec::Zero(dim)) {}

void LinearizationBound::add(double weight, double phi_y, const Vec& grad_y, const Vec& y) {
  grad_sum_ += weight * grad_y;
  const_sum_ += weight * (phi_y - grad_y.dot(y));
  weight_ += weight;
}

double LinearizationBound::value(const ProxFriendlyFn& P) const {
  const Vec u = linear_minimizer(P, grad_sum_, weight_);
  return (const_sum_ + grad_sum_.dot(u)) / weight_ + P.value(u);
}

double lower_bound_certificate(const std::vector<Linearization>& history, const ProxFriendlyFn& P) {
  if (history.empty()) throw InputError("at least one linearization is required");
  LinearizationBound bound(history.front().grad.size());
  for (std::size_t i = 0; i < history.size(); ++i)
    bound.add((static_cast<double>(i) + 2.0) / 2.0, history[i].phi, history[i].grad,
              history[i].point);
  return bound.value(P);
}

long apg_convex_cap(double lipschitz, double diameter, double tol) {
  return std::max(1L, static_cast<long>(std::ceil(diameter * std::sqrt(2.0 * lipschitz / tol))));
}

long apg_strongly_convex_cap(double lipschitz, double sigma, double diameter, double tol) {
  const double rounds = std::ceil(2.0 * std::log(2.0 * lipschitz * diameter * diameter / tol));
  return static_cast<long>(std::ceil(std::sqrt(lipschitz / sigma))) *
         std::max(1L, static_cast<long>(rounds));
}

ApgResult apg_convex(const CompositeConvexProblem& prob, double tol, const Vec& x0,
                     const ApgOptions& options) {
  check_problem(prob, tol, x0);
  const double L = prob.lipschitz;
  const ProxFriendlyFn& P = prob.P;
  const long cap = apg_convex_cap(L, P.diameter, tol);
  const bool has_bound = static_cast<bool>(P.linear_minimizer);

  ApgResult res;
  Vec x = x0;
  Vec z = x0;
  LinearizationBound bound(x0.size());
  for (long k = 0;; ++k) {
    if (k >= options.max_iterations)
      throw NonConvergence("accelerated method exceeded its safety cap", x);
    if ((k & 63) == 0 && options.deadline.expired())
      throw DeadlineExceeded("accelerated method passed its deadline", x);
    const double kd = static_cast<double>(k);
    const Vec y = (kd * x + 2.0 * z) / (kd + 2.0);
    const Vec gy = prob.gradient(y);
    const double phi_y = prob.value(y);
    ++res.calls.grad;
    // argmin_u { <gy, u> + P(u) + L / (k + 2) ||u - z||^2 } is one prox step.
    const double step = (kd + 2.0) / (2.0 * L);
    z = P.prox(z - step * gy, step);
    ++res.calls.prox;
    x = (kd * x + 2.0 * z) / (kd + 2.0);
    bound.add((kd + 2.0) / 2.0, phi_y, gy, y);

    const double psi = prob.value(x) + P.value(x);
    if (!std::isfinite(psi) || !std::isfinite(phi_y))
      throw NumericalFailure("non-finite objective in accelerated method", x);
    double lower = -std::numeric_limits<double>::infinity();
    if (has_bound) {
      lower = bound.value(P);
      ++res.calls.prox;
    }
    if (options.observer) options.observer(k + 1, x, psi, lower);
    res.iterations = k + 1;
    if (has_bound && psi - lower <= tol) {
      res.point = x;
      res.gap_bound = std::max(0.0, psi - lower);
      res.certified = true;
      return res;
    }
    if (k + 1 >= cap) {
      res.point = x;
      res.gap_bound = tol;
      res.certified = false;
      return res;
    }
  }
}

ApgResult apg_strongly_convex(const CompositeConvexProblem& prob, double tol, const Vec& x0,
                              const ApgOptions& options) {
  check_problem(prob, tol, x0);
  if (!(prob.sigma > 0)) throw InputError("strong convexity modulus must be positive");
  const double L = prob.lipschitz;
  const double D = prob.P.diameter;
  const ProxFriendlyFn& P = prob.P;
  const double alpha = std::sqrt(std::min(1.0, prob.sigma / L));
  const long cap = apg_strongly_convex_cap(L, prob.sigma, D, tol);
  // The displacement test is applied to x^{k+1}, the point at which the
  // forward-backward step is taken, so that 2 L ||xt - x^{k+1}|| bounds the
  // subdifferential distance at the output.
  const double threshold = D > 0 ? tol / (2.0 * L * D) : std::numeric_limits<double>::infinity();

  ApgResult res;
  Vec x = P.prox(x0 - prob.gradient(x0) / L, 1.0 / L);
  ++res.calls.grad;
  ++res.calls.prox;
  Vec z = x;
  for (long k = 0;; ++k) {
    if (k >= options.max_iterations)
      throw NonConvergence("accelerated method exceeded its safety cap", x);
    if ((k & 63) == 0 && options.deadline.expired())
      throw DeadlineExceeded("accelerated method passed its deadline", x);
    const Vec y = (x + alpha * z) / (1.0 + alpha);
    const Vec gy = prob.gradient(y);
    z = P.prox(alpha * y + (1.0 - alpha) * z - gy / (alpha * L), 1.0 / (alpha * L));
    x = (1.0 - alpha) * x + alpha * z;
    const Vec gx = prob.gradient(x);
    const Vec xt = P.prox(x - gx / L, 1.0 / L);
    res.calls.grad += 2;
    res.calls.prox += 2;
    const double disp = (xt - x).norm();
    if (!std::isfinite(disp)) throw NumericalFailure("non-finite iterate in accelerated method", x);
    res.iterations = k + 1;
    if (options.observer) {
      const double psi = prob.value(xt) + P.value(xt);
      options.observer(k + 1, xt, psi, -std::numeric_limits<double>::infinity());
    }
    if (disp <= threshold || k + 1 >= cap) {
      res.point = xt;
      res.gap_bound = 2.0 * L * disp * D;
      res.certified = disp <= threshold;
      return res;
    }
  }
}

ApgResult apg_solve(const CompositeConvexProblem& prob, double tol, const Vec& x0,
                    const ApgOptions& options) {
  return prob.sigma > 0 ? apg_strongly_convex(prob, tol, x0, options)
                        : apg_convex(prob, tol, x0, options);
}

}  // namespace bilevel
