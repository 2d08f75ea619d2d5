#include "bilevel/kkt.hpp"

#include "bilevel/apg.hpp"

#include <cmath>
#include <limits>

namespace bilevel {

RecoveredMultipliers recover_multipliers(const Vec& lamK, double muK, double rhoK, const Vec& g_y,
                                         const Vec& g_z) {
  if (!(muK > 0) || !(rhoK > 0)) throw InputError("mu and rho must be positive");
  if ((lamK.array() < 0).any()) throw InputError("multiplier must be nonnegative");
  RecoveredMultipliers r;
  r.lambda_y = update_multiplier(lamK, muK, g_y);
  r.lambda_z = update_multiplier(lamK, muK, g_z) / rhoK;
  return r;
}

LowerValue lower_optimal_value_detail(const BilevelProblem& prob, const Vec& x,
                                      const LowerValueOracle& oracle) {
  if (x.size() != prob.n || !prob.f2.contains(x)) throw InputError("x lies outside dom f2");
  if (!(oracle.tolerance > 0)) throw InputError("oracle tolerance must be positive");
  LowerValue out;
  const bool have = static_cast<bool>(prob.lower_value_solver);
  if (oracle.method == LowerValueOracle::Method::Registered && !have)
    throw CapabilityError("no registered lower level solver");
  if (have && oracle.method != LowerValueOracle::Method::AugmentedLagrangian) {
    out.value = prob.lower_value_solver(x);
    out.registered = true;
    return out;
  }

  // Escalation on the lower augmented Lagrangian with rho = 1.
  Vec lam = Vec::Zero(prob.g.dim);
  double mu = oracle.mu0;
  Vec z = prob.tf2.prox(Vec::Zero(prob.m), 1.0);
  double prev = std::numeric_limits<double>::quiet_NaN();
  const double inner_tol = oracle.tolerance / 4.0;
  for (int e = 0; e < oracle.max_escalations; ++e) {
    CompositeConvexProblem cp;
    const BilevelProblem* P = &prob;
    cp.value = [P, x, lam, mu](const Vec& v) {
      return P->tf1.value(x, v) + clipped_sq_norm(lam, mu, P->g.value(x, v)) / (2.0 * mu);
    };
    cp.gradient = [P, x, lam, mu](const Vec& v) {
      Vec gx, gz, jx, jz;
      P->tf1.gradient(x, v, gx, gz);
      jacobian_transpose_times(P->g, x, v, update_multiplier(lam, mu, P->g.value(x, v)), jx, jz);
      return Vec(gz + jz);
    };
    cp.lipschitz = lipschitz_lower(prob, 1.0, mu, lam.norm());
    cp.sigma = prob.sigma;
    cp.P = prob.tf2;
    const ApgResult r = apg_solve(cp, inner_tol, z, {});
    z = r.point;
    // Dual function of the augmented Lagrangian: a lower bound on the optimal value.
    const double value =
        cp.value(z) + prob.tf2.value(z) - r.gap_bound - lam.squaredNorm() / (2.0 * mu);
    const Vec gz = prob.g.value(x, z);
    const double viol = gz.cwiseMax(0.0).norm();
    lam = update_multiplier(lam, mu, gz);
    out.escalations = e + 1;
    out.minimizer = z;
    if (std::isfinite(prev) && std::abs(value - prev) <= oracle.tolerance &&
        viol <= std::sqrt(oracle.tolerance)) {
      out.value = value;
      return out;
    }
    prev = value;
    mu *= 2.0;
  }
  throw OracleFailure("lower level value escalation did not settle");
}

double lower_optimal_value(const BilevelProblem& prob, const Vec& x,
                           const LowerValueOracle& oracle) {
  return lower_optimal_value_detail(prob, x, oracle).value;
}

double KktReport::max_residual() const {
  double m = stationarity_xy;
  for (double v : {stationarity_z, feas_z, compl_z, feas_y, compl_y, value_gap})
    m = std::max(m, v);
  return m;
}

KktReport kkt_report(const BilevelProblem& prob, const Vec& x, const Vec& y, const Vec& z,
                     const Vec& lamK, double rhoK, double muK, double eps,
                     const LowerValueOracle& oracle) {
  if (x.size() != prob.n || !prob.f2.contains(x)) throw InputError("x lies outside dom f2");
  if (y.size() != prob.m || !prob.tf2.contains(y)) throw InputError("y lies outside dom tf2");
  if (z.size() != prob.m || !prob.tf2.contains(z)) throw InputError("z lies outside dom tf2");
  require_size(lamK, prob.g.dim, "lambda");
  KktReport rep;
  rep.eps_used = eps;
  rep.rho_used = rhoK;
  rep.mu_used = muK;
  const Vec g_y = prob.g.value(x, y);
  const Vec g_z = prob.g.value(x, z);
  const RecoveredMultipliers mult = recover_multipliers(lamK, muK, rhoK, g_y, g_z);
  rep.lambda_y = mult.lambda_y;
  rep.lambda_z = mult.lambda_z;

  // Smooth part of the (x, y) expression:
  //   grad f1 + rho grad tf1(x, y) + J(x, y)^T lambda_y - rho (grad_x tf1(x, z) + J_x(x, z)^T lambda_z; 0).
  Vec fx, fy, ax, ay, bx, bz, jyx, jyy, jzx, jzz;
  prob.f1.gradient(x, y, fx, fy);
  prob.tf1.gradient(x, y, ax, ay);
  prob.tf1.gradient(x, z, bx, bz);
  jacobian_transpose_times(prob.g, x, y, mult.lambda_y, jyx, jyy);
  jacobian_transpose_times(prob.g, x, z, mult.lambda_z, jzx, jzz);
  const Vec sx = fx + rhoK * ax + jyx - rhoK * (bx + jzx);
  const Vec sy = fy + rhoK * ay + jyy;
  // Smooth part of the z expression: rho (grad_z tf1(x, z) + J_z(x, z)^T lambda_z).
  const Vec sz = rhoK * (bz + jzz);

  const double L = lipschitz_outer(prob, rhoK, muK, lamK.norm());
  const double step = L > 0 ? 1.0 / L : 1.0;
  rep.step_used = step;
  const ProxFriendlyFn q = scaled(prob.tf2, rhoK);
  const Vec rx = prox_residual(prob.f2, x, sx, step);
  const Vec ry = prox_residual(q, y, sy, step);
  rep.stationarity_xy = std::sqrt(rx.squaredNorm() + ry.squaredNorm());
  rep.stationarity_z = prox_residual(q, z, sz, step).norm();

  rep.feas_z = g_z.cwiseMax(0.0).norm();
  rep.feas_y = g_y.cwiseMax(0.0).norm();
  rep.compl_z = std::abs(mult.lambda_z.dot(g_z));
  rep.compl_y = std::abs(mult.lambda_y.dot(g_y));
  rep.compl_y_cross = std::abs(mult.lambda_y.dot(g_z));
  rep.tf_star = lower_optimal_value(prob, x, oracle);
  rep.lower_gap = prob.tf(x, y) - rep.tf_star;
  rep.value_gap = std::abs(rep.lower_gap);
  return rep;
}

}  // namespace bilevel
