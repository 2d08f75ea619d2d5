#include "bilevel/smo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace bilevel {

OracleCounts& OracleCounts::operator+=(const OracleCounts& o) {
  grad_f1 += o.grad_f1;
  grad_tf1 += o.grad_tf1;
  grad_g += o.grad_g;
  prox_f2 += o.prox_f2;
  prox_tf2 += o.prox_tf2;
  return *this;
}

OracleCounts subproblem_counts(const MinimaxCounts& c) {
  OracleCounts o;
  o.grad_f1 = c.grad;
  o.grad_tf1 = 2 * c.grad;
  o.grad_g = 2 * c.grad;
  o.prox_f2 = c.prox_p;
  o.prox_tf2 = c.prox_p + c.prox_q;
  return o;
}

OracleCounts lower_counts(const ApgCounts& c) {
  OracleCounts o;
  o.grad_tf1 = c.grad;
  o.grad_g = c.grad;
  o.prox_tf2 = c.prox;
  return o;
}

void SmoConfig::validate(const BilevelProblem& prob) const {
  if (!(eps > 0 && eps < 1)) throw InputError("eps must lie in (0, 1)");
  if (!(tau > 0 && tau < 1)) throw InputError("tau must lie in (0, 1)");
  if (!(eps0 > tau * eps && eps0 <= 1)) throw InputError("eps0 must lie in (tau eps, 1]");
  if (x0.size() != prob.n || !prob.f2.contains(x0)) throw InputError("x0 lies outside dom f2");
  if (y0.size() != prob.m || !prob.tf2.contains(y0)) throw InputError("y0 lies outside dom tf2");
  if (z0 && (z0->size() != prob.m || !prob.tf2.contains(*z0)))
    throw InputError("z0 lies outside dom tf2");
  if (lambda0) {
    require_size(*lambda0, prob.g.dim, "lambda0");
    require_finite(*lambda0, "lambda0");
    if ((lambda0->array() < 0).any()) throw InputError("lambda0 must be nonnegative");
  }
}

Schedule schedule(const SmoConfig& config, long k) {
  if (k < 0) throw InputError("iteration index must be nonnegative");
  Schedule s;
  s.eps = config.eps0 * std::pow(config.tau, static_cast<double>(k));
  s.rho = 1.0 / s.eps;
  s.mu = 1.0 / (s.eps * s.eps * s.eps);
  return s;
}

long outer_iteration_count(double eps, double eps0, double tau) {
  const double v = std::ceil((std::log(eps) - std::log(eps0)) / std::log(tau));
  return v > 0 ? static_cast<long>(v) : 0L;
}

namespace {

double pos(double v) { return v > 0 ? v : 0.0; }

double ceil_pos(double v) { return pos(std::ceil(v)); }

}  // namespace

TheoremBounds theorem_bounds(const BilevelProblem& prob, const SmoConfig& config) {
  const ProblemConstants& c = prob.constants;
  const double eps = config.eps;
  const double tau = config.tau;
  const double eps0 = config.eps0;
  const double lam0 = config.lambda0 ? config.lambda0->norm() : 0.0;
  const double Dx = c.D_x;
  const double Dy = c.D_y;
  const double Lf1 = prob.f1.lipschitz_grad;
  const double Ltf1 = prob.tf1.lipschitz_grad;
  const double Lg = prob.g.lipschitz_val;
  const double LJ = prob.g.lipschitz_grad;
  const double Lf = prob.f1.lipschitz_val;
  const double Ltf = prob.tf1.lipschitz_val;
  const double ghi = c.g_hi;
  const double G = c.slater_G;
  // f* is unknown; f_hi bounds it from above and only enlarges M.
  const double fstar = c.f_hi;

  TheoremBounds b;
  b.K = outer_iteration_count(eps, eps0, tau);
  const double K = static_cast<double>(b.K);
  b.theta = 0.5 * lam0 * lam0 + (c.tf_star_hi - c.tf_low) / (1.0 - std::pow(tau, 4)) +
            Dy * eps0 / (1.0 - std::pow(tau, 3));
  const double st = std::sqrt(2.0 * b.theta);
  b.L = Lf1 + 2.0 * Ltf1 + 2.0 * Lg * Lg + 2.0 * ghi * LJ + 2.0 * st * LJ;
  b.L_tilde = Ltf1 + Lg * Lg + ghi * LJ + st * LJ;
  const double L = b.L;
  const double Lt = b.L_tilde;
  const double Lg2 = Lg * Lg;
  const double D2 = Dx * Dx + Dy * Dy;
  const double te = tau * eps;
  b.strongly_convex = prob.sigma > 0;

  // sigma = 0 branch.
  b.alpha = std::min(1.0, std::sqrt(4.0 / (Dy * L)));
  b.delta = (2.0 + 1.0 / b.alpha) * L * D2 + std::max(1.0 / Dy, L / 4.0) * Dy * Dy;
  {
    const double a = 3.0 * L + 1.0 / (2.0 * Dy);
    const double bracket = a * a / std::min(2.0 * Lg2, 1.0 / (2.0 * Dy)) + a;
    b.M = 16.0 * std::max(1.0 / (4.0 * Lg2), 2.0 / (b.alpha * Lg2)) * bracket * bracket *
          (b.delta + 2.0 / b.alpha *
                         (fstar - c.f_low + c.tf_star_hi - c.tf_low + Ltf * Dy + 3.0 * b.theta +
                          ghi * ghi + Dy / 4.0 + L * D2));
  }
  b.T = ceil_pos(16.0 * (c.f_hi - c.f_low + 1.0 + Dy / 4.0) * L + 8.0 * (1.0 + 4.0 * Dy * Dy * L * L));
  b.N = (std::ceil(96.0 * std::sqrt(2.0) * (1.0 + (12.0 * L + 2.0 / Dy) / Lg2)) + 2.0) *
            std::max(2.0, std::sqrt(Dy * L)) * b.T / (1.0 - std::pow(tau, 7)) * std::pow(te, -7.0) *
            (56.0 * K * std::log(1.0 / tau) + 56.0 * std::log(1.0 / eps0) + 2.0 * pos(std::log(b.M)) +
             2.0 + 2.0 * std::log(2.0 * b.T)) +
        std::pow(te, -1.5) / (1.0 - std::pow(tau, 1.5)) * Dy * std::sqrt(2.0 * Lt) + K;

  // sigma > 0 branch.
  if (b.strongly_convex) {
    const double s = prob.sigma;
    b.alpha_s = std::min(1.0, std::sqrt(8.0 * s / L));
    b.delta_s = (2.0 + 1.0 / b.alpha_s) * D2 * L + std::max(1.0 / Dy, L / 4.0) * Dy * Dy;
    const double bracket = 9.0 * L * L / std::min(2.0 * Lg2, s) + 3.0 * L;
    b.M_s = 16.0 * std::max(1.0 / (4.0 * Lg2), 2.0 / (b.alpha_s * Lg2)) * bracket * bracket *
            (b.delta_s + 2.0 / b.alpha_s *
                             (fstar - c.f_low + c.tf_star_hi - c.tf_low + Ltf * Dy + 3.0 * b.theta +
                              ghi * ghi + L * D2));
    b.T_s = ceil_pos(16.0 * (c.f_hi - c.f_low + 1.0) * L + 8.0 * (1.0 + L * L / (s * s)));
    b.N_s = 3397.0 * std::max(2.0, std::sqrt(L / (2.0 * s))) * b.T_s / (1.0 - std::pow(tau, 6)) *
                std::pow(te, -6.0) *
                (38.0 * K * std::log(1.0 / tau) + 38.0 * std::log(1.0 / eps0) +
                 2.0 * pos(std::log(b.M_s)) + 2.0 + 2.0 * std::log(2.0 * b.T_s)) +
            2.0 / te * (1.0 - tau) * std::ceil(std::sqrt(Lt / s) + 1.0) *
                std::max(1.0, std::ceil(2.0 * std::log(2.0 * Lt * Dy * Dy) +
                                        6.0 * K * std::log(1.0 / tau) - 6.0 * std::log(eps0))) +
            K;
  }

  b.hypothesis_holds =
      G > 0 && 1.0 / (eps * eps) - 8.0 * std::pow(tau, -3.0) * b.theta / (G * G) >= 0;

  const double inf = std::numeric_limits<double>::infinity();
  if (G > 0) {
    const double az = 2.0 / G * (eps0 + Ltf) * Dy;
    const double ay = 2.0 / G * (eps0 + Lf + Ltf) * Dy;
    b.feas_z_rhs = eps * eps * az;
    b.compl_z_rhs = b.feas_z_rhs * std::max(lam0, az);
    b.feas_y_rhs = eps * eps * ay;
    b.compl_y_rhs = eps * ay * std::max(lam0, ay);
    const double tail = b.strongly_convex
                            ? c.f_hi - c.f_low + 1.0 + 1.0 / (4.0 * Lg2) + L / (2.0 * prob.sigma * prob.sigma)
                            : c.f_hi - c.f_low + 1.0 + Dy / 4.0 + 1.0 / (4.0 * Lg2) + 2.0 * Dy * Dy * L;
    b.value_gap_rhs = std::max(2.0 * eps * eps / (G * G) * Ltf * (eps0 + Lf + Ltf) * Dy * Dy,
                               eps * eps * eps * std::max(lam0, az) / 2.0 + eps * tail);
  } else {
    b.feas_z_rhs = b.compl_z_rhs = b.feas_y_rhs = b.compl_y_rhs = b.value_gap_rhs = inf;
  }
  return b;
}

WarmStart warm_start_lower(const BilevelProblem& prob, const Vec& xk, const Multipliers& lam,
                           double rho, double mu, double tol, const Vec& start,
                           const ApgOptions& options) {
  if (!(rho > 0) || !(mu > 0) || !(tol > 0)) throw InputError("rho, mu and tol must be positive");
  require_size(lam, prob.g.dim, "lambda");
  const Vec z0 = start.size() == prob.m && prob.tf2.contains(start) ? start
                                                                   : prob.tf2.prox(start, 1.0);
  CompositeConvexProblem cp;
  const BilevelProblem* P = &prob;
  cp.value = [P, xk, lam, rho, mu](const Vec& z) {
    return P->tf1.value(xk, z) + clipped_sq_norm(lam, mu, P->g.value(xk, z)) / (2.0 * rho * mu);
  };
  cp.gradient = [P, xk, lam, rho, mu](const Vec& z) {
    Vec gx, gz, jx, jz;
    P->tf1.gradient(xk, z, gx, gz);
    const Vec c = update_multiplier(lam, mu, P->g.value(xk, z));
    jacobian_transpose_times(P->g, xk, z, c, jx, jz);
    return Vec(gz + jz / rho);
  };
  cp.lipschitz = lipschitz_lower(prob, rho, mu, lam.norm());
  cp.sigma = prob.sigma;
  cp.P = prob.tf2;
  WarmStart w;
  w.solve = apg_solve(cp, tol, z0, options);
  w.y = w.solve.point;
  w.gap = w.solve.gap_bound;
  return w;
}

MinimaxProblem build_subproblem(const BilevelProblem& prob, const Multipliers& lam, double rho,
                                double mu) {
  if (!(rho > 0) || !(mu > 0)) throw InputError("rho and mu must be positive");
  require_size(lam, prob.g.dim, "lambda");
  const BilevelProblem* P = &prob;
  const Index n = prob.n;
  const Index m = prob.m;
  MinimaxProblem mp;
  mp.h.value = [P, lam, rho, mu, n, m](const Vec& u, const Vec& z) {
    const Vec x = u.head(n);
    const Vec y = u.tail(m);
    return P->f1.value(x, y) + rho * P->tf1.value(x, y) +
           clipped_sq_norm(lam, mu, P->g.value(x, y)) / (2.0 * mu) - rho * P->tf1.value(x, z) -
           clipped_sq_norm(lam, mu, P->g.value(x, z)) / (2.0 * mu);
  };
  mp.h.gradient = [P, lam, rho, mu, n, m](const Vec& u, const Vec& z, Vec& gu, Vec& gz) {
    const Vec x = u.head(n);
    const Vec y = u.tail(m);
    Vec fx, fy, ax, ay, bx, bz, jyx, jyy, jzx, jzz;
    P->f1.gradient(x, y, fx, fy);
    P->tf1.gradient(x, y, ax, ay);
    P->tf1.gradient(x, z, bx, bz);
    const Vec cy = update_multiplier(lam, mu, P->g.value(x, y));
    const Vec cz = update_multiplier(lam, mu, P->g.value(x, z));
    jacobian_transpose_times(P->g, x, y, cy, jyx, jyy);
    jacobian_transpose_times(P->g, x, z, cz, jzx, jzz);
    gu.resize(n + m);
    gu.head(n) = fx + rho * ax + jyx - rho * bx - jzx;
    gu.tail(m) = fy + rho * ay + jyy;
    gz = -rho * bz - jzz;
  };
  mp.lipschitz = lipschitz_outer(prob, rho, mu, lam.norm());
  const ProxFriendlyFn q = scaled(prob.tf2, rho);
  mp.p = product(prob.f2, q);
  mp.q = q;
  mp.sigma_y = rho * prob.sigma;
  return mp;
}

SubproblemResult solve_subproblem(const BilevelProblem& prob, const Vec& xk, const Vec& y_init,
                                  const Vec& zk, const Multipliers& lam, double rho, double mu,
                                  double tol, const NccOptions& options) {
  const MinimaxProblem mp = build_subproblem(prob, lam, rho, mu);
  Vec u0(prob.n + prob.m);
  u0 << xk, y_init;
  const double eps_hat0 = prob.sigma > 0 ? tol / 2.0 : tol / (2.0 * std::sqrt(mu));
  SubproblemResult r;
  r.solve = solve_ncc(mp, tol, eps_hat0, u0, zk, options);
  r.x = r.solve.certificate.x.head(prob.n);
  r.y = r.solve.certificate.x.tail(prob.m);
  r.z = r.solve.certificate.y;
  return r;
}

SmoResult run_smo(const BilevelProblem& prob, const SmoConfig& config) {
  prob.validate();
  config.validate(prob);
  SmoResult res;
  res.bounds = theorem_bounds(prob, config);
  if (!res.bounds.hypothesis_holds) {
    res.certified = false;
    res.warnings.push_back(
        "theorem hypothesis eps^-2 >= 8 tau^-3 G^-2 theta fails; guarantees do not apply");
  }
  const double theta = res.bounds.theta;
  Multipliers lam = config.lambda0 ? *config.lambda0 : Multipliers(Vec::Zero(prob.g.dim));
  Vec x = config.x0;
  Vec y = config.y0;
  Vec z = config.z0 ? *config.z0 : config.y0;
  bool warned_mu = false;

  for (long k = 0;; ++k) {
    const Schedule s = schedule(config, k);
    if (s.mu > 1e12 && !warned_mu) {
      warned_mu = true;
      std::ostringstream os;
      os << "penalty parameter mu = " << s.mu << " exceeds 1e12 at k = " << k
         << "; expect loss of precision";
      res.warnings.push_back(os.str());
    }
    SmoIterate it;
    it.k = k;
    it.eps = s.eps;
    it.rho = s.rho;
    it.mu = s.mu;
    it.lambda_norm = lam.norm();
    it.lemma_bound = 2.0 * s.rho * s.mu * theta;
    it.lemma_holds = lam.squaredNorm() <= it.lemma_bound;
    it.L_outer = lipschitz_outer(prob, s.rho, s.mu, it.lambda_norm);
    it.L_lower = lipschitz_lower(prob, s.rho, s.mu, it.lambda_norm);

    const WarmStart ws = warm_start_lower(prob, x, lam, s.rho, s.mu, s.eps, y, config.apg);
    it.warm_gap = ws.gap;
    it.warm_iterations = ws.solve.iterations;
    res.calls += lower_counts(ws.solve.calls);

    const SubproblemResult sub =
        solve_subproblem(prob, x, ws.y, z, lam, s.rho, s.mu, s.eps, config.ncc);
    res.calls += subproblem_counts(sub.solve.calls);
    it.step3_residual = sub.solve.certificate.residual;
    it.step3_flagged = sub.solve.flagged;
    it.ncc_outer = sub.solve.outer_iterations;
    if (sub.solve.flagged) {
      res.certified = false;
      std::ostringstream os;
      os << "subproblem certificate at k = " << k << " has residual " << it.step3_residual
         << " > eps_k = " << s.eps;
      res.warnings.push_back(os.str());
    }
    x = sub.x;
    y = sub.y;
    z = sub.z;
    res.lambda_last = lam;
    res.last = s;
    lam = update_multiplier(lam, s.mu, prob.g.value(x, z));
    it.calls = res.calls;
    res.trace.iterations.push_back(it);
    if (config.observer) config.observer(it);
    if (k >= res.bounds.K) break;
  }
  res.x = x;
  res.y = y;
  res.z = z;
  res.lambda = lam;
  return res;
}

}  // namespace bilevel
