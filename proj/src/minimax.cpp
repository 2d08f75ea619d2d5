#include "bilevel/minimax.hpp"

#include <cmath>
#include <limits>

namespace bilevel {

ScscConstants scsc_constants(const ScscSpec& spec) {
  const double sx = spec.sigma_x;
  const double sy = spec.sigma_y;
  const double L = spec.lipschitz;
  ScscConstants c;
  c.alpha_bar = std::min(1.0, std::sqrt(8.0 * sy / sx));
  c.eta_z = sx / 2.0;
  c.eta_y = std::min(1.0 / (2.0 * sy), 4.0 / (c.alpha_bar * sx));
  c.zeta = 1.0 / (2.0 * std::sqrt(5.0) * (1.0 + 8.0 * L / sx));
  c.gamma = 8.0 / sx;
  c.zeta_hat = std::min(sx, sy) / (L * L);
  return c;
}

PdResidual pd_residual(const Coupling& h, const ProxFriendlyFn& p, const ProxFriendlyFn& q,
                       double step, const Vec& x, const Vec& y) {
  Vec gx, gy, hx, hy;
  h.gradient(x, y, gx, gy);
  PdResidual r;
  r.x_hat = p.prox(x - step * gx, step);
  r.y_hat = q.prox(y + step * gy, step);
  // (x - x_hat) / step and (y_hat - y) / step, evaluated without cancellation.
  const Vec rx = prox_residual(p, x, gx, step);
  const Vec ry = -prox_residual(q, y, Vec(-gy), step);
  h.gradient(r.x_hat, r.y_hat, hx, hy);
  r.residual = std::sqrt((rx - gx + hx).squaredNorm() + (ry - gy + hy).squaredNorm());
  return r;
}

PdResidual pd_residual(const ScscSpec& spec, const Vec& x, const Vec& y) {
  return pd_residual(spec.hbar, spec.p, spec.q, scsc_constants(spec).zeta_hat, x, y);
}

PdResidual pd_residual(const MinimaxProblem& prob, double step, const Vec& x, const Vec& y) {
  return pd_residual(prob.h, prob.p, prob.q, step, x, y);
}

namespace {

Vec concat(const Vec& a, const Vec& b) {
  Vec v(a.size() + b.size());
  v << a, b;
  return v;
}

}  // namespace

ScscResult solve_scsc(const ScscSpec& spec, double tau, const Vec& z0, const Vec& y0,
                      const ScscOptions& options) {
  const double sx = spec.sigma_x;
  const double sy = spec.sigma_y;
  if (!(sx > 0) || !(sy > 0)) throw InputError("both strong convexity moduli must be positive");
  if (!(spec.lipschitz > 0)) throw InputError("smoothness constant must be positive");
  if (!(tau > 0)) throw InputError("tolerance must be positive");
  if (z0.size() != spec.p.dim || y0.size() != spec.q.dim)
    throw InputError("starting point has the wrong dimension");
  if (!spec.q.contains(y0)) throw InputError("starting y lies outside dom q");

  const ScscConstants c = scsc_constants(spec);
  const double s = c.zeta * c.gamma;  // zeta gamma_x = zeta gamma_y
  const double gam = c.gamma;
  const ProxFriendlyFn& p = spec.p;
  const ProxFriendlyFn& q = spec.q;
  const Coupling& h = spec.hbar;

  ScscResult res;
  Vec z = z0, zf = z0, y = y0, yf = y0;
  Vec gx, gy, hx, hy;
  double best = std::numeric_limits<double>::infinity();
  Vec best_point = concat(-z0 / sx, y0);
  long total = 0;

  auto finish = [&](const PdResidual& r, double step, const Vec& bx, const Vec& by) {
    res.certificate.x = r.x_hat;
    res.certificate.y = r.y_hat;
    res.certificate.residual = r.residual;
    res.certificate.step = step;
    res.certificate.base_x = bx;
    res.certificate.base_y = by;
    res.certificate.recomputed_ok = true;
    return res;
  };

  for (long k = 0;; ++k) {
    if (++total > options.max_total)
      throw NonConvergence("strongly convex strongly concave solver exceeded its cap", best_point);
    if (options.deadline.expired())
      throw DeadlineExceeded("strongly convex strongly concave solver passed its deadline",
                             best_point);
    const Vec zg = c.alpha_bar * z + (1.0 - c.alpha_bar) * zf;
    const Vec yg = c.alpha_bar * y + (1.0 - c.alpha_bar) * yf;
    const Vec xm = -zg / sx;
    const Vec& ym = yg;

    // a_x = grad_x hhat + sx (x - zg / sx) / 2 and a_y = -grad_y hhat + sy y + sx (y - yg) / 8,
    // with hhat = hbar - sx ||x||^2 / 2 + sy ||y||^2 / 2.
    auto a_eval = [&](const Vec& xx, const Vec& yy, Vec& ax, Vec& ay) {
      h.gradient(xx, yy, gx, gy);
      ++res.calls.grad;
      ax = gx - 0.5 * sx * xx - 0.5 * zg;
      ay = -gy + 0.125 * sx * (yy - yg);
    };

    Vec ax, ay;
    a_eval(xm, ym, ax, ay);
    const Vec ux = xm - s * ax;
    const Vec uy = ym - s * ay;
    const Vec x0k = p.prox(ux, s);
    const Vec y0k = q.prox(uy, s);
    res.calls.prox_p++;
    res.calls.prox_q++;
    Vec bx = (ux - x0k) / s;
    Vec by = (uy - y0k) / s;
    Vec xt = x0k, yt = y0k;

    for (long t = 0;; ++t) {
      a_eval(xt, yt, ax, ay);
      const double lhs = gam * ((ax + bx).squaredNorm() + (ay + by).squaredNorm());
      const double rhs = ((xt - xm).squaredNorm() + (yt - ym).squaredNorm()) / gam;
      if (!std::isfinite(lhs)) throw NumericalFailure("non-finite operator value", best_point);
      if (lhs <= rhs) break;
      // When the anchor is itself the fixed point both sides vanish in exact
      // arithmetic and the comparison is decided by rounding. An iterate that
      // coincides with the anchor to rounding level is accepted.
      const double noise = 64.0 * std::numeric_limits<double>::epsilon() *
                           (1.0 + std::sqrt(xm.squaredNorm() + ym.squaredNorm()));
      if (std::sqrt(rhs * gam) <= noise) break;
      if (t >= options.max_inner_per_outer || ++total > options.max_total)
        throw NonConvergence("inner loop of the strongly convex strongly concave solver stalled "
                             "after " + std::to_string(t) + " iterations (outer step " +
                                 std::to_string(k) + ", " + std::to_string(total) + " in total)",
                             best_point);
      ++res.inner_iterations;
      const double beta = 2.0 / (static_cast<double>(t) + 3.0);
      const Vec xbase = xt + beta * (x0k - xt);
      const Vec ybase = yt + beta * (y0k - yt);
      const Vec xh = xbase - s * (ax + bx);
      const Vec yh = ybase - s * (ay + by);
      Vec ahx, ahy;
      a_eval(xh, yh, ahx, ahy);
      const Vec vx = xbase - s * ahx;
      const Vec vy = ybase - s * ahy;
      xt = p.prox(vx, s);
      yt = q.prox(vy, s);
      res.calls.prox_p++;
      res.calls.prox_q++;
      bx = (vx - xt) / s;
      by = (vy - yt) / s;
    }
    // gx, gy hold grad hbar at (xf, yf) from the last loop test.
    const Vec& xf = xt;
    yf = yt;
    const Vec zf_new = gx - sx * xf + bx;
    const Vec wf = -(gy + sy * yf) + by;
    zf = zf_new;
    z = z + (c.eta_z / sx) * (zf - z) - c.eta_z * (xf + zf / sx);
    y = y + c.eta_y * sy * (yf - y) - c.eta_y * (wf + sy * yf);
    const Vec x = -z / sx;
    res.outer_iterations = k + 1;

    PdResidual r = pd_residual(h, p, q, c.zeta_hat, x, y);
    res.calls.grad += 2;
    res.calls.prox_p++;
    res.calls.prox_q++;
    if (!std::isfinite(r.residual)) throw NumericalFailure("non-finite residual", best_point);
    if (r.residual < best) {
      best = r.residual;
      best_point = concat(r.x_hat, r.y_hat);
    }
    if (r.residual <= tau) return finish(r, c.zeta_hat, x, y);

    PdResidual rf = pd_residual(h, p, q, c.zeta_hat, xf, yf);
    res.calls.grad += 2;
    res.calls.prox_p++;
    res.calls.prox_q++;
    if (rf.residual < best) {
      best = rf.residual;
      best_point = concat(rf.x_hat, rf.y_hat);
    }
    if (rf.residual <= tau) return finish(rf, c.zeta_hat, xf, yf);
  }
}

RegularizedCoupling regularized_h(const MinimaxProblem& base, const Vec& xk, const Vec& y_anchor,
                                  double eps) {
  if (!(eps > 0)) throw InputError("regularization tolerance must be positive");
  const double L = base.lipschitz;
  RegularizedCoupling r;
  const Coupling h = base.h;
  if (base.sigma_y > 0) {
    r.sigma_y_hat = base.sigma_y;
    r.lipschitz_hat = 3.0 * L;
    r.h.value = [h, xk, L](const Vec& x, const Vec& y) {
      return h.value(x, y) + L * (x - xk).squaredNorm();
    };
    r.h.gradient = [h, xk, L](const Vec& x, const Vec& y, Vec& gx, Vec& gy) {
      h.gradient(x, y, gx, gy);
      gx += 2.0 * L * (x - xk);
    };
    return r;
  }
  const double Dq = base.q.diameter;
  if (!(Dq > 0)) throw InputError("dom q must have positive diameter when sigma_y = 0");
  const double w = eps / (4.0 * Dq);
  r.sigma_y_hat = eps / (2.0 * Dq);
  r.lipschitz_hat = 3.0 * L + eps / (2.0 * Dq);
  r.h.value = [h, xk, y_anchor, L, w](const Vec& x, const Vec& y) {
    return h.value(x, y) - w * (y - y_anchor).squaredNorm() + L * (x - xk).squaredNorm();
  };
  r.h.gradient = [h, xk, y_anchor, L, w](const Vec& x, const Vec& y, Vec& gx, Vec& gy) {
    h.gradient(x, y, gx, gy);
    gx += 2.0 * L * (x - xk);
    gy -= 2.0 * w * (y - y_anchor);
  };
  return r;
}

long ncc_outer_cap(const MinimaxProblem& base, double eps, double eps_hat0, double value_gap) {
  const double L = base.lipschitz;
  const double Dq = base.q.diameter;
  const double sh = base.sigma_y > 0 ? base.sigma_y : eps / (2.0 * Dq);
  const double t = 16.0 * (value_gap + (sh - base.sigma_y) * Dq * Dq / 2.0) * L / (eps * eps) +
                   32.0 * eps_hat0 * eps_hat0 * (1.0 + L * L / (sh * sh)) / (eps * eps) - 1.0;
  return static_cast<long>(std::max(0.0, std::ceil(t))) + 1;
}

NccResult solve_ncc(const MinimaxProblem& base, double eps, double eps_hat0, const Vec& x0,
                    const Vec& y0, const NccOptions& options) {
  if (!(eps > 0)) throw InputError("tolerance must be positive");
  if (!(eps_hat0 > 0) || eps_hat0 > eps / 2.0)
    throw InputError("initial inner tolerance must lie in (0, eps / 2]");
  if (!(base.lipschitz > 0)) throw InputError("smoothness constant must be positive");
  if (x0.size() != base.p.dim || !base.p.contains(x0)) throw InputError("x0 lies outside dom p");
  if (y0.size() != base.q.dim || !base.q.contains(y0)) throw InputError("y0 lies outside dom q");

  const double L = base.lipschitz;
  const long cap = options.value_gap ? ncc_outer_cap(base, eps, eps_hat0, *options.value_gap)
                                     : options.max_outer;
  NccResult res;
  Vec xk = x0, yk = y0;
  for (long k = 0;; ++k) {
    const RegularizedCoupling reg = regularized_h(base, xk, y0, eps);
    res.sigma_y_hat = reg.sigma_y_hat;
    res.lipschitz_hat = reg.lipschitz_hat;
    ScscSpec spec{reg.h, L, reg.sigma_y_hat, reg.lipschitz_hat, base.p, base.q};
    const double tol = eps_hat0 / static_cast<double>(k + 1);
    const ScscResult inner = solve_scsc(spec, tol, Vec(-L * xk), yk, options.inner);
    res.calls += inner.calls;
    NccStep step;
    step.k = k;
    step.displacement = (inner.certificate.x - xk).norm();
    step.inner_tol = tol;
    step.inner_outer_iterations = inner.outer_iterations;
    step.inner_iterations = inner.inner_iterations;
    step.inner_residual = inner.certificate.residual;
    res.trace.push_back(step);
    xk = inner.certificate.x;
    yk = inner.certificate.y;
    res.outer_iterations = k + 1;
    if (step.displacement <= eps / (4.0 * L)) break;
    if (k + 1 >= cap) {
      Vec best(xk.size() + yk.size());
      best << xk, yk;
      throw NonConvergence("proximal point minimax solver exceeded its outer cap", best);
    }
  }
  // Certificate on the original coupling, with the step rebuilt from the
  // original smoothness constant and the effective concavity modulus.
  const double step = std::min(L, res.sigma_y_hat) / (L * L);
  const PdResidual r = pd_residual(base, step, xk, yk);
  res.calls.grad += 2;
  res.calls.prox_p++;
  res.calls.prox_q++;
  res.certificate.x = r.x_hat;
  res.certificate.y = r.y_hat;
  res.certificate.residual = r.residual;
  res.certificate.step = step;
  res.certificate.base_x = xk;
  res.certificate.base_y = yk;
  res.flagged = !(r.residual <= eps);
  res.certificate.recomputed_ok = !res.flagged;
  return res;
}

}  // namespace bilevel
