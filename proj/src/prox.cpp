#include "bilevel/prox.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace bilevel {

Vec clamp(const Vec& v, const Vec& lo, const Vec& hi) { return v.cwiseMax(lo).cwiseMin(hi); }

ProxFriendlyFn box_indicator(const Vec& lo, const Vec& hi) {
  if (lo.size() != hi.size()) throw InputError("box bounds have different dimensions");
  require_finite(lo, "box lower bound");
  require_finite(hi, "box upper bound");
  if ((lo.array() > hi.array()).any()) throw InputError("box lower bound exceeds upper bound");

  ProxFriendlyFn f;
  f.dim = lo.size();
  f.diameter = (hi - lo).norm();
  f.contains = [lo, hi](const Vec& u) {
    return u.size() == lo.size() && (u.array() >= lo.array()).all() &&
           (u.array() <= hi.array()).all();
  };
  auto contains = f.contains;
  f.value = [contains](const Vec& u) {
    return contains(u) ? 0.0 : std::numeric_limits<double>::infinity();
  };
  f.prox = [lo, hi](const Vec& v, double) { return clamp(v, lo, hi); };
  f.linear_minimizer = [lo, hi](const Vec& g, double) {
    Vec u(g.size());
    for (Index i = 0; i < g.size(); ++i) u[i] = g[i] > 0 ? lo[i] : hi[i];
    return u;
  };
  // When the gradient step stays inside the box the residual is g itself; when
  // it leaves the box the displacement is measured to the violated bound, which
  // avoids subtracting two nearly equal points.
  f.prox_residual = [lo, hi](const Vec& v, const Vec& g, double s) {
    Vec r(v.size());
    for (Index i = 0; i < v.size(); ++i) {
      const double t = v[i] - s * g[i];
      if (t < lo[i])
        r[i] = (v[i] - lo[i]) / s;
      else if (t > hi[i])
        r[i] = (v[i] - hi[i]) / s;
      else
        r[i] = g[i];
    }
    return r;
  };
  return f;
}

ProxFriendlyFn scaled(const ProxFriendlyFn& p, double c) {
  if (!(c > 0) || !std::isfinite(c)) throw InputError("scale factor must be positive and finite");
  ProxFriendlyFn f;
  f.dim = p.dim;
  f.diameter = p.diameter;
  f.contains = p.contains;
  f.value = [p, c](const Vec& u) { return c * p.value(u); };
  f.prox = [p, c](const Vec& v, double s) { return p.prox(v, s * c); };
  if (p.linear_minimizer)
    f.linear_minimizer = [p, c](const Vec& g, double w) { return p.linear_minimizer(g, w * c); };
  // (v - prox_{s c P}(v - s g)) / s = c * residual_P(v, g / c, s c).
  if (p.prox_residual)
    f.prox_residual = [p, c](const Vec& v, const Vec& g, double s) {
      return Vec(c * p.prox_residual(v, g / c, s * c));
    };
  return f;
}

ProxFriendlyFn product(const ProxFriendlyFn& p, const ProxFriendlyFn& q) {
  const Index np = p.dim;
  const Index nq = q.dim;
  ProxFriendlyFn f;
  f.dim = np + nq;
  f.diameter = std::hypot(p.diameter, q.diameter);
  f.contains = [p, q, np, nq](const Vec& u) {
    return u.size() == np + nq && p.contains(u.head(np)) && q.contains(u.tail(nq));
  };
  f.value = [p, q, np, nq](const Vec& u) { return p.value(u.head(np)) + q.value(u.tail(nq)); };
  f.prox = [p, q, np, nq](const Vec& v, double s) {
    Vec u(np + nq);
    u << p.prox(v.head(np), s), q.prox(v.tail(nq), s);
    return u;
  };
  if (p.linear_minimizer && q.linear_minimizer)
    f.linear_minimizer = [p, q, np, nq](const Vec& g, double w) {
      Vec u(np + nq);
      u << p.linear_minimizer(g.head(np), w), q.linear_minimizer(g.tail(nq), w);
      return u;
    };
  f.prox_residual = [p, q, np, nq](const Vec& v, const Vec& g, double s) {
    Vec r(np + nq);
    r << prox_residual(p, v.head(np), g.head(np), s), prox_residual(q, v.tail(nq), g.tail(nq), s);
    return r;
  };
  return f;
}

Vec prox_residual(const ProxFriendlyFn& p, const Vec& v, const Vec& g, double s) {
  if (p.prox_residual) return p.prox_residual(v, g, s);
  return (v - p.prox(v - s * g, s)) / s;
}

Vec linear_minimizer(const ProxFriendlyFn& p, const Vec& g, double w) {
  if (!p.linear_minimizer) throw CapabilityError("function does not support linear minimization");
  return p.linear_minimizer(g, w);
}

}  // namespace bilevel
