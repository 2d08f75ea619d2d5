#pragma once

/// @file support.hpp
/// @brief Shared helpers of the unit tests: seeded draws, finite differences
/// and small hand-built problems.

#include "bilevel/model.hpp"

#include <cmath>
#include <functional>
#include <random>

namespace bilevel::testing {

inline Vec uniform_vec(std::mt19937_64& rng, Index n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vec v(n);
  for (Index i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

inline Mat normal_mat(std::mt19937_64& rng, Index r, Index c, double sd = 1.0) {
  std::normal_distribution<double> nd(0.0, sd);
  Mat M(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) M(i, j) = nd(rng);
  return M;
}

/// Centered differences of a scalar function with step h.
inline Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& u, double h = 1e-6) {
  Vec g(u.size());
  for (Index i = 0; i < u.size(); ++i) {
    Vec a = u, b = u;
    a[i] += h;
    b[i] -= h;
    g[i] = (f(a) - f(b)) / (2.0 * h);
  }
  return g;
}

/// Relative error ||a - b|| / max(1, ||b||).
inline double rel_err(const Vec& a, const Vec& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

/// Full gradient of a SmoothFn at (x, y) stacked as (gx, gy).
inline Vec stacked_gradient(const SmoothFn& f, const Vec& x, const Vec& y) {
  Vec gx, gy;
  f.gradient(x, y, gx, gy);
  Vec g(gx.size() + gy.size());
  g << gx, gy;
  return g;
}

/// Finite difference check of a SmoothFn at (x, y).
inline double smooth_fd_error(const SmoothFn& f, const Vec& x, const Vec& y) {
  const Index n = x.size();
  Vec u(n + y.size());
  u << x, y;
  auto fu = [&](const Vec& w) { return f.value(w.head(n), w.tail(w.size() - n)); };
  return rel_err(stacked_gradient(f, x, y), fd_gradient(fu, u));
}

/// Finite difference check of the Jacobian of a constraint map, row by row.
inline double jacobian_fd_error(const ConstraintMap& g, const Vec& x, const Vec& z) {
  const Index n = x.size();
  const Mat J = g.jacobian(x, z);
  Vec u(n + z.size());
  u << x, z;
  double worst = 0.0;
  for (Index i = 0; i < g.dim; ++i) {
    auto gi = [&](const Vec& w) { return g.value(w.head(n), w.tail(w.size() - n))[i]; };
    worst = std::max(worst, rel_err(J.row(i).transpose(), fd_gradient(gi, u)));
  }
  return worst;
}

}  // namespace bilevel::testing
