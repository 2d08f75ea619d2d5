#include "bilevel/lp.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace bilevel {

namespace {

constexpr double kPivotTol = 1e-11;

/**
 * Tableau for min c^T v subject to T v = rhs, v >= 0, with rhs >= 0 and a
 * starting basis given by `basis`. Rows of `T` are kept in canonical form.
 */
struct Tableau {
  Mat T;
  Vec rhs;
  std::vector<Index> basis;
  long pivots = 0;

  void pivot(Index row, Index col) {
    const double piv = T(row, col);
    T.row(row) /= piv;
    rhs[row] /= piv;
    for (Index i = 0; i < T.rows(); ++i) {
      if (i == row) continue;
      const double f = T(i, col);
      if (f == 0.0) continue;
      T.row(i) -= f * T.row(row);
      rhs[i] -= f * rhs[row];
    }
    basis[static_cast<size_t>(row)] = col;
    ++pivots;
  }

  /// Runs primal simplex on cost vector `cost` restricted to columns < ncols.
  void optimize(const Vec& cost, Index ncols, long cap) {
    for (;;) {
      if (pivots > cap) throw NonConvergence("simplex pivot cap exceeded", Vec());
      Vec y(T.rows());
      for (Index i = 0; i < T.rows(); ++i) y[i] = cost[basis[static_cast<size_t>(i)]];
      // Bland's rule: entering column is the smallest index with negative reduced cost.
      Index enter = -1;
      for (Index j = 0; j < ncols; ++j) {
        const double red = cost[j] - y.dot(T.col(j));
        if (red < -1e-10) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return;
      Index leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (Index i = 0; i < T.rows(); ++i) {
        if (T(i, enter) > kPivotTol) {
          const double ratio = rhs[i] / T(i, enter);
          if (ratio < best - 1e-14 ||
              (std::abs(ratio - best) <= 1e-14 && leave >= 0 &&
               basis[static_cast<size_t>(i)] < basis[static_cast<size_t>(leave)])) {
            best = ratio;
            leave = i;
          }
        }
      }
      // Bounded feasible region: an improving ray cannot exist.
      if (leave < 0) throw NumericalFailure("simplex found an unbounded direction", Vec());
      pivot(leave, enter);
    }
  }
};

}  // namespace

LpResult solve_lp(const Vec& c, const Mat& A, const Vec& b, const Vec& lo, const Vec& hi) {
  const Index d = c.size();
  const Index r = A.rows();
  if (lo.size() != d || hi.size() != d || b.size() != r || (r > 0 && A.cols() != d))
    throw InputError("linear program has inconsistent sizes");
  require_finite(c, "c");
  require_finite(b, "b");
  require_finite(lo, "lo");
  require_finite(hi, "hi");
  if (!A.allFinite()) throw InputError("A must be finite");
  if ((hi - lo).minCoeff() < 0) throw InputError("bounds are inverted");

  // Shift v = x - lo, so 0 <= v <= u. Rows: A v <= b - A lo and v <= u, each
  // with its own slack. Columns: v (d), slacks (r + d), artificials.
  const Vec u = hi - lo;
  const Index rows = r + d;
  Mat M = Mat::Zero(rows, d + rows);
  Vec rhs(rows);
  if (r > 0) {
    M.topLeftCorner(r, d) = A;
    rhs.head(r) = b - A * lo;
  }
  M.bottomLeftCorner(d, d).setIdentity();
  rhs.tail(d) = u;
  M.rightCols(rows).setIdentity();
  std::vector<Index> art_rows;
  for (Index i = 0; i < rows; ++i) {
    if (rhs[i] < 0) {
      M.row(i) *= -1.0;
      rhs[i] *= -1.0;
      art_rows.push_back(i);
    }
  }
  const Index nreal = d + rows;
  const Index nart = static_cast<Index>(art_rows.size());
  Tableau tab;
  tab.T = Mat::Zero(rows, nreal + nart);
  tab.T.leftCols(nreal) = M;
  tab.rhs = rhs;
  tab.basis.resize(static_cast<size_t>(rows));
  for (Index i = 0; i < rows; ++i) tab.basis[static_cast<size_t>(i)] = d + i;
  for (Index a = 0; a < nart; ++a) {
    const Index i = art_rows[static_cast<size_t>(a)];
    tab.T(i, nreal + a) = 1.0;
    tab.basis[static_cast<size_t>(i)] = nreal + a;
  }
  const long cap = 50L * (rows + nreal + nart) * (rows + 1) + 10000;

  LpResult res;
  if (nart > 0) {
    Vec phase1 = Vec::Zero(nreal + nart);
    phase1.tail(nart).setOnes();
    tab.optimize(phase1, nreal + nart, cap);
    double infeas = 0.0;
    for (Index i = 0; i < rows; ++i)
      if (tab.basis[static_cast<size_t>(i)] >= nreal) infeas += tab.rhs[i];
    if (infeas > 1e-9 * (1.0 + rhs.lpNorm<Eigen::Infinity>())) {
      res.status = LpStatus::Infeasible;
      res.pivots = tab.pivots;
      return res;
    }
    // Drive zero-level artificials out of the basis where possible.
    for (Index i = 0; i < rows; ++i) {
      if (tab.basis[static_cast<size_t>(i)] < nreal) continue;
      for (Index j = 0; j < nreal; ++j) {
        if (std::abs(tab.T(i, j)) > 1e-9) {
          tab.pivot(i, j);
          break;
        }
      }
    }
  }
  Vec cost = Vec::Zero(nreal + nart);
  cost.head(d) = c;
  // Remaining artificial columns are excluded from entering.
  tab.optimize(cost, nreal, cap);
  Vec v = Vec::Zero(nreal + nart);
  for (Index i = 0; i < rows; ++i) v[tab.basis[static_cast<size_t>(i)]] = tab.rhs[i];
  res.status = LpStatus::Optimal;
  res.x = (lo + v.head(d)).cwiseMax(lo).cwiseMin(hi);
  res.value = c.dot(res.x);
  res.pivots = tab.pivots;
  return res;
}

double uniform_slater_margin(const Mat& A, const Mat& B, const Vec& b, const Vec& x_lo,
                             const Vec& x_hi, const Vec& z_lo, const Vec& z_hi) {
  const Index l = b.size();
  const Index m = B.cols();
  if (A.rows() != l || B.rows() != l) throw InputError("constraint blocks have inconsistent rows");
  // Worst case of A_i x over the box, then maximize t subject to
  // B_i z + t <= b_i - max_x A_i x over z in its box.
  Vec rhs(l);
  for (Index i = 0; i < l; ++i) {
    double worst = 0.0;
    for (Index j = 0; j < A.cols(); ++j)
      worst += std::max(A(i, j) * x_lo[j], A(i, j) * x_hi[j]);
    rhs[i] = b[i] - worst;
  }
  const double bound = 1.0 + rhs.cwiseAbs().sum() + (B.cwiseAbs() * z_lo.cwiseAbs().cwiseMax(z_hi.cwiseAbs())).sum();
  Mat Al(l, m + 1);
  Al << B, Vec::Ones(l);
  Vec c = Vec::Zero(m + 1);
  c[m] = -1.0;
  Vec lo(m + 1), hi(m + 1);
  lo << z_lo, -bound;
  hi << z_hi, bound;
  const LpResult r = solve_lp(c, Al, rhs, lo, hi);
  if (r.status != LpStatus::Optimal) throw NumericalFailure("Slater margin program infeasible", Vec());
  return -r.value;
}

}  // namespace bilevel
