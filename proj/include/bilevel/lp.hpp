#pragma once

#include "bilevel/errors.hpp"

namespace bilevel {

/// Outcome of a linear program solve.
enum class LpStatus { Optimal, Infeasible };

struct LpResult {
  LpStatus status = LpStatus::Infeasible;
  Vec x;
  double value = 0.0;
  long pivots = 0;
};

/**
 * Dense two-phase simplex method with Bland's rule for
 *   min c^T x  subject to  A x <= b,  lo <= x <= hi,
 * with finite bounds (the problem is therefore never unbounded).
 *
 * Intended for the small lower level programs of the affine instance families,
 * where an exact vertex solution serves as the reference value.
 *
 * @param c   objective coefficients (size d)
 * @param A   inequality matrix (r x d), r may be zero
 * @param b   inequality right-hand side (size r)
 * @param lo  finite lower bounds (size d)
 * @param hi  finite upper bounds (size d), hi >= lo
 * @throws InputError on inconsistent sizes or non-finite data
 * @throws NonConvergence if the pivot cap is exceeded
 */
LpResult solve_lp(const Vec& c, const Mat& A, const Vec& b, const Vec& lo, const Vec& hi);

/**
 * Largest uniform slack t such that one point z in [z_lo, z_hi] satisfies
 *   A_i x + B_i z - b_i <= -t  for every x in [x_lo, x_hi] and every row i.
 * This is a lower bound on the Slater margin of the constraint A x + B z - b <= 0.
 */
double uniform_slater_margin(const Mat& A, const Mat& B, const Vec& b, const Vec& x_lo,
                             const Vec& x_hi, const Vec& z_lo, const Vec& z_hi);

}  // namespace bilevel
