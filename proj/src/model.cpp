#include "bilevel/model.hpp"

#include <cmath>

namespace bilevel {

namespace {

void require_domain(const ProxFriendlyFn& p, const Vec& u, const char* name) {
  if (u.size() != p.dim || !p.contains(u))
    throw InputError(std::string(name) + " lies outside its domain");
}

}  // namespace

void jacobian_transpose_times(const ConstraintMap& g, const Vec& x, const Vec& z, const Vec& v,
                              Vec& gx, Vec& gz) {
  if (g.jacobian_transpose_times) {
    g.jacobian_transpose_times(x, z, v, gx, gz);
    return;
  }
  const Mat J = g.jacobian(x, z);
  gx = J.leftCols(x.size()).transpose() * v;
  gz = J.rightCols(z.size()).transpose() * v;
}

void ProblemConstants::validate() const {
  const double all[] = {D_x, D_y, f_hi, f_low, tf_low, tf_star_hi, g_hi, slater_G};
  for (double c : all)
    if (!std::isfinite(c)) throw InputError("problem constants must be finite");
  if (D_x < 0 || D_y < 0 || g_hi < 0) throw InputError("diameters and g_hi must be nonnegative");
  if (f_low > f_hi) throw InputError("f_low exceeds f_hi");
  if (tf_low > tf_star_hi) throw InputError("tf_low exceeds tf_star_hi");
}

void BilevelProblem::validate() const {
  if (n <= 0 || m <= 0) throw InputError("problem dimensions must be positive");
  if (f2.dim != n || tf2.dim != m) throw InputError("domain dimensions do not match (n, m)");
  if (!f1.value || !f1.gradient || !tf1.value || !tf1.gradient)
    throw InputError("smooth parts must provide value and gradient");
  if (!g.value || !g.jacobian) throw InputError("constraint map must provide value and Jacobian");
  if (!std::isfinite(f2.diameter) || !std::isfinite(tf2.diameter))
    throw InputError("domains must be bounded");
  if (sigma < 0 || !std::isfinite(sigma)) throw InputError("sigma must be finite and nonnegative");
  constants.validate();
}

double clipped_sq_norm(const Vec& lam, double mu, const Vec& g_val) {
  return (lam + mu * g_val).cwiseMax(0.0).squaredNorm();
}

double eval_lower_al(const BilevelProblem& prob, const Vec& x, const Vec& z,
                     const Multipliers& lam, double rho, double mu) {
  require_domain(prob.f2, x, "x");
  require_domain(prob.tf2, z, "z");
  if (!(rho > 0) || !(mu > 0)) throw InputError("rho and mu must be positive");
  require_size(lam, prob.g.dim, "lambda");
  return prob.tf(x, z) + clipped_sq_norm(lam, mu, prob.g.value(x, z)) / (2.0 * rho * mu);
}

double eval_minimax_lagrangian(const BilevelProblem& prob, const Vec& x, const Vec& y,
                               const Vec& z, const Multipliers& lam, double rho, double mu) {
  require_domain(prob.f2, x, "x");
  require_domain(prob.tf2, y, "y");
  require_domain(prob.tf2, z, "z");
  if (!(rho > 0) || !(mu > 0)) throw InputError("rho and mu must be positive");
  require_size(lam, prob.g.dim, "lambda");
  const double py = clipped_sq_norm(lam, mu, prob.g.value(x, y)) / (2.0 * mu);
  const double pz = clipped_sq_norm(lam, mu, prob.g.value(x, z)) / (2.0 * mu);
  // Differences first, so that y = z cancels exactly.
  return prob.f(x, y) + (rho * (prob.tf(x, y) - prob.tf(x, z)) + (py - pz));
}

Multipliers update_multiplier(const Multipliers& lam, double mu, const Vec& g_val) {
  if (lam.size() != g_val.size()) throw InputError("multiplier and constraint sizes differ");
  return (lam + mu * g_val).cwiseMax(0.0);
}

double lipschitz_outer(const BilevelProblem& prob, double rho, double mu, double lam_norm) {
  const double Lg = prob.g.lipschitz_val;
  const double LJ = prob.g.lipschitz_grad;
  return prob.f1.lipschitz_grad + 2.0 * rho * prob.tf1.lipschitz_grad + 2.0 * mu * Lg * Lg +
         2.0 * mu * prob.g.sup_norm * LJ + 2.0 * lam_norm * LJ;
}

double lipschitz_lower(const BilevelProblem& prob, double rho, double mu, double lam_norm) {
  const double Lg = prob.g.lipschitz_val;
  const double LJ = prob.g.lipschitz_grad;
  return prob.tf1.lipschitz_grad +
         (mu * Lg * Lg + mu * prob.g.sup_norm * LJ + lam_norm * LJ) / rho;
}

double spectral_norm(const Mat& M) {
  if (M.size() == 0) return 0.0;
  Eigen::JacobiSVD<Mat> svd(M);
  return svd.singularValues()(0);
}

BoxAffineConstants box_affine_constants(const Vec& x_lo, const Vec& x_hi, const Vec& y_lo,
                                        const Vec& y_hi, const Mat& A, const Mat& B,
                                        const Vec& b) {
  BoxAffineConstants c;
  c.D_x = (x_hi - x_lo).norm();
  c.D_y = (y_hi - y_lo).norm();
  // Each component of A x + B z - b is affine, so its largest magnitude over
  // the box is attained at a corner chosen coordinatewise.
  double sq = 0.0;
  for (Index i = 0; i < b.size(); ++i) {
    double hi = -b[i];
    double lo = -b[i];
    for (Index j = 0; j < A.cols(); ++j) {
      hi += std::max(A(i, j) * x_lo[j], A(i, j) * x_hi[j]);
      lo += std::min(A(i, j) * x_lo[j], A(i, j) * x_hi[j]);
    }
    for (Index j = 0; j < B.cols(); ++j) {
      hi += std::max(B(i, j) * y_lo[j], B(i, j) * y_hi[j]);
      lo += std::min(B(i, j) * y_lo[j], B(i, j) * y_hi[j]);
    }
    const double worst = std::max(std::abs(hi), std::abs(lo));
    sq += worst * worst;
  }
  c.g_hi = std::sqrt(sq);
  Mat AB(b.size(), A.cols() + B.cols());
  AB << A, B;
  c.L_g = spectral_norm(AB);
  return c;
}

}  // namespace bilevel
