/// @file test_smo.cpp
/// @brief Schedules, closed-form constants, warm start, subproblem and the driver.

#include "bilevel/instances.hpp"
#include "bilevel/kkt.hpp"
#include "bilevel/smo.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace bilevel;
using namespace bilevel::testing;

namespace {

/**
 * Decoupled instance: f = ||x - b||^2 / 2 + ||y - c||^2 / 2,
 * tf = ||z - a||^2 / 2 (sigma = 1, independent of x), g = -1.
 * The bilevel solution is y = a, x = b.
 */
BilevelProblem decoupled(const Vec& a, const Vec& b, const Vec& c) {
  BilevelProblem p;
  p.name = "decoupled";
  p.n = b.size();
  p.m = a.size();
  p.f2 = box_indicator(Vec::Constant(p.n, -1.0), Vec::Constant(p.n, 1.0));
  p.tf2 = box_indicator(Vec::Constant(p.m, -1.0), Vec::Constant(p.m, 1.0));
  p.f1.value = [b, c](const Vec& x, const Vec& y) {
    return 0.5 * (x - b).squaredNorm() + 0.5 * (y - c).squaredNorm();
  };
  p.f1.gradient = [b, c](const Vec& x, const Vec& y, Vec& gx, Vec& gy) {
    gx = x - b;
    gy = y - c;
  };
  p.f1.lipschitz_grad = 1.0;
  p.f1.lipschitz_val = 2.0 * std::sqrt(double(p.n + p.m));
  p.tf1.value = [a](const Vec&, const Vec& z) { return 0.5 * (z - a).squaredNorm(); };
  p.tf1.gradient = [a](const Vec& x, const Vec& z, Vec& gx, Vec& gz) {
    gx = Vec::Zero(x.size());
    gz = z - a;
  };
  p.tf1.lipschitz_grad = 1.0;
  p.tf1.lipschitz_val = 2.0 * std::sqrt(double(p.m));
  p.sigma = 1.0;
  const Index n = p.n, m = p.m;
  p.g.dim = 1;
  p.g.value = [](const Vec&, const Vec&) { return Vec::Constant(1, -1.0); };
  p.g.jacobian = [n, m](const Vec&, const Vec&) { return Mat::Zero(1, n + m); };
  p.g.sup_norm = 1.0;
  ProblemConstants& k = p.constants;
  k.D_x = 2.0 * std::sqrt(double(n));
  k.D_y = 2.0 * std::sqrt(double(m));
  k.f_hi = 2.0 * (n + m);
  k.f_low = 0.0;
  k.tf_low = 0.0;
  k.tf_star_hi = 0.0;
  k.g_hi = 1.0;
  k.slater_G = 1.0;
  p.lower_value_solver = [](const Vec&) { return 0.0; };
  return p;
}

Vec vec3(double a, double b, double c) {
  Vec v(3);
  v << a, b, c;
  return v;
}

}  // namespace

TEST_CASE("schedule arithmetic") {
  SmoConfig cfg;
  cfg.eps0 = 1.0;
  cfg.tau = 0.8;
  const Schedule s1 = schedule(cfg, 1);
  CHECK(s1.eps == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(s1.rho == doctest::Approx(1.25).epsilon(1e-15));
  CHECK(s1.mu == doctest::Approx(1.953125).epsilon(1e-15));
  cfg.eps0 = 0.7;
  const Schedule s0 = schedule(cfg, 0);
  CHECK(s0.eps == 0.7);
  CHECK(s0.rho == doctest::Approx(1.0 / 0.7).epsilon(1e-15));
  CHECK(s0.mu == doctest::Approx(1.0 / (0.7 * 0.7 * 0.7)).epsilon(1e-15));
  for (long k = 0; k < 30; ++k) {
    const Schedule s = schedule(cfg, k);
    CHECK(std::abs(s.rho * s.eps - 1.0) <= 1e-12);
    CHECK(std::abs(s.mu * s.eps * s.eps * s.eps - 1.0) <= 1e-12);
  }
  CHECK_THROWS_AS(schedule(cfg, -1), InputError);
}

TEST_CASE("outer iteration count") {
  CHECK(outer_iteration_count(1e-2, 1.0, 0.8) == 21);
  CHECK(outer_iteration_count(0.5, 0.5, 0.8) == 0);
  CHECK(outer_iteration_count(0.9, 0.5, 0.8) == 0);
  CHECK(outer_iteration_count(1e-2, 1.0, 0.9) == 44);
}

TEST_CASE("theorem constants: theta formula and L arithmetic") {
  BilevelProblem p = decoupled(Vec::Zero(2), Vec::Zero(2), Vec::Zero(2));
  p.constants.tf_star_hi = 3.0;
  p.constants.tf_low = -1.0;
  p.constants.D_y = 2.5;
  SmoConfig cfg;
  cfg.tau = 0.8;
  cfg.eps0 = 1.0;
  TheoremBounds b = theorem_bounds(p, cfg);
  CHECK(b.theta == doctest::Approx(4.0 / (1.0 - std::pow(0.8, 4)) + 2.5 / (1.0 - std::pow(0.8, 3))));
  CHECK(b.K == 21);

  // All Lipschitz constants and diameters equal to one and theta = 1: choose
  // eps0 = 1 - tau^3 and an exact lower value so that theta collapses to one.
  p.f1.lipschitz_grad = p.tf1.lipschitz_grad = 1.0;
  p.g.lipschitz_val = p.g.lipschitz_grad = 1.0;
  p.constants.g_hi = 1.0;
  p.constants.D_x = p.constants.D_y = 1.0;
  p.constants.tf_star_hi = p.constants.tf_low = 0.0;
  cfg.eps0 = 1.0 - std::pow(0.8, 3);
  b = theorem_bounds(p, cfg);
  CHECK(b.theta == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(b.L == doctest::Approx(1.0 + 2.0 + 2.0 + 2.0 + 2.0 * std::sqrt(2.0)).epsilon(1e-14));
}

TEST_CASE("theorem constants are finite, positive and scale like eps^-7") {
  const BilevelProblem p = gen_linear(5, 5, 2, 1).problem();
  SmoConfig cfg;
  cfg.eps = 1e-2;
  const TheoremBounds b1 = theorem_bounds(p, cfg);
  cfg.eps = 0.5e-2;
  const TheoremBounds b2 = theorem_bounds(p, cfg);
  for (double v : {b1.theta, b1.L, b1.L_tilde, b1.alpha, b1.delta, b1.M, b1.T, b1.N}) {
    CHECK(std::isfinite(v));
    CHECK(v > 0);
  }
  const double ratio = b2.N / b1.N;
  CHECK(ratio >= std::pow(2.0, 7));
  CHECK(ratio <= 2.0 * std::pow(2.0, 7));
  CHECK_FALSE(b1.strongly_convex);
}

TEST_CASE("strongly convex branch constants") {
  const BilevelProblem p = analytic_instance();
  SmoConfig cfg;
  const TheoremBounds b = theorem_bounds(p, cfg);
  CHECK(b.strongly_convex);
  for (double v : {b.alpha_s, b.delta_s, b.M_s, b.T_s, b.N_s}) {
    CHECK(std::isfinite(v));
    CHECK(v > 0);
  }
}

TEST_CASE("warm start: gap implies distance in the strongly convex case") {
  // tf(x, z) = (z - x)^2 with sigma = 2 and an inactive constraint near z = x.
  const BilevelProblem p = analytic_instance();
  const Vec x = Vec::Constant(1, 0.3);
  for (double eps : {0.5, 0.1, 0.01}) {
    const WarmStart w = warm_start_lower(p, x, Vec::Zero(1), 1.0 / eps, std::pow(eps, -3.0), eps,
                                         Vec::Constant(1, -1.5));
    CHECK(w.gap <= eps);
    CHECK(std::abs(w.y[0] - 0.3) <= std::sqrt(2.0 * eps));
  }
}

TEST_CASE("warm start: slack constraint reduces to plain lower minimization") {
  const Vec a = vec3(0.2, -0.4, 0.9);
  const BilevelProblem p = decoupled(a, Vec::Zero(2), Vec::Zero(3));
  const WarmStart w = warm_start_lower(p, Vec::Zero(2), Vec::Zero(1), 1.0, 1e-6, 1e-10, Vec::Zero(3));
  CHECK((w.y - a).norm() <= std::sqrt(2.0 * 1e-10) + 1e-12);
}

TEST_CASE("warm start: an optimal start returns within one iteration") {
  const Vec a = vec3(0.2, -0.4, 0.9);
  const BilevelProblem p = decoupled(a, Vec::Zero(2), Vec::Zero(3));
  const WarmStart w = warm_start_lower(p, Vec::Zero(2), Vec::Zero(1), 2.0, 8.0, 0.1, a);
  CHECK(w.solve.iterations <= 1);
}

TEST_CASE("subproblem: separable z block solves the lower problem") {
  const Vec a = vec3(0.2, -0.4, 0.5), c = vec3(-0.3, 0.1, 0.0);
  const Vec b = Vec::Constant(2, 0.25);
  const BilevelProblem p = decoupled(a, b, c);
  const double rho = 4.0, mu = 64.0, tol = 0.05;
  const SubproblemResult r =
      solve_subproblem(p, Vec::Zero(2), Vec::Zero(3), Vec::Zero(3), Vec::Zero(1), rho, mu, tol);
  CHECK_FALSE(r.solve.flagged);
  // The z gradient is rho (z - a); a residual tol bounds the distance by tol / rho
  // up to the forward-backward displacement.
  CHECK((r.z - a).norm() <= 2.0 * tol / rho);
  // The y block minimizes ||y - c||^2 / 2 + rho ||y - a||^2 / 2.
  const Vec y_star = (c + rho * a) / (1.0 + rho);
  CHECK((r.y - y_star).norm() <= 2.0 * tol);
}

TEST_CASE("subproblem: a true saddle certifies in one step") {
  const Vec a = vec3(0.2, -0.4, 0.5), c = vec3(-0.3, 0.1, 0.0);
  const Vec b = Vec::Constant(2, 0.25);
  const BilevelProblem p = decoupled(a, b, c);
  const double rho = 4.0, mu = 64.0;
  const Vec y_star = (c + rho * a) / (1.0 + rho);
  const SubproblemResult r = solve_subproblem(p, b, y_star, a, Vec::Zero(1), rho, mu, 0.05);
  CHECK(r.solve.outer_iterations == 1);
  CHECK(r.solve.certificate.residual <= 1e-10);
}

TEST_CASE("driver on the decoupled instance: structure and limit point") {
  const Vec a = vec3(0.2, -0.4, 0.5), c = vec3(-0.3, 0.1, 0.0);
  const Vec b = Vec::Constant(2, 0.25);
  const BilevelProblem p = decoupled(a, b, c);
  SmoConfig cfg;
  cfg.eps = 1e-2;
  cfg.x0 = Vec::Zero(2);
  cfg.y0 = Vec::Zero(3);
  const SmoResult r = run_smo(p, cfg);
  const auto& it = r.trace.iterations;
  REQUIRE(it.size() == 22);
  for (size_t k = 0; k < it.size(); ++k) {
    CHECK(it[k].lemma_holds);
    CHECK_FALSE(it[k].step3_flagged);
    if (k > 0) {
      CHECK(it[k].eps / it[k - 1].eps == doctest::Approx(0.8).epsilon(1e-12));
      CHECK(it[k].mu / it[k - 1].mu == doctest::Approx(std::pow(0.8, -3)).epsilon(1e-12));
      CHECK(it[k].calls.total() >= it[k - 1].calls.total());
    }
  }
  CHECK(it.back().eps <= cfg.eps);
  CHECK((r.lambda.array() >= 0).all());
  CHECK((r.y - a).norm() <= 0.05);
  CHECK((r.x - b).norm() <= 0.05);
  CHECK(r.calls.total() == it.back().calls.total());
}

TEST_CASE("config validation") {
  const BilevelProblem p = analytic_instance();
  SmoConfig cfg;
  cfg.x0 = Vec::Zero(1);
  cfg.y0 = Vec::Zero(1);
  cfg.eps0 = 0.5 * 0.8 * cfg.eps;
  CHECK_THROWS_AS(cfg.validate(p), InputError);
  cfg.eps0 = 1.0;
  cfg.y0 = Vec::Constant(1, 3.0);
  CHECK_THROWS_AS(cfg.validate(p), InputError);
  cfg.y0 = Vec::Zero(1);
  cfg.lambda0 = Vec::Constant(1, -1.0);
  CHECK_THROWS_AS(cfg.validate(p), InputError);
}
