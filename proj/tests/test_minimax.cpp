/// @file test_minimax.cpp
/// @brief Strongly convex strongly concave solver against direct saddle points,
/// and the nonconvex concave solver against recomputed certificates.

#include "bilevel/minimax.hpp"
#include "toys.hpp"

#include <doctest.h>

using namespace bilevel;
using namespace bilevel::toys;

TEST_CASE("scsc lands on the linear system saddle") {
  std::mt19937_64 rng(404);
  for (int trial = 0; trial < 5; ++trial) {
    const QuadraticSaddle s = random_saddle(rng);
    const ScscSpec spec = s.spec();
    const ScscResult r = solve_scsc(spec, 1e-8, Vec::Zero(5), Vec::Zero(5));
    const Vec ref = direct_saddle(s);
    CHECK((ref.head(5) - s.x_star).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((r.certificate.x - ref.head(5)).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK((r.certificate.y - ref.tail(5)).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK(r.certificate.residual <= 1e-8);
  }
}

TEST_CASE("scsc at a true saddle certifies immediately") {
  std::mt19937_64 rng(5);
  const QuadraticSaddle s = random_saddle(rng);
  const ScscResult r = solve_scsc(s.spec(), 1e-6, Vec(-s.sigma_x * s.x_star), s.y_star);
  CHECK(r.outer_iterations == 1);
  CHECK(r.certificate.residual <= 1e-6);
}

TEST_CASE("pd_residual vanishes at the saddle and matches the box formula") {
  std::mt19937_64 rng(6);
  const QuadraticSaddle s = random_saddle(rng);
  const ScscSpec spec = s.spec();
  CHECK(pd_residual(spec.hbar, spec.p, spec.q, 0.1, s.x_star, s.y_star).residual < 1e-12);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  Vec x(5), y(5);
  for (Index i = 0; i < 5; ++i) {
    x[i] = u(rng);
    y[i] = u(rng);
  }
  const double lib = pd_residual(spec.hbar, spec.p, spec.q, 0.05, x, y).residual;
  CHECK(lib == doctest::Approx(box_pd_residual(spec.hbar, 0.05, x, y, -10.0, 10.0)).epsilon(1e-10));
}

TEST_CASE("scsc rejects invalid moduli and starts") {
  std::mt19937_64 rng(8);
  ScscSpec spec = random_saddle(rng).spec();
  spec.sigma_y = 0.0;
  CHECK_THROWS_AS(solve_scsc(spec, 1e-6, Vec::Zero(5), Vec::Zero(5)), InputError);
  spec = random_saddle(rng).spec();
  CHECK_THROWS_AS(solve_scsc(spec, 1e-6, Vec::Zero(5), Vec::Constant(5, 11.0)), InputError);
  CHECK_THROWS_AS(solve_scsc(spec, 1e-6, Vec::Zero(4), Vec::Zero(5)), InputError);
}

TEST_CASE("ncc certificates hold on the original coupling") {
  std::mt19937_64 rng(909);
  for (double c : {0.0, 0.5}) {
    const NccToy toy = random_ncc_toy(rng, c);
    const MinimaxProblem prob = toy.problem();
    const double eps = 1e-2;
    const double eps_hat0 = eps / 2.0;
    const Vec x0 = Vec::Constant(3, 0.2), y0 = Vec::Zero(3);
    const NccResult r = solve_ncc(prob, eps, eps_hat0, x0, y0);
    CHECK_FALSE(r.flagged);
    const double indep = box_pd_residual(prob.h, r.certificate.step, r.certificate.base_x,
                                         r.certificate.base_y, -1.0, 1.0);
    CHECK(indep <= eps);
    CHECK(indep == doctest::Approx(r.certificate.residual).epsilon(1e-9));
    // Upper envelope inequality of the proximal point method.
    const double sh = r.sigma_y_hat, L = prob.lipschitz, Dq = prob.q.diameter;
    const double rhs = toy.max_y(x0) + (sh - prob.sigma_y) * Dq * Dq / 2.0 +
                       2.0 * eps_hat0 * eps_hat0 * (1.0 / L + L / (sh * sh));
    CHECK(toy.max_y(r.certificate.x) <= rhs + 1e-12);
  }
}

TEST_CASE("regularized coupling adds the proximal terms") {
  std::mt19937_64 rng(3);
  const NccToy toy = random_ncc_toy(rng, 0.0);
  const MinimaxProblem prob = toy.problem();
  const Vec xk = Vec::Constant(3, 0.1), ya = Vec::Constant(3, -0.2);
  const RegularizedCoupling reg = regularized_h(prob, xk, ya, 0.04);
  const Vec x = Vec::Constant(3, 0.3), y = Vec::Constant(3, 0.5);
  const double w = 0.04 / (4.0 * prob.q.diameter);
  const double expected = prob.h.value(x, y) - w * (y - ya).squaredNorm() +
                          prob.lipschitz * (x - xk).squaredNorm();
  CHECK(reg.h.value(x, y) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(reg.sigma_y_hat == doctest::Approx(0.04 / (2.0 * prob.q.diameter)));
}

TEST_CASE("ncc rejects an initial inner tolerance above eps / 2") {
  std::mt19937_64 rng(4);
  const MinimaxProblem prob = random_ncc_toy(rng, 0.0).problem();
  CHECK_THROWS_AS(solve_ncc(prob, 1e-2, 0.6e-2, Vec::Zero(3), Vec::Zero(3)), InputError);
}
