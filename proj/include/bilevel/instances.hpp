#pragma once

#include "bilevel/model.hpp"

#include <cstdint>
#include <random>
#include <string>

namespace bilevel {

/**
 * Random stream for instance `index` of a run seeded with `seed`.
 *
 * The stream is std::mt19937_64 seeded with splitmix64(seed + (index + 1) *
 * 0x9E3779B97F4A7C15). Normal and uniform draws use the standard library
 * distributions, so bitwise reproducibility holds for a fixed standard library.
 */
std::mt19937_64 instance_rng(std::uint64_t seed, std::uint64_t index = 0);

/// One round of the splitmix64 mixer.
std::uint64_t splitmix64(std::uint64_t x);

/// Instance families with an affine lower level.
enum class Family { Linear, Quadlinear };

std::string family_name(Family f);
/// Throws InputError for unknown names.
Family parse_family(const std::string& name);

/**
 * Data of an instance with boxes [-1, 1], upper objective
 *   x^T A x + x^T B y + y^T C y + c^T x + d^T y
 * (A = B = C = 0 for the linear family), lower objective dt^T z and
 * constraint At x + Bt z - bt <= 0.
 */
struct AffineInstance {
  Family family = Family::Linear;
  Index n = 0, m = 0, l = 0;
  std::uint64_t seed = 0;
  Mat A, B, C;  ///< Quadratic upper blocks (n x n, n x m, m x m).
  Vec c, d;
  Mat At, Bt;
  Vec bt, dt;
  Vec y_hat;  ///< Lower level solution at x = 0 planted by the generator.

  /// Builds the bilevel problem with all constants and the exact lower value solver.
  BilevelProblem problem() const;
  /// f(0, y_hat).
  double initial_objective() const;
  void validate() const;
};

/**
 * Linear family: c, d standard normal; At, Bt with standard deviation 0.01;
 * y_hat normal with standard deviation 0.1 clipped to [-1, 1]. dt and bt are
 * chosen so that y_hat solves the lower level at x = 0: the first constraint is
 * active at y_hat with dt = -omega Bt_1 / ||Bt_1||, omega uniform on [0.5, 1.5],
 * and the other rows carry slack ||At_i||_1 + ||Bt_i||_1. Draws are repeated,
 * up to 10 times, until the uniform Slater margin exceeds 1e-6.
 *
 * @throws InputError on nonpositive dimensions
 * @throws NumericalFailure if no draw yields a strictly feasible lower level
 */
AffineInstance gen_linear(Index n, Index m, Index l, std::uint64_t seed);

/// Quadratic upper level with A, B, C, c, d of standard deviation 0.1 and the
/// lower level of the linear family.
AffineInstance gen_quadlinear(Index n, Index m, Index l, std::uint64_t seed);

AffineInstance generate(Family family, Index n, Index m, Index l, std::uint64_t seed);

/// JSON text with row-major matrices; byte-identical for identical instances.
std::string to_json(const AffineInstance& inst);
/// Throws ParseError on malformed documents.
AffineInstance instance_from_json(const std::string& text);

}  // namespace bilevel

namespace bilevel {

/**
 * One dimensional instance with a closed form solution:
 *   f(x, y) = (x - 1)^2 + (y - 1)^2 on [-2, 2]^2,
 *   tf(x, z) = (z - x)^2 (sigma = 2), g(x, z) = z - x - 0.5 <= 0.
 * The lower solution is y*(x) = x, so the bilevel optimum is (1, 1) with
 * inactive constraint and zero lower value.
 */
BilevelProblem analytic_instance();

}  // namespace bilevel
