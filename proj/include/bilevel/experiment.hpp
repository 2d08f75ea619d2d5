#pragma once

#include "bilevel/instances.hpp"
#include "bilevel/kkt.hpp"
#include "bilevel/libsvm.hpp"
#include "bilevel/smo.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace bilevel {

/// Result of the single minimax penalty method.
struct PenaltyResult {
  Vec x, y, z;
  NccResult solve;
  OracleCounts calls;
  double rho = 0.0;
  double mu = 0.0;  ///< Penalty weight of ||[g]_+||^2 inside the rho-scaled bracket.
};

/**
 * Solves min_{x,y} max_z f + rho (tf(x, y) + mu ||[g(x, y)]_+||^2 - tf(x, z) - mu ||[g(x, z)]_+||^2)
 * to a tol-primal-dual stationary point from start = (x, y, z).
 * This is the minimax subproblem with lambda = 0 and penalty 2 rho mu.
 */
PenaltyResult penalty_baseline(const BilevelProblem& prob, double rho, double mu, double tol,
                               const Vec& x0, const Vec& y0, const Vec& z0,
                               const NccOptions& options = {});

/// Solver tags used in records and configs.
inline constexpr const char* kMethodSmo = "smo";
inline constexpr const char* kMethodPenalty = "penalty-baseline";

/// One row of the results table.
struct RunRecord {
  std::string instance_id;
  std::string method;
  Index n = 0, m = 0, l = 0;
  std::uint64_t seed = 0;
  double f_init = 0.0;
  double f_final = 0.0;
  KktReport kkt;
  OracleCounts calls;
  long outer_iters = 0;
  double wall_ms = 0.0;
  bool ok = false;
  std::string error;  ///< Empty when ok.
  /// ||[g(x, y)]_+|| <= 1e-2 and tf(x, y) - tf*(x) <= 1e-2.
  bool stopping_conditions = false;
  bool certified = false;
  // Output point, kept for re-verification.
  Vec x, y, z, lambda_last;
  double rho = 0.0, mu = 0.0, eps = 0.0;
};

/// Exactly the fixed CSV header.
std::string csv_header();
/// One CSV line (without newline) for the record; non-finite values print as nan.
std::string csv_row(const RunRecord& r);
/// Markdown table with one row per record and a mean row per (family, dims, method) group.
std::string markdown_table(const std::vector<RunRecord>& records);

/// Problem, start point and reference objective of one benchmark instance.
struct PreparedInstance {
  std::string id;
  std::string family;
  Index n = 0, m = 0, l = 0;
  std::uint64_t seed = 0;
  BilevelProblem problem;
  Vec x0, y0, z0;
  double f_init = 0.0;
  LowerValueOracle oracle;
  /// Serialized instance for later verification.
  std::string json;
};

struct SvmSource {
  std::string dataset;  ///< LIBSVM path; empty selects the synthetic generator.
  Index samples = 100;
  Index features = 5;
  double noise = 0.1;
};

/// Contents of the JSON configuration document.
struct ExperimentConfig {
  std::vector<std::string> families{"linear"};
  std::vector<std::array<Index, 3>> dims{{20, 20, 3}};
  std::vector<std::uint64_t> seeds{1};
  double eps = 1e-2;
  double tau = 0.8;
  double eps0 = 1.0;
  std::vector<std::string> methods{kMethodSmo};
  std::string csv = "results.csv";
  std::string markdown = "results.md";
  std::string points_dir = "points";
  SvmSource svm;
  double time_limit_seconds = 0.0;  ///< Per run; 0 disables the limit.
  int jobs = 1;

  /// Throws InputError on unknown families or methods and invalid parameters.
  void validate() const;
};

/// Parses the configuration document; throws ParseError on malformed JSON.
ExperimentConfig parse_config(const std::string& text);

/// Builds the instance for (family, dims, seed); for svm the dims are ignored.
PreparedInstance prepare_instance(const std::string& family, const std::array<Index, 3>& dims,
                                  std::uint64_t seed, const SvmSource& svm);

/// Rebuilds a problem from its serialized form.
PreparedInstance instance_from_document(const std::string& text);

/// Runs one method on one instance; failures are captured in the record.
RunRecord run_one(const PreparedInstance& inst, const std::string& method,
                  const ExperimentConfig& config);

/// Serializes the output point of a record for `bench verify`.
std::string point_json(const RunRecord& r);

/// KKT residuals of a serialized point on a prepared instance.
KktReport verify_point(const PreparedInstance& inst, const std::string& point_text);

/**
 * Runs every instance and method with up to `jobs` worker threads. Records
 * come back in configuration order regardless of completion order.
 */
std::vector<RunRecord> run_experiment(const ExperimentConfig& config);

}  // namespace bilevel
