/// @file test_bench.cpp
/// @brief Generators, LIBSVM ingestion, records, tables and configuration.

#include "bilevel/experiment.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace bilevel;
using namespace bilevel::testing;

TEST_CASE("generators are deterministic under a fixed seed") {
  for (Family f : {Family::Linear, Family::Quadlinear}) {
    const std::string a = to_json(generate(f, 6, 5, 2, 42));
    const std::string b = to_json(generate(f, 6, 5, 2, 42));
    const std::string c = to_json(generate(f, 6, 5, 2, 43));
    CHECK(a == b);
    CHECK(a != c);
  }
}

TEST_CASE("instance JSON round trip is byte identical") {
  const AffineInstance in = gen_quadlinear(4, 3, 2, 9);
  const std::string text = to_json(in);
  CHECK(to_json(instance_from_json(text)) == text);
  CHECK_THROWS_AS(instance_from_json("{\"family\": \"linear\"}"), ParseError);
  CHECK_THROWS_AS(instance_from_json("not json"), ParseError);
}

TEST_CASE("quadratic family with zero quadratic blocks is a linear objective") {
  AffineInstance in = gen_quadlinear(4, 4, 2, 5);
  in.A.setZero();
  in.B.setZero();
  in.C.setZero();
  const BilevelProblem p = in.problem();
  std::mt19937_64 rng(1);
  const Vec x = uniform_vec(rng, 4, -1.0, 1.0), y = uniform_vec(rng, 4, -1.0, 1.0);
  CHECK(p.f(x, y) == doctest::Approx(in.c.dot(x) + in.d.dot(y)).epsilon(1e-14));
  CHECK(p.f1.lipschitz_grad == doctest::Approx(0.0));
}

TEST_CASE("planted lower solution and Slater margin of generated instances") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const AffineInstance in = gen_linear(20, 20, 3, seed);
    const BilevelProblem p = in.problem();
    CHECK(p.constants.slater_G > 1e-6);
    CHECK(p.lower_value_solver(Vec::Zero(20)) == doctest::Approx(p.tf(Vec::Zero(20), in.y_hat)).epsilon(1e-9));
    CHECK(in.initial_objective() == doctest::Approx(p.f(Vec::Zero(20), in.y_hat)));
  }
}

TEST_CASE("paper-scale instance has an objective of order one") {
  const AffineInstance in = gen_linear(100, 100, 5, 1);
  CHECK(std::abs(in.initial_objective()) < 10.0);
  CHECK(std::isfinite(in.initial_objective()));
}

TEST_CASE("generator rejects nonpositive dimensions") {
  CHECK_THROWS_AS(gen_linear(0, 3, 1, 1), InputError);
  CHECK_THROWS_AS(parse_family("cubic"), InputError);
}

TEST_CASE("LIBSVM parsing, errors and round trip") {
  const Dataset d = parse_libsvm("+1 1:0.5 3:-2\n-1 2:1.25\n\n+1 1:1e-3 2:4 3:0.125\n");
  CHECK(d.samples() == 3);
  CHECK(d.features() == 3);
  CHECK(d.X(0, 2) == -2.0);
  CHECK(d.X(1, 0) == 0.0);
  CHECK(d.labels[1] == -1.0);
  const Dataset e = parse_libsvm(to_libsvm(d));
  CHECK(e.X == d.X);
  CHECK(e.labels == d.labels);
  CHECK(to_libsvm(e) == to_libsvm(d));
  try {
    parse_libsvm("1 3:abc\n");
    FAIL("expected ParseError");
  } catch (const ParseError& err) {
    CHECK(err.line() == 1);
  }
  try {
    parse_libsvm("1 1:2\n-1 3:1 2:4\n");
    FAIL("expected ParseError");
  } catch (const ParseError& err) {
    CHECK(err.line() == 2);
  }
  CHECK_THROWS_AS(parse_libsvm("x 1:2\n"), ParseError);
}

TEST_CASE("synthetic SVM data round trips and builds a valid problem") {
  const Dataset d = synthetic_svm_dataset(100, 5, 0.1, 3);
  CHECK(d.samples() == 100);
  const Dataset e = parse_libsvm(to_libsvm(d));
  CHECK(e.X == d.X);
  const SvmInstance s = build_svm_problem(d, 3);
  CHECK(s.validation.samples() == 25);
  CHECK(s.train.samples() == 75);
  CHECK(s.problem.n == 75);
  CHECK(s.problem.m == 5 + 1 + 75);
  CHECK_NOTHROW(s.problem.validate());
  const Vec y0 = s.random_start(3);
  CHECK(s.problem.tf2.contains(y0));
  CHECK(s.validation_accuracy(y0) >= 0.0);
}

TEST_CASE("one class or empty split is an input error") {
  Dataset d;
  d.X = Mat::Ones(8, 2);
  d.labels = Vec::Ones(8);
  CHECK_THROWS_AS(build_svm_problem(d, 1), InputError);
  d.labels[0] = -1;
  d.X = Mat::Ones(2, 2);
  d.labels = Vec::Ones(2);
  d.labels[1] = -1;
  CHECK_THROWS_AS(build_svm_problem(d, 1), InputError);
}

TEST_CASE("separable toy: the lower solution needs no slack") {
  Dataset d;
  d.X = Mat(8, 1);
  d.labels = Vec(8);
  for (Index i = 0; i < 8; ++i) {
    d.X(i, 0) = i % 2 == 0 ? 1.0 : -1.0;
    d.labels[i] = i % 2 == 0 ? 1.0 : -1.0;
  }
  const SvmInstance s = build_svm_problem(d, 2);
  LowerValueOracle o;
  o.method = LowerValueOracle::Method::AugmentedLagrangian;
  o.tolerance = 1e-8;
  const Vec c = Vec::Ones(s.problem.n);
  const LowerValue v = lower_optimal_value_detail(s.problem, c, o);
  CHECK(v.minimizer.tail(s.problem.n).cwiseAbs().maxCoeff() <= 1e-3);
  CHECK(v.minimizer[0] == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("CSV header is fixed and failed runs print nan") {
  CHECK(csv_header() ==
        "instance_id,method,n,m,l,seed,f_init,f_final,stat_xy,stat_z,feas_y,feas_z,compl_y,"
        "compl_z,value_gap,grad_calls_f1,grad_calls_tf1,grad_calls_g,prox_calls_f2,"
        "prox_calls_tf2,outer_iters,wall_ms");
  RunRecord r;
  r.instance_id = "linear-2-2-1-1";
  r.method = kMethodSmo;
  r.n = 2;
  r.m = 2;
  r.l = 1;
  r.seed = 1;
  r.f_init = 0.5;
  r.ok = false;
  const std::string row = csv_row(r);
  CHECK(row.rfind("linear-2-2-1-1,smo,2,2,1,1,0.5,nan,nan", 0) == 0);
  size_t commas = 0;
  for (char ch : row) commas += ch == ',';
  CHECK(commas == 21);
}

TEST_CASE("markdown table has one row per record and a mean row per group") {
  std::vector<RunRecord> recs;
  for (int s = 1; s <= 10; ++s) {
    RunRecord r;
    r.instance_id = "linear-20-20-3-" + std::to_string(s);
    r.method = kMethodSmo;
    r.f_init = 1.0;
    r.f_final = -1.0 * s;
    r.ok = true;
    r.calls.grad_f1 = 10 * s;
    r.wall_ms = 1000.0;
    r.stopping_conditions = true;
    recs.push_back(r);
  }
  const std::string md = markdown_table(recs);
  size_t rows = 0;
  for (size_t pos = 0; (pos = md.find("| linear-20-20-3-", pos)) != std::string::npos; ++pos) ++rows;
  CHECK(rows == 10);
  CHECK(md.find("| linear-20-20-3 / smo | 10 | 10 | 1.0000 | -5.5000 |") != std::string::npos);
}

TEST_CASE("config parsing with defaults and errors") {
  const ExperimentConfig c = parse_config(
      R"({"families":["linear","svm"],"dims":[[5,5,2]],"seeds":[1,2],"eps":0.05,
          "methods":["smo","penalty-baseline"],"output":{"csv":"a.csv"},"jobs":2})");
  CHECK(c.families.size() == 2);
  CHECK(c.dims[0][2] == 2);
  CHECK(c.eps == 0.05);
  CHECK(c.tau == 0.8);
  CHECK(c.csv == "a.csv");
  CHECK(c.markdown == "results.md");
  CHECK(c.jobs == 2);
  CHECK_THROWS_AS(parse_config("{"), ParseError);
  CHECK_THROWS_AS(parse_config(R"({"families":["cubic"]})"), InputError);
  CHECK_THROWS_AS(parse_config(R"({"methods":["newton"]})"), InputError);
  CHECK_THROWS_AS(parse_config(R"({"dims":[[1,2]]})"), ParseError);
  CHECK_THROWS_AS(parse_config(R"({"eps0":0.001})"), InputError);
}

TEST_CASE("a run past its deadline is recorded as a failure and the experiment continues") {
  ExperimentConfig c;
  c.families = {"linear"};
  c.dims = {{4, 4, 2}};
  c.seeds = {1, 2, 3};
  c.methods = {kMethodSmo, kMethodPenalty};
  c.time_limit_seconds = 1e-3;
  c.jobs = 3;
  const std::vector<RunRecord> recs = run_experiment(c);
  REQUIRE(recs.size() == 6);
  for (size_t i = 0; i < recs.size(); ++i) {
    CHECK_FALSE(recs[i].ok);
    CHECK(recs[i].error.find("deadline") != std::string::npos);
    CHECK(recs[i].seed == 1 + i / 2);
    CHECK(recs[i].method == (i % 2 == 0 ? kMethodSmo : kMethodPenalty));
  }
}

TEST_CASE("stored points re-verify to the recorded residuals") {
  const PreparedInstance inst = prepare_instance("linear", {6, 6, 2}, 4, {});
  std::mt19937_64 rng(8);
  RunRecord r;
  r.instance_id = inst.id;
  r.method = kMethodSmo;
  r.x = uniform_vec(rng, 6, -1.0, 1.0);
  r.y = uniform_vec(rng, 6, -1.0, 1.0);
  r.z = uniform_vec(rng, 6, -1.0, 1.0);
  r.lambda_last = uniform_vec(rng, 2, 0.0, 1.0);
  r.rho = 100.0 / 3.0;
  r.mu = 1e6 / 7.0;
  r.eps = 1e-2;
  r.kkt = kkt_report(inst.problem, r.x, r.y, r.z, r.lambda_last, r.rho, r.mu, r.eps, inst.oracle);
  const PreparedInstance again = instance_from_document(inst.json);
  const KktReport v = verify_point(again, point_json(r));
  CHECK(std::abs(v.stationarity_xy - r.kkt.stationarity_xy) <= 1e-10);
  CHECK(std::abs(v.stationarity_z - r.kkt.stationarity_z) <= 1e-10);
  CHECK(std::abs(v.feas_y - r.kkt.feas_y) <= 1e-10);
  CHECK(std::abs(v.compl_y - r.kkt.compl_y) <= 1e-10);
  CHECK(std::abs(v.value_gap - r.kkt.value_gap) <= 1e-10);
}

TEST_CASE("svm instances serialize through their LIBSVM text") {
  SvmSource src;
  src.samples = 40;
  src.features = 3;
  const PreparedInstance a = prepare_instance("svm", {0, 0, 0}, 5, src);
  const PreparedInstance b = instance_from_document(a.json);
  CHECK(a.id == b.id);
  CHECK(a.f_init == doctest::Approx(b.f_init).epsilon(1e-12));
  CHECK(b.problem.n == 30);
}

TEST_CASE("penalty baseline with an inactive constraint reduces to the value function penalty") {
  // On the analytic instance g stays negative near the solution, so the
  // constraint term vanishes and the baseline output matches (1, 1).
  const BilevelProblem p = analytic_instance();
  NccOptions opt;
  opt.inner.deadline = Deadline::in_seconds(120.0);
  const PenaltyResult r = penalty_baseline(p, 2.0, 4.0, 0.05, Vec::Constant(1, 1.0),
                                           Vec::Constant(1, 1.0), Vec::Constant(1, 1.0), opt);
  CHECK(r.solve.certificate.residual <= 0.05);
  CHECK_FALSE(r.solve.flagged);
  CHECK(std::abs(r.x[0] - 1.0) <= 0.05);
  CHECK(r.calls.total() > 0);
}
