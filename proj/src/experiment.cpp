#include "bilevel/experiment.hpp"

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

namespace bilevel {

PenaltyResult penalty_baseline(const BilevelProblem& prob, double rho, double mu, double tol,
                               const Vec& x0, const Vec& y0, const Vec& z0,
                               const NccOptions& options) {
  if (!(rho > 0) || !(mu > 0) || !(tol > 0)) throw InputError("rho, mu and tol must be positive");
  PenaltyResult r;
  r.rho = rho;
  r.mu = mu;
  // rho mu ||[g]_+||^2 equals ||[mu' g]_+||^2 / (2 mu') with mu' = 2 rho mu and lambda = 0.
  const double mu_eff = 2.0 * rho * mu;
  const Vec lam0 = Vec::Zero(prob.g.dim);
  const SubproblemResult sub = solve_subproblem(prob, x0, y0, z0, lam0, rho, mu_eff, tol, options);
  r.x = sub.x;
  r.y = sub.y;
  r.z = sub.z;
  r.solve = sub.solve;
  r.calls = subproblem_counts(sub.solve.calls);
  return r;
}

std::string csv_header() {
  return "instance_id,method,n,m,l,seed,f_init,f_final,stat_xy,stat_z,feas_y,feas_z,compl_y,"
         "compl_z,value_gap,grad_calls_f1,grad_calls_tf1,grad_calls_g,prox_calls_f2,"
         "prox_calls_tf2,outer_iters,wall_ms";
}

namespace {

std::string num(double v) {
  if (!std::isfinite(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::string fixed(double v, int digits) {
  if (!std::isfinite(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string sci(double v) {
  if (!std::isfinite(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2e", v);
  return buf;
}

nlohmann::json vec_to_json(const Vec& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vec json_to_vec(const nlohmann::json& j, const char* name) {
  if (!j.is_array()) throw ParseError(std::string(name) + " must be an array", 0);
  Vec v(static_cast<Index>(j.size()));
  for (size_t i = 0; i < j.size(); ++i) v[static_cast<Index>(i)] = j[i].get<double>();
  return v;
}

}  // namespace

std::string csv_row(const RunRecord& r) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const bool ok = r.ok;
  std::ostringstream os;
  os << r.instance_id << ',' << r.method << ',' << r.n << ',' << r.m << ',' << r.l << ','
     << r.seed << ',' << num(r.f_init) << ',' << num(ok ? r.f_final : nan) << ','
     << num(ok ? r.kkt.stationarity_xy : nan) << ',' << num(ok ? r.kkt.stationarity_z : nan)
     << ',' << num(ok ? r.kkt.feas_y : nan) << ',' << num(ok ? r.kkt.feas_z : nan) << ','
     << num(ok ? r.kkt.compl_y : nan) << ',' << num(ok ? r.kkt.compl_z : nan) << ','
     << num(ok ? r.kkt.value_gap : nan) << ',' << r.calls.grad_f1 << ',' << r.calls.grad_tf1
     << ',' << r.calls.grad_g << ',' << r.calls.prox_f2 << ',' << r.calls.prox_tf2 << ','
     << r.outer_iters << ',' << num(r.wall_ms);
  return os.str();
}

std::string markdown_table(const std::vector<RunRecord>& records) {
  std::ostringstream os;
  os << "| instance | method | n | m | l | initial obj | final obj | oracle calls | time (s) | "
        "stop conds | status |\n";
  os << "|---|---|---|---|---|---|---|---|---|---|---|\n";
  struct Acc {
    int count = 0, ok = 0, stop = 0;
    double f_init = 0, f_final = 0, calls = 0, secs = 0;
  };
  std::vector<std::string> order;
  std::map<std::string, Acc> groups;
  for (const RunRecord& r : records) {
    os << "| " << r.instance_id << " | " << r.method << " | " << r.n << " | " << r.m << " | "
       << r.l << " | " << fixed(r.f_init, 4) << " | "
       << (r.ok ? fixed(r.f_final, 4) : std::string("-")) << " | " << sci(double(r.calls.total()))
       << " | " << fixed(r.wall_ms / 1000.0, 2) << " | "
       << (r.ok ? (r.stopping_conditions ? "yes" : "no") : "-") << " | "
       << (r.ok ? "ok" : "failed: " + r.error) << " |\n";
    const std::string key = r.instance_id.substr(0, r.instance_id.rfind('-')) + " / " + r.method;
    if (!groups.count(key)) order.push_back(key);
    Acc& a = groups[key];
    a.count++;
    if (r.ok) {
      a.ok++;
      a.stop += r.stopping_conditions ? 1 : 0;
      a.f_init += r.f_init;
      a.f_final += r.f_final;
      a.calls += double(r.calls.total());
      a.secs += r.wall_ms / 1000.0;
    }
  }
  os << "\n| group | runs | completed | initial obj (mean) | final obj (mean) | oracle calls "
        "(mean) | time (s, mean) | stop conds |\n";
  os << "|---|---|---|---|---|---|---|---|\n";
  for (const std::string& key : order) {
    const Acc& a = groups[key];
    const double k = a.ok > 0 ? 1.0 / a.ok : std::numeric_limits<double>::quiet_NaN();
    os << "| " << key << " | " << a.count << " | " << a.ok << " | " << fixed(a.f_init * k, 4)
       << " | " << fixed(a.f_final * k, 4) << " | " << sci(a.calls * k) << " | "
       << fixed(a.secs * k, 2) << " | " << a.stop << "/" << a.ok << " |\n";
  }
  return os.str();
}

void ExperimentConfig::validate() const {
  if (families.empty()) throw InputError("config lists no families");
  for (const std::string& f : families)
    if (f != "linear" && f != "quadlinear" && f != "svm")
      throw InputError("unknown family '" + f + "'");
  for (const std::string& m : methods)
    if (m != kMethodSmo && m != kMethodPenalty) throw InputError("unknown method '" + m + "'");
  if (methods.empty()) throw InputError("config lists no methods");
  if (seeds.empty()) throw InputError("config lists no seeds");
  for (const auto& d : dims)
    if (d[0] <= 0 || d[1] <= 0 || d[2] <= 0) throw InputError("dims must be positive");
  if (!(eps > 0 && eps < 1) || !(tau > 0 && tau < 1) || !(eps0 > tau * eps && eps0 <= 1))
    throw InputError("invalid (eps, tau, eps0)");
  if (jobs < 1) throw InputError("jobs must be at least 1");
  if (time_limit_seconds < 0) throw InputError("time limit must be nonnegative");
}

ExperimentConfig parse_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(e.what(), 0);
  }
  ExperimentConfig c;
  try {
    if (j.contains("families")) c.families = j["families"].get<std::vector<std::string>>();
    if (j.contains("dims")) {
      c.dims.clear();
      for (const auto& d : j["dims"]) {
        if (!d.is_array() || d.size() != 3) throw ParseError("each dims entry needs 3 values", 0);
        c.dims.push_back({d[0].get<Index>(), d[1].get<Index>(), d[2].get<Index>()});
      }
    }
    if (j.contains("seeds")) c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    if (j.contains("eps")) c.eps = j["eps"].get<double>();
    if (j.contains("tau")) c.tau = j["tau"].get<double>();
    if (j.contains("eps0")) c.eps0 = j["eps0"].get<double>();
    if (j.contains("methods")) c.methods = j["methods"].get<std::vector<std::string>>();
    if (j.contains("time_limit_seconds")) c.time_limit_seconds = j["time_limit_seconds"].get<double>();
    if (j.contains("jobs")) c.jobs = j["jobs"].get<int>();
    if (j.contains("output")) {
      const auto& o = j["output"];
      if (o.contains("csv")) c.csv = o["csv"].get<std::string>();
      if (o.contains("markdown")) c.markdown = o["markdown"].get<std::string>();
      if (o.contains("points")) c.points_dir = o["points"].get<std::string>();
    }
    if (j.contains("svm")) {
      const auto& s = j["svm"];
      if (s.contains("dataset")) c.svm.dataset = s["dataset"].get<std::string>();
      if (s.contains("samples")) c.svm.samples = s["samples"].get<Index>();
      if (s.contains("features")) c.svm.features = s["features"].get<Index>();
      if (s.contains("noise")) c.svm.noise = s["noise"].get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(e.what(), 0);
  }
  c.validate();
  return c;
}

namespace {

PreparedInstance prepare_svm(const Dataset& data, std::uint64_t seed) {
  SvmInstance s = build_svm_problem(data, seed);
  PreparedInstance p;
  p.family = "svm";
  p.n = s.problem.n;
  p.m = s.problem.m;
  p.l = s.problem.g.dim;
  p.seed = seed;
  p.id = "svm-" + std::to_string(data.samples()) + "-" + std::to_string(data.features()) + "-" +
         std::to_string(seed);
  p.problem = s.problem;
  p.x0 = Vec::Zero(p.n);
  p.y0 = s.random_start(seed);
  p.z0 = p.y0;
  p.oracle.tolerance = 1e-6;
  p.oracle.method = LowerValueOracle::Method::AugmentedLagrangian;
  // Reference objective: f at the lower level solution for x0.
  const LowerValue lv = lower_optimal_value_detail(p.problem, p.x0, p.oracle);
  p.f_init = p.problem.f(p.x0, lv.minimizer);
  nlohmann::json j;
  j["family"] = "svm";
  j["seed"] = seed;
  j["libsvm"] = to_libsvm(data);
  p.json = j.dump(1);
  return p;
}

PreparedInstance prepare_affine(const AffineInstance& a) {
  PreparedInstance p;
  p.family = family_name(a.family);
  p.n = a.n;
  p.m = a.m;
  p.l = a.l;
  p.seed = a.seed;
  p.id = p.family + "-" + std::to_string(a.n) + "-" + std::to_string(a.m) + "-" +
         std::to_string(a.l) + "-" + std::to_string(a.seed);
  p.problem = a.problem();
  p.x0 = Vec::Zero(a.n);
  p.y0 = Vec::Zero(a.m);
  p.z0 = Vec::Zero(a.m);
  p.f_init = a.initial_objective();
  p.json = to_json(a);
  return p;
}

}  // namespace

PreparedInstance prepare_instance(const std::string& family, const std::array<Index, 3>& dims,
                                  std::uint64_t seed, const SvmSource& svm) {
  if (family == "svm") {
    const Dataset data = svm.dataset.empty()
                             ? synthetic_svm_dataset(svm.samples, svm.features, svm.noise, seed)
                             : load_libsvm(svm.dataset);
    return prepare_svm(data, seed);
  }
  return prepare_affine(generate(parse_family(family), dims[0], dims[1], dims[2], seed));
}

PreparedInstance instance_from_document(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(e.what(), 0);
  }
  if (j.value("family", std::string()) == "svm") {
    try {
      return prepare_svm(parse_libsvm(j.at("libsvm").get<std::string>()),
                         j.at("seed").get<std::uint64_t>());
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(e.what(), 0);
    }
  }
  return prepare_affine(instance_from_json(text));
}

RunRecord run_one(const PreparedInstance& inst, const std::string& method,
                  const ExperimentConfig& config) {
  RunRecord r;
  r.instance_id = inst.id;
  r.method = method;
  r.n = inst.n;
  r.m = inst.m;
  r.l = inst.l;
  r.seed = inst.seed;
  r.f_init = inst.f_init;
  r.eps = config.eps;
  const auto t0 = std::chrono::steady_clock::now();
  const Deadline deadline = config.time_limit_seconds > 0
                                ? Deadline::in_seconds(config.time_limit_seconds)
                                : Deadline{};
  try {
    const BilevelProblem& prob = inst.problem;
    if (method == kMethodSmo) {
      SmoConfig sc;
      sc.eps = config.eps;
      sc.tau = config.tau;
      sc.eps0 = config.eps0;
      sc.x0 = inst.x0;
      sc.y0 = inst.y0;
      sc.z0 = inst.z0;
      sc.ncc.inner.deadline = deadline;
      sc.apg.deadline = deadline;
      const SmoResult res = run_smo(prob, sc);
      r.x = res.x;
      r.y = res.y;
      r.z = res.z;
      r.lambda_last = res.lambda_last;
      r.rho = res.last.rho;
      r.mu = res.last.mu;
      r.calls = res.calls;
      r.outer_iters = static_cast<long>(res.trace.iterations.size());
      r.certified = res.certified;
    } else if (method == kMethodPenalty) {
      const double rho = 1.0 / config.eps;
      const double mu = 1.0 / (config.eps * config.eps);
      NccOptions opt;
      opt.inner.deadline = deadline;
      const PenaltyResult res =
          penalty_baseline(prob, rho, mu, config.eps, inst.x0, inst.y0, inst.z0, opt);
      r.x = res.x;
      r.y = res.y;
      r.z = res.z;
      r.lambda_last = Vec::Zero(prob.g.dim);
      r.rho = rho;
      r.mu = 2.0 * rho * mu;
      r.calls = res.calls;
      r.outer_iters = res.solve.outer_iterations;
      r.certified = !res.solve.flagged;
    } else {
      throw InputError("unknown method '" + method + "'");
    }
    r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();
    r.f_final = prob.f(r.x, r.y);
    r.kkt = kkt_report(prob, r.x, r.y, r.z, r.lambda_last, r.rho, r.mu, config.eps, inst.oracle);
    r.stopping_conditions = r.kkt.feas_y <= 1e-2 && r.kkt.lower_gap <= 1e-2;
    r.ok = true;
  } catch (const std::exception& e) {
    r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();
    r.ok = false;
    r.error = e.what();
  }
  return r;
}

std::string point_json(const RunRecord& r) {
  nlohmann::json j;
  j["instance_id"] = r.instance_id;
  j["method"] = r.method;
  j["x"] = vec_to_json(r.x);
  j["y"] = vec_to_json(r.y);
  j["z"] = vec_to_json(r.z);
  j["lambda"] = vec_to_json(r.lambda_last);
  j["rho"] = r.rho;
  j["mu"] = r.mu;
  j["eps"] = r.eps;
  return j.dump(1);
}

KktReport verify_point(const PreparedInstance& inst, const std::string& point_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(point_text);
    const Vec x = json_to_vec(j.at("x"), "x");
    const Vec y = json_to_vec(j.at("y"), "y");
    const Vec z = json_to_vec(j.at("z"), "z");
    const Vec lam = json_to_vec(j.at("lambda"), "lambda");
    return kkt_report(inst.problem, x, y, z, lam, j.at("rho").get<double>(),
                      j.at("mu").get<double>(), j.at("eps").get<double>(), inst.oracle);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(e.what(), 0);
  }
}

std::vector<RunRecord> run_experiment(const ExperimentConfig& config) {
  config.validate();
  struct Job {
    std::string family;
    std::array<Index, 3> dims;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (const std::string& fam : config.families) {
    if (fam == "svm") {
      for (std::uint64_t s : config.seeds) jobs.push_back({fam, {0, 0, 0}, s});
      continue;
    }
    for (const auto& d : config.dims)
      for (std::uint64_t s : config.seeds) jobs.push_back({fam, d, s});
  }
  const size_t per = config.methods.size();
  std::vector<RunRecord> records(jobs.size() * per);
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      const Job& job = jobs[i];
      try {
        const PreparedInstance inst = prepare_instance(job.family, job.dims, job.seed, config.svm);
        for (size_t k = 0; k < per; ++k) records[i * per + k] = run_one(inst, config.methods[k], config);
      } catch (const std::exception& e) {
        for (size_t k = 0; k < per; ++k) {
          RunRecord& r = records[i * per + k];
          r.instance_id = job.family + "-" + std::to_string(job.dims[0]) + "-" +
                          std::to_string(job.dims[1]) + "-" + std::to_string(job.dims[2]) + "-" +
                          std::to_string(job.seed);
          r.method = config.methods[k];
          r.n = job.dims[0];
          r.m = job.dims[1];
          r.l = job.dims[2];
          r.seed = job.seed;
          r.f_init = std::numeric_limits<double>::quiet_NaN();
          r.ok = false;
          r.error = e.what();
        }
      }
    }
  };
  const int threads = std::max(1, std::min<int>(config.jobs, static_cast<int>(jobs.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  return records;
}

}  // namespace bilevel
