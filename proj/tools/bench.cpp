/// @file bench.cpp
/// @brief Command line benchmark harness: instance generation, experiment runs
/// and post-hoc verification of stored points.

#include "bilevel/experiment.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace bilevel;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << text;
}

std::array<Index, 3> parse_dims(const std::string& text) {
  std::array<Index, 3> d{};
  char c1 = 0, c2 = 0;
  std::istringstream ss(text);
  if (!(ss >> d[0] >> c1 >> d[1] >> c2 >> d[2]) || c1 != ',' || c2 != ',' || !ss.eof())
    throw InputError("dims must look like n,m,l");
  return d;
}

nlohmann::json report_json(const KktReport& r) {
  return {{"stat_xy", r.stationarity_xy}, {"stat_z", r.stationarity_z},
          {"feas_y", r.feas_y},           {"feas_z", r.feas_z},
          {"compl_y", r.compl_y},         {"compl_y_cross", r.compl_y_cross},
          {"compl_z", r.compl_z},         {"value_gap", r.value_gap},
          {"lower_gap", r.lower_gap},     {"tf_star", r.tf_star}};
}

int cmd_run(const std::string& config_path, const std::optional<std::uint64_t>& seed,
            const std::string& out_dir, int jobs) {
  ExperimentConfig cfg = parse_config(read_file(config_path));
  if (seed) cfg.seeds = {*seed};
  if (jobs > 0) cfg.jobs = jobs;
  if (const char* env = std::getenv("BENCH_THREADS")) {
    try {
      cfg.jobs = std::stoi(env);
    } catch (const std::exception&) {
      throw InputError("BENCH_THREADS must be an integer");
    }
  }
  cfg.validate();
  const fs::path out = out_dir.empty() ? fs::path(".") : fs::path(out_dir);
  const std::vector<RunRecord> records = run_experiment(cfg);

  std::string csv = csv_header() + "\n";
  for (const RunRecord& r : records) csv += csv_row(r) + "\n";
  write_file(out / cfg.csv, csv);
  write_file(out / cfg.markdown, markdown_table(records));
  for (const RunRecord& r : records) {
    if (!r.ok) continue;
    write_file(out / cfg.points_dir / (r.instance_id + "." + r.method + ".json"), point_json(r));
  }
  int failed = 0;
  for (const RunRecord& r : records) {
    if (r.ok) {
      std::printf("%-28s %-17s f %.4f -> %.4f  calls %lld  %.2fs  stop %s\n",
                  r.instance_id.c_str(), r.method.c_str(), r.f_init, r.f_final,
                  static_cast<long long>(r.calls.total()), r.wall_ms / 1000.0,
                  r.stopping_conditions ? "yes" : "no");
    } else {
      ++failed;
      std::printf("%-28s %-17s failed: %s\n", r.instance_id.c_str(), r.method.c_str(),
                  r.error.c_str());
    }
  }
  std::printf("wrote %s and %s (%d of %zu runs failed)\n", (out / cfg.csv).string().c_str(),
              (out / cfg.markdown).string().c_str(), failed, records.size());
  return 0;
}

int cmd_gen(const std::string& family, const std::string& dims, std::uint64_t seed,
            const std::string& out, const SvmSource& svm) {
  const PreparedInstance inst = prepare_instance(family, parse_dims(dims), seed, svm);
  write_file(out, inst.json);
  std::printf("%s: n=%ld m=%ld l=%ld f_init=%.6f -> %s\n", inst.id.c_str(), long(inst.n),
              long(inst.m), long(inst.l), inst.f_init, out.c_str());
  return 0;
}

int cmd_verify(const std::string& instance_path, const std::string& point_path) {
  const PreparedInstance inst = instance_from_document(read_file(instance_path));
  const KktReport r = verify_point(inst, read_file(point_path));
  std::cout << report_json(r).dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Benchmark harness for the sequential minimax bilevel solver"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run an experiment described by a JSON config");
  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed;
  int jobs = 0;
  run->add_option("--config", config_path, "Experiment config (JSON)")->required();
  run->add_option("--seed", seed, "Run only this seed");
  run->add_option("--out", out_dir, "Directory receiving the CSV, markdown and points");
  run->add_option("--jobs", jobs, "Worker threads (BENCH_THREADS overrides)");

  auto* gen = app.add_subcommand("gen", "Generate one instance and write it as JSON");
  std::string family = "linear", dims = "20,20,3", gen_out;
  std::uint64_t gen_seed = 1;
  SvmSource svm;
  gen->add_option("--family", family, "linear | quadlinear | svm");
  gen->add_option("--dims", dims, "n,m,l (ignored for svm)");
  gen->add_option("--seed", gen_seed, "Instance seed");
  gen->add_option("--out", gen_out, "Output path")->required();
  gen->add_option("--dataset", svm.dataset, "LIBSVM file for the svm family");
  gen->add_option("--samples", svm.samples, "Synthetic svm samples");
  gen->add_option("--features", svm.features, "Synthetic svm features");

  auto* verify = app.add_subcommand("verify", "Recompute KKT residuals of a stored point");
  std::string instance_path, point_path;
  verify->add_option("--instance", instance_path, "Instance JSON")->required();
  verify->add_option("--point", point_path, "Point JSON")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(config_path, seed, out_dir, jobs);
    if (*gen) return cmd_gen(family, dims, gen_seed, gen_out, svm);
    if (*verify) return cmd_verify(instance_path, point_path);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
