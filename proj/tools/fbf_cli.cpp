// fbf: solve problem files, run the shipped demos, run the self-check battery.
//
// Exit codes: 0 converged (or all checks pass), 2 iteration cap reached, 1 error.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "fbf/fbf.hpp"
#include "fbf/io.hpp"
#include "fbf/selfcheck.hpp"

namespace {

using namespace fbf;
using io::json;

int exit_code(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged: return 0;
    case SolveStatus::max_iter: return 2;
    default: return 1;
  }
}

void apply_trace_env(io::SolverConfig& cfg) {
  const char* env = std::getenv("SOLVER_TRACE_EVERY");
  if (!env || !*env) return;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1) throw ConfigurationError("SOLVER_TRACE_EVERY must be a positive integer");
  cfg.trace_every = v;
}

std::string prepare_dir(const std::string& dir) {
  std::filesystem::create_directories(dir);
  return dir;
}

void print_summary(const io::RunReport& rep) {
  const auto& r = rep.result;
  std::cout << "status " << to_string(r.status) << ", iterations " << r.iterations << ", displacement "
            << r.final_displacement << ", transversality " << r.transversality_defect << "\n"
            << "beta " << rep.beta << ", epsilon " << rep.epsilon << ", gamma " << rep.gamma << ", wall "
            << rep.wall_time << " s\n";
  if (rep.reference_error) std::cout << "max error vs reference " << *rep.reference_error << "\n";
  if (!r.message.empty()) std::cout << r.message << "\n";
}

int cmd_solve(const std::string& path, const std::string& out) {
  io::Problem pr = io::load_problem(path);
  apply_trace_env(pr.solver);
  const io::RunReport rep = io::run_problem(pr);
  io::write_artifacts(prepare_dir(out), pr.system, rep);
  print_summary(rep);
  return exit_code(rep.result.status);
}

int run_demo(const demos::Demo& d, const std::string& dir, json extra = json::object()) {
  io::SolverConfig cfg;
  cfg.epsilon = d.epsilon;
  cfg.tol = d.stop.tol;
  cfg.max_iter = d.stop.max_iter;
  cfg.trace_every = d.stop.trace_every;
  apply_trace_env(cfg);
  io::RunReport rep = io::run(d.system, cfg, zero_errors(), d.init);
  if (!d.reference.empty()) rep.reference_error = io::max_abs_difference(rep.result.final_state.x1, d.reference);
  io::write_artifacts(dir, d.system, rep);
  json summary = io::summary_json(rep);
  summary["demo"] = d.name;
  if (d.problem)
    summary["primal_surrogate"] =
        io::number_json(primal_surrogate(*d.problem, rep.result.final_state.x1, rep.result.final_state.x2));
  summary.update(extra);
  io::write_json(dir + "/summary.json", summary);
  if (d.images) {
    const auto& img = *d.images;
    write_pgm(dir + "/truth.pgm", img.truth);
    write_pgm(dir + "/observed.pgm", img.observed);
    write_pgm(dir + "/restored.pgm", ImageGrid(img.truth.height, img.truth.width, rep.result.final_state.x1[0]));
  }
  print_summary(rep);
  return exit_code(rep.result.status);
}

int cmd_demo(const std::string& name, const std::string& out, std::uint64_t seed) {
  const std::string dir = prepare_dir(out);
  if (name == "lasso") return run_demo(demos::lasso(seed), dir);
  if (name == "qp") return run_demo(demos::qp(seed), dir);
  if (name == "deblur") return run_demo(demos::deblur(seed), dir);
  if (name == "separation") {
    const demos::SeparationReport rep = demos::run_separation(seed);
    const SolveResult& r = rep.coupled;
    std::ostringstream csv;
    io::write_trace_csv(csv, r.trace);
    io::write_text(dir + "/trace.csv", csv.str());
    io::write_json(dir + "/state.json", io::state_json(r.final_state));
    io::write_json(dir + "/report.json", {{"demo", "separation"},
                                          {"identical", rep.identical},
                                          {"iterations", rep.iterations},
                                          {"first_mismatch", rep.first_mismatch},
                                          {"report", rep.detail}});
    std::cout << "separation: " << rep.detail << " over " << rep.iterations << " iterations\n";
    return rep.identical ? 0 : 1;
  }
  throw ConfigurationError("unknown demo '" + name + "' (expected lasso, qp, deblur or separation)");
}

int cmd_check(const check::Options& opt) {
  const auto rows = check::run_checks(opt);
  std::size_t width = 0;
  for (const auto& r : rows) width = std::max(width, r.name.size());
  int failed = 0;
  for (const auto& r : rows) {
    std::cout << (r.pass ? "PASS  " : "FAIL  ") << r.name << std::string(width - r.name.size() + 2, ' ') << r.detail
              << "\n";
    failed += r.pass ? 0 : 1;
  }
  std::cout << rows.size() - failed << "/" << rows.size() << " checks passed\n";
  return check::all_pass(rows) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Primal-dual forward-backward-forward solver for coupled monotone inclusions"};
  app.require_subcommand(1);

  std::string problem_path, out_dir = "out";
  auto* solve_cmd = app.add_subcommand("solve", "Solve a problem file");
  solve_cmd->add_option("file", problem_path, "Problem JSON")->required()->check(CLI::ExistingFile);
  solve_cmd->add_option("--out", out_dir, "Output directory")->capture_default_str();

  std::string demo_name;
  std::uint64_t seed = 42;
  auto* demo_cmd = app.add_subcommand("demo", "Run a shipped demo");
  demo_cmd->add_option("name", demo_name, "lasso | qp | deblur | separation")
      ->required()
      ->check(CLI::IsMember({"lasso", "qp", "deblur", "separation"}));
  demo_cmd->add_option("--out", out_dir, "Output directory")->capture_default_str();
  demo_cmd->add_option("--seed", seed, "Instance seed")->capture_default_str();

  check::Options copt;
  auto* check_cmd = app.add_subcommand("check", "Run the invariant battery");
  check_cmd->add_option("--problem", copt.problems, "Problem files to solve and compare with their reference");
  check_cmd->add_option("--seed", copt.seed, "Seed")->capture_default_str();
  check_cmd->add_flag("--corrupt-adjoint", copt.corrupt_adjoint, "Debug hook: plant a wrong adjoint");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*solve_cmd) return cmd_solve(problem_path, out_dir);
    if (*demo_cmd) return cmd_demo(demo_name, out_dir, seed);
    if (*check_cmd) return cmd_check(copt);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
