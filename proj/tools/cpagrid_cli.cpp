// cpagrid: simulate, localize, certify and sweep attack scenarios.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "cpagrid/attack.hpp"
#include "cpagrid/case_io.hpp"
#include "cpagrid/experiment.hpp"
#include "cpagrid/guarantees.hpp"
#include "cpagrid/recovery.hpp"

using namespace cpagrid;

namespace {

constexpr int kConfigError = 2;
constexpr int kCaseError = 3;

struct CaseError {
  std::string message;
};

std::shared_ptr<const Grid> load_case(const std::string& path) {
  try {
    return std::make_shared<const Grid>(to_grid(load_matpower(path)));
  } catch (const std::exception& e) {
    throw CaseError{e.what()};
  }
}

AttackScenario load_scenario_file(const std::string& path) {
  try {
    return path == "-" ? parse_scenario(std::string(std::istreambuf_iterator<char>(std::cin), {}))
                       : load_scenario(path);
  } catch (const std::exception& e) {
    throw CaseError{e.what()};
  }
}

void emit(const std::string& out, const std::string& text) {
  if (out.empty() || out == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(out, std::ios::binary);
  if (!f) throw Error(ErrorCode::InvalidArgument, "cannot write " + out);
  f << text;
}

std::string join(const std::vector<LinkId>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + std::to_string(v[i]);
  return s;
}

int simulate(const std::string& case_path, std::size_t vh, std::size_t nf, std::size_t area, std::size_t failset,
             std::uint64_t seed, double eta, const std::string& out) {
  auto grid = load_case(case_path);
  auto s = make_scenario(grid, pre_attack_state(*grid), seed, vh, nf, area, failset);
  s.eta = eta;
  emit(out, serialize_scenario(s));
  if (s.degenerate_flow) std::cerr << "warning: scenario has a degenerate link flow\n";
  return 0;
}

int localize(const std::string& path, double eta, bool pmu, const std::string& out) {
  const auto s = load_scenario_file(path);
  const auto obs = make_observation(s, pmu);
  const auto theta = post_angles_inside(obs);
  std::ostringstream os;
  os.precision(10);
  os << "rank_ok " << rank_condition(obs) << "\n";
  if (!theta) {
    os << "status no-angles\n";
    emit(out, os.str());
    return 0;
  }
  const auto r = algorithm1(obs, *theta, eta);
  os << "eta " << eta << "\nobjective " << r.objective << "\niterations " << r.iterations << "\n";
  os << "detected " << join(r.detected) << "\nfailed " << join(s.failed_links) << "\n";
  os << "x";
  for (Eigen::Index i = 0; i < r.x.size(); ++i) os << " " << r.links[static_cast<std::size_t>(i)] << ":" << r.x[i];
  os << "\ndelta_zero_feasible " << delta_zero_feasible(obs, *theta) << "\n";
  emit(out, os.str());
  return 0;
}

int certify(const std::string& path, double eta, const std::string& out) {
  const auto s = load_scenario_file(path);
  const auto truth = truth_view(s);
  emit(out, dump_certificates(truth, certify_scenario(truth, eta)));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cpagrid: failure localization under cyber-physical attacks on DC power grids"};
  app.require_subcommand(1);

  std::string case_path, scenario_path, out;
  std::vector<std::size_t> vh{40}, nf{1, 2, 3};
  std::size_t areas = 10, failsets = 30, area = 0, failset = 0;
  double eta = 0.5;
  std::uint64_t seed = 1;
  bool pmu = true, full = false, no_bench = false, no_cert = false;
  unsigned threads = 1;
  auto eta_check = CLI::Range(0.0, 1.0);

  auto* sim = app.add_subcommand("simulate", "Emit one attack scenario file");
  sim->add_option("--case", case_path, "MATPOWER case file")->required();
  sim->add_option("--vh", vh, "Attacked area size")->expected(1);
  sim->add_option("--nf", nf, "Number of failed links")->expected(1);
  sim->add_option("--seed", seed, "Base seed");
  sim->add_option("--area", area, "Area index within the sweep");
  sim->add_option("--failset", failset, "Failure set index within the area");
  sim->add_option("--eta", eta, "Rounding threshold stored with the scenario")->check(eta_check);
  sim->add_option("--out", out, "Output file (default stdout)");

  auto* loc = app.add_subcommand("localize", "Run the LP localization on one scenario");
  loc->add_option("--scenario", scenario_path, "Scenario file, - for stdin")->required();
  loc->add_option("--eta", eta, "Rounding threshold")->check(eta_check);
  loc->add_flag("--pmu,!--no-pmu", pmu, "Use PMU angles inside the area (default on)");
  loc->add_option("--out", out, "Output file (default stdout)");

  auto* cer = app.add_subcommand("certify", "Dump per-link certificates for one scenario");
  cer->add_option("--scenario", scenario_path, "Scenario file, - for stdin")->required();
  cer->add_option("--eta", eta, "Rounding threshold")->check(eta_check);
  cer->add_option("--out", out, "Output file (default stdout)");

  auto* exp = app.add_subcommand("experiment", "Scenario sweep with CSV output");
  exp->add_option("--case", case_path, "MATPOWER case file")->required();
  exp->add_option("--vh", vh, "Attacked area sizes");
  exp->add_option("--nf", nf, "Failure counts");
  exp->add_option("--areas", areas, "Areas per setting");
  exp->add_option("--failsets", failsets, "Failure sets per area");
  exp->add_option("--eta", eta, "Rounding threshold")->check(eta_check);
  exp->add_option("--seed", seed, "Base seed");
  exp->add_flag("--pmu,!--no-pmu", pmu, "Use PMU angles inside the area (default on)");
  exp->add_option("--out", out, "Output directory")->required();
  exp->add_flag("--full-protocol", full, "70 areas x 300 failure sets per setting");
  exp->add_option("--threads", threads, "Worker threads");
  exp->add_flag("--no-benchmarks", no_bench, "Skip the two benchmark methods");
  exp->add_flag("--no-certificates", no_cert, "Skip certificate evaluation");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    if (*sim) return simulate(case_path, vh.front(), nf.front(), area, failset, seed, eta, out);
    if (*loc) return localize(scenario_path, eta, pmu, out);
    if (*cer) return certify(scenario_path, eta, out);

    ExperimentConfig cfg;
    cfg.case_path = case_path;
    cfg.vh_sizes = vh;
    cfg.failure_counts = nf;
    cfg.areas = areas;
    cfg.failsets = failsets;
    if (full) cfg.use_full_protocol();
    cfg.eta = eta;
    cfg.seed = seed;
    cfg.pmu_mode = pmu;
    cfg.run_benchmarks = !no_bench;
    cfg.run_certificates = !no_cert;
    cfg.out_dir = out;
    cfg.threads = threads;
    cfg.validate();
    const auto grid = load_case(case_path);
    const auto result = run_experiment(cfg, grid);
    write_comparison_csv(std::cout, compare_methods(result.metrics));
    return 0;
  } catch (const CaseError& e) {
    std::cerr << "case error: " << e.message << "\n";
    return kCaseError;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::InvalidArgument || e.code() == ErrorCode::TooFewLinks ? kConfigError : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
