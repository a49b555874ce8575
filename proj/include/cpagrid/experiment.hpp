#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cpagrid/attack.hpp"
#include "cpagrid/grid.hpp"

namespace cpagrid {

inline constexpr int kMetricsSchemaVersion = 1;

struct ExperimentConfig {
  std::filesystem::path case_path;
  std::vector<std::size_t> vh_sizes{40};
  std::vector<std::size_t> failure_counts{1, 2, 3};
  std::size_t areas = 10;
  std::size_t failsets = 30;
  double eta = 0.5;
  std::uint64_t seed = 1;
  bool pmu_mode = true;
  bool run_benchmarks = true;
  bool run_certificates = true;
  std::filesystem::path out_dir;
  unsigned threads = 1;

  /// Throws InvalidArgument.
  void validate() const;
  /// 70 areas x 300 failure sets per setting.
  void use_full_protocol();
};

enum class Method { Algorithm1, KnownDelta, Bpdn };
inline constexpr std::array<Method, 3> kMethods{Method::Algorithm1, Method::KnownDelta, Method::Bpdn};
std::string_view to_string(Method m);

enum class ScenarioStatus { Ok, Degenerate, NoAngles, Failed };
std::string_view to_string(ScenarioStatus s);

struct MethodOutcome {
  bool ran = false;
  int misses = 0;
  int false_alarms = 0;
};

/// Certified link counts of one mechanism, split by ground truth.
struct CertCounts {
  int failed = 0;
  int operational = 0;
};

/// Raw per-scenario log entry.
struct ScenarioRecord {
  std::size_t id = 0;
  std::size_t vh = 0;
  std::size_t nf = 0;
  std::size_t area = 0;
  std::size_t failset = 0;
  std::uint64_t seed = 0;
  ScenarioStatus status = ScenarioStatus::Ok;
  std::string error;
  int n_failed = 0;
  int n_operational = 0;
  bool rank_ok = false;
  bool acyclic = false;
  bool delta_zero = false;
  std::array<MethodOutcome, 3> methods{};
  bool certified = false;
  CertCounts gale, hyper_node, fail_cover, any;
  /// Seconds per stage: simulate, recover, algorithm1, known-delta, bpdn, certify.
  std::array<double, 6> seconds{};
};

inline constexpr std::array<const char*, 6> kStageNames{"simulate", "recover", "algorithm1",
                                                       "known_delta", "bpdn", "certify"};

struct MetricsRow {
  std::size_t vh = 0;
  std::size_t nf = 0;
  Method method = Method::Algorithm1;
  int scenarios = 0;
  int degenerate = 0;
  int no_angles = 0;
  int errors = 0;
  double miss_rate = 0.0;
  double miss_q25 = 0.0;
  double miss_q75 = 0.0;
  double false_alarm_rate = 0.0;
  double false_alarm_q25 = 0.0;
  double false_alarm_q75 = 0.0;
  double p_no_miss = 0.0;
  double p_no_false_alarm = 0.0;
  /// Mean fraction of failed / operational links certified (algorithm1 rows).
  std::optional<double> gale_failed, gale_operational;
  std::optional<double> hyper_node_failed, hyper_node_operational;
  std::optional<double> fail_cover_failed, fail_cover_operational;
  std::optional<double> any_failed, any_operational;
  /// Mean fraction of failed / operational links classified correctly.
  double correct_failed = 0.0;
  double correct_operational = 0.0;
  double delta_zero_rate = 0.0;
  double rank_rate = 0.0;
  double acyclic_rate = 0.0;
};

struct HistogramRow {
  std::size_t vh = 0;
  std::size_t nf = 0;
  Method method = Method::Algorithm1;
  std::string kind;  // "miss" or "false_alarm"
  int count = 0;
  int cases = 0;
};

struct ComparisonRow {
  std::size_t vh = 0;
  std::size_t nf = 0;
  std::string metric;
  std::optional<double> algorithm1, known_delta, bpdn;
};

struct ExperimentResult {
  std::vector<ScenarioRecord> records;
  std::vector<MetricsRow> metrics;
  std::vector<HistogramRow> histogram;
};

/// Per-scenario seed derived from the base seed and the scenario coordinates.
std::uint64_t scenario_seed(std::uint64_t base, std::size_t vh, std::size_t nf, std::size_t area, std::size_t failset);

/// The scenario at the given sweep coordinates. Areas depend on (seed, vh,
/// area) only, so they are shared across |F| settings.
AttackScenario make_scenario(std::shared_ptr<const Grid> grid, const SteadyState& pre, std::uint64_t seed,
                             std::size_t vh, std::size_t nf, std::size_t area, std::size_t failset);

/// Full pipeline for one scenario. Never throws: failures land in the record.
ScenarioRecord run_scenario(std::shared_ptr<const Grid> grid, const SteadyState& pre, const ExperimentConfig& cfg,
                            std::size_t vh, std::size_t nf, std::size_t area, std::size_t failset);

/// Runs the sweep over a grid; writes CSVs when cfg.out_dir is set.
ExperimentResult run_experiment(const ExperimentConfig& cfg, std::shared_ptr<const Grid> grid);
/// Loads cfg.case_path first.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Metrics recomputed from raw records, one row per (vh, nf, method).
std::vector<MetricsRow> aggregate(const std::vector<ScenarioRecord>& records, const ExperimentConfig& cfg);
std::vector<HistogramRow> histogram(const std::vector<ScenarioRecord>& records, const ExperimentConfig& cfg);

std::vector<ComparisonRow> compare_methods(const std::vector<MetricsRow>& rows);

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows);
void write_scenarios_csv(std::ostream& out, const std::vector<ScenarioRecord>& records);
void write_histogram_csv(std::ostream& out, const std::vector<HistogramRow>& rows);
void write_timing_csv(std::ostream& out, const std::vector<ScenarioRecord>& records);
void write_comparison_csv(std::ostream& out, const std::vector<ComparisonRow>& rows);

/// 25th / 75th percentile by linear interpolation between order statistics.
double quantile(std::vector<double> values, double q);

}  // namespace cpagrid
