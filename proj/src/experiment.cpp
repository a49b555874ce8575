#include "cpagrid/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <thread>

#include "cpagrid/attack.hpp"
#include "cpagrid/case_io.hpp"
#include "cpagrid/guarantees.hpp"
#include "cpagrid/recovery.hpp"

namespace cpagrid {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t mix(std::uint64_t h, std::uint64_t v) { return splitmix(h ^ splitmix(v)); }

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

MethodOutcome compare(const std::vector<LinkId>& truth, const std::vector<LinkId>& detected) {
  MethodOutcome o;
  o.ran = true;
  for (LinkId e : truth)
    if (!std::binary_search(detected.begin(), detected.end(), e)) ++o.misses;
  for (LinkId e : detected)
    if (!std::binary_search(truth.begin(), truth.end(), e)) ++o.false_alarms;
  return o;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string opt(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

bool method_enabled(Method m, const ExperimentConfig& cfg) { return m == Method::Algorithm1 || cfg.run_benchmarks; }

void write_file(const std::filesystem::path& path, const auto& writer) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + path.string());
  writer(out);
}

}  // namespace

void ExperimentConfig::validate() const {
  auto bad = [](const std::string& what) { throw Error(ErrorCode::InvalidArgument, what); };
  if (vh_sizes.empty() || failure_counts.empty()) bad("empty |V_H| or |F| list");
  for (auto v : vh_sizes)
    if (v < 2) bad("|V_H| must be at least 2");
  for (auto f : failure_counts)
    if (f < 1) bad("|F| must be positive");
  if (areas == 0 || failsets == 0) bad("areas and failure sets must be positive");
  if (!(eta > 0.0 && eta < 1.0)) bad("eta must lie in (0, 1)");
  if (threads == 0) bad("threads must be positive");
}

void ExperimentConfig::use_full_protocol() {
  areas = 70;
  failsets = 300;
}

std::string_view to_string(Method m) {
  switch (m) {
    case Method::Algorithm1: return "algorithm1";
    case Method::KnownDelta: return "known_delta";
    case Method::Bpdn: return "bpdn";
  }
  return "unknown";
}

std::string_view to_string(ScenarioStatus s) {
  switch (s) {
    case ScenarioStatus::Ok: return "ok";
    case ScenarioStatus::Degenerate: return "degenerate";
    case ScenarioStatus::NoAngles: return "no_angles";
    case ScenarioStatus::Failed: return "failed";
  }
  return "unknown";
}

std::uint64_t scenario_seed(std::uint64_t base, std::size_t vh, std::size_t nf, std::size_t area,
                            std::size_t failset) {
  return mix(mix(mix(mix(base, vh), nf), area), failset);
}

AttackScenario make_scenario(std::shared_ptr<const Grid> grid, const SteadyState& pre, std::uint64_t seed,
                             std::size_t vh, std::size_t nf, std::size_t area, std::size_t failset) {
  Rng area_rng(mix(mix(seed, vh), area));
  const auto nodes = sample_attack_area(*grid, vh, area_rng);
  const auto links = induced_links(*grid, nodes);
  const auto s_seed = scenario_seed(seed, vh, nf, area, failset);
  Rng rng(s_seed);
  const auto failed = sample_failures(links, nf, rng);
  return apply_attack(std::move(grid), pre, nodes, failed, s_seed);
}

ScenarioRecord run_scenario(std::shared_ptr<const Grid> grid, const SteadyState& pre, const ExperimentConfig& cfg,
                            std::size_t vh, std::size_t nf, std::size_t area, std::size_t failset) {
  ScenarioRecord r;
  r.vh = vh;
  r.nf = nf;
  r.area = area;
  r.failset = failset;
  r.seed = scenario_seed(cfg.seed, vh, nf, area, failset);
  try {
    auto t0 = Clock::now();
    const auto s = make_scenario(grid, pre, cfg.seed, vh, nf, area, failset);
    const auto& nodes = s.attacked_nodes;
    const auto& links = s.attacked_links;
    const auto& failed = s.failed_links;
    r.n_failed = static_cast<int>(failed.size());
    r.n_operational = static_cast<int>(links.size() - failed.size());
    r.acyclic = is_acyclic(*grid, links);
    r.seconds[0] = since(t0);
    if (s.degenerate_flow) {
      r.status = ScenarioStatus::Degenerate;
      return r;
    }

    t0 = Clock::now();
    const Observation obs = make_observation(s, cfg.pmu_mode);
    r.rank_ok = rank_condition(obs);
    const auto theta = post_angles_inside(obs);
    if (!theta) {
      r.status = ScenarioStatus::NoAngles;
      r.seconds[1] = since(t0);
      return r;
    }
    r.delta_zero = delta_zero_feasible(obs, *theta);
    r.seconds[1] = since(t0);

    t0 = Clock::now();
    try {
      r.methods[0] = compare(failed, algorithm1(obs, *theta, cfg.eta).detected);
    } catch (const Error& e) {
      r.error = e.what();
    }
    r.seconds[2] = since(t0);

    if (cfg.run_benchmarks) {
      t0 = Clock::now();
      Vector delta_inside(static_cast<Eigen::Index>(nodes.size()));
      for (std::size_t i = 0; i < nodes.size(); ++i) delta_inside[static_cast<Eigen::Index>(i)] = s.delta[nodes[i]];
      try {
        r.methods[1] = compare(failed, localize_known_delta(obs, delta_inside, *theta).detected);
      } catch (const Error& e) {
        if (r.error.empty()) r.error = e.what();
      }
      r.seconds[3] = since(t0);
      t0 = Clock::now();
      try {
        r.methods[2] = compare(failed, benchmark_bpdn(obs, *theta).detected);
      } catch (const Error& e) {
        if (r.error.empty()) r.error = e.what();
      }
      r.seconds[4] = since(t0);
    }

    if (cfg.run_certificates) {
      t0 = Clock::now();
      const TruthView truth = truth_view(s);
      const ScenarioCertificates certs = certify_scenario(truth, cfg.eta);
      for (std::size_t j = 0; j < certs.links.size(); ++j) {
        const bool f = truth.failed[j];
        auto bump = [f](CertCounts& c, bool yes) {
          if (yes) ++(f ? c.failed : c.operational);
        };
        const bool g = certs.gale[j].certified(), h = certs.hyper_node[j].certified(),
                   c = certs.fail_cover[j].certified();
        bump(r.gale, g);
        bump(r.hyper_node, h);
        bump(r.fail_cover, c);
        bump(r.any, g || h || c);
      }
      r.certified = true;
      r.seconds[5] = since(t0);
    }
  } catch (const std::exception& e) {
    r.status = ScenarioStatus::Failed;
    r.error = e.what();
  }
  return r;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, std::shared_ptr<const Grid> grid) {
  cfg.validate();
  if (!grid) throw Error(ErrorCode::InvalidArgument, "run_experiment: null grid");
  const SteadyState pre = pre_attack_state(*grid);

  struct Job {
    std::size_t vh, nf, area, failset;
  };
  std::vector<Job> jobs;
  for (auto vh : cfg.vh_sizes)
    for (auto nf : cfg.failure_counts)
      for (std::size_t a = 0; a < cfg.areas; ++a)
        for (std::size_t f = 0; f < cfg.failsets; ++f) jobs.push_back({vh, nf, a, f});

  ExperimentResult result;
  result.records.resize(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      const auto& j = jobs[i];
      result.records[i] = run_scenario(grid, pre, cfg, j.vh, j.nf, j.area, j.failset);
      result.records[i].id = i;
    }
  };
  const unsigned n = std::min<unsigned>(cfg.threads, static_cast<unsigned>(std::max<std::size_t>(jobs.size(), 1)));
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  result.metrics = aggregate(result.records, cfg);
  result.histogram = histogram(result.records, cfg);

  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    write_file(cfg.out_dir / "metrics.csv", [&](std::ostream& o) { write_metrics_csv(o, result.metrics); });
    write_file(cfg.out_dir / "scenarios.csv", [&](std::ostream& o) { write_scenarios_csv(o, result.records); });
    write_file(cfg.out_dir / "histogram.csv", [&](std::ostream& o) { write_histogram_csv(o, result.histogram); });
    write_file(cfg.out_dir / "comparison.csv",
               [&](std::ostream& o) { write_comparison_csv(o, compare_methods(result.metrics)); });
    write_file(cfg.out_dir / "timing.csv", [&](std::ostream& o) { write_timing_csv(o, result.records); });
  }
  return result;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  auto grid = std::make_shared<const Grid>(to_grid(load_matpower(cfg.case_path)));
  return run_experiment(cfg, std::move(grid));
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<MetricsRow> aggregate(const std::vector<ScenarioRecord>& records, const ExperimentConfig& cfg) {
  std::map<std::pair<std::size_t, std::size_t>, std::vector<const ScenarioRecord*>> settings;
  for (const auto& r : records) settings[{r.vh, r.nf}].push_back(&r);
  std::vector<MetricsRow> rows;
  for (const auto& [key, recs] : settings) {
    int degenerate = 0, no_angles = 0, failed = 0;
    std::vector<double> dz, rank, acyclic;
    for (const auto* r : recs) {
      degenerate += r->status == ScenarioStatus::Degenerate;
      no_angles += r->status == ScenarioStatus::NoAngles;
      failed += r->status == ScenarioStatus::Failed;
      if (r->status != ScenarioStatus::Ok) continue;
      dz.push_back(r->delta_zero);
      rank.push_back(r->rank_ok);
      acyclic.push_back(r->acyclic);
    }
    for (std::size_t mi = 0; mi < kMethods.size(); ++mi) {
      const Method m = kMethods[mi];
      if (!method_enabled(m, cfg)) continue;
      MetricsRow row;
      row.vh = key.first;
      row.nf = key.second;
      row.method = m;
      row.degenerate = degenerate;
      row.no_angles = no_angles;
      row.errors = failed;
      row.delta_zero_rate = mean(dz);
      row.rank_rate = mean(rank);
      row.acyclic_rate = mean(acyclic);
      std::vector<double> miss, fa, no_miss, no_fa, ok_f, ok_o;
      std::vector<double> gf, go, hf, ho, cf, co, af, ao;
      for (const auto* r : recs) {
        if (r->status != ScenarioStatus::Ok) continue;
        const auto& o = r->methods[mi];
        if (!o.ran) {
          ++row.errors;
          continue;
        }
        const double nfail = r->n_failed, nop = r->n_operational;
        miss.push_back(o.misses / nfail);
        fa.push_back(nop > 0 ? o.false_alarms / nop : 0.0);
        no_miss.push_back(o.misses == 0);
        no_fa.push_back(o.false_alarms == 0);
        ok_f.push_back((nfail - o.misses) / nfail);
        if (nop > 0) ok_o.push_back((nop - o.false_alarms) / nop);
        if (m == Method::Algorithm1 && r->certified) {
          gf.push_back(r->gale.failed / nfail);
          hf.push_back(r->hyper_node.failed / nfail);
          cf.push_back(r->fail_cover.failed / nfail);
          af.push_back(r->any.failed / nfail);
          if (nop > 0) {
            go.push_back(r->gale.operational / nop);
            ho.push_back(r->hyper_node.operational / nop);
            co.push_back(r->fail_cover.operational / nop);
            ao.push_back(r->any.operational / nop);
          }
        }
      }
      row.scenarios = static_cast<int>(miss.size());
      row.miss_rate = mean(miss);
      row.miss_q25 = quantile(miss, 0.25);
      row.miss_q75 = quantile(miss, 0.75);
      row.false_alarm_rate = mean(fa);
      row.false_alarm_q25 = quantile(fa, 0.25);
      row.false_alarm_q75 = quantile(fa, 0.75);
      row.p_no_miss = mean(no_miss);
      row.p_no_false_alarm = mean(no_fa);
      row.correct_failed = mean(ok_f);
      row.correct_operational = mean(ok_o);
      if (m == Method::Algorithm1 && cfg.run_certificates) {
        row.gale_failed = mean(gf);
        row.gale_operational = mean(go);
        row.hyper_node_failed = mean(hf);
        row.hyper_node_operational = mean(ho);
        row.fail_cover_failed = mean(cf);
        row.fail_cover_operational = mean(co);
        row.any_failed = mean(af);
        row.any_operational = mean(ao);
      }
      rows.push_back(row);
    }
  }
  return rows;
}

std::vector<HistogramRow> histogram(const std::vector<ScenarioRecord>& records, const ExperimentConfig& cfg) {
  std::map<std::tuple<std::size_t, std::size_t, std::size_t, int, int>, int> counts;
  for (const auto& r : records) {
    if (r.status != ScenarioStatus::Ok) continue;
    for (std::size_t mi = 0; mi < kMethods.size(); ++mi) {
      if (!method_enabled(kMethods[mi], cfg) || !r.methods[mi].ran) continue;
      ++counts[{r.vh, r.nf, mi, 0, r.methods[mi].misses}];
      ++counts[{r.vh, r.nf, mi, 1, r.methods[mi].false_alarms}];
    }
  }
  std::vector<HistogramRow> rows;
  for (const auto& [key, n] : counts) {
    const auto& [vh, nf, mi, kind, value] = key;
    rows.push_back({vh, nf, kMethods[mi], kind == 0 ? "miss" : "false_alarm", value, n});
  }
  return rows;
}

std::vector<ComparisonRow> compare_methods(const std::vector<MetricsRow>& rows) {
  static const std::array<const char*, 4> metrics{"miss_rate", "false_alarm_rate", "p_no_miss", "p_no_false_alarm"};
  std::map<std::pair<std::size_t, std::size_t>, std::array<ComparisonRow, 4>> table;
  for (const auto& r : rows) {
    auto [it, fresh] = table.try_emplace({r.vh, r.nf});
    auto& out = it->second;
    const std::array<double, 4> values{r.miss_rate, r.false_alarm_rate, r.p_no_miss, r.p_no_false_alarm};
    for (std::size_t k = 0; k < 4; ++k) {
      out[k].vh = r.vh;
      out[k].nf = r.nf;
      out[k].metric = metrics[k];
      auto& slot = r.method == Method::Algorithm1 ? out[k].algorithm1
                   : r.method == Method::KnownDelta ? out[k].known_delta
                                                    : out[k].bpdn;
      slot = values[k];
    }
  }
  std::vector<ComparisonRow> result;
  for (const auto& [key, group] : table) result.insert(result.end(), group.begin(), group.end());
  return result;
}

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows) {
  out << "schema,vh,nf,method,scenarios,degenerate,no_angles,errors,miss_rate,miss_q25,miss_q75,"
         "false_alarm_rate,false_alarm_q25,false_alarm_q75,p_no_miss,p_no_false_alarm,"
         "gale_failed,gale_operational,hyper_node_failed,hyper_node_operational,"
         "fail_cover_failed,fail_cover_operational,any_failed,any_operational,"
         "correct_failed,correct_operational,delta_zero_rate,rank_rate,acyclic_rate\n";
  for (const auto& r : rows) {
    out << kMetricsSchemaVersion << ',' << r.vh << ',' << r.nf << ',' << to_string(r.method) << ',' << r.scenarios
        << ',' << r.degenerate << ',' << r.no_angles << ',' << r.errors << ',' << num(r.miss_rate) << ','
        << num(r.miss_q25) << ',' << num(r.miss_q75) << ',' << num(r.false_alarm_rate) << ','
        << num(r.false_alarm_q25) << ',' << num(r.false_alarm_q75) << ',' << num(r.p_no_miss) << ','
        << num(r.p_no_false_alarm) << ',' << opt(r.gale_failed) << ',' << opt(r.gale_operational) << ','
        << opt(r.hyper_node_failed) << ',' << opt(r.hyper_node_operational) << ',' << opt(r.fail_cover_failed)
        << ',' << opt(r.fail_cover_operational) << ',' << opt(r.any_failed) << ',' << opt(r.any_operational) << ','
        << num(r.correct_failed) << ',' << num(r.correct_operational) << ',' << num(r.delta_zero_rate) << ','
        << num(r.rank_rate) << ',' << num(r.acyclic_rate) << '\n';
  }
}

void write_scenarios_csv(std::ostream& out, const std::vector<ScenarioRecord>& records) {
  out << "id,vh,nf,area,failset,seed,status,n_failed,n_operational,rank_ok,acyclic,delta_zero";
  for (Method m : kMethods) out << ',' << to_string(m) << "_misses," << to_string(m) << "_false_alarms";
  out << ",gale_failed,gale_operational,hyper_node_failed,hyper_node_operational,"
         "fail_cover_failed,fail_cover_operational,any_failed,any_operational\n";
  for (const auto& r : records) {
    out << r.id << ',' << r.vh << ',' << r.nf << ',' << r.area << ',' << r.failset << ',' << r.seed << ','
        << to_string(r.status) << ',' << r.n_failed << ',' << r.n_operational << ',' << r.rank_ok << ','
        << r.acyclic << ',' << r.delta_zero;
    for (const auto& o : r.methods) {
      if (o.ran)
        out << ',' << o.misses << ',' << o.false_alarms;
      else
        out << ",,";
    }
    for (const auto* c : {&r.gale, &r.hyper_node, &r.fail_cover, &r.any}) {
      if (r.certified)
        out << ',' << c->failed << ',' << c->operational;
      else
        out << ",,";
    }
    out << '\n';
  }
}

void write_histogram_csv(std::ostream& out, const std::vector<HistogramRow>& rows) {
  out << "vh,nf,method,kind,count,cases\n";
  for (const auto& r : rows)
    out << r.vh << ',' << r.nf << ',' << to_string(r.method) << ',' << r.kind << ',' << r.count << ',' << r.cases
        << '\n';
}

void write_timing_csv(std::ostream& out, const std::vector<ScenarioRecord>& records) {
  std::map<std::pair<std::size_t, std::size_t>, std::pair<int, std::array<double, 6>>> sums;
  for (const auto& r : records) {
    auto& [n, total] = sums[{r.vh, r.nf}];
    ++n;
    for (std::size_t k = 0; k < total.size(); ++k) total[k] += r.seconds[k];
  }
  out << "vh,nf,stage,scenarios,total_seconds,mean_ms\n";
  for (const auto& [key, value] : sums) {
    const auto& [n, total] = value;
    for (std::size_t k = 0; k < total.size(); ++k)
      out << key.first << ',' << key.second << ',' << kStageNames[k] << ',' << n << ',' << num(total[k]) << ','
          << num(1000.0 * total[k] / n) << '\n';
  }
}

void write_comparison_csv(std::ostream& out, const std::vector<ComparisonRow>& rows) {
  out << "vh,nf,metric,algorithm1,known_delta,bpdn\n";
  for (const auto& r : rows)
    out << r.vh << ',' << r.nf << ',' << r.metric << ',' << opt(r.algorithm1) << ',' << opt(r.known_delta) << ','
        << opt(r.bpdn) << '\n';
}

}  // namespace cpagrid
