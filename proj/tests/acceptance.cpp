// Acceptance run: one PASS/FAIL line per criterion.
//
// Usage: acceptance [--only N]... [--expect-fail N]... [--polish PATH]
// Exit status is 0 when the failing criteria are exactly the --expect-fail
// set, so a criterion that starts passing is reported too.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "cpagrid/case_io.hpp"
#include "cpagrid/experiment.hpp"
#include "cpagrid/guarantees.hpp"
#include "cpagrid/lp.hpp"
#include "cpagrid/recovery.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace cpagrid;
using namespace oracles;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::shared_ptr<const Grid> load(const fs::path& path) {
  return std::make_shared<const Grid>(to_grid(load_matpower(path)));
}

struct Corpus {
  std::shared_ptr<const Grid> case14, case30;
};

// IEEE-scale or toy grid, a random area and up to three failures in it.
std::optional<AttackScenario> mixed_scenario(Rng& rng, const Corpus& corpus) {
  std::shared_ptr<const Grid> grid;
  switch (rng.uniform_index(4)) {
    case 0: grid = corpus.case14; break;
    case 1: grid = corpus.case30; break;
    case 2: grid = fixtures::random_connected(8 + rng.uniform_index(10), 3 + rng.uniform_index(8), rng); break;
    default: grid = fixtures::random_tree(8 + rng.uniform_index(10), rng); break;
  }
  const auto n = grid->num_nodes();
  const auto nodes = sample_attack_area(*grid, 2 + rng.uniform_index(std::min<std::size_t>(7, n - 2)), rng);
  const auto links = induced_links(*grid, nodes);
  if (links.empty()) return std::nullopt;
  const auto failed = sample_failures(links, 1 + rng.uniform_index(std::min<std::size_t>(3, links.size())), rng);
  return apply_attack(grid, nodes, failed, rng.next());
}

std::optional<AttackScenario> clean_scenario(Rng& rng, const Corpus& corpus) {
  auto s = mixed_scenario(rng, corpus);
  if (!s || s->degenerate_flow) return std::nullopt;
  return s;
}

std::vector<LinkId> sorted(std::vector<LinkId> v) {
  std::sort(v.begin(), v.end());
  return v;
}

bool exact(const LocalizationResult& r, const AttackScenario& s) { return r.detected == sorted(s.failed_links); }

Outcome flow_invariant(const Corpus& corpus) {
  Rng rng(101);
  int scenarios = 0;
  double worst = 0.0;
  while (scenarios < 1200) {
    const auto s = mixed_scenario(rng, corpus);
    if (!s) continue;
    ++scenarios;
    const Vector r = build_admittance(*s->grid) * (s->pre.theta - s->post.theta) - s->delta;
    std::vector<bool> inside(s->grid->num_nodes(), false);
    for (NodeId v : s->attacked_nodes) inside[static_cast<std::size_t>(v)] = true;
    for (Eigen::Index v = 0; v < r.size(); ++v)
      if (!inside[static_cast<std::size_t>(v)]) worst = std::max(worst, std::abs(r[v]));
  }
  return {worst <= 1e-8, fmt("%d scenarios, max outside residual %.2e", scenarios, worst)};
}

// Every area node gets a private outside neighbor, so B_{Hbar|H} has full
// column rank by construction.
AttackScenario rank_ok_scenario(Rng& rng) {
  const int k = 3 + static_cast<int>(rng.uniform_index(6));
  const int outside_extra = static_cast<int>(rng.uniform_index(6));
  const int n = 2 * k + outside_extra;
  std::vector<std::vector<bool>> used(static_cast<std::size_t>(n), std::vector<bool>(static_cast<std::size_t>(n), false));
  std::vector<std::tuple<int, int, double>> edges;
  auto add = [&](int a, int b) {
    if (a == b || used[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)]) return;
    used[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = used[static_cast<std::size_t>(b)][static_cast<std::size_t>(a)] = true;
    edges.emplace_back(a, b, rng.uniform(0.05, 1.0));
  };
  for (int v = 1; v < k; ++v) add(static_cast<int>(rng.uniform_index(static_cast<std::size_t>(v))), v);
  for (int c = 0; c < k / 2; ++c)
    add(static_cast<int>(rng.uniform_index(static_cast<std::size_t>(k))), static_cast<int>(rng.uniform_index(static_cast<std::size_t>(k))));
  for (int u = 0; u < k; ++u) add(u, k + u);
  for (int v = k + 1; v < n; ++v) add(k + static_cast<int>(rng.uniform_index(static_cast<std::size_t>(v - k))), v);
  for (int c = 0; c < 2; ++c)
    add(static_cast<int>(rng.uniform_index(static_cast<std::size_t>(k))), k + static_cast<int>(rng.uniform_index(static_cast<std::size_t>(n - k))));
  auto grid = fixtures::make_grid(fixtures::random_balanced(static_cast<std::size_t>(n), rng), edges, n - 1);
  std::vector<NodeId> nodes(static_cast<std::size_t>(k));
  std::iota(nodes.begin(), nodes.end(), 0);
  const auto links = induced_links(*grid, nodes);
  const auto failed = sample_failures(links, 1 + rng.uniform_index(std::min<std::size_t>(3, links.size())), rng);
  return apply_attack(grid, nodes, failed, rng.next());
}

Outcome angle_recovery() {
  Rng rng(202);
  int scenarios = 0, rank_failures = 0;
  double worst = 0.0;
  while (scenarios < 250) {
    const auto s = rank_ok_scenario(rng);
    const auto obs = make_observation(s, false);
    ++scenarios;
    const auto rec = recover_phase_angles(obs);
    if (!rank_condition(obs) || !rec.rank_ok || !rec.theta_inside) {
      ++rank_failures;
      continue;
    }
    for (std::size_t i = 0; i < s.attacked_nodes.size(); ++i)
      worst = std::max(worst, std::abs((*rec.theta_inside)[static_cast<Eigen::Index>(i)] - s.post.theta[s.attacked_nodes[i]]));
  }
  return {rank_failures == 0 && worst <= 1e-6,
          fmt("%d rank-ok scenarios, %d without recovery, max angle error %.2e", scenarios, rank_failures, worst)};
}

Outcome known_delta_acyclic(const Corpus& corpus) {
  Rng rng(303);
  int scenarios = 0, wrong = 0, thrown = 0;
  while (scenarios < 600) {
    const auto s = clean_scenario(rng, corpus);
    if (!s || !is_acyclic(*s->grid, s->attacked_links)) continue;
    ++scenarios;
    const auto c = fixtures::observe(*s);
    try {
      if (!exact(localize_known_delta(c.obs, fixtures::inside_delta(*s), c.theta_inside), *s)) ++wrong;
    } catch (const Error&) {
      ++thrown;
    }
  }
  return {wrong == 0 && thrown == 0,
          fmt("%d acyclic scenarios, %d inexact, %d errors", scenarios, wrong, thrown)};
}

Outcome connected_all_load() {
  Rng rng(404);
  int scenarios = 0, wrong = 0, thrown = 0;
  while (scenarios < 350) {
    const auto c = all_load_case(rng);
    if (!c) continue;
    ++scenarios;
    try {
      if (!exact(algorithm1(c->obs, c->theta_inside, 0.5), c->scenario)) ++wrong;
    } catch (const Error&) {
      ++thrown;
    }
  }
  return {wrong == 0 && thrown == 0, fmt("%d scenarios, %d inexact, %d errors", scenarios, wrong, thrown)};
}

// Fails every area link at one or two area nodes, so those nodes (or the
// pieces they split off) become islands.
std::optional<AttackScenario> islanding_scenario(Rng& rng) {
  auto grid = fixtures::random_connected(10 + rng.uniform_index(7), 2 + rng.uniform_index(6), rng);
  const auto nodes = sample_attack_area(*grid, 4 + rng.uniform_index(5), rng);
  const auto links = induced_links(*grid, nodes);
  if (links.empty()) return std::nullopt;
  std::set<LinkId> failed;
  const auto centers = 1 + rng.uniform_index(2);
  for (std::size_t c = 0; c < centers; ++c) {
    const NodeId v = nodes[rng.uniform_index(nodes.size())];
    for (LinkId e : links)
      if (grid->link(e).from == v || grid->link(e).to == v) failed.insert(e);
  }
  if (failed.empty()) return std::nullopt;
  auto s = apply_attack(grid, nodes, std::vector<LinkId>(failed.begin(), failed.end()), rng.next());
  if (s.degenerate_flow) return std::nullopt;
  return s;
}

Outcome islanding() {
  Rng rng(505);
  int scenarios = 0, wrong = 0, thrown = 0, tries = 0;
  while (scenarios < 120 && tries < 50000) {
    ++tries;
    const auto s = islanding_scenario(rng);
    if (!s || !corollary_checks(truth_view(*s)).islanding_case) continue;
    ++scenarios;
    const auto c = fixtures::observe(*s);
    try {
      if (!exact(algorithm1(c.obs, c.theta_inside, 0.5), *s)) ++wrong;
    } catch (const Error&) {
      ++thrown;
    }
  }
  return {scenarios >= 100 && wrong == 0 && thrown == 0,
          fmt("%d islanding scenarios from %d draws, %d inexact, %d errors", scenarios, tries, wrong, thrown)};
}

Outcome soundness(const Corpus& corpus) {
  Rng rng(606);
  const double etas[] = {0.3, 0.5, 0.7};
  int scenarios = 0, certified = 0, misclassified = 0, outside_gale = 0, bad_witness = 0;
  while (scenarios < 1050) {
    const auto s = clean_scenario(rng, corpus);
    if (!s) continue;
    const double eta = etas[scenarios % 3];
    ++scenarios;
    const auto truth = truth_view(*s);
    const auto c = fixtures::observe(*s);
    const auto r = algorithm1(c.obs, c.theta_inside, eta);
    const auto certs = certify_scenario(truth, eta);
    for (std::size_t j = 0; j < certs.links.size(); ++j) {
      const LinkId e = certs.links[j];
      const bool structural = certs.hyper_node[j].certified() || certs.fail_cover[j].certified();
      if (structural && !certs.gale[j].certified()) ++outside_gale;
      for (const auto* cert : {&certs.gale[j], &certs.hyper_node[j], &certs.fail_cover[j]})
        if (cert->certified() && !validate_witness(gale_system(truth, e, cert->hypothesis, eta), cert->z)) ++bad_witness;
      if (!structural && !certs.gale[j].certified()) continue;
      ++certified;
      if (std::binary_search(r.detected.begin(), r.detected.end(), e) != truth.is_failed(e)) ++misclassified;
    }
  }
  return {misclassified == 0 && outside_gale == 0 && bad_witness == 0 && certified > 0,
          fmt("%d scenarios, %d certified links, %d misclassified, %d structural outside Gale, %d bad witnesses",
              scenarios, certified, misclassified, outside_gale, bad_witness)};
}

Outcome p0_agreement(const Corpus& corpus) {
  Rng rng(707);
  int scenarios = 0, infeasible_truth = 0, objective_above = 0, unique = 0, unique_wrong = 0;
  while (scenarios < 220) {
    const auto s = clean_scenario(rng, corpus);
    if (!s || s->attacked_links.size() > 12) continue;
    ++scenarios;
    const auto c = fixtures::observe(*s);
    const auto p0 = brute_force_p0(c.obs, c.theta_inside);
    std::uint32_t truth_mask = 0;
    for (std::size_t i = 0; i < p0.links.size(); ++i)
      if (std::count(s->failed_links.begin(), s->failed_links.end(), p0.links[i])) truth_mask |= 1u << i;
    if (std::find(p0.feasible.begin(), p0.feasible.end(), truth_mask) == p0.feasible.end()) ++infeasible_truth;
    const auto r = algorithm1(c.obs, c.theta_inside, 0.5);
    if (r.objective > p0.optimum_size + 1e-7) ++objective_above;
    if (p0.optima.size() != 1 || p0.optima.front() != truth_mask) continue;
    const auto certs = certify_scenario(truth_view(*s), 0.5);
    if (!std::all_of(certs.gale.begin(), certs.gale.end(), [](const Certificate& x) { return x.certified(); }))
      continue;
    ++unique;
    if (!exact(r, *s)) ++unique_wrong;
  }
  return {infeasible_truth == 0 && objective_above == 0 && unique_wrong == 0 && unique > 0,
          fmt("%d scenarios, x* infeasible %d, LP above P0 %d, unique+certified %d with %d inexact", scenarios,
              infeasible_truth, objective_above, unique, unique_wrong)};
}

Outcome gadget() {
  const std::vector<double> f{2, 3, 5};
  bool ok = true;
  std::string detail;
  for (double target : {8.0, 5.0, 4.0, 10.0}) {
    std::set<std::vector<double>> expected, got;
    for (std::uint32_t m = 0; m < 8; ++m) {
      double sum = 0.0;
      std::vector<double> chosen;
      for (int i = 0; i < 3; ++i)
        if (m & (1u << i)) {
          sum += f[static_cast<std::size_t>(i)];
          chosen.push_back(f[static_cast<std::size_t>(i)]);
        }
      if (sum == target) expected.insert(chosen);
    }
    const auto sol = subset_sum_gadget(f, target);
    for (auto m : sol.feasible) {
      std::vector<double> chosen;
      // Link i joins the hub to leaf i + 1.
      for (LinkId e : sol.to_links(m)) chosen.push_back(f[static_cast<std::size_t>(e)]);
      std::sort(chosen.begin(), chosen.end());
      got.insert(chosen);
    }
    ok = ok && got == expected && got.size() == sol.feasible.size();
    detail += fmt("T=%g: %zu/%zu ", target, got.size(), expected.size());
  }
  return {ok, "f=(2,3,5) feasible sets vs subset sums, " + detail};
}

Outcome solver_suite() {
  Rng rng(31337);
  int lp_ok = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const LpProblem p = random_lp(rng);
    const auto out = solve(p);
    const auto oracle = vertex_oracle(p);
    if (oracle ? out.status == LpStatus::Optimal && std::abs(out.objective - *oracle) <= 1e-7
               : out.status == LpStatus::Infeasible)
      ++lp_ok;
  }
  Rng alt_rng(606);
  int alt_ok = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Matrix a = Matrix::NullaryExpr(6, 10, [&] { return integer_in(alt_rng, -4, 4); });
    if (trial % 2 == 0) {
      Vector w = Vector::NullaryExpr(9, [&] { return integer_in(alt_rng, 1, 3); });
      a.col(9) = -a.leftCols(9) * w;
    }
    const Vector g = Vector::NullaryExpr(10, [&] { return integer_in(alt_rng, -2, 6); });
    const auto alt = alternative_feasible(a, g);
    LpProblem p = LpProblem::with_variables(6);
    p.lower.setConstant(-kInfinity);
    p.a_le = a.transpose();
    p.b_le = g;
    const bool primal_infeasible = solve(p).status == LpStatus::Infeasible;
    const bool witness_ok = !alt.exists || (alt.z.minCoeff() >= -1e-12 && fixtures::max_abs(a * alt.z) <= 1e-9 &&
                                            g.dot(alt.z) < -1e-8);
    if (alt.exists == primal_infeasible && witness_ok) ++alt_ok;
  }
  return {lp_ok == 50 && alt_ok == 100, fmt("LP vs vertex oracle %d/50, alternative vs primal %d/100", lp_ok, alt_ok)};
}

const MetricsRow& row(const std::vector<MetricsRow>& rows, std::size_t nf, Method m) {
  return *std::find_if(rows.begin(), rows.end(), [&](const MetricsRow& r) { return r.nf == nf && r.method == m; });
}

Outcome trends(const fs::path& polish) {
  const auto start = std::chrono::steady_clock::now();
  const auto grid = load(polish);
  ExperimentConfig cfg;
  cfg.case_path = polish;
  cfg.vh_sizes = {40};
  cfg.failure_counts = {1, 2, 3};
  cfg.areas = 10;
  cfg.failsets = 30;
  const auto result = run_experiment(cfg, grid);

  // Acyclic-H probability over area sizes, from areas alone.
  Rng rng(cfg.seed);
  std::vector<double> acyclic;
  for (std::size_t vh : {10, 20, 30, 40}) {
    int hits = 0;
    for (int i = 0; i < 300; ++i) {
      const auto nodes = sample_attack_area(*grid, vh, rng);
      hits += is_acyclic(*grid, induced_links(*grid, nodes));
    }
    acyclic.push_back(hits / 300.0);
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  std::ostringstream why;
  bool a = true, c = true, d = true, e = true;
  double prev_zero = 2.0;
  for (std::size_t nf : cfg.failure_counts) {
    const auto& alg = row(result.metrics, nf, Method::Algorithm1);
    const auto& known = row(result.metrics, nf, Method::KnownDelta);
    const auto& bpdn = row(result.metrics, nf, Method::Bpdn);
    a = a && alg.rank_rate <= 0.05;
    c = c && alg.delta_zero_rate <= 0.5 && alg.delta_zero_rate <= prev_zero;
    prev_zero = alg.delta_zero_rate;
    const bool lowest = known.miss_rate <= alg.miss_rate && known.miss_rate <= bpdn.miss_rate;
    const bool no_fa = alg.p_no_false_alarm >= known.p_no_false_alarm;
    const bool beats = alg.miss_rate <= 0.5 * bpdn.miss_rate;
    d = d && lowest && no_fa && beats;
    e = e && alg.p_no_false_alarm >= 0.8;
    why << fmt(" |F|=%zu: n=%d rank=%.3f dzero=%.3f miss(alg/known/bpdn)=%.3f/%.3f/%.3f P(noFA)(alg/known)=%.3f/%.3f;",
               nf, alg.scenarios, alg.rank_rate, alg.delta_zero_rate, alg.miss_rate, known.miss_rate, bpdn.miss_rate,
               alg.p_no_false_alarm, known.p_no_false_alarm);
  }
  const bool b = std::is_sorted(acyclic.rbegin(), acyclic.rend()) && acyclic.front() > acyclic.back();
  const bool fast = seconds < 900.0;
  std::string flags = fmt("(a)%s (b)%s (c)%s (d)%s (e)%s time %s", a ? "ok" : "FAIL", b ? "ok" : "FAIL",
                          c ? "ok" : "FAIL", d ? "ok" : "FAIL", e ? "ok" : "FAIL", fast ? "ok" : "FAIL");
  return {a && b && c && d && e && fast,
          flags + fmt("; %.0f s; acyclic(10,20,30,40)=%.3f/%.3f/%.3f/%.3f;", seconds, acyclic[0], acyclic[1],
                      acyclic[2], acyclic[3]) +
              why.str()};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> only, expect_fail;
  std::string polish = std::string(CPAGRID_DATA_DIR) + "/case2383wp.m";
  app.add_option("--only", only, "Run only these criteria");
  app.add_option("--expect-fail", expect_fail, "Criteria known to fail");
  app.add_option("--polish", polish, "Polish case for criterion 9");
  CLI11_PARSE(app, argc, argv);

  const Corpus corpus{load(fs::path(CPAGRID_DATA_DIR) / "case14.m"), load(fs::path(CPAGRID_DATA_DIR) / "case30.m")};
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"flow invariant outside the area", [&] { return flow_invariant(corpus); }},
      {"phase-angle recovery under the rank condition", angle_recovery},
      {"known-delta localization on acyclic areas", [&] { return known_delta_acyclic(corpus); }},
      {"algorithm1 exact on connected acyclic all-load areas", connected_all_load},
      {"algorithm1 exact on islanding scenarios", islanding},
      {"certificate soundness and containment", [&] { return soundness(corpus); }},
      {"P0 oracle agreement", [&] { return p0_agreement(corpus); }},
      {"subset-sum gadget", gadget},
      {"Polish trend reproduction", [&] { return trends(polish); }},
      {"solver oracles", solver_suite},
  };

  std::set<int> failed;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Outcome v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& ex) {
      v = {false, std::string("exception: ") + ex.what()};
    }
    if (!v.pass) failed.insert(id);
    std::printf("criterion %2d %s  %s: %s\n", id, v.pass ? "PASS" : "FAIL", criteria[i].first.c_str(), v.detail.c_str());
    std::fflush(stdout);
  }
  std::set<int> expected;
  for (int id : expect_fail)
    if (only.empty() || std::find(only.begin(), only.end(), id) != only.end()) expected.insert(id);
  for (int id : expected)
    if (!failed.count(id)) std::printf("note: criterion %d was expected to fail and passed\n", id);
  return failed == expected ? 0 : 1;
}
