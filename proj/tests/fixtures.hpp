#pragma once

#include <algorithm>
#include <functional>
#include <memory>
#include <numeric>
#include <tuple>
#include <vector>

#include "cpagrid/attack.hpp"
#include "cpagrid/grid.hpp"

namespace fixtures {

using namespace cpagrid;

inline std::shared_ptr<const Grid> make_grid(std::vector<double> p, const std::vector<std::tuple<int, int, double>>& edges,
                                             NodeId reference = 0) {
  std::vector<Link> links;
  for (const auto& [s, t, r] : edges) links.push_back({s, t, r});
  return std::make_shared<const Grid>(std::move(p), std::move(links), reference);
}

/// Path v0 - v1 - ... with unit reactances.
inline std::shared_ptr<const Grid> path_grid(std::vector<double> p) {
  std::vector<std::tuple<int, int, double>> edges;
  for (int i = 0; i + 1 < static_cast<int>(p.size()); ++i) edges.emplace_back(i, i + 1, 1.0);
  return make_grid(std::move(p), edges);
}

/// Injections summing to zero: random magnitudes, a random sign pattern and
/// the residual charged to the node with the largest magnitude.
inline std::vector<double> random_balanced(std::size_t n, Rng& rng) {
  std::vector<double> p(n);
  for (auto& x : p) x = rng.uniform(-2.0, 2.0);
  const double mean = std::accumulate(p.begin(), p.end(), 0.0) / static_cast<double>(n);
  for (auto& x : p) x -= mean;
  const double rest = std::accumulate(p.begin() + 1, p.end(), 0.0);
  p[0] = -rest;
  return p;
}

inline std::shared_ptr<const Grid> random_tree(std::size_t n, Rng& rng) {
  std::vector<std::tuple<int, int, double>> edges;
  for (std::size_t v = 1; v < n; ++v)
    edges.emplace_back(static_cast<int>(rng.uniform_index(v)), static_cast<int>(v), rng.uniform(0.05, 1.0));
  return make_grid(random_balanced(n, rng), edges);
}

/// Random connected grid: a spanning tree plus `extra` chords.
inline std::shared_ptr<const Grid> random_connected(std::size_t n, std::size_t extra, Rng& rng) {
  std::vector<std::tuple<int, int, double>> edges;
  std::vector<std::vector<bool>> used(n, std::vector<bool>(n, false));
  for (std::size_t v = 1; v < n; ++v) {
    const auto u = rng.uniform_index(v);
    edges.emplace_back(static_cast<int>(u), static_cast<int>(v), rng.uniform(0.05, 1.0));
    used[u][v] = used[v][u] = true;
  }
  for (std::size_t k = 0, tries = 0; k < extra && tries < 50 * (extra + 1); ++tries) {
    const auto a = rng.uniform_index(n), b = rng.uniform_index(n);
    if (a == b || used[a][b]) continue;
    used[a][b] = used[b][a] = true;
    edges.emplace_back(static_cast<int>(a), static_cast<int>(b), rng.uniform(0.05, 1.0));
    ++k;
  }
  return make_grid(random_balanced(n, rng), edges);
}

inline double max_abs(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

/// Grid whose nodes in `area` are all loads; the first node outside the area
/// absorbs the imbalance.
inline std::shared_ptr<const Grid> with_area_loads(const Grid& topology, const std::vector<NodeId>& area, Rng& rng) {
  std::vector<double> p(topology.num_nodes());
  std::vector<bool> inside(p.size(), false);
  for (NodeId v : area) inside[static_cast<std::size_t>(v)] = true;
  int sink = -1;
  double total = 0.0;
  for (std::size_t v = 0; v < p.size(); ++v) {
    p[v] = inside[v] ? -rng.uniform(0.2, 1.5) : rng.uniform(-1.0, 2.0);
    if (!inside[v] && sink < 0) sink = static_cast<int>(v);
  }
  for (std::size_t v = 0; v < p.size(); ++v)
    if (static_cast<int>(v) != sink) total += p[v];
  p[static_cast<std::size_t>(sink)] = -total;
  return std::make_shared<const Grid>(std::move(p), topology.links(), topology.reference());
}

/// Scenario plus its observation, with the inside post-attack angles.
struct Case {
  AttackScenario scenario;
  Observation obs;
  Vector theta_inside;
};

inline Case observe(const AttackScenario& s) {
  Case c{s, make_observation(s, true), {}};
  c.theta_inside = *c.obs.theta_post_inside;
  return c;
}

inline Vector inside_delta(const AttackScenario& s) {
  Vector d(static_cast<Eigen::Index>(s.attacked_nodes.size()));
  for (std::size_t i = 0; i < s.attacked_nodes.size(); ++i) d[static_cast<Eigen::Index>(i)] = s.delta[s.attacked_nodes[i]];
  return d;
}

/// True when the links contain no cycle.
inline bool forest(const Grid& g, const std::vector<LinkId>& links) {
  std::vector<int> parent(g.num_nodes());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) { return parent[static_cast<std::size_t>(x)] == x ? x : parent[static_cast<std::size_t>(x)] = find(parent[static_cast<std::size_t>(x)]); };
  for (LinkId e : links) {
    const int a = find(g.link(e).from), b = find(g.link(e).to);
    if (a == b) return false;
    parent[static_cast<std::size_t>(a)] = b;
  }
  return true;
}

}  // namespace fixtures
