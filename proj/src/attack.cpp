#include "cpagrid/attack.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <string>

namespace cpagrid {

namespace {

bool same_values(const Vector& a, const Vector& b) {
  return a.size() == b.size() && (a.array() == b.array()).all();
}

void require_sorted_unique(std::span<const int> ids, const char* what) {
  for (std::size_t i = 1; i < ids.size(); ++i)
    if (ids[i - 1] >= ids[i])
      throw Error(ErrorCode::InvalidArgument, std::string(what) + " must be sorted and duplicate-free");
}

}  // namespace

std::size_t Rng::uniform_index(std::size_t n) {
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "uniform_index: empty range");
  const std::uint64_t range = n;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % range;
  std::uint64_t draw = next();
  while (draw >= limit) draw = next();
  return static_cast<std::size_t>(draw % range);
}

bool Observation::is_attacked(NodeId v) const {
  return std::binary_search(attacked_nodes.begin(), attacked_nodes.end(), v);
}

Vector Observation::assemble_theta_post(const Vector& inside) const {
  if (static_cast<std::size_t>(inside.size()) != attacked_nodes.size())
    throw Error(ErrorCode::InvalidArgument, "assemble_theta_post: wrong number of inside angles");
  Vector theta = theta_post_outside;
  for (std::size_t i = 0; i < attacked_nodes.size(); ++i)
    theta[attacked_nodes[i]] = inside[static_cast<Eigen::Index>(i)];
  return theta;
}

bool operator==(const Grid& a, const Grid& b) {
  if (&a == &b) return true;
  if (a.injections() != b.injections() || a.reference() != b.reference() || a.labels() != b.labels() ||
      a.num_links() != b.num_links())
    return false;
  for (std::size_t e = 0; e < a.num_links(); ++e) {
    const auto& la = a.link(static_cast<LinkId>(e));
    const auto& lb = b.link(static_cast<LinkId>(e));
    if (la.from != lb.from || la.to != lb.to || la.reactance != lb.reactance) return false;
  }
  return true;
}

bool operator==(const Partition& a, const Partition& b) {
  return a.block_of == b.block_of && a.blocks == b.blocks;
}

bool operator==(const SteadyState& a, const SteadyState& b) {
  return same_values(a.theta, b.theta) && same_values(a.flows, b.flows) && a.islands == b.islands;
}

bool operator==(const AttackScenario& a, const AttackScenario& b) {
  if (!a.grid || !b.grid) return a.grid == b.grid;
  return *a.grid == *b.grid && a.attacked_nodes == b.attacked_nodes && a.attacked_links == b.attacked_links &&
         a.failed_links == b.failed_links && a.pre == b.pre && a.post == b.post && same_values(a.delta, b.delta) &&
         a.seed == b.seed && a.eta == b.eta && a.degenerate_flow == b.degenerate_flow;
}

std::vector<LinkId> induced_links(const Grid& grid, std::span<const NodeId> nodes) {
  std::vector<bool> inside(grid.num_nodes(), false);
  for (NodeId v : nodes) {
    if (v < 0 || static_cast<std::size_t>(v) >= grid.num_nodes())
      throw Error(ErrorCode::InvalidArgument, "node id " + std::to_string(v) + " out of range");
    inside[static_cast<std::size_t>(v)] = true;
  }
  std::vector<LinkId> out;
  for (std::size_t e = 0; e < grid.num_links(); ++e) {
    const auto& l = grid.link(static_cast<LinkId>(e));
    if (inside[static_cast<std::size_t>(l.from)] && inside[static_cast<std::size_t>(l.to)])
      out.push_back(static_cast<LinkId>(e));
  }
  return out;
}

std::vector<NodeId> sample_attack_area(const Grid& grid, std::size_t size, Rng& rng) {
  if (size < 1 || size > grid.num_nodes())
    throw Error(ErrorCode::InvalidArgument, "attack area size must lie in [1, |V|]");
  const auto start = static_cast<NodeId>(rng.uniform_index(grid.num_nodes()));
  std::vector<bool> seen(grid.num_nodes(), false);
  std::vector<NodeId> area;
  std::deque<NodeId> queue{start};
  seen[static_cast<std::size_t>(start)] = true;
  while (!queue.empty() && area.size() < size) {
    const NodeId v = queue.front();
    queue.pop_front();
    area.push_back(v);
    for (const auto& nb : grid.neighbors(v)) {
      if (seen[static_cast<std::size_t>(nb.node)]) continue;
      seen[static_cast<std::size_t>(nb.node)] = true;
      queue.push_back(nb.node);
    }
  }
  std::sort(area.begin(), area.end());
  return area;
}

std::vector<LinkId> sample_failures(std::span<const LinkId> candidates, std::size_t k, Rng& rng) {
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "at least one link must fail");
  if (k > candidates.size())
    throw Error(ErrorCode::TooFewLinks, "cannot fail " + std::to_string(k) + " of " +
                                            std::to_string(candidates.size()) + " links");
  // Partial Fisher-Yates.
  std::vector<LinkId> pool(candidates.begin(), candidates.end());
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.uniform_index(pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

std::vector<double> proportional_balance(std::span<const double> injections) {
  double gen = 0.0, load = 0.0;
  for (double p : injections) {
    if (p > 0.0)
      gen += p;
    else
      load -= p;
  }
  std::vector<double> out(injections.begin(), injections.end());
  if (std::abs(gen - load) <= 1e-12 * std::max(gen, load)) return out;
  if (gen > load) {
    const double ratio = load / gen;
    for (double& p : out)
      if (p > 0.0) p *= ratio;
  } else if (load > gen) {
    const double ratio = gen / load;
    for (double& p : out)
      if (p <= 0.0) p *= ratio;
  }
  return out;
}

AttackScenario apply_attack(std::shared_ptr<const Grid> grid, std::span<const NodeId> attacked,
                            std::span<const LinkId> failed, std::uint64_t seed) {
  if (!grid) throw Error(ErrorCode::InvalidArgument, "apply_attack: null grid");
  const SteadyState pre = pre_attack_state(*grid);
  return apply_attack(std::move(grid), pre, attacked, failed, seed);
}

AttackScenario apply_attack(std::shared_ptr<const Grid> grid, const SteadyState& pre,
                            std::span<const NodeId> attacked, std::span<const LinkId> failed,
                            std::uint64_t seed) {
  if (!grid) throw Error(ErrorCode::InvalidArgument, "apply_attack: null grid");
  require_sorted_unique(attacked, "attacked nodes");
  require_sorted_unique(failed, "failed links");
  if (attacked.empty()) throw Error(ErrorCode::InvalidArgument, "attacked area is empty");

  AttackScenario s;
  s.grid = grid;
  s.seed = seed;
  s.attacked_nodes.assign(attacked.begin(), attacked.end());
  s.attacked_links = induced_links(*grid, attacked);
  s.failed_links.assign(failed.begin(), failed.end());
  for (LinkId e : failed)
    if (!std::binary_search(s.attacked_links.begin(), s.attacked_links.end(), e))
      throw Error(ErrorCode::InvalidArgument, "failed link " + std::to_string(e) + " is not inside the attacked area");
  s.pre = pre;

  const auto removed = link_mask(*grid, failed);
  Partition parts = islands(*grid, failed);
  const auto n = static_cast<Eigen::Index>(grid->num_nodes());

  Vector post_p(n);
  std::vector<Pin> pins;
  pins.reserve(parts.size());
  for (const auto& block : parts.blocks) {
    std::vector<double> island_p;
    island_p.reserve(block.size());
    for (NodeId v : block) island_p.push_back(grid->injection(v));
    const auto balanced = proportional_balance(island_p);
    for (std::size_t i = 0; i < block.size(); ++i) post_p[block[i]] = balanced[i];
    pins.push_back({block.front(), pre.theta[block.front()]});
  }

  s.post.theta = dc_power_flow(build_admittance(*grid, removed), post_p, pins);
  s.post.flows = link_flows(*grid, s.post.theta, removed);
  s.post.islands = std::move(parts);
  s.delta = grid->injection_vector() - post_p;

  for (LinkId e : s.attacked_links) {
    const auto& l = grid->link(e);
    if (std::abs(s.post.theta[l.from] - s.post.theta[l.to]) < 1e-9) {
      s.degenerate_flow = true;
      break;
    }
  }
  return s;
}

Observation make_observation(const AttackScenario& scenario, bool pmu_mode) {
  const auto nan = std::numeric_limits<double>::quiet_NaN();
  Observation obs;
  obs.grid = scenario.grid;
  obs.theta_pre = scenario.pre.theta;
  obs.attacked_nodes = scenario.attacked_nodes;
  obs.attacked_links = scenario.attacked_links;
  obs.delta_outside = scenario.delta;
  obs.theta_post_outside = scenario.post.theta;
  obs.pmu_mode = pmu_mode;
  Vector inside(static_cast<Eigen::Index>(scenario.attacked_nodes.size()));
  for (std::size_t i = 0; i < scenario.attacked_nodes.size(); ++i) {
    const NodeId v = scenario.attacked_nodes[i];
    inside[static_cast<Eigen::Index>(i)] = scenario.post.theta[v];
    obs.delta_outside[v] = nan;
    obs.theta_post_outside[v] = nan;
  }
  if (pmu_mode) obs.theta_post_inside = std::move(inside);
  return obs;
}

}  // namespace cpagrid
