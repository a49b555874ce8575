#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "cpagrid/grid.hpp"

namespace cpagrid {

/// Seedable 64-bit generator with platform-independent bounded draws.
///
/// std::mt19937_64 has a fully specified output sequence; the standard
/// distributions do not, so bounded integers and uniform reals are derived
/// here by rejection and by taking the top 53 bits.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, n).
  std::size_t uniform_index(std::size_t n);

  /// Uniform double in [0, 1).
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

 private:
  std::mt19937_64 engine_;
};

/// Ground truth of one attack: the attacked area H = (V_H, E_H), the failed
/// links F and the pre/post-attack steady states. delta = p - p'.
struct AttackScenario {
  std::shared_ptr<const Grid> grid;
  std::vector<NodeId> attacked_nodes;
  std::vector<LinkId> attacked_links;
  std::vector<LinkId> failed_links;
  SteadyState pre;
  SteadyState post;
  Vector delta;
  std::uint64_t seed = 0;
  double eta = 0.5;
  /// Some link of E_H has (numerically) equal post-attack end angles, so its
  /// status cannot be inferred from flows.
  bool degenerate_flow = false;

  Vector post_injections() const { return grid->injection_vector() - delta; }
};

/// What the control center sees after the attack. Entries of
/// `delta_outside` and `theta_post_outside` that belong to V_H are NaN.
struct Observation {
  std::shared_ptr<const Grid> grid;
  Vector theta_pre;
  std::vector<NodeId> attacked_nodes;
  std::vector<LinkId> attacked_links;
  Vector delta_outside;
  Vector theta_post_outside;
  /// Post-attack angles of V_H in `attacked_nodes` order (PMU mode only).
  std::optional<Vector> theta_post_inside;
  bool pmu_mode = false;

  bool is_attacked(NodeId v) const;
  /// Full post-attack angle vector from the outside angles and `inside`.
  Vector assemble_theta_post(const Vector& inside) const;
};

bool operator==(const Grid& a, const Grid& b);
bool operator==(const Partition& a, const Partition& b);
bool operator==(const SteadyState& a, const SteadyState& b);
bool operator==(const AttackScenario& a, const AttackScenario& b);

/// Links with both endpoints in `nodes`, sorted.
std::vector<LinkId> induced_links(const Grid& grid, std::span<const NodeId> nodes);

/// First `size` nodes reached by a FIFO breadth-first search from a uniformly
/// random start node (neighbors in id order). Returned sorted.
std::vector<NodeId> sample_attack_area(const Grid& grid, std::size_t size, Rng& rng);

/// Uniform `k`-subset of `candidates` without replacement, sorted.
std::vector<LinkId> sample_failures(std::span<const LinkId> candidates, std::size_t k, Rng& rng);

/// Proportional load shedding / generation reduction for one island. Nodes
/// with p > 0 are generators, the rest loads. Only the side in excess is
/// scaled; an island with generators only sheds all generation. Islands
/// balanced to within 1e-12 relative are left unchanged.
std::vector<double> proportional_balance(std::span<const double> injections);

/// Fails `failed` inside the area `attacked` and computes the post-attack
/// state. Each post-attack island is rebalanced proportionally and solved
/// with its smallest node pinned at that node's pre-attack angle.
AttackScenario apply_attack(std::shared_ptr<const Grid> grid, std::span<const NodeId> attacked,
                            std::span<const LinkId> failed, std::uint64_t seed);

/// Same, reusing an already computed pre-attack state.
AttackScenario apply_attack(std::shared_ptr<const Grid> grid, const SteadyState& pre,
                            std::span<const NodeId> attacked, std::span<const LinkId> failed,
                            std::uint64_t seed);

Observation make_observation(const AttackScenario& scenario, bool pmu_mode);

}  // namespace cpagrid
