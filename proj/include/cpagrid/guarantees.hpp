#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cpagrid/attack.hpp"
#include "cpagrid/grid.hpp"

namespace cpagrid {

/// Ground truth of one scenario, restricted to the attacked area. Rows follow
/// `nodes`, columns follow `links`.
struct TruthView {
  std::shared_ptr<const Grid> grid;
  std::vector<NodeId> nodes;
  std::vector<LinkId> links;
  std::vector<bool> failed;
  /// D~_H under the true post-attack angles.
  Matrix flows;
  Vector delta;
  Vector injections;
  /// g_{D,u} and g_{D,-u}.
  Vector g_plus;
  Vector g_minus;
  /// Whether the whole grid is still connected after the failures.
  bool grid_connected = true;

  int local_node(NodeId v) const;
  int local_link(LinkId e) const;
  bool is_failed(LinkId e) const;
  std::vector<LinkId> failed_links() const;
};

TruthView truth_view(const AttackScenario& scenario);

/// Truth view from explicit post-attack angles and injection changes (both
/// indexed by node id over the whole grid).
TruthView truth_view(std::shared_ptr<const Grid> grid, std::span<const NodeId> nodes, std::span<const LinkId> failed,
                     const Vector& theta_post, const Vector& delta);

enum class Hypothesis { Failed, Operational };
enum class Verdict { Certified, NotCertified };
enum class Mechanism { Gale, HyperNodeNoMiss, HyperNodeNoFA, FailCover, CorollaryConnected, CorollaryIslanding };

std::string_view to_string(Hypothesis h);
std::string_view to_string(Verdict v);
std::string_view to_string(Mechanism m);

struct Certificate {
  LinkId link = -1;
  Hypothesis hypothesis = Hypothesis::Failed;
  Verdict verdict = Verdict::NotCertified;
  Mechanism mechanism = Mechanism::Gale;
  /// Alternative-system solution, in GaleSystem column order.
  Vector z;
  /// Hyper-node U (HyperNode*) or members of T (FailCover).
  std::vector<std::vector<NodeId>> witness_nodes;
  /// g^T z / 1^T z of the witness.
  double value = 0.0;

  bool certified() const { return verdict == Verdict::Certified; }
};

/// The alternative system  [A_D^T, A_x^T, W^T, 1] z = 0,  g^T z < 0  for one
/// link. Columns: z_{D,u} (k), z_{D,-u} (k), z_{x-} (m), z_{x+} (m), z_w, z_*.
struct GaleSystem {
  Matrix a;
  Vector g;
  Eigen::Index k = 0;
  Eigen::Index m = 0;

  Eigen::Index col_d_plus(int u) const { return u; }
  Eigen::Index col_d_minus(int u) const { return k + u; }
  Eigen::Index col_x_minus(int e) const { return 2 * k + e; }
  Eigen::Index col_x_plus(int e) const { return 2 * k + m + e; }
  Eigen::Index col_w() const { return 2 * k + 2 * m; }
  Eigen::Index col_star() const { return 2 * k + 2 * m + 1; }
};

GaleSystem gale_system(const TruthView& truth, LinkId link, Hypothesis hypothesis, double eta);

/// Independent check of a witness: z >= 0, A z = 0 (to 1e-9 relative) and
/// g^T z < -2e-8 1^T z.
bool validate_witness(const GaleSystem& system, const Vector& z);

/// Throws PreconditionViolated when the hypothesis disagrees with the truth.
Certificate gale_certify(const TruthView& truth, LinkId link, Hypothesis hypothesis, double eta);

struct HyperNode {
  std::vector<NodeId> nodes;
  /// E_U: links of E_H with exactly one endpoint in U.
  std::vector<LinkId> boundary;
  /// D~_{U,e} for every link of E_H (zero off E_U).
  Vector aggregated;
  std::vector<LinkId> s_u;
  double f0 = 0.0;
  /// +inf when E_U has no failed link.
  double f1 = 0.0;
  double fg = 0.0;
};

/// Throws NotConnected when U is empty, leaves V_H or does not induce a
/// connected subgraph.
HyperNode hypernode_props(const TruthView& truth, std::span<const NodeId> nodes);

bool certify_no_miss(const TruthView& truth, std::span<const NodeId> nodes, LinkId link, double eta);
bool certify_no_false_alarm(const TruthView& truth, std::span<const NodeId> nodes, LinkId link, double eta);

/// Grows a hyper-node from each endpoint of `link`, absorbing the far
/// endpoints of links that break conditions 1-2. Sound, not complete.
Certificate bfs_witness_search(const TruthView& truth, LinkId link, Hypothesis hypothesis, double eta);

struct FailCoverSet {
  std::vector<std::vector<NodeId>> members;
  /// Member lies in T_n (aggregated flows on F are nonpositive).
  std::vector<bool> negative;
  std::vector<double> weights;
  /// D~_{T,e} per link of E_H.
  Vector aggregated;
  std::vector<LinkId> s_t;
  double f0 = 0.0;
  double f1 = 0.0;
  double fg = 0.0;
};

/// Throws PreconditionViolated when a member is not a fail-cover hyper-node.
FailCoverSet make_failcover_set(const TruthView& truth, const std::vector<std::vector<NodeId>>& members);

/// Conditions 1-2: f_{T,1} >= f_{T,0} and F covered by the members.
bool failcover_conditions(const TruthView& truth, const FailCoverSet& t);

/// Throws PreconditionViolated when conditions 1-2 fail.
Certificate failcover_certify(const TruthView& truth, const FailCoverSet& t, LinkId link, double eta);

/// Greedy cover by singleton fail-cover hyper-nodes, repaired by growth.
std::optional<FailCoverSet> build_failcover_set(const TruthView& truth, double eta);

struct CorollaryFlags {
  bool connected_case = false;
  bool islanding_case = false;
  bool acyclic_h = false;
};

CorollaryFlags corollary_checks(const TruthView& truth);

/// All certificates of one scenario.
struct ScenarioCertificates {
  std::vector<LinkId> links;
  std::vector<Certificate> gale;
  std::vector<Certificate> hyper_node;
  std::vector<Certificate> fail_cover;
  std::optional<FailCoverSet> cover;
  CorollaryFlags corollaries;
};

ScenarioCertificates certify_scenario(const TruthView& truth, double eta);

/// Plain-text audit dump.
std::string dump_certificates(const TruthView& truth, const ScenarioCertificates& certs);

}  // namespace cpagrid
