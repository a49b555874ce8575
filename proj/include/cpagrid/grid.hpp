#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "cpagrid/error.hpp"

namespace cpagrid {

using NodeId = int;
using LinkId = int;

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

/// A transmission line. Endpoints are stored with `from < to`; that is the
/// orientation used by the incidence matrix.
struct Link {
  NodeId from = 0;
  NodeId to = 0;
  double reactance = 1.0;
};

struct Neighbor {
  NodeId node;
  LinkId link;
};

/// Immutable power grid: topology, reactances and pre-attack injections.
///
/// Construction validates the model: every reactance is positive, there
/// are no self-loops or parallel links, the graph is connected and the
/// injections are balanced. Link endpoints are re-oriented low id -> high
/// id so that the incidence matrix is reproducible.
class Grid {
 public:
  Grid(std::vector<double> injections, std::vector<Link> links, NodeId reference,
       std::vector<long> labels = {});

  std::size_t num_nodes() const { return injections_.size(); }
  std::size_t num_links() const { return links_.size(); }

  double injection(NodeId v) const { return injections_[static_cast<std::size_t>(v)]; }
  const std::vector<double>& injections() const { return injections_; }
  Vector injection_vector() const;

  const Link& link(LinkId e) const { return links_[static_cast<std::size_t>(e)]; }
  const std::vector<Link>& links() const { return links_; }

  NodeId reference() const { return reference_; }

  /// External bus number (e.g. the MATPOWER bus id); defaults to the index.
  long label(NodeId v) const { return labels_[static_cast<std::size_t>(v)]; }
  const std::vector<long>& labels() const { return labels_; }

  /// Neighbors of `v`, sorted by neighbor id.
  std::span<const Neighbor> neighbors(NodeId v) const {
    return adjacency_[static_cast<std::size_t>(v)];
  }

  /// Link joining `u` and `v`, or -1.
  LinkId find_link(NodeId u, NodeId v) const;

 private:
  std::vector<double> injections_;
  std::vector<Link> links_;
  NodeId reference_;
  std::vector<long> labels_;
  std::vector<std::vector<Neighbor>> adjacency_;
};

/// Partition of the node set into connected components. Blocks are ordered
/// by their smallest member, and members are sorted.
struct Partition {
  std::vector<int> block_of;
  std::vector<std::vector<NodeId>> blocks;

  std::size_t size() const { return blocks.size(); }
};

struct SteadyState {
  Vector theta;
  Vector flows;
  Partition islands;
};

struct Pin {
  NodeId node;
  double angle;
};

/// Signed node-link incidence matrix D (|V| x |E|): +1 at `from`, -1 at `to`.
SparseMatrix build_incidence(const Grid& grid);

/// Admittance matrix B with b_uv = -1/r_uv. Links flagged in `removed`
/// (indexed by link id; empty means none) are left out, which yields the
/// post-attack matrix B'.
SparseMatrix build_admittance(const Grid& grid, const std::vector<bool>& removed = {});

/// Solves B theta = p with one pinned angle per connected component of B.
///
/// Throws UnbalancedComponent when a component's injections do not sum to
/// zero and SingularSystem when a component carries no pin.
Vector dc_power_flow(const SparseMatrix& admittance, const Vector& injections,
                     std::span<const Pin> pins);

/// Connected components of (V, E \ removed).
Partition islands(const Grid& grid, std::span<const LinkId> removed = {});

/// Hypothetical flow matrix D Gamma diag(D^T theta'): column e holds the flow
/// link e would carry under `theta_post` at `from` and its negation at `to`.
SparseMatrix flow_matrix(const Grid& grid, const Vector& theta_post);

/// Per-link flows (theta_s - theta_t) / r, zero on links flagged in `removed`.
Vector link_flows(const Grid& grid, const Vector& theta, const std::vector<bool>& removed = {});

/// Pre-attack steady state with the reference node pinned at angle zero.
SteadyState pre_attack_state(const Grid& grid);

/// Marks `links` in a mask of size grid.num_links().
std::vector<bool> link_mask(const Grid& grid, std::span<const LinkId> links);

/// Max-norm of the per-node conservation residual  D f - p.
double conservation_residual(const Grid& grid, const Vector& flows, const Vector& injections);

}  // namespace cpagrid
