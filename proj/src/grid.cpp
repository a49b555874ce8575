#include "cpagrid/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <set>
#include <string>
#include <utility>

namespace cpagrid {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidGrid: return "InvalidGrid";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::UnbalancedComponent: return "UnbalancedComponent";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::MissingTable: return "MissingTable";
    case ErrorCode::DisconnectedCase: return "DisconnectedCase";
    case ErrorCode::NonpositiveReactance: return "NonpositiveReactance";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::TooFewLinks: return "TooFewLinks";
    case ErrorCode::NumericalBreakdown: return "NumericalBreakdown";
    case ErrorCode::InfeasibleSystem: return "InfeasibleSystem";
    case ErrorCode::InfeasibleP1: return "InfeasibleP1";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::PreconditionViolated: return "PreconditionViolated";
    case ErrorCode::NotConnected: return "NotConnected";
  }
  return "Unknown";
}

namespace {

// Union-find over node indices; roots are always the smallest member.
class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

  int find(int x) {
    while (parent_[static_cast<std::size_t>(x)] != x) {
      auto& p = parent_[static_cast<std::size_t>(x)];
      p = parent_[static_cast<std::size_t>(p)];
      x = p;
    }
    return x;
  }

  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b) std::swap(a, b);
    parent_[static_cast<std::size_t>(a)] = b;
  }

 private:
  std::vector<int> parent_;
};

Partition partition_from(DisjointSets& sets, std::size_t n) {
  Partition part;
  part.block_of.assign(n, -1);
  for (std::size_t v = 0; v < n; ++v) {
    const int root = sets.find(static_cast<int>(v));
    auto& root_block = part.block_of[static_cast<std::size_t>(root)];
    if (root_block < 0) {
      root_block = static_cast<int>(part.blocks.size());
      part.blocks.emplace_back();
    }
    part.block_of[v] = root_block;
    part.blocks[static_cast<std::size_t>(root_block)].push_back(static_cast<NodeId>(v));
  }
  return part;
}

}  // namespace

Grid::Grid(std::vector<double> injections, std::vector<Link> links, NodeId reference,
           std::vector<long> labels)
    : injections_(std::move(injections)),
      links_(std::move(links)),
      reference_(reference),
      labels_(std::move(labels)) {
  const auto n = injections_.size();
  if (n == 0) throw Error(ErrorCode::InvalidGrid, "grid has no nodes");
  if (reference_ < 0 || static_cast<std::size_t>(reference_) >= n)
    throw Error(ErrorCode::InvalidGrid, "reference node out of range");
  if (labels_.empty()) {
    labels_.resize(n);
    std::iota(labels_.begin(), labels_.end(), 0L);
  } else if (labels_.size() != n) {
    throw Error(ErrorCode::InvalidGrid, "label count does not match node count");
  }

  std::set<std::pair<NodeId, NodeId>> seen;
  adjacency_.resize(n);
  for (std::size_t e = 0; e < links_.size(); ++e) {
    auto& l = links_[e];
    if (l.from < 0 || l.to < 0 || static_cast<std::size_t>(l.from) >= n ||
        static_cast<std::size_t>(l.to) >= n)
      throw Error(ErrorCode::InvalidGrid, "link " + std::to_string(e) + " has an endpoint out of range");
    if (l.from == l.to) throw Error(ErrorCode::InvalidGrid, "link " + std::to_string(e) + " is a self-loop");
    if (!(l.reactance > 0.0) || !std::isfinite(l.reactance))
      throw Error(ErrorCode::InvalidGrid, "link " + std::to_string(e) + " has non-positive reactance");
    if (l.from > l.to) std::swap(l.from, l.to);
    if (!seen.emplace(l.from, l.to).second)
      throw Error(ErrorCode::InvalidGrid, "parallel links between nodes " + std::to_string(l.from) +
                                              " and " + std::to_string(l.to));
    adjacency_[static_cast<std::size_t>(l.from)].push_back({l.to, static_cast<LinkId>(e)});
    adjacency_[static_cast<std::size_t>(l.to)].push_back({l.from, static_cast<LinkId>(e)});
  }
  for (auto& adj : adjacency_)
    std::sort(adj.begin(), adj.end(), [](const Neighbor& a, const Neighbor& b) { return a.node < b.node; });

  double total = 0.0, scale = 0.0;
  for (double p : injections_) {
    if (!std::isfinite(p)) throw Error(ErrorCode::InvalidGrid, "non-finite injection");
    total += p;
    scale += std::abs(p);
  }
  if (std::abs(total) > 1e-9 * std::max(1.0, scale))
    throw Error(ErrorCode::InvalidGrid, "injections are not balanced (sum " + std::to_string(total) + ")");

  if (islands(*this).size() != 1) throw Error(ErrorCode::InvalidGrid, "grid is not connected");
}

Vector Grid::injection_vector() const {
  return Eigen::Map<const Vector>(injections_.data(), static_cast<Eigen::Index>(injections_.size()));
}

LinkId Grid::find_link(NodeId u, NodeId v) const {
  for (const auto& nb : neighbors(u))
    if (nb.node == v) return nb.link;
  return -1;
}

SparseMatrix build_incidence(const Grid& grid) {
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(2 * grid.num_links());
  for (std::size_t e = 0; e < grid.num_links(); ++e) {
    const auto& l = grid.link(static_cast<LinkId>(e));
    triplets.emplace_back(l.from, static_cast<int>(e), 1.0);
    triplets.emplace_back(l.to, static_cast<int>(e), -1.0);
  }
  SparseMatrix d(static_cast<Eigen::Index>(grid.num_nodes()), static_cast<Eigen::Index>(grid.num_links()));
  d.setFromTriplets(triplets.begin(), triplets.end());
  return d;
}

SparseMatrix build_admittance(const Grid& grid, const std::vector<bool>& removed) {
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(4 * grid.num_links() + grid.num_nodes());
  for (std::size_t e = 0; e < grid.num_links(); ++e) {
    if (!removed.empty() && removed[e]) continue;
    const auto& l = grid.link(static_cast<LinkId>(e));
    const double b = 1.0 / l.reactance;
    triplets.emplace_back(l.from, l.to, -b);
    triplets.emplace_back(l.to, l.from, -b);
    triplets.emplace_back(l.from, l.from, b);
    triplets.emplace_back(l.to, l.to, b);
  }
  const auto n = static_cast<Eigen::Index>(grid.num_nodes());
  SparseMatrix b(n, n);
  b.setFromTriplets(triplets.begin(), triplets.end());
  b.makeCompressed();
  return b;
}

Vector dc_power_flow(const SparseMatrix& admittance, const Vector& injections, std::span<const Pin> pins) {
  const auto n = admittance.rows();
  if (admittance.cols() != n || injections.size() != n)
    throw Error(ErrorCode::InvalidArgument, "dc_power_flow: dimension mismatch");

  DisjointSets sets(static_cast<std::size_t>(n));
  for (Eigen::Index col = 0; col < admittance.outerSize(); ++col)
    for (SparseMatrix::InnerIterator it(admittance, col); it; ++it)
      if (it.row() != it.col() && it.value() != 0.0) sets.unite(static_cast<int>(it.row()), static_cast<int>(it.col()));
  const Partition comps = partition_from(sets, static_cast<std::size_t>(n));

  std::vector<int> pin_of(static_cast<std::size_t>(n), -1);
  std::vector<int> comp_pinned(comps.size(), 0);
  for (std::size_t i = 0; i < pins.size(); ++i) {
    const auto v = pins[i].node;
    if (v < 0 || v >= n) throw Error(ErrorCode::InvalidArgument, "pin node out of range");
    pin_of[static_cast<std::size_t>(v)] = static_cast<int>(i);
    ++comp_pinned[static_cast<std::size_t>(comps.block_of[static_cast<std::size_t>(v)])];
  }
  for (std::size_t c = 0; c < comps.size(); ++c) {
    if (comp_pinned[c] == 0)
      throw Error(ErrorCode::SingularSystem, "component containing node " + std::to_string(comps.blocks[c].front()) +
                                                 " has no pinned angle");
    double sum = 0.0, scale = 0.0;
    for (NodeId v : comps.blocks[c]) {
      sum += injections[v];
      scale += std::abs(injections[v]);
    }
    if (std::abs(sum) > 1e-9 * std::max(1.0, scale))
      throw Error(ErrorCode::UnbalancedComponent, "component containing node " +
                                                      std::to_string(comps.blocks[c].front()) +
                                                      " has injection sum " + std::to_string(sum));
  }

  // Free nodes get consecutive indices in the reduced system.
  std::vector<Eigen::Index> reduced(static_cast<std::size_t>(n), -1);
  Eigen::Index m = 0;
  for (Eigen::Index v = 0; v < n; ++v)
    if (pin_of[static_cast<std::size_t>(v)] < 0) reduced[static_cast<std::size_t>(v)] = m++;

  Vector theta = Vector::Zero(n);
  for (const auto& pin : pins) theta[pin.node] = pin.angle;
  if (m == 0) return theta;

  Vector rhs(m);
  for (Eigen::Index v = 0; v < n; ++v)
    if (reduced[static_cast<std::size_t>(v)] >= 0) rhs[reduced[static_cast<std::size_t>(v)]] = injections[v];

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(admittance.nonZeros()));
  for (Eigen::Index col = 0; col < admittance.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(admittance, col); it; ++it) {
      const auto r = reduced[static_cast<std::size_t>(it.row())];
      const auto c = reduced[static_cast<std::size_t>(it.col())];
      if (r < 0) continue;
      if (c >= 0)
        triplets.emplace_back(r, c, it.value());
      else
        rhs[r] -= it.value() * theta[it.col()];
    }
  }
  SparseMatrix reduced_b(m, m);
  reduced_b.setFromTriplets(triplets.begin(), triplets.end());

  Eigen::SimplicialLDLT<SparseMatrix> ldlt(reduced_b);
  if (ldlt.info() != Eigen::Success) throw Error(ErrorCode::SingularSystem, "factorization failed");
  const Vector diag = ldlt.vectorD();
  const double dmax = diag.cwiseAbs().maxCoeff();
  if (diag.cwiseAbs().minCoeff() <= 1e-12 * std::max(1.0, dmax))
    throw Error(ErrorCode::SingularSystem, "pivot below singularity threshold");

  Vector x = ldlt.solve(rhs);
  // One step of iterative refinement keeps the residual near round-off on
  // grids with widely spread reactances.
  const Vector correction = ldlt.solve(rhs - reduced_b * x);
  x += correction;

  for (Eigen::Index v = 0; v < n; ++v)
    if (reduced[static_cast<std::size_t>(v)] >= 0) theta[v] = x[reduced[static_cast<std::size_t>(v)]];
  return theta;
}

Partition islands(const Grid& grid, std::span<const LinkId> removed) {
  const auto mask = link_mask(grid, removed);
  DisjointSets sets(grid.num_nodes());
  for (std::size_t e = 0; e < grid.num_links(); ++e) {
    if (mask[e]) continue;
    const auto& l = grid.link(static_cast<LinkId>(e));
    sets.unite(l.from, l.to);
  }
  return partition_from(sets, grid.num_nodes());
}

SparseMatrix flow_matrix(const Grid& grid, const Vector& theta_post) {
  if (static_cast<std::size_t>(theta_post.size()) != grid.num_nodes())
    throw Error(ErrorCode::InvalidArgument, "flow_matrix: theta has wrong length");
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(2 * grid.num_links());
  for (std::size_t e = 0; e < grid.num_links(); ++e) {
    const auto& l = grid.link(static_cast<LinkId>(e));
    const double f = (theta_post[l.from] - theta_post[l.to]) / l.reactance;
    triplets.emplace_back(l.from, static_cast<int>(e), f);
    triplets.emplace_back(l.to, static_cast<int>(e), -f);
  }
  SparseMatrix dt(static_cast<Eigen::Index>(grid.num_nodes()), static_cast<Eigen::Index>(grid.num_links()));
  dt.setFromTriplets(triplets.begin(), triplets.end());
  return dt;
}

Vector link_flows(const Grid& grid, const Vector& theta, const std::vector<bool>& removed) {
  Vector flows(static_cast<Eigen::Index>(grid.num_links()));
  for (std::size_t e = 0; e < grid.num_links(); ++e) {
    const auto& l = grid.link(static_cast<LinkId>(e));
    flows[static_cast<Eigen::Index>(e)] =
        (!removed.empty() && removed[e]) ? 0.0 : (theta[l.from] - theta[l.to]) / l.reactance;
  }
  return flows;
}

SteadyState pre_attack_state(const Grid& grid) {
  const Pin pin{grid.reference(), 0.0};
  SteadyState s;
  s.theta = dc_power_flow(build_admittance(grid), grid.injection_vector(), std::span<const Pin>(&pin, 1));
  s.flows = link_flows(grid, s.theta);
  s.islands = islands(grid);
  return s;
}

std::vector<bool> link_mask(const Grid& grid, std::span<const LinkId> links) {
  std::vector<bool> mask(grid.num_links(), false);
  for (LinkId e : links) {
    if (e < 0 || static_cast<std::size_t>(e) >= grid.num_links())
      throw Error(ErrorCode::InvalidArgument, "link id " + std::to_string(e) + " out of range");
    mask[static_cast<std::size_t>(e)] = true;
  }
  return mask;
}

double conservation_residual(const Grid& grid, const Vector& flows, const Vector& injections) {
  Vector net = -injections;
  for (std::size_t e = 0; e < grid.num_links(); ++e) {
    const auto& l = grid.link(static_cast<LinkId>(e));
    net[l.from] += flows[static_cast<Eigen::Index>(e)];
    net[l.to] -= flows[static_cast<Eigen::Index>(e)];
  }
  return net.size() == 0 ? 0.0 : net.cwiseAbs().maxCoeff();
}

}  // namespace cpagrid
