#include "cpagrid/recovery.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <Eigen/SVD>

#include "cpagrid/lp.hpp"

namespace cpagrid {

namespace {

constexpr double kSupportTol = 1e-6;
constexpr double kRangeTol = 1e-7;
constexpr double kBoxTol = 1e-7;

int index_in(const std::vector<int>& sorted, int id) {
  const auto it = std::lower_bound(sorted.begin(), sorted.end(), id);
  return (it != sorted.end() && *it == id) ? static_cast<int>(it - sorted.begin()) : -1;
}

// Rows of B_{Hbar|H}: outside nodes adjacent to the area, sorted.
std::vector<NodeId> boundary_nodes(const Observation& obs) {
  std::vector<NodeId> out;
  for (NodeId v : obs.attacked_nodes)
    for (const auto& nb : obs.grid->neighbors(v))
      if (!obs.is_attacked(nb.node)) out.push_back(nb.node);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Matrix boundary_block(const Observation& obs, const std::vector<NodeId>& rows) {
  Matrix b = Matrix::Zero(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(obs.attacked_nodes.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (const auto& nb : obs.grid->neighbors(rows[i])) {
      const int j = index_in(obs.attacked_nodes, nb.node);
      if (j >= 0) b(static_cast<Eigen::Index>(i), j) = -1.0 / obs.grid->link(nb.link).reactance;
    }
  return b;
}

int numerical_rank(const Eigen::JacobiSVD<Matrix>& svd) {
  const Vector& s = svd.singularValues();
  if (s.size() == 0 || s[0] == 0.0) return 0;
  int rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s[i] > 1e-9 * s[0]) ++rank;
  return rank;
}

void require_inside_angles(const Observation& obs, const Vector& theta_inside) {
  if (static_cast<std::size_t>(theta_inside.size()) != obs.attacked_nodes.size())
    throw Error(ErrorCode::InvalidArgument, "inside angle vector has the wrong length");
}

bool is_generator(double p) { return p > 0.0; }

}  // namespace

int AreaSystem::local_node(NodeId v) const { return index_in(nodes, v); }
int AreaSystem::local_link(LinkId e) const { return index_in(links, e); }

AreaSystem area_system(const Grid& grid, std::span<const NodeId> nodes, std::span<const LinkId> links,
                       const Vector& theta_pre, const Vector& theta_post) {
  AreaSystem a;
  a.nodes.assign(nodes.begin(), nodes.end());
  a.links.assign(links.begin(), links.end());
  const auto k = static_cast<Eigen::Index>(a.nodes.size());
  const auto m = static_cast<Eigen::Index>(a.links.size());
  a.incidence = Matrix::Zero(k, m);
  a.flows = Matrix::Zero(k, m);
  a.drift = Vector::Zero(k);
  a.injections = Vector(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const NodeId v = a.nodes[static_cast<std::size_t>(i)];
    a.injections[i] = grid.injection(v);
    double drift = 0.0;
    for (const auto& nb : grid.neighbors(v))
      drift += ((theta_pre[v] - theta_post[v]) - (theta_pre[nb.node] - theta_post[nb.node])) / grid.link(nb.link).reactance;
    a.drift[i] = drift;
  }
  for (Eigen::Index j = 0; j < m; ++j) {
    const auto& l = grid.link(a.links[static_cast<std::size_t>(j)]);
    const int s = a.local_node(l.from), t = a.local_node(l.to);
    if (s < 0 || t < 0) throw Error(ErrorCode::InvalidArgument, "area link leaves the area");
    const double f = (theta_post[l.from] - theta_post[l.to]) / l.reactance;
    a.incidence(s, j) = 1.0;
    a.incidence(t, j) = -1.0;
    a.flows(s, j) = f;
    a.flows(t, j) = -f;
  }
  return a;
}

AreaSystem area_system(const Observation& obs, const Vector& theta_post_inside) {
  require_inside_angles(obs, theta_post_inside);
  return area_system(*obs.grid, obs.attacked_nodes, obs.attacked_links, obs.theta_pre,
                     obs.assemble_theta_post(theta_post_inside));
}

bool is_acyclic(const Grid& grid, std::span<const LinkId> links) {
  std::vector<NodeId> parent(grid.num_nodes());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](NodeId x) {
    while (parent[static_cast<std::size_t>(x)] != x) x = parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
    return x;
  };
  for (LinkId e : links) {
    const auto& l = grid.link(e);
    const NodeId a = find(l.from), b = find(l.to);
    if (a == b) return false;
    parent[static_cast<std::size_t>(a)] = b;
  }
  return true;
}

bool rank_condition(const Observation& obs) {
  const auto rows = boundary_nodes(obs);
  const Matrix b = boundary_block(obs, rows);
  if (b.rows() < b.cols()) return false;
  const Eigen::JacobiSVD<Matrix> svd(b);
  return numerical_rank(svd) == static_cast<int>(obs.attacked_nodes.size());
}

PhaseRecovery recover_phase_angles(const Observation& obs) {
  PhaseRecovery out;
  const auto rows = boundary_nodes(obs);
  const Matrix b = boundary_block(obs, rows);
  const Eigen::JacobiSVD<Matrix> svd(b, Eigen::ComputeThinU | Eigen::ComputeThinV);
  out.rank = numerical_rank(svd);
  out.rank_ok = out.rank == static_cast<int>(obs.attacked_nodes.size());
  if (obs.pmu_mode && obs.theta_post_inside) {
    out.theta_inside = *obs.theta_post_inside;
    return out;
  }
  if (!out.rank_ok) return out;

  // Outside rows of B(theta - theta') = delta, with theta'_H moved to the left.
  Vector rhs(b.rows());
  const Grid& g = *obs.grid;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const NodeId u = rows[i];
    double value = -obs.delta_outside[u];
    for (const auto& nb : g.neighbors(u)) {
      const double w = 1.0 / g.link(nb.link).reactance;
      value += w * (obs.theta_pre[u] - obs.theta_post_outside[u]);
      if (obs.is_attacked(nb.node))
        value -= w * obs.theta_pre[nb.node];
      else
        value -= w * (obs.theta_pre[nb.node] - obs.theta_post_outside[nb.node]);
    }
    rhs[static_cast<Eigen::Index>(i)] = value;
  }
  const Vector theta = svd.solve(rhs);
  out.residual = (b * theta - rhs).cwiseAbs().maxCoeff();
  out.theta_inside = theta;
  return out;
}

std::optional<Vector> post_angles_inside(const Observation& obs) {
  if (obs.pmu_mode && obs.theta_post_inside) return *obs.theta_post_inside;
  auto rec = recover_phase_angles(obs);
  if (rec.rank_ok) return rec.theta_inside;
  return std::nullopt;
}

std::vector<std::optional<double>> recover_delta_boundary(const Observation& obs) {
  const Grid& g = *obs.grid;
  std::vector<std::optional<double>> out(obs.attacked_nodes.size());
  for (std::size_t i = 0; i < obs.attacked_nodes.size(); ++i) {
    const NodeId v = obs.attacked_nodes[i];
    const double pv = g.injection(v);
    if (pv == 0.0) {
      out[i] = 0.0;
      continue;
    }
    bool other_side_reduced = false;
    for (const auto& nb : g.neighbors(v)) {
      if (obs.is_attacked(nb.node)) continue;
      const double pu = g.injection(nb.node);
      const double du = obs.delta_outside[nb.node];
      if (is_generator(pu) == is_generator(pv)) {
        if (pu != 0.0) {
          out[i] = pv * du / pu;
          break;
        }
      } else if (std::abs(du) > 1e-10) {
        other_side_reduced = true;
      }
    }
    if (!out[i] && other_side_reduced) out[i] = 0.0;
  }

  bool all_gen = true, all_load = true;
  for (NodeId v : obs.attacked_nodes) {
    const double p = g.injection(v);
    if (p > 0.0) all_load = false;
    if (p < 0.0) all_gen = false;
  }
  if (all_gen || all_load) {
    double outside = 0.0;
    for (Eigen::Index v = 0; v < obs.delta_outside.size(); ++v)
      if (!obs.is_attacked(static_cast<NodeId>(v))) outside += obs.delta_outside[v];
    if (std::abs(outside) <= 1e-9)
      for (auto& d : out) d = 0.0;
  }
  return out;
}

std::vector<LinkId> round_indicator(std::span<const LinkId> links, const Vector& x, double eta) {
  std::vector<LinkId> out;
  for (std::size_t j = 0; j < links.size(); ++j)
    if (x[static_cast<Eigen::Index>(j)] >= eta) out.push_back(links[j]);
  std::sort(out.begin(), out.end());
  return out;
}

LocalizationResult localize_known_delta(const Observation& obs, const Vector& delta_inside,
                                        const Vector& theta_post_inside) {
  const AreaSystem a = area_system(obs, theta_post_inside);
  if (delta_inside.size() != a.drift.size())
    throw Error(ErrorCode::InvalidArgument, "delta vector has the wrong length");
  const Vector rhs = a.drift - delta_inside;
  const auto m = static_cast<Eigen::Index>(a.links.size());

  LocalizationResult out;
  out.links = a.links;
  out.eta = 0.0;
  if (m == 0) {
    out.x = Vector(0);
  } else if (is_acyclic(*obs.grid, a.links)) {
    out.x = a.incidence.colPivHouseholderQr().solve(rhs);
  } else {
    LpProblem lp = LpProblem::with_variables(2 * m);
    lp.c.setOnes();
    lp.a_eq.resize(a.incidence.rows(), 2 * m);
    lp.a_eq << a.incidence, -a.incidence;
    lp.b_eq = rhs;
    const LpOutcome res = solve(lp);
    if (res.status != LpStatus::Optimal)
      throw Error(ErrorCode::InfeasibleSystem, "no x satisfies the flow equations");
    out.x = res.x.head(m) - res.x.tail(m);
    out.iterations = res.iterations;
  }
  const double residual = rhs.size() == 0 ? 0.0 : (a.incidence * out.x - rhs).cwiseAbs().maxCoeff();
  if (residual > kRangeTol)
    throw Error(ErrorCode::InfeasibleSystem, "flow equations have residual " + std::to_string(residual));
  for (Eigen::Index j = 0; j < m; ++j)
    if (std::abs(out.x[j]) > kSupportTol) out.detected.push_back(a.links[static_cast<std::size_t>(j)]);
  out.objective = out.x.cwiseAbs().sum();
  return out;
}

LocalizationResult algorithm1(const Observation& obs, const Vector& theta_post_inside, double eta) {
  if (!(eta > 0.0 && eta < 1.0)) throw Error(ErrorCode::InvalidArgument, "eta must lie in (0, 1)");
  const AreaSystem a = area_system(obs, theta_post_inside);
  const auto k = static_cast<Eigen::Index>(a.nodes.size());
  const auto m = static_cast<Eigen::Index>(a.links.size());

  // delta = drift + D~ x must lie in [0, p] at generators and [p, 0] at loads.
  LpProblem lp = LpProblem::with_variables(m);
  lp.c.setOnes();
  lp.upper.setOnes();
  lp.a_le.resize(2 * k, m);
  lp.b_le.resize(2 * k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const double p = a.injections[i];
    const double lo = is_generator(p) ? 0.0 : p;
    const double hi = is_generator(p) ? p : 0.0;
    lp.a_le.row(2 * i) = a.flows.row(i);
    lp.b_le[2 * i] = hi - a.drift[i];
    lp.a_le.row(2 * i + 1) = -a.flows.row(i);
    lp.b_le[2 * i + 1] = a.drift[i] - lo;
  }
  const LpOutcome res = solve(lp);
  if (res.status != LpStatus::Optimal)
    throw Error(ErrorCode::InfeasibleP1, std::string("relaxation is ") + std::string(to_string(res.status)));

  LocalizationResult out;
  out.links = a.links;
  out.x = res.x;
  out.eta = eta;
  out.detected = round_indicator(a.links, out.x, eta);
  out.delta_hat = a.drift + a.flows * out.x;
  out.objective = res.objective;
  out.iterations = res.iterations;
  return out;
}

std::vector<LinkId> P0Solutions::to_links(std::uint32_t mask) const {
  std::vector<LinkId> out;
  for (std::size_t j = 0; j < links.size(); ++j)
    if (mask & (1u << j)) out.push_back(links[j]);
  return out;
}

P0Solutions brute_force_p0(const Observation& obs, const Vector& theta_post_inside) {
  if (obs.attacked_links.size() > kP0MaxLinks)
    throw Error(ErrorCode::TooLarge, std::to_string(obs.attacked_links.size()) + " links exceed the enumeration limit of " +
                                         std::to_string(kP0MaxLinks));
  const AreaSystem a = area_system(obs, theta_post_inside);
  const auto k = a.drift.size();
  const auto m = static_cast<int>(a.links.size());
  Vector lo(k), hi(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const double p = a.injections[i];
    const double tol = kBoxTol * std::max(1.0, std::abs(p));
    lo[i] = (is_generator(p) ? 0.0 : p) - tol;
    hi[i] = (is_generator(p) ? p : 0.0) + tol;
  }

  P0Solutions out;
  out.links = a.links;
  // Gray-code walk: each step toggles one link; delta is refreshed from
  // scratch periodically to bound round-off drift.
  const std::uint64_t count = std::uint64_t{1} << m;
  std::uint32_t mask = 0;
  Vector delta = a.drift;
  for (std::uint64_t step = 0; step < count; ++step) {
    if (step > 0) {
      const int j = std::countr_zero(step);
      mask ^= (1u << j);
      if ((step & 4095u) == 0) {
        delta = a.drift;
        for (int i = 0; i < m; ++i)
          if (mask & (1u << i)) delta += a.flows.col(i);
      } else if (mask & (1u << j)) {
        delta += a.flows.col(j);
      } else {
        delta -= a.flows.col(j);
      }
    }
    if ((delta.array() >= lo.array()).all() && (delta.array() <= hi.array()).all()) out.feasible.push_back(mask);
  }
  std::sort(out.feasible.begin(), out.feasible.end());
  for (auto f : out.feasible) {
    const int size = std::popcount(f);
    if (out.optimum_size < 0 || size < out.optimum_size) {
      out.optimum_size = size;
      out.optima.clear();
    }
    if (size == out.optimum_size) out.optima.push_back(f);
  }
  return out;
}

LocalizationResult solve_bpdn(const Matrix& a, const Vector& y, double radius, const BpdnOptions& options) {
  const auto n = a.cols();
  LocalizationResult out;
  out.eta = 0.0;
  if (y.norm() <= radius || n == 0) {
    out.x = Vector::Zero(n);
    out.converged = y.norm() <= radius;
    return out;
  }
  const double rho = options.rho;
  const Eigen::LLT<Matrix> system(Matrix::Identity(n, n) + a.transpose() * a);
  Vector x = Vector::Zero(n), z = Vector::Zero(n), u1 = Vector::Zero(n);
  Vector w = Vector::Zero(a.rows()), u2 = Vector::Zero(a.rows());
  const double threshold = 1.0 / rho;
  out.converged = false;
  int it = 0;
  for (; it < options.max_iterations; ++it) {
    x = system.solve(z - u1 + a.transpose() * (w - u2));
    const Vector ax = a * x;
    const Vector z_old = z, w_old = w;
    const Vector v = x + u1;
    z = v.array().sign() * (v.array().abs() - threshold).max(0.0);
    const Vector shifted = ax + u2 - y;
    const double dist = shifted.norm();
    w = y + (dist > radius ? (radius / dist) * shifted : shifted);
    u1 += x - z;
    u2 += ax - w;
    const double primal = std::sqrt((x - z).squaredNorm() + (ax - w).squaredNorm());
    const double dual = rho * ((z - z_old) + a.transpose() * (w - w_old)).norm();
    if (primal <= options.tolerance && dual <= options.tolerance) {
      out.converged = true;
      ++it;
      break;
    }
  }
  out.x = z;
  out.iterations = it;
  out.objective = z.cwiseAbs().sum();
  return out;
}

LocalizationResult benchmark_bpdn(const Observation& obs, const Vector& theta_post_inside) {
  const AreaSystem a = area_system(obs, theta_post_inside);
  LocalizationResult out = solve_bpdn(a.incidence, a.drift, a.injections.norm());
  out.links = a.links;
  for (std::size_t j = 0; j < a.links.size(); ++j)
    if (std::abs(out.x[static_cast<Eigen::Index>(j)]) > kSupportTol) out.detected.push_back(a.links[j]);
  return out;
}

bool delta_zero_feasible(const Observation& obs, const Vector& theta_post_inside) {
  const AreaSystem a = area_system(obs, theta_post_inside);
  if (a.links.empty()) return a.drift.cwiseAbs().maxCoeff() <= kRangeTol;
  const Vector x = a.incidence.completeOrthogonalDecomposition().solve(a.drift);
  return (a.incidence * x - a.drift).cwiseAbs().maxCoeff() <= kRangeTol;
}

}  // namespace cpagrid
