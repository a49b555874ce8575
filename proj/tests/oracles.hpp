#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <tuple>
#include <vector>

#include "cpagrid/lp.hpp"
#include "cpagrid/recovery.hpp"
#include "fixtures.hpp"

namespace oracles {

using namespace cpagrid;

// Brute force over all vertices of a box-bounded LP: every choice of active
// constraints that, together with the equalities, pins down a point.
inline std::optional<double> vertex_oracle(const LpProblem& p) {
  const auto n = p.num_variables();
  std::vector<Vector> rows;
  std::vector<double> rhs;
  for (Eigen::Index i = 0; i < p.a_le.rows(); ++i) {
    rows.push_back(p.a_le.row(i).transpose());
    rhs.push_back(p.b_le[i]);
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    Vector e = Vector::Zero(n);
    e[j] = 1.0;
    rows.push_back(e);
    rhs.push_back(p.upper[j]);
    rows.push_back(e);
    rhs.push_back(p.lower[j]);
  }
  const auto me = p.a_eq.rows();
  const auto need = n - me;
  std::optional<double> best;
  std::vector<int> pick(static_cast<std::size_t>(need));
  std::function<void(int, int)> rec = [&](int start, int depth) {
    if (depth == need) {
      Matrix m(n, n);
      Vector b(n);
      m.topRows(me) = p.a_eq;
      b.head(me) = p.b_eq;
      for (int k = 0; k < need; ++k) {
        m.row(me + k) = rows[static_cast<std::size_t>(pick[static_cast<std::size_t>(k)])].transpose();
        b[me + k] = rhs[static_cast<std::size_t>(pick[static_cast<std::size_t>(k)])];
      }
      Eigen::FullPivLU<Matrix> lu(m);
      if (lu.rank() < n) return;
      const Vector x = lu.solve(b);
      for (Eigen::Index j = 0; j < n; ++j)
        if (x[j] < p.lower[j] - 1e-9 || x[j] > p.upper[j] + 1e-9) return;
      if (p.a_le.rows() > 0 && (p.a_le * x - p.b_le).maxCoeff() > 1e-9) return;
      if (me > 0 && (p.a_eq * x - p.b_eq).cwiseAbs().maxCoeff() > 1e-9) return;
      const double obj = p.c.dot(x);
      if (!best || obj < *best) best = obj;
      return;
    }
    for (int i = start; i < static_cast<int>(rows.size()); ++i) {
      pick[static_cast<std::size_t>(depth)] = i;
      rec(i + 1, depth + 1);
    }
  };
  rec(0, 0);
  return best;
}

inline double integer_in(Rng& rng, int lo, int hi) {
  return static_cast<double>(lo + static_cast<int>(rng.uniform_index(static_cast<std::size_t>(hi - lo + 1))));
}

inline LpProblem random_lp(Rng& rng) {
  const auto n = static_cast<Eigen::Index>(2 + rng.uniform_index(7));
  LpProblem p = LpProblem::with_variables(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    p.c[j] = integer_in(rng, -9, 9);
    p.lower[j] = integer_in(rng, -3, 0);
    p.upper[j] = p.lower[j] + integer_in(rng, 1, 6);
  }
  const auto rows = 1 + rng.uniform_index(4);
  for (std::size_t i = 0; i < rows; ++i) {
    Vector row(n);
    for (Eigen::Index j = 0; j < n; ++j) row[j] = integer_in(rng, -5, 5);
    p.add_inequality(row, integer_in(rng, -4, 12));
  }
  if (rng.uniform_index(3) == 0) {
    Vector row(n);
    for (Eigen::Index j = 0; j < n; ++j) row[j] = integer_in(rng, -3, 3);
    p.add_equality(row, integer_in(rng, -2, 2));
  }
  return p;
}

inline Observation bare_observation(std::shared_ptr<const Grid> grid, std::vector<NodeId> nodes) {
  const auto nan = std::numeric_limits<double>::quiet_NaN();
  Observation obs;
  obs.grid = grid;
  obs.theta_pre = pre_attack_state(*grid).theta;
  obs.attacked_nodes = nodes;
  obs.attacked_links = induced_links(*grid, nodes);
  obs.delta_outside = Vector::Zero(static_cast<Eigen::Index>(grid->num_nodes()));
  obs.theta_post_outside = obs.theta_pre;
  for (NodeId v : nodes) obs.delta_outside[v] = obs.theta_post_outside[v] = nan;
  return obs;
}

// Star gadget: hub u0 (p = 0) with leaves u_i (p = -f_i) inside H, and one
// outside node v.
inline P0Solutions subset_sum_gadget(const std::vector<double>& f, double target) {
  const int n = static_cast<int>(f.size());
  std::vector<double> p(static_cast<std::size_t>(n + 2), 0.0);
  std::vector<std::tuple<int, int, double>> edges;
  double sum = 0.0;
  for (int i = 1; i <= n; ++i) {
    p[static_cast<std::size_t>(i)] = -f[static_cast<std::size_t>(i - 1)];
    sum += f[static_cast<std::size_t>(i - 1)];
    edges.emplace_back(0, i, 1.0);
  }
  p[static_cast<std::size_t>(n + 1)] = sum;
  edges.emplace_back(0, n + 1, 1.0);
  auto grid = fixtures::make_grid(p, edges, n + 1);
  std::vector<NodeId> nodes;
  for (int i = 0; i <= n; ++i) nodes.push_back(i);
  Observation obs = bare_observation(grid, nodes);
  obs.theta_post_outside[n + 1] = sum - target;
  Vector inside(n + 1);
  inside[0] = 0.0;
  for (int i = 1; i <= n; ++i) inside[i] = -f[static_cast<std::size_t>(i - 1)];
  return brute_force_p0(obs, inside);
}

// Connected post-attack grid with an acyclic all-load attacked area.
inline std::optional<fixtures::Case> all_load_case(Rng& rng) {
  const auto topology = fixtures::random_connected(12, 7, rng);
  const auto nodes = sample_attack_area(*topology, 3 + rng.uniform_index(4), rng);
  const auto links = induced_links(*topology, nodes);
  if (links.empty() || !fixtures::forest(*topology, links)) return std::nullopt;
  auto grid = fixtures::with_area_loads(*topology, nodes, rng);
  const auto failed = sample_failures(links, 1 + rng.uniform_index(std::min<std::size_t>(3, links.size())), rng);
  auto s = apply_attack(grid, nodes, failed, 1);
  if (s.degenerate_flow || s.post.islands.size() != 1) return std::nullopt;
  return fixtures::observe(s);
}

}  // namespace oracles
