#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cpagrid/attack.hpp"
#include "cpagrid/grid.hpp"

namespace cpagrid {

/// Local linear system of the attacked area H for a given post-attack angle
/// vector. Rows follow `nodes`, columns follow `links`.
struct AreaSystem {
  std::vector<NodeId> nodes;
  std::vector<LinkId> links;
  /// D_H: incidence restricted to V_H x E_H.
  Matrix incidence;
  /// D~_H: hypothetical post-attack flows restricted to V_H x E_H.
  Matrix flows;
  /// B_{H|G} (theta - theta').
  Vector drift;
  /// Pre-attack injections p_H.
  Vector injections;

  int local_node(NodeId v) const;
  int local_link(LinkId e) const;
};

AreaSystem area_system(const Grid& grid, std::span<const NodeId> nodes, std::span<const LinkId> links,
                       const Vector& theta_pre, const Vector& theta_post);
AreaSystem area_system(const Observation& obs, const Vector& theta_post_inside);

/// True iff the links form a forest.
bool is_acyclic(const Grid& grid, std::span<const LinkId> links);

struct PhaseRecovery {
  bool rank_ok = false;
  int rank = 0;
  /// Post-attack angles of V_H in `attacked_nodes` order.
  std::optional<Vector> theta_inside;
  double residual = 0.0;
};

/// Full column rank of B_{Hbar|H} (singular values above 1e-9 sigma_max).
bool rank_condition(const Observation& obs);

/// Least-squares solve of the boundary equations for theta'_H. In PMU mode
/// the measured angles are returned unchanged.
PhaseRecovery recover_phase_angles(const Observation& obs);

/// theta'_H from PMUs when present, otherwise recovered when the rank
/// condition holds.
std::optional<Vector> post_angles_inside(const Observation& obs);

/// Per-node estimate of delta_H (attacked_nodes order); nullopt is Unknown.
std::vector<std::optional<double>> recover_delta_boundary(const Observation& obs);

struct LocalizationResult {
  /// E_H, the index set of `x`.
  std::vector<LinkId> links;
  /// Fractional indicator (P1), or the recovered x of the linear model.
  Vector x;
  /// Detected failures F^, sorted.
  std::vector<LinkId> detected;
  double eta = 0.5;
  /// Recovered delta_H (P1 only; empty otherwise).
  Vector delta_hat;
  double objective = 0.0;
  int iterations = 0;
  bool converged = true;
};

/// {e : x_e >= eta}, sorted.
std::vector<LinkId> round_indicator(std::span<const LinkId> links, const Vector& x, double eta);

/// Solves D_H x = B_{H|G}(theta - theta') - delta_H exactly on acyclic H and by
/// l1 minimization otherwise; F^ = {|x_e| > 1e-6}. Throws InfeasibleSystem
/// when the residual exceeds 1e-7.
LocalizationResult localize_known_delta(const Observation& obs, const Vector& delta_inside,
                                        const Vector& theta_post_inside);

/// LP relaxation over x in [0,1]^{E_H} with delta_H eliminated, rounded at
/// eta. Throws InfeasibleP1.
LocalizationResult algorithm1(const Observation& obs, const Vector& theta_post_inside, double eta = 0.5);

/// Binary vectors over E_H encoded as bit masks (bit i = links[i]).
struct P0Solutions {
  std::vector<LinkId> links;
  std::vector<std::uint32_t> feasible;
  std::vector<std::uint32_t> optima;
  int optimum_size = -1;

  std::vector<LinkId> to_links(std::uint32_t mask) const;
};

inline constexpr std::size_t kP0MaxLinks = 24;

/// Enumerates every x in {0,1}^{E_H}; delta_H follows from x and must meet
/// the sign boxes. Throws TooLarge above kP0MaxLinks links.
P0Solutions brute_force_p0(const Observation& obs, const Vector& theta_post_inside);

/// Basis pursuit denoising  min |x|_1  s.t.  |B_{H|G}(theta - theta') - D_H x|_2 <= |p_H|_2
/// by ADMM (rho = 1, at most 2000 iterations, tolerance 1e-6).
LocalizationResult benchmark_bpdn(const Observation& obs, const Vector& theta_post_inside);

struct BpdnOptions {
  double rho = 1.0;
  int max_iterations = 2000;
  double tolerance = 1e-6;
};

/// The same program on explicit data.
LocalizationResult solve_bpdn(const Matrix& a, const Vector& y, double radius, const BpdnOptions& options = {});

/// Whether D_H x = B_{H|G}(theta - theta') has a solution (residual <= 1e-7).
bool delta_zero_feasible(const Observation& obs, const Vector& theta_post_inside);

}  // namespace cpagrid
