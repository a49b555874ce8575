#pragma once

#include <limits>

#include "cpagrid/grid.hpp"

namespace cpagrid {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// min cᵀx  s.t.  A_eq x = b_eq,  A_le x <= b_le,  lower <= x <= upper.
struct LpProblem {
  Vector c;
  Matrix a_eq;
  Vector b_eq;
  Matrix a_le;
  Vector b_le;
  Vector lower;
  Vector upper;

  /// `n` variables with bounds [0, +inf), zero cost and no rows.
  static LpProblem with_variables(Eigen::Index n);

  Eigen::Index num_variables() const { return c.size(); }
  void add_equality(const Vector& row, double rhs);
  void add_inequality(const Vector& row, double rhs);
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

std::string_view to_string(LpStatus status);

struct LpOutcome {
  LpStatus status = LpStatus::Infeasible;
  Vector x;
  double objective = 0.0;
  /// Largest violation of any row or bound at `x`.
  double max_residual = 0.0;
  int iterations = 0;
};

/// Bounded primal simplex (two phases) on a row- and column-scaled copy.
/// Deterministic: equal inputs give bit-identical outcomes. Throws
/// NumericalBreakdown on a vanishing pivot that survives refactorization or
/// when the iteration limit is hit.
LpOutcome solve(const LpProblem& problem);

struct Alternative {
  bool exists = false;
  Vector z;
  /// gᵀz at the normalized optimum (1ᵀz <= 1).
  double value = 0.0;
};

/// Decides whether some z >= 0 has A z = 0 and gᵀz < 0 (margin 1e-8).
Alternative alternative_feasible(const Matrix& a, const Vector& g);

}  // namespace cpagrid
