#include "cpagrid/lp.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/LU>

namespace cpagrid {

LpProblem LpProblem::with_variables(Eigen::Index n) {
  LpProblem p;
  p.c = Vector::Zero(n);
  p.a_eq.resize(0, n);
  p.b_eq.resize(0);
  p.a_le.resize(0, n);
  p.b_le.resize(0);
  p.lower = Vector::Zero(n);
  p.upper = Vector::Constant(n, kInfinity);
  return p;
}

namespace {

void append_row(Matrix& a, Vector& b, const Vector& row, double rhs) {
  if (row.size() != a.cols()) throw Error(ErrorCode::InvalidArgument, "LP row has the wrong length");
  a.conservativeResize(a.rows() + 1, Eigen::NoChange);
  a.row(a.rows() - 1) = row.transpose();
  b.conservativeResize(b.size() + 1);
  b[b.size() - 1] = rhs;
}

}  // namespace

void LpProblem::add_equality(const Vector& row, double rhs) { append_row(a_eq, b_eq, row, rhs); }
void LpProblem::add_inequality(const Vector& row, double rhs) { append_row(a_le, b_le, row, rhs); }

std::string_view to_string(LpStatus status) {
  switch (status) {
    case LpStatus::Optimal: return "Optimal";
    case LpStatus::Infeasible: return "Infeasible";
    case LpStatus::Unbounded: return "Unbounded";
  }
  return "Unknown";
}

namespace {

constexpr double kPivotTol = 1e-9;
constexpr double kSingularTol = 1e-12;
constexpr double kCostTol = 1e-9;
constexpr double kPhaseOneTol = 1e-8;
constexpr int kRefactorEvery = 100;
constexpr int kDegenerateRunToBland = 50;

enum class State : unsigned char { Basic, AtLower, AtUpper, Free };

// Bounded revised simplex on  A x = b, lo <= x <= up  with an explicit
// basis inverse kept current by eta updates.
class Simplex {
 public:
  Simplex(Matrix a, Vector b, Vector lo, Vector up)
      : a_(std::move(a)), b_(std::move(b)), lo_(std::move(lo)), up_(std::move(up)) {
    m_ = a_.rows();
    n_ = a_.cols();
    state_.assign(static_cast<std::size_t>(n_), State::AtLower);
    x_ = Vector::Zero(n_);
    limit_ = 20000 + 50 * static_cast<int>(m_ + n_);
  }

  Matrix& matrix() { return a_; }
  Vector& lower() { return lo_; }
  Vector& upper() { return up_; }
  Vector& values() { return x_; }
  std::vector<State>& states() { return state_; }
  std::vector<Eigen::Index>& basis() { return head_; }
  int iterations() const { return iterations_; }

  void set_nonbasic_at_bound(Eigen::Index j) {
    if (std::isfinite(lo_[j])) {
      state_[static_cast<std::size_t>(j)] = State::AtLower;
      x_[j] = lo_[j];
    } else if (std::isfinite(up_[j])) {
      state_[static_cast<std::size_t>(j)] = State::AtUpper;
      x_[j] = up_[j];
    } else {
      state_[static_cast<std::size_t>(j)] = State::Free;
      x_[j] = 0.0;
    }
  }

  void refactor() {
    Matrix basis_matrix(m_, m_);
    for (Eigen::Index i = 0; i < m_; ++i) basis_matrix.col(i) = a_.col(head_[static_cast<std::size_t>(i)]);
    if (m_ > 0) {
      Eigen::PartialPivLU<Matrix> lu(basis_matrix);
      const Vector diag = lu.matrixLU().diagonal().cwiseAbs();
      if (diag.minCoeff() < kSingularTol * std::max(1.0, diag.maxCoeff()))
        throw Error(ErrorCode::NumericalBreakdown, "basis matrix is numerically singular");
      binv_ = lu.inverse();
    } else {
      binv_.resize(0, 0);
    }
    Vector rhs = b_;
    for (Eigen::Index j = 0; j < n_; ++j)
      if (state_[static_cast<std::size_t>(j)] != State::Basic && x_[j] != 0.0) rhs -= a_.col(j) * x_[j];
    const Vector xb = binv_ * rhs;
    for (Eigen::Index i = 0; i < m_; ++i) x_[head_[static_cast<std::size_t>(i)]] = xb[i];
    since_refactor_ = 0;
  }

  /// Runs to optimality for `cost`; returns false if unbounded.
  bool optimize(const Vector& cost) {
    refactor();
    bool verified = false;
    while (true) {
      if (since_refactor_ >= kRefactorEvery) refactor();
      Vector cb(m_);
      for (Eigen::Index i = 0; i < m_; ++i) cb[i] = cost[head_[static_cast<std::size_t>(i)]];
      const Vector y = binv_.transpose() * cb;

      Eigen::Index entering = -1;
      double best = 0.0, entering_d = 0.0;
      for (Eigen::Index j = 0; j < n_; ++j) {
        const State s = state_[static_cast<std::size_t>(j)];
        if (s == State::Basic || lo_[j] == up_[j]) continue;
        const double d = cost[j] - y.dot(a_.col(j));
        const bool eligible = (s == State::AtLower && d < -kCostTol) || (s == State::AtUpper && d > kCostTol) ||
                              (s == State::Free && std::abs(d) > kCostTol);
        if (!eligible) continue;
        if (bland_) {
          entering = j;
          entering_d = d;
          break;
        }
        if (std::abs(d) > best) {
          best = std::abs(d);
          entering = j;
          entering_d = d;
        }
      }
      if (entering < 0) {
        // Confirm optimality on a fresh factorization before stopping.
        if (verified || since_refactor_ == 0) return true;
        refactor();
        verified = true;
        continue;
      }
      verified = false;

      const double dir = entering_d < 0.0 ? 1.0 : -1.0;
      const Vector alpha = binv_ * a_.col(entering);
      const double flip = up_[entering] - lo_[entering];

      Eigen::Index leave = -1;
      double step = kInfinity;
      bool leave_at_upper = false;
      for (Eigen::Index i = 0; i < m_; ++i) {
        if (std::abs(alpha[i]) <= kPivotTol) continue;
        const Eigen::Index v = head_[static_cast<std::size_t>(i)];
        const double rate = -dir * alpha[i];
        double t;
        bool to_upper;
        if (rate < 0.0 && std::isfinite(lo_[v])) {
          t = (x_[v] - lo_[v]) / -rate;
          to_upper = false;
        } else if (rate > 0.0 && std::isfinite(up_[v])) {
          t = (up_[v] - x_[v]) / rate;
          to_upper = true;
        } else {
          continue;
        }
        t = std::max(t, 0.0);
        bool take = false;
        if (leave < 0 || t < step - 1e-12) {
          take = true;
        } else if (t <= step + 1e-12) {
          take = bland_ ? v < head_[static_cast<std::size_t>(leave)] : std::abs(alpha[i]) > std::abs(alpha[leave]);
        }
        if (take) {
          leave = i;
          step = t;
          leave_at_upper = to_upper;
        }
      }

      if (leave < 0 && !std::isfinite(flip)) return false;
      if (++iterations_ > limit_) throw Error(ErrorCode::NumericalBreakdown, "simplex iteration limit reached");

      if (std::isfinite(flip) && flip <= step) {
        x_[entering] += dir * flip;
        for (Eigen::Index i = 0; i < m_; ++i) x_[head_[static_cast<std::size_t>(i)]] -= dir * flip * alpha[i];
        state_[static_cast<std::size_t>(entering)] = dir > 0.0 ? State::AtUpper : State::AtLower;
        x_[entering] = dir > 0.0 ? up_[entering] : lo_[entering];
        track_degeneracy(flip);
        continue;
      }

      x_[entering] += dir * step;
      for (Eigen::Index i = 0; i < m_; ++i) x_[head_[static_cast<std::size_t>(i)]] -= dir * step * alpha[i];
      const Eigen::Index out = head_[static_cast<std::size_t>(leave)];
      x_[out] = leave_at_upper ? up_[out] : lo_[out];
      state_[static_cast<std::size_t>(out)] = leave_at_upper ? State::AtUpper : State::AtLower;
      state_[static_cast<std::size_t>(entering)] = State::Basic;
      head_[static_cast<std::size_t>(leave)] = entering;

      const double pivot = alpha[leave];
      if (std::abs(pivot) < kSingularTol) {
        refactor();
      } else {
        binv_.row(leave) /= pivot;
        for (Eigen::Index i = 0; i < m_; ++i)
          if (i != leave && alpha[i] != 0.0) binv_.row(i) -= alpha[i] * binv_.row(leave);
        ++since_refactor_;
      }
      track_degeneracy(step);
    }
  }

 private:
  void track_degeneracy(double step) {
    if (step <= 1e-12) {
      if (++degenerate_run_ >= kDegenerateRunToBland) bland_ = true;
    } else {
      degenerate_run_ = 0;
    }
  }

  Matrix a_;
  Vector b_;
  Vector lo_;
  Vector up_;
  Eigen::Index m_ = 0;
  Eigen::Index n_ = 0;
  std::vector<State> state_;
  Vector x_;
  std::vector<Eigen::Index> head_;
  Matrix binv_;
  int since_refactor_ = 0;
  int iterations_ = 0;
  int limit_ = 0;
  int degenerate_run_ = 0;
  bool bland_ = false;
};

void validate(const LpProblem& p) {
  const auto n = p.c.size();
  if (p.lower.size() != n || p.upper.size() != n) throw Error(ErrorCode::InvalidArgument, "LP bound vectors have the wrong length");
  if (p.a_eq.cols() != n || p.a_le.cols() != n) throw Error(ErrorCode::InvalidArgument, "LP matrices have the wrong width");
  if (p.a_eq.rows() != p.b_eq.size() || p.a_le.rows() != p.b_le.size())
    throw Error(ErrorCode::InvalidArgument, "LP right-hand sides have the wrong length");
  if (!p.c.allFinite() || !p.a_eq.allFinite() || !p.a_le.allFinite() || !p.b_eq.allFinite() || !p.b_le.allFinite())
    throw Error(ErrorCode::InvalidArgument, "LP data must be finite");
  for (Eigen::Index j = 0; j < n; ++j)
    if (std::isnan(p.lower[j]) || std::isnan(p.upper[j]) || p.lower[j] > p.upper[j] || p.lower[j] == kInfinity ||
        p.upper[j] == -kInfinity)
      throw Error(ErrorCode::InvalidArgument, "LP variable " + std::to_string(j) + " has invalid bounds");
}

double max_violation(const LpProblem& p, const Vector& x) {
  double worst = 0.0;
  if (p.a_eq.rows() > 0) worst = std::max(worst, (p.a_eq * x - p.b_eq).cwiseAbs().maxCoeff());
  if (p.a_le.rows() > 0) worst = std::max(worst, (p.a_le * x - p.b_le).maxCoeff());
  for (Eigen::Index j = 0; j < x.size(); ++j) worst = std::max({worst, p.lower[j] - x[j], x[j] - p.upper[j]});
  return worst;
}

}  // namespace

LpOutcome solve(const LpProblem& problem) {
  validate(problem);
  const Eigen::Index n = problem.num_variables();
  const Eigen::Index me = problem.a_eq.rows();
  const Eigen::Index ml = problem.a_le.rows();
  const Eigen::Index m = me + ml;
  const Eigen::Index total = n + ml + m;  // structurals, slacks, artificials

  Matrix a = Matrix::Zero(m, total);
  Vector b(m);
  a.topLeftCorner(me, n) = problem.a_eq;
  a.block(me, 0, ml, n) = problem.a_le;
  b.head(me) = problem.b_eq;
  b.tail(ml) = problem.b_le;

  for (Eigen::Index i = 0; i < m; ++i) {
    const double norm = a.row(i).head(n).cwiseAbs().maxCoeff();
    if (norm > 0.0) {
      a.row(i).head(n) /= norm;
      b[i] /= norm;
    }
  }
  Vector col_scale = Vector::Ones(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double norm = m > 0 ? a.col(j).cwiseAbs().maxCoeff() : 0.0;
    if (norm > 0.0) {
      col_scale[j] = norm;
      a.col(j) /= norm;
    }
  }
  for (Eigen::Index i = 0; i < ml; ++i) a(me + i, n + i) = 1.0;

  Vector lo(total), up(total), cost = Vector::Zero(total);
  for (Eigen::Index j = 0; j < n; ++j) {
    lo[j] = problem.lower[j] * col_scale[j];
    up[j] = problem.upper[j] * col_scale[j];
    cost[j] = problem.c[j] / col_scale[j];
  }
  const double cost_norm = n > 0 ? cost.head(n).cwiseAbs().maxCoeff() : 0.0;
  if (cost_norm > 0.0) cost /= cost_norm;
  lo.segment(n, ml).setZero();
  up.segment(n, ml).setConstant(kInfinity);
  lo.tail(m).setZero();
  up.tail(m).setZero();

  Simplex simplex(std::move(a), b, lo, up);
  auto& sx = simplex.values();
  auto& state = simplex.states();
  auto& head = simplex.basis();
  for (Eigen::Index j = 0; j < n + ml; ++j) simplex.set_nonbasic_at_bound(j);
  for (Eigen::Index j = n + ml; j < total; ++j) simplex.set_nonbasic_at_bound(j);

  Vector residual = b - simplex.matrix().leftCols(n) * sx.head(n);
  Vector phase_one = Vector::Zero(total);
  bool need_phase_one = false;
  head.resize(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) {
    if (i >= me && residual[i] >= 0.0) {
      const Eigen::Index slack = n + (i - me);
      head[static_cast<std::size_t>(i)] = slack;
      state[static_cast<std::size_t>(slack)] = State::Basic;
      sx[slack] = residual[i];
      continue;
    }
    const Eigen::Index art = n + ml + i;
    simplex.matrix()(i, art) = residual[i] < 0.0 ? -1.0 : 1.0;
    simplex.upper()[art] = kInfinity;
    head[static_cast<std::size_t>(i)] = art;
    state[static_cast<std::size_t>(art)] = State::Basic;
    sx[art] = std::abs(residual[i]);
    phase_one[art] = 1.0;
    need_phase_one = true;
  }

  LpOutcome out;
  if (need_phase_one) {
    simplex.optimize(phase_one);
    double infeasibility = 0.0;
    for (Eigen::Index j = n + ml; j < total; ++j) infeasibility += std::max(0.0, sx[j]);
    if (infeasibility > kPhaseOneTol) {
      out.status = LpStatus::Infeasible;
      out.iterations = simplex.iterations();
      out.x = Vector::Zero(n);
      return out;
    }
    for (Eigen::Index j = n + ml; j < total; ++j) {
      simplex.upper()[j] = 0.0;
      if (state[static_cast<std::size_t>(j)] != State::Basic) {
        state[static_cast<std::size_t>(j)] = State::AtLower;
        sx[j] = 0.0;
      }
    }
  }

  const bool bounded = simplex.optimize(cost);
  out.iterations = simplex.iterations();
  out.x = Vector(n);
  for (Eigen::Index j = 0; j < n; ++j)
    out.x[j] = std::clamp(sx[j] / col_scale[j], problem.lower[j], problem.upper[j]);
  if (!bounded) {
    out.status = LpStatus::Unbounded;
    out.objective = -kInfinity;
    return out;
  }
  out.status = LpStatus::Optimal;
  out.objective = problem.c.dot(out.x);
  out.max_residual = max_violation(problem, out.x);
  return out;
}

Alternative alternative_feasible(const Matrix& a, const Vector& g) {
  if (a.cols() != g.size()) throw Error(ErrorCode::InvalidArgument, "alternative_feasible: dimension mismatch");
  const Eigen::Index n = g.size();
  LpProblem lp = LpProblem::with_variables(n);
  lp.c = g;
  lp.a_eq = a;
  lp.b_eq = Vector::Zero(a.rows());
  lp.add_inequality(Vector::Ones(n), 1.0);
  const LpOutcome res = solve(lp);
  Alternative alt;
  if (res.status != LpStatus::Optimal) {
    // The feasible set contains z = 0 and is bounded, so this signals a
    // numerical problem rather than an answer.
    throw Error(ErrorCode::NumericalBreakdown, "alternative system LP did not reach optimality");
  }
  alt.z = res.x;
  alt.value = res.objective;
  alt.exists = res.objective < -1e-8;
  return alt;
}

}  // namespace cpagrid
