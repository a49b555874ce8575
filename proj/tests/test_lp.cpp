#include "catch_amalgamated.hpp"

#include <functional>
#include <optional>

#include "cpagrid/lp.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace cpagrid;
using namespace oracles;

TEST_CASE("single lower-bounded variable", "[lp]") {
  LpProblem p = LpProblem::with_variables(1);
  p.c << 1.0;
  p.lower << -kInfinity;
  p.add_inequality(Vector::Constant(1, -1.0), -3.0);
  const auto out = solve(p);
  REQUIRE(out.status == LpStatus::Optimal);
  CHECK(out.x[0] == Catch::Approx(3.0).margin(1e-12));
  CHECK(out.objective == Catch::Approx(3.0).margin(1e-12));
}

TEST_CASE("contradictory bounds are infeasible", "[lp]") {
  LpProblem p = LpProblem::with_variables(1);
  p.add_inequality(Vector::Constant(1, 1.0), -1.0);
  CHECK(solve(p).status == LpStatus::Infeasible);
}

TEST_CASE("unbounded direction is reported", "[lp]") {
  LpProblem p = LpProblem::with_variables(2);
  p.c << -1.0, 0.0;
  Vector row(2);
  row << 1.0, -1.0;
  p.add_inequality(row, 1.0);
  CHECK(solve(p).status == LpStatus::Unbounded);
}

TEST_CASE("equality rows and free variables", "[lp]") {
  // min |x - 2| + |y + 1| via split variables, with x + y = 0.5.
  LpProblem p = LpProblem::with_variables(6);
  p.c << 0, 0, 1, 1, 1, 1;
  p.lower[0] = p.lower[1] = -kInfinity;
  Vector eq(6);
  eq << 1, 1, 0, 0, 0, 0;
  p.add_equality(eq, 0.5);
  Vector r1(6), r2(6);
  r1 << 1, 0, -1, 1, 0, 0;  // x - 2 = a - b
  r2 << 0, 1, 0, 0, -1, 1;  // y + 1 = c - d
  p.add_equality(r1, 2.0);
  p.add_equality(r2, -1.0);
  const auto out = solve(p);
  REQUIRE(out.status == LpStatus::Optimal);
  CHECK(out.objective == Catch::Approx(0.5).margin(1e-9));
  CHECK(out.max_residual <= 1e-9);
}

TEST_CASE("cycling example terminates", "[lp][degenerate]") {
  // A classic instance on which textbook Dantzig pricing cycles.
  LpProblem p = LpProblem::with_variables(4);
  p.c << -0.75, 150, -0.02, 6;
  Vector a(4), b(4), c(4);
  a << 0.25, -60, -0.04, 9;
  b << 0.5, -90, -0.02, 3;
  c << 0, 0, 1, 0;
  p.add_inequality(a, 0);
  p.add_inequality(b, 0);
  p.add_inequality(c, 1);
  const auto out = solve(p);
  REQUIRE(out.status == LpStatus::Optimal);
  CHECK(out.objective == Catch::Approx(-0.05).margin(1e-9));
}

TEST_CASE("random LPs match vertex enumeration", "[lp][oracle]") {
  Rng rng(31337);
  int optimal = 0, infeasible = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const LpProblem p = random_lp(rng);
    const auto out = solve(p);
    const auto oracle = vertex_oracle(p);
    if (oracle) {
      ++optimal;
      REQUIRE(out.status == LpStatus::Optimal);
      CHECK(std::abs(out.objective - *oracle) <= 1e-7);
      CHECK(out.max_residual <= 1e-8);
    } else {
      ++infeasible;
      CHECK(out.status == LpStatus::Infeasible);
    }
  }
  CHECK(optimal >= 25);
}

TEST_CASE("solver is deterministic", "[lp]") {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const LpProblem p = random_lp(rng);
    const auto a = solve(p), b = solve(p);
    CHECK(a.status == b.status);
    CHECK(a.x == b.x);
    CHECK(a.iterations == b.iterations);
  }
}

TEST_CASE("badly scaled columns", "[lp][scaling]") {
  // Susceptances spanning eight orders of magnitude.
  LpProblem p = LpProblem::with_variables(3);
  p.c << 1, 1, 1;
  p.upper.setOnes();
  Vector row(3);
  row << 1e4, -1e-4, 3.0;
  p.add_inequality(-row, -2.0);
  const auto out = solve(p);
  REQUIRE(out.status == LpStatus::Optimal);
  CHECK(out.objective == Catch::Approx(2e-4).margin(1e-12));
  CHECK(out.max_residual <= 1e-8);
}

TEST_CASE("alternative system on a hand-checked cone", "[lp][alternative]") {
  Matrix a(1, 2);
  a << 1, -1;
  Vector g(2);
  g << -1, 0;
  const auto alt = alternative_feasible(a, g);
  REQUIRE(alt.exists);
  CHECK(alt.z.minCoeff() >= 0.0);
  CHECK(std::abs((a * alt.z)[0]) <= 1e-12);
  CHECK(g.dot(alt.z) < -1e-8);
  CHECK(alt.value == Catch::Approx(-0.5));
}

TEST_CASE("nonnegative costs admit no certificate", "[lp][alternative]") {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix a = Matrix::NullaryExpr(3, 5, [&] { return rng.uniform(-1, 1); });
    Vector g = Vector::NullaryExpr(5, [&] { return rng.uniform(0, 1); });
    CHECK_FALSE(alternative_feasible(a, g).exists);
  }
  CHECK_FALSE(alternative_feasible(Matrix::Zero(2, 4), Vector::Zero(4)).exists);
}

TEST_CASE("alternative system agrees with the primal inequality system", "[lp][alternative][oracle]") {
  // Exactly one of {z >= 0, A z = 0, gᵀz < 0} and {Aᵀc <= g} is solvable.
  Rng rng(606);
  int certified = 0, primal = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Matrix a = Matrix::NullaryExpr(6, 10, [&] { return integer_in(rng, -4, 4); });
    if (trial % 2 == 0) {
      Vector w = Vector::NullaryExpr(9, [&] { return integer_in(rng, 1, 3); });
      a.col(9) = -a.leftCols(9) * w;
    }
    Vector g = Vector::NullaryExpr(10, [&] { return integer_in(rng, -2, 6); });

    const auto alt = alternative_feasible(a, g);

    LpProblem p = LpProblem::with_variables(6);
    p.lower.setConstant(-kInfinity);
    p.a_le = a.transpose();
    p.b_le = g;
    const auto out = solve(p);

    if (alt.exists) {
      ++certified;
      CHECK(alt.z.minCoeff() >= -1e-12);
      CHECK(fixtures::max_abs(a * alt.z) <= 1e-9);
      CHECK(g.dot(alt.z) < -1e-8);
      CHECK(out.status == LpStatus::Infeasible);
    } else {
      ++primal;
      REQUIRE(out.status == LpStatus::Optimal);
      CHECK((a.transpose() * out.x - g).maxCoeff() <= 1e-8);
    }
  }
  CHECK(certified >= 10);
  CHECK(primal >= 10);
}
