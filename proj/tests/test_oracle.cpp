#include <doctest.h>

#include <cmath>

#include "wpmec/oracle.hpp"

using namespace wpmec;

namespace {

UserParams user(double h, double g, double R_min = 1e4) {
  UserParams u;
  u.h = h;
  u.g = g;
  u.R_min = R_min;
  return u;
}

void check_feasible(const OracleResult& r, Regime regime, const Users& users, const SystemParams& sys) {
  for (const auto& res : feasibility_residuals(r.alloc, regime, users, sys)) CHECK(res.value <= 1e-9);
}

}  // namespace

TEST_CASE("zero channels with no bit requirement give the zero allocation") {
  SystemParams sys;
  const UserParams z = user(0.0, 0.0, 0.0);
  const OracleResult r = grid_maxmin(Regime::TdmaPartial, Framework::CE, {z, z}, sys);
  CHECK(r.objective == 0.0);
  CHECK(r.alloc.tau0 == 0.0);
  CHECK(r.alloc.f.isZero());
  CHECK(r.alloc.P.isZero());
}

TEST_CASE("single TDMA user at Ps = 0.025 W") {
  SystemParams sys;
  const Users users{user(1.9, 1e-3)};
  const OracleResult r = grid_maxmin(Regime::TdmaPartial, Framework::CE, users, sys);
  // Reference value of this grid; the optimum computes locally at f = C R_min / T.
  CHECK(r.objective == doctest::Approx(3.5815381377e10).epsilon(1e-6));
  check_feasible(r, Regime::TdmaPartial, users, sys);
  const SolveReport s = solve_regime(Regime::TdmaPartial, Framework::CE, users, sys);
  CHECK(s.eta_star >= r.objective * 0.98);
  CHECK(s.eta_star <= r.objective * 1.02);
}

TEST_CASE("refinement order does not change the objective") {
  SystemParams sys;
  const std::vector<Users> cases{{user(1.9, 1e-2, 2e5)}, {user(1.6, 1e-4), user(2.2, 1e-2)}};
  for (const Users& users : cases)
    for (Regime regime : {Regime::TdmaPartial, Regime::NomaPartial})
      for (Framework fw : {Framework::CE, Framework::CB}) {
        GridSpec a, b;
        b.order = RefineOrder::PowerFirst;
        const OracleResult ra = grid_maxmin(regime, fw, users, sys, a);
        const OracleResult rb = grid_maxmin(regime, fw, users, sys, b);
        CHECK(std::abs(ra.objective - rb.objective) <= 5e-3 * std::max(ra.objective, rb.objective));
        check_feasible(ra, regime, users, sys);
        check_feasible(rb, regime, users, sys);
      }
}

TEST_CASE("solver dominates the grid") {
  SystemParams sys;
  const Users users{user(1.6, 1e-4), user(2.2, 1e-2)};
  for (Regime regime : {Regime::TdmaPartial, Regime::NomaPartial})
    for (Framework fw : {Framework::CE, Framework::CB}) {
      const SolveReport s = solve_regime(regime, fw, users, sys);
      const double solver = framework_objective(s, regime, fw, users, sys);
      const double grid = grid_maxmin(regime, fw, users, sys).objective;
      CHECK(grid <= solver * 1.02);
      CHECK(solver >= grid * 0.98);
    }
}

TEST_CASE("invalid oracle inputs") {
  SystemParams sys;
  const UserParams u = user(1.9, 1e-3);
  CHECK_THROWS_AS(grid_maxmin(Regime::TdmaPartial, Framework::CE, {u, u, u}, sys), SolverError);
  GridSpec big;
  big.time = 65;
  CHECK_THROWS_AS(grid_maxmin(Regime::TdmaPartial, Framework::CE, {u}, sys, big), SolverError);
  CHECK_THROWS_AS(grid_maxmin(Regime::NomaPartial, Framework::CE, {user(1.9, 1e-2), user(1.9, 1e-3)}, sys),
                  SolverError);
  VectorXd half(1);
  half << 0.5;
  CHECK_THROWS_AS(grid_maxmin(Regime::TdmaBinary, Framework::CE, {u}, sys, {}, half), SolverError);
  // No harvest cannot pay for any bits.
  CHECK_THROWS_AS(grid_maxmin(Regime::TdmaPartial, Framework::CE, {user(0.0, 1e-3)}, sys), SolverError);
}

TEST_CASE("mode enumeration") {
  SUBCASE("one user takes the better of its two modes") {
    const ModeSearch m = enumerate_modes(1, [](const VectorXd& a) { return a(0) == 1.0 ? 3.0 : 2.0; });
    CHECK(m.alpha(0) == 1.0);
    CHECK(m.objective == 3.0);
  }
  SUBCASE("infeasible modes are skipped and other errors propagate") {
    const ModeSearch m = enumerate_modes(1, [](const VectorXd& a) {
      if (a(0) == 1.0) throw SolverError(ErrorKind::Infeasible, "x");
      return 2.0;
    });
    CHECK(m.alpha(0) == 0.0);
    CHECK_THROWS_AS(enumerate_modes(1, [](const VectorXd&) -> double { throw SolverError(ErrorKind::Infeasible, "x"); }),
                    SolverError);
    CHECK_THROWS_AS(
        enumerate_modes(2, [](const VectorXd&) -> double { throw SolverError(ErrorKind::NanGuard, "x"); }),
        SolverError);
    CHECK_THROWS_AS(enumerate_modes(9, [](const VectorXd&) { return 0.0; }), SolverError);
  }
  SUBCASE("ties keep the first vector in counting order") {
    const ModeSearch m = enumerate_modes(3, [](const VectorXd&) { return 1.0; });
    CHECK(m.alpha.isZero());
  }
  SUBCASE("symmetric users get a symmetric mode vector") {
    SystemParams sys;
    for (double g : {1e-6, 1e-1}) {
      const Users users{user(2.0, g), user(2.0, g)};
      for (Regime regime : {Regime::TdmaBinary, Regime::NomaBinary}) {
        const OracleResult r = grid_maxmin(regime, Framework::CB, users, sys);
        CHECK(r.alloc.alpha(0) == r.alloc.alpha(1));
        check_feasible(r, regime, users, sys);
      }
    }
  }
}
