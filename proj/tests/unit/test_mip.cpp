// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "doctest.h"
#include "enumeration.hpp"
#include "mdop/harness.hpp"

using namespace mdop;

namespace {

// Stage window [2, 5) of micro2 with everything built and a given SoC.
MdopModel built_window(const NetworkInstance& inst, const LoadProfile& loads, double soc) {
  BoundaryState b = BoundaryState::initial(inst);
  b.soc[0] = soc;
  b.builds = BuildDecision{{1.0}, {1.0}, {1.0}};
  return assemble(inst, loads, Window{2, 5, false, true}, b);
}

}  // namespace

TEST_CASE("mip: fully fixed model needs one convex solve") {
  NetworkInstance inst = micro2_instance();
  MdopModel m = assemble_monolith(inst, micro2_loads(inst, 4));
  MipResult free = solve_miqcqp(m);
  REQUIRE(free.status == MipStatus::Optimal);
  MdopModel fixed = m;
  for (std::size_t k = 0; k < m.binaries.size(); ++k) {
    int c = m.binaries[k];
    fixed.program.lower[c] = fixed.program.upper[c] = free.binaries[k];
  }
  MipResult r = solve_miqcqp(fixed);
  CHECK(r.status == MipStatus::Optimal);
  CHECK(r.nodes == 1);
  CHECK(r.gap == 0.0);
  CHECK(r.objective == doctest::Approx(free.objective).epsilon(1e-9));
}

TEST_CASE("mip: micro2 optimum matches binary enumeration") {
  NetworkInstance inst = micro2_instance();
  MdopModel m = assemble_monolith(inst, micro2_loads(inst, 4));
  testing::EnumerationResult oracle = testing::enumerate_binaries(m);
  MipResult r = solve_miqcqp(m);
  REQUIRE(r.status == MipStatus::Optimal);
  CHECK(std::abs(r.objective - oracle.objective) <= 1e-6 * std::abs(oracle.objective));
  CHECK(r.bound <= r.objective + 1e-9);
  CHECK(r.gap == doctest::Approx((r.objective - r.bound) / std::max(std::abs(r.bound), 1e-9)).epsilon(1e-12));
}

TEST_CASE("mip: incumbent is integral and feasible, reruns are identical") {
  NetworkInstance inst = micro2_instance();
  MdopModel m = assemble_monolith(inst, micro2_loads(inst, 5));
  MipResult a = solve_miqcqp(m), b = solve_miqcqp(m);
  REQUIRE(a.has_incumbent);
  for (double v : a.binaries) CHECK((v == 0.0 || v == 1.0));
  for (std::size_t k = 0; k < m.binaries.size(); ++k) CHECK(a.x[m.binaries[k]] == a.binaries[k]);
  CHECK(max_violation(m.program, a.x) <= 1e-6);
  CHECK(a.x == b.x);
  CHECK(a.nodes == b.nodes);
  CHECK(a.objective == b.objective);
  CHECK(a.bound == b.bound);
}

TEST_CASE("mip: infeasible row is detected at the root") {
  NetworkInstance inst = micro2_instance();
  MdopModel m = assemble_monolith(inst, micro2_loads(inst, 1));
  m.program.add_row({{m.binaries[0], 0.0}}, RowSense::Le, -1.0);
  m.rows.push_back({RowFamily::Coupling, -1, -1});
  MipResult r = solve_miqcqp(m);
  CHECK(r.status == MipStatus::Infeasible);
  CHECK(!r.has_incumbent);
  CHECK(r.nodes <= 1);
}

TEST_CASE("fixed duals: incumbent re-solve and vacuous coupling") {
  NetworkInstance inst = micro2_instance();
  LoadProfile loads = micro2_loads(inst, 6);
  MdopModel m = built_window(inst, loads, 0.5);
  MipResult r = solve_miqcqp(m);
  REQUIRE(r.status == MipStatus::Optimal);
  PrimalDualSolution s = solve_fixed_then_duals(m, r.binaries);
  CHECK(s.objective == doctest::Approx(r.objective).epsilon(1e-6));

  // Nothing built: the boundary SoC column feeds nothing that costs money.
  BoundaryState b = BoundaryState::initial(inst);
  b.builds = BuildDecision{{0.0}, {0.0}, {0.0}};
  MdopModel bare = assemble(inst, loads, Window{2, 5, false, true}, b);
  MipResult rb = solve_miqcqp(bare);
  REQUIRE(rb.has_incumbent);
  PrimalDualSolution sb = solve_fixed_then_duals(bare, rb.binaries);
  for (std::size_t k = 0; k < bare.in_slots.size(); ++k) {
    if (bare.in_slots[k].kind == StateKind::Soc) CHECK(std::abs(sb.row_duals[bare.in_rows[k]]) <= 1e-6);
  }
}

TEST_CASE("fixed duals: coupling SoC dual matches a finite difference") {
  NetworkInstance inst = micro2_instance();
  LoadProfile loads = micro2_loads(inst, 6);
  const double soc = 0.5, h = 1e-4;
  MdopModel m = built_window(inst, loads, soc);
  MipResult r = solve_miqcqp(m);
  REQUIRE(r.status == MipStatus::Optimal);
  PrimalDualSolution s = solve_fixed_then_duals(m, r.binaries);
  int row = -1;
  for (std::size_t k = 0; k < m.in_slots.size(); ++k) {
    if (m.in_slots[k].kind == StateKind::Soc) row = m.in_rows[k];
  }
  REQUIRE(row >= 0);
  double up = solve_fixed_then_duals(built_window(inst, loads, soc + h), r.binaries).objective;
  double dn = solve_fixed_then_duals(built_window(inst, loads, soc - h), r.binaries).objective;
  double fd = (up - dn) / (2 * h);
  // dV/d(rhs) = -lambda.
  CHECK(std::abs(fd + s.row_duals[row]) <= 1e-4 * std::max(1.0, std::abs(fd)));
  CHECK(fd < 0.0);  // stored energy has value here
}
