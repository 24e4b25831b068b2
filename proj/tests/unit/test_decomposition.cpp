// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "mdop/harness.hpp"

using namespace mdop;

namespace {

LoadProfile zero_loads(const NetworkInstance& inst, int steps) {
  LoadProfile lp;
  lp.horizon = steps;
  lp.dt_hours = inst.dt_hours;
  lp.p_mw.assign(inst.buses.size(), std::vector<double>(steps, 0.0));
  lp.q_mvar = lp.p_mw;
  return lp;
}

// Relaxed optimum of the coupled model with one coupling row's rhs moved,
// or infinity when the move makes it infeasible.
double coupled_value(const NetworkInstance& inst, const LoadProfile& loads, const StagePlan& plan, int row,
                     double shift) {
  CoupledModel cm = assemble_coupled(inst, loads, plan.windows);
  MdopModel m = relax_integrality(cm.model);
  m.program.rhs[row] += shift;
  PrimalDualSolution s = solve_qcqp(m.program);
  if (s.status == SolveStatus::Infeasible) return kInf;
  REQUIRE(s.optimal());
  return s.objective;
}

// The relaxed value is convex and piecewise smooth in each coupling rhs, so
// a valid dual only has to land between the one-sided slopes.
void check_subgradients(const NetworkInstance& inst, const LoadProfile& loads, const StagePlan& plan) {
  DualInit d = init_duals(inst, loads, plan);
  CoupledModel cm = assemble_coupled(inst, loads, plan.windows);
  const double h = 1e-5;
  for (int s = 1; s < plan.stages(); ++s) {
    REQUIRE(d.lambda[s].size() == cm.coupling_rows[s].size());
    for (std::size_t k = 0; k < cm.coupling_rows[s].size(); ++k) {
      int row = cm.coupling_rows[s][k];
      double v0 = coupled_value(inst, loads, plan, row, 0.0);
      double right = (coupled_value(inst, loads, plan, row, h) - v0) / h;
      double left = (v0 - coupled_value(inst, loads, plan, row, -h)) / h;
      double g = -d.lambda[s][k];  // dV/d(rhs) = -lambda
      CAPTURE(s);
      CAPTURE(k);
      CHECK(g >= left - 1e-3 * std::max(1.0, std::abs(left)));
      CHECK(g <= right + 1e-3 * std::max(1.0, std::abs(right)));
    }
  }
}

}  // namespace

TEST_CASE("partition: ceiling windows and degenerate cases") {
  StagePlan a = partition(288, 6);
  REQUIRE(a.stages() == 6);
  for (const Window& w : a.windows) CHECK(w.length() == 48);
  StagePlan b = partition(10, 3);
  REQUIRE(b.stages() == 3);
  CHECK(b.windows[0].length() == 4);
  CHECK(b.windows[1].length() == 4);
  CHECK(b.windows[2].length() == 2);
  CHECK(b.windows[0].owns_builds);
  CHECK(!b.windows[1].owns_builds);
  CHECK(b.windows[2].last);
  StagePlan c = partition(7, 1);
  REQUIRE(c.stages() == 1);
  CHECK(c.windows[0].start == 0);
  CHECK(c.windows[0].end == 7);
  CHECK_THROWS_AS(partition(3, 4), std::invalid_argument);
  CHECK_THROWS_AS(partition(6, 4), std::invalid_argument);  // ceiling leaves stage 4 empty
  CHECK_THROWS_AS(partition(6, 0), std::invalid_argument);

  NetworkInstance inst = ieee13_instance();
  StagePlan d = partition(96, 48, &inst);
  CHECK(!d.warnings.empty());  // 2-step windows are shorter than some up/down times
}

TEST_CASE("relative gap arithmetic") {
  CHECK(relative_gap(100.0, 100.0) == 0.0);
  CHECK(relative_gap(104.34, 100.0) == doctest::Approx(4.34).epsilon(1e-12));
}

TEST_CASE("init duals: every coupling dual is a subgradient of the relaxed optimum") {
  NetworkInstance inst = micro2_instance();
  StagePlan plan = partition(6, 3, &inst);
  check_subgradients(inst, micro2_loads(inst, 6), plan);
}

TEST_CASE("init duals: zero load duals are subgradients of a flat value") {
  NetworkInstance inst = micro2_instance();
  LoadProfile loads = zero_loads(inst, 6);
  StagePlan plan = partition(6, 3, &inst);
  check_subgradients(inst, loads, plan);
  // Any dual that steers nothing costs nothing: rh from these prices is still empty.
  PlanSolution p = mpc_solve(inst, loads, plan, 1, DualMode::DualInit);
  CHECK(std::abs(p.objective) <= 1e-6);
}

TEST_CASE("init duals: stored energy never has positive marginal cost") {
  NetworkInstance inst = ieee13_instance();
  SynthSpec flat;  // constant load
  LoadProfile loads = synth_load(inst, flat);
  StagePlan plan = partition(loads.horizon, 6, &inst);
  DualInit d = init_duals(inst, loads, plan);
  CoupledModel cm = assemble_coupled(inst, loads, plan.windows);
  int soc_rows = 0;
  for (int s = 1; s < plan.stages(); ++s) {
    for (std::size_t k = 0; k < cm.stages[s].in_slots.size(); ++k) {
      if (cm.stages[s].in_slots[k].kind != StateKind::Soc) continue;
      ++soc_rows;
      CHECK(-d.lambda[s][k] <= 1e-6);  // dV/dSoC = -lambda
    }
  }
  CHECK(soc_rows == 5 * static_cast<int>(inst.batteries.size()));
}

TEST_CASE("prices are the negated downstream duals") {
  DualVector lam{1.5, -2.0, 0.0};
  DualVector p = prices_from_duals(lam);
  REQUIRE(p.size() == 3);
  CHECK(p[0] == -1.5);
  CHECK(p[1] == 2.0);
  CHECK(p[2] == 0.0);
}

TEST_CASE("rh: zero load gives the empty plan") {
  NetworkInstance inst = micro2_instance();
  LoadProfile loads = zero_loads(inst, 6);
  PlanSolution p = rh_solve(inst, loads, partition(6, 3, &inst));
  CHECK(p.objective == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(std::abs(p.objective) <= 1e-6);
  for (double z : p.builds.battery) CHECK(z == 0.0);
  for (double z : p.builds.generator) CHECK(z == 0.0);
}

TEST_CASE("mpc: zero-init single sweep reproduces rh exactly") {
  NetworkInstance inst = micro2_instance();
  LoadProfile loads = micro2_loads(inst, 6);
  for (int S : {2, 3, 6}) {
    StagePlan plan = partition(6, S, &inst);
    PlanSolution rh = rh_solve(inst, loads, plan);
    PlanSolution mpc = mpc_solve(inst, loads, plan, 1, DualMode::ZeroInit);
    CHECK(same_decisions(rh, mpc));
    CHECK(rh.objective == mpc.objective);
  }
}

TEST_CASE("mpc and rh: one stage reproduces the monolith") {
  NetworkInstance inst = micro2_instance();
  LoadProfile loads = micro2_loads(inst, 5);
  DecompOptions opts;
  PlanSolution mono = monolithic_solve(inst, loads, opts);
  StagePlan one = partition(5, 1, &inst);
  for (const PlanSolution& p : {mpc_solve(inst, loads, one, 2, DualMode::DualInit, opts), rh_solve(inst, loads, one, opts)}) {
    CHECK(std::abs(p.objective - mono.objective) <= opts.mip.gap_tol * std::abs(mono.objective));
  }
}

TEST_CASE("mpc: stitched plan is feasible, continuous at seams and counts builds once") {
  NetworkInstance inst = micro2_instance();
  LoadProfile loads = micro2_loads(inst, 6);
  StagePlan plan = partition(6, 3, &inst);
  PlanSolution p = mpc_solve(inst, loads, plan, 3, DualMode::DualInit);
  CHECK(check_feasibility(inst, loads, p, 1e-6).ok());
  REQUIRE(p.sweeps.size() == 3);
  double best = kInf;
  for (const SweepRecord& sw : p.sweeps) best = std::min(best, sw.objective);
  CHECK(p.objective == best);
  REQUIRE(p.stage_costs.size() == 3);
  CHECK(p.stage_costs[1].build == 0.0);
  CHECK(p.stage_costs[2].build == 0.0);
  double build = 0;
  for (std::size_t b = 0; b < inst.batteries.size(); ++b) {
    build += inst.batteries[b].fixed_cost * p.builds.battery[b] + inst.batteries[b].capacity_cost * p.builds.rating[b];
  }
  for (std::size_t d = 0; d < inst.generators.size(); ++d) build += inst.generators[d].fixed_cost * p.builds.generator[d];
  CHECK(p.cost.build == doctest::Approx(build).epsilon(1e-12));
  CHECK(p.cost.total() == doctest::Approx(p.objective).epsilon(1e-12));
  for (const Window& w : plan.windows) {
    if (w.start == 0) continue;
    int t = w.start;
    double expect = p.soc[0][t - 1] - p.bat_raw[0][t] * loads.dt_hours;
    CHECK(std::abs(p.soc[0][t] - expect) <= 1e-8);
  }
}

TEST_CASE("stitch: single stage is the identity") {
  NetworkInstance inst = micro2_instance();
  LoadProfile loads = micro2_loads(inst, 4);
  StagePlan plan = partition(4, 1, &inst);
  MdopModel m = assemble(inst, loads, plan.windows[0], BoundaryState::initial(inst));
  MipResult r = solve_miqcqp(m);
  REQUIRE(r.has_incumbent);
  PlanSolution p = stitch(inst, {StageSolution{m, r.x, {}}}, plan);
  PlanSolution direct = empty_plan(inst, 4);
  write_window(inst, m, r.x, direct);
  CHECK(p.soc == direct.soc);
  CHECK(p.commit == direct.commit);
  CHECK(p.builds == direct.builds);
  CHECK(p.objective == doctest::Approx(r.objective).epsilon(1e-12));
}

TEST_CASE("gauss-seidel: one stage converges in one sweep") {
  NetworkInstance inst = micro2_instance();
  LoadProfile loads = micro2_loads(inst, 6);
  GaussSeidelResult r = gauss_seidel_relaxed(inst, loads, partition(6, 1, &inst));
  CHECK(r.converged);
  CHECK(r.sweeps == 1);
  CHECK(r.residuals.front() <= 1e-5);
}

TEST_CASE("gauss-seidel: relaxed micro2 converges to the central solve") {
  NetworkInstance inst = micro2_instance();
  LoadProfile loads = micro2_loads(inst, 6);
  RelaxationResult central = relaxation_bound(inst, loads);
  for (int S : {2, 3}) {
    GaussSeidelResult r = gauss_seidel_relaxed(inst, loads, partition(6, S, &inst));
    CHECK(r.converged);
    CHECK(r.sweeps <= 200);
    CHECK(r.residuals.back() <= 1e-5);
    CHECK(std::abs(r.objective - central.objective) <= 1e-4 * std::abs(central.objective));
  }
}

TEST_CASE("gauss-seidel: sweep limit is reported without convergence") {
  NetworkInstance inst = micro2_instance();
  LoadProfile loads = micro2_loads(inst, 6);
  GaussSeidelOptions o;
  o.max_sweeps = 3;
  GaussSeidelResult r = gauss_seidel_relaxed(inst, loads, partition(6, 3, &inst), o);
  CHECK(!r.converged);
  CHECK(r.sweeps == 3);
  CHECK(r.residuals.size() == 3);
  CHECK(r.solution.status == SolveStatus::IterationLimit);
}
