// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>

#include "doctest.h"
#include "mdop/decomposition.hpp"
#include "mdop/harness.hpp"

using namespace mdop;

namespace {

int find_row(const MdopModel& m, RowFamily f, int owner, int t) {
  for (std::size_t r = 0; r < m.rows.size(); ++r) {
    if (m.rows[r].family == f && m.rows[r].owner == owner && m.rows[r].time == t) return static_cast<int>(r);
  }
  return -1;
}

int find_ball(const MdopModel& m, RowFamily f, int owner, int t) {
  for (std::size_t b = 0; b < m.balls.size(); ++b) {
    if (m.balls[b].family == f && m.balls[b].owner == owner && m.balls[b].time == t) return static_cast<int>(b);
  }
  return -1;
}

// Signed violation of a row at x: positive means violated.
double row_violation(const MdopModel& m, int r, const std::vector<double>& x) {
  const ConvexProgram& p = m.program;
  double act = p.row_activity(r, x);
  switch (p.sense[r]) {
    case RowSense::Le: return act - p.rhs[r];
    case RowSense::Ge: return p.rhs[r] - act;
    case RowSense::Eq: return std::abs(act - p.rhs[r]);
  }
  return 0;
}

double coef(const MdopModel& m, int r, int c) {
  const ConvexProgram& p = m.program;
  for (int k = p.row_start[r]; k < p.row_start[r + 1]; ++k) {
    if (p.row_col[k] == c) return p.row_val[k];
  }
  return 0.0;
}

LoadProfile zero_loads(const NetworkInstance& inst, int steps, double dt) {
  LoadProfile lp;
  lp.horizon = steps;
  lp.dt_hours = dt;
  lp.p_mw.assign(inst.buses.size(), std::vector<double>(steps, 0.0));
  lp.q_mvar = lp.p_mw;
  return lp;
}

bool same_program(const ConvexProgram& a, const ConvexProgram& b) {
  if (a.lower != b.lower || a.upper != b.upper || a.quad != b.quad || a.linear != b.linear) return false;
  if (a.constant != b.constant || a.row_start != b.row_start || a.row_col != b.row_col) return false;
  if (a.row_val != b.row_val || a.sense != b.sense || a.rhs != b.rhs) return false;
  if (a.balls.size() != b.balls.size()) return false;
  for (std::size_t k = 0; k < a.balls.size(); ++k) {
    const NormBall &x = a.balls[k], &y = b.balls[k];
    if (x.cols != y.cols || x.radius_col != y.radius_col || x.radius != y.radius || x.radius_scale != y.radius_scale) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("objective: zero point, one committed generator and a shed step") {
  NetworkInstance inst = micro2_instance();
  LoadProfile loads = micro2_loads(inst, 1);
  MdopModel m = assemble_monolith(inst, loads);
  std::vector<double> x(m.program.num_vars(), 0.0);
  CHECK(objective_terms(inst, m, x).total() == 0.0);
  CHECK(m.program.objective_value(x) == 0.0);

  // Diesel option (200, 6, 35, 50), committed and producing 2 MW raw.
  x[m.col(VarKind::BuildGenerator, 0, -1)] = 1.0;
  x[m.col(VarKind::Commit, 0, 0)] = 1.0;
  x[m.col(VarKind::GenRaw, 0, 0)] = 2.0;
  ObjectiveTerms o = objective_terms(inst, m, x);
  CHECK(o.build == 200.0);
  CHECK(o.generation == 276.0);
  CHECK(o.total() == 476.0);
  CHECK(m.program.objective_value(x) == doctest::Approx(476.0).epsilon(1e-12));

  std::vector<double> y(m.program.num_vars(), 0.0);
  y[m.col(VarKind::ShedP, inst.bus_index("b2"), 0)] = 0.35;
  CHECK(objective_terms(inst, m, y).shed == doctest::Approx(3.5e6).epsilon(1e-12));
}

TEST_CASE("power flow: voltage drop, flow signs and thermal ball") {
  NetworkInstance inst = micro2_instance();
  inst.lines[0].s_max = 1.0;
  LoadProfile loads = micro2_loads(inst, 1);
  MdopModel m = assemble_monolith(inst, loads);
  const int from = inst.line_from(0), to = inst.line_to(0);
  std::vector<double> x(m.program.num_vars(), 0.0);
  x[m.col(VarKind::Voltage, from, 0)] = 1.0;
  x[m.col(VarKind::LineP, 0, 0)] = 1.0;
  x[m.col(VarKind::LineQ, 0, 0)] = 0.5;
  int drop = find_row(m, RowFamily::VoltageDrop, 0, 0);
  REQUIRE(drop >= 0);
  x[m.col(VarKind::Voltage, to, 0)] = 0.96;
  CHECK(row_violation(m, drop, x) == doctest::Approx(0.0).epsilon(1e-14));
  x[m.col(VarKind::Voltage, to, 0)] = 0.97;
  CHECK(row_violation(m, drop, x) > 1e-3);

  int bal_from = find_row(m, RowFamily::BalanceP, from, 0);
  int bal_to = find_row(m, RowFamily::BalanceP, to, 0);
  int lp = m.col(VarKind::LineP, 0, 0);
  // Rows read injections = load, so a positive flow leaves the from-bus with
  // the opposite sign of its generator and arrives at the to-bus.
  CHECK(coef(m, bal_from, lp) == -1.0);
  CHECK(coef(m, bal_to, lp) == 1.0);
  CHECK(coef(m, bal_from, m.col(VarKind::GenP, 0, 0)) == 1.0);

  int ball = find_ball(m, RowFamily::Thermal, 0, 0);
  REQUIRE(ball >= 0);
  x[m.col(VarKind::LineP, 0, 0)] = 0.8;
  x[m.col(VarKind::LineQ, 0, 0)] = 0.8;
  CHECK(m.program.ball_violation(ball, x) > 0.0);
  x[m.col(VarKind::LineQ, 0, 0)] = 0.6;
  CHECK(m.program.ball_violation(ball, x) <= 1e-15);
}

TEST_CASE("power flow: zero load admits the zero point at the slack voltage") {
  NetworkInstance inst = ieee13_instance();
  LoadProfile loads = zero_loads(inst, 4, inst.dt_hours);
  MdopModel m = assemble_monolith(inst, loads);
  std::vector<double> x(m.program.num_vars(), 0.0);
  for (int i = 0; i < static_cast<int>(inst.buses.size()); ++i) {
    for (int t = 0; t < 4; ++t) x[m.col(VarKind::Voltage, i, t)] = 1.0;
  }
  CHECK(max_violation(m.program, x) <= 1e-12);
}

TEST_CASE("resource limits: site rows and the rating limit") {
  NetworkInstance inst = micro2_instance();
  BatterySpec second = inst.batteries[0];
  second.id = "e2";
  second.max_power = 2.0;
  inst.batteries.push_back(second);
  LoadProfile loads = micro2_loads(inst, 1);
  MdopModel m = assemble_monolith(inst, loads);
  const int bus = inst.bus_index("b2");
  int site = find_row(m, RowFamily::BatterySite, bus, -1);
  REQUIRE(site >= 0);
  CHECK(coef(m, site, m.col(VarKind::BuildBattery, 0, -1)) == 1.0);
  CHECK(coef(m, site, m.col(VarKind::BuildBattery, 1, -1)) == 1.0);
  CHECK(m.program.sense[site] == RowSense::Le);
  CHECK(m.program.rhs[site] == 1.0);

  int lim = find_row(m, RowFamily::RatingLimit, 1, -1);
  REQUIRE(lim >= 0);
  std::vector<double> x(m.program.num_vars(), 0.0);
  x[m.col(VarKind::BatteryRating, 1, -1)] = 0.1;
  CHECK(row_violation(m, lim, x) > 0.0);  // z = 0 forces s = 0
  x[m.col(VarKind::BuildBattery, 1, -1)] = 1.0;
  x[m.col(VarKind::BatteryRating, 1, -1)] = 2.0;
  CHECK(row_violation(m, lim, x) <= 0.0);
}

TEST_CASE("unit commitment: start and stop follow the commitment sequence") {
  NetworkInstance inst = micro2_instance();
  inst.generators[0].up_time = 1;
  inst.generators[0].down_time = 1;
  LoadProfile loads = zero_loads(inst, 4, inst.dt_hours);
  MdopModel m = assemble_monolith(inst, loads);
  const double seq[] = {0, 1, 1, 0};
  MdopModel fixed = m;
  fixed.program.lower[m.col(VarKind::BuildGenerator, 0, -1)] = 1.0;
  for (int t = 0; t < 4; ++t) {
    int c = m.col(VarKind::Commit, 0, t);
    fixed.program.lower[c] = fixed.program.upper[c] = seq[t];
  }
  MipResult r = solve_miqcqp(fixed);
  REQUIRE(r.status == MipStatus::Optimal);
  const double y[] = {0, 1, 0, 0}, w[] = {0, 0, 0, 1};
  for (int t = 0; t < 4; ++t) {
    CHECK(r.x[m.col(VarKind::Start, 0, t)] == doctest::Approx(y[t]).epsilon(1e-9));
    CHECK(r.x[m.col(VarKind::Stop, 0, t)] == doctest::Approx(w[t]).epsilon(1e-9));
  }
}

TEST_CASE("unit commitment: up time holds the unit on after a start") {
  NetworkInstance inst = micro2_instance();
  inst.generators[0].up_time = 3;
  inst.generators[0].down_time = 1;
  LoadProfile loads = zero_loads(inst, 5, inst.dt_hours);
  MdopModel m = assemble_monolith(inst, loads);
  m.program.lower[m.col(VarKind::Start, 0, 1)] = 1.0;
  MipResult r = solve_miqcqp(m);
  REQUIRE(r.status == MipStatus::Optimal);
  const double expect[] = {0, 1, 1, 1, 0};
  for (int t = 0; t < 5; ++t) CHECK(r.x[m.col(VarKind::Commit, 0, t)] == doctest::Approx(expect[t]).epsilon(1e-9));
}

TEST_CASE("unit commitment: delivered power is efficiency times raw output") {
  NetworkInstance inst = micro2_instance();
  LoadProfile loads = micro2_loads(inst, 2);
  MdopModel m = assemble_monolith(inst, loads);
  int r = find_row(m, RowFamily::GenEfficiency, 0, 1);
  REQUIRE(r >= 0);
  std::vector<double> x(m.program.num_vars(), 0.0);
  x[m.col(VarKind::GenRaw, 0, 1)] = 2.0;
  x[m.col(VarKind::GenP, 0, 1)] = 1.0;
  CHECK(inst.generators[0].efficiency == 0.5);
  CHECK(row_violation(m, r, x) == 0.0);
  x[m.col(VarKind::GenP, 0, 1)] = 1.1;
  CHECK(row_violation(m, r, x) > 0.0);
}

TEST_CASE("battery: state of charge recursion and efficiency rows") {
  NetworkInstance inst = ieee13_instance();
  REQUIRE(inst.dt_hours == 0.25);
  LoadProfile loads = zero_loads(inst, 3, inst.dt_hours);
  MdopModel m = assemble_monolith(inst, loads);
  int soc = find_row(m, RowFamily::SocBalance, 0, 1);
  REQUIRE(soc >= 0);
  std::vector<double> x(m.program.num_vars(), 0.0);
  x[m.col(VarKind::Soc, 0, 0)] = 5.0;
  x[m.col(VarKind::BatRaw, 0, 1)] = 2.0;
  x[m.col(VarKind::Soc, 0, 1)] = 4.5;
  CHECK(row_violation(m, soc, x) == doctest::Approx(0.0).epsilon(1e-14));
  x[m.col(VarKind::Soc, 0, 1)] = 4.6;
  CHECK(row_violation(m, soc, x) > 1e-3);

  int dis = find_row(m, RowFamily::Discharge, 0, 2), chg = find_row(m, RowFamily::Charge, 0, 2);
  REQUIRE(dis >= 0);
  REQUIRE(chg >= 0);
  const int raw = m.col(VarKind::BatRaw, 0, 2), p = m.col(VarKind::BatP, 0, 2);
  auto at = [&](double r, double pv) {
    std::vector<double> v(m.program.num_vars(), 0.0);
    v[raw] = r;
    v[p] = pv;
    return std::pair{row_violation(m, dis, v), row_violation(m, chg, v)};
  };
  auto [d1, c1] = at(1.0, 0.7);
  CHECK(d1 <= 1e-15);
  CHECK(c1 <= 0.0);
  auto [d2, c2] = at(1.0, 0.9);
  CHECK(d2 > 0.0);
  auto [d3, c3] = at(-1.0, -1.25);
  CHECK(d3 <= 0.0);
  CHECK(std::abs(c3) <= 1e-15);
}

TEST_CASE("battery: every point of the efficiency disjunction satisfies the relaxation") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  NetworkInstance inst = micro2_instance();
  for (int trial = 0; trial < 200; ++trial) {
    inst.batteries[0].eta_ch = 0.05 + 0.95 * U(rng);
    inst.batteries[0].eta_dis = 0.05 + 0.95 * U(rng);
    LoadProfile loads = zero_loads(inst, 1, inst.dt_hours);
    MdopModel m = assemble_monolith(inst, loads);
    const BatterySpec& s = inst.batteries[0];
    double rating = s.max_power * U(rng);
    double pv, rawv;
    if (trial % 2 == 0) {  // discharging curve
      pv = rating * U(rng);
      rawv = pv / s.eta_dis;
    } else {  // charging curve
      pv = -rating * U(rng);
      rawv = pv * s.eta_ch;
    }
    double qv = std::sqrt(std::max(0.0, rating * rating - pv * pv)) * (2 * U(rng) - 1);
    std::vector<double> x(m.program.num_vars(), 0.0);
    x[m.col(VarKind::BuildBattery, 0, -1)] = 1.0;
    x[m.col(VarKind::BatteryRating, 0, -1)] = rating;
    x[m.col(VarKind::BatP, 0, 0)] = pv;
    x[m.col(VarKind::BatQ, 0, 0)] = qv;
    x[m.col(VarKind::BatRaw, 0, 0)] = rawv;
    CHECK(row_violation(m, find_row(m, RowFamily::Discharge, 0, 0), x) <= 1e-12);
    CHECK(row_violation(m, find_row(m, RowFamily::Charge, 0, 0), x) <= 1e-12);
    CHECK(m.program.ball_violation(find_ball(m, RowFamily::BatteryApparent, 0, 0), x) <= 1e-12);
  }
}

TEST_CASE("assemble: model sizes match the closed-form counts") {
  for (const NetworkInstance& inst : {micro2_instance(), ieee13_instance()}) {
    for (int steps : {1, 3, 6}) {
      LoadProfile loads = zero_loads(inst, 12, inst.dt_hours);
      for (bool owns : {true, false}) {
        Window w{2, 2 + steps, owns, !owns};
        BoundaryState b = BoundaryState::initial(inst);
        if (!owns) {
          b.builds = BuildDecision{std::vector<double>(inst.batteries.size(), 1.0),
                                   std::vector<double>(inst.batteries.size(), 0.5),
                                   std::vector<double>(inst.generators.size(), 1.0)};
        }
        MdopModel m = assemble(inst, loads, w, b);
        ModelCounts c = expected_counts(inst, w);
        CHECK(m.program.num_vars() == c.columns);
        CHECK(m.program.num_rows() == c.rows);
        CHECK(m.program.num_balls() == c.balls);
        CHECK(m.num_binaries() == c.binaries);
        CHECK(m.vars.size() == static_cast<std::size_t>(c.columns));
      }
    }
  }
}

TEST_CASE("assemble: micro2 variants stay within 20 binaries") {
  NetworkInstance inst = micro2_instance();
  for (int steps : kMicro2Steps) {
    MdopModel m = assemble_monolith(inst, micro2_loads(inst, steps));
    CHECK(m.num_binaries() <= 20);
  }
}

TEST_CASE("assemble: a single full window equals the monolith") {
  NetworkInstance inst = ieee13_instance();
  SynthSpec spec;
  spec.daily_amplitude = 0.6;
  LoadProfile loads = synth_load(inst, spec);
  MdopModel mono = assemble_monolith(inst, loads);
  StagePlan plan = partition(loads.horizon, 1, &inst);
  MdopModel stage = assemble(inst, loads, plan.windows[0], BoundaryState::initial(inst));
  CHECK(same_program(mono.program, stage.program));
  CHECK(mono.binaries == stage.binaries);
}

TEST_CASE("assemble: zero prices leave the objective unchanged, prices shift terminal SoC monotonically") {
  NetworkInstance inst = micro2_instance();
  LoadProfile loads = micro2_loads(inst, 4);
  Window w{0, 4, true, false};
  BoundaryState b0 = BoundaryState::initial(inst);
  MdopModel plain = assemble(inst, loads, w, b0);
  std::vector<double> zero(plain.out_slots.size(), 0.0);
  MdopModel priced = assemble(inst, loads, w, b0, &zero);
  CHECK(priced.program.linear == plain.program.linear);

  std::vector<double> bad(plain.out_slots.size() + 1, 0.0);
  CHECK_THROWS_AS(assemble(inst, loads, w, b0, &bad), std::invalid_argument);
  Window last{0, 4, true, true};
  CHECK_THROWS_AS(assemble(inst, loads, last, b0, &zero), std::invalid_argument);

  int slot = -1;
  for (std::size_t k = 0; k < plain.out_slots.size(); ++k) {
    if (plain.out_slots[k].kind == StateKind::Soc) slot = static_cast<int>(k);
  }
  REQUIRE(slot >= 0);
  double prev = kInf;
  for (double gamma : {-2000.0, -500.0, -100.0, 0.0, 100.0}) {
    std::vector<double> prices(plain.out_slots.size(), 0.0);
    prices[slot] = gamma;
    MdopModel m = assemble(inst, loads, w, b0, &prices);
    MipResult r = solve_miqcqp(m);
    REQUIRE(r.has_incumbent);
    double soc = r.x[m.out_cols[slot]];
    CHECK(soc <= prev + 1e-6);
    prev = soc;
  }
}

TEST_CASE("relax and fix: idempotence, incumbent reproduction and the no-build plan") {
  NetworkInstance inst = micro2_instance();
  LoadProfile loads = micro2_loads(inst, 4);
  MdopModel m = assemble_monolith(inst, loads);
  MdopModel once = relax_integrality(m), twice = relax_integrality(once);
  CHECK(once.binaries.empty());
  CHECK(same_program(once.program, twice.program));
  for (int c : m.binaries) {
    CHECK(once.program.lower[c] == 0.0);
    CHECK(once.program.upper[c] == 1.0);
  }

  MipResult r = solve_miqcqp(m);
  REQUIRE(r.status == MipStatus::Optimal);
  MdopModel fixed = fix_binaries(m, r.binaries);
  CHECK(fixed.binaries.empty());
  CHECK(same_program(relax_integrality(fixed).program, fixed.program));
  PrimalDualSolution s = solve_qcqp(fixed.program);
  REQUIRE(s.optimal());
  CHECK(s.objective == doctest::Approx(r.objective).epsilon(1e-6));

  MdopModel none = fix_binaries(m, std::vector<double>(m.binaries.size(), 0.0));
  PrimalDualSolution sn = solve_qcqp(none.program);
  REQUIRE(sn.optimal());
  double load = 0;
  for (std::size_t i = 0; i < inst.buses.size(); ++i) {
    for (int t = 0; t < loads.horizon; ++t) load += loads.p(i, t) + loads.q(i, t);
  }
  CHECK(sn.objective == doctest::Approx(inst.shed_penalty * load).epsilon(1e-7));

  std::vector<double> frac(m.binaries.size(), 0.0);
  frac[0] = 0.5;
  CHECK_THROWS_AS(fix_binaries(m, frac), std::invalid_argument);
  CHECK_THROWS_AS(fix_binaries(m, std::vector<double>(m.binaries.size() - 1, 0.0)), std::invalid_argument);
}

TEST_CASE("feasibility: monolithic plan passes, a SoC jump is reported") {
  NetworkInstance inst = micro2_instance();
  LoadProfile loads = micro2_loads(inst, 4);
  PlanSolution plan = monolithic_solve(inst, loads);
  FeasibilityReport ok = check_feasibility(inst, loads, plan, 1e-6);
  CHECK(ok.ok());
  PlanSolution bad = plan;
  bad.soc[0][2] += 0.1;
  FeasibilityReport rep = check_feasibility(inst, loads, bad, 1e-6);
  REQUIRE(!rep.ok());
  bool soc_row = false;
  for (const Violation& v : rep.violations) soc_row = soc_row || v.row.find("soc_balance") != std::string::npos;
  CHECK(soc_row);
  CHECK(rep.worst >= 0.1 - 1e-12);
}
