// SPDX-License-Identifier: Apache-2.0

#include "mdop/plan.hpp"

#include <cmath>
#include <stdexcept>

namespace mdop {

double PlanSolution::total_shed_p() const {
  double s = 0;
  for (const auto& series : shed_p)
    for (double v : series) s += v;
  return s;
}

PlanSolution empty_plan(const NetworkInstance& inst, int horizon) {
  PlanSolution p;
  p.horizon = horizon;
  const std::size_t nb = inst.batteries.size(), nd = inst.generators.size();
  const std::size_t nn = inst.buses.size(), nl = inst.lines.size();
  auto grid = [horizon](std::size_t n) { return Series(n, std::vector<double>(horizon, 0.0)); };
  p.builds = BuildDecision{std::vector<double>(nb, 0.0), std::vector<double>(nb, 0.0), std::vector<double>(nd, 0.0)};
  p.commit = p.start = p.stop = p.gen_p = p.gen_q = p.gen_raw = grid(nd);
  p.bat_p = p.bat_q = p.bat_raw = p.soc = grid(nb);
  p.voltage = p.shed_p = p.shed_q = grid(nn);
  p.line_p = p.line_q = grid(nl);
  p.grid_p.assign(horizon, 0.0);
  p.grid_q.assign(horizon, 0.0);
  return p;
}

namespace {

// Pointer to the plan entry a column maps to, or nullptr for boundary copies.
template <class Plan>
auto plan_slot(Plan& plan, const VarRef& v) -> decltype(&plan.grid_p[0]) {
  const int t = v.time;
  switch (v.kind) {
    case VarKind::BuildBattery: return &plan.builds.battery[v.owner];
    case VarKind::BatteryRating: return &plan.builds.rating[v.owner];
    case VarKind::BuildGenerator: return &plan.builds.generator[v.owner];
    case VarKind::Commit: return &plan.commit[v.owner][t];
    case VarKind::Start: return &plan.start[v.owner][t];
    case VarKind::Stop: return &plan.stop[v.owner][t];
    case VarKind::GenP: return &plan.gen_p[v.owner][t];
    case VarKind::GenQ: return &plan.gen_q[v.owner][t];
    case VarKind::GenRaw: return &plan.gen_raw[v.owner][t];
    case VarKind::BatP: return &plan.bat_p[v.owner][t];
    case VarKind::BatQ: return &plan.bat_q[v.owner][t];
    case VarKind::BatRaw: return &plan.bat_raw[v.owner][t];
    case VarKind::Soc: return &plan.soc[v.owner][t];
    case VarKind::Voltage: return &plan.voltage[v.owner][t];
    case VarKind::LineP: return &plan.line_p[v.owner][t];
    case VarKind::LineQ: return &plan.line_q[v.owner][t];
    case VarKind::ShedP: return &plan.shed_p[v.owner][t];
    case VarKind::ShedQ: return &plan.shed_q[v.owner][t];
    case VarKind::GridP: return &plan.grid_p[t];
    case VarKind::GridQ: return &plan.grid_q[t];
    default: return nullptr;
  }
}

void check_shape(const NetworkInstance& inst, const PlanSolution& plan) {
  auto ok = [&](const Series& s, std::size_t n) {
    if (s.size() != n) return false;
    for (const auto& v : s)
      if (static_cast<int>(v.size()) != plan.horizon) return false;
    return true;
  };
  const std::size_t nb = inst.batteries.size(), nd = inst.generators.size();
  const std::size_t nn = inst.buses.size(), nl = inst.lines.size();
  bool good = plan.builds.battery.size() == nb && plan.builds.rating.size() == nb && plan.builds.generator.size() == nd &&
              ok(plan.commit, nd) && ok(plan.start, nd) && ok(plan.stop, nd) && ok(plan.gen_p, nd) &&
              ok(plan.gen_q, nd) && ok(plan.gen_raw, nd) && ok(plan.bat_p, nb) && ok(plan.bat_q, nb) &&
              ok(plan.bat_raw, nb) && ok(plan.soc, nb) && ok(plan.voltage, nn) && ok(plan.shed_p, nn) &&
              ok(plan.shed_q, nn) && ok(plan.line_p, nl) && ok(plan.line_q, nl) &&
              static_cast<int>(plan.grid_p.size()) == plan.horizon && static_cast<int>(plan.grid_q.size()) == plan.horizon;
  if (!good) throw std::invalid_argument("plan shape does not match the instance");
}

}  // namespace

void write_window(const NetworkInstance& inst, const MdopModel& model, std::span<const double> x, PlanSolution& plan) {
  check_shape(inst, plan);
  for (const auto& v : model.vars) {
    if (double* slot = plan_slot(plan, v)) *slot = x[v.col];
  }
}

bool same_decisions(const PlanSolution& a, const PlanSolution& b) {
  auto same_terms = [](const ObjectiveTerms& x, const ObjectiveTerms& y) {
    return x.build == y.build && x.generation == y.generation && x.shed == y.shed;
  };
  if (a.stage_costs.size() != b.stage_costs.size()) return false;
  for (std::size_t s = 0; s < a.stage_costs.size(); ++s)
    if (!same_terms(a.stage_costs[s], b.stage_costs[s])) return false;
  auto same_nan = [](double x, double y) { return (std::isnan(x) && std::isnan(y)) || x == y; };
  if (a.stage_stats.size() != b.stage_stats.size()) return false;
  for (std::size_t s = 0; s < a.stage_stats.size(); ++s) {
    const auto &p = a.stage_stats[s], &q = b.stage_stats[s];
    if (p.stage != q.stage || p.start != q.start || p.end != q.end || p.status != q.status || p.nodes != q.nodes ||
        p.mip_gap != q.mip_gap)
      return false;
  }
  return a.horizon == b.horizon && a.builds == b.builds && a.commit == b.commit && a.start == b.start &&
         a.stop == b.stop && a.gen_p == b.gen_p && a.gen_q == b.gen_q && a.gen_raw == b.gen_raw && a.bat_p == b.bat_p &&
         a.bat_q == b.bat_q && a.bat_raw == b.bat_raw && a.soc == b.soc && a.voltage == b.voltage &&
         a.shed_p == b.shed_p && a.shed_q == b.shed_q && a.line_p == b.line_p && a.line_q == b.line_q &&
         a.grid_p == b.grid_p && a.grid_q == b.grid_q && same_terms(a.cost, b.cost) && a.objective == b.objective &&
         same_nan(a.lower_bound, b.lower_bound) && same_nan(a.relative_gap, b.relative_gap);
}

std::vector<double> plan_to_columns(const NetworkInstance& inst, const MdopModel& monolith, const PlanSolution& plan) {
  check_shape(inst, plan);
  BoundaryState init = BoundaryState::initial(inst);
  std::vector<double> x(monolith.program.num_vars(), 0.0);
  for (const auto& v : monolith.vars) {
    if (const double* slot = plan_slot(plan, v)) {
      x[v.col] = *slot;
      continue;
    }
    switch (v.kind) {
      case VarKind::InitSoc: x[v.col] = init.soc[v.owner]; break;
      case VarKind::InitCommit: x[v.col] = init.commit[v.owner]; break;
      case VarKind::InitPower: x[v.col] = init.power[v.owner]; break;
      case VarKind::InitStart: x[v.col] = init.start_hist[v.owner][v.time]; break;
      case VarKind::InitStop: x[v.col] = init.stop_hist[v.owner][v.time]; break;
      default: break;
    }
  }
  return x;
}

std::string var_label(const NetworkInstance& inst, const VarRef& v) {
  std::string owner;
  switch (v.kind) {
    case VarKind::BuildBattery:
    case VarKind::BatteryRating:
    case VarKind::BatP:
    case VarKind::BatQ:
    case VarKind::BatRaw:
    case VarKind::Soc:
    case VarKind::InitSoc: owner = inst.batteries[v.owner].id; break;
    case VarKind::BuildGenerator:
    case VarKind::Commit:
    case VarKind::Start:
    case VarKind::Stop:
    case VarKind::GenP:
    case VarKind::GenQ:
    case VarKind::GenRaw:
    case VarKind::InitCommit:
    case VarKind::InitPower:
    case VarKind::InitStart:
    case VarKind::InitStop: owner = inst.generators[v.owner].id; break;
    case VarKind::Voltage:
    case VarKind::ShedP:
    case VarKind::ShedQ:
    case VarKind::GridP:
    case VarKind::GridQ: owner = inst.buses[v.owner].id; break;
    case VarKind::LineP:
    case VarKind::LineQ: owner = inst.lines[v.owner].id; break;
  }
  std::string s = std::string(to_string(v.kind)) + "[" + owner;
  if (v.time >= 0) s += ",t=" + std::to_string(v.time);
  return s + "]";
}

std::string row_label(const NetworkInstance& inst, const RowTag& tag) {
  std::string owner;
  switch (tag.family) {
    case RowFamily::BalanceP:
    case RowFamily::BalanceQ:
    case RowFamily::BatterySite:
    case RowFamily::GeneratorSite: owner = inst.buses[tag.owner].id; break;
    case RowFamily::VoltageDrop:
    case RowFamily::Thermal: owner = inst.lines[tag.owner].id; break;
    case RowFamily::RatingLimit:
    case RowFamily::BatteryApparent:
    case RowFamily::SocBalance:
    case RowFamily::SocCapacity:
    case RowFamily::Discharge:
    case RowFamily::Charge: owner = inst.batteries[tag.owner].id; break;
    case RowFamily::Coupling: owner = "slot " + std::to_string(tag.owner); break;
    default: owner = inst.generators[tag.owner].id; break;
  }
  std::string s = std::string(to_string(tag.family)) + "[" + owner;
  if (tag.time >= 0) s += ",t=" + std::to_string(tag.time);
  return s + "]";
}

FeasibilityReport check_feasibility(const NetworkInstance& inst, const LoadProfile& loads, const PlanSolution& plan,
                                    double tol) {
  if (plan.horizon != loads.horizon) throw std::invalid_argument("plan horizon does not match the load profile");
  MdopModel mono = assemble_monolith(inst, loads);
  std::vector<double> x = plan_to_columns(inst, mono, plan);
  const ConvexProgram& p = mono.program;
  FeasibilityReport rep;
  auto note = [&](std::string what, double mag) {
    if (!(mag <= tol)) {
      rep.violations.push_back({std::move(what), mag});
      rep.worst = std::max(rep.worst, std::isnan(mag) ? kInf : mag);
    }
  };
  for (int j = 0; j < p.num_vars(); ++j) {
    double v = std::max(p.lower[j] - x[j], x[j] - p.upper[j]);
    if (v > tol || std::isnan(x[j])) note("bound " + var_label(inst, mono.vars[j]), std::isnan(x[j]) ? kInf : v);
  }
  for (int c : mono.binaries) {
    double frac = std::abs(x[c] - std::round(x[c]));
    if (frac > tol) note("integrality " + var_label(inst, mono.vars[c]), frac);
  }
  for (int r = 0; r < p.num_rows(); ++r) {
    double a = p.row_activity(r, x);
    double v = 0;
    switch (p.sense[r]) {
      case RowSense::Le: v = a - p.rhs[r]; break;
      case RowSense::Ge: v = p.rhs[r] - a; break;
      case RowSense::Eq: v = std::abs(a - p.rhs[r]); break;
    }
    if (v > tol) note(row_label(inst, mono.rows[r]), v);
  }
  for (int b = 0; b < p.num_balls(); ++b) {
    double v = p.ball_violation(b, x);
    if (v > tol) note(row_label(inst, mono.balls[b]), v);
  }
  return rep;
}

}  // namespace mdop
