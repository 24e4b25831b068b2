// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "mdop/formulation.hpp"

namespace mdop {

const char* to_string(VarKind k) {
  switch (k) {
    case VarKind::BuildBattery: return "z_b";
    case VarKind::BatteryRating: return "s_b";
    case VarKind::BuildGenerator: return "z_d";
    case VarKind::Commit: return "x_d";
    case VarKind::Start: return "y_d";
    case VarKind::Stop: return "w_d";
    case VarKind::GenP: return "p_d";
    case VarKind::GenQ: return "q_d";
    case VarKind::GenRaw: return "phat_d";
    case VarKind::BatP: return "p_b";
    case VarKind::BatQ: return "q_b";
    case VarKind::BatRaw: return "phat_b";
    case VarKind::Soc: return "sc_b";
    case VarKind::Voltage: return "v";
    case VarKind::LineP: return "p_line";
    case VarKind::LineQ: return "q_line";
    case VarKind::ShedP: return "shed_p";
    case VarKind::ShedQ: return "shed_q";
    case VarKind::GridP: return "grid_p";
    case VarKind::GridQ: return "grid_q";
    case VarKind::InitSoc: return "init_sc_b";
    case VarKind::InitCommit: return "init_x_d";
    case VarKind::InitPower: return "init_p_d";
    case VarKind::InitStart: return "init_y_d";
    case VarKind::InitStop: return "init_w_d";
  }
  return "?";
}

bool is_binary_kind(VarKind k) {
  return k == VarKind::BuildBattery || k == VarKind::BuildGenerator || k == VarKind::Commit || k == VarKind::Start ||
         k == VarKind::Stop;
}

const char* to_string(RowFamily f) {
  switch (f) {
    case RowFamily::BalanceP: return "balance_p";
    case RowFamily::BalanceQ: return "balance_q";
    case RowFamily::VoltageDrop: return "voltage_drop";
    case RowFamily::Thermal: return "thermal";
    case RowFamily::BatterySite: return "battery_site";
    case RowFamily::GeneratorSite: return "generator_site";
    case RowFamily::RatingLimit: return "rating_limit";
    case RowFamily::CommitBuilt: return "commit_built";
    case RowFamily::StartStop: return "start_stop";
    case RowFamily::StartOrStop: return "start_or_stop";
    case RowFamily::GenPLow: return "gen_p_low";
    case RowFamily::GenPHigh: return "gen_p_high";
    case RowFamily::GenQLow: return "gen_q_low";
    case RowFamily::GenQHigh: return "gen_q_high";
    case RowFamily::GenEfficiency: return "gen_efficiency";
    case RowFamily::RampDown: return "ramp_down";
    case RowFamily::RampUp: return "ramp_up";
    case RowFamily::UpTime: return "up_time";
    case RowFamily::DownTime: return "down_time";
    case RowFamily::BatteryApparent: return "battery_apparent";
    case RowFamily::SocBalance: return "soc_balance";
    case RowFamily::SocCapacity: return "soc_capacity";
    case RowFamily::Discharge: return "discharge";
    case RowFamily::Charge: return "charge";
    case RowFamily::Coupling: return "coupling";
  }
  return "?";
}

const char* to_string(StateKind k) {
  switch (k) {
    case StateKind::Soc: return "soc";
    case StateKind::Commit: return "commit";
    case StateKind::Power: return "power";
    case StateKind::StartHist: return "start_hist";
    case StateKind::StopHist: return "stop_hist";
    case StateKind::BuildBattery: return "build_battery";
    case StateKind::BatteryRating: return "battery_rating";
    case StateKind::BuildGenerator: return "build_generator";
  }
  return "?";
}

BoundaryState BoundaryState::initial(const NetworkInstance& inst) {
  BoundaryState b;
  for (const auto& bat : inst.batteries) b.soc.push_back(bat.initial_soc);
  for (const auto& g : inst.generators) {
    b.commit.push_back(g.initially_on ? 1.0 : 0.0);
    b.power.push_back(g.initially_on ? g.initial_power : 0.0);
    b.start_hist.emplace_back(g.history_depth(), 0.0);
    b.stop_hist.emplace_back(g.history_depth(), 0.0);
  }
  return b;
}

double BoundaryState::value(const StateSlot& s) const {
  switch (s.kind) {
    case StateKind::Soc: return soc.at(s.owner);
    case StateKind::Commit: return commit.at(s.owner);
    case StateKind::Power: return power.at(s.owner);
    case StateKind::StartHist: return start_hist.at(s.owner).at(s.lag);
    case StateKind::StopHist: return stop_hist.at(s.owner).at(s.lag);
    case StateKind::BuildBattery:
    case StateKind::BatteryRating:
    case StateKind::BuildGenerator: break;
  }
  if (!builds) throw std::invalid_argument("boundary state carries no build decision");
  switch (s.kind) {
    case StateKind::BuildBattery: return builds->battery.at(s.owner);
    case StateKind::BatteryRating: return builds->rating.at(s.owner);
    default: return builds->generator.at(s.owner);
  }
}

std::vector<StateSlot> state_slots(const NetworkInstance& inst, bool with_builds) {
  std::vector<StateSlot> out;
  const int nb = static_cast<int>(inst.batteries.size());
  const int nd = static_cast<int>(inst.generators.size());
  for (int b = 0; b < nb; ++b) out.push_back({StateKind::Soc, b, 0});
  for (int d = 0; d < nd; ++d) {
    out.push_back({StateKind::Commit, d, 0});
    out.push_back({StateKind::Power, d, 0});
  }
  for (int d = 0; d < nd; ++d) {
    for (int k = 0; k < inst.generators[d].history_depth(); ++k) out.push_back({StateKind::StartHist, d, k});
    for (int k = 0; k < inst.generators[d].history_depth(); ++k) out.push_back({StateKind::StopHist, d, k});
  }
  if (with_builds) {
    for (int b = 0; b < nb; ++b) {
      out.push_back({StateKind::BuildBattery, b, 0});
      out.push_back({StateKind::BatteryRating, b, 0});
    }
    for (int d = 0; d < nd; ++d) out.push_back({StateKind::BuildGenerator, d, 0});
  }
  return out;
}

std::vector<double> state_vector(const BoundaryState& b, const std::vector<StateSlot>& slots) {
  std::vector<double> v;
  v.reserve(slots.size());
  for (const auto& s : slots) v.push_back(b.value(s));
  return v;
}

int MdopModel::col(VarKind kind, int owner, int time) const {
  auto it = index.find({static_cast<int>(kind), owner, time});
  return it == index.end() ? -1 : it->second;
}

double MdopModel::cost_without_prices(std::span<const double> x) const {
  double f = program.objective_value(x);
  for (std::size_t k = 0; k < prices.size(); ++k) f -= prices[k] * x[out_cols[k]];
  return f;
}

namespace {

class Builder {
 public:
  Builder(const NetworkInstance& inst, const LoadProfile& loads, const Window& w, const BoundaryState& boundary)
      : inst_(inst), loads_(loads), w_(w), boundary_(boundary) {
    m_.window = w;
  }

  MdopModel build(const std::vector<double>* prices);

 private:
  int add_col(VarKind k, int owner, int time, double lo, double up, double quad = 0.0, double lin = 0.0) {
    int c = m_.program.add_var(lo, up, quad, lin);
    m_.vars.push_back({k, owner, time, c});
    m_.index.emplace(std::make_tuple(static_cast<int>(k), owner, time), c);
    if (is_binary_kind(k) && !(w_.owns_builds == false && (k == VarKind::BuildBattery || k == VarKind::BuildGenerator))) {
      m_.binaries.push_back(c);
    }
    return c;
  }
  int add_row(RowTag tag, std::initializer_list<std::pair<int, double>> terms, RowSense s, double rhs) {
    m_.rows.push_back(tag);
    return m_.program.add_row(terms, s, rhs);
  }
  int add_row(RowTag tag, const std::vector<int>& cols, const std::vector<double>& vals, RowSense s, double rhs) {
    m_.rows.push_back(tag);
    return m_.program.add_row(cols, vals, s, rhs);
  }
  int col(VarKind k, int owner, int time) const {
    int c = m_.col(k, owner, time);
    if (c < 0) throw std::logic_error(std::string("missing column ") + to_string(k));
    return c;
  }
  // Column holding x_d (or p_d) at step t-1, reaching into the boundary block.
  int commit_prev(int d, int t) const { return t - 1 >= w_.start ? col(VarKind::Commit, d, t - 1) : col(VarKind::InitCommit, d, 0); }
  int power_prev(int d, int t) const { return t - 1 >= w_.start ? col(VarKind::GenP, d, t - 1) : col(VarKind::InitPower, d, 0); }
  int soc_prev(int b, int t) const { return t - 1 >= w_.start ? col(VarKind::Soc, b, t - 1) : col(VarKind::InitSoc, b, 0); }
  int event_col(bool start, int d, int k) const {
    if (k >= w_.start) return col(start ? VarKind::Start : VarKind::Stop, d, k);
    int lag = w_.start - 1 - k;
    if (lag >= inst_.generators[d].history_depth()) throw std::logic_error("history lag beyond boundary depth");
    return col(start ? VarKind::InitStart : VarKind::InitStop, d, lag);
  }

  void add_columns();
  void add_coupling();
  void add_resource_limits();
  void add_power_flow(int t);
  void add_unit_commitment(int t);
  void add_battery(int t);
  void add_terminal(const std::vector<double>* prices);

  const NetworkInstance& inst_;
  const LoadProfile& loads_;
  Window w_;
  const BoundaryState& boundary_;
  MdopModel m_;
};

void Builder::add_columns() {
  const double dt = loads_.dt_hours;
  const double mu = inst_.shed_penalty;
  for (int b = 0; b < static_cast<int>(inst_.batteries.size()); ++b) {
    const auto& s = inst_.batteries[b];
    double fz = w_.owns_builds ? s.fixed_cost : 0.0;
    double fs = w_.owns_builds ? s.capacity_cost : 0.0;
    add_col(VarKind::BuildBattery, b, -1, 0.0, 1.0, 0.0, fz);
    add_col(VarKind::BatteryRating, b, -1, 0.0, s.max_power, 0.0, fs);
  }
  for (int d = 0; d < static_cast<int>(inst_.generators.size()); ++d) {
    add_col(VarKind::BuildGenerator, d, -1, 0.0, 1.0, 0.0, w_.owns_builds ? inst_.generators[d].fixed_cost : 0.0);
  }
  for (const auto& slot : state_slots(inst_, false)) {
    switch (slot.kind) {
      case StateKind::Soc: add_col(VarKind::InitSoc, slot.owner, 0, -kInf, kInf); break;
      case StateKind::Commit: add_col(VarKind::InitCommit, slot.owner, 0, -kInf, kInf); break;
      case StateKind::Power: add_col(VarKind::InitPower, slot.owner, 0, -kInf, kInf); break;
      case StateKind::StartHist: add_col(VarKind::InitStart, slot.owner, slot.lag, -kInf, kInf); break;
      case StateKind::StopHist: add_col(VarKind::InitStop, slot.owner, slot.lag, -kInf, kInf); break;
      default: break;
    }
  }
  const int slack = inst_.slack_index();
  for (int t = w_.start; t < w_.end; ++t) {
    for (int d = 0; d < static_cast<int>(inst_.generators.size()); ++d) {
      const auto& g = inst_.generators[d];
      double raw_lo = std::min(0.0, g.p_min), raw_hi = std::max(0.0, g.p_max);
      add_col(VarKind::Commit, d, t, 0.0, 1.0, 0.0, g.c0);
      add_col(VarKind::Start, d, t, 0.0, 1.0);
      add_col(VarKind::Stop, d, t, 0.0, 1.0);
      add_col(VarKind::GenRaw, d, t, raw_lo, raw_hi, 2.0 * g.c2, g.c1);
      add_col(VarKind::GenP, d, t, g.efficiency * raw_lo, g.efficiency * raw_hi);
      add_col(VarKind::GenQ, d, t, std::min(0.0, g.q_min), std::max(0.0, g.q_max));
    }
    for (int b = 0; b < static_cast<int>(inst_.batteries.size()); ++b) {
      const auto& s = inst_.batteries[b];
      double raw = s.max_energy / dt;
      add_col(VarKind::BatRaw, b, t, -raw, raw);
      add_col(VarKind::BatP, b, t, s.p_min, s.p_max);
      add_col(VarKind::BatQ, b, t, s.q_min, s.q_max);
      add_col(VarKind::Soc, b, t, 0.0, s.max_energy);
    }
    for (int i = 0; i < static_cast<int>(inst_.buses.size()); ++i) {
      const auto& bus = inst_.buses[i];
      if (i == slack) add_col(VarKind::Voltage, i, t, 1.0, 1.0);
      else add_col(VarKind::Voltage, i, t, bus.v_min, bus.v_max);
      add_col(VarKind::ShedP, i, t, 0.0, std::max(0.0, loads_.p(i, t)), 0.0, mu);
      add_col(VarKind::ShedQ, i, t, 0.0, std::max(0.0, loads_.q(i, t)), 0.0, mu);
    }
    for (int l = 0; l < static_cast<int>(inst_.lines.size()); ++l) {
      double s = inst_.lines[l].s_max;
      add_col(VarKind::LineP, l, t, -s, s);
      add_col(VarKind::LineQ, l, t, -s, s);
    }
    if (inst_.grid_connected) {
      add_col(VarKind::GridP, slack, t, -kInf, kInf);
      add_col(VarKind::GridQ, slack, t, -kInf, kInf);
    }
  }
}

void Builder::add_coupling() {
  m_.in_slots = state_slots(inst_, !w_.owns_builds);
  for (const auto& slot : m_.in_slots) {
    int c = -1;
    switch (slot.kind) {
      case StateKind::Soc: c = col(VarKind::InitSoc, slot.owner, 0); break;
      case StateKind::Commit: c = col(VarKind::InitCommit, slot.owner, 0); break;
      case StateKind::Power: c = col(VarKind::InitPower, slot.owner, 0); break;
      case StateKind::StartHist: c = col(VarKind::InitStart, slot.owner, slot.lag); break;
      case StateKind::StopHist: c = col(VarKind::InitStop, slot.owner, slot.lag); break;
      case StateKind::BuildBattery: c = col(VarKind::BuildBattery, slot.owner, -1); break;
      case StateKind::BatteryRating: c = col(VarKind::BatteryRating, slot.owner, -1); break;
      case StateKind::BuildGenerator: c = col(VarKind::BuildGenerator, slot.owner, -1); break;
    }
    int r = add_row({RowFamily::Coupling, static_cast<int>(m_.in_rows.size()), w_.start}, {{c, 1.0}}, RowSense::Eq,
                    boundary_.value(slot));
    m_.in_rows.push_back(r);
    m_.in_cols.push_back(c);
  }
}

void Builder::add_resource_limits() {
  for (int i = 0; i < static_cast<int>(inst_.buses.size()); ++i) {
    std::vector<int> cols;
    for (int b = 0; b < static_cast<int>(inst_.batteries.size()); ++b)
      if (inst_.bus_index(inst_.batteries[b].bus) == i) cols.push_back(col(VarKind::BuildBattery, b, -1));
    if (!cols.empty()) {
      add_row({RowFamily::BatterySite, i, -1}, cols, std::vector<double>(cols.size(), 1.0), RowSense::Le,
              inst_.buses[i].max_batteries);
    }
    cols.clear();
    for (int d = 0; d < static_cast<int>(inst_.generators.size()); ++d)
      if (inst_.bus_index(inst_.generators[d].bus) == i) cols.push_back(col(VarKind::BuildGenerator, d, -1));
    if (!cols.empty()) {
      add_row({RowFamily::GeneratorSite, i, -1}, cols, std::vector<double>(cols.size(), 1.0), RowSense::Le,
              inst_.buses[i].max_generators);
    }
  }
  for (int b = 0; b < static_cast<int>(inst_.batteries.size()); ++b) {
    add_row({RowFamily::RatingLimit, b, -1},
            {{col(VarKind::BatteryRating, b, -1), 1.0}, {col(VarKind::BuildBattery, b, -1), -inst_.batteries[b].max_power}},
            RowSense::Le, 0.0);
  }
}

void Builder::add_power_flow(int t) {
  const int nbus = static_cast<int>(inst_.buses.size());
  const int slack = inst_.slack_index();
  for (int part = 0; part < 2; ++part) {
    bool real = part == 0;
    for (int i = 0; i < nbus; ++i) {
      std::vector<int> cols;
      std::vector<double> vals;
      for (int d = 0; d < static_cast<int>(inst_.generators.size()); ++d) {
        if (inst_.bus_index(inst_.generators[d].bus) != i) continue;
        cols.push_back(col(real ? VarKind::GenP : VarKind::GenQ, d, t));
        vals.push_back(1.0);
      }
      for (int b = 0; b < static_cast<int>(inst_.batteries.size()); ++b) {
        if (inst_.bus_index(inst_.batteries[b].bus) != i) continue;
        cols.push_back(col(real ? VarKind::BatP : VarKind::BatQ, b, t));
        vals.push_back(1.0);
      }
      cols.push_back(col(real ? VarKind::ShedP : VarKind::ShedQ, i, t));
      vals.push_back(1.0);
      if (inst_.grid_connected && i == slack) {
        cols.push_back(col(real ? VarKind::GridP : VarKind::GridQ, i, t));
        vals.push_back(1.0);
      }
      for (int l = 0; l < static_cast<int>(inst_.lines.size()); ++l) {
        double sign = 0.0;
        if (inst_.line_from(l) == i) sign = -1.0;
        else if (inst_.line_to(l) == i) sign = 1.0;
        else continue;
        cols.push_back(col(real ? VarKind::LineP : VarKind::LineQ, l, t));
        vals.push_back(sign);
      }
      double load = real ? loads_.p(i, t) : loads_.q(i, t);
      add_row({real ? RowFamily::BalanceP : RowFamily::BalanceQ, i, t}, cols, vals, RowSense::Eq, load);
    }
  }
  for (int l = 0; l < static_cast<int>(inst_.lines.size()); ++l) {
    const auto& line = inst_.lines[l];
    double k = 2.0 / inst_.base_mva;
    add_row({RowFamily::VoltageDrop, l, t},
            {{col(VarKind::Voltage, inst_.line_to(l), t), 1.0},
             {col(VarKind::Voltage, inst_.line_from(l), t), -1.0},
             {col(VarKind::LineP, l, t), k * line.r},
             {col(VarKind::LineQ, l, t), k * line.x}},
            RowSense::Eq, 0.0);
  }
  for (int l = 0; l < static_cast<int>(inst_.lines.size()); ++l) {
    m_.balls.push_back({RowFamily::Thermal, l, t});
    m_.program.add_ball({{col(VarKind::LineP, l, t), col(VarKind::LineQ, l, t)}, -1, inst_.lines[l].s_max, 1.0});
  }
}

void Builder::add_unit_commitment(int t) {
  for (int d = 0; d < static_cast<int>(inst_.generators.size()); ++d) {
    const auto& g = inst_.generators[d];
    int x = col(VarKind::Commit, d, t), y = col(VarKind::Start, d, t), w = col(VarKind::Stop, d, t);
    int raw = col(VarKind::GenRaw, d, t), p = col(VarKind::GenP, d, t), q = col(VarKind::GenQ, d, t);
    int z = col(VarKind::BuildGenerator, d, -1);
    add_row({RowFamily::CommitBuilt, d, t}, {{x, 1.0}, {z, -1.0}}, RowSense::Le, 0.0);
    add_row({RowFamily::StartStop, d, t}, {{y, 1.0}, {w, -1.0}, {x, -1.0}, {commit_prev(d, t), 1.0}}, RowSense::Eq, 0.0);
    add_row({RowFamily::StartOrStop, d, t}, {{y, 1.0}, {w, 1.0}}, RowSense::Le, 1.0);
    add_row({RowFamily::GenPLow, d, t}, {{x, g.p_min}, {raw, -1.0}}, RowSense::Le, 0.0);
    add_row({RowFamily::GenPHigh, d, t}, {{raw, 1.0}, {x, -g.p_max}}, RowSense::Le, 0.0);
    add_row({RowFamily::GenQLow, d, t}, {{x, g.q_min}, {q, -1.0}}, RowSense::Le, 0.0);
    add_row({RowFamily::GenQHigh, d, t}, {{q, 1.0}, {x, -g.q_max}}, RowSense::Le, 0.0);
    add_row({RowFamily::GenEfficiency, d, t}, {{p, 1.0}, {raw, -g.efficiency}}, RowSense::Eq, 0.0);
    int pp = power_prev(d, t);
    add_row({RowFamily::RampDown, d, t}, {{pp, 1.0}, {p, -1.0}}, RowSense::Le, g.ramp_down);
    add_row({RowFamily::RampUp, d, t}, {{p, 1.0}, {pp, -1.0}}, RowSense::Le, g.ramp_up);
    std::vector<int> cols;
    std::vector<double> vals;
    for (int k = t - g.up_time + 1; k <= t; ++k) {
      cols.push_back(event_col(true, d, k));
      vals.push_back(1.0);
    }
    cols.push_back(x);
    vals.push_back(-1.0);
    add_row({RowFamily::UpTime, d, t}, cols, vals, RowSense::Le, 0.0);
    cols.clear();
    vals.clear();
    for (int k = t - g.down_time + 1; k <= t; ++k) {
      cols.push_back(event_col(false, d, k));
      vals.push_back(1.0);
    }
    cols.push_back(x);
    vals.push_back(1.0);
    add_row({RowFamily::DownTime, d, t}, cols, vals, RowSense::Le, 1.0);
  }
}

void Builder::add_battery(int t) {
  const double dt = loads_.dt_hours;
  for (int b = 0; b < static_cast<int>(inst_.batteries.size()); ++b) {
    const auto& s = inst_.batteries[b];
    int p = col(VarKind::BatP, b, t), q = col(VarKind::BatQ, b, t), raw = col(VarKind::BatRaw, b, t);
    int sc = col(VarKind::Soc, b, t);
    m_.balls.push_back({RowFamily::BatteryApparent, b, t});
    m_.program.add_ball({{p, q}, col(VarKind::BatteryRating, b, -1), 0.0, 1.0});
    add_row({RowFamily::SocBalance, b, t}, {{sc, 1.0}, {soc_prev(b, t), -1.0}, {raw, dt}}, RowSense::Eq, 0.0);
    add_row({RowFamily::SocCapacity, b, t}, {{sc, 1.0}, {col(VarKind::BuildBattery, b, -1), -s.max_energy}}, RowSense::Le,
            0.0);
    add_row({RowFamily::Discharge, b, t}, {{p, 1.0}, {raw, -s.eta_dis}}, RowSense::Le, 0.0);
    add_row({RowFamily::Charge, b, t}, {{p, 1.0}, {raw, -1.0 / s.eta_ch}}, RowSense::Le, 0.0);
  }
}

void Builder::add_terminal(const std::vector<double>* prices) {
  const int e = w_.end - 1;
  m_.out_slots = state_slots(inst_, true);
  for (const auto& slot : m_.out_slots) {
    int c = -1;
    switch (slot.kind) {
      case StateKind::Soc: c = col(VarKind::Soc, slot.owner, e); break;
      case StateKind::Commit: c = col(VarKind::Commit, slot.owner, e); break;
      case StateKind::Power: c = col(VarKind::GenP, slot.owner, e); break;
      case StateKind::StartHist: c = event_col(true, slot.owner, e - slot.lag); break;
      case StateKind::StopHist: c = event_col(false, slot.owner, e - slot.lag); break;
      case StateKind::BuildBattery: c = col(VarKind::BuildBattery, slot.owner, -1); break;
      case StateKind::BatteryRating: c = col(VarKind::BatteryRating, slot.owner, -1); break;
      case StateKind::BuildGenerator: c = col(VarKind::BuildGenerator, slot.owner, -1); break;
    }
    m_.out_cols.push_back(c);
  }
  if (prices) {
    if (w_.last) throw std::invalid_argument("assemble: the last window takes no terminal prices");
    if (prices->size() != m_.out_slots.size()) {
      throw std::invalid_argument("assemble: price vector has " + std::to_string(prices->size()) + " entries, expected " +
                                  std::to_string(m_.out_slots.size()));
    }
    m_.prices = *prices;
    for (std::size_t k = 0; k < prices->size(); ++k) {
      if (!std::isfinite((*prices)[k])) throw std::invalid_argument("assemble: non-finite price");
      m_.program.linear[m_.out_cols[k]] += (*prices)[k];
    }
  }
}

MdopModel Builder::build(const std::vector<double>* prices) {
  if (w_.start < 0 || w_.end <= w_.start || w_.end > loads_.horizon) {
    throw std::invalid_argument("assemble: window [" + std::to_string(w_.start) + ", " + std::to_string(w_.end) +
                                ") outside the load horizon " + std::to_string(loads_.horizon));
  }
  if (loads_.p_mw.size() != inst_.buses.size()) throw std::invalid_argument("assemble: load profile bus count mismatch");
  if (boundary_.soc.size() != inst_.batteries.size() || boundary_.commit.size() != inst_.generators.size() ||
      boundary_.power.size() != inst_.generators.size()) {
    throw std::invalid_argument("assemble: boundary state does not match the instance");
  }
  for (std::size_t d = 0; d < inst_.generators.size(); ++d) {
    std::size_t need = inst_.generators[d].history_depth();
    if (boundary_.start_hist.at(d).size() < need || boundary_.stop_hist.at(d).size() < need) {
      throw std::invalid_argument("assemble: boundary history of generator '" + inst_.generators[d].id +
                                  "' is shorter than " + std::to_string(need) + " steps");
    }
  }
  if (!w_.owns_builds && !boundary_.builds) throw std::invalid_argument("assemble: window needs inherited builds");

  add_columns();
  add_coupling();
  add_resource_limits();
  for (int t = w_.start; t < w_.end; ++t) {
    add_power_flow(t);
    add_unit_commitment(t);
    add_battery(t);
  }
  add_terminal(prices);

  if (w_.owns_builds) {
    for (int b = 0; b < static_cast<int>(inst_.batteries.size()); ++b) {
      Implication imp{col(VarKind::BuildBattery, b, -1), {col(VarKind::BatteryRating, b, -1)}};
      for (int t = w_.start; t < w_.end; ++t) imp.cols.push_back(col(VarKind::Soc, b, t));
      m_.implications.push_back(std::move(imp));
    }
    for (int d = 0; d < static_cast<int>(inst_.generators.size()); ++d) {
      Implication imp{col(VarKind::BuildGenerator, d, -1), {}};
      for (int t = w_.start; t < w_.end; ++t) imp.cols.push_back(col(VarKind::Commit, d, t));
      m_.implications.push_back(std::move(imp));
    }
  }
  m_.program.certify_convex();
  return std::move(m_);
}

}  // namespace

MdopModel assemble(const NetworkInstance& inst, const LoadProfile& loads, const Window& window,
                   const BoundaryState& boundary, const std::vector<double>* prices) {
  Builder b(inst, loads, window, boundary);
  return b.build(prices);
}

MdopModel assemble_monolith(const NetworkInstance& inst, const LoadProfile& loads) {
  return assemble(inst, loads, Window{0, loads.horizon, true, true}, BoundaryState::initial(inst));
}

ObjectiveTerms objective_terms(const NetworkInstance& inst, const MdopModel& model, std::span<const double> x) {
  ObjectiveTerms o;
  for (const auto& v : model.vars) {
    double lin = 0, quad = 0;
    switch (v.kind) {
      case VarKind::BuildBattery:
        if (model.window.owns_builds) o.build += inst.batteries[v.owner].fixed_cost * x[v.col];
        break;
      case VarKind::BatteryRating:
        if (model.window.owns_builds) o.build += inst.batteries[v.owner].capacity_cost * x[v.col];
        break;
      case VarKind::BuildGenerator:
        if (model.window.owns_builds) o.build += inst.generators[v.owner].fixed_cost * x[v.col];
        break;
      case VarKind::Commit: o.generation += inst.generators[v.owner].c0 * x[v.col]; break;
      case VarKind::GenRaw:
        lin = inst.generators[v.owner].c1;
        quad = inst.generators[v.owner].c2;
        o.generation += lin * x[v.col] + quad * x[v.col] * x[v.col];
        break;
      case VarKind::ShedP:
      case VarKind::ShedQ: o.shed += inst.shed_penalty * x[v.col]; break;
      default: break;
    }
  }
  return o;
}

CoupledModel assemble_coupled(const NetworkInstance& inst, const LoadProfile& loads, const std::vector<Window>& windows) {
  if (windows.empty()) throw std::invalid_argument("assemble_coupled: no windows");
  CoupledModel cm;
  BoundaryState placeholder = BoundaryState::initial(inst);
  placeholder.builds = BuildDecision{std::vector<double>(inst.batteries.size(), 0.0),
                                     std::vector<double>(inst.batteries.size(), 0.0),
                                     std::vector<double>(inst.generators.size(), 0.0)};
  for (std::size_t s = 0; s < windows.size(); ++s) {
    cm.stages.push_back(assemble(inst, loads, windows[s], s == 0 ? BoundaryState::initial(inst) : placeholder));
  }
  MdopModel& m = cm.model;
  m.window = Window{windows.front().start, windows.back().end, true, true};
  for (std::size_t s = 0; s < cm.stages.size(); ++s) {
    const MdopModel& st = cm.stages[s];
    const int off = m.program.num_vars();
    cm.col_offset.push_back(off);
    cm.row_offset.push_back(m.program.num_rows());
    cm.ball_offset.push_back(m.program.num_balls());
    const ConvexProgram& p = st.program;
    for (int j = 0; j < p.num_vars(); ++j) {
      m.program.add_var(p.lower[j], p.upper[j], p.quad[j], p.linear[j]);
      VarRef v = st.vars[j];
      v.col = off + j;
      m.vars.push_back(v);
      m.index.emplace(std::make_tuple(static_cast<int>(v.kind), v.owner, v.time), v.col);
    }
    std::vector<int> coupling(st.in_rows.size(), -1);
    std::vector<int> slot_of_row(p.num_rows(), -1);
    for (std::size_t k = 0; k < st.in_rows.size(); ++k) slot_of_row[st.in_rows[k]] = static_cast<int>(k);
    for (int r = 0; r < p.num_rows(); ++r) {
      std::vector<int> cols;
      std::vector<double> vals;
      for (int k = p.row_start[r]; k < p.row_start[r + 1]; ++k) {
        cols.push_back(off + p.row_col[k]);
        vals.push_back(p.row_val[k]);
      }
      double rhs = p.rhs[r];
      int slot = slot_of_row[r];
      if (slot >= 0 && s > 0) {
        const MdopModel& prev = cm.stages[s - 1];
        if (!(prev.out_slots[slot] == st.in_slots[slot])) throw std::logic_error("coupling slot order mismatch");
        cols.push_back(cm.col_offset[s - 1] + prev.out_cols[slot]);
        vals.push_back(-1.0);
        rhs = 0.0;
      }
      int nr = m.program.add_row(cols, vals, p.sense[r], rhs);
      m.rows.push_back(st.rows[r]);
      if (slot >= 0) coupling[slot] = nr;
    }
    for (int b = 0; b < p.num_balls(); ++b) {
      NormBall ball = p.balls[b];
      for (int& c : ball.cols) c += off;
      if (ball.radius_col >= 0) ball.radius_col += off;
      m.program.add_ball(ball);
      m.balls.push_back(st.balls[b]);
    }
    for (int c : st.binaries) m.binaries.push_back(off + c);
    for (const auto& imp : st.implications) {
      Implication o{off + imp.trigger, {}};
      for (int c : imp.cols) o.cols.push_back(off + c);
      m.implications.push_back(std::move(o));
    }
    cm.coupling_rows.push_back(std::move(coupling));
  }
  const MdopModel& first = cm.stages.front();
  m.in_slots = first.in_slots;
  for (std::size_t k = 0; k < first.in_rows.size(); ++k) {
    m.in_rows.push_back(cm.row_offset[0] + first.in_rows[k]);
    m.in_cols.push_back(first.in_cols[k]);
  }
  const MdopModel& lastm = cm.stages.back();
  m.out_slots = lastm.out_slots;
  for (int c : lastm.out_cols) m.out_cols.push_back(cm.col_offset.back() + c);
  return cm;
}

MdopModel relax_integrality(const MdopModel& model) {
  MdopModel out = model;
  out.binaries.clear();
  return out;
}

MdopModel fix_binaries(const MdopModel& model, const std::vector<double>& values) {
  if (values.size() != model.binaries.size()) {
    throw std::invalid_argument("fix_binaries: expected " + std::to_string(model.binaries.size()) + " values, got " +
                                std::to_string(values.size()));
  }
  MdopModel out = model;
  for (std::size_t k = 0; k < values.size(); ++k) {
    double v = values[k];
    if (v != 0.0 && v != 1.0) throw std::invalid_argument("fix_binaries: value " + std::to_string(v) + " is not 0 or 1");
    int c = model.binaries[k];
    out.program.lower[c] = v;
    out.program.upper[c] = v;
  }
  out.binaries.clear();
  return out;
}

BoundaryState terminal_state(const NetworkInstance& inst, const MdopModel& model, std::span<const double> x) {
  BoundaryState b = BoundaryState::initial(inst);
  b.builds = BuildDecision{std::vector<double>(inst.batteries.size()), std::vector<double>(inst.batteries.size()),
                           std::vector<double>(inst.generators.size())};
  for (std::size_t k = 0; k < model.out_slots.size(); ++k) {
    const StateSlot& s = model.out_slots[k];
    double v = x[model.out_cols[k]];
    switch (s.kind) {
      case StateKind::Soc: b.soc[s.owner] = v; break;
      case StateKind::Commit: b.commit[s.owner] = v; break;
      case StateKind::Power: b.power[s.owner] = v; break;
      case StateKind::StartHist: b.start_hist[s.owner][s.lag] = v; break;
      case StateKind::StopHist: b.stop_hist[s.owner][s.lag] = v; break;
      case StateKind::BuildBattery: b.builds->battery[s.owner] = v; break;
      case StateKind::BatteryRating: b.builds->rating[s.owner] = v; break;
      case StateKind::BuildGenerator: b.builds->generator[s.owner] = v; break;
    }
  }
  return b;
}

ModelCounts expected_counts(const NetworkInstance& inst, const Window& w) {
  const int nb = static_cast<int>(inst.batteries.size());
  const int nd = static_cast<int>(inst.generators.size());
  const int nn = static_cast<int>(inst.buses.size());
  const int nl = static_cast<int>(inst.lines.size());
  const int K = w.length();
  int hist = 0;
  for (const auto& g : inst.generators) hist += 2 * g.history_depth();
  int sites = 0;
  for (int i = 0; i < nn; ++i) {
    bool hb = false, hd = false;
    for (const auto& b : inst.batteries) hb |= inst.bus_index(b.bus) == i;
    for (const auto& g : inst.generators) hd |= inst.bus_index(g.bus) == i;
    sites += hb + hd;
  }
  ModelCounts c;
  c.columns = 2 * nb + nd + (nb + 2 * nd + hist) + K * (6 * nd + 4 * nb + 3 * nn + 2 * nl + (inst.grid_connected ? 2 : 0));
  c.rows = (nb + 2 * nd + hist) + (w.owns_builds ? 0 : 2 * nb + nd) + sites + nb + K * (2 * nn + nl + 12 * nd + 4 * nb);
  c.balls = K * (nl + nb);
  c.binaries = (w.owns_builds ? nb + nd : 0) + 3 * nd * K;
  return c;
}

void write_model(const MdopModel& model, std::ostream& out) {
  const ConvexProgram& p = model.program;
  out.precision(17);
  out << "mdop-model 1\n";
  out << "vars " << p.num_vars() << "\n";
  for (int j = 0; j < p.num_vars(); ++j) {
    const VarRef& v = model.vars[j];
    out << "v " << p.lower[j] << " " << p.upper[j] << " " << p.quad[j] << " " << p.linear[j] << " " << to_string(v.kind)
        << "/" << v.owner << "/" << v.time << "\n";
  }
  out << "const " << p.constant << "\n";
  out << "binaries " << model.binaries.size();
  for (int c : model.binaries) out << " " << c;
  out << "\n";
  out << "rows " << p.num_rows() << "\n";
  for (int r = 0; r < p.num_rows(); ++r) {
    char s = p.sense[r] == RowSense::Le ? 'L' : (p.sense[r] == RowSense::Ge ? 'G' : 'E');
    out << "r " << s << " " << p.rhs[r];
    for (int k = p.row_start[r]; k < p.row_start[r + 1]; ++k) out << " " << p.row_col[k] << ":" << p.row_val[k];
    out << "\n";
  }
  out << "balls " << p.num_balls() << "\n";
  for (const auto& b : p.balls) {
    if (b.radius_col >= 0) out << "b var " << b.radius_col << " " << b.radius_scale;
    else out << "b const " << b.radius;
    out << " cols";
    for (int c : b.cols) out << " " << c;
    out << "\n";
  }
}

}  // namespace mdop
