// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <fstream>

#include "mdop/harness.hpp"

namespace mdop {

namespace {

Bus make_bus(std::string id, int batteries, int generators, double p_kw = 0, double q_kvar = 0) {
  Bus b;
  b.id = std::move(id);
  b.max_batteries = batteries;
  b.max_generators = generators;
  b.nominal_p_mw = p_kw / 1000.0;
  b.nominal_q_mvar = q_kvar / 1000.0;
  return b;
}

GeneratorSpec make_diesel(std::string id, std::string bus, double f, double c0, double c1, double c2, double p_max,
                          int up_down, double ramp) {
  GeneratorSpec g;
  g.id = std::move(id);
  g.bus = std::move(bus);
  g.fixed_cost = f;
  g.c0 = c0;
  g.c1 = c1;
  g.c2 = c2;
  g.up_time = g.down_time = up_down;
  g.ramp_up = g.ramp_down = ramp;
  g.efficiency = 0.5;
  g.p_min = 0.2 * p_max;
  g.p_max = p_max;
  g.q_max = 0.75 * g.efficiency * p_max;
  g.q_min = -g.q_max;
  return g;
}

BatterySpec make_battery(std::string id, std::string bus, double max_power, double max_energy) {
  BatterySpec b;
  b.id = std::move(id);
  b.bus = std::move(bus);
  b.fixed_cost = 100.0;
  b.capacity_cost = 300.0;
  b.max_power = max_power;
  b.max_energy = max_energy;
  b.eta_ch = 0.8;
  b.eta_dis = 0.7;
  b.p_min = b.q_min = -max_power;
  b.p_max = b.q_max = max_power;
  return b;
}

}  // namespace

NetworkInstance micro2_instance() {
  NetworkInstance n;
  n.name = "micro2";
  n.base_mva = 1.0;
  n.dt_hours = 1.0;
  n.shed_penalty = 1e7;
  n.slack_bus = "b1";
  n.buses = {make_bus("b1", 0, 1), make_bus("b2", 1, 0, 500, 150)};
  n.lines = {Line{"l12", "b1", "b2", 0.01, 0.02, 2.0}};
  n.generators = {make_diesel("g1", "b1", 200, 6, 35, 50, 2.0, 2, 0.5)};
  n.batteries = {make_battery("e1", "b2", 1.0, 2.0)};
  return n;
}

LoadProfile micro2_loads(const NetworkInstance& inst, int steps) {
  // Every step stays above the diesel minimum (0.2 MW delivered) and no drop
  // exceeds its ramp (0.5 MW), so myopic stage solves can always follow the load.
  static constexpr double kShape[] = {0.3, 0.25, 0.7, 0.95, 0.5, 0.25, 0.8, 0.35};
  if (steps < 1 || steps > 8) throw std::invalid_argument("micro2 variants have 1 to 8 steps");
  LoadProfile lp;
  lp.horizon = steps;
  lp.dt_hours = inst.dt_hours;
  lp.p_mw.assign(inst.buses.size(), std::vector<double>(steps, 0.0));
  lp.q_mvar = lp.p_mw;
  const int b2 = inst.bus_index("b2");
  for (int t = 0; t < steps; ++t) {
    lp.p_mw[b2][t] = kShape[t];
    lp.q_mvar[b2][t] = kSynthReactiveRatio * kShape[t];
  }
  return lp;
}

// Positive-sequence reduction of the 13-node test feeder on a 1 MVA,
// 4.16 kV base. The distributed load on 632-671 is split between its ends,
// shunt capacitors and the regulator are omitted, and node 670 is merged.
NetworkInstance ieee13_instance() {
  NetworkInstance n;
  n.name = "ieee13";
  n.base_mva = 1.0;
  n.dt_hours = 0.25;
  n.shed_penalty = 1e7;
  n.slack_bus = "650";
  n.buses = {make_bus("650", 0, 1),
             make_bus("632", 0, 0, 100, 58),
             make_bus("633", 0, 0),
             make_bus("634", 1, 0, 400, 290),
             make_bus("645", 0, 0, 170, 125),
             make_bus("646", 0, 0, 230, 132),
             make_bus("671", 0, 1, 1255, 718),
             make_bus("680", 1, 0),
             make_bus("684", 0, 0),
             make_bus("611", 1, 0, 170, 80),
             make_bus("652", 0, 0, 128, 86),
             make_bus("692", 0, 0, 170, 151),
             make_bus("675", 0, 1, 843, 462)};
  for (auto& b : n.buses) {
    b.v_min = 0.81;
    b.v_max = 1.21;
  }
  // ohm per mile, positive sequence, by overhead/cable configuration.
  struct Config {
    double r, x;
  };
  const Config c601{0.187, 0.592}, c602{0.595, 0.760}, c603{1.120, 0.888}, c605{1.329, 1.348}, c606{0.490, 0.260},
      c607{1.343, 0.512};
  const double z_base = 4.16 * 4.16 / n.base_mva;
  auto segment = [&](std::string from, std::string to, double feet, Config c, double s_max) {
    double miles = feet / 5280.0;
    return Line{from + "-" + to, from, to, c.r * miles / z_base, c.x * miles / z_base, s_max};
  };
  n.lines = {segment("650", "632", 2000, c601, 5.0), segment("632", "633", 500, c602, 2.0),
             Line{"633-634", "633", "634", 0.022, 0.04, 2.0},  // 500 kVA transformer, 1.1 + j2 % on its rating
             segment("632", "645", 500, c603, 2.0),       segment("645", "646", 300, c603, 2.0),
             segment("632", "671", 2000, c601, 5.0),      segment("671", "680", 1000, c601, 2.0),
             segment("671", "684", 300, c603, 2.0),       segment("684", "611", 300, c605, 2.0),
             segment("684", "652", 800, c607, 2.0),       Line{"671-692", "671", "692", 1e-4, 1e-4, 5.0},
             segment("692", "675", 500, c606, 2.0)};
  n.generators = {make_diesel("dA", "650", 200, 6, 35, 50, 4.0, 4, 1.0),
                  make_diesel("dB", "671", 300, 3, 10, 20, 5.0, 4, 1.0),
                  make_diesel("dC", "675", 350, 2, 5, 10, 5.0, 4, 1.0)};
  n.batteries = {make_battery("e634", "634", 1.5, 4.0), make_battery("e680", "680", 1.5, 4.0),
                 make_battery("e611", "611", 1.5, 4.0)};
  return n;
}

SynthPreset parse_synth(const std::string& text) {
  if (text == "slow") return {"slow", 0.6, 0.02};
  if (text == "fast") return {"fast", 0.15, 0.25};
  SynthPreset p{text, -1.0, -1.0};
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t comma = text.find(',', pos);
    std::string item = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    std::size_t eq = item.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("synthetic profile '" + text + "': expected key=value");
    std::string key = item.substr(0, eq), val = item.substr(eq + 1);
    double v;
    try {
      std::size_t used = 0;
      v = std::stod(val, &used);
      if (used != val.size()) throw std::invalid_argument(val);
    } catch (const std::exception&) {
      throw std::invalid_argument("synthetic profile '" + text + "': bad number '" + val + "'");
    }
    if (key == "daily") p.daily_amplitude = v;
    else if (key == "noise") p.noise_amplitude = v;
    else throw std::invalid_argument("synthetic profile '" + text + "': unknown key '" + key + "'");
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (p.daily_amplitude < 0 || p.noise_amplitude < 0) {
    throw std::invalid_argument("synthetic profile '" + text + "': needs nonnegative daily= and noise=");
  }
  return p;
}

void gen_corpus(const std::filesystem::path& out_dir, std::uint64_t seed) {
  namespace fs = std::filesystem;
  NetworkInstance micro = micro2_instance();
  fs::path mdir = out_dir / "micro2";
  write_instance(micro, mdir);
  for (int steps : kMicro2Steps) {
    write_loads(micro2_loads(micro, steps), micro, mdir / ("loads_T" + std::to_string(steps) + ".csv"));
  }
  NetworkInstance feeder = ieee13_instance();
  fs::path fdir = out_dir / "ieee13";
  write_instance(feeder, fdir);
  for (const char* name : {"slow", "fast"}) {
    SynthPreset p = parse_synth(name);
    for (int days : {1, 7}) {
      SynthSpec spec;
      spec.days = days;
      spec.dt_hours = feeder.dt_hours;
      spec.daily_amplitude = p.daily_amplitude;
      spec.noise_amplitude = p.noise_amplitude;
      spec.seed = seed;
      write_loads(synth_load(feeder, spec), feeder,
                  fdir / ("loads_" + std::string(name) + "_" + std::to_string(days) + "d.csv"));
    }
  }
}

}  // namespace mdop
