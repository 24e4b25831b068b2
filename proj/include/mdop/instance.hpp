// SPDX-License-Identifier: Apache-2.0
//
// Planning instance: network, resource catalog, load profiles.

#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace mdop {

/// Raised for any problem reading or validating instance data. The message
/// carries the file and field location, e.g. "network.json: lines[2].from".
class InstanceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Bus {
  std::string id;
  double v_min = 0.9025;  // squared voltage, pu^2
  double v_max = 1.1025;
  int max_batteries = 0;   // h_b(i)
  int max_generators = 0;  // h_d(i)
  // Nominal demand used as the per-bus base of synthetic profiles.
  double nominal_p_mw = 0.0;
  double nominal_q_mvar = 0.0;

  bool operator==(const Bus&) const = default;
};

struct Line {
  std::string id;
  std::string from_bus;
  std::string to_bus;
  double r = 0.0;  // per-unit on base_mva
  double x = 0.0;
  double s_max = 1.0;  // MVA

  bool operator==(const Line&) const = default;
};

struct BatterySpec {
  std::string id;
  std::string bus;
  double fixed_cost = 0.0;     // f_b, $
  double capacity_cost = 0.0;  // g_b, $/MVA
  double max_power = 1.0;      // m_b, MVA
  double max_energy = 1.0;     // sc_bar_b, MWh
  double eta_ch = 1.0;
  double eta_dis = 1.0;
  double initial_soc = 0.0;  // MWh
  double p_min = 0.0;  // MW, defaults to -max_power when parsed without it
  double p_max = 0.0;
  double q_min = 0.0;
  double q_max = 0.0;

  bool operator==(const BatterySpec&) const = default;
};

struct GeneratorSpec {
  std::string id;
  std::string bus;
  double fixed_cost = 0.0;  // f_d
  double c0 = 0.0;          // no-load cost per step
  double c1 = 0.0;          // $ per MW of raw output per step
  double c2 = 0.0;          // $ per MW^2 of raw output per step
  int up_time = 1;          // steps
  int down_time = 1;
  double ramp_up = 1e9;  // MW of delivered power per step
  double ramp_down = 1e9;
  double efficiency = 1.0;  // eta_d
  double p_min = 0.0;       // raw output limits, MW
  double p_max = 0.0;
  double q_min = 0.0;
  double q_max = 0.0;
  bool initially_on = false;
  double initial_power = 0.0;  // delivered MW before the horizon

  int history_depth() const { return up_time > down_time ? up_time : down_time; }

  bool operator==(const GeneratorSpec&) const = default;
};

struct NetworkInstance {
  static constexpr int kFormatVersion = 1;

  std::string name;
  std::vector<Bus> buses;
  std::vector<Line> lines;
  std::vector<BatterySpec> batteries;
  std::vector<GeneratorSpec> generators;
  double shed_penalty = 1e7;  // mu, $/MW
  double dt_hours = 0.25;
  double base_mva = 1.0;
  std::string slack_bus;  // feeder head; empty means the first bus
  bool grid_connected = false;

  int bus_index(const std::string& id) const;  // -1 when absent
  int slack_index() const;
  int line_from(int line) const { return bus_index(lines[line].from_bus); }
  int line_to(int line) const { return bus_index(lines[line].to_bus); }

  bool operator==(const NetworkInstance&) const = default;
};

/// Per-bus demand series, index-aligned with NetworkInstance::buses.
struct LoadProfile {
  int horizon = 0;
  double dt_hours = 0.25;
  std::vector<std::vector<double>> p_mw;
  std::vector<std::vector<double>> q_mvar;
  std::vector<std::string> warnings;

  double p(int bus, int t) const { return p_mw[bus][t]; }
  double q(int bus, int t) const { return q_mvar[bus][t]; }
  double total_p(int t) const;
  /// Sub-profile covering steps [start, start+len).
  LoadProfile slice(int start, int len) const;
};

struct RadialReport {
  bool radial = true;
  bool connected = true;
  std::vector<std::string> cycle;  // bus ids along one cycle, when found
  std::string message;
};

/// Reads `<dir>/network.json`. Throws InstanceError on any malformed or
/// inconsistent data.
NetworkInstance parse_instance(const std::filesystem::path& dir);
/// Validates an in-memory instance with the same rules parse_instance uses.
void validate_instance(const NetworkInstance& inst, const std::string& where = "network.json");
void write_instance(const NetworkInstance& inst, const std::filesystem::path& dir);

/// CSV with header `step,bus,p_mw,q_mvar`.
LoadProfile parse_loads(const std::filesystem::path& csv, const NetworkInstance& inst, double dt_hours);
void write_loads(const LoadProfile& loads, const NetworkInstance& inst, const std::filesystem::path& csv);

struct SynthSpec {
  int days = 1;
  double dt_hours = 0.25;
  std::vector<double> base_mw;  // per bus; empty uses Bus::nominal_p_mw
  double daily_amplitude = 0.0;
  double noise_amplitude = 0.0;
  std::uint64_t seed = 1;
};

inline constexpr double kSynthReactiveRatio = 0.3;

/// Synthetic demand: base * (1 + daily * diurnal(t) + noise * u(t)), with a
/// 24h cosine peaking at 13:00 and u uniform on [-1, 1], clipped at zero.
LoadProfile synth_load(const NetworkInstance& inst, const SynthSpec& spec);

/// Diurnal shape in [-1, 1] at hour-of-day h.
double diurnal_shape(double hour);

RadialReport validate_radial(const NetworkInstance& inst);

}  // namespace mdop
