// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "mdop/instance.hpp"

namespace mdop {

double LoadProfile::total_p(int t) const {
  double s = 0;
  for (const auto& series : p_mw) s += series[t];
  return s;
}

LoadProfile LoadProfile::slice(int start, int len) const {
  LoadProfile out;
  out.horizon = len;
  out.dt_hours = dt_hours;
  out.p_mw.resize(p_mw.size());
  out.q_mvar.resize(q_mvar.size());
  for (std::size_t i = 0; i < p_mw.size(); ++i) {
    out.p_mw[i].assign(p_mw[i].begin() + start, p_mw[i].begin() + start + len);
    out.q_mvar[i].assign(q_mvar[i].begin() + start, q_mvar[i].begin() + start + len);
  }
  return out;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) {
    auto b = cell.find_first_not_of(" \t\r");
    auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  return out;
}

double to_double(const std::string& s, const std::string& where) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw InstanceError(where + ": expected a finite number, got '" + s + "'");
  }
}

}  // namespace

LoadProfile parse_loads(const std::filesystem::path& csv, const NetworkInstance& inst, double dt_hours) {
  if (!(dt_hours > 0)) throw InstanceError(csv.string() + ": dt must be positive");
  std::ifstream in(csv);
  if (!in) throw InstanceError(csv.string() + ": cannot open file");
  const std::string file = csv.filename().string();

  LoadProfile prof;
  prof.dt_hours = dt_hours;
  const std::size_t nb = inst.buses.size();
  prof.p_mw.assign(nb, {});
  prof.q_mvar.assign(nb, {});

  std::string line;
  int lineno = 0;
  bool header_seen = false;
  // bus -> step -> (p, q)
  std::map<int, std::map<long, std::pair<double, double>>> rows;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto cells = split_csv(line);
    std::string where = file + ":" + std::to_string(lineno);
    if (!header_seen) {
      if (cells != std::vector<std::string>{"step", "bus", "p_mw", "q_mvar"}) {
        throw InstanceError(where + ": expected header 'step,bus,p_mw,q_mvar'");
      }
      header_seen = true;
      continue;
    }
    if (cells.size() != 4) throw InstanceError(where + ": expected 4 columns");
    double stepd = to_double(cells[0], where + ".step");
    if (stepd != std::floor(stepd)) throw InstanceError(where + ".step: not an integer");
    long step = static_cast<long>(stepd);
    if (step < 0) throw InstanceError(where + ".step: negative step index " + cells[0]);
    int bus = inst.bus_index(cells[1]);
    if (bus < 0) throw InstanceError(where + ".bus: unknown bus '" + cells[1] + "'");
    double p = to_double(cells[2], where + ".p_mw");
    double q = to_double(cells[3], where + ".q_mvar");
    if (!rows[bus].emplace(step, std::make_pair(p, q)).second) {
      throw InstanceError(where + ": duplicate entry for bus '" + cells[1] + "' step " + cells[0]);
    }
  }

  if (rows.empty()) {
    prof.horizon = 0;
    prof.warnings.push_back(file + ": no load rows; profile has length 0");
    return prof;
  }

  long length = -1;
  std::string first_bus;
  for (const auto& [bus, series] : rows) {
    long n = static_cast<long>(series.size());
    if (series.rbegin()->first != n - 1) {
      throw InstanceError(file + ": bus '" + inst.buses[bus].id + "' has gaps in its step sequence");
    }
    if (length < 0) {
      length = n;
      first_bus = inst.buses[bus].id;
    } else if (n != length) {
      throw InstanceError(file + ": non-uniform series lengths (bus '" + first_bus + "' has " +
                          std::to_string(length) + " steps, bus '" + inst.buses[bus].id + "' has " +
                          std::to_string(n) + ")");
    }
  }
  prof.horizon = static_cast<int>(length);
  for (std::size_t i = 0; i < nb; ++i) {
    prof.p_mw[i].assign(prof.horizon, 0.0);
    prof.q_mvar[i].assign(prof.horizon, 0.0);
  }
  for (const auto& [bus, series] : rows) {
    for (const auto& [step, pq] : series) {
      prof.p_mw[bus][step] = pq.first;
      prof.q_mvar[bus][step] = pq.second;
    }
  }
  return prof;
}

void write_loads(const LoadProfile& loads, const NetworkInstance& inst, const std::filesystem::path& csv) {
  std::ofstream out(csv);
  if (!out) throw InstanceError(csv.string() + ": cannot write file");
  out << "step,bus,p_mw,q_mvar\n";
  out.precision(17);
  // Buses with an all-zero series are omitted; they parse back as zero load.
  std::vector<bool> keep(inst.buses.size(), false);
  for (std::size_t i = 0; i < inst.buses.size(); ++i) {
    for (int t = 0; t < loads.horizon; ++t) {
      if (loads.p_mw[i][t] != 0.0 || loads.q_mvar[i][t] != 0.0) keep[i] = true;
    }
  }
  for (int t = 0; t < loads.horizon; ++t) {
    for (std::size_t i = 0; i < inst.buses.size(); ++i) {
      if (!keep[i]) continue;
      out << t << "," << inst.buses[i].id << "," << loads.p_mw[i][t] << "," << loads.q_mvar[i][t] << "\n";
    }
  }
}

double diurnal_shape(double hour) { return std::cos(2.0 * std::numbers::pi * (hour - 13.0) / 24.0); }

LoadProfile synth_load(const NetworkInstance& inst, const SynthSpec& spec) {
  if (spec.days < 1) throw InstanceError("synth_load: days must be >= 1");
  if (!(spec.dt_hours > 0)) throw InstanceError("synth_load: dt must be positive");
  if (spec.daily_amplitude < 0 || spec.noise_amplitude < 0) {
    throw InstanceError("synth_load: amplitudes must be nonnegative");
  }
  const std::size_t nb = inst.buses.size();
  if (!spec.base_mw.empty() && spec.base_mw.size() != nb) {
    throw InstanceError("synth_load: base vector length does not match bus count");
  }
  LoadProfile prof;
  prof.dt_hours = spec.dt_hours;
  prof.horizon = static_cast<int>(std::lround(spec.days * 24.0 / spec.dt_hours));
  prof.p_mw.assign(nb, std::vector<double>(prof.horizon, 0.0));
  prof.q_mvar.assign(nb, std::vector<double>(prof.horizon, 0.0));

  // mt19937_64 output is fixed by the standard; the [0,1) mapping is done by
  // hand so the series does not depend on the library's distributions.
  std::mt19937_64 rng(spec.seed);
  auto uniform = [&rng]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  for (int t = 0; t < prof.horizon; ++t) {
    double hour = std::fmod(t * spec.dt_hours, 24.0);
    double shape = diurnal_shape(hour);
    for (std::size_t i = 0; i < nb; ++i) {
      double base = spec.base_mw.empty() ? inst.buses[i].nominal_p_mw : spec.base_mw[i];
      double noise = 2.0 * uniform() - 1.0;
      if (base == 0.0) continue;
      double p = base * (1.0 + spec.daily_amplitude * shape + spec.noise_amplitude * noise);
      p = std::max(p, 0.0);
      prof.p_mw[i][t] = p;
      prof.q_mvar[i][t] = kSynthReactiveRatio * p;
    }
  }
  return prof;
}

}  // namespace mdop
