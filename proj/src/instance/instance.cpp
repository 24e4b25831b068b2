// SPDX-License-Identifier: Apache-2.0

#include "mdop/instance.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

namespace mdop {

using nlohmann::json;

int NetworkInstance::bus_index(const std::string& id) const {
  for (std::size_t i = 0; i < buses.size(); ++i) {
    if (buses[i].id == id) return static_cast<int>(i);
  }
  return -1;
}

int NetworkInstance::slack_index() const {
  if (buses.empty()) return -1;
  if (slack_bus.empty()) return 0;
  return bus_index(slack_bus);
}

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw InstanceError(where + ": " + what);
}

std::string loc(const std::string& file, const std::string& arr, std::size_t i, const std::string& field) {
  std::ostringstream os;
  os << file << ": " << arr << "[" << i << "]";
  if (!field.empty()) os << "." << field;
  return os.str();
}

double get_number(const json& obj, const std::string& key, const std::string& where, bool required,
                  double fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    if (required) fail(where + "." + key, "missing field");
    return fallback;
  }
  if (!it->is_number()) fail(where + "." + key, "expected a number");
  double v = it->get<double>();
  if (!std::isfinite(v)) fail(where + "." + key, "value is not finite");
  return v;
}

int get_int(const json& obj, const std::string& key, const std::string& where, bool required, int fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    if (required) fail(where + "." + key, "missing field");
    return fallback;
  }
  if (!it->is_number_integer()) fail(where + "." + key, "expected an integer");
  return it->get<int>();
}

std::string get_string(const json& obj, const std::string& key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(where + "." + key, "missing field");
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number_integer()) return std::to_string(it->get<long long>());
  fail(where + "." + key, "expected a string");
}

const json& get_array(const json& root, const std::string& key, const std::string& file) {
  auto it = root.find(key);
  if (it == root.end()) fail(file + ": " + key, "missing field");
  if (!it->is_array()) fail(file + ": " + key, "expected an array");
  return *it;
}

}  // namespace

void validate_instance(const NetworkInstance& inst, const std::string& file) {
  std::set<std::string> ids;
  for (std::size_t i = 0; i < inst.buses.size(); ++i) {
    const Bus& b = inst.buses[i];
    if (b.id.empty()) fail(loc(file, "buses", i, "id"), "empty id");
    if (!ids.insert(b.id).second) fail(loc(file, "buses", i, "id"), "duplicate bus id '" + b.id + "'");
    if (b.v_min > b.v_max) fail(loc(file, "buses", i, "v_min"), "v_min exceeds v_max");
    if (b.max_batteries < 0) fail(loc(file, "buses", i, "max_batteries"), "negative count");
    if (b.max_generators < 0) fail(loc(file, "buses", i, "max_generators"), "negative count");
  }
  if (inst.buses.empty()) fail(file + ": buses", "instance has no buses");
  if (!inst.slack_bus.empty() && inst.bus_index(inst.slack_bus) < 0) {
    fail(file + ": slack_bus", "unknown bus '" + inst.slack_bus + "'");
  }
  if (!(inst.dt_hours > 0)) fail(file + ": dt_hours", "must be positive");
  if (!(inst.base_mva > 0)) fail(file + ": base_mva", "must be positive");
  if (inst.shed_penalty < 0) fail(file + ": shed_penalty", "must be nonnegative");

  for (std::size_t i = 0; i < inst.lines.size(); ++i) {
    const Line& l = inst.lines[i];
    if (inst.bus_index(l.from_bus) < 0) {
      fail(loc(file, "lines", i, "from"), "line '" + l.id + "' references unknown bus '" + l.from_bus + "'");
    }
    if (inst.bus_index(l.to_bus) < 0) {
      fail(loc(file, "lines", i, "to"), "line '" + l.id + "' references unknown bus '" + l.to_bus + "'");
    }
    if (l.from_bus == l.to_bus) fail(loc(file, "lines", i, "to"), "line '" + l.id + "' is a self-loop");
    if (l.r < 0) fail(loc(file, "lines", i, "r"), "negative resistance");
    if (l.x < 0) fail(loc(file, "lines", i, "x"), "negative reactance");
    if (!(l.s_max > 0)) fail(loc(file, "lines", i, "s_max"), "thermal limit must be positive");
  }

  std::vector<int> batt_count(inst.buses.size(), 0), gen_count(inst.buses.size(), 0);
  for (std::size_t i = 0; i < inst.batteries.size(); ++i) {
    const BatterySpec& b = inst.batteries[i];
    int bus = inst.bus_index(b.bus);
    if (bus < 0) fail(loc(file, "batteries", i, "bus"), "battery '" + b.id + "' references unknown bus '" + b.bus + "'");
    if (!(b.eta_ch > 0 && b.eta_ch <= 1)) fail(loc(file, "batteries", i, "eta_ch"), "must lie in (0, 1]");
    if (!(b.eta_dis > 0 && b.eta_dis <= 1)) fail(loc(file, "batteries", i, "eta_dis"), "must lie in (0, 1]");
    if (!(b.max_power > 0)) fail(loc(file, "batteries", i, "max_power"), "must be positive");
    if (b.max_energy < 0) fail(loc(file, "batteries", i, "max_energy"), "must be nonnegative");
    if (b.initial_soc < 0 || b.initial_soc > b.max_energy) {
      fail(loc(file, "batteries", i, "initial_soc"), "must lie in [0, max_energy]");
    }
    if (b.p_min > b.p_max) fail(loc(file, "batteries", i, "p_min"), "p_min exceeds p_max");
    if (b.q_min > b.q_max) fail(loc(file, "batteries", i, "q_min"), "q_min exceeds q_max");
    ++batt_count[bus];
  }
  for (std::size_t i = 0; i < inst.generators.size(); ++i) {
    const GeneratorSpec& g = inst.generators[i];
    int bus = inst.bus_index(g.bus);
    if (bus < 0) fail(loc(file, "generators", i, "bus"), "generator '" + g.id + "' references unknown bus '" + g.bus + "'");
    if (g.c2 < 0) fail(loc(file, "generators", i, "cost"), "quadratic coefficient must be nonnegative");
    if (g.up_time < 1) fail(loc(file, "generators", i, "up_time"), "must be >= 1");
    if (g.down_time < 1) fail(loc(file, "generators", i, "down_time"), "must be >= 1");
    if (g.ramp_up < 0) fail(loc(file, "generators", i, "ramp_up"), "must be nonnegative");
    if (g.ramp_down < 0) fail(loc(file, "generators", i, "ramp_down"), "must be nonnegative");
    if (!(g.efficiency > 0 && g.efficiency <= 1)) fail(loc(file, "generators", i, "efficiency"), "must lie in (0, 1]");
    if (g.p_min > g.p_max) fail(loc(file, "generators", i, "p_min"), "p_min exceeds p_max");
    if (g.q_min > g.q_max) fail(loc(file, "generators", i, "q_min"), "q_min exceeds q_max");
    ++gen_count[bus];
  }
  // A site limit only makes sense with candidates there; a limit without
  // candidates is allowed (it is simply vacuous), a candidate without a
  // positive limit can never be built and is rejected.
  for (std::size_t i = 0; i < inst.buses.size(); ++i) {
    if (batt_count[i] > 0 && inst.buses[i].max_batteries == 0) {
      fail(loc(file, "buses", i, "max_batteries"), "bus hosts battery candidates but allows none");
    }
    if (gen_count[i] > 0 && inst.buses[i].max_generators == 0) {
      fail(loc(file, "buses", i, "max_generators"), "bus hosts generator candidates but allows none");
    }
  }

  RadialReport rr = validate_radial(inst);
  if (!rr.connected) fail(file + ": lines", "network graph is disconnected: " + rr.message);
}

NetworkInstance parse_instance(const std::filesystem::path& dir) {
  const std::string file = "network.json";
  std::filesystem::path p = dir / file;
  std::ifstream in(p);
  if (!in) throw InstanceError(p.string() + ": cannot open file");
  json root;
  try {
    root = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InstanceError(p.string() + ": malformed JSON: " + e.what());
  }
  if (!root.is_object()) fail(file, "top level must be an object");
  int version = get_int(root, "format_version", file, true, 0);
  if (version != NetworkInstance::kFormatVersion) {
    fail(file + ": format_version", "unsupported version " + std::to_string(version));
  }

  NetworkInstance inst;
  inst.name = root.value("name", dir.filename().string());
  inst.shed_penalty = get_number(root, "shed_penalty", file, true, 0);
  inst.base_mva = get_number(root, "base_mva", file, false, 1.0);
  inst.dt_hours = get_number(root, "dt_hours", file, false, 0.25);
  inst.grid_connected = root.value("grid_connected", false);
  if (root.contains("slack_bus")) inst.slack_bus = get_string(root, "slack_bus", file);

  const json& buses = get_array(root, "buses", file);
  for (std::size_t i = 0; i < buses.size(); ++i) {
    const json& j = buses[i];
    std::string w = loc(file, "buses", i, "");
    Bus b;
    b.id = get_string(j, "id", w);
    b.v_min = get_number(j, "v_min", w, true, 0);
    b.v_max = get_number(j, "v_max", w, true, 0);
    b.max_batteries = get_int(j, "max_batteries", w, false, 0);
    b.max_generators = get_int(j, "max_generators", w, false, 0);
    b.nominal_p_mw = get_number(j, "nominal_p_mw", w, false, 0);
    b.nominal_q_mvar = get_number(j, "nominal_q_mvar", w, false, 0);
    inst.buses.push_back(b);
  }
  const json& lines = get_array(root, "lines", file);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const json& j = lines[i];
    std::string w = loc(file, "lines", i, "");
    Line l;
    l.id = get_string(j, "id", w);
    l.from_bus = get_string(j, "from", w);
    l.to_bus = get_string(j, "to", w);
    l.r = get_number(j, "r", w, true, 0);
    l.x = get_number(j, "x", w, true, 0);
    l.s_max = get_number(j, "s_max", w, true, 0);
    inst.lines.push_back(l);
  }
  if (root.contains("batteries")) {
    const json& arr = get_array(root, "batteries", file);
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const json& j = arr[i];
      std::string w = loc(file, "batteries", i, "");
      BatterySpec b;
      b.id = get_string(j, "id", w);
      b.bus = get_string(j, "bus", w);
      b.fixed_cost = get_number(j, "fixed_cost", w, true, 0);
      b.capacity_cost = get_number(j, "capacity_cost", w, true, 0);
      b.max_power = get_number(j, "max_power", w, true, 0);
      b.max_energy = get_number(j, "max_energy", w, true, 0);
      b.eta_ch = get_number(j, "eta_ch", w, true, 0);
      b.eta_dis = get_number(j, "eta_dis", w, true, 0);
      b.initial_soc = get_number(j, "initial_soc", w, false, 0.0);
      b.p_min = get_number(j, "p_min", w, false, -b.max_power);
      b.p_max = get_number(j, "p_max", w, false, b.max_power);
      b.q_min = get_number(j, "q_min", w, false, -b.max_power);
      b.q_max = get_number(j, "q_max", w, false, b.max_power);
      inst.batteries.push_back(b);
    }
  }
  if (root.contains("generators")) {
    const json& arr = get_array(root, "generators", file);
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const json& j = arr[i];
      std::string w = loc(file, "generators", i, "");
      GeneratorSpec g;
      g.id = get_string(j, "id", w);
      g.bus = get_string(j, "bus", w);
      g.fixed_cost = get_number(j, "fixed_cost", w, true, 0);
      auto it = j.find("cost");
      if (it == j.end()) fail(w + ".cost", "missing field");
      if (!it->is_array() || it->size() != 3) fail(w + ".cost", "expected [c0, c1, c2]");
      for (std::size_t k = 0; k < 3; ++k) {
        if (!(*it)[k].is_number()) fail(w + ".cost[" + std::to_string(k) + "]", "expected a number");
      }
      g.c0 = (*it)[0].get<double>();
      g.c1 = (*it)[1].get<double>();
      g.c2 = (*it)[2].get<double>();
      g.up_time = get_int(j, "up_time", w, true, 1);
      g.down_time = get_int(j, "down_time", w, true, 1);
      g.ramp_up = get_number(j, "ramp_up", w, true, 0);
      g.ramp_down = get_number(j, "ramp_down", w, true, 0);
      g.efficiency = get_number(j, "efficiency", w, true, 0);
      g.p_min = get_number(j, "p_min", w, true, 0);
      g.p_max = get_number(j, "p_max", w, true, 0);
      g.q_min = get_number(j, "q_min", w, true, 0);
      g.q_max = get_number(j, "q_max", w, true, 0);
      g.initially_on = j.value("initially_on", false);
      g.initial_power = get_number(j, "initial_power", w, false, 0.0);
      inst.generators.push_back(g);
    }
  }
  validate_instance(inst, file);
  return inst;
}

void write_instance(const NetworkInstance& inst, const std::filesystem::path& dir) {
  json root;
  root["format_version"] = NetworkInstance::kFormatVersion;
  root["name"] = inst.name;
  root["shed_penalty"] = inst.shed_penalty;
  root["base_mva"] = inst.base_mva;
  root["dt_hours"] = inst.dt_hours;
  root["grid_connected"] = inst.grid_connected;
  if (!inst.slack_bus.empty()) root["slack_bus"] = inst.slack_bus;
  root["buses"] = json::array();
  for (const Bus& b : inst.buses) {
    root["buses"].push_back({{"id", b.id},
                             {"v_min", b.v_min},
                             {"v_max", b.v_max},
                             {"max_batteries", b.max_batteries},
                             {"max_generators", b.max_generators},
                             {"nominal_p_mw", b.nominal_p_mw},
                             {"nominal_q_mvar", b.nominal_q_mvar}});
  }
  root["lines"] = json::array();
  for (const Line& l : inst.lines) {
    root["lines"].push_back(
        {{"id", l.id}, {"from", l.from_bus}, {"to", l.to_bus}, {"r", l.r}, {"x", l.x}, {"s_max", l.s_max}});
  }
  root["batteries"] = json::array();
  for (const BatterySpec& b : inst.batteries) {
    root["batteries"].push_back({{"id", b.id},
                                 {"bus", b.bus},
                                 {"fixed_cost", b.fixed_cost},
                                 {"capacity_cost", b.capacity_cost},
                                 {"max_power", b.max_power},
                                 {"max_energy", b.max_energy},
                                 {"eta_ch", b.eta_ch},
                                 {"eta_dis", b.eta_dis},
                                 {"initial_soc", b.initial_soc},
                                 {"p_min", b.p_min},
                                 {"p_max", b.p_max},
                                 {"q_min", b.q_min},
                                 {"q_max", b.q_max}});
  }
  root["generators"] = json::array();
  for (const GeneratorSpec& g : inst.generators) {
    root["generators"].push_back({{"id", g.id},
                                  {"bus", g.bus},
                                  {"fixed_cost", g.fixed_cost},
                                  {"cost", {g.c0, g.c1, g.c2}},
                                  {"up_time", g.up_time},
                                  {"down_time", g.down_time},
                                  {"ramp_up", g.ramp_up},
                                  {"ramp_down", g.ramp_down},
                                  {"efficiency", g.efficiency},
                                  {"p_min", g.p_min},
                                  {"p_max", g.p_max},
                                  {"q_min", g.q_min},
                                  {"q_max", g.q_max},
                                  {"initially_on", g.initially_on},
                                  {"initial_power", g.initial_power}});
  }
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "network.json");
  if (!out) throw InstanceError((dir / "network.json").string() + ": cannot write file");
  out << root.dump(2) << "\n";
}

RadialReport validate_radial(const NetworkInstance& inst) {
  RadialReport rep;
  const int n = static_cast<int>(inst.buses.size());
  std::vector<std::vector<std::pair<int, int>>> adj(n);  // (neighbor, line)
  for (std::size_t e = 0; e < inst.lines.size(); ++e) {
    int a = inst.bus_index(inst.lines[e].from_bus);
    int b = inst.bus_index(inst.lines[e].to_bus);
    if (a < 0 || b < 0) continue;
    adj[a].push_back({b, static_cast<int>(e)});
    adj[b].push_back({a, static_cast<int>(e)});
  }
  if (n == 0) return rep;

  // Iterative DFS from bus 0 tracking parents; the first non-tree edge closes a cycle.
  std::vector<int> parent(n, -2), parent_line(n, -1), depth(n, 0);
  std::vector<int> stack{0};
  parent[0] = -1;
  int visited = 0;
  while (!stack.empty()) {
    int u = stack.back();
    stack.pop_back();
    ++visited;
    for (auto [v, e] : adj[u]) {
      if (e == parent_line[u]) continue;
      if (parent[v] == -2) {
        parent[v] = u;
        parent_line[v] = e;
        depth[v] = depth[u] + 1;
        stack.push_back(v);
      } else if (rep.cycle.empty()) {
        // Walk both endpoints up to their common ancestor.
        std::vector<int> left{u}, right{v};
        int a = u, b = v;
        while (depth[a] > depth[b]) left.push_back(a = parent[a]);
        while (depth[b] > depth[a]) right.push_back(b = parent[b]);
        while (a != b) {
          left.push_back(a = parent[a]);
          right.push_back(b = parent[b]);
        }
        right.pop_back();
        for (int x : left) rep.cycle.push_back(inst.buses[x].id);
        for (auto it = right.rbegin(); it != right.rend(); ++it) rep.cycle.push_back(inst.buses[*it].id);
      }
    }
  }
  rep.connected = (visited == n);
  rep.radial = rep.connected && rep.cycle.empty() && static_cast<int>(inst.lines.size()) == n - 1;
  if (!rep.connected) {
    std::vector<std::string> missing;
    for (int i = 0; i < n; ++i)
      if (parent[i] == -2) missing.push_back(inst.buses[i].id);
    std::ostringstream os;
    os << "unreachable buses:";
    for (auto& m : missing) os << " " << m;
    rep.message = os.str();
  } else if (!rep.cycle.empty()) {
    std::ostringstream os;
    os << "cycle:";
    for (auto& c : rep.cycle) os << " " << c;
    rep.message = os.str();
  } else {
    rep.message = "radial";
  }
  return rep;
}

}  // namespace mdop
