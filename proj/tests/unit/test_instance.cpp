// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "mdop/harness.hpp"
#include "mdop/instance.hpp"

using namespace mdop;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  fs::path d = fs::temp_directory_path() / ("mdop_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  f << text;
}

std::string error_of(const fs::path& dir) {
  try {
    parse_instance(dir);
  } catch (const InstanceError& e) {
    return e.what();
  }
  return "";
}

std::string bus(const std::string& id) { return R"({"id": ")" + id + R"(", "v_min": 0.9, "v_max": 1.1})"; }

std::string line(const std::string& id, const std::string& from, const std::string& to) {
  return R"({"id": ")" + id + R"(", "from": ")" + from + R"(", "to": ")" + to +
         R"(", "r": 0.01, "x": 0.01, "s_max": 1})";
}

std::string network(const std::string& buses, const std::string& lines, int version = 1) {
  return R"({"format_version": )" + std::to_string(version) + R"(, "shed_penalty": 1e7, "buses": [)" + buses +
         R"(], "lines": [)" + lines + "]}";
}

}  // namespace

TEST_CASE("instance: bundled feeder parses as a 13-bus radial network") {
  NetworkInstance inst = parse_instance("data/ieee13");
  CHECK(inst.buses.size() == 13);
  CHECK(inst.lines.size() == 12);
  CHECK(validate_radial(inst).radial);
  CHECK(inst == ieee13_instance());
}

TEST_CASE("instance: corpus resource parameters") {
  NetworkInstance inst = parse_instance("data/ieee13");
  REQUIRE(!inst.batteries.empty());
  for (const BatterySpec& b : inst.batteries) {
    CHECK(b.fixed_cost == 100.0);
    CHECK(b.capacity_cost == 300.0);
    CHECK(b.eta_ch == 0.8);
    CHECK(b.eta_dis == 0.7);
  }
  bool seen[3] = {false, false, false};
  for (const GeneratorSpec& g : inst.generators) {
    CHECK(g.efficiency == 0.5);
    if (g.fixed_cost == 200 && g.c0 == 6 && g.c1 == 35 && g.c2 == 50) seen[0] = true;
    if (g.fixed_cost == 300 && g.c0 == 3 && g.c1 == 10 && g.c2 == 20) seen[1] = true;
    if (g.fixed_cost == 350 && g.c0 == 2 && g.c1 == 5 && g.c2 == 10) seen[2] = true;
  }
  CHECK(seen[0]);
  CHECK(seen[1]);
  CHECK(seen[2]);
}

TEST_CASE("instance: single bus without lines is valid and radial") {
  fs::path d = scratch_dir("single");
  write_file(d / "network.json", network(bus("1"), ""));
  NetworkInstance inst = parse_instance(d);
  CHECK(inst.buses.size() == 1);
  CHECK(inst.lines.empty());
  CHECK(validate_radial(inst).radial);
}

TEST_CASE("instance: dangling line reference names the line") {
  fs::path d = scratch_dir("dangling");
  write_file(d / "network.json", network(bus("1") + "," + bus("2"), line("L7", "1", "99")));
  std::string msg = error_of(d);
  CHECK(msg.find("lines[0].to") != std::string::npos);
  CHECK(msg.find("L7") != std::string::npos);
  CHECK(msg.find("99") != std::string::npos);
}

TEST_CASE("instance: missing file, malformed field and disconnected graph") {
  fs::path d = scratch_dir("errors");
  CHECK(error_of(d).find("cannot open") != std::string::npos);

  write_file(d / "network.json", network(R"({"id": "1", "v_min": "low", "v_max": 1.1})", ""));
  CHECK(error_of(d).find("buses[0].v_min") != std::string::npos);

  write_file(d / "network.json", network(bus("1") + "," + bus("2"), ""));
  CHECK(error_of(d).find("disconnected") != std::string::npos);

  write_file(d / "network.json", network(bus("1"), "", 9));
  CHECK(error_of(d).find("format_version") != std::string::npos);
}

TEST_CASE("instance: cycle is flagged but accepted") {
  fs::path d = scratch_dir("cycle");
  write_file(d / "network.json", network(bus("a") + "," + bus("b") + "," + bus("c"),
                                         line("ab", "a", "b") + "," + line("bc", "b", "c") + "," + line("ca", "c", "a")));
  NetworkInstance inst = parse_instance(d);
  RadialReport rr = validate_radial(inst);
  CHECK(!rr.radial);
  CHECK(rr.connected);
  CHECK(rr.cycle.size() == 3);
}

TEST_CASE("instance: write then parse round-trips") {
  for (const NetworkInstance& inst : {micro2_instance(), ieee13_instance()}) {
    fs::path d = scratch_dir("roundtrip_" + inst.name);
    write_instance(inst, d);
    CHECK(parse_instance(d) == inst);
  }
}

TEST_CASE("loads: step counts of bundled and written profiles") {
  NetworkInstance inst = parse_instance("data/ieee13");
  CHECK(parse_loads("data/ieee13/loads_slow_7d.csv", inst, 0.25).horizon == 672);
  CHECK(parse_loads("data/ieee13/loads_fast_1d.csv", inst, 0.25).horizon == 96);

  SynthSpec spec;
  spec.days = 3;
  spec.daily_amplitude = 0.6;
  spec.noise_amplitude = 0.02;
  LoadProfile three = synth_load(inst, spec);
  fs::path d = scratch_dir("loads3d");
  write_loads(three, inst, d / "loads.csv");
  LoadProfile back = parse_loads(d / "loads.csv", inst, 0.25);
  CHECK(back.horizon == 288);
  for (std::size_t i = 0; i < inst.buses.size(); ++i) {
    REQUIRE(back.p_mw[i].size() == 288);
    for (int t = 0; t < 288; ++t) CHECK(back.p_mw[i][t] == doctest::Approx(three.p_mw[i][t]).epsilon(1e-12));
  }
}

TEST_CASE("loads: empty file, missing buses and bad rows") {
  NetworkInstance inst = micro2_instance();
  fs::path d = scratch_dir("loadrows");
  write_file(d / "empty.csv", "");
  LoadProfile empty = parse_loads(d / "empty.csv", inst, 1.0);
  CHECK(empty.horizon == 0);
  CHECK(!empty.warnings.empty());

  write_file(d / "one.csv", "step,bus,p_mw,q_mvar\n0,b2,0.5,0.1\n1,b2,0.6,0.2\n");
  LoadProfile one = parse_loads(d / "one.csv", inst, 1.0);
  CHECK(one.horizon == 2);
  CHECK(one.p(inst.bus_index("b1"), 1) == 0.0);
  CHECK(one.p(inst.bus_index("b2"), 1) == 0.6);

  auto fails_with = [&](const std::string& text, const std::string& needle) {
    write_file(d / "bad.csv", text);
    try {
      parse_loads(d / "bad.csv", inst, 1.0);
    } catch (const InstanceError& e) {
      return std::string(e.what()).find(needle) != std::string::npos;
    }
    return false;
  };
  CHECK(fails_with("step,bus,p_mw,q_mvar\n-1,b2,0.5,0.1\n", "negative step"));
  CHECK(fails_with("step,bus,p_mw,q_mvar\n0,b1,0.5,0.1\n0,b2,0.5,0.1\n1,b2,0.5,0.1\n", "non-uniform"));
  CHECK(fails_with("step,bus,p_mw,q_mvar\n0,b9,0.5,0.1\n", "unknown bus"));
}

TEST_CASE("synth: modulation off gives the base, seeds are reproducible") {
  NetworkInstance inst = ieee13_instance();
  SynthSpec flat;
  LoadProfile f = synth_load(inst, flat);
  CHECK(f.horizon == 96);
  for (std::size_t i = 0; i < inst.buses.size(); ++i) {
    for (int t = 0; t < f.horizon; ++t) {
      CHECK(f.p(i, t) == inst.buses[i].nominal_p_mw);
      CHECK(f.q(i, t) == doctest::Approx(kSynthReactiveRatio * inst.buses[i].nominal_p_mw));
    }
  }
  SynthSpec noisy;
  noisy.daily_amplitude = 0.3;
  noisy.noise_amplitude = 0.2;
  noisy.seed = 42;
  LoadProfile a = synth_load(inst, noisy), b = synth_load(inst, noisy);
  CHECK(a.p_mw == b.p_mw);
  CHECK(a.q_mvar == b.q_mvar);
  noisy.seed = 43;
  CHECK(synth_load(inst, noisy).p_mw != a.p_mw);
}

TEST_CASE("synth: daily autocorrelation stands above the noise floor") {
  NetworkInstance inst = ieee13_instance();
  SynthSpec spec;
  spec.days = 3;
  spec.daily_amplitude = 0.6;
  spec.noise_amplitude = 0.25;
  LoadProfile lp = synth_load(inst, spec);
  REQUIRE(lp.horizon == 288);
  std::vector<double> s(lp.horizon);
  for (int t = 0; t < lp.horizon; ++t) s[t] = lp.total_p(t);
  double mean = 0;
  for (double v : s) mean += v;
  mean /= s.size();
  auto acf = [&](int lag) {
    double num = 0, den = 0;
    for (std::size_t t = 0; t < s.size(); ++t) {
      den += (s[t] - mean) * (s[t] - mean);
      if (t + lag < s.size()) num += (s[t] - mean) * (s[t + lag] - mean);
    }
    return num / den;
  };
  // A 12h lag sits at the opposite phase of the daily cycle.
  CHECK(acf(96) > 0.5);
  CHECK(acf(96) > acf(48) + 0.5);
}
