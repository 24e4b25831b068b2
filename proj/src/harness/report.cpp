// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "mdop/harness.hpp"

namespace mdop {

namespace {

using nlohmann::ordered_json;

// Fixed formatting keeps CSV output byte-identical across reruns.
std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

ordered_json jnum(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string slot_label(const NetworkInstance& inst, const StateSlot& slot) {
  std::string owner;
  switch (slot.kind) {
    case StateKind::Soc:
    case StateKind::BuildBattery:
    case StateKind::BatteryRating: owner = inst.batteries[slot.owner].id; break;
    default: owner = inst.generators[slot.owner].id; break;
  }
  std::string s = std::string(to_string(slot.kind)) + ":" + owner;
  if (slot.kind == StateKind::StartHist || slot.kind == StateKind::StopHist) s += ":" + std::to_string(slot.lag);
  return s;
}

ordered_json config_json(const RunConfig& c) {
  ordered_json j;
  j["instance"] = c.instance.string();
  j["loads"] = c.loads.string();
  j["synth"] = c.loads.empty() ? ordered_json(c.synth) : ordered_json(nullptr);
  j["horizon_days"] = c.horizon_days ? ordered_json(*c.horizon_days) : ordered_json(nullptr);
  j["dt_minutes"] = c.dt_minutes ? ordered_json(*c.dt_minutes) : ordered_json(nullptr);
  j["algorithm"] = to_string(c.algorithm);
  j["stages"] = c.stages;
  j["iterations"] = c.iterations;
  j["dual_mode"] = c.dual_mode == DualMode::DualInit ? "dual-init" : "zero-init";
  j["gap_tol"] = c.gap_tol;
  j["time_limit"] = c.time_limit;
  j["seed"] = c.seed;
  return j;
}

ordered_json terms_json(const ObjectiveTerms& t) {
  return {{"build", t.build}, {"generation", t.generation}, {"shed", t.shed}, {"total", t.total()}};
}

std::string dispatch_csv(const NetworkInstance& inst, const PlanSolution& p) {
  std::ostringstream o;
  o << "step,asset,variable,value\n";
  auto row = [&](int t, const std::string& asset, const char* var, double v) {
    o << t << "," << asset << "," << var << "," << num(v) << "\n";
  };
  for (int t = 0; t < p.horizon; ++t) {
    for (std::size_t d = 0; d < inst.generators.size(); ++d) {
      const std::string& id = inst.generators[d].id;
      row(t, id, "commit", p.commit[d][t]);
      row(t, id, "start", p.start[d][t]);
      row(t, id, "stop", p.stop[d][t]);
      row(t, id, "p_mw", p.gen_p[d][t]);
      row(t, id, "q_mvar", p.gen_q[d][t]);
      row(t, id, "raw_mw", p.gen_raw[d][t]);
    }
    for (std::size_t b = 0; b < inst.batteries.size(); ++b) {
      const std::string& id = inst.batteries[b].id;
      row(t, id, "p_mw", p.bat_p[b][t]);
      row(t, id, "q_mvar", p.bat_q[b][t]);
      row(t, id, "raw_mw", p.bat_raw[b][t]);
      row(t, id, "soc_mwh", p.soc[b][t]);
    }
    for (std::size_t i = 0; i < inst.buses.size(); ++i) {
      const std::string& id = inst.buses[i].id;
      row(t, id, "v_sq", p.voltage[i][t]);
      row(t, id, "shed_p_mw", p.shed_p[i][t]);
      row(t, id, "shed_q_mvar", p.shed_q[i][t]);
    }
    for (std::size_t l = 0; l < inst.lines.size(); ++l) {
      row(t, inst.lines[l].id, "p_mw", p.line_p[l][t]);
      row(t, inst.lines[l].id, "q_mvar", p.line_q[l][t]);
    }
    if (inst.grid_connected) {
      row(t, "grid", "p_mw", p.grid_p[t]);
      row(t, "grid", "q_mvar", p.grid_q[t]);
    }
  }
  return o.str();
}

std::string soc_csv(const NetworkInstance& inst, const PlanSolution& p) {
  std::ostringstream o;
  o << "step,battery,soc_mwh\n";
  for (int t = 0; t < p.horizon; ++t) {
    for (std::size_t b = 0; b < inst.batteries.size(); ++b) {
      o << t << "," << inst.batteries[b].id << "," << num(p.soc[b][t]) << "\n";
    }
  }
  return o.str();
}

std::string soc_total_csv(const NetworkInstance& inst, const LoadProfile& loads, const PlanSolution& p) {
  std::ostringstream o;
  o << "step,hour,soc_total_mwh\n";
  for (int t = 0; t < p.horizon; ++t) {
    double s = 0;
    for (std::size_t b = 0; b < inst.batteries.size(); ++b) s += p.soc[b][t];
    o << t << "," << num((t + 1) * loads.dt_hours) << "," << num(s) << "\n";
  }
  return o.str();
}

std::string stage_costs_csv(const PlanSolution& p) {
  std::ostringstream o;
  o << "stage,start,end,build,generation,shed,total\n";
  for (std::size_t s = 0; s < p.stage_costs.size(); ++s) {
    const ObjectiveTerms& c = p.stage_costs[s];
    int start = s < p.stage_stats.size() ? p.stage_stats[s].start : 0;
    int end = s < p.stage_stats.size() ? p.stage_stats[s].end : 0;
    o << s + 1 << "," << start << "," << end << "," << num(c.build) << "," << num(c.generation) << ","
      << num(c.shed) << "," << num(c.total()) << "\n";
  }
  return o.str();
}

std::string duals_csv(const NetworkInstance& inst, const PlanSolution& p) {
  std::vector<StateSlot> slots = state_slots(inst, true);
  std::ostringstream o;
  o << "iteration,stage,slot,price,dual\n";
  for (const SweepRecord& sw : p.sweeps) {
    const std::size_t stages = std::max(sw.prices.size(), sw.duals.size());
    for (std::size_t s = 0; s < stages; ++s) {
      for (std::size_t k = 0; k < slots.size(); ++k) {
        double price = s < sw.prices.size() && k < sw.prices[s].size() ? sw.prices[s][k] : 0.0;
        double dual = s < sw.duals.size() && k < sw.duals[s].size() ? sw.duals[s][k] : 0.0;
        o << sw.iteration << "," << s + 1 << "," << slot_label(inst, slots[k]) << "," << num(price) << ","
          << num(dual) << "\n";
      }
    }
  }
  return o.str();
}

std::string pad(const std::string& s, std::size_t w, bool right) {
  if (s.size() >= w) return s;
  return right ? std::string(w - s.size(), ' ') + s : s + std::string(w - s.size(), ' ');
}

std::string fixed(double v, int digits) {
  if (!std::isfinite(v)) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string summary_json(const RunReport& r) {
  ordered_json j;
  j["config"] = config_json(r.config);
  j["instance"] = r.instance.name;
  j["horizon"] = r.loads.horizon;
  j["dt_hours"] = r.loads.dt_hours;
  j["objective"] = jnum(r.objective);
  j["lower_bound"] = jnum(r.lower_bound);
  j["relative_gap_pct"] = jnum(r.relative_gap);
  ordered_json timing;
  timing["init_seconds"] = r.init_seconds;
  timing["iteration_seconds"] = r.iteration_seconds;
  double avg = r.iteration_seconds.empty()
                   ? 0.0
                   : std::accumulate(r.iteration_seconds.begin(), r.iteration_seconds.end(), 0.0) /
                         static_cast<double>(r.iteration_seconds.size());
  timing["avg_iteration_seconds"] = avg;
  timing["total_seconds"] = r.total_seconds;
  j["timing"] = timing;
  if (r.plan) {
    const PlanSolution& p = *r.plan;
    j["cost"] = terms_json(p.cost);
    j["shed_mw"] = p.total_shed_p();
    j["best_iteration"] = p.best_iteration;
    ordered_json builds;
    for (std::size_t b = 0; b < r.instance.batteries.size(); ++b) {
      builds["batteries"].push_back(
          {{"id", r.instance.batteries[b].id}, {"built", p.builds.battery[b]}, {"rating_mva", p.builds.rating[b]}});
    }
    for (std::size_t d = 0; d < r.instance.generators.size(); ++d) {
      builds["generators"].push_back({{"id", r.instance.generators[d].id}, {"built", p.builds.generator[d]}});
    }
    j["builds"] = builds;
    ordered_json stages = ordered_json::array();
    for (std::size_t s = 0; s < p.stage_stats.size(); ++s) {
      const StageStats& st = p.stage_stats[s];
      ordered_json e = {{"stage", st.stage},     {"start", st.start}, {"end", st.end},
                        {"status", st.status},   {"nodes", st.nodes}, {"mip_gap", jnum(st.mip_gap)},
                        {"seconds", st.seconds}};
      if (s < p.stage_costs.size()) e["cost"] = terms_json(p.stage_costs[s]);
      stages.push_back(e);
    }
    j["stages"] = stages;
    ordered_json sweeps = ordered_json::array();
    for (const SweepRecord& sw : p.sweeps) {
      sweeps.push_back({{"iteration", sw.iteration}, {"objective", sw.objective}, {"seconds", sw.seconds}});
    }
    j["sweeps"] = sweeps;
    j["feasibility"] = {{"ok", r.feasibility.ok()},
                        {"violations", r.feasibility.violations.size()},
                        {"worst", r.feasibility.worst}};
    j["efficiency_tightness"] = {{"active", r.tightness.active},
                                 {"tight", r.tightness.tight},
                                 {"fraction", r.tightness.fraction()},
                                 {"worst", r.tightness.worst}};
  }
  if (r.gauss_seidel) {
    const GaussSeidelResult& g = *r.gauss_seidel;
    j["gauss_seidel"] = {{"sweeps", g.sweeps},
                         {"converged", g.converged},
                         {"final_residual", g.residuals.empty() ? ordered_json(nullptr) : jnum(g.residuals.back())},
                         {"residuals", g.residuals},
                         {"objectives", g.objectives}};
  }
  j["warnings"] = r.warnings;
  return j.dump(2) + "\n";
}

std::string render_report(const RunReport& r) {
  std::ostringstream o;
  o << "instance   " << r.instance.name << " (" << r.instance.buses.size() << " buses, " << r.loads.horizon
    << " steps of " << fixed(r.loads.dt_hours * 60.0, 0) << " min)\n";
  o << "algorithm  " << to_string(r.config.algorithm);
  if (r.config.algorithm == Algorithm::Mpc) {
    o << "  S=" << r.config.stages << " N=" << r.config.iterations << " "
      << (r.config.dual_mode == DualMode::DualInit ? "dual-init" : "zero-init");
  } else if (r.config.algorithm == Algorithm::Rh || r.config.algorithm == Algorithm::GaussSeidel) {
    o << "  S=" << r.config.stages;
  }
  o << "\n";
  o << "objective  " << fixed(r.objective, 4) << "\n";
  o << "bound      " << fixed(r.lower_bound, 4) << "\n";
  o << "gap        " << (std::isfinite(r.relative_gap) ? fixed(r.relative_gap, 3) + " %" : std::string("n/a"))
    << "\n";
  if (r.plan) {
    const PlanSolution& p = *r.plan;
    o << "cost       build " << fixed(p.cost.build, 4) << "  generation " << fixed(p.cost.generation, 4)
      << "  shed " << fixed(p.cost.shed, 4) << "\n";
    o << "shed       " << fixed(p.total_shed_p(), 6) << " MW\n";
    o << "builds    ";
    for (std::size_t b = 0; b < r.instance.batteries.size(); ++b) {
      if (p.builds.battery[b] > 0.5) {
        o << " " << r.instance.batteries[b].id << "(" << fixed(p.builds.rating[b], 3) << " MVA)";
      }
    }
    for (std::size_t d = 0; d < r.instance.generators.size(); ++d) {
      if (p.builds.generator[d] > 0.5) o << " " << r.instance.generators[d].id;
    }
    o << "\n";
    o << "feasible   " << (r.feasibility.ok() ? "yes" : "no") << " (worst " << num(r.feasibility.worst) << ")\n";
    o << "tightness  " << r.tightness.tight << "/" << r.tightness.active << " battery steps on the efficiency curve\n";
    o << "\nstage  steps      status     nodes  cost\n";
    for (std::size_t s = 0; s < p.stage_stats.size(); ++s) {
      const StageStats& st = p.stage_stats[s];
      std::string steps = std::to_string(st.start) + "-" + std::to_string(st.end);
      o << pad(std::to_string(st.stage), 5, true) << "  " << pad(steps, 9, false) << "  " << pad(st.status, 9, false)
        << "  " << pad(std::to_string(st.nodes), 6, true) << "  "
        << (s < p.stage_costs.size() ? fixed(p.stage_costs[s].total(), 4) : "") << "\n";
    }
  }
  o << "\ntiming     init " << fixed(r.init_seconds, 2) << " s";
  if (!r.iteration_seconds.empty()) {
    double avg = std::accumulate(r.iteration_seconds.begin(), r.iteration_seconds.end(), 0.0) /
                 static_cast<double>(r.iteration_seconds.size());
    o << ", avg per iteration " << fixed(avg, 2) << " s over " << r.iteration_seconds.size();
  }
  o << ", total " << fixed(r.total_seconds, 2) << " s\n";
  if (r.gauss_seidel) {
    const GaussSeidelResult& g = *r.gauss_seidel;
    o << "gauss-seidel " << g.sweeps << " sweeps, " << (g.converged ? "converged" : "not converged")
      << ", final residual " << (g.residuals.empty() ? "n/a" : num(g.residuals.back())) << "\n";
  }
  for (const std::string& w : r.warnings) o << "warning: " << w << "\n";
  return o.str();
}

void write_artifacts(const RunReport& r, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
  write_file(dir / "summary.json", summary_json(r));
  write_file(dir / "report.txt", render_report(r));
  if (r.plan) {
    write_file(dir / "dispatch.csv", dispatch_csv(r.instance, *r.plan));
    write_file(dir / "soc.csv", soc_csv(r.instance, *r.plan));
    write_file(dir / "stage_costs.csv", stage_costs_csv(*r.plan));
    write_file(dir / "soc_total.csv", soc_total_csv(r.instance, r.loads, *r.plan));
    write_file(dir / "duals.csv", duals_csv(r.instance, *r.plan));
  }
}

std::string gap_cell(const CompareRow& row) {
  if (row.shed_mw > 1e-6) return "LS (" + fixed(row.shed_mw, 2) + ")";
  return fixed(row.relative_gap, 2);
}

std::vector<CompareRow> compare_reports(const std::vector<RunReport>& reports) {
  std::vector<CompareRow> rows;
  for (const RunReport& r : reports) {
    CompareRow row;
    row.label = to_string(r.config.algorithm);
    if (r.config.algorithm == Algorithm::Mpc) {
      row.label += " S=" + std::to_string(r.config.stages) + " N=" + std::to_string(r.config.iterations);
    } else if (r.config.algorithm == Algorithm::Rh || r.config.algorithm == Algorithm::GaussSeidel) {
      row.label += " S=" + std::to_string(r.config.stages);
    }
    row.objective = r.objective;
    row.relative_gap = r.relative_gap;
    if (r.plan) {
      row.shed_mw = r.plan->total_shed_p();
      for (const ObjectiveTerms& t : r.plan->stage_costs) row.stage_costs.push_back(t.total());
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<CompareRow> compare(const std::vector<RunConfig>& configs) {
  if (configs.empty()) throw std::invalid_argument("compare needs at least one configuration");
  const RunConfig& a = configs.front();
  for (const RunConfig& c : configs) {
    bool same = c.instance == a.instance && c.loads == a.loads && c.horizon_days == a.horizon_days &&
                c.dt_minutes == a.dt_minutes && (!c.loads.empty() || (c.synth == a.synth && c.seed == a.seed));
    if (!same) throw std::invalid_argument("compare: configurations do not share the instance and load profile");
  }
  std::vector<RunReport> reports;
  for (const RunConfig& c : configs) reports.push_back(run(c));
  return compare_reports(reports);
}

std::string compare_csv(const std::vector<CompareRow>& rows) {
  std::ostringstream o;
  o << "label,objective,gap_pct,shed_mw,gap_cell,stage_costs\n";
  for (const CompareRow& r : rows) {
    o << r.label << "," << num(r.objective) << "," << num(r.relative_gap) << "," << num(r.shed_mw) << ","
      << gap_cell(r) << ",";
    for (std::size_t s = 0; s < r.stage_costs.size(); ++s) o << (s ? ";" : "") << num(r.stage_costs[s]);
    o << "\n";
  }
  return o.str();
}

std::string compare_text(const std::vector<CompareRow>& rows) {
  std::vector<std::vector<std::string>> cells{{"algorithm", "objective", "gap %", "shed MW"}};
  for (const CompareRow& r : rows) {
    cells.push_back({r.label, fixed(r.objective, 4), gap_cell(r), fixed(r.shed_mw, 4)});
  }
  std::vector<std::size_t> width(4, 0);
  for (const auto& row : cells)
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  std::ostringstream o;
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) o << "  ";
      o << pad(row[c], width[c], c > 0);
    }
    o << "\n";
  }
  return o.str();
}

}  // namespace mdop
