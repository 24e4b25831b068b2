// SPDX-License-Identifier: Apache-2.0

#include <chrono>
#include <cmath>

#include "mdop/harness.hpp"

namespace mdop {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

DecompOptions decomp_options(const RunConfig& cfg) {
  DecompOptions o;
  o.mip.gap_tol = cfg.gap_tol;
  o.mip.time_limit = cfg.time_limit;
  o.mip.seed = cfg.seed;
  o.compute_bound = true;
  return o;
}

bool stage_infeasible(const StageFailure& e) {
  return std::string(e.what()).find("infeasible") != std::string::npos;
}

}  // namespace

const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Mpc: return "mpc";
    case Algorithm::Rh: return "rh";
    case Algorithm::Monolithic: return "monolithic";
    case Algorithm::Relaxation: return "relaxation";
    case Algorithm::GaussSeidel: return "gauss-seidel";
  }
  return "?";
}

Algorithm parse_algorithm(const std::string& name) {
  for (Algorithm a : {Algorithm::Mpc, Algorithm::Rh, Algorithm::Monolithic, Algorithm::Relaxation,
                      Algorithm::GaussSeidel}) {
    if (name == to_string(a)) return a;
  }
  throw std::invalid_argument("unknown algorithm '" + name +
                              "' (expected mpc, rh, monolithic, relaxation or gauss-seidel)");
}

void validate_config(const RunConfig& cfg) {
  if (cfg.instance.empty()) throw std::invalid_argument("an instance directory is required");
  if (cfg.dt_minutes) {
    int dt = *cfg.dt_minutes;
    if (dt <= 0) throw std::invalid_argument("dt must be a positive number of minutes");
    if (60 % dt != 0 && dt % 60 != 0) {
      throw std::invalid_argument("dt of " + std::to_string(dt) + " minutes must divide 60 or be a multiple of 60");
    }
  }
  if (cfg.horizon_days && *cfg.horizon_days < 1) throw std::invalid_argument("horizon must be at least one day");
  bool staged = cfg.algorithm == Algorithm::Mpc || cfg.algorithm == Algorithm::Rh ||
                cfg.algorithm == Algorithm::GaussSeidel;
  if (staged && cfg.stages < 1) throw std::invalid_argument("stage count must be at least 1");
  if (cfg.algorithm == Algorithm::Mpc && cfg.iterations < 1) {
    throw std::invalid_argument("iteration count must be at least 1");
  }
  if (!(cfg.gap_tol >= 0)) throw std::invalid_argument("gap tolerance must be nonnegative");
  if (!(cfg.time_limit > 0)) throw std::invalid_argument("time limit must be positive");
  if (cfg.algorithm == Algorithm::GaussSeidel) {
    if (cfg.gs_max_sweeps < 1) throw std::invalid_argument("Gauss-Seidel needs at least one sweep");
    if (!(cfg.gs_tol > 0)) throw std::invalid_argument("Gauss-Seidel tolerance must be positive");
  }
  if (cfg.loads.empty()) parse_synth(cfg.synth);
}

void load_inputs(const RunConfig& cfg, NetworkInstance& inst, LoadProfile& loads) {
  try {
    inst = parse_instance(cfg.instance);
    if (cfg.dt_minutes) inst.dt_hours = *cfg.dt_minutes / 60.0;
    if (!cfg.loads.empty()) {
      loads = parse_loads(cfg.loads, inst, inst.dt_hours);
      if (cfg.horizon_days) {
        int steps = static_cast<int>(std::lround(*cfg.horizon_days * 24.0 / inst.dt_hours));
        if (steps > loads.horizon) {
          throw InstanceError(cfg.loads.string() + ": " + std::to_string(loads.horizon) + " steps cover less than " +
                              std::to_string(*cfg.horizon_days) + " day(s)");
        }
        loads = loads.slice(0, steps);
      }
    } else {
      SynthPreset preset = parse_synth(cfg.synth);
      SynthSpec spec;
      spec.days = cfg.horizon_days.value_or(1);
      spec.dt_hours = inst.dt_hours;
      spec.daily_amplitude = preset.daily_amplitude;
      spec.noise_amplitude = preset.noise_amplitude;
      spec.seed = cfg.seed;
      loads = synth_load(inst, spec);
    }
  } catch (const InstanceError& e) {
    throw ParseError(e.what());
  } catch (const std::invalid_argument& e) {
    throw ParseError(e.what());
  }
  if (loads.horizon < 1) throw ParseError("load profile is empty");
}

EfficiencyTightness efficiency_tightness(const NetworkInstance& inst, const PlanSolution& plan, double tol) {
  EfficiencyTightness out;
  for (std::size_t b = 0; b < inst.batteries.size(); ++b) {
    const BatterySpec& s = inst.batteries[b];
    for (int t = 0; t < plan.horizon; ++t) {
      double raw = plan.bat_raw[b][t];
      if (std::abs(raw) <= 1e-6) continue;
      ++out.active;
      double curve = std::min(s.eta_dis * raw, raw / s.eta_ch);
      double off = std::abs(curve - plan.bat_p[b][t]);
      out.worst = std::max(out.worst, off);
      if (off <= tol) ++out.tight;
    }
  }
  return out;
}

RunReport run(const RunConfig& cfg) {
  try {
    validate_config(cfg);
  } catch (const std::invalid_argument& e) {
    throw ParseError(e.what());
  }
  auto t0 = std::chrono::steady_clock::now();
  RunReport rep;
  rep.config = cfg;
  load_inputs(cfg, rep.instance, rep.loads);
  for (const std::string& w : rep.loads.warnings) rep.warnings.push_back(w);
  const NetworkInstance& inst = rep.instance;
  const LoadProfile& loads = rep.loads;
  DecompOptions opts = decomp_options(cfg);

  try {
    switch (cfg.algorithm) {
      case Algorithm::Mpc:
      case Algorithm::Rh: {
        StagePlan sp = partition(loads.horizon, cfg.stages, &inst);
        for (const std::string& w : sp.warnings) rep.warnings.push_back(w);
        rep.plan = cfg.algorithm == Algorithm::Mpc ? mpc_solve(inst, loads, sp, cfg.iterations, cfg.dual_mode, opts)
                                                   : rh_solve(inst, loads, sp, opts);
        break;
      }
      case Algorithm::Monolithic:
        rep.plan = monolithic_solve(inst, loads, opts);
        break;
      case Algorithm::Relaxation: {
        RelaxationResult r = relaxation_bound(inst, loads, opts.mip.convex);
        rep.lower_bound = r.objective;
        rep.objective = r.objective;
        break;
      }
      case Algorithm::GaussSeidel: {
        StagePlan sp = partition(loads.horizon, cfg.stages, &inst);
        for (const std::string& w : sp.warnings) rep.warnings.push_back(w);
        GaussSeidelOptions go;
        go.max_sweeps = cfg.gs_max_sweeps;
        go.tol = cfg.gs_tol;
        go.dual_init = cfg.dual_mode == DualMode::DualInit;
        go.convex = opts.mip.convex;
        rep.gauss_seidel = gauss_seidel_relaxed(inst, loads, sp, go);
        rep.objective = rep.gauss_seidel->objective;
        RelaxationResult r = relaxation_bound(inst, loads, opts.mip.convex);
        rep.lower_bound = r.objective;
        rep.relative_gap = relative_gap(rep.objective, rep.lower_bound);
        if (!rep.gauss_seidel->converged) {
          rep.warnings.push_back("Gauss-Seidel stopped after " + std::to_string(rep.gauss_seidel->sweeps) +
                                 " sweeps without reaching the residual tolerance");
        }
        break;
      }
    }
  } catch (const StageFailure& e) {
    if (stage_infeasible(e)) throw InfeasibleError(e.what());
    throw SolveError(e.what());
  } catch (const DivergenceError& e) {
    throw SolveError(e.what());
  } catch (const std::invalid_argument& e) {
    throw ParseError(e.what());
  } catch (const std::logic_error&) {
    throw;
  } catch (const std::runtime_error& e) {
    throw SolveError(e.what());
  }

  if (rep.plan) {
    const PlanSolution& p = *rep.plan;
    rep.objective = p.objective;
    rep.lower_bound = p.lower_bound;
    rep.relative_gap = p.relative_gap;
    rep.init_seconds = p.init_seconds;
    for (const SweepRecord& sw : p.sweeps) rep.iteration_seconds.push_back(sw.seconds);
    rep.feasibility = check_feasibility(inst, loads, p, 1e-6);
    rep.tightness = efficiency_tightness(inst, p);
    if (!rep.feasibility.ok()) {
      rep.warnings.push_back("plan violates " + std::to_string(rep.feasibility.violations.size()) +
                             " constraint(s) of the full-horizon model, worst " +
                             std::to_string(rep.feasibility.worst));
    }
    if (rep.tightness.fraction() < 1.0) {
      rep.warnings.push_back("efficiency relaxation is not tight on " +
                             std::to_string(rep.tightness.active - rep.tightness.tight) + " of " +
                             std::to_string(rep.tightness.active) + " battery steps");
    }
    if (p.total_shed_p() > 1e-6) {
      rep.warnings.push_back("plan sheds " + std::to_string(p.total_shed_p()) + " MW of load in total");
    }
  }
  rep.total_seconds = seconds_since(t0);
  if (!cfg.out.empty()) write_artifacts(rep, cfg.out);
  return rep;
}

}  // namespace mdop
