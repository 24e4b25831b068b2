// SPDX-License-Identifier: Apache-2.0

#include "mdop/decomposition.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace mdop {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

}  // namespace

StagePlan partition(int horizon, int stages, const NetworkInstance* inst) {
  if (stages < 1) throw std::invalid_argument("partition: stage count must be at least 1");
  if (stages > horizon) {
    throw std::invalid_argument("partition: " + std::to_string(stages) + " stages exceed the horizon of " +
                                std::to_string(horizon) + " steps");
  }
  StagePlan p;
  p.horizon = horizon;
  p.steps_per_stage = (horizon + stages - 1) / stages;
  for (int s = 0; s < stages; ++s) {
    int a = s * p.steps_per_stage;
    int e = std::min(horizon, a + p.steps_per_stage);
    if (a >= e) {
      throw std::invalid_argument("partition: T=" + std::to_string(horizon) + ", S=" + std::to_string(stages) +
                                  " leaves stage " + std::to_string(s + 1) + " empty with K=" +
                                  std::to_string(p.steps_per_stage));
    }
    p.windows.push_back(Window{a, e, s == 0, s == stages - 1});
  }
  if (inst) {
    for (const auto& g : inst->generators) {
      int need = std::max(g.up_time, g.down_time);
      for (int s = 0; s < stages; ++s) {
        if (p.windows[s].length() < need) {
          p.warnings.push_back("stage " + std::to_string(s + 1) + " has " + std::to_string(p.windows[s].length()) +
                               " steps, fewer than the up/down time " + std::to_string(need) + " of generator '" +
                               g.id + "'");
          break;
        }
      }
    }
  }
  return p;
}

double relative_gap(double ub, double lb) { return 100.0 * (ub - lb) / std::max(std::abs(lb), 1e-9); }

DualVector prices_from_duals(const DualVector& lam) {
  DualVector p(lam.size());
  for (std::size_t k = 0; k < lam.size(); ++k) p[k] = lam[k] == 0.0 ? 0.0 : -lam[k];
  return p;
}

DualInit init_duals(const NetworkInstance& inst, const LoadProfile& loads, const StagePlan& plan,
                    const QcqpOptions& opts) {
  auto t0 = Clock::now();
  CoupledModel cm = assemble_coupled(inst, loads, plan.windows);
  PrimalDualSolution sol = solve_qcqp(cm.model.program, opts);
  if (!sol.optimal()) {
    throw std::runtime_error(std::string("init_duals: continuous relaxation failed: ") + to_string(sol.status));
  }
  DualInit out;
  for (const auto& rows : cm.coupling_rows) out.lambda.push_back(get_duals(sol, rows));
  out.relaxed_objective = sol.objective;
  out.seconds = seconds_since(t0);
  return out;
}

RelaxationResult relaxation_bound(const NetworkInstance& inst, const LoadProfile& loads, const QcqpOptions& opts) {
  auto t0 = Clock::now();
  RelaxationResult r;
  r.model = relax_integrality(assemble_monolith(inst, loads));
  r.solution = solve_qcqp(r.model.program, opts);
  if (!r.solution.optimal()) {
    throw std::runtime_error(std::string("continuous relaxation failed: ") + to_string(r.solution.status));
  }
  r.objective = r.solution.objective;
  r.seconds = seconds_since(t0);
  return r;
}

PlanSolution stitch(const NetworkInstance& inst, const std::vector<StageSolution>& stages, const StagePlan& plan) {
  if (static_cast<int>(stages.size()) != plan.stages()) throw std::logic_error("stitch: stage count mismatch");
  PlanSolution out = empty_plan(inst, plan.horizon);
  for (std::size_t s = 0; s < stages.size(); ++s) {
    const StageSolution& st = stages[s];
    if (st.model.window.start != plan.windows[s].start || st.model.window.end != plan.windows[s].end) {
      throw std::logic_error("stitch: stage window does not match the plan");
    }
    if (s > 0) {
      const StageSolution& prev = stages[s - 1];
      for (std::size_t k = 0; k < st.model.in_slots.size(); ++k) {
        double a = prev.x[prev.model.out_cols[k]];
        double b = st.x[st.model.in_cols[k]];
        if (!(std::abs(a - b) <= 1e-8)) {
          throw std::logic_error("stitch: boundary mismatch at stage " + std::to_string(s + 1) + " slot " +
                                 std::to_string(k) + " (" + to_string(st.model.in_slots[k].kind) + "): " +
                                 std::to_string(a) + " vs " + std::to_string(b));
        }
      }
    }
    // Builds come from stage 1; downstream stages carry the same values.
    BuildDecision keep = out.builds;
    write_window(inst, st.model, st.x, out);
    if (s > 0) out.builds = keep;
    ObjectiveTerms terms = objective_terms(inst, st.model, st.x);
    out.stage_costs.push_back(terms);
    out.cost.build += terms.build;
    out.cost.generation += terms.generation;
    out.cost.shed += terms.shed;
    out.stage_stats.push_back(st.stats);
  }
  out.objective = out.cost.total();
  return out;
}

namespace {

struct SweepOutput {
  PlanSolution plan;
  std::vector<DualVector> lambda;  // per stage
};

// One forward pass over the stages. prices[s] is used for every stage but the last.
SweepOutput sweep(const NetworkInstance& inst, const LoadProfile& loads, const StagePlan& plan,
                  const std::vector<DualVector>& prices, const DecompOptions& opts, std::vector<CutPool>& pools,
                  int iteration) {
  SweepOutput out;
  std::vector<StageSolution> solved;
  BoundaryState boundary = BoundaryState::initial(inst);
  for (int s = 0; s < plan.stages(); ++s) {
    auto t0 = Clock::now();
    const Window& w = plan.windows[s];
    const DualVector* pr = w.last ? nullptr : &prices[s];
    StageSolution st;
    st.model = assemble(inst, loads, w, boundary, pr);
    MipResult mip = solve_miqcqp(st.model, opts.mip);
    if (!mip.has_incumbent) {
      throw StageFailure("stage " + std::to_string(s + 1) + " of iteration " + std::to_string(iteration) +
                             " has no feasible solution (" + to_string(mip.status) + ")",
                         s + 1, iteration);
    }
    PrimalDualSolution fixed;
    try {
      fixed = solve_fixed_then_duals(st.model, mip.binaries, opts.mip.convex, &pools[s]);
    } catch (const std::exception& e) {
      throw StageFailure("stage " + std::to_string(s + 1) + " of iteration " + std::to_string(iteration) + ": " + e.what(),
                         s + 1, iteration);
    }
    out.lambda.push_back(get_duals(fixed, st.model.in_rows));
    st.x = mip.x;
    st.stats = StageStats{s + 1, w.start, w.end, to_string(mip.status), mip.nodes, mip.gap, seconds_since(t0)};
    boundary = terminal_state(inst, st.model, st.x);
    solved.push_back(std::move(st));
  }
  out.plan = stitch(inst, solved, plan);
  return out;
}

void attach_bound(const NetworkInstance& inst, const LoadProfile& loads, const DecompOptions& opts, PlanSolution& p) {
  if (!opts.compute_bound) return;
  RelaxationResult lb = relaxation_bound(inst, loads, opts.mip.convex);
  p.lower_bound = lb.objective;
  p.relative_gap = relative_gap(p.objective, lb.objective);
}

}  // namespace

PlanSolution mpc_solve(const NetworkInstance& inst, const LoadProfile& loads, const StagePlan& plan, int iterations,
                       DualMode mode, const DecompOptions& opts) {
  if (iterations < 1) throw std::invalid_argument("mpc_solve: iteration count must be at least 1");
  const int S = plan.stages();
  const std::size_t nslots = state_slots(inst, true).size();
  std::vector<DualVector> lambda(S, DualVector(nslots, 0.0));
  double init_seconds = 0.0;
  if (mode == DualMode::DualInit && S > 1) {
    DualInit init = init_duals(inst, loads, plan, opts.mip.convex);
    for (int s = 1; s < S; ++s) lambda[s] = init.lambda[s];
    init_seconds = init.seconds;
  }
  std::vector<CutPool> pools(S);
  PlanSolution best;
  bool have_best = false;
  std::vector<SweepRecord> history;
  for (int it = 1; it <= iterations; ++it) {
    auto t0 = Clock::now();
    std::vector<DualVector> prices(S, DualVector(nslots, 0.0));
    for (int s = 0; s + 1 < S; ++s) prices[s] = prices_from_duals(lambda[s + 1]);
    SweepOutput so = sweep(inst, loads, plan, prices, opts, pools, it);
    SweepRecord rec;
    rec.iteration = it;
    rec.objective = so.plan.objective;
    rec.prices = prices;
    rec.duals = so.lambda;
    rec.seconds = seconds_since(t0);
    history.push_back(rec);
    for (int s = 1; s < S; ++s) lambda[s] = so.lambda[s];
    if (!have_best || so.plan.objective < best.objective) {
      best = std::move(so.plan);
      best.best_iteration = it;
      have_best = true;
    }
  }
  attach_bound(inst, loads, opts, best);
  best.init_seconds = init_seconds;
  best.sweeps = std::move(history);
  return best;
}

PlanSolution rh_solve(const NetworkInstance& inst, const LoadProfile& loads, const StagePlan& plan,
                      const DecompOptions& opts) {
  const int S = plan.stages();
  const std::size_t nslots = state_slots(inst, true).size();
  std::vector<DualVector> prices(S, DualVector(nslots, 0.0));
  std::vector<CutPool> pools(S);
  auto t0 = Clock::now();
  SweepOutput so = sweep(inst, loads, plan, prices, opts, pools, 1);
  PlanSolution out = std::move(so.plan);
  out.best_iteration = 1;
  attach_bound(inst, loads, opts, out);
  SweepRecord rec;
  rec.iteration = 1;
  rec.objective = out.objective;
  rec.prices = prices;
  rec.duals = so.lambda;
  rec.seconds = seconds_since(t0);
  out.sweeps.push_back(std::move(rec));
  return out;
}

PlanSolution monolithic_solve(const NetworkInstance& inst, const LoadProfile& loads, const DecompOptions& opts) {
  StagePlan plan = partition(loads.horizon, 1, &inst);
  auto t0 = Clock::now();
  StageSolution st;
  st.model = assemble_monolith(inst, loads);
  MipResult mip = solve_miqcqp(st.model, opts.mip);
  if (!mip.has_incumbent) throw StageFailure(std::string("monolithic solve: ") + to_string(mip.status), 1, 1);
  st.x = mip.x;
  st.stats = StageStats{1, 0, loads.horizon, to_string(mip.status), mip.nodes, mip.gap, seconds_since(t0)};
  std::vector<StageSolution> v;
  v.push_back(std::move(st));
  PlanSolution out = stitch(inst, v, plan);
  out.best_iteration = 1;
  attach_bound(inst, loads, opts, out);
  return out;
}

namespace {

// One stage block of the coupled relaxation. For stages after the first the
// rows pinning the initial state are dropped: the coupling moves into the
// augmented Lagrangian.
struct AdmmBlock {
  ConvexProgram base;
  std::vector<int> row_of;  // base row -> row of the stage model
  std::vector<int> in_cols, out_cols;
};

AdmmBlock make_block(const MdopModel& m, bool keep_in_rows) {
  AdmmBlock b;
  const ConvexProgram& p = m.program;
  std::vector<char> drop(p.num_rows(), 0);
  if (!keep_in_rows)
    for (int r : m.in_rows) drop[r] = 1;
  for (int j = 0; j < p.num_vars(); ++j) b.base.add_var(p.lower[j], p.upper[j], p.quad[j], p.linear[j]);
  b.base.constant = p.constant;
  for (int r = 0; r < p.num_rows(); ++r) {
    if (drop[r]) continue;
    b.base.add_row(p.row_cols(r), p.row_vals(r), p.sense[r], p.rhs[r]);
    b.row_of.push_back(r);
  }
  b.base.balls = p.balls;
  b.in_cols = m.in_cols;
  b.out_cols = m.out_cols;
  return b;
}

}  // namespace

GaussSeidelResult gauss_seidel_relaxed(const NetworkInstance& inst, const LoadProfile& loads, const StagePlan& plan,
                                       const GaussSeidelOptions& opts) {
  const int S = plan.stages();
  GaussSeidelResult res;
  res.coupled = assemble_coupled(inst, loads, plan.windows);
  CoupledModel& cm = res.coupled;
  for (MdopModel& st : cm.stages) st = relax_integrality(st);
  cm.model = relax_integrality(cm.model);
  const ConvexProgram& full = cm.model.program;

  std::vector<AdmmBlock> blocks;
  for (int s = 0; s < S; ++s) blocks.push_back(make_block(cm.stages[s], s == 0));
  // lambda[s][k]: multiplier of x_s[in_k] - x_{s-1}[out_k] = 0, s >= 1.
  std::vector<DualVector> lambda(S);
  for (int s = 1; s < S; ++s) lambda[s].assign(blocks[s].in_cols.size(), 0.0);
  if (opts.dual_init && S > 1) {
    DualInit init = init_duals(inst, loads, plan, opts.convex);
    for (int s = 1; s < S; ++s) lambda[s] = init.lambda[s];
  }
  std::vector<std::vector<double>> x(S);
  for (int s = 0; s < S; ++s) x[s].assign(blocks[s].base.num_vars(), 0.0);
  std::vector<PrimalDualSolution> sol(S);
  std::vector<CutPool> pools(S);
  double rho = opts.rho;

  double c_norm = 0, b_norm = 0;
  for (double c : full.linear) c_norm = std::max(c_norm, std::abs(c));
  for (double b : full.rhs) b_norm = std::max(b_norm, std::abs(b));

  auto solve_stage = [&](int s, int sweep_no) {
    const AdmmBlock& b = blocks[s];
    ConvexProgram prog = b.base;
    if (s > 0) {
      for (std::size_t k = 0; k < b.in_cols.size(); ++k) {
        int c = b.in_cols[k];
        double v = x[s - 1][blocks[s - 1].out_cols[k]];
        prog.quad[c] += rho;
        prog.linear[c] += lambda[s][k] - rho * v;
      }
    }
    if (s + 1 < S) {
      for (std::size_t k = 0; k < b.out_cols.size(); ++k) {
        int c = b.out_cols[k];
        double w = x[s + 1][blocks[s + 1].in_cols[k]];
        prog.quad[c] += rho;
        prog.linear[c] += -lambda[s + 1][k] - rho * w;
      }
    }
    sol[s] = solve_qcqp(prog, opts.convex, &pools[s]);
    if (!sol[s].optimal()) {
      throw std::runtime_error("gauss_seidel_relaxed: stage " + std::to_string(s + 1) + " sweep " +
                               std::to_string(sweep_no) + ": " + to_string(sol[s].status));
    }
    x[s] = sol[s].x;
  };

  // Assembles the stage iterates into the coupled model's space.
  auto assemble_point = [&]() {
    PrimalDualSolution out;
    out.x.assign(full.num_vars(), 0.0);
    out.row_duals.assign(full.num_rows(), 0.0);
    out.lower_duals.assign(full.num_vars(), 0.0);
    out.upper_duals.assign(full.num_vars(), 0.0);
    out.ball_duals.assign(full.num_balls(), 0.0);
    for (int s = 0; s < S; ++s) {
      const PrimalDualSolution& ss = sol[s];
      const int co = cm.col_offset[s], ro = cm.row_offset[s], bo = cm.ball_offset[s];
      for (std::size_t j = 0; j < ss.x.size(); ++j) {
        out.x[co + j] = ss.x[j];
        out.lower_duals[co + j] = ss.lower_duals[j];
        out.upper_duals[co + j] = ss.upper_duals[j];
      }
      for (std::size_t r = 0; r < blocks[s].row_of.size(); ++r) out.row_duals[ro + blocks[s].row_of[r]] = ss.row_duals[r];
      for (std::size_t b = 0; b < ss.ball_duals.size(); ++b) out.ball_duals[bo + b] = ss.ball_duals[b];
      if (s > 0) {
        for (std::size_t k = 0; k < lambda[s].size(); ++k) out.row_duals[cm.coupling_rows[s][k]] = lambda[s][k];
      }
    }
    return out;
  };

  for (int sweep_no = 1; sweep_no <= opts.max_sweeps; ++sweep_no) {
    // Red-black order: with the even stages fixed the odd ones decouple, so
    // the sweep is a two-block splitting of the coupled relaxation.
    std::vector<std::vector<double>> before = x;
    for (int parity : {0, 1})
      for (int s = parity; s < S; s += 2) solve_stage(s, sweep_no);
    // Coupling mismatch, movement of the boundary values and their scales.
    double mismatch = 0, drift = 0, state = 0, price = 0;
    for (int s = 1; s < S; ++s) {
      for (std::size_t k = 0; k < lambda[s].size(); ++k) {
        int ci = blocks[s].in_cols[k], co = blocks[s - 1].out_cols[k];
        double a = x[s][ci] - x[s - 1][co];
        lambda[s][k] += rho * a;
        mismatch = std::max(mismatch, std::abs(a));
        drift = std::max({drift, std::abs(x[s][ci] - before[s][ci]), std::abs(x[s - 1][co] - before[s - 1][co])});
        state = std::max({state, std::abs(x[s][ci]), std::abs(x[s - 1][co])});
        price = std::max(price, std::abs(lambda[s][k]));
      }
    }
    PrimalDualSolution point = assemble_point();
    KktResiduals kr = kkt_residuals(full, point);
    double objective = full.objective_value(point.x);
    double kkt = std::max({kr.stationarity / (1.0 + c_norm), kr.primal / (1.0 + b_norm),
                           kr.complementarity / (1.0 + std::abs(objective))});
    // The splitting's own primal and dual residuals: the system residual
    // alone is scaled by the largest cost and hides price-level errors.
    double split_primal = mismatch / (1.0 + state);
    double split_dual = rho * drift / (1.0 + price);
    double residual = std::max({kkt, split_primal, split_dual});
    res.residuals.push_back(residual);
    res.objectives.push_back(objective);
    res.sweeps = sweep_no;
    res.objective = objective;
    res.solution = std::move(point);
    if (residual <= opts.tol) {
      res.converged = true;
      break;
    }
    if (res.residuals.size() > 5) {
      double then = res.residuals[res.residuals.size() - 6];
      if (residual > 10.0 * then) {
        throw DivergenceError("gauss_seidel_relaxed: residual grew from " + std::to_string(then) + " to " +
                              std::to_string(residual) + " over 5 sweeps");
      }
    }
    // Residual balancing keeps the splitting's primal and dual residuals
    // within a factor of ten of each other. Spacing the updates lets the
    // multipliers settle between changes of rho.
    if (opts.adaptive_rho && sweep_no % 10 == 0) {
      if (split_primal > 10.0 * split_dual) rho *= 2.0;
      else if (split_dual > 10.0 * split_primal) rho /= 2.0;
    }
  }
  PrimalDualSolution& out = res.solution;
  out.status = res.converged ? SolveStatus::Optimal : SolveStatus::IterationLimit;
  out.objective = full.objective_value(out.x);
  out.iterations = res.sweeps;
  if (!res.residuals.empty()) out.dual_residual = res.residuals.back();
  return res;
}

}  // namespace mdop
