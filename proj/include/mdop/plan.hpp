// SPDX-License-Identifier: Apache-2.0
//
// End-to-end plan: builds, per-step trajectories, costs and bounds.

#pragma once

#include <limits>
#include <string>
#include <vector>

#include "mdop/formulation.hpp"

namespace mdop {

using Series = std::vector<std::vector<double>>;  // [owner][step]

struct StageStats {
  int stage = 0;
  int start = 0;
  int end = 0;
  std::string status;
  long nodes = 0;
  double mip_gap = 0.0;
  double seconds = 0.0;
};

struct SweepRecord {
  int iteration = 0;
  double objective = 0.0;
  double seconds = 0.0;
  std::vector<std::vector<double>> prices;  // prices used by each stage
  std::vector<std::vector<double>> duals;   // coupling-row duals returned by each stage
};

struct PlanSolution {
  int horizon = 0;
  BuildDecision builds;
  Series commit, start, stop, gen_p, gen_q, gen_raw;
  Series bat_p, bat_q, bat_raw, soc;
  Series voltage, shed_p, shed_q;
  Series line_p, line_q;
  std::vector<double> grid_p, grid_q;

  ObjectiveTerms cost;
  std::vector<ObjectiveTerms> stage_costs;
  double objective = 0.0;
  double lower_bound = std::numeric_limits<double>::quiet_NaN();
  double relative_gap = std::numeric_limits<double>::quiet_NaN();
  int best_iteration = 0;
  double init_seconds = 0.0;  // dual seeding by the continuous relaxation

  std::vector<StageStats> stage_stats;
  std::vector<SweepRecord> sweeps;

  double total_shed_p() const;
};

/// Empty plan sized for the instance and horizon.
PlanSolution empty_plan(const NetworkInstance& inst, int horizon);

/// Copies the window's operation values (and builds, when the window owns
/// them or carries them as coupled data) from a model solution.
void write_window(const NetworkInstance& inst, const MdopModel& model, std::span<const double> x, PlanSolution& plan);

/// Equality of every decision, cost and bound; timings and sweep history
/// are ignored.
bool same_decisions(const PlanSolution& a, const PlanSolution& b);

/// Column vector of the full-horizon model that represents `plan`.
std::vector<double> plan_to_columns(const NetworkInstance& inst, const MdopModel& monolith, const PlanSolution& plan);

struct Violation {
  std::string row;
  double magnitude = 0.0;
};

struct FeasibilityReport {
  std::vector<Violation> violations;
  double worst = 0.0;
  bool ok() const { return violations.empty(); }
};

/// Evaluates every row, ball, bound and integrality of the full-horizon
/// model at the plan.
FeasibilityReport check_feasibility(const NetworkInstance& inst, const LoadProfile& loads, const PlanSolution& plan,
                                    double tol);

std::string row_label(const NetworkInstance& inst, const RowTag& tag);
std::string var_label(const NetworkInstance& inst, const VarRef& ref);

}  // namespace mdop
