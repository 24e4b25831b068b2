// SPDX-License-Identifier: Apache-2.0
//
// Temporal decomposition: stage partition, dual-communicating MPC sweeps,
// receding horizon, and the relaxed Gauss-Seidel iteration.
//
// Duals of coupling rows follow the convex-engine convention (dV/d(rhs) =
// -lambda). The price a stage puts on its terminal state is the marginal
// value of that state to the next stage, i.e. -lambda_{s+1}.

#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "mdop/mip.hpp"
#include "mdop/plan.hpp"

namespace mdop {

struct StagePlan {
  int horizon = 0;
  int steps_per_stage = 0;  // K
  std::vector<Window> windows;
  std::vector<std::string> warnings;

  int stages() const { return static_cast<int>(windows.size()); }
};

/// K = ceil(T/S); the final window takes the remainder. Throws
/// std::invalid_argument when S < 1, S > T, or the ceiling leaves a stage
/// empty. With an instance, windows shorter than a generator's up/down time
/// produce warnings.
StagePlan partition(int horizon, int stages, const NetworkInstance* inst = nullptr);

using DualVector = std::vector<double>;

struct DualInit {
  std::vector<DualVector> lambda;  // per stage, duals of its coupling rows
  double relaxed_objective = 0.0;
  double seconds = 0.0;
};

/// Solves the continuous relaxation of the coupled stage model and reads the
/// duals of every stage's coupling rows.
DualInit init_duals(const NetworkInstance& inst, const LoadProfile& loads, const StagePlan& plan,
                    const QcqpOptions& opts = {});

/// Terminal prices of stage s (0-based) derived from the next stage's duals.
DualVector prices_from_duals(const DualVector& next_stage_lambda);

enum class DualMode { DualInit, ZeroInit };

struct DecompOptions {
  MipParams mip;
  bool compute_bound = true;  // lower bound from the relaxed monolith
};

class StageFailure : public std::runtime_error {
 public:
  StageFailure(const std::string& msg, int stage, int iteration)
      : std::runtime_error(msg), stage(stage), iteration(iteration) {}
  int stage;
  int iteration;
};

/// N forward sweeps priced by the previous sweep's downstream duals.
/// Returns the best stitched plan over all sweeps.
PlanSolution mpc_solve(const NetworkInstance& inst, const LoadProfile& loads, const StagePlan& plan, int iterations,
                       DualMode mode, const DecompOptions& opts = {});

/// One forward sweep with zero prices.
PlanSolution rh_solve(const NetworkInstance& inst, const LoadProfile& loads, const StagePlan& plan,
                      const DecompOptions& opts = {});

/// Monolithic branch-and-bound on the full horizon.
PlanSolution monolithic_solve(const NetworkInstance& inst, const LoadProfile& loads, const DecompOptions& opts = {});

struct RelaxationResult {
  PrimalDualSolution solution;
  MdopModel model;
  double objective = 0.0;
  double seconds = 0.0;
};

/// Continuous relaxation of the full-horizon model.
RelaxationResult relaxation_bound(const NetworkInstance& inst, const LoadProfile& loads, const QcqpOptions& opts = {});

/// Stage solution produced by a sweep, ready for stitching.
struct StageSolution {
  MdopModel model;
  std::vector<double> x;
  StageStats stats;
};

/// Concatenates stage trajectories, verifies boundary consistency at 1e-8
/// and fills the cost breakdown.
PlanSolution stitch(const NetworkInstance& inst, const std::vector<StageSolution>& stages, const StagePlan& plan);

/// 100 (ub - lb) / max(|lb|, 1e-9).
double relative_gap(double ub, double lb);

struct GaussSeidelOptions {
  int max_sweeps = 200;
  double tol = 1e-5;
  bool dual_init = false;
  double rho = 1000.0;  // augmented-Lagrangian weight on the coupling rows
  bool adaptive_rho = true;
  QcqpOptions convex;
};

struct GaussSeidelResult {
  PrimalDualSolution solution;  // over the coupled model's columns
  CoupledModel coupled;
  std::vector<double> residuals;   // per sweep
  std::vector<double> objectives;  // per sweep
  int sweeps = 0;
  bool converged = false;
  double objective = 0.0;
};

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sweeps over the relaxed stage problems until the system KKT residual
/// drops below tol. Each sweep solves the even stages, then the odd ones,
/// with an augmented Lagrangian on the coupling rows, then takes a multiplier
/// step lambda_s += rho (x_s[in] - x_{s-1}[out]). The residual of a sweep is
/// the largest of the coupled model's KKT residuals (stationarity over
/// 1 + |c|, primal over 1 + |b|, complementarity over 1 + |f|), the coupling
/// mismatch over 1 + |state| and rho times the boundary movement over
/// 1 + |lambda|. Throws DivergenceError when the residual grows tenfold over
/// five sweeps.
GaussSeidelResult gauss_seidel_relaxed(const NetworkInstance& inst, const LoadProfile& loads, const StagePlan& plan,
                                       const GaussSeidelOptions& opts = {});

}  // namespace mdop
