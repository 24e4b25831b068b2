// SPDX-License-Identifier: Apache-2.0
//
// Convex engine: QPs with a diagonal PSD objective, sparse linear rows and
// variable bounds, plus norm-ball rows handled by outer approximation.
//
// Dual sign convention. The Lagrangian is
//   L = f(x) + sum_i lambda_i (a_i x - b_i) - sum_j nl_j (x_j - l_j) + sum_j nu_j (x_j - u_j)
// so stationarity reads Q x + c + A^T lambda - nl + nu = 0. Duals of `<=` rows
// are >= 0, of `>=` rows <= 0, of `=` rows free; bound multipliers nl, nu >= 0.
// With this convention the derivative of the optimal value with respect to a
// row's right-hand side is -lambda_i.

#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace mdop {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class RowSense : std::uint8_t { Le, Eq, Ge };

/// Euclidean ball ||x_cols||_2 <= radius, where the radius is either a
/// constant or `radius_scale * x[radius_col]`.
struct NormBall {
  std::vector<int> cols;
  int radius_col = -1;
  double radius = 0.0;
  double radius_scale = 1.0;
};

class ConvexProgram {
 public:
  int add_var(double lower, double upper, double quad = 0.0, double linear = 0.0);
  int add_row(std::span<const int> cols, std::span<const double> vals, RowSense sense, double rhs);
  int add_row(std::initializer_list<std::pair<int, double>> terms, RowSense sense, double rhs);
  int add_ball(NormBall ball);

  int num_vars() const { return static_cast<int>(lower.size()); }
  int num_rows() const { return static_cast<int>(rhs.size()); }
  int num_balls() const { return static_cast<int>(balls.size()); }

  std::span<const int> row_cols(int r) const {
    return {row_col.data() + row_start[r], static_cast<std::size_t>(row_start[r + 1] - row_start[r])};
  }
  std::span<const double> row_vals(int r) const {
    return {row_val.data() + row_start[r], static_cast<std::size_t>(row_start[r + 1] - row_start[r])};
  }

  double row_activity(int r, std::span<const double> x) const;
  double objective_value(std::span<const double> x) const;
  double ball_violation(int b, std::span<const double> x) const;

  /// Throws std::invalid_argument when the objective is not PSD or a ball
  /// row is malformed.
  void certify_convex() const;

  // Objective: 0.5 * sum quad_j x_j^2 + sum linear_j x_j + constant.
  std::vector<double> lower, upper, quad, linear;
  double constant = 0.0;
  // Rows in compressed sparse row form.
  std::vector<int> row_start{0};
  std::vector<int> row_col;
  std::vector<double> row_val;
  std::vector<RowSense> sense;
  std::vector<double> rhs;
  std::vector<NormBall> balls;
};

enum class SolveStatus : std::uint8_t { Optimal, Infeasible, Unbounded, IterationLimit, CutLimit, NumericalError };

const char* to_string(SolveStatus s);

struct PrimalDualSolution {
  SolveStatus status = SolveStatus::NumericalError;
  std::vector<double> x;
  std::vector<double> row_duals;
  std::vector<double> lower_duals;
  std::vector<double> upper_duals;
  std::vector<double> ball_duals;  // sum of the duals of a ball's cuts
  double objective = 0.0;
  double primal_residual = kInf;  // max row / bound violation
  double dual_residual = kInf;    // ||Qx + c + A^T lambda - nl + nu||_inf
  double complementarity = kInf;  // max |slack * multiplier|
  double worst_ball_violation = 0.0;
  int iterations = 0;
  int cut_rounds = 0;
  std::string message;

  bool optimal() const { return status == SolveStatus::Optimal; }
};

struct QpOptions {
  double eps_abs = 1e-9;
  double eps_rel = 1e-9;
  double dual_eps_rel = 1e-9;
  double gap_rel = 1e-9;
  int max_iterations = 300;
  bool ruiz_scaling = true;
  int ruiz_passes = 10;
  std::string iteration_log;  // CSV path `iter,prim_res,dual_res,obj,mu,step`; empty disables
};

/// Primal-dual interior-point solve of the program's linear part. Ball rows
/// must be absent (use solve_qcqp).
PrimalDualSolution solve_qp(const ConvexProgram& program, const QpOptions& opts = {});

/// Supporting half-space of one ball: coeffs . x_cols - radius_coeff * x_radius <= rhs.
struct BallCut {
  int ball = -1;
  std::vector<double> coeffs;
  double radius_coeff = 0.0;
  double rhs = 0.0;
};

/// Cuts accumulated for one program's balls; reusable across solves that
/// only change bounds, right-hand sides or the objective.
struct CutPool {
  std::vector<BallCut> cuts;
  bool seeded = false;
};

struct QcqpOptions {
  QpOptions qp;
  double cut_tol = 1e-7;
  int max_rounds = 50;
};

/// Outer-approximation loop over solve_qp. Every added cut is a tangent plane
/// at the radial projection of the current iterate onto the violated ball.
PrimalDualSolution solve_qcqp(const ConvexProgram& program, const QcqpOptions& opts = {}, CutPool* pool = nullptr);

/// Duals of the requested rows. Throws std::logic_error for non-optimal solutions.
std::vector<double> get_duals(const PrimalDualSolution& sol, std::span<const int> row_ids);

/// Unscaled stationarity, primal and complementarity residuals of `sol`, in
/// max norm. Ball multipliers are refit from the gradient on each ball's
/// columns rather than taken from the cut sums.
struct KktResiduals {
  double stationarity = 0.0;
  double primal = 0.0;
  double complementarity = 0.0;
};
KktResiduals kkt_residuals(const ConvexProgram& program, const PrimalDualSolution& sol);

}  // namespace mdop
