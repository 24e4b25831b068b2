// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "mdop/convex.hpp"

namespace mdop {

int ConvexProgram::add_var(double lo, double up, double q, double c) {
  lower.push_back(lo);
  upper.push_back(up);
  quad.push_back(q);
  linear.push_back(c);
  return num_vars() - 1;
}

int ConvexProgram::add_row(std::span<const int> cols, std::span<const double> vals, RowSense s, double b) {
  if (cols.size() != vals.size()) throw std::invalid_argument("add_row: size mismatch");
  for (std::size_t k = 0; k < cols.size(); ++k) {
    if (cols[k] < 0 || cols[k] >= num_vars()) throw std::out_of_range("add_row: column out of range");
    row_col.push_back(cols[k]);
    row_val.push_back(vals[k]);
  }
  row_start.push_back(static_cast<int>(row_col.size()));
  sense.push_back(s);
  rhs.push_back(b);
  return num_rows() - 1;
}

int ConvexProgram::add_row(std::initializer_list<std::pair<int, double>> terms, RowSense s, double b) {
  std::vector<int> c;
  std::vector<double> v;
  for (auto [col, val] : terms) {
    c.push_back(col);
    v.push_back(val);
  }
  return add_row(c, v, s, b);
}

int ConvexProgram::add_ball(NormBall ball) {
  balls.push_back(std::move(ball));
  return num_balls() - 1;
}

double ConvexProgram::row_activity(int r, std::span<const double> x) const {
  double a = 0;
  for (int k = row_start[r]; k < row_start[r + 1]; ++k) a += row_val[k] * x[row_col[k]];
  return a;
}

double ConvexProgram::objective_value(std::span<const double> x) const {
  double f = constant;
  for (int j = 0; j < num_vars(); ++j) f += 0.5 * quad[j] * x[j] * x[j] + linear[j] * x[j];
  return f;
}

double ConvexProgram::ball_violation(int b, std::span<const double> x) const {
  const NormBall& ball = balls[b];
  double ss = 0;
  for (int c : ball.cols) ss += x[c] * x[c];
  double radius = ball.radius_col >= 0 ? ball.radius_scale * x[ball.radius_col] : ball.radius;
  return std::sqrt(ss) - radius;
}

void ConvexProgram::certify_convex() const {
  for (int j = 0; j < num_vars(); ++j) {
    if (!(quad[j] >= 0)) throw std::invalid_argument("objective is not PSD at column " + std::to_string(j));
  }
  for (int b = 0; b < num_balls(); ++b) {
    const NormBall& ball = balls[b];
    if (ball.cols.empty()) throw std::invalid_argument("ball " + std::to_string(b) + " has no columns");
    std::set<int> seen;
    for (int c : ball.cols) {
      if (c < 0 || c >= num_vars() || !seen.insert(c).second) {
        throw std::invalid_argument("ball " + std::to_string(b) + " has an invalid column list");
      }
    }
    if (ball.radius_col >= 0) {
      if (ball.radius_col >= num_vars() || seen.count(ball.radius_col)) {
        throw std::invalid_argument("ball " + std::to_string(b) + " has an invalid radius column");
      }
      if (!(ball.radius_scale > 0)) throw std::invalid_argument("ball radius scale must be positive");
      if (lower[ball.radius_col] < 0) {
        throw std::invalid_argument("ball " + std::to_string(b) + " radius column must be nonnegative");
      }
    } else if (!(ball.radius >= 0)) {
      throw std::invalid_argument("ball " + std::to_string(b) + " has a negative radius");
    }
  }
}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::Unbounded: return "unbounded";
    case SolveStatus::IterationLimit: return "iteration-limit";
    case SolveStatus::CutLimit: return "cut-round-limit";
    case SolveStatus::NumericalError: return "numerical-error";
  }
  return "unknown";
}

std::vector<double> get_duals(const PrimalDualSolution& sol, std::span<const int> row_ids) {
  if (!sol.optimal()) throw std::logic_error(std::string("get_duals: solution status is ") + to_string(sol.status));
  std::vector<double> out;
  out.reserve(row_ids.size());
  for (int r : row_ids) {
    if (r < 0 || r >= static_cast<int>(sol.row_duals.size())) throw std::out_of_range("get_duals: row id out of range");
    out.push_back(sol.row_duals[r]);
  }
  return out;
}

KktResiduals kkt_residuals(const ConvexProgram& p, const PrimalDualSolution& sol) {
  KktResiduals res;
  const int n = p.num_vars();
  std::vector<double> g(n);
  for (int j = 0; j < n; ++j) g[j] = p.quad[j] * sol.x[j] + p.linear[j] - sol.lower_duals[j] + sol.upper_duals[j];
  for (int r = 0; r < p.num_rows(); ++r) {
    double lam = sol.row_duals[r];
    for (int k = p.row_start[r]; k < p.row_start[r + 1]; ++k) g[p.row_col[k]] += lam * p.row_val[k];
    double act = p.row_activity(r, sol.x);
    double viol = 0;
    switch (p.sense[r]) {
      case RowSense::Le: viol = std::max(0.0, act - p.rhs[r]); break;
      case RowSense::Ge: viol = std::max(0.0, p.rhs[r] - act); break;
      case RowSense::Eq: viol = std::abs(act - p.rhs[r]); break;
    }
    res.primal = std::max(res.primal, viol);
    if (p.sense[r] != RowSense::Eq) res.complementarity = std::max(res.complementarity, std::abs(lam * (act - p.rhs[r])));
  }
  // The outer approximation reports ball multipliers only as sums over cuts,
  // so each ball's multiplier is refit here: the nonnegative kappa that best
  // cancels the Lagrangian gradient on the ball's own columns. The radius
  // column is left out of the fit since several balls may share it.
  for (int b = 0; b < p.num_balls(); ++b) {
    const NormBall& ball = p.balls[b];
    const double rs = ball.radius_col >= 0 ? ball.radius_scale : 0.0;
    double nrm = 0;
    for (int c : ball.cols) nrm += sol.x[c] * sol.x[c];
    nrm = std::sqrt(nrm);
    double kappa = 0;
    if (nrm > 1e-12) {
      double gd = 0;
      for (int c : ball.cols) gd += g[c] * sol.x[c] / nrm;
      kappa = std::max(0.0, -gd);
      for (int c : ball.cols) g[c] += kappa * sol.x[c] / nrm;
    } else {
      // At the origin the subgradient is any vector of norm at most kappa.
      for (int c : ball.cols) kappa += g[c] * g[c];
      kappa = std::sqrt(kappa);
      for (int c : ball.cols) g[c] = 0;
    }
    if (ball.radius_col >= 0) g[ball.radius_col] -= kappa * rs;
    double viol = p.ball_violation(b, sol.x);
    res.primal = std::max(res.primal, std::max(0.0, viol));
    res.complementarity = std::max(res.complementarity, std::abs(kappa * viol));
  }
  for (int j = 0; j < n; ++j) {
    res.stationarity = std::max(res.stationarity, std::abs(g[j]));
    if (std::isfinite(p.lower[j])) {
      res.primal = std::max(res.primal, p.lower[j] - sol.x[j]);
      if (p.lower[j] != p.upper[j]) {
        res.complementarity = std::max(res.complementarity, std::abs(sol.lower_duals[j] * (sol.x[j] - p.lower[j])));
      }
    }
    if (std::isfinite(p.upper[j])) {
      res.primal = std::max(res.primal, sol.x[j] - p.upper[j]);
      if (p.lower[j] != p.upper[j]) {
        res.complementarity = std::max(res.complementarity, std::abs(sol.upper_duals[j] * (p.upper[j] - sol.x[j])));
      }
    }
  }
  return res;
}

}  // namespace mdop
