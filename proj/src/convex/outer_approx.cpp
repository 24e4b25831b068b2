// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mdop/convex.hpp"

namespace mdop {
namespace {

double ball_radius(const NormBall& b, std::span<const double> x) {
  return b.radius_col >= 0 ? b.radius_scale * x[b.radius_col] : b.radius;
}

// A ball whose radius is pinned at zero collapses its columns to the origin.
bool collapsed(const ConvexProgram& p, const NormBall& b) {
  if (b.radius_col >= 0) return p.upper[b.radius_col] <= 0.0;
  return b.radius == 0.0;
}

int add_cut_row(ConvexProgram& work, const ConvexProgram& p, const BallCut& cut) {
  const NormBall& b = p.balls[cut.ball];
  std::vector<int> cols;
  std::vector<double> vals;
  for (std::size_t k = 0; k < b.cols.size(); ++k) {
    if (cut.coeffs[k] == 0.0) continue;
    cols.push_back(b.cols[k]);
    vals.push_back(cut.coeffs[k]);
  }
  if (b.radius_col >= 0 && cut.radius_coeff != 0.0) {
    cols.push_back(b.radius_col);
    vals.push_back(-cut.radius_coeff);
  }
  return work.add_row(cols, vals, RowSense::Le, cut.rhs);
}

BallCut tangent_cut(const ConvexProgram& p, int bi, std::span<const double> x) {
  const NormBall& b = p.balls[bi];
  double nrm = 0;
  for (int c : b.cols) nrm += x[c] * x[c];
  nrm = std::sqrt(nrm);
  BallCut cut;
  cut.ball = bi;
  cut.coeffs.resize(b.cols.size());
  for (std::size_t k = 0; k < b.cols.size(); ++k) cut.coeffs[k] = x[b.cols[k]] / nrm;
  if (b.radius_col >= 0) {
    cut.radius_coeff = b.radius_scale;
    cut.rhs = 0.0;
  } else {
    cut.rhs = b.radius;
  }
  return cut;
}

std::vector<BallCut> seed_cuts(const ConvexProgram& p) {
  std::vector<BallCut> out;
  for (int bi = 0; bi < p.num_balls(); ++bi) {
    const NormBall& b = p.balls[bi];
    for (std::size_t k = 0; k < b.cols.size(); ++k) {
      for (double sg : {1.0, -1.0}) {
        BallCut cut;
        cut.ball = bi;
        cut.coeffs.assign(b.cols.size(), 0.0);
        cut.coeffs[k] = sg;
        if (b.radius_col >= 0) cut.radius_coeff = b.radius_scale;
        else cut.rhs = b.radius;
        out.push_back(std::move(cut));
      }
    }
  }
  return out;
}

}  // namespace

PrimalDualSolution solve_qcqp(const ConvexProgram& program, const QcqpOptions& opts, CutPool* pool) {
  program.certify_convex();
  if (program.num_balls() == 0) return solve_qp(program, opts.qp);

  ConvexProgram work = program;
  work.balls.clear();
  for (const NormBall& b : program.balls) {
    if (!collapsed(program, b)) continue;
    for (int c : b.cols) {
      if (work.lower[c] > 0.0 || work.upper[c] < 0.0) {
        PrimalDualSolution out;
        out.status = SolveStatus::Infeasible;
        out.message = "ball with zero radius excludes the origin on column " + std::to_string(c);
        return out;
      }
      work.lower[c] = 0.0;
      work.upper[c] = 0.0;
    }
  }

  CutPool local;
  CutPool& cp = pool ? *pool : local;
  if (!cp.seeded) {
    cp.cuts = seed_cuts(program);
    cp.seeded = true;
  }
  std::vector<int> cut_ball;
  for (const BallCut& cut : cp.cuts) {
    if (cut.ball < 0 || cut.ball >= program.num_balls()) throw std::invalid_argument("cut pool does not match program");
    add_cut_row(work, program, cut);
    cut_ball.push_back(cut.ball);
  }

  PrimalDualSolution sol;
  int total_iters = 0;
  int round = 0;
  for (;; ++round) {
    sol = solve_qp(work, opts.qp);
    total_iters += sol.iterations;
    if (!sol.optimal()) break;
    int added = 0;
    double worst = 0;
    for (int bi = 0; bi < program.num_balls(); ++bi) {
      const NormBall& b = program.balls[bi];
      if (collapsed(program, b)) continue;
      double viol = program.ball_violation(bi, sol.x);
      worst = std::max(worst, viol);
      if (viol <= opts.cut_tol * (1.0 + std::abs(ball_radius(b, sol.x)))) continue;
      if (round >= opts.max_rounds) continue;
      BallCut cut = tangent_cut(program, bi, sol.x);
      add_cut_row(work, program, cut);
      cut_ball.push_back(bi);
      cp.cuts.push_back(std::move(cut));
      ++added;
    }
    sol.worst_ball_violation = worst;
    if (added == 0) {
      double limit = 0;
      for (int bi = 0; bi < program.num_balls(); ++bi) {
        if (collapsed(program, program.balls[bi])) continue;
        double v = program.ball_violation(bi, sol.x);
        if (v > opts.cut_tol * (1.0 + std::abs(ball_radius(program.balls[bi], sol.x)))) limit = std::max(limit, v);
      }
      if (limit > 0) {
        sol.status = SolveStatus::CutLimit;
        sol.message = "ball rows still violated after " + std::to_string(opts.max_rounds) + " cut rounds";
      }
      break;
    }
  }

  PrimalDualSolution out = std::move(sol);
  out.iterations = total_iters;
  out.cut_rounds = round;
  out.ball_duals.assign(program.num_balls(), 0.0);
  if (!out.row_duals.empty()) {
    for (std::size_t k = 0; k < cut_ball.size(); ++k) out.ball_duals[cut_ball[k]] += out.row_duals[program.num_rows() + k];
    out.row_duals.resize(program.num_rows());
  }
  if (!out.x.empty()) out.objective = program.objective_value(out.x);
  return out;
}

}  // namespace mdop
