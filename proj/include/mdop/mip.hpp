// SPDX-License-Identifier: Apache-2.0
//
// Branch-and-bound over convex relaxations of an MdopModel.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mdop/convex.hpp"
#include "mdop/formulation.hpp"

namespace mdop {

struct MipParams {
  double gap_tol = 1e-4;
  long node_limit = 100000;
  double time_limit = 600.0;  // seconds
  std::uint64_t seed = 0;     // accepted for interface stability; the search uses no randomness
  double int_tol = 1e-5;
  double feas_tol = 1e-6;
  int heuristic_every = 50;
  QcqpOptions convex;
  std::string node_log;  // CSV `node,depth,bound,incumbent,gap`; empty disables
};

enum class MipStatus : std::uint8_t { Optimal, Feasible, Infeasible, NodeLimit, TimeLimit };

const char* to_string(MipStatus s);

struct MipResult {
  MipStatus status = MipStatus::Infeasible;
  bool has_incumbent = false;
  std::vector<double> x;         // incumbent primal
  std::vector<double> binaries;  // incumbent binaries, exact 0/1, ordered like model.binaries
  double objective = kInf;       // upper bound
  double bound = -kInf;          // lower bound
  double gap = kInf;             // (UB - LB) / max(|LB|, 1e-9)
  long nodes = 0;
  long convex_solves = 0;
  long numerical_failures = 0;
  double seconds = 0.0;
};

MipResult solve_miqcqp(const MdopModel& model, const MipParams& params = {});

/// Convex solve of fix_binaries(model, binaries); throws std::runtime_error
/// when the fixed problem is not solved to optimality.
PrimalDualSolution solve_fixed_then_duals(const MdopModel& model, const std::vector<double>& binaries,
                                          const QcqpOptions& opts = {}, CutPool* pool = nullptr);

/// Largest violation of rows, balls and bounds of `program` at x.
double max_violation(const ConvexProgram& program, std::span<const double> x);

}  // namespace mdop
