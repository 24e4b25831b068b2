// SPDX-License-Identifier: Apache-2.0
//
// Brute-force oracle for small MIQCQPs: every binary assignment that
// satisfies the rows over binaries alone gets a convex solve with the
// binaries fixed, and the best objective wins.

#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "mdop/mip.hpp"

namespace mdop::testing {

struct EnumerationResult {
  double objective = kInf;
  std::vector<double> binaries;
  long assignments = 0;   // 2^n
  long convex_solves = 0;  // assignments passing the binary-only rows
};

inline EnumerationResult enumerate_binaries(const MdopModel& model, const QcqpOptions& opts = {}) {
  const ConvexProgram& p = model.program;
  const int nb = model.num_binaries();
  if (nb > 24) throw std::invalid_argument("enumerate_binaries: too many binaries");
  std::vector<int> slot(p.num_vars(), -1);
  for (int k = 0; k < nb; ++k) slot[model.binaries[k]] = k;
  // Rows whose every column is binary can be checked without a solve.
  std::vector<int> pure;
  for (int r = 0; r < p.num_rows(); ++r) {
    bool all = p.row_start[r + 1] > p.row_start[r];
    for (int k = p.row_start[r]; k < p.row_start[r + 1] && all; ++k) all = slot[p.row_col[k]] >= 0;
    if (all) pure.push_back(r);
  }
  EnumerationResult out;
  out.assignments = 1L << nb;
  std::vector<double> values(nb), x(p.num_vars(), 0.0);
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << nb); ++mask) {
    bool bounds_ok = true;
    for (int k = 0; k < nb; ++k) {
      values[k] = (mask >> k) & 1 ? 1.0 : 0.0;
      int c = model.binaries[k];
      if (values[k] < p.lower[c] || values[k] > p.upper[c]) bounds_ok = false;
      x[c] = values[k];
    }
    if (!bounds_ok) continue;
    bool rows_ok = true;
    for (int r : pure) {
      double act = p.row_activity(r, x);
      double viol = p.sense[r] == RowSense::Le   ? act - p.rhs[r]
                    : p.sense[r] == RowSense::Ge ? p.rhs[r] - act
                                                 : std::abs(act - p.rhs[r]);
      if (viol > 1e-9) {
        rows_ok = false;
        break;
      }
    }
    if (!rows_ok) continue;
    ++out.convex_solves;
    PrimalDualSolution s = solve_qcqp(fix_binaries(model, values).program, opts);
    if (s.status == SolveStatus::Infeasible) continue;
    if (!s.optimal()) throw std::runtime_error("enumerate_binaries: convex solve failed");
    if (s.objective < out.objective) {
      out.objective = s.objective;
      out.binaries = values;
    }
  }
  return out;
}

}  // namespace mdop::testing
