// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

#include "mdop/mip.hpp"

namespace mdop {

const char* to_string(MipStatus s) {
  switch (s) {
    case MipStatus::Optimal: return "optimal";
    case MipStatus::Feasible: return "feasible";
    case MipStatus::Infeasible: return "infeasible";
    case MipStatus::NodeLimit: return "node-limit";
    case MipStatus::TimeLimit: return "time-limit";
  }
  return "?";
}

double max_violation(const ConvexProgram& p, std::span<const double> x) {
  double worst = 0;
  for (int j = 0; j < p.num_vars(); ++j) worst = std::max({worst, p.lower[j] - x[j], x[j] - p.upper[j]});
  for (int r = 0; r < p.num_rows(); ++r) {
    double a = p.row_activity(r, x);
    switch (p.sense[r]) {
      case RowSense::Le: worst = std::max(worst, a - p.rhs[r]); break;
      case RowSense::Ge: worst = std::max(worst, p.rhs[r] - a); break;
      case RowSense::Eq: worst = std::max(worst, std::abs(a - p.rhs[r])); break;
    }
  }
  for (int b = 0; b < p.num_balls(); ++b) worst = std::max(worst, p.ball_violation(b, x));
  return worst;
}

PrimalDualSolution solve_fixed_then_duals(const MdopModel& model, const std::vector<double>& binaries,
                                          const QcqpOptions& opts, CutPool* pool) {
  MdopModel fixed = fix_binaries(model, binaries);
  PrimalDualSolution sol = solve_qcqp(fixed.program, opts, pool);
  if (!sol.optimal()) {
    throw std::runtime_error(std::string("fixed-binary convex solve failed: ") + to_string(sol.status) +
                             (sol.message.empty() ? "" : " (" + sol.message + ")"));
  }
  return sol;
}

namespace {

using Clock = std::chrono::steady_clock;
using Fixings = std::vector<std::pair<int, double>>;

double rel_gap(double ub, double lb) { return (ub - lb) / std::max(std::abs(lb), 1e-9); }

class BranchAndBound {
 public:
  BranchAndBound(const MdopModel& m, const MipParams& p) : m_(m), p_(p) {}
  MipResult run();

 private:
  struct Relax {
    PrimalDualSolution sol;
    bool infeasible = false;
    bool ok = false;
  };
  struct Node {
    long id = 0;
    int depth = 0;
    double bound = -kInf;
    Fixings fix;
  };

  void prepare();
  Relax solve_node(const Fixings& fix);
  int pick_branch(const std::vector<double>& x, const Fixings& fix) const;
  bool binary_rows_ok(const std::vector<double>& vals) const;
  void try_incumbent(const std::vector<double>& vals);
  std::vector<double> rounded(const std::vector<double>& x) const;
  bool prunable(double bound) const {
    return result_.has_incumbent && bound >= result_.objective - p_.gap_tol * std::max(std::abs(bound), 1e-9);
  }
  double elapsed() const { return std::chrono::duration<double>(Clock::now() - t0_).count(); }

  const MdopModel& m_;
  const MipParams& p_;
  CutPool pool_;
  std::vector<int> bin_pos_;
  std::vector<double> pinned_;
  std::vector<int> check_rows_;
  std::set<std::vector<double>> tried_;
  MipResult result_;
  Clock::time_point t0_;
  std::ofstream log_;
};

void BranchAndBound::prepare() {
  const ConvexProgram& p = m_.program;
  bin_pos_.assign(p.num_vars(), -1);
  for (std::size_t k = 0; k < m_.binaries.size(); ++k) bin_pos_[m_.binaries[k]] = static_cast<int>(k);
  // Columns pinned by a singleton equality, e.g. boundary copies.
  pinned_.assign(p.num_vars(), std::numeric_limits<double>::quiet_NaN());
  for (int r = 0; r < p.num_rows(); ++r) {
    if (p.sense[r] != RowSense::Eq || p.row_start[r + 1] - p.row_start[r] != 1) continue;
    int k = p.row_start[r];
    if (p.row_val[k] != 0.0) pinned_[p.row_col[k]] = p.rhs[r] / p.row_val[k];
  }
  for (int j = 0; j < p.num_vars(); ++j)
    if (p.lower[j] == p.upper[j]) pinned_[j] = p.lower[j];
  for (int r = 0; r < p.num_rows(); ++r) {
    bool has_bin = false, all_known = true;
    for (int k = p.row_start[r]; k < p.row_start[r + 1]; ++k) {
      int c = p.row_col[k];
      if (bin_pos_[c] >= 0) has_bin = true;
      else if (std::isnan(pinned_[c])) all_known = false;
    }
    if (has_bin && all_known) check_rows_.push_back(r);
  }
}

bool BranchAndBound::binary_rows_ok(const std::vector<double>& vals) const {
  const ConvexProgram& p = m_.program;
  for (int r : check_rows_) {
    double a = 0;
    for (int k = p.row_start[r]; k < p.row_start[r + 1]; ++k) {
      int c = p.row_col[k];
      a += p.row_val[k] * (bin_pos_[c] >= 0 ? vals[bin_pos_[c]] : pinned_[c]);
    }
    double tol = 1e-9 * (1.0 + std::abs(p.rhs[r]));
    switch (p.sense[r]) {
      case RowSense::Le:
        if (a > p.rhs[r] + tol) return false;
        break;
      case RowSense::Ge:
        if (a < p.rhs[r] - tol) return false;
        break;
      case RowSense::Eq:
        if (std::abs(a - p.rhs[r]) > tol) return false;
        break;
    }
  }
  return true;
}

BranchAndBound::Relax BranchAndBound::solve_node(const Fixings& fix) {
  Relax out;
  ConvexProgram prog = m_.program;
  for (auto [c, v] : fix) {
    prog.lower[c] = v;
    prog.upper[c] = v;
  }
  for (const auto& imp : m_.implications) {
    if (prog.upper[imp.trigger] > 0.0) continue;
    for (int c : imp.cols) {
      if (prog.lower[c] > 0.0) {
        out.infeasible = true;
        return out;
      }
      prog.upper[c] = std::min(prog.upper[c], 0.0);
    }
  }
  out.sol = solve_qcqp(prog, p_.convex, &pool_);
  ++result_.convex_solves;
  out.infeasible = out.sol.status == SolveStatus::Infeasible;
  out.ok = out.sol.optimal();
  if (!out.ok && !out.infeasible) ++result_.numerical_failures;
  return out;
}

int BranchAndBound::pick_branch(const std::vector<double>& x, const Fixings& fix) const {
  int best = -1;
  double score = p_.int_tol;
  if (!x.empty()) {
    for (int c : m_.binaries) {
      double f = std::abs(x[c] - std::round(x[c]));
      if (f > score) {
        score = f;
        best = c;
      }
    }
    return best;
  }
  // No usable relaxation point: branch on the lowest unfixed binary.
  std::set<int> fixed;
  for (auto [c, v] : fix) fixed.insert(c);
  for (int c : m_.binaries)
    if (!fixed.count(c)) return c;
  return -1;
}

std::vector<double> BranchAndBound::rounded(const std::vector<double>& x) const {
  std::vector<double> v(m_.binaries.size());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = x[m_.binaries[k]] >= 0.5 ? 1.0 : 0.0;
  return v;
}

void BranchAndBound::try_incumbent(const std::vector<double>& vals) {
  if (!tried_.insert(vals).second) return;
  if (!binary_rows_ok(vals)) return;
  MdopModel fixed = fix_binaries(m_, vals);
  PrimalDualSolution sol = solve_qcqp(fixed.program, p_.convex, &pool_);
  ++result_.convex_solves;
  if (!sol.optimal()) return;
  if (max_violation(m_.program, sol.x) > p_.feas_tol) return;
  double obj = m_.program.objective_value(sol.x);
  if (!result_.has_incumbent || obj < result_.objective) {
    result_.has_incumbent = true;
    result_.objective = obj;
    result_.x = sol.x;
    result_.binaries = vals;
  }
}

MipResult BranchAndBound::run() {
  t0_ = Clock::now();
  prepare();
  if (!p_.node_log.empty()) {
    log_.open(p_.node_log);
    log_ << "node,depth,bound,incumbent,gap\n";
  }
  log_.precision(12);

  std::set<std::pair<double, long>> open;
  std::map<long, Node> store;
  long next_id = 0;
  auto push = [&](Node n) {
    n.id = next_id++;
    open.insert({n.bound, n.id});
    store.emplace(n.id, std::move(n));
  };
  push(Node{});

  bool stopped = false;
  double dive_bound = kInf;
  auto global_lb = [&]() {
    double lb = dive_bound;
    if (!open.empty()) lb = std::min(lb, open.begin()->first);
    return lb;
  };

  while (!open.empty() && !stopped) {
    auto it = open.begin();
    Node cur = std::move(store.at(it->second));
    store.erase(it->second);
    open.erase(it);
    if (prunable(cur.bound)) continue;

    for (;;) {
      dive_bound = cur.bound;
      if (result_.nodes >= p_.node_limit) {
        stopped = true;
        result_.status = MipStatus::NodeLimit;
        break;
      }
      if (elapsed() > p_.time_limit) {
        stopped = true;
        result_.status = MipStatus::TimeLimit;
        break;
      }
      ++result_.nodes;
      Relax r = solve_node(cur.fix);
      if (r.infeasible) {
        dive_bound = kInf;
        break;
      }
      double value = r.ok ? std::max(cur.bound, r.sol.objective) : cur.bound;
      dive_bound = value;
      if (log_.is_open()) {
        double lb = global_lb();
        log_ << result_.nodes << "," << cur.depth << "," << value << "," << result_.objective << ","
             << (result_.has_incumbent ? rel_gap(result_.objective, lb) : kInf) << "\n";
      }
      if (prunable(value)) {
        dive_bound = kInf;
        break;
      }
      int j = pick_branch(r.ok ? r.sol.x : std::vector<double>{}, cur.fix);
      if (r.ok && (result_.nodes == 1 || result_.nodes % p_.heuristic_every == 0)) try_incumbent(rounded(r.sol.x));
      if (j < 0) {
        if (r.ok) {
          try_incumbent(rounded(r.sol.x));
        } else {
          std::vector<double> vals(m_.binaries.size(), 0.0);
          for (auto [c, v] : cur.fix) vals[bin_pos_[c]] = v;
          try_incumbent(vals);
        }
        dive_bound = kInf;
        break;
      }
      double xj = r.ok ? r.sol.x[j] : 0.0;
      Node down{0, cur.depth + 1, value, cur.fix};
      down.fix.push_back({j, 0.0});
      Node up{0, cur.depth + 1, value, cur.fix};
      up.fix.push_back({j, 1.0});
      bool go_up = xj >= 0.5;
      push(go_up ? std::move(down) : std::move(up));
      cur = go_up ? std::move(up) : std::move(down);
      if (result_.has_incumbent && rel_gap(result_.objective, global_lb()) <= p_.gap_tol) {
        stopped = true;
        result_.status = MipStatus::Optimal;
        break;
      }
    }
    if (!stopped && result_.has_incumbent && rel_gap(result_.objective, global_lb()) <= p_.gap_tol) {
      stopped = true;
      result_.status = MipStatus::Optimal;
    }
  }

  if (!stopped) {
    // Tree exhausted.
    dive_bound = kInf;
    result_.status = result_.has_incumbent ? MipStatus::Optimal : MipStatus::Infeasible;
    result_.bound = result_.has_incumbent ? std::min(result_.objective, global_lb()) : kInf;
  } else {
    result_.bound = std::min(global_lb(), result_.has_incumbent ? result_.objective : kInf);
    if (result_.has_incumbent && result_.status != MipStatus::Optimal) result_.status = MipStatus::Feasible;
  }
  result_.gap = result_.has_incumbent ? std::max(0.0, rel_gap(result_.objective, result_.bound)) : kInf;
  result_.seconds = elapsed();
  return result_;
}

}  // namespace

MipResult solve_miqcqp(const MdopModel& model, const MipParams& params) {
  BranchAndBound bb(model, params);
  return bb.run();
}

}  // namespace mdop
