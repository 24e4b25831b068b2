// SPDX-License-Identifier: Apache-2.0
//
// Mehrotra predictor-corrector interior-point method for
//   min 0.5 x'Qx + c'x  s.t.  A_E x = b,  A_I x <= h,  l <= x <= u
// with Q diagonal. Fixed columns are eliminated, rows and columns are Ruiz
// equilibrated, and each Newton step solves the regularized quasi-definite
// augmented system with a sparse LDL^T factorization plus iterative
// refinement against the unregularized matrix.

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <fstream>
#include <stdexcept>

#include "mdop/convex.hpp"

namespace mdop {
namespace {

using Vec = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

// Rows of the reduced problem in scaled space.
struct ReducedRows {
  std::vector<int> start{0};
  std::vector<int> col;
  std::vector<double> val;
  std::vector<double> rhs;
  std::vector<int> origin;    // original row id
  std::vector<double> sign;   // +1 keeps the row, -1 flips a >= row into <=
};

double inf_norm(const Vec& v) { return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>(); }

// Largest alpha in (0, 1] keeping v + alpha * dv >= 0; entries with mask==0 ignored.
double max_step(const Vec& v, const Vec& dv, const std::vector<char>* mask = nullptr) {
  double a = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (mask && !(*mask)[i]) continue;
    if (dv[i] < 0) a = std::min(a, -v[i] / dv[i]);
  }
  return a;
}

class InteriorPoint {
 public:
  InteriorPoint(const ConvexProgram& p, const QpOptions& o) : prog_(p), opt_(o) {}

  PrimalDualSolution run();

 private:
  bool presolve(PrimalDualSolution& out);
  void scale();
  void build_kkt_pattern();
  void set_kkt_diagonal(const Vec& hdiag, const Vec& wdiag);
  Vec solve_kkt(const Vec& rhs);
  void unscale(const Vec& x, const Vec& lam, const Vec& z, const Vec& nl, const Vec& nu, PrimalDualSolution& out) const;

  const ConvexProgram& prog_;
  const QpOptions& opt_;

  // Reduced problem.
  int n_ = 0, me_ = 0, mi_ = 0;
  std::vector<int> col_of_;   // reduced -> original column
  std::vector<int> red_of_;   // original -> reduced (-1 when fixed)
  std::vector<double> fixed_val_;
  ReducedRows eq_, in_;
  // Presolve record. A column bound may come from a singleton row; `src`
  // holds that row (or -1 for the column's own bound) and the row
  // coefficient in <= orientation.
  struct BoundSource {
    int row = -1;
    double coef = 0.0;
    double sign = 1.0;  // orientation of the original row
  };
  std::vector<double> lo0_, up0_;  // tightened bounds
  std::vector<BoundSource> lo_src_, up_src_;
  std::vector<int> eq_fix_row_;    // singleton equality that fixed the column, or -1
  std::vector<double> eq_fix_coef_;
  std::vector<int> fix_order_;     // columns in the order presolve fixed them
  SpMat ae_, ai_;  // scaled
  Vec q_, c_, lo_, up_, be_, hi_;
  std::vector<char> has_lo_, has_up_;
  Vec dcol_, drow_e_, drow_i_;
  double cost_scale_ = 1.0;
  double obj_const_ = 0.0;

  // Newton system.
  SpMat kkt_;
  std::vector<int> diag_pos_;
  Vec reg_;      // base regularization
  Vec reg_cur_;  // regularization of the current factorization
  Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
  bool analyzed_ = false;
};

bool InteriorPoint::presolve(PrimalDualSolution& out) {
  const int n0 = prog_.num_vars(), m0 = prog_.num_rows();
  lo0_ = prog_.lower;
  up0_ = prog_.upper;
  lo_src_.assign(n0, {});
  up_src_.assign(n0, {});
  eq_fix_row_.assign(n0, -1);
  eq_fix_coef_.assign(n0, 0.0);
  std::vector<char> fixed(n0, 0), alive(m0, 1);
  fixed_val_.assign(n0, 0.0);
  auto infeasible = [&](std::string msg) {
    out.status = SolveStatus::Infeasible;
    out.message = std::move(msg);
    return false;
  };
  auto fix = [&](int j, double v) {
    fixed[j] = 1;
    fixed_val_[j] = v;
    fix_order_.push_back(j);
  };
  auto try_fix = [&](int j) {
    double l = lo0_[j], u = up0_[j];
    if (l > u + 1e-9 * (1.0 + std::abs(l))) return false;
    if (std::isfinite(l) && std::isfinite(u) && u - l <= 1e-12 * (1.0 + std::abs(l))) fix(j, l <= u ? l : 0.5 * (l + u));
    return true;
  };
  for (int j = 0; j < n0; ++j) {
    if (!try_fix(j)) return infeasible("column " + std::to_string(j) + " has lower bound above upper bound");
  }
  // Singleton rows become bounds; fixing a column can expose new singletons.
  for (bool changed = true; changed;) {
    changed = false;
    for (int r = 0; r < m0; ++r) {
      if (!alive[r]) continue;
      const double sg = prog_.sense[r] == RowSense::Ge ? -1.0 : 1.0;
      double b = sg * prog_.rhs[r];
      int live = 0, jc = -1;
      double a = 0.0;
      for (int k = prog_.row_start[r]; k < prog_.row_start[r + 1]; ++k) {
        int j = prog_.row_col[k];
        double v = sg * prog_.row_val[k];
        if (v == 0.0) continue;
        if (fixed[j]) {
          b -= v * fixed_val_[j];
        } else if (live == 0 || j != jc) {
          ++live;
          jc = j;
          a = v;
        } else {
          a += v;  // repeated column
        }
      }
      if (live >= 2) continue;
      const double tol = 1e-9 * (1.0 + std::abs(prog_.rhs[r]));
      if (live == 0 || a == 0.0) {
        bool ok = prog_.sense[r] == RowSense::Eq ? std::abs(b) <= tol : 0.0 <= b + tol;
        if (!ok) return infeasible("row " + std::to_string(r) + " is violated by fixed columns alone");
        alive[r] = 0;
        changed = true;
        continue;
      }
      const double bound = b / a;
      alive[r] = 0;
      changed = true;
      if (prog_.sense[r] == RowSense::Eq) {
        if (bound < lo0_[jc] - tol || bound > up0_[jc] + tol) {
          return infeasible("row " + std::to_string(r) + " pins column " + std::to_string(jc) + " outside its bounds");
        }
        lo0_[jc] = up0_[jc] = std::clamp(bound, lo0_[jc], up0_[jc]);
        eq_fix_row_[jc] = r;
        eq_fix_coef_[jc] = a;
        fix(jc, lo0_[jc]);
        continue;
      }
      if (a > 0 && bound < up0_[jc]) {
        up0_[jc] = bound;
        up_src_[jc] = {r, a, sg};
      } else if (a < 0 && bound > lo0_[jc]) {
        lo0_[jc] = bound;
        lo_src_[jc] = {r, a, sg};
      }
      if (lo0_[jc] > up0_[jc] && lo0_[jc] <= up0_[jc] + tol) lo0_[jc] = up0_[jc] = 0.5 * (lo0_[jc] + up0_[jc]);
      if (!try_fix(jc)) return infeasible("singleton rows leave column " + std::to_string(jc) + " with an empty range");
    }
  }

  red_of_.assign(n0, -1);
  for (int j = 0; j < n0; ++j) {
    if (fixed[j]) continue;
    red_of_[j] = static_cast<int>(col_of_.size());
    col_of_.push_back(j);
  }
  n_ = static_cast<int>(col_of_.size());
  for (int r = 0; r < m0; ++r) {
    if (!alive[r]) continue;
    double sg = prog_.sense[r] == RowSense::Ge ? -1.0 : 1.0;
    double b = prog_.rhs[r];
    ReducedRows& dst = prog_.sense[r] == RowSense::Eq ? eq_ : in_;
    for (int k = prog_.row_start[r]; k < prog_.row_start[r + 1]; ++k) {
      int j = prog_.row_col[k];
      double v = prog_.row_val[k];
      if (v == 0.0) continue;
      if (fixed[j]) {
        b -= v * fixed_val_[j];
      } else {
        dst.col.push_back(red_of_[j]);
        dst.val.push_back(sg * v);
      }
    }
    dst.start.push_back(static_cast<int>(dst.col.size()));
    dst.rhs.push_back(sg * b);
    dst.origin.push_back(r);
    dst.sign.push_back(sg);
  }
  me_ = static_cast<int>(eq_.rhs.size());
  mi_ = static_cast<int>(in_.rhs.size());
  return true;
}

SpMat to_sparse(const ReducedRows& rows, int ncols) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(rows.col.size());
  for (std::size_t r = 0; r + 1 < rows.start.size(); ++r) {
    for (int k = rows.start[r]; k < rows.start[r + 1]; ++k) trip.emplace_back(static_cast<int>(r), rows.col[k], rows.val[k]);
  }
  SpMat m(static_cast<int>(rows.rhs.size()), ncols);
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

void InteriorPoint::scale() {
  ae_ = to_sparse(eq_, n_);
  ai_ = to_sparse(in_, n_);
  q_.resize(n_);
  c_.resize(n_);
  lo_.resize(n_);
  up_.resize(n_);
  has_lo_.assign(n_, 0);
  has_up_.assign(n_, 0);
  for (int j = 0; j < n_; ++j) {
    int oj = col_of_[j];
    q_[j] = prog_.quad[oj];
    c_[j] = prog_.linear[oj];
    lo_[j] = lo0_[oj];
    up_[j] = up0_[oj];
    has_lo_[j] = std::isfinite(lo_[j]);
    has_up_[j] = std::isfinite(up_[j]);
  }
  be_ = Eigen::Map<const Vec>(eq_.rhs.data(), me_);
  hi_ = Eigen::Map<const Vec>(in_.rhs.data(), mi_);

  dcol_ = Vec::Ones(n_);
  drow_e_ = Vec::Ones(me_);
  drow_i_ = Vec::Ones(mi_);
  if (opt_.ruiz_scaling) {
    auto clampn = [](double v) { return v <= 0 ? 1.0 : std::clamp(v, 1e-4, 1e4); };
    for (int pass = 0; pass < opt_.ruiz_passes; ++pass) {
      Vec cn = Vec::Zero(n_), rne = Vec::Zero(me_), rni = Vec::Zero(mi_);
      for (int j = 0; j < n_; ++j) cn[j] = std::abs(q_[j]);
      for (int k = 0; k < ae_.outerSize(); ++k) {
        for (SpMat::InnerIterator it(ae_, k); it; ++it) {
          double a = std::abs(it.value());
          cn[it.col()] = std::max(cn[it.col()], a);
          rne[it.row()] = std::max(rne[it.row()], a);
        }
      }
      for (int k = 0; k < ai_.outerSize(); ++k) {
        for (SpMat::InnerIterator it(ai_, k); it; ++it) {
          double a = std::abs(it.value());
          cn[it.col()] = std::max(cn[it.col()], a);
          rni[it.row()] = std::max(rni[it.row()], a);
        }
      }
      Vec sc(n_), se(me_), si(mi_);
      for (int j = 0; j < n_; ++j) sc[j] = 1.0 / std::sqrt(clampn(cn[j]));
      for (int i = 0; i < me_; ++i) se[i] = 1.0 / std::sqrt(clampn(rne[i]));
      for (int i = 0; i < mi_; ++i) si[i] = 1.0 / std::sqrt(clampn(rni[i]));
      ae_ = se.asDiagonal() * ae_ * sc.asDiagonal();
      ai_ = si.asDiagonal() * ai_ * sc.asDiagonal();
      for (int j = 0; j < n_; ++j) q_[j] *= sc[j] * sc[j];
      dcol_ = dcol_.cwiseProduct(sc);
      drow_e_ = drow_e_.cwiseProduct(se);
      drow_i_ = drow_i_.cwiseProduct(si);
    }
  } else {
    // keep q_ unscaled
  }
  // Apply column scaling to the remaining data: x = D xs.
  for (int j = 0; j < n_; ++j) {
    c_[j] *= dcol_[j];
    if (has_lo_[j]) lo_[j] /= dcol_[j];
    if (has_up_[j]) up_[j] /= dcol_[j];
  }
  be_ = be_.cwiseProduct(drow_e_);
  hi_ = hi_.cwiseProduct(drow_i_);

  double qmean = n_ > 0 ? q_.cwiseAbs().mean() : 0.0;
  double cmax = inf_norm(c_);
  double ref = std::max(qmean, cmax);
  cost_scale_ = ref > 0 ? std::clamp(1.0 / ref, 1e-4, 1e4) : 1.0;
  q_ *= cost_scale_;
  c_ *= cost_scale_;
  ae_.makeCompressed();
  ai_.makeCompressed();
}

void InteriorPoint::build_kkt_pattern() {
  const int N = n_ + me_ + mi_;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(N + ae_.nonZeros() + ai_.nonZeros());
  for (int k = 0; k < N; ++k) trip.emplace_back(k, k, 1.0);
  for (int k = 0; k < ae_.outerSize(); ++k)
    for (SpMat::InnerIterator it(ae_, k); it; ++it) trip.emplace_back(n_ + it.row(), it.col(), it.value());
  for (int k = 0; k < ai_.outerSize(); ++k)
    for (SpMat::InnerIterator it(ai_, k); it; ++it) trip.emplace_back(n_ + me_ + it.row(), it.col(), it.value());
  kkt_.resize(N, N);
  kkt_.setFromTriplets(trip.begin(), trip.end());
  kkt_.makeCompressed();
  diag_pos_.resize(N);
  for (int k = 0; k < N; ++k) {
    int p = kkt_.outerIndexPtr()[k];
    if (kkt_.innerIndexPtr()[p] != k) throw std::logic_error("kkt pattern lacks a leading diagonal");
    diag_pos_[k] = p;
  }
  const double rho = 1e-9, delta = 1e-9;
  reg_ = Vec::Zero(N);
  reg_.head(n_).setConstant(rho);
  reg_.segment(n_, me_).setConstant(-delta);
}

void InteriorPoint::set_kkt_diagonal(const Vec& hdiag, const Vec& wdiag) {
  // Zero pivots near the boundary are retried with stronger regularization.
  double* v = kkt_.valuePtr();
  for (double boost : {1.0, 1e2, 1e4, 1e6}) {
    reg_cur_ = boost * reg_;
    if (boost > 1.0) reg_cur_.tail(mi_).setConstant(-boost * 1e-9);
    for (int j = 0; j < n_; ++j) v[diag_pos_[j]] = hdiag[j] + reg_cur_[j];
    for (int i = 0; i < me_; ++i) v[diag_pos_[n_ + i]] = reg_cur_[n_ + i];
    for (int i = 0; i < mi_; ++i) v[diag_pos_[n_ + me_ + i]] = -wdiag[i] + reg_cur_[n_ + me_ + i];
    if (!analyzed_) {
      ldlt_.analyzePattern(kkt_);
      analyzed_ = true;
    }
    ldlt_.factorize(kkt_);
    if (ldlt_.info() == Eigen::Success) return;
  }
}

Vec InteriorPoint::solve_kkt(const Vec& rhs) {
  // Refinement against the unregularized matrix; it can diverge when that
  // matrix is singular, so only improving corrections are kept.
  Vec sol = ldlt_.solve(rhs);
  double rn0 = inf_norm(rhs);
  auto residual = [&](const Vec& v) { return Vec(rhs - (kkt_.selfadjointView<Eigen::Lower>() * v - reg_cur_.cwiseProduct(v))); };
  Vec r = residual(sol);
  double rn = inf_norm(r);
  for (int it = 0; it < 4 && rn > 1e-14 * (1.0 + rn0); ++it) {
    Vec cand = sol + ldlt_.solve(r);
    Vec rc = residual(cand);
    double rcn = inf_norm(rc);
    if (!(rcn < rn)) break;
    sol = std::move(cand);
    r = std::move(rc);
    rn = rcn;
  }
  return sol;
}

void InteriorPoint::unscale(const Vec& x, const Vec& lam, const Vec& z, const Vec& nl, const Vec& nu,
                            PrimalDualSolution& out) const {
  const int n0 = prog_.num_vars();
  out.x.assign(n0, 0.0);
  out.lower_duals.assign(n0, 0.0);
  out.upper_duals.assign(n0, 0.0);
  out.row_duals.assign(prog_.num_rows(), 0.0);
  for (int j = 0; j < n0; ++j) {
    if (red_of_[j] < 0) out.x[j] = fixed_val_[j];
  }
  for (int i = 0; i < me_; ++i) out.row_duals[eq_.origin[i]] = drow_e_[i] * lam[i] / cost_scale_;
  for (int i = 0; i < mi_; ++i) out.row_duals[in_.origin[i]] = in_.sign[i] * drow_i_[i] * z[i] / cost_scale_;

  // A bound multiplier moves to the singleton row that produced the bound:
  // for a <= row with coefficient a, lambda * a replaces +nu_u (a > 0) or
  // -nu_l (a < 0).
  auto assign = [&](const BoundSource& src, double mult, bool upper, int j) {
    if (src.row < 0) {
      (upper ? out.upper_duals : out.lower_duals)[j] = mult;
    } else {
      out.row_duals[src.row] = src.sign * mult / std::abs(src.coef);
    }
  };
  for (int j = 0; j < n_; ++j) {
    int oj = col_of_[j];
    double xv = dcol_[j] * x[j];
    // Clip to the bounds; interior iterates only leave by rounding.
    xv = std::clamp(xv, lo0_[oj], up0_[oj]);
    out.x[oj] = xv;
    assign(lo_src_[oj], nl[j] / (dcol_[j] * cost_scale_), false, oj);
    assign(up_src_[oj], nu[j] / (dcol_[j] * cost_scale_), true, oj);
  }

  // Fixed columns in reverse order of fixing: the reduced cost, with every
  // row the column does not depend on already priced, is the multiplier of
  // whichever side (or equality) holds the column.
  std::vector<std::vector<std::pair<int, double>>> col_rows(n0);
  for (int r = 0; r < prog_.num_rows(); ++r) {
    for (int k = prog_.row_start[r]; k < prog_.row_start[r + 1]; ++k) col_rows[prog_.row_col[k]].push_back({r, prog_.row_val[k]});
  }
  for (auto it = fix_order_.rbegin(); it != fix_order_.rend(); ++it) {
    const int j = *it;
    const int own_eq = eq_fix_row_[j];
    double g = prog_.quad[j] * out.x[j] + prog_.linear[j];
    for (auto [r, v] : col_rows[j]) {
      if (r == own_eq || r == lo_src_[j].row || r == up_src_[j].row) continue;
      g += out.row_duals[r] * v;
    }
    if (own_eq >= 0) {
      double sg = prog_.sense[own_eq] == RowSense::Ge ? -1.0 : 1.0;
      out.row_duals[own_eq] = sg * (-g / eq_fix_coef_[j]);
    } else if (g > 0) {
      assign(lo_src_[j], g, false, j);
    } else if (g < 0) {
      assign(up_src_[j], -g, true, j);
    }
  }
}

PrimalDualSolution InteriorPoint::run() {
  PrimalDualSolution out;
  if (prog_.num_balls() > 0) throw std::invalid_argument("solve_qp: program has ball rows; use solve_qcqp");
  prog_.certify_convex();
  if (!presolve(out)) {
    out.x.assign(prog_.num_vars(), 0.0);
    out.row_duals.assign(prog_.num_rows(), 0.0);
    out.lower_duals.assign(prog_.num_vars(), 0.0);
    out.upper_duals.assign(prog_.num_vars(), 0.0);
    return out;
  }
  scale();
  build_kkt_pattern();

  std::ofstream log;
  if (!opt_.iteration_log.empty()) {
    log.open(opt_.iteration_log);
    log << "iter,prim_res,dual_res,obj,mu,step\n";
  }

  // Unscaled norms for the stopping tests.
  double rhs_norm = 0, c_norm = 0;
  for (int r = 0; r < prog_.num_rows(); ++r) rhs_norm = std::max(rhs_norm, std::abs(prog_.rhs[r]));
  for (int j = 0; j < prog_.num_vars(); ++j) c_norm = std::max(c_norm, std::abs(prog_.linear[j]));

  // Starting point.
  Vec x(n_), s(mi_), z(mi_), lam = Vec::Zero(me_), nl = Vec::Zero(n_), nu = Vec::Zero(n_);
  for (int j = 0; j < n_; ++j) {
    if (has_lo_[j] && has_up_[j]) x[j] = 0.5 * (lo_[j] + up_[j]);
    else if (has_lo_[j]) x[j] = lo_[j] + 1.0;
    else if (has_up_[j]) x[j] = up_[j] - 1.0;
    else x[j] = 0.0;
    if (has_lo_[j]) nl[j] = 1.0;
    if (has_up_[j]) nu[j] = 1.0;
  }
  {
    Vec ax = ai_ * x;
    for (int i = 0; i < mi_; ++i) s[i] = std::max(hi_[i] - ax[i], 1.0);
    z.setOnes();
  }
  int ncomp = mi_;
  for (int j = 0; j < n_; ++j) ncomp += has_lo_[j] + has_up_[j];

  auto tl_of = [&](const Vec& xv) {
    Vec t = Vec::Ones(n_);
    for (int j = 0; j < n_; ++j)
      if (has_lo_[j]) t[j] = xv[j] - lo_[j];
    return t;
  };
  auto tu_of = [&](const Vec& xv) {
    Vec t = Vec::Ones(n_);
    for (int j = 0; j < n_; ++j)
      if (has_up_[j]) t[j] = up_[j] - xv[j];
    return t;
  };
  std::vector<char> lo_mask(has_lo_.begin(), has_lo_.end()), up_mask(has_up_.begin(), has_up_.end());

  SolveStatus status = SolveStatus::IterationLimit;
  int iter = 0;
  double prim_res = kInf, dual_res = kInf, comp_total = kInf, comp_max = kInf;
  double last_alpha = 0;  // step of the previous iteration, for the log
  bool near_optimal = false;
  Vec good_x = x, good_lam = lam, good_z = z, good_s = s, good_nl = nl, good_nu = nu;
  std::array<double, 3> good_res{kInf, kInf, kInf};  // last iterate met the stopping test loosened 1000x
  for (iter = 0; iter <= opt_.max_iterations; ++iter) {
    Vec tl = tl_of(x), tu = tu_of(x);
    Vec rd = q_.cwiseProduct(x) + c_ + ae_.transpose() * lam + ai_.transpose() * z - nl + nu;
    Vec re = ae_ * x - be_;
    Vec ri = ai_ * x + s - hi_;
    double comp = s.dot(z);
    for (int j = 0; j < n_; ++j) {
      if (has_lo_[j]) comp += tl[j] * nl[j];
      if (has_up_[j]) comp += tu[j] * nu[j];
    }
    double mu = ncomp > 0 ? comp / ncomp : 0.0;

    // Stopping test in original units.
    {
      PrimalDualSolution cur;
      unscale(x, lam, z, nl, nu, cur);
      double ax_norm = 0;
      prim_res = 0;
      for (int r = 0; r < prog_.num_rows(); ++r) {
        double a = prog_.row_activity(r, cur.x);
        ax_norm = std::max(ax_norm, std::abs(a));
        double v = 0;
        switch (prog_.sense[r]) {
          case RowSense::Le: v = std::max(0.0, a - prog_.rhs[r]); break;
          case RowSense::Ge: v = std::max(0.0, prog_.rhs[r] - a); break;
          case RowSense::Eq: v = std::abs(a - prog_.rhs[r]); break;
        }
        prim_res = std::max(prim_res, v);
      }
      // Dual residual over the reduced columns (fixed ones absorb theirs).
      Vec rdu(n_);
      for (int j = 0; j < n_; ++j) rdu[j] = rd[j] / (dcol_[j] * cost_scale_);
      dual_res = inf_norm(rdu);
      double qx_norm = 0, aty_norm = 0;
      for (int j = 0; j < n_; ++j) {
        int oj = col_of_[j];
        qx_norm = std::max(qx_norm, std::abs(prog_.quad[oj] * cur.x[oj]));
        double aty = (rd[j] - q_[j] * x[j] - c_[j] + nl[j] - nu[j]) / (dcol_[j] * cost_scale_);
        aty_norm = std::max(aty_norm, std::abs(aty));
      }
      double pobj = prog_.objective_value(cur.x);
      comp_total = comp / cost_scale_;
      comp_max = 0;
      for (int i = 0; i < mi_; ++i) comp_max = std::max(comp_max, s[i] * z[i] / cost_scale_);
      for (int j = 0; j < n_; ++j) {
        if (has_lo_[j]) comp_max = std::max(comp_max, tl[j] * nl[j] / cost_scale_);
        if (has_up_[j]) comp_max = std::max(comp_max, tu[j] * nu[j] / cost_scale_);
      }
      if (log.is_open()) log << iter << "," << prim_res << "," << dual_res << "," << pobj << "," << mu << "," << last_alpha << "\n";
      bool p_ok = prim_res <= opt_.eps_abs + opt_.eps_rel * std::max(rhs_norm, ax_norm);
      bool d_ok = dual_res <= opt_.eps_abs + opt_.dual_eps_rel * std::max({c_norm, qx_norm, aty_norm});
      bool g_ok = comp_total <= opt_.eps_abs + opt_.gap_rel * std::max(1.0, std::abs(pobj));
      if (!std::isfinite(prim_res) || !std::isfinite(dual_res) || !std::isfinite(comp_total)) {
        // Fall back to the last finite iterate.
        x = good_x;
        lam = good_lam;
        z = good_z;
        s = good_s;
        nl = good_nl;
        nu = good_nu;
        prim_res = good_res[0];
        dual_res = good_res[1];
        comp_max = good_res[2];
        status = SolveStatus::NumericalError;
        out.message = "non-finite iterate";
        break;
      }
      good_x = x;
      good_lam = lam;
      good_z = z;
      good_s = s;
      good_nl = nl;
      good_nu = nu;
      good_res = {prim_res, dual_res, comp_max};
      if (p_ok && d_ok && g_ok) {
        status = SolveStatus::Optimal;
        break;
      }
      const double loose = 1e3;
      near_optimal = prim_res <= loose * (opt_.eps_abs + opt_.eps_rel * std::max(rhs_norm, ax_norm)) &&
                     dual_res <= loose * (opt_.eps_abs + opt_.dual_eps_rel * std::max({c_norm, qx_norm, aty_norm})) &&
                     comp_total <= loose * (opt_.eps_abs + opt_.gap_rel * std::max(1.0, std::abs(pobj)));
      if (inf_norm(x) > 1e10) {
        status = SolveStatus::Unbounded;
        break;
      }
      // Farkas test on the scaled duals: diverging multipliers whose
      // direction annihilates the constraint matrix and has negative dual
      // objective prove the constraints infeasible.
      double big = std::max({inf_norm(lam), inf_norm(z), inf_norm(nl), inf_norm(nu)});
      if (big > 1e8 && iter > 5) {
        Vec stat = ae_.transpose() * lam + ai_.transpose() * z - nl + nu;
        double dobj = be_.dot(lam) + hi_.dot(z);
        for (int j = 0; j < n_; ++j) {
          if (has_lo_[j]) dobj -= lo_[j] * nl[j];
          if (has_up_[j]) dobj += up_[j] * nu[j];
        }
        if (inf_norm(stat) / big < 1e-7 && dobj / big < -1e-7) {
          status = SolveStatus::Infeasible;
          break;
        }
      }
    }
    if (iter == opt_.max_iterations) break;

    Vec hdiag = q_;
    for (int j = 0; j < n_; ++j) {
      if (has_lo_[j]) hdiag[j] += nl[j] / tl[j];
      if (has_up_[j]) hdiag[j] += nu[j] / tu[j];
    }
    Vec wdiag = s.cwiseQuotient(z);
    set_kkt_diagonal(hdiag, wdiag);
    if (ldlt_.info() != Eigen::Success) {
      status = SolveStatus::NumericalError;
      out.message = "factorization failed";
      break;
    }

    // Assemble and solve for given complementarity targets; returns the
    // full direction (dx, dlam, dz, ds, dnl, dnu).
    struct Dir {
      Vec dx, dlam, dz, ds, dnl, dnu;
    };
    auto direction = [&](const Vec& tgt_s, const Vec& tgt_l, const Vec& tgt_u) {
      const int N = n_ + me_ + mi_;
      Vec rhs(N);
      for (int j = 0; j < n_; ++j) {
        double v = -rd[j];
        if (has_lo_[j]) v += tgt_l[j] / tl[j] - nl[j];
        if (has_up_[j]) v += -tgt_u[j] / tu[j] + nu[j];
        rhs[j] = v;
      }
      rhs.segment(n_, me_) = -re;
      for (int i = 0; i < mi_; ++i) rhs[n_ + me_ + i] = -ri[i] + s[i] - tgt_s[i] / z[i];
      Vec sol = solve_kkt(rhs);
      Dir d;
      d.dx = sol.head(n_);
      d.dlam = sol.segment(n_, me_);
      d.dz = sol.segment(n_ + me_, mi_);
      // From the complementarity row rather than the primal one: with a
      // nearly singular system the primal form can drive tiny slacks negative.
      d.ds.resize(mi_);
      for (int i = 0; i < mi_; ++i) d.ds[i] = (tgt_s[i] - s[i] * d.dz[i]) / z[i] - s[i];
      d.dnl = Vec::Zero(n_);
      d.dnu = Vec::Zero(n_);
      for (int j = 0; j < n_; ++j) {
        if (has_lo_[j]) d.dnl[j] = tgt_l[j] / tl[j] - nl[j] - nl[j] / tl[j] * d.dx[j];
        if (has_up_[j]) d.dnu[j] = tgt_u[j] / tu[j] - nu[j] + nu[j] / tu[j] * d.dx[j];
      }
      return d;
    };
    auto step_len = [&](const Dir& d) {
      double ap = std::min({max_step(s, d.ds), max_step(tl, d.dx, &lo_mask), max_step(tu, -d.dx, &up_mask)});
      double ad = std::min({max_step(z, d.dz), max_step(nl, d.dnl, &lo_mask), max_step(nu, d.dnu, &up_mask)});
      return std::min(ap, ad);
    };

    Vec zero_s = Vec::Zero(mi_), zero_n = Vec::Zero(n_);
    Dir aff = direction(zero_s, zero_n, zero_n);
    double a_aff = step_len(aff);
    double comp_aff = (s + a_aff * aff.ds).dot(z + a_aff * aff.dz);
    for (int j = 0; j < n_; ++j) {
      if (has_lo_[j]) comp_aff += (tl[j] + a_aff * aff.dx[j]) * (nl[j] + a_aff * aff.dnl[j]);
      if (has_up_[j]) comp_aff += (tu[j] - a_aff * aff.dx[j]) * (nu[j] + a_aff * aff.dnu[j]);
    }
    double mu_aff = ncomp > 0 ? comp_aff / ncomp : 0.0;
    double sigma = mu > 0 ? std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3) : 0.0;

    Vec tgt_s(mi_), tgt_l = Vec::Zero(n_), tgt_u = Vec::Zero(n_);
    for (int i = 0; i < mi_; ++i) tgt_s[i] = sigma * mu - aff.ds[i] * aff.dz[i];
    for (int j = 0; j < n_; ++j) {
      if (has_lo_[j]) tgt_l[j] = sigma * mu - aff.dx[j] * aff.dnl[j];
      if (has_up_[j]) tgt_u[j] = sigma * mu + aff.dx[j] * aff.dnu[j];
    }
    Dir d = direction(tgt_s, tgt_l, tgt_u);
    double alpha = std::min(1.0, 0.995 * step_len(d));
    if (alpha < 0.5 * a_aff || alpha < 0.1) {
      // The second-order term can wreck the step near degenerate vertices;
      // fall back to a plain centered direction when it does better.
      double sg = std::max(sigma, 0.1);
      for (int i = 0; i < mi_; ++i) tgt_s[i] = sg * mu;
      for (int j = 0; j < n_; ++j) {
        tgt_l[j] = has_lo_[j] ? sg * mu : 0.0;
        tgt_u[j] = has_up_[j] ? sg * mu : 0.0;
      }
      Dir c = direction(tgt_s, tgt_l, tgt_u);
      double ac = std::min(1.0, 0.995 * step_len(c));
      if (ac > alpha) {
        d = std::move(c);
        alpha = ac;
      }
    }
    last_alpha = alpha;
    if (!(alpha > 0) || !std::isfinite(alpha)) {
      status = SolveStatus::NumericalError;
      out.message = "step length " + std::to_string(alpha);
      break;
    }
    x += alpha * d.dx;
    lam += alpha * d.dlam;
    z += alpha * d.dz;
    s += alpha * d.ds;
    nl += alpha * d.dnl;
    nu += alpha * d.dnu;
    // Guard interior: rounding can put bound slacks at zero. The margin is a
    // few ulps so the guard does not put a floor under complementarity.
    constexpr double kUlp = std::numeric_limits<double>::epsilon();
    for (int j = 0; j < n_; ++j) {
      if (has_lo_[j] && x[j] - lo_[j] <= 0) x[j] = lo_[j] + 8 * kUlp * std::max(1.0, std::abs(lo_[j]));
      if (has_up_[j] && up_[j] - x[j] <= 0) x[j] = up_[j] - 8 * kUlp * std::max(1.0, std::abs(up_[j]));
    }
  }

  // Stalling next to the optimum (zero pivots, vanishing steps) is reported
  // as a reduced-accuracy optimum rather than a failure.
  if ((status == SolveStatus::NumericalError || status == SolveStatus::IterationLimit) && near_optimal) {
    status = SolveStatus::Optimal;
    out.message = "reduced accuracy";
  }
  unscale(x, lam, z, nl, nu, out);
  out.status = status;
  out.iterations = iter;
  out.objective = prog_.objective_value(out.x);
  out.primal_residual = prim_res;
  out.dual_residual = dual_res;
  out.complementarity = comp_max;
  if (status != SolveStatus::Optimal && out.message.empty()) out.message = to_string(status);
  return out;
}

}  // namespace

PrimalDualSolution solve_qp(const ConvexProgram& program, const QpOptions& opts) {
  InteriorPoint ipm(program, opts);
  return ipm.run();
}

}  // namespace mdop
