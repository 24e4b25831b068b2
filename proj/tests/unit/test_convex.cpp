// SPDX-License-Identifier: Apache-2.0

#include <Eigen/Dense>

#include <cmath>
#include <random>

#include "doctest.h"
#include "mdop/convex.hpp"

using namespace mdop;

TEST_CASE("qp: one variable with an active lower row") {
  ConvexProgram p;
  int x = p.add_var(-kInf, kInf, 2.0, 0.0);  // x^2
  int r = p.add_row({{x, 1.0}}, RowSense::Ge, 1.0);
  auto sol = solve_qp(p);
  REQUIRE(sol.optimal());
  CHECK(sol.x[x] == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(sol.objective == doctest::Approx(1.0).epsilon(1e-8));
  // dV/db = 2b = 2 at b = 1, and dV/db = -lambda.
  CHECK(sol.row_duals[r] == doctest::Approx(-2.0).epsilon(1e-7));
}

TEST_CASE("qp: unconstrained minimum and bound duals") {
  ConvexProgram p;
  int x = p.add_var(-kInf, kInf, 1.0, -1.0);
  auto sol = solve_qp(p);
  REQUIRE(sol.optimal());
  CHECK(sol.x[x] == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(sol.objective == doctest::Approx(-0.5).epsilon(1e-8));

  ConvexProgram b;
  int y = b.add_var(2.0, 5.0, 1.0, -1.0);
  auto sb = solve_qp(b);
  REQUIRE(sb.optimal());
  CHECK(sb.x[y] == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(sb.lower_duals[y] == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(sb.upper_duals[y] == doctest::Approx(0.0).epsilon(1e-7));
}

TEST_CASE("qp: equality constrained problem matches a dense KKT solve") {
  const int n = 50, m = 30;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  ConvexProgram p;
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + m, n + m);
  Eigen::VectorXd rhs(n + m);
  for (int j = 0; j < n; ++j) {
    double q = 0.5 + 0.5 * (U(rng) + 1.0);
    double c = U(rng);
    p.add_var(-kInf, kInf, q, c);
    K(j, j) = q;
    rhs[j] = -c;
  }
  for (int i = 0; i < m; ++i) {
    std::vector<int> cols;
    std::vector<double> vals;
    for (int j = 0; j < n; ++j) {
      if ((i * 7 + j * 3) % 5 == 0 || j == i) {
        double a = U(rng);
        cols.push_back(j);
        vals.push_back(a);
        K(n + i, j) = a;
        K(j, n + i) = a;
      }
    }
    double b = U(rng);
    p.add_row(cols, vals, RowSense::Eq, b);
    rhs[n + i] = b;
  }
  Eigen::VectorXd ref = K.fullPivLu().solve(rhs);
  auto sol = solve_qp(p);
  REQUIRE(sol.optimal());
  for (int j = 0; j < n; ++j) CHECK(sol.x[j] == doctest::Approx(ref[j]).epsilon(1e-7));
  for (int i = 0; i < m; ++i) CHECK(sol.row_duals[i] == doctest::Approx(ref[n + i]).epsilon(1e-6));
}

namespace {

ConvexProgram random_lp_qp(std::uint64_t seed, double shift) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  ConvexProgram p;
  const int n = 12;
  for (int j = 0; j < n; ++j) p.add_var(0.0, 3.0, j % 3 == 0 ? 0.0 : U(rng), -1.0 - U(rng));
  for (int i = 0; i < 6; ++i) {
    std::vector<int> cols;
    std::vector<double> vals;
    for (int j = 0; j < n; ++j)
      if ((i + j) % 3 != 1) {
        cols.push_back(j);
        vals.push_back(0.2 + U(rng));
      }
    p.add_row(cols, vals, RowSense::Le, 4.0 + i + (i == 2 ? shift : 0.0));
  }
  std::vector<int> all(n);
  std::vector<double> ones(n, 1.0);
  for (int j = 0; j < n; ++j) all[j] = j;
  p.add_row(all, ones, RowSense::Eq, 6.0 + shift);
  return p;
}

}  // namespace

TEST_CASE("qp: row duals match finite differences of the optimal value") {
  const double h = 1e-5;
  ConvexProgram p = random_lp_qp(11, 0.0);
  auto sol = solve_qp(p);
  REQUIRE(sol.optimal());
  for (int r = 0; r < p.num_rows(); ++r) {
    ConvexProgram up = p, dn = p;
    up.rhs[r] += h;
    dn.rhs[r] -= h;
    auto su = solve_qp(up), sd = solve_qp(dn);
    REQUIRE(su.optimal());
    REQUIRE(sd.optimal());
    double fd = (su.objective - sd.objective) / (2 * h);
    CHECK(-sol.row_duals[r] == doctest::Approx(fd).epsilon(1e-4).scale(1.0));
  }
  auto kkt = kkt_residuals(p, sol);
  CHECK(kkt.stationarity < 1e-7);
  CHECK(kkt.primal < 1e-8);
  CHECK(kkt.complementarity < 1e-7);
}

TEST_CASE("qp: fixed columns and empty rows") {
  ConvexProgram p;
  int a = p.add_var(1.5, 1.5, 0.0, 2.0);
  int b = p.add_var(0.0, 10.0, 1.0, 0.0);
  int r = p.add_row({{a, 1.0}, {b, 1.0}}, RowSense::Ge, 4.0);
  auto sol = solve_qp(p);
  REQUIRE(sol.optimal());
  CHECK(sol.x[a] == 1.5);
  CHECK(sol.x[b] == doctest::Approx(2.5).epsilon(1e-8));
  CHECK(sol.row_duals[r] == doctest::Approx(-2.5).epsilon(1e-7));
  // Fixed column: reduced cost 2 + lambda = -0.5 goes to the upper multiplier.
  CHECK(sol.upper_duals[a] == doctest::Approx(0.5).epsilon(1e-7));

  ConvexProgram q;
  int c = q.add_var(1.0, 1.0);
  q.add_row({{c, 1.0}}, RowSense::Le, 0.5);
  CHECK(solve_qp(q).status == SolveStatus::Infeasible);
}

TEST_CASE("qp: infeasible rows are reported") {
  ConvexProgram p;
  int x = p.add_var(0.0, 10.0, 0.0, 1.0);
  int y = p.add_var(0.0, 10.0, 0.0, 1.0);
  p.add_row({{x, 1.0}, {y, 1.0}}, RowSense::Le, 1.0);
  p.add_row({{x, 1.0}, {y, 1.0}}, RowSense::Ge, 3.0);
  auto sol = solve_qp(p);
  CHECK(sol.status == SolveStatus::Infeasible);

  ConvexProgram q;
  int u = q.add_var(0.0, 1.0);
  int v = q.add_var(0.0, 1.0);
  q.add_row({{u, 1.0}, {v, 1.0}}, RowSense::Eq, 3.0);
  CHECK(solve_qp(q).status == SolveStatus::Infeasible);
}

TEST_CASE("qp: unbounded objective") {
  ConvexProgram p;
  p.add_var(0.0, kInf, 0.0, -1.0);
  CHECK(solve_qp(p).status == SolveStatus::Unbounded);
}

TEST_CASE("qcqp: point on a circle") {
  ConvexProgram p;
  int a = p.add_var(-kInf, kInf, 0.0, -1.0);  // maximize p
  int b = p.add_var(0.6, 0.6);
  p.add_ball({{a, b}, -1, 1.0, 1.0});
  auto sol = solve_qcqp(p);
  REQUIRE(sol.optimal());
  CHECK(sol.x[a] == doctest::Approx(0.8).epsilon(1e-6));
  CHECK(sol.worst_ball_violation <= 1e-7 * 2);
  // Multiplier of ||x|| <= 1: grad of -p is -1 = -kappa * p / ||x|| -> kappa = 1.25.
  CHECK(sol.ball_duals[0] == doctest::Approx(1.25).epsilon(1e-4));

  ConvexProgram z;
  int c = z.add_var(-1.0, 1.0, 0.0, -1.0);
  z.add_ball({{c}, -1, 0.0, 1.0});
  auto sz = solve_qcqp(z);
  REQUIRE(sz.optimal());
  CHECK(sz.x[c] == 0.0);
}

TEST_CASE("qcqp: variable radius ball and cut pool reuse") {
  // min s + (p-1)^2 + (q-1)^2 subject to ||(p,q)|| <= s.
  ConvexProgram p;
  int x = p.add_var(-kInf, kInf, 2.0, -2.0);
  int y = p.add_var(-kInf, kInf, 2.0, -2.0);
  int s = p.add_var(0.0, 10.0, 0.0, 1.0);
  p.add_ball({{x, y}, s, 0.0, 1.0});
  CutPool pool;
  auto first = solve_qcqp(p, {}, &pool);
  REQUIRE(first.optimal());
  // Symmetric optimum p = q = a, s = sqrt(2) a with 2(a-1) + 1/sqrt(2) = 0.
  double aref = 1.0 - 0.5 / std::sqrt(2.0);
  CHECK(first.x[x] == doctest::Approx(aref).epsilon(1e-5));
  CHECK(first.x[s] == doctest::Approx(std::sqrt(2.0) * aref).epsilon(1e-5));
  auto again = solve_qcqp(p, {}, &pool);
  REQUIRE(again.optimal());
  CHECK(again.cut_rounds <= 1);
  CHECK(again.objective == doctest::Approx(first.objective).epsilon(1e-7));
}
