// Copyright 2026 The portfolio_lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "portfolio_lab/lp.hpp"

namespace pl = portfolio_lab;

namespace {

pl::IpInstance two_var_lp() {
  pl::IpInstance inst;
  inst.c = {1, 1};
  inst.A = pl::Matrix::from_rows({{1, 2}, {3, 1}});
  inst.b = {4, 6};
  inst.lo = {0, 0};
  inst.hi = {10, 10};
  return inst;
}

void expect_feasible(const pl::IpInstance& inst, const pl::NodeBounds& nb, const std::vector<double>& x) {
  for (std::size_t i = 0; i < inst.num_rows(); ++i) {
    double ax = 0.0;
    for (std::size_t j = 0; j < inst.num_vars(); ++j) ax += inst.A(i, j) * x[j];
    EXPECT_LE(ax, inst.b[i] + 1e-9);
  }
  for (std::size_t j = 0; j < inst.num_vars(); ++j) {
    EXPECT_GE(x[j], nb.lo[j] - 1e-9);
    EXPECT_LE(x[j], nb.hi[j] + 1e-9);
  }
}

}  // namespace

TEST(LpSolve, TextbookVertex) {
  const auto r = pl::lp_solve(two_var_lp());
  ASSERT_EQ(r.status, pl::LpStatus::Optimal);
  EXPECT_NEAR(r.x[0], 1.6, 1e-12);
  EXPECT_NEAR(r.x[1], 1.2, 1e-12);
  EXPECT_NEAR(r.objective, 2.8, 1e-12);
}

TEST(LpSolve, BoxOnlyProblemSitsAtTheBestCorner) {
  pl::IpInstance inst;
  inst.c = {2, -1, 0.5};
  inst.lo = {-1, -2, 0};
  inst.hi = {3, 4, 1};
  const auto r = pl::lp_solve(inst);
  ASSERT_EQ(r.status, pl::LpStatus::Optimal);
  EXPECT_NEAR(r.objective, 2 * 3 + 2 + 0.5, 1e-12);
}

TEST(LpSolve, InfeasibleAgainstBounds) {
  pl::IpInstance inst;
  inst.c = {1};
  inst.A = pl::Matrix::from_rows({{1}});
  inst.b = {-1};
  inst.lo = {0};
  inst.hi = {5};
  EXPECT_EQ(pl::lp_solve(inst).status, pl::LpStatus::Infeasible);
}

TEST(LpSolve, NodeBoundsTighten) {
  const auto inst = two_var_lp();
  pl::NodeBounds nb = pl::NodeBounds::of(inst);
  nb.hi[0] = 1.0;
  const auto r = pl::lp_solve(inst, nb);
  ASSERT_EQ(r.status, pl::LpStatus::Optimal);
  EXPECT_NEAR(r.x[0], 1.0, 1e-12);
  EXPECT_NEAR(r.x[1], 1.5, 1e-12);
  nb.lo[0] = 2.0;
  nb.hi[0] = 2.0;
  nb.lo[1] = 1.0;
  EXPECT_EQ(pl::lp_solve(inst, nb).status, pl::LpStatus::Infeasible);
}

TEST(LpSolve, MatchesVertexEnumeration) {
  pl::Rng rng(71);
  int optimal = 0, infeasible = 0;
  for (int rep = 0; rep < 300; ++rep) {
    const std::size_t n = 1 + rng.below(5);
    const std::size_t m = rng.below(6);
    const auto inst = oracle::random_lp(rng, n, m);
    const auto truth = oracle::enumerate_vertices(inst);
    const auto r = pl::lp_solve(inst);
    ASSERT_EQ(r.status == pl::LpStatus::Optimal, truth.feasible) << "rep " << rep;
    if (truth.feasible) {
      ++optimal;
      ASSERT_NEAR(r.objective, truth.objective, 1e-9) << "rep " << rep;
      expect_feasible(inst, pl::NodeBounds::of(inst), r.x);
    } else {
      ++infeasible;
    }
  }
  // Both outcomes must actually be exercised.
  EXPECT_GT(optimal, 50);
  EXPECT_GT(infeasible, 10);
}

TEST(LpSolve, BitIdenticalAcrossCalls) {
  pl::Rng rng(73);
  const auto inst = oracle::random_lp(rng, 5, 4);
  const auto a = pl::lp_solve(inst);
  const auto b = pl::lp_solve(inst);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.objective, b.objective);
}

TEST(Relaxation, WarmStartMatchesColdSolve) {
  pl::Rng rng(79);
  for (int rep = 0; rep < 200; ++rep) {
    const auto inst = oracle::random_lp(rng, 2 + rng.below(4), 1 + rng.below(5));
    const auto root = pl::solve_relaxation(inst, pl::NodeBounds::of(inst));
    if (root.result.status != pl::LpStatus::Optimal) continue;
    pl::NodeBounds nb = pl::NodeBounds::of(inst);
    const std::size_t j = rng.below(inst.num_vars());
    const double cut = rng.uniform(nb.lo[j], nb.hi[j]);
    if (rng.coin()) {
      nb.hi[j] = cut;
    } else {
      nb.lo[j] = cut;
    }
    const auto warm = pl::resolve_relaxation(inst, root, nb);
    const auto cold = pl::solve_relaxation(inst, nb);
    ASSERT_EQ(warm.result.status, cold.result.status) << "rep " << rep;
    if (cold.result.status == pl::LpStatus::Optimal) {
      ASSERT_NEAR(warm.result.objective, cold.result.objective, 1e-9) << "rep " << rep;
      expect_feasible(inst, nb, warm.result.x);
    }
  }
}
