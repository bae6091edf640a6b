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

#pragma once

// Independent reference computations shared by the unit and acceptance
// suites. Nothing here calls the code paths it is used to check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "portfolio_lab/core.hpp"
#include "portfolio_lab/generators.hpp"
#include "portfolio_lab/lp.hpp"
#include "portfolio_lab/piecewise.hpp"

namespace oracle {

using portfolio_lab::IpInstance;
using portfolio_lab::Matrix;
using portfolio_lab::Orientation;
using portfolio_lab::PerformanceTable;
using portfolio_lab::Rng;

// Random table with small integer utilities, so sums are exact in doubles.
inline PerformanceTable random_table(Rng& rng, std::size_t n, std::size_t m, Orientation o, int h = 20) {
  PerformanceTable t;
  t.utilities = Matrix(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) t.utilities(i, j) = static_cast<double>(rng.between(0, h));
  }
  for (std::size_t j = 0; j < m; ++j) t.candidates.params.push_back(static_cast<double>(j + 1) / static_cast<double>(m + 1));
  t.candidates.source_interval_count = m;
  t.orientation = o;
  t.range_cap = h;
  return t;
}

// Row-wise best over a column bitmask, in the table's own orientation.
inline double subset_value(const PerformanceTable& t, std::uint64_t mask) {
  double total = 0.0;
  for (std::size_t i = 0; i < t.rows(); ++i) {
    std::optional<double> best;
    for (std::size_t j = 0; j < t.cols(); ++j) {
      if (!((mask >> j) & 1U)) continue;
      const double u = t.at(i, j);
      if (!best || (t.orientation == Orientation::Maximize ? u > *best : u < *best)) best = u;
    }
    total += best.value_or(0.0);
  }
  return total;
}

// Optimal value over all subsets of size exactly k (k <= M <= 20).
inline double best_subset_value(const PerformanceTable& t, std::size_t k) {
  std::optional<double> best;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << t.cols()); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcountll(mask)) != k) continue;
    const double v = subset_value(t, mask);
    if (!best || (t.orientation == Orientation::Maximize ? v > *best : v < *best)) best = v;
  }
  return *best;
}

// Random bounded LP max c.x, A x <= b, lo <= x <= hi.
inline IpInstance random_lp(Rng& rng, std::size_t n, std::size_t m) {
  IpInstance inst;
  inst.c.resize(n);
  for (auto& v : inst.c) v = rng.uniform(-1.0, 1.0);
  inst.A = Matrix(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) inst.A(i, j) = rng.uniform(-1.0, 1.0);
  }
  inst.b.resize(m);
  for (auto& v : inst.b) v = rng.uniform(-1.5, 2.0);
  inst.lo.resize(n);
  inst.hi.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    inst.lo[j] = rng.uniform(-2.0, 0.5);
    inst.hi[j] = inst.lo[j] + rng.uniform(0.1, 3.0);
  }
  return inst;
}

struct VertexOptimum {
  bool feasible = false;
  double objective = -std::numeric_limits<double>::infinity();
};

// Enumerates every basic point: n linearly independent tight constraints out
// of the rows of A and the 2n box sides. A bounded nonempty polytope attains
// its maximum at one of them.
inline VertexOptimum enumerate_vertices(const IpInstance& inst, double tol = 1e-9) {
  const std::size_t n = inst.c.size();
  const std::size_t m = inst.b.size();
  const std::size_t total = m + 2 * n;
  Eigen::MatrixXd rows(total, n);
  Eigen::VectorXd rhs(total);
  rows.setZero();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) rows(i, j) = inst.A(i, j);
    rhs(i) = inst.b[i];
  }
  for (std::size_t j = 0; j < n; ++j) {
    rows(m + j, j) = 1.0;  // x_j <= hi_j
    rhs(m + j) = inst.hi[j];
    rows(m + n + j, j) = -1.0;  // -x_j <= -lo_j
    rhs(m + n + j) = -inst.lo[j];
  }
  VertexOptimum best;
  std::vector<std::size_t> comb(n);
  for (std::size_t i = 0; i < n; ++i) comb[i] = i;
  for (;;) {
    Eigen::MatrixXd a(n, n);
    Eigen::VectorXd r(n);
    for (std::size_t k = 0; k < n; ++k) {
      a.row(k) = rows.row(comb[k]);
      r(k) = rhs(comb[k]);
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    if (lu.rank() == static_cast<Eigen::Index>(n)) {
      const Eigen::VectorXd x = lu.solve(r);
      const Eigen::VectorXd slack = rhs - rows * x;
      if (slack.minCoeff() >= -tol) {
        double obj = 0.0;
        for (std::size_t j = 0; j < n; ++j) obj += inst.c[j] * x(j);
        best.feasible = true;
        best.objective = std::max(best.objective, obj);
      }
    }
    std::size_t pos = n;
    while (pos > 0 && comb[pos - 1] == total - n + pos - 1) --pos;
    if (pos == 0) break;
    ++comb[pos - 1];
    for (std::size_t i = pos; i < n; ++i) comb[i] = comb[i - 1] + 1;
  }
  return best;
}

// Small seeded set-packing instances for exactness checks.
inline IpInstance small_instance(std::uint64_t seed, std::size_t max_vars = 12) {
  Rng rng(portfolio_lab::derive_seed(seed, portfolio_lab::stream_tag("small-instance")));
  portfolio_lab::GeneratorSpec spec;
  spec.family = rng.coin() ? portfolio_lab::Family::B : portfolio_lab::Family::A;
  spec.n_bids = static_cast<std::size_t>(rng.between(6, static_cast<std::int64_t>(max_vars)));
  spec.n_items = static_cast<std::size_t>(rng.between(4, 8));
  spec.seed = seed;
  return portfolio_lab::generate_instance(spec);
}

}  // namespace oracle
