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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "portfolio_lab/bnb.hpp"
#include "portfolio_lab/core.hpp"
#include "portfolio_lab/lp.hpp"

namespace portfolio_lab {

// Combinatorial-auction winner determination under OR bidding: one binary
// variable per bid, one packing row per item that some bid contains.
//   FamilyA: bundles are uniform random item sets of size 2..5, priced
//            size * U(0.8, 1.2).
//   FamilyB: items sit on a ring and bundles are contiguous arcs of size 2..6,
//            priced superadditively as size^1.2 * U(0.9, 1.1).
enum class Family { A, B };

inline std::string_view to_string(Family f) { return f == Family::A ? "A" : "B"; }

inline Family family_from_string(std::string_view s) {
  if (s == "A" || s == "a") return Family::A;
  if (s == "B" || s == "b") return Family::B;
  throw ArgumentError("unknown instance family '" + std::string(s) + "'");
}

struct GeneratorSpec {
  Family family = Family::A;
  std::size_t n_items = 15;
  std::size_t n_bids = 30;
  std::uint64_t seed = 0;

  // Desk-scale defaults per family.
  static GeneratorSpec defaults(Family f, std::uint64_t seed) {
    return f == Family::A ? GeneratorSpec{Family::A, 15, 30, seed} : GeneratorSpec{Family::B, 20, 40, seed};
  }
};

inline IpInstance generate_instance(const GeneratorSpec& spec) {
  if (spec.n_items < 1 || spec.n_bids < 1) throw ArgumentError("generator needs >= 1 item and bid");
  Rng rng(derive_seed(spec.seed, stream_tag(spec.family == Family::A ? "family-a" : "family-b")));
  const std::size_t items = spec.n_items;
  std::vector<std::vector<std::size_t>> bundles(spec.n_bids);
  std::vector<double> prices(spec.n_bids);

  std::vector<std::size_t> all(items);
  std::iota(all.begin(), all.end(), 0);
  for (std::size_t bid = 0; bid < spec.n_bids; ++bid) {
    if (spec.family == Family::A) {
      const auto size = std::min<std::size_t>(items, static_cast<std::size_t>(rng.between(2, 5)));
      // Partial Fisher-Yates draws `size` distinct items.
      std::vector<std::size_t> pool = all;
      for (std::size_t k = 0; k < size; ++k) {
        std::swap(pool[k], pool[k + rng.below(items - k)]);
      }
      bundles[bid].assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(size));
      prices[bid] = static_cast<double>(size) * rng.uniform(0.8, 1.2);
    } else {
      const auto size = std::min<std::size_t>(items, static_cast<std::size_t>(rng.between(2, 6)));
      const std::size_t start = rng.below(items);
      for (std::size_t k = 0; k < size; ++k) bundles[bid].push_back((start + k) % items);
      prices[bid] = std::pow(static_cast<double>(size), 1.2) * rng.uniform(0.9, 1.1);
    }
    std::sort(bundles[bid].begin(), bundles[bid].end());
  }

  std::vector<bool> used(items, false);
  for (const auto& bundle : bundles) {
    for (std::size_t it : bundle) used[it] = true;
  }
  std::vector<std::size_t> row_of(items, items);
  std::size_t rows = 0;
  for (std::size_t it = 0; it < items; ++it) {
    if (used[it]) row_of[it] = rows++;
  }

  IpInstance inst;
  inst.c = prices;
  inst.A = Matrix(rows, spec.n_bids, 0.0);
  for (std::size_t bid = 0; bid < spec.n_bids; ++bid) {
    for (std::size_t it : bundles[bid]) inst.A(row_of[it], bid) = 1.0;
  }
  inst.b.assign(rows, 1.0);
  inst.integer_vars.resize(spec.n_bids);
  std::iota(inst.integer_vars.begin(), inst.integer_vars.end(), 0);
  inst.lo.assign(spec.n_bids, 0.0);
  inst.hi.assign(spec.n_bids, 1.0);
  inst.family = std::string(to_string(spec.family));
  inst.seed = spec.seed;
  return inst;
}

/// The heterogeneous distribution: a fair coin picks between the two specs
/// (their seeds are ignored and replaced by one derived from `seed`).
inline IpInstance draw_mixture_instance(std::uint64_t seed, const GeneratorSpec& a, const GeneratorSpec& b) {
  Rng coin(derive_seed(seed, stream_tag("family-coin")));
  GeneratorSpec spec = coin.coin() ? b : a;
  spec.seed = derive_seed(seed, stream_tag("instance"));
  return generate_instance(spec);
}

inline IpInstance draw_mixture_instance(std::uint64_t seed) {
  return draw_mixture_instance(seed, GeneratorSpec::defaults(Family::A, 0), GeneratorSpec::defaults(Family::B, 0));
}

inline constexpr std::size_t kFeatureCount = 16;

using FeatureVector = std::vector<double>;

namespace detail {

inline void mean_std(const std::vector<double>& v, double& mean, double& sd) {
  mean = 0.0;
  sd = 0.0;
  if (v.empty()) return;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  for (double x : v) sd += (x - mean) * (x - mean);
  sd = std::sqrt(sd / static_cast<double>(v.size()));
}

// Largest-price-first rounding: raise each variable, best objective
// coefficient first, to the largest integral value that keeps A x <= b.
inline double greedy_integral_value(const IpInstance& inst) {
  const std::size_t n = inst.num_vars();
  std::vector<double> x(n);
  for (std::size_t j = 0; j < n; ++j) x[j] = std::ceil(inst.lo[j]);
  std::vector<double> slack(inst.b);
  for (std::size_t i = 0; i < inst.num_rows(); ++i) {
    for (std::size_t j = 0; j < n; ++j) slack[i] -= inst.A(i, j) * x[j];
  }
  for (double s : slack) {
    if (s < -1e-9) return 0.0;
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) { return inst.c[l] > inst.c[r]; });
  for (std::size_t j : order) {
    if (inst.c[j] <= 0.0) break;
    double step = std::floor(inst.hi[j]) - x[j];
    for (std::size_t i = 0; i < inst.num_rows(); ++i) {
      const double a = inst.A(i, j);
      if (a > 1e-12) step = std::min(step, std::floor((slack[i] + 1e-9) / a));
    }
    if (step <= 0.0) continue;
    x[j] += step;
    for (std::size_t i = 0; i < inst.num_rows(); ++i) slack[i] -= inst.A(i, j) * step;
  }
  return detail::dot(inst.c, x);
}

}  // namespace detail

/// Sixteen instance features:
///   0 variable count            1 constraint count         2 nonzero density of A
///   3-6 mean, std, min, max of c
///   7-8 mean, std of row sums   9-10 mean, std of column sums
///  11 LP relaxation objective  12 fractional integer variables in the LP optimum
///  13 mean fractionality (distance to nearest integer) over those variables
///  14 LP objective over greedy integral value (0 when that value is not
///     positive; -1 flags an infeasible LP, in which case 11-13 and 15 are 0)
///  15 mean row tightness (A x - b) / max(|b|, 1) at the LP optimum, clipped to [-10, 10]
inline FeatureVector extract_features(const IpInstance& inst) {
  const std::size_t n = inst.num_vars();
  const std::size_t m = inst.num_rows();
  FeatureVector f(kFeatureCount, 0.0);
  f[0] = static_cast<double>(n);
  f[1] = static_cast<double>(m);

  std::size_t nnz = 0;
  std::vector<double> row_sums(m, 0.0), col_sums(n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double a = inst.A(i, j);
      if (a != 0.0) ++nnz;
      row_sums[i] += a;
      col_sums[j] += a;
    }
  }
  f[2] = m == 0 ? 0.0 : static_cast<double>(nnz) / static_cast<double>(m * n);
  detail::mean_std(inst.c, f[3], f[4]);
  f[5] = *std::min_element(inst.c.begin(), inst.c.end());
  f[6] = *std::max_element(inst.c.begin(), inst.c.end());
  detail::mean_std(row_sums, f[7], f[8]);
  detail::mean_std(col_sums, f[9], f[10]);

  const LpResult lp = lp_solve(inst);
  if (lp.status != LpStatus::Optimal) {
    f[14] = -1.0;
    return f;
  }
  f[11] = lp.objective;
  double frac_sum = 0.0;
  std::size_t frac_count = 0;
  for (std::size_t i : inst.integer_vars) {
    const double dist = std::abs(lp.x[i] - std::round(lp.x[i]));
    if (dist > kIntegralityTol) {
      ++frac_count;
      frac_sum += dist;
    }
  }
  f[12] = static_cast<double>(frac_count);
  f[13] = frac_count == 0 ? 0.0 : frac_sum / static_cast<double>(frac_count);
  const double greedy = detail::greedy_integral_value(inst);
  f[14] = greedy > 1e-9 ? lp.objective / greedy : 0.0;
  if (m > 0) {
    double tight = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      double ax = 0.0;
      for (std::size_t j = 0; j < n; ++j) ax += inst.A(i, j) * lp.x[j];
      tight += std::clamp((ax - inst.b[i]) / std::max(std::abs(inst.b[i]), 1.0), -10.0, 10.0);
    }
    f[15] = tight / static_cast<double>(m);
  }
  return f;
}

}  // namespace portfolio_lab
