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
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "portfolio_lab/core.hpp"
#include "portfolio_lab/piecewise.hpp"

namespace portfolio_lab {

inline constexpr double kGreedyAlpha = 1.0 - 1.0 / std::numbers::e;
inline constexpr double kExhaustiveGuard = 1e7;

struct Portfolio {
  std::vector<double> params;  // ascending, distinct
  std::size_t kappa_cap = 1;

  std::size_t size() const { return params.size(); }

  static Portfolio make(std::vector<double> params, std::size_t kappa_cap) {
    std::sort(params.begin(), params.end());
    if (std::adjacent_find(params.begin(), params.end()) != params.end()) {
      throw ArgumentError("portfolio parameters must be distinct");
    }
    if (kappa_cap < 1) throw ArgumentError("kappa_cap must be >= 1");
    if (params.size() > kappa_cap) throw ArgumentError("portfolio larger than kappa_cap");
    return {std::move(params), kappa_cap};
  }

  friend bool operator==(const Portfolio&, const Portfolio&) = default;
};

enum class SelectionMethod { Greedy, Exhaustive };

struct OptimalityReport {
  double alpha = 1.0;
  double beta = 0.0;
  double epsilon = 0.0;
  // Per-instance averages in the table's own orientation.
  double train_coverage = 0.0;
  double opt_coverage_or_bound = 0.0;
  bool opt_is_exact = true;
};

namespace detail {

// Minimization is served by the reflection u -> H - u, which turns the
// row-wise minimum into a row-wise maximum of nonnegative values.
inline double reflected(const PerformanceTable& t, std::size_t i, std::size_t j) {
  const double u = t.at(i, j);
  return t.orientation == Orientation::Maximize ? u : t.range_cap - u;
}

// Sum over rows of the best reflected utility in `cols`; 0 for the empty set.
inline double reflected_coverage(const PerformanceTable& t, std::span<const std::size_t> cols) {
  if (cols.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < t.rows(); ++i) {
    double best = reflected(t, i, cols.front());
    for (std::size_t c : cols.subspan(1)) best = std::max(best, reflected(t, i, c));
    total += best;
  }
  return total;
}

inline double unreflect_total(const PerformanceTable& t, double reflected_total) {
  return t.orientation == Orientation::Maximize
             ? reflected_total
             : static_cast<double>(t.rows()) * t.range_cap - reflected_total;
}

inline std::vector<std::size_t> columns_of(const PerformanceTable& t, const Portfolio& p) {
  std::vector<std::size_t> cols;
  cols.reserve(p.size());
  for (double rho : p.params) cols.push_back(t.column_of(rho));
  return cols;
}

inline double binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0.0;
  k = std::min(k, n - k);
  double r = 1.0;
  for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

}  // namespace detail

/// Sum over instances of the best utility any member of `subset` achieves
/// (max under Maximize, min under Minimize).
inline double coverage(const PerformanceTable& table, const Portfolio& subset) {
  if (subset.params.empty()) throw ArgumentError("coverage of an empty portfolio");
  const auto cols = detail::columns_of(table, subset);
  return detail::unreflect_total(table, detail::reflected_coverage(table, cols));
}

struct GreedyResult {
  Portfolio portfolio;
  std::vector<double> order;  // parameters in the order they were picked
  std::vector<double> gains;  // marginal gain of each pick, nonincreasing
};

/// Greedy coverage maximization. Each step adds the candidate with the largest
/// marginal gain (smallest parameter on ties) and stops early once no
/// candidate improves coverage, unless `fill` is set: then zero-gain picks
/// continue until kappa entries exist or the candidates run out.
inline GreedyResult greedy_select(const PerformanceTable& table, std::size_t kappa, bool fill = false) {
  if (kappa < 1) throw ArgumentError("greedy_select: kappa must be >= 1");
  if (table.cols() == 0) throw ArgumentError("greedy_select: table has no candidates");
  const std::size_t n = table.rows();
  const std::size_t m = table.cols();

  // best[i] tracks the reflected utility row i gets from the picks so far.
  std::vector<double> best(n, 0.0);
  std::vector<bool> taken(m, false);
  GreedyResult out;
  for (std::size_t step = 0; step < kappa; ++step) {
    double best_gain = 0.0;
    std::size_t pick = m;
    for (std::size_t j = 0; j < m; ++j) {
      if (taken[j]) continue;
      double gain = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        gain += std::max(0.0, detail::reflected(table, i, j) - best[i]);
      }
      if (gain > best_gain || (fill && pick == m)) {
        best_gain = gain;
        pick = j;
      }
    }
    if (pick == m) break;
    taken[pick] = true;
    for (std::size_t i = 0; i < n; ++i) best[i] = std::max(best[i], detail::reflected(table, i, pick));
    out.order.push_back(table.candidates.params[pick]);
    out.gains.push_back(best_gain);
  }
  out.portfolio = Portfolio::make(out.order, kappa);
  return out;
}

/// Coverage-optimal portfolio of size min(kappa, M) by enumeration. Ties go to
/// the lexicographically smallest sorted parameter list.
inline Portfolio exhaustive_select(const PerformanceTable& table, std::size_t kappa) {
  if (kappa < 1) throw ArgumentError("exhaustive_select: kappa must be >= 1");
  const std::size_t m = table.cols();
  if (m == 0) throw ArgumentError("exhaustive_select: table has no candidates");
  const std::size_t k = std::min(kappa, m);
  if (detail::binomial(m, k) > kExhaustiveGuard) {
    throw CapacityError("exhaustive_select: C(" + std::to_string(m) + ", " + std::to_string(k) +
                        ") exceeds 1e7 subsets; use greedy_select instead");
  }
  // Combinations are visited in lexicographic index order, and candidates are
  // sorted, so keeping the first strict improvement implements the tie rule.
  std::vector<std::size_t> comb(k);
  for (std::size_t i = 0; i < k; ++i) comb[i] = i;
  std::vector<std::size_t> best_comb = comb;
  double best_value = detail::reflected_coverage(table, comb);
  for (;;) {
    std::size_t pos = k;
    while (pos > 0 && comb[pos - 1] == m - k + pos - 1) --pos;
    if (pos == 0) break;
    ++comb[pos - 1];
    for (std::size_t i = pos; i < k; ++i) comb[i] = comb[i - 1] + 1;
    const double value = detail::reflected_coverage(table, comb);
    if (value > best_value) {
      best_value = value;
      best_comb = comb;
    }
  }
  std::vector<double> params;
  for (std::size_t c : best_comb) params.push_back(table.candidates.params[c]);
  return Portfolio::make(std::move(params), kappa);
}

/// A set function over subsets of {0, ..., ground_size - 1}.
using SetFunction = std::function<double(std::span<const std::size_t>)>;

/// Randomized check of monotonicity and the submodular exchange inequality
/// f(T+a) + f(T+b) >= f(T+a+b) + f(T) on sampled (T, a, b) with a, b not in T.
inline bool check_monotone_submodular(std::size_t ground_size, const SetFunction& f,
                                      std::size_t trials, std::uint64_t seed) {
  if (ground_size < 1) return true;
  Rng rng(derive_seed(seed, stream_tag("submodular-check")));
  auto close_enough = [](double lhs, double rhs) {
    return lhs >= rhs - 1e-9 * (1.0 + std::abs(rhs));
  };
  std::vector<std::size_t> t, ta, tb, tab, pool;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    t.clear();
    pool.clear();
    for (std::size_t e = 0; e < ground_size; ++e) {
      (rng.coin() ? t : pool).push_back(e);
    }
    if (pool.empty()) {
      // Everything landed in T; move one element back out.
      pool.push_back(t.back());
      t.pop_back();
    }
    const std::size_t a = pool[rng.below(pool.size())];
    ta = t;
    ta.insert(std::upper_bound(ta.begin(), ta.end(), a), a);
    const double ft = f(t);
    const double fta = f(ta);
    if (!close_enough(fta, ft)) return false;
    if (pool.size() < 2) continue;
    std::size_t b;
    do {
      b = pool[rng.below(pool.size())];
    } while (b == a);
    tb = t;
    tb.insert(std::upper_bound(tb.begin(), tb.end(), b), b);
    tab = ta;
    tab.insert(std::upper_bound(tab.begin(), tab.end(), b), b);
    if (!close_enough(fta + f(tb), f(tab) + ft)) return false;
  }
  return true;
}

/// Checks the coverage function of `table` (after reflection under Minimize,
/// i.e. N*H minus the min-coverage) for monotonicity and submodularity.
inline bool verify_monotone_submodular(const PerformanceTable& table, std::size_t trials,
                                       std::uint64_t seed) {
  SetFunction f = [&table](std::span<const std::size_t> cols) {
    return detail::reflected_coverage(table, cols);
  };
  return check_monotone_submodular(table.cols(), f, trials, seed);
}

/// Fills the (alpha, beta, epsilon) diagnostics for a portfolio and a selector
/// whose training-set average utility is `selector_train_avg`.
inline OptimalityReport optimality_report(const PerformanceTable& table, const Portfolio& portfolio,
                                          double selector_train_avg, SelectionMethod method) {
  if (table.rows() == 0) throw ArgumentError("optimality_report: empty table");
  const double n = static_cast<double>(table.rows());
  const bool maximize = table.orientation == Orientation::Maximize;
  OptimalityReport r;
  r.beta = 0.0;
  r.alpha = method == SelectionMethod::Greedy ? kGreedyAlpha : 1.0;
  r.train_coverage = coverage(table, portfolio) / n;

  const double eps = maximize ? r.train_coverage - selector_train_avg
                              : selector_train_avg - r.train_coverage;
  if (eps < -1e-9) {
    throw ConsistencyError("selector average " + std::to_string(selector_train_avg) +
                           " beats the portfolio oracle " + std::to_string(r.train_coverage));
  }
  r.epsilon = std::max(0.0, eps);

  const std::size_t k = std::min(portfolio.kappa_cap, table.cols());
  if (method == SelectionMethod::Exhaustive || detail::binomial(table.cols(), k) <= 1e5) {
    r.opt_coverage_or_bound = coverage(table, exhaustive_select(table, portfolio.kappa_cap)) / n;
    r.opt_is_exact = true;
  } else {
    // The greedy guarantee bounds the reflected optimum by greedy / alpha.
    const auto cols = detail::columns_of(table, portfolio);
    const double bound = detail::reflected_coverage(table, cols) / kGreedyAlpha;
    r.opt_coverage_or_bound = detail::unreflect_total(table, bound) / n;
    r.opt_is_exact = false;
  }
  return r;
}

}  // namespace portfolio_lab
