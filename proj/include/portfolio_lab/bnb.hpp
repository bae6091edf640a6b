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
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "portfolio_lab/core.hpp"
#include "portfolio_lab/lp.hpp"
#include "portfolio_lab/piecewise.hpp"

namespace portfolio_lab {

inline constexpr double kIntegralityTol = 1e-6;
inline constexpr double kBoundTol = 1e-9;
inline constexpr double kInfeasibleDelta = 1e18;

enum class BnbStatus { Solved, NodeCapHit };

inline std::string_view to_string(BnbStatus s) {
  return s == BnbStatus::Solved ? "solved" : "node_cap_hit";
}

struct BnbResult {
  std::size_t tree_size = 0;
  BnbStatus status = BnbStatus::Solved;
  bool has_incumbent = false;
  double incumbent_objective = -std::numeric_limits<double>::infinity();
  std::vector<double> incumbent_x;
};

/// Strong-branching score of one fractional variable. The score is the line
/// (1 - rho) * min + rho * max in rho, stored as intercept and slope.
struct BranchScore {
  std::size_t var = 0;
  double delta_down = 0.0;  // parent bound minus down-child bound
  double delta_up = 0.0;    // parent bound minus up-child bound
  double intercept = 0.0;   // min(delta_down, delta_up)
  double slope = 0.0;       // max - min

  double score(double rho) const { return (1.0 - rho) * intercept + rho * (intercept + slope); }
};

/// Set of rho values [lo, hi) on which a run makes exactly the same decisions.
struct RhoRegion {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();

  void at_least(double v) { lo = std::max(lo, v); }
  void below(double v) { hi = std::min(hi, v); }
};

namespace detail {

// Objective changes are rounded to multiples of 2^-30 so that changes equal in
// exact arithmetic compare as exact ties rather than by LP round-off.
inline double snap_delta(double delta) {
  constexpr double kScale = 0x1.0p30;
  return std::round(delta * kScale) / kScale;
}

inline double next_up(double v) { return std::nextafter(v, std::numeric_limits<double>::infinity()); }

// Does candidate `a` score strictly higher than `b` at rho? The two score
// lines differ by dA + rho * dS, whose sign changes only at the crossing
// -dA / dS. Deciding by comparing rho against that crossing (rather than by
// subtracting two rounded scores) makes every outcome a half-line in rho,
// which the dual tracer relies on. When a region is supplied, it is narrowed
// to the half-line on which the returned outcome holds.
inline bool strictly_beats(const BranchScore& a, const BranchScore& b, double rho, RhoRegion* region) {
  const double d_intercept = a.intercept - b.intercept;
  const double d_slope = a.slope - b.slope;
  if (d_slope == 0.0) return d_intercept > 0.0;
  const double crossing = -d_intercept / d_slope;
  if (d_slope > 0.0) {
    const bool out = rho > crossing;
    if (region) out ? region->at_least(next_up(crossing)) : region->below(next_up(crossing));
    return out;
  }
  const bool out = rho < crossing;
  if (region) out ? region->below(crossing) : region->at_least(crossing);
  return out;
}

}  // namespace detail

/// Argmax of the scores at rho with ties to the earliest candidate.
inline std::size_t choose_branch(const std::vector<BranchScore>& scores, double rho,
                                 RhoRegion* region = nullptr) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < scores.size(); ++k) {
    if (detail::strictly_beats(scores[k], scores[best], rho, region)) best = k;
  }
  return best;
}

inline std::vector<std::size_t> fractional_vars(const IpInstance& inst, const std::vector<double>& x) {
  std::vector<std::size_t> out;
  for (std::size_t i : inst.integer_vars) {
    if (std::abs(x[i] - std::round(x[i])) > kIntegralityTol) out.push_back(i);
  }
  return out;
}

namespace detail {

struct Candidate {
  BranchScore score;
  SolvedLp down;
  SolvedLp up;
};

inline std::vector<Candidate> strong_branch(const IpInstance& inst, const SolvedLp& node,
                                            const std::vector<std::size_t>& frac) {
  std::vector<Candidate> out;
  out.reserve(frac.size());
  const double parent = node.result.objective;
  for (std::size_t i : frac) {
    const double xi = node.result.x[i];
    NodeBounds down_b = node.bounds;
    down_b.hi[i] = std::floor(xi);
    NodeBounds up_b = node.bounds;
    up_b.lo[i] = std::ceil(xi);
    Candidate cand{{}, resolve_relaxation(inst, node, down_b), resolve_relaxation(inst, node, up_b)};
    auto delta = [&](const SolvedLp& child) {
      return child.result.status == LpStatus::Optimal
                 ? snap_delta(parent - child.result.objective)
                 : kInfeasibleDelta;
    };
    cand.score.var = i;
    cand.score.delta_down = delta(cand.down);
    cand.score.delta_up = delta(cand.up);
    cand.score.intercept = std::min(cand.score.delta_down, cand.score.delta_up);
    cand.score.slope = std::max(cand.score.delta_down, cand.score.delta_up) - cand.score.intercept;
    out.push_back(std::move(cand));
  }
  return out;
}

}  // namespace detail

/// Scores of every fractional integer variable at a node whose LP is
/// optimal. The node LP is solved from scratch.
inline std::vector<BranchScore> branch_scores(const IpInstance& inst, const NodeBounds& bounds) {
  const SolvedLp node = solve_relaxation(inst, bounds);
  if (node.result.status != LpStatus::Optimal) {
    throw ArgumentError("branch_scores: node LP is not optimal");
  }
  const auto frac = fractional_vars(inst, node.result.x);
  if (frac.empty()) throw ArgumentError("branch_scores: no fractional integer variable");
  std::vector<BranchScore> out;
  for (auto& cand : detail::strong_branch(inst, node, frac)) out.push_back(cand.score);
  return out;
}

/// Branch and bound with best-bound node selection and the rho-weighted
/// strong-branching variable rule. A node counts toward tree_size when it is
/// taken from the open list and its parent's bound still beats the incumbent;
/// its LP (already solved during strong branching) is then examined, and the
/// node is pruned if infeasible or dominated. When `region` is supplied it is
/// narrowed to the rho values that make every branching decision identically,
/// hence produce the identical tree.
inline BnbResult bnb_run(const IpInstance& inst, double rho, std::size_t node_cap,
                         RhoRegion* region = nullptr) {
  if (node_cap < 1) throw ArgumentError("bnb_run: node_cap must be >= 1");
  if (!(rho >= 0.0 && rho <= 1.0)) throw DomainError("bnb_run: rho must lie in [0, 1]");

  struct Open {
    SolvedLp lp;
    double parent_bound;
    std::size_t seq;
  };
  BnbResult res;
  std::vector<Open> open;
  std::size_t seq = 0;
  open.push_back({solve_relaxation(inst, NodeBounds::of(inst)),
                  std::numeric_limits<double>::infinity(), seq++});

  while (!open.empty()) {
    // Largest parent bound first; among bounds within tolerance the oldest wins.
    std::size_t pick = 0;
    for (std::size_t k = 1; k < open.size(); ++k) {
      if (open[k].parent_bound > open[pick].parent_bound + kBoundTol) pick = k;
    }
    Open node = std::move(open[pick]);
    open.erase(open.begin() + static_cast<std::ptrdiff_t>(pick));

    if (res.has_incumbent && node.parent_bound <= res.incumbent_objective + kBoundTol) continue;
    if (res.tree_size == node_cap) {
      res.status = BnbStatus::NodeCapHit;
      return res;
    }
    ++res.tree_size;
    const LpResult& lp = node.lp.result;
    if (lp.status != LpStatus::Optimal) continue;
    if (res.has_incumbent && lp.objective <= res.incumbent_objective + kBoundTol) continue;

    const auto frac = fractional_vars(inst, lp.x);
    if (frac.empty()) {
      res.has_incumbent = true;
      res.incumbent_objective = lp.objective;
      res.incumbent_x = lp.x;
      for (std::size_t i : inst.integer_vars) res.incumbent_x[i] = std::round(res.incumbent_x[i]);
      continue;
    }

    auto cands = detail::strong_branch(inst, node.lp, frac);
    std::vector<BranchScore> scores;
    scores.reserve(cands.size());
    for (const auto& c : cands) scores.push_back(c.score);
    const std::size_t chosen = choose_branch(scores, rho, region);
    open.push_back({std::move(cands[chosen].down), lp.objective, seq++});
    open.push_back({std::move(cands[chosen].up), lp.objective, seq++});
  }
  return res;
}

/// Tree size as an exact step function of rho on [0, 1].
struct DualTrace {
  PiecewiseConstantFn fn = PiecewiseConstantFn::constant(0.0, 1.0, 1.0);
  std::vector<bool> capped;  // per piece of fn: the node cap was hit there
  std::size_t bnb_runs = 0;
};

/// Computes rho -> tree_size(rho) exactly. A run at the middle of an uncovered
/// range certifies the whole region on which its branching decisions repeat;
/// the tracer then recurses on whatever part of the range remains.
inline DualTrace dual_trace(const IpInstance& inst, std::size_t node_cap, std::size_t piece_cap) {
  if (node_cap < 1 || piece_cap < 1) throw ArgumentError("dual_trace: caps must be >= 1");
  struct Piece {
    double start;
    double end;  // exclusive
    double value;
    bool capped;
  };
  // Ranges are half-open; past_one makes the last one include rho = 1.
  const double past_one = detail::next_up(1.0);
  std::vector<std::pair<double, double>> todo{{0.0, past_one}};
  std::vector<Piece> pieces;
  DualTrace out;
  while (!todo.empty()) {
    const auto [a, b] = todo.back();
    todo.pop_back();
    const double mid = b == past_one ? (a == 1.0 ? 1.0 : a + (1.0 - a) / 2.0) : interval_midpoint(a, b);
    RhoRegion region;
    const BnbResult r = bnb_run(inst, mid, node_cap, &region);
    ++out.bnb_runs;
    const double start = std::max(a, region.lo);
    const double end = std::min(b, region.hi);
    if (!(start <= mid && mid < end)) {
      throw SolverError("dual_trace: certified region does not contain its own sample point");
    }
    pieces.push_back({start, end, static_cast<double>(r.tree_size), r.status == BnbStatus::NodeCapHit});
    if (pieces.size() > piece_cap) {
      double covered = 0.0;
      for (const auto& p : pieces) covered += std::min(p.end, 1.0) - p.start;
      throw CapacityError("dual_trace: more than " + std::to_string(piece_cap) +
                          " pieces; certified coverage so far " + std::to_string(covered));
    }
    if (end < b) todo.emplace_back(end, b);
    if (a < start) todo.emplace_back(a, start);
  }
  std::sort(pieces.begin(), pieces.end(), [](const Piece& l, const Piece& r) { return l.start < r.start; });

  std::vector<double> bps;
  std::vector<double> vals{pieces.front().value};
  std::vector<bool> capped{pieces.front().capped};
  for (std::size_t k = 1; k < pieces.size(); ++k) {
    if (pieces[k].value == vals.back()) {
      capped.back() = capped.back() || pieces[k].capped;
      continue;
    }
    bps.push_back(pieces[k].start);
    vals.push_back(pieces[k].value);
    capped.push_back(pieces[k].capped);
  }
  out.fn = PiecewiseConstantFn(0.0, 1.0, std::move(bps), std::move(vals));
  out.capped = std::move(capped);
  return out;
}

/// Tree sizes at each of `params` (any order). Runs share results whenever a
/// parameter falls inside a region already certified by an earlier run, so the
/// output equals calling bnb_run at every parameter.
inline std::vector<double> tree_sizes_at(const IpInstance& inst, const std::vector<double>& params,
                                         std::size_t node_cap) {
  struct Known {
    RhoRegion region;
    double value;
  };
  std::vector<Known> known;
  std::vector<double> out(params.size());
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double rho = params[k];
    auto hit = std::find_if(known.begin(), known.end(), [rho](const Known& kn) {
      return rho >= kn.region.lo && rho < kn.region.hi;
    });
    if (hit != known.end()) {
      out[k] = hit->value;
      continue;
    }
    RhoRegion region;
    const double v = static_cast<double>(bnb_run(inst, rho, node_cap, &region).tree_size);
    known.push_back({region, v});
    out[k] = v;
  }
  return out;
}

}  // namespace portfolio_lab
