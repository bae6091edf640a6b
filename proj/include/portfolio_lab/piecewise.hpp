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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "portfolio_lab/core.hpp"

namespace portfolio_lab {

/// A step function of one real parameter on the closed domain [lo, hi].
///
/// Piece j covers [breakpoints[j-1], breakpoints[j]); the last piece is closed
/// at hi. A breakpoint equal to hi is allowed and denotes a final piece that
/// holds only at the single point hi (the branching rule can change its
/// decision exactly at rho = 1 when two scores tie there).
class PiecewiseConstantFn {
 public:
  PiecewiseConstantFn(double lo, double hi, std::vector<double> breakpoints,
                      std::vector<double> values)
      : lo_(lo), hi_(hi), breakpoints_(std::move(breakpoints)), values_(std::move(values)) {
    if (!(std::isfinite(lo_) && std::isfinite(hi_) && lo_ < hi_)) {
      throw ArgumentError("piecewise function needs a finite domain with lo < hi");
    }
    if (values_.size() != breakpoints_.size() + 1) {
      throw ArgumentError("piecewise function needs exactly one more value than breakpoints");
    }
    for (std::size_t j = 0; j < breakpoints_.size(); ++j) {
      const double b = breakpoints_[j];
      if (!(b > lo_ && b <= hi_)) {
        throw ArgumentError("breakpoint " + std::to_string(b) + " outside (lo, hi]");
      }
      if (j > 0 && !(b > breakpoints_[j - 1])) {
        throw ArgumentError("breakpoints must be strictly increasing");
      }
    }
    for (double v : values_) {
      if (!std::isfinite(v)) throw ArgumentError("piecewise values must be finite");
    }
  }

  static PiecewiseConstantFn constant(double lo, double hi, double value) {
    return {lo, hi, {}, {value}};
  }

  double lo() const { return lo_; }
  double hi() const { return hi_; }
  const std::vector<double>& breakpoints() const { return breakpoints_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t piece_count() const { return values_.size(); }

  std::size_t piece_index(double rho) const {
    if (!(rho >= lo_ && rho <= hi_)) {
      throw DomainError("rho = " + std::to_string(rho) + " outside [" + std::to_string(lo_) +
                        ", " + std::to_string(hi_) + "]");
    }
    return static_cast<std::size_t>(
        std::upper_bound(breakpoints_.begin(), breakpoints_.end(), rho) - breakpoints_.begin());
  }

  double eval(double rho) const { return values_[piece_index(rho)]; }
  double operator()(double rho) const { return eval(rho); }

  bool is_canonical() const {
    for (std::size_t j = 1; j < values_.size(); ++j) {
      if (values_[j] == values_[j - 1]) return false;
    }
    return true;
  }

  friend bool operator==(const PiecewiseConstantFn&, const PiecewiseConstantFn&) = default;

 private:
  double lo_;
  double hi_;
  std::vector<double> breakpoints_;
  std::vector<double> values_;
};

inline double eval(const PiecewiseConstantFn& f, double rho) { return f.eval(rho); }

/// Merges adjacent pieces with equal values.
inline PiecewiseConstantFn canonicalize(const PiecewiseConstantFn& f) {
  std::vector<double> bps;
  std::vector<double> vals{f.values().front()};
  for (std::size_t j = 0; j < f.breakpoints().size(); ++j) {
    const double next = f.values()[j + 1];
    if (next != vals.back()) {
      bps.push_back(f.breakpoints()[j]);
      vals.push_back(next);
    }
  }
  return {f.lo(), f.hi(), std::move(bps), std::move(vals)};
}

/// Midpoint of [a, b) that is guaranteed to lie in [a, b).
inline double interval_midpoint(double a, double b) {
  const double mid = a + (b - a) / 2.0;
  return (mid >= a && mid < b) ? mid : a;
}

struct CandidateSet {
  // One representative per interval of the common refinement, ascending.
  std::vector<double> params;
  // Number of intervals M of the refinement the params were drawn from. For a
  // PerformanceTable this keeps the pre-deduplication count, so it can exceed
  // params.size().
  std::size_t source_interval_count = 0;

  std::optional<std::size_t> index_of(double rho) const {
    auto it = std::lower_bound(params.begin(), params.end(), rho);
    if (it == params.end() || *it != rho) return std::nullopt;
    return static_cast<std::size_t>(it - params.begin());
  }

  friend bool operator==(const CandidateSet&, const CandidateSet&) = default;
};

/// Representatives of the common refinement of all breakpoints: the midpoint of
/// every half-open interval, and of [last breakpoint, hi] for the final one.
inline CandidateSet extract_candidates(std::span<const PiecewiseConstantFn> fns) {
  if (fns.empty()) throw ArgumentError("extract_candidates needs at least one function");
  const double lo = fns.front().lo();
  const double hi = fns.front().hi();
  std::vector<double> cuts;
  for (const auto& f : fns) {
    if (f.lo() != lo || f.hi() != hi) {
      throw ArgumentError("extract_candidates: functions must share one domain");
    }
    cuts.insert(cuts.end(), f.breakpoints().begin(), f.breakpoints().end());
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  CandidateSet out;
  double start = lo;
  for (double cut : cuts) {
    out.params.push_back(interval_midpoint(start, cut));
    start = cut;
  }
  out.params.push_back(start == hi ? hi : start + (hi - start) / 2.0);
  out.source_interval_count = out.params.size();
  return out;
}

/// The N x M utility matrix of instances against candidate parameters.
struct PerformanceTable {
  Matrix utilities;  // row = instance, column = candidate
  CandidateSet candidates;
  Orientation orientation = Orientation::Minimize;
  double range_cap = 0.0;  // H

  std::size_t rows() const { return utilities.rows(); }
  std::size_t cols() const { return utilities.cols(); }

  double at(std::size_t row, std::size_t col) const { return utilities(row, col); }

  std::size_t column_of(double rho) const {
    auto idx = candidates.index_of(rho);
    if (!idx) {
      throw ArgumentError("parameter " + std::to_string(rho) + " is not a table candidate");
    }
    return *idx;
  }

  void validate() const {
    if (utilities.cols() != candidates.params.size()) {
      throw ArgumentError("table column count does not match candidate count");
    }
    if (!(range_cap >= 0.0)) throw ArgumentError("range cap H must be >= 0");
    for (std::size_t i = 0; i < rows(); ++i) {
      for (std::size_t j = 0; j < cols(); ++j) {
        const double u = utilities(i, j);
        if (!(u >= 0.0 && u <= range_cap)) {
          throw RangeError("instance " + std::to_string(i) + ": utility " + std::to_string(u) +
                           " outside [0, H]");
        }
      }
    }
  }

  friend bool operator==(const PerformanceTable&, const PerformanceTable&) = default;
};

/// Evaluates every function at every candidate and drops duplicate columns,
/// keeping the smallest representative of each distinct utility vector.
inline PerformanceTable build_table(std::span<const PiecewiseConstantFn> fns, Orientation orientation,
                                    double range_cap) {
  const CandidateSet all = extract_candidates(fns);
  for (std::size_t i = 0; i < fns.size(); ++i) {
    for (double v : fns[i].values()) {
      if (!(v >= 0.0 && v <= range_cap)) {
        throw RangeError("instance " + std::to_string(i) + ": value " + std::to_string(v) +
                         " outside [0, " + std::to_string(range_cap) + "]");
      }
    }
  }

  std::vector<std::vector<double>> columns;
  std::vector<double> kept;
  for (double rho : all.params) {
    std::vector<double> column(fns.size());
    for (std::size_t i = 0; i < fns.size(); ++i) column[i] = fns[i].eval(rho);
    if (std::find(columns.begin(), columns.end(), column) == columns.end()) {
      columns.push_back(std::move(column));
      kept.push_back(rho);
    }
  }

  PerformanceTable table;
  table.utilities = Matrix(fns.size(), kept.size());
  for (std::size_t j = 0; j < kept.size(); ++j) {
    for (std::size_t i = 0; i < fns.size(); ++i) table.utilities(i, j) = columns[j][i];
  }
  table.candidates.params = std::move(kept);
  table.candidates.source_interval_count = all.source_interval_count;
  table.orientation = orientation;
  table.range_cap = range_cap;
  return table;
}

}  // namespace portfolio_lab
