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

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "portfolio_lab/core.hpp"

namespace portfolio_lab {

/// maximize c.x subject to A x <= b, lo <= x <= hi, x[i] integral for i in I.
struct IpInstance {
  std::vector<double> c;
  Matrix A;  // constraint rows x n
  std::vector<double> b;
  std::vector<std::size_t> integer_vars;  // ascending
  std::vector<double> lo;
  std::vector<double> hi;
  std::string family;  // generator metadata, empty for hand-built instances
  std::uint64_t seed = 0;

  std::size_t num_vars() const { return c.size(); }
  std::size_t num_rows() const { return b.size(); }

  void validate() const {
    const std::size_t n = c.size();
    if (n == 0) throw ArgumentError("instance has no variables");
    if (A.rows() != b.size()) throw ArgumentError("A row count does not match b");
    if (A.rows() > 0 && A.cols() != n) throw ArgumentError("A column count does not match c");
    if (lo.size() != n || hi.size() != n) throw ArgumentError("bounds must have one entry per variable");
    for (std::size_t j = 0; j < n; ++j) {
      if (!std::isfinite(lo[j]) || !std::isfinite(hi[j])) {
        throw ArgumentError("variable bounds must be finite");
      }
      if (lo[j] > hi[j]) throw ArgumentError("variable " + std::to_string(j) + " has lo > hi");
    }
    for (std::size_t k = 0; k < integer_vars.size(); ++k) {
      if (integer_vars[k] >= n) throw ArgumentError("integer index out of range");
      if (k > 0 && integer_vars[k] <= integer_vars[k - 1]) {
        throw ArgumentError("integer index set must be strictly ascending");
      }
    }
  }

  friend bool operator==(const IpInstance&, const IpInstance&) = default;
};

/// Per-node box bounds, tightening the instance's own.
struct NodeBounds {
  std::vector<double> lo;
  std::vector<double> hi;

  static NodeBounds of(const IpInstance& inst) { return {inst.lo, inst.hi}; }
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

inline std::string_view to_string(LpStatus s) {
  switch (s) {
    case LpStatus::Optimal: return "optimal";
    case LpStatus::Infeasible: return "infeasible";
    case LpStatus::Unbounded: return "unbounded";
  }
  return "?";
}

struct LpResult {
  LpStatus status = LpStatus::Infeasible;
  std::vector<double> x;
  double objective = -std::numeric_limits<double>::infinity();
};

namespace detail {

inline constexpr double kReducedCostTol = 1e-9;
inline constexpr double kFeasTol = 1e-9;
inline constexpr double kPivotTol = 1e-10;
inline constexpr double kZeroClean = 1e-12;
inline constexpr std::size_t kMaxPivots = 100000;

// Dense simplex tableau for the shifted problem y = x - lo:
//   A y <= b - A lo          (one slack per row)
//   y_j <= hi_j - lo_j       (one slack per variable)
// plus one auxiliary column used only by phase one. Because the initial slack
// block is the identity, the slack columns of any later tableau hold the
// current basis inverse, which is what makes right-hand-side warm starts cheap.
class Tableau {
 public:
  Tableau(const IpInstance& inst, const NodeBounds& bounds)
      : n_(inst.num_vars()),
        rows_(inst.num_rows() + inst.num_vars()),
        width_(n_ + rows_ + 1),
        cost_(inst.c),
        t_(rows_ * width_, 0.0),
        rhs_(rows_),
        basis_(rows_),
        in_basis_(width_, 0),
        d_(width_, 0.0) {
    const std::size_t mc = inst.num_rows();
    for (std::size_t r = 0; r < mc; ++r) {
      for (std::size_t j = 0; j < n_; ++j) at(r, j) = inst.A(r, j);
    }
    for (std::size_t j = 0; j < n_; ++j) at(mc + j, j) = 1.0;
    for (std::size_t r = 0; r < rows_; ++r) {
      at(r, n_ + r) = 1.0;
      basis_[r] = n_ + r;
      in_basis_[n_ + r] = 1;
    }
    rhs_ = raw_rhs(inst, bounds);
  }

  // Right-hand side of the shifted problem for the given bounds.
  static std::vector<double> raw_rhs(const IpInstance& inst, const NodeBounds& bounds) {
    const std::size_t mc = inst.num_rows();
    const std::size_t n = inst.num_vars();
    std::vector<double> r(mc + n);
    for (std::size_t i = 0; i < mc; ++i) {
      double v = inst.b[i];
      for (std::size_t j = 0; j < n; ++j) v -= inst.A(i, j) * bounds.lo[j];
      r[i] = v;
    }
    for (std::size_t j = 0; j < n; ++j) r[mc + j] = bounds.hi[j] - bounds.lo[j];
    return r;
  }

  // Two-phase primal simplex with Bland's rule, starting from the slack basis.
  LpStatus solve_primal() {
    std::size_t worst = rows_;
    for (std::size_t r = 0; r < rows_; ++r) {
      if (rhs_[r] < -kFeasTol && (worst == rows_ || rhs_[r] < rhs_[worst])) worst = r;
    }
    if (worst != rows_) {
      // Phase one: maximize -x0 with x0 subtracted from every row.
      const std::size_t aux = width_ - 1;
      for (std::size_t r = 0; r < rows_; ++r) at(r, aux) = -1.0;
      std::fill(d_.begin(), d_.end(), 0.0);
      d_[aux] = -1.0;
      aux_blocked_ = false;
      pivot(worst, aux);
      const LpStatus phase1 = primal_loop();
      if (phase1 != LpStatus::Optimal) throw SolverError("phase one did not terminate optimally");
      double aux_value = 0.0;
      std::size_t aux_row = rows_;
      for (std::size_t r = 0; r < rows_; ++r) {
        if (basis_[r] == aux) {
          aux_value = rhs_[r];
          aux_row = r;
        }
      }
      if (aux_value > kFeasTol) return LpStatus::Infeasible;
      if (aux_row != rows_) {
        std::size_t enter = width_;
        for (std::size_t j = 0; j + 1 < width_; ++j) {
          if (std::abs(at(aux_row, j)) > kPivotTol) {
            enter = j;
            break;
          }
        }
        if (enter == width_) throw SolverError("cannot drive auxiliary variable out of the basis");
        pivot(aux_row, enter);
      }
      for (std::size_t r = 0; r < rows_; ++r) at(r, aux) = 0.0;
      aux_blocked_ = true;
    }
    recompute_reduced_costs();
    return primal_loop();
  }

  // Replaces the right-hand side (new node bounds) keeping the current optimal
  // basis, then restores primal feasibility with the dual simplex method.
  LpStatus resolve_dual(const std::vector<double>& new_raw_rhs) {
    for (std::size_t r = 0; r < rows_; ++r) {
      double v = 0.0;
      const double* row = &t_[r * width_ + n_];
      for (std::size_t k = 0; k < rows_; ++k) v += row[k] * new_raw_rhs[k];
      rhs_[r] = std::abs(v) < kZeroClean ? 0.0 : v;
    }
    for (std::size_t iter = 0; iter < kMaxPivots; ++iter) {
      // Dual Bland: leave on the infeasible row whose basic variable has the
      // smallest index; enter on the smallest ratio, smallest index on ties.
      std::size_t leave = rows_;
      for (std::size_t r = 0; r < rows_; ++r) {
        if (rhs_[r] < -kFeasTol && (leave == rows_ || basis_[r] < basis_[leave])) leave = r;
      }
      if (leave == rows_) return LpStatus::Optimal;
      std::size_t enter = width_;
      double best_ratio = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < width_; ++j) {
        if (is_blocked(j) || is_basic(j)) continue;
        const double a = at(leave, j);
        if (a < -kPivotTol) {
          const double ratio = std::abs(d_[j]) / -a;
          if (ratio < best_ratio - 1e-12) {
            best_ratio = ratio;
            enter = j;
          }
        }
      }
      if (enter == width_) return LpStatus::Infeasible;
      pivot(leave, enter);
    }
    throw SolverError("dual simplex exceeded the pivot limit");
  }

  // Shifted solution mapped back to x = lo + y, clamped to the node box.
  std::vector<double> solution(const NodeBounds& bounds) const {
    std::vector<double> x = bounds.lo;
    for (std::size_t r = 0; r < rows_; ++r) {
      if (basis_[r] < n_) x[basis_[r]] += rhs_[r];
    }
    for (std::size_t j = 0; j < n_; ++j) x[j] = std::min(std::max(x[j], bounds.lo[j]), bounds.hi[j]);
    return x;
  }

 private:
  double& at(std::size_t r, std::size_t j) { return t_[r * width_ + j]; }
  double at(std::size_t r, std::size_t j) const { return t_[r * width_ + j]; }

  bool is_blocked(std::size_t j) const { return aux_blocked_ && j == width_ - 1; }
  bool is_basic(std::size_t j) const { return in_basis_[j] != 0; }

  double cost_of(std::size_t j) const { return j < n_ ? cost_[j] : 0.0; }

  void recompute_reduced_costs() {
    for (std::size_t j = 0; j < width_; ++j) {
      double v = cost_of(j);
      for (std::size_t r = 0; r < rows_; ++r) v -= cost_of(basis_[r]) * at(r, j);
      d_[j] = std::abs(v) < kZeroClean ? 0.0 : v;
    }
    for (std::size_t r = 0; r < rows_; ++r) d_[basis_[r]] = 0.0;
  }

  LpStatus primal_loop() {
    for (std::size_t iter = 0; iter < kMaxPivots; ++iter) {
      std::size_t enter = width_;
      for (std::size_t j = 0; j < width_; ++j) {
        if (!is_blocked(j) && d_[j] > kReducedCostTol && !is_basic(j)) {
          enter = j;
          break;
        }
      }
      if (enter == width_) return LpStatus::Optimal;
      std::size_t leave = rows_;
      double best_ratio = std::numeric_limits<double>::infinity();
      bool tiny_positive = false;
      for (std::size_t r = 0; r < rows_; ++r) {
        const double a = at(r, enter);
        if (a > kPivotTol) {
          const double ratio = rhs_[r] / a;
          if (leave == rows_ || ratio < best_ratio - 1e-12) {
            best_ratio = ratio;
            leave = r;
          } else if (ratio <= best_ratio + 1e-12 && basis_[r] < basis_[leave]) {
            best_ratio = std::min(best_ratio, ratio);
            leave = r;
          }
        } else if (a > 0.0) {
          tiny_positive = true;
        }
      }
      if (leave == rows_) {
        if (tiny_positive) throw SolverError("no pivot above 1e-10 in the entering column");
        return LpStatus::Unbounded;
      }
      pivot(leave, enter);
    }
    throw SolverError("primal simplex exceeded the pivot limit");
  }

  void pivot(std::size_t leave, std::size_t enter) {
    double* prow = &t_[leave * width_];
    const double p = prow[enter];
    const double inv = 1.0 / p;
    for (std::size_t j = 0; j < width_; ++j) prow[j] *= inv;
    prow[enter] = 1.0;
    rhs_[leave] *= inv;
    for (std::size_t r = 0; r < rows_; ++r) {
      if (r == leave) continue;
      double* row = &t_[r * width_];
      const double f = row[enter];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < width_; ++j) {
        if (prow[j] != 0.0) {
          const double v = row[j] - f * prow[j];
          row[j] = std::abs(v) < kZeroClean ? 0.0 : v;
        }
      }
      row[enter] = 0.0;
      const double v = rhs_[r] - f * rhs_[leave];
      rhs_[r] = std::abs(v) < kZeroClean ? 0.0 : v;
    }
    const double f = d_[enter];
    if (f != 0.0) {
      for (std::size_t j = 0; j < width_; ++j) {
        if (prow[j] != 0.0) {
          const double v = d_[j] - f * prow[j];
          d_[j] = std::abs(v) < kZeroClean ? 0.0 : v;
        }
      }
      d_[enter] = 0.0;
    }
    in_basis_[basis_[leave]] = 0;
    in_basis_[enter] = 1;
    basis_[leave] = enter;
  }

  std::size_t n_;
  std::size_t rows_;
  std::size_t width_;
  std::vector<double> cost_;
  std::vector<double> t_;
  std::vector<double> rhs_;
  std::vector<std::size_t> basis_;
  std::vector<char> in_basis_;
  std::vector<double> d_;
  bool aux_blocked_ = true;
};

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
  return s;
}

}  // namespace detail

/// An LP relaxation together with the tableau it was solved on, so that
/// children can be warm started from it.
struct SolvedLp {
  LpResult result;
  NodeBounds bounds;
  std::shared_ptr<const detail::Tableau> tableau;  // set when Optimal
};

inline SolvedLp solve_relaxation(const IpInstance& inst, const NodeBounds& bounds) {
  SolvedLp out{{}, bounds, nullptr};
  for (std::size_t j = 0; j < inst.num_vars(); ++j) {
    if (bounds.lo[j] > bounds.hi[j] + detail::kFeasTol) {
      out.result.status = LpStatus::Infeasible;
      return out;
    }
  }
  auto tab = std::make_shared<detail::Tableau>(inst, bounds);
  out.result.status = tab->solve_primal();
  if (out.result.status == LpStatus::Optimal) {
    out.result.x = tab->solution(bounds);
    out.result.objective = detail::dot(inst.c, out.result.x);
    out.tableau = std::move(tab);
  }
  return out;
}

/// Re-solves `parent` under tightened bounds by dual simplex from its basis.
inline SolvedLp resolve_relaxation(const IpInstance& inst, const SolvedLp& parent,
                                   const NodeBounds& bounds) {
  SolvedLp out{{}, bounds, nullptr};
  for (std::size_t j = 0; j < inst.num_vars(); ++j) {
    if (bounds.lo[j] > bounds.hi[j] + detail::kFeasTol) {
      out.result.status = LpStatus::Infeasible;
      return out;
    }
  }
  auto tab = std::make_shared<detail::Tableau>(*parent.tableau);
  out.result.status = tab->resolve_dual(detail::Tableau::raw_rhs(inst, bounds));
  if (out.result.status == LpStatus::Optimal) {
    out.result.x = tab->solution(bounds);
    out.result.objective = detail::dot(inst.c, out.result.x);
    out.tableau = std::move(tab);
  }
  return out;
}

/// LP relaxation by dense two-phase primal simplex with Bland's rule.
inline LpResult lp_solve(const IpInstance& inst, const NodeBounds& bounds) {
  return solve_relaxation(inst, bounds).result;
}

inline LpResult lp_solve(const IpInstance& inst) { return lp_solve(inst, NodeBounds::of(inst)); }

}  // namespace portfolio_lab
