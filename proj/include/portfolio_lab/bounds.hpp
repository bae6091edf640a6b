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
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "portfolio_lab/core.hpp"
#include "portfolio_lab/portfolio.hpp"

namespace portfolio_lab {

// Sample-complexity calculators. Every value is a proof expression evaluated
// with unit constants, so it is meaningful only up to universal constants.

struct BoundQuery {
  std::size_t d_bar = 0;   // Natarajan dimension of the selector projection
  std::size_t kappa = 1;   // portfolio size
  std::size_t t = 1;       // pieces per dual function
  double N = 1.0;          // sample count
  double H = 1.0;          // utility range
  double delta = 0.05;     // failure probability
  double alpha = 1.0;
  double beta = 0.0;
  double epsilon = 0.0;

  void validate() const {
    if (kappa < 1) throw ArgumentError("kappa must be >= 1");
    if (t < 1) throw ArgumentError("t must be >= 1");
    if (!(N >= 1.0)) throw ArgumentError("N must be >= 1");
    if (!(H >= 0.0) || !std::isfinite(H)) throw ArgumentError("H must be finite and >= 0");
    if (!(delta > 0.0 && delta < 1.0)) throw ArgumentError("delta must lie in (0, 1)");
  }
};

inline constexpr std::string_view kBoundNote = "up to universal constants";

/// (kappa + d) log2(kappa + d + 1) + kappa log2(t).
///
/// This is the expression reached at the end of the pseudo-dimension argument.
/// The headline statement of the same result reads O~(d + kappa log t), which
/// hides the (kappa + d) log(kappa + d) term inside the tilde; the longer
/// expression is the one computed here.
inline double pdim_upper_bound(const BoundQuery& q) {
  q.validate();
  const double s = static_cast<double>(q.kappa + q.d_bar);
  return s * std::log2(s + 1.0) + static_cast<double>(q.kappa) * std::log2(static_cast<double>(q.t));
}

/// H sqrt((pdim + ln(1/delta)) / N).
inline double generalization_bound(const BoundQuery& q, double pdim) {
  q.validate();
  if (!(pdim >= 0.0)) throw ArgumentError("pdim must be >= 0");
  return q.H * std::sqrt((pdim + std::log(1.0 / q.delta)) / q.N);
}

/// With probability 1 - delta the selector's expected performance is at least
/// alpha * OPT - slack; callers supply their own OPT estimate.
struct EndToEndBound {
  double slack = 0.0;           // epsilon + beta + generalization
  double generalization = 0.0;  // the sampling term alone
  double pdim = 0.0;
  double alpha = 1.0;
  double beta = 0.0;
  double epsilon = 0.0;
};

inline EndToEndBound end_to_end_bound(const BoundQuery& q) {
  EndToEndBound out;
  out.pdim = pdim_upper_bound(q);
  out.generalization = generalization_bound(q, out.pdim);
  out.alpha = q.alpha;
  out.beta = q.beta;
  out.epsilon = q.epsilon;
  out.slack = q.epsilon + q.beta + out.generalization;
  return out;
}

enum class SelectorClass { Linear, Tree, Cluster };

inline std::string_view to_string(SelectorClass c) {
  switch (c) {
    case SelectorClass::Linear: return "linear";
    case SelectorClass::Tree: return "tree";
    case SelectorClass::Cluster: return "cluster";
  }
  return "?";
}

inline SelectorClass selector_class_from_string(std::string_view s) {
  if (s == "linear") return SelectorClass::Linear;
  if (s == "tree" || s == "forest") return SelectorClass::Tree;
  if (s == "cluster") return SelectorClass::Cluster;
  throw ArgumentError("unknown selector class '" + std::string(s) + "'");
}

/// Natarajan-dimension orders of the three selector classes:
/// Linear m*kappa, Tree l*kappa*log2(l*kappa*m), Cluster m*kappa*log2(m*kappa*p).
inline double natarajan_bound(SelectorClass cls, std::size_t m, std::size_t kappa, std::size_t ell, double p) {
  if (m < 1 || kappa < 1 || ell < 1 || !(p >= 1.0)) throw ArgumentError("natarajan_bound: parameters must be >= 1");
  const double mk = static_cast<double>(m) * static_cast<double>(kappa);
  switch (cls) {
    case SelectorClass::Linear: return mk;
    case SelectorClass::Tree: {
      const double lk = static_cast<double>(ell) * static_cast<double>(kappa);
      return lk * std::log2(lk * static_cast<double>(m));
    }
    case SelectorClass::Cluster: return mk * std::log2(mk * p);
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Lower-bound family on Z = (0, 1]. Z_i = ((i-1)/kappa, i/kappa]; the selector
// indexed by C picks i/kappa on Z_i when i is in C and i/kappa - 1/(2 kappa)
// otherwise; utilities are u_rho(z) = 1{z <= rho}. The points {1/kappa, ..., 1}
// are shattered with witness 1/2.

struct LowerBoundFamily {
  using SelectorFn = std::function<double(const std::vector<bool>& member, double z)>;

  std::size_t kappa = 2;
  std::vector<double> points;  // i / kappa for i = 1..kappa
  SelectorFn selector;         // member[i-1] says whether i is in C

  static double utility(double rho, double z) { return z <= rho ? 1.0 : 0.0; }

  // 1-based index i with z in Z_i.
  std::size_t cell(double z) const {
    const double k = static_cast<double>(kappa);
    auto edge = [k](std::size_t i) { return static_cast<double>(i) / k; };
    std::size_t i = static_cast<std::size_t>(std::ceil(std::max(z, 0.0) * k));
    i = std::clamp<std::size_t>(i, 1, kappa);
    while (i > 1 && z <= edge(i - 1)) --i;
    while (i < kappa && z > edge(i)) ++i;
    return i;
  }
};

inline constexpr double kShatterWitness = 0.5;

inline LowerBoundFamily lb_construct(std::size_t kappa) {
  if (kappa < 2) throw ArgumentError("lb_construct: kappa must be >= 2");
  LowerBoundFamily fam;
  fam.kappa = kappa;
  const double k = static_cast<double>(kappa);
  for (std::size_t i = 1; i <= kappa; ++i) fam.points.push_back(static_cast<double>(i) / k);
  fam.selector = [kappa, k](const std::vector<bool>& member, double z) {
    LowerBoundFamily probe;
    probe.kappa = kappa;
    const std::size_t i = probe.cell(z);
    const double top = static_cast<double>(i) / k;
    return member[i - 1] ? top : top - 1.0 / (2.0 * k);
  };
  return fam;
}

/// True iff every one of the 2^kappa subsets C yields the labeling of the
/// points that is exactly the indicator of C.
inline bool lb_verify_shattering(const LowerBoundFamily& fam) {
  if (fam.kappa < 2 || fam.kappa > 20) throw CapacityError("lb_verify_shattering: kappa must lie in [2, 20]");
  if (fam.points.size() != fam.kappa) throw ArgumentError("lb_verify_shattering: point count differs from kappa");
  const std::uint64_t subsets = std::uint64_t{1} << fam.kappa;
  std::vector<bool> member(fam.kappa);
  for (std::uint64_t mask = 0; mask < subsets; ++mask) {
    for (std::size_t i = 0; i < fam.kappa; ++i) member[i] = (mask >> i) & 1U;
    for (std::size_t i = 0; i < fam.kappa; ++i) {
      const double z = fam.points[i];
      const bool label = LowerBoundFamily::utility(fam.selector(member, z), z) >= kShatterWitness;
      if (label != member[i]) return false;
    }
  }
  return true;
}

/// A finite class of multi-class functions given by their label tables:
/// labels[f][k] is the label function f assigns to instance k.
struct MultiClassFamily {
  std::vector<std::vector<std::size_t>> labels;
};

/// Multi-class projection of the lower-bound family onto its points. Both
/// values a selector can output on Z_i lie in Z_i, so the projection labels a
/// point by the cell of the chosen parameter. Distinct label tables only.
inline MultiClassFamily lb_multiclass_projection(const LowerBoundFamily& fam) {
  if (fam.kappa > 20) throw CapacityError("lb_multiclass_projection: kappa must be <= 20");
  std::set<std::vector<std::size_t>> distinct;
  std::vector<bool> member(fam.kappa);
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << fam.kappa); ++mask) {
    for (std::size_t i = 0; i < fam.kappa; ++i) member[i] = (mask >> i) & 1U;
    std::vector<std::size_t> row;
    for (double z : fam.points) row.push_back(fam.cell(fam.selector(member, z)));
    distinct.insert(std::move(row));
  }
  return {std::vector<std::vector<std::size_t>>(distinct.begin(), distinct.end())};
}

namespace detail {

// Does fam realize all 2^d mixtures of (y, y') on the instances in `subset`?
inline bool mixtures_realized(const MultiClassFamily& fam, const std::vector<std::size_t>& subset,
                              const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
  const std::size_t d = subset.size();
  std::vector<bool> seen(std::size_t{1} << d, false);
  std::size_t count = 0;
  for (const auto& f : fam.labels) {
    std::size_t mask = 0;
    bool ok = true;
    for (std::size_t k = 0; k < d && ok; ++k) {
      const std::size_t v = f[subset[k]];
      if (v == pairs[k].second) {
        mask |= std::size_t{1} << k;
      } else if (v != pairs[k].first) {
        ok = false;
      }
    }
    if (ok && !seen[mask]) {
      seen[mask] = true;
      if (++count == seen.size()) return true;
    }
  }
  return false;
}

inline bool search_pairs(const MultiClassFamily& fam, const std::vector<std::size_t>& subset,
                         const std::vector<std::vector<std::size_t>>& observed,
                         std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
  const std::size_t k = pairs.size();
  if (k == subset.size()) return mixtures_realized(fam, subset, pairs);
  const auto& labels = observed[subset[k]];
  for (std::size_t a = 0; a < labels.size(); ++a) {
    for (std::size_t b = a + 1; b < labels.size(); ++b) {
      pairs.emplace_back(labels[a], labels[b]);
      if (search_pairs(fam, subset, observed, pairs)) return true;
      pairs.pop_back();
    }
  }
  return false;
}

}  // namespace detail

inline constexpr double kMulticlassGuard = 1e8;

/// True iff some size-d subset of `instances` is Natarajan-shattered by fam.
/// Label pairs (y, y') are drawn from the labels fam actually assigns; the
/// order inside a pair is irrelevant because all mixtures are required.
inline bool verify_multiclass_shatter(const MultiClassFamily& fam, const std::vector<std::size_t>& instances,
                                      std::size_t d) {
  if (d > instances.size()) throw ArgumentError("verify_multiclass_shatter: d exceeds the instance count");
  for (const auto& f : fam.labels) {
    for (std::size_t k : instances) {
      if (k >= f.size()) throw ArgumentError("verify_multiclass_shatter: function undefined on an instance");
    }
  }
  if (d == 0) return !fam.labels.empty();
  if (fam.labels.size() < (std::size_t{1} << std::min<std::size_t>(d, 63))) return false;

  std::size_t universe = 0;
  for (std::size_t k : instances) universe = std::max(universe, k + 1);
  std::vector<std::vector<std::size_t>> observed(universe);
  double max_pairs = 0.0;
  for (std::size_t k : instances) {
    std::set<std::size_t> s;
    for (const auto& f : fam.labels) s.insert(f[k]);
    observed[k].assign(s.begin(), s.end());
    const double l = static_cast<double>(s.size());
    max_pairs = std::max(max_pairs, l * (l - 1.0) / 2.0);
  }
  const double work = static_cast<double>(fam.labels.size()) * detail::binomial(instances.size(), d) *
                      std::pow(max_pairs, static_cast<double>(d));
  if (work > kMulticlassGuard) {
    throw CapacityError("verify_multiclass_shatter: search space " + std::to_string(work) + " exceeds 1e8");
  }

  std::vector<std::size_t> comb(d);
  for (std::size_t i = 0; i < d; ++i) comb[i] = i;
  const std::size_t n = instances.size();
  std::vector<std::size_t> subset(d);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (;;) {
    for (std::size_t i = 0; i < d; ++i) subset[i] = instances[comb[i]];
    pairs.clear();
    if (detail::search_pairs(fam, subset, observed, pairs)) return true;
    std::size_t pos = d;
    while (pos > 0 && comb[pos - 1] == n - d + pos - 1) --pos;
    if (pos == 0) break;
    ++comb[pos - 1];
    for (std::size_t i = pos; i < d; ++i) comb[i] = comb[i - 1] + 1;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Empirical overfitting on the shattered set: each sample is a point drawn
// uniformly from the kappa points with a fair coin saying which of the point's
// two actions pays 1. Every action has true value 1/2, so the empirical risk
// minimizer's training average minus 1/2 is pure generalization gap.

struct GapSample {
  std::size_t point = 0;
  bool pays_member = false;  // the action "i in C" pays 1
};

/// ERM training average minus 1/2 for one sample set.
inline double lb_gap_of(std::size_t kappa, const std::vector<GapSample>& samples) {
  if (samples.empty()) throw ArgumentError("lb_gap_of: no samples");
  std::vector<std::size_t> yes(kappa, 0), no(kappa, 0);
  for (const auto& s : samples) {
    if (s.point >= kappa) throw ArgumentError("lb_gap_of: point index out of range");
    (s.pays_member ? yes : no)[s.point] += 1;
  }
  double won = 0.0;
  for (std::size_t i = 0; i < kappa; ++i) won += static_cast<double>(std::max(yes[i], no[i]));
  return won / static_cast<double>(samples.size()) - 0.5;
}

inline double lb_gap_experiment(std::size_t kappa, std::size_t N, std::size_t trials, std::uint64_t seed,
                                std::size_t jobs = 1) {
  if (kappa < 2) throw ArgumentError("lb_gap_experiment: kappa must be >= 2");
  if (N < kappa) throw ArgumentError("lb_gap_experiment: N must be >= kappa");
  if (trials < 1) throw ArgumentError("lb_gap_experiment: trials must be >= 1");
  std::vector<double> gaps(trials);
  parallel_for(trials, jobs, [&](std::size_t trial) {
    Rng rng(derive_seed(seed, stream_tag("lb-gap"), kappa, N, trial));
    std::vector<GapSample> samples(N);
    for (auto& s : samples) {
      s.point = rng.below(kappa);
      s.pays_member = rng.coin();
    }
    gaps[trial] = lb_gap_of(kappa, samples);
  });
  double total = 0.0;
  for (double g : gaps) total += g;
  return total / static_cast<double>(trials);
}

}  // namespace portfolio_lab
