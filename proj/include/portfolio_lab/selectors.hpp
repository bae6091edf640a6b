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
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "portfolio_lab/core.hpp"
#include "portfolio_lab/piecewise.hpp"
#include "portfolio_lab/portfolio.hpp"

namespace portfolio_lab {

using FeatureVector = std::vector<double>;

/// Utilities of N training instances at each portfolio entry (N x kappa),
/// column j belonging to portfolio.params[j].
struct LabelSet {
  Matrix utilities;
  Orientation orientation = Orientation::Minimize;

  std::size_t rows() const { return utilities.rows(); }
  std::size_t entries() const { return utilities.cols(); }
};

/// Portfolio columns of a table as a label set.
inline LabelSet labels_from_table(const PerformanceTable& table, const Portfolio& portfolio) {
  LabelSet out{Matrix(table.rows(), portfolio.size()), table.orientation};
  for (std::size_t j = 0; j < portfolio.size(); ++j) {
    const std::size_t col = table.column_of(portfolio.params[j]);
    for (std::size_t i = 0; i < table.rows(); ++i) out.utilities(i, j) = table.at(i, col);
  }
  return out;
}

struct Selection {
  double parameter = 0.0;
  std::size_t index = 0;  // position in portfolio.params
};

namespace detail {

inline std::size_t check_features(std::span<const FeatureVector> features, std::size_t rows) {
  if (features.size() != rows) {
    throw ArgumentError("feature count " + std::to_string(features.size()) +
                        " does not match label rows " + std::to_string(rows));
  }
  if (features.empty()) throw ArgumentError("no training samples");
  const std::size_t m = features.front().size();
  for (const auto& f : features) {
    if (f.size() != m) throw ArgumentError("feature vectors differ in dimension");
    for (double v : f) {
      if (!std::isfinite(v)) throw ArgumentError("feature values must be finite");
    }
  }
  return m;
}

inline void check_portfolio_labels(const Portfolio& p, const LabelSet& labels) {
  if (p.size() == 0) throw ArgumentError("selector needs a nonempty portfolio");
  if (labels.entries() != p.size()) throw ArgumentError("label columns do not match portfolio size");
}

// Best entry of a score vector, lowest index on ties.
inline std::size_t best_index(Orientation o, std::span<const double> scores) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < scores.size(); ++j) {
    if (strictly_better(o, scores[j], scores[best])) best = j;
  }
  return best;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear performance models: one weight column per portfolio entry, applied to
// the features with a trailing constant 1 appended (the intercept).

struct LinearSelector {
  Matrix weights;  // (m + 1) x kappa
  Portfolio portfolio;
  Orientation orientation = Orientation::Minimize;

  std::size_t feature_dim() const { return weights.rows() - 1; }

  std::vector<double> scores(std::span<const double> phi) const {
    if (phi.size() != feature_dim()) throw ArgumentError("feature dimension mismatch");
    std::vector<double> s(weights.cols(), 0.0);
    for (std::size_t j = 0; j < weights.cols(); ++j) {
      double v = weights(feature_dim(), j);
      for (std::size_t k = 0; k < phi.size(); ++k) v += weights(k, j) * phi[k];
      s[j] = v;
    }
    return s;
  }
};

inline constexpr double kRidge = 1e-6;

/// Ridge-damped least squares of each entry's utilities on [phi, 1].
inline LinearSelector train_linear(std::span<const FeatureVector> features, const LabelSet& labels,
                                   const Portfolio& portfolio) {
  detail::check_portfolio_labels(portfolio, labels);
  const std::size_t m = detail::check_features(features, labels.rows());
  const std::size_t n = features.size();
  Eigen::MatrixXd x(n, m + 1);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < m; ++k) x(i, k) = features[i][k];
    x(i, m) = 1.0;
  }
  Eigen::MatrixXd y(n, portfolio.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < portfolio.size(); ++j) y(i, j) = labels.utilities(i, j);
  }
  Eigen::MatrixXd gram = x.transpose() * x;
  gram.diagonal().array() += kRidge;
  const Eigen::MatrixXd w = gram.ldlt().solve(x.transpose() * y);

  LinearSelector out{Matrix(m + 1, portfolio.size()), portfolio, labels.orientation};
  for (std::size_t k = 0; k <= m; ++k) {
    for (std::size_t j = 0; j < portfolio.size(); ++j) out.weights(k, j) = w(k, j);
  }
  return out;
}

inline LinearSelector train_linear(std::span<const FeatureVector> features, const PerformanceTable& table,
                                   const Portfolio& portfolio) {
  return train_linear(features, labels_from_table(table, portfolio), portfolio);
}

// ---------------------------------------------------------------------------
// Regression trees and forests.

struct TreeNode {
  // Internal nodes route phi[feature] <= threshold to `left`, else `right`.
  bool leaf = true;
  std::size_t feature = 0;
  double threshold = 0.0;
  std::size_t left = 0;
  std::size_t right = 0;
  double value = 0.0;  // leaf prediction
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict(std::span<const double> phi) const {
    std::size_t k = 0;
    while (!nodes[k].leaf) k = phi[nodes[k].feature] <= nodes[k].threshold ? nodes[k].left : nodes[k].right;
    return nodes[k].value;
  }

  std::size_t leaf_count() const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.leaf; }));
  }
};

struct ForestParams {
  std::size_t tree_count = 100;
  std::size_t max_leaves = 64;
  std::size_t min_samples_leaf = 2;
  double feature_fraction = 1.0;
  bool bootstrap = true;
  std::uint64_t seed = 0;

  void validate() const {
    if (tree_count < 1) throw ArgumentError("forest needs at least one tree");
    if (max_leaves < 1) throw ArgumentError("max_leaves must be >= 1");
    if (min_samples_leaf < 1) throw ArgumentError("min_samples_leaf must be >= 1");
    if (!(feature_fraction > 0.0 && feature_fraction <= 1.0)) {
      throw ArgumentError("feature_fraction must lie in (0, 1]");
    }
  }
};

namespace detail {

struct SplitChoice {
  bool valid = false;
  double gain = 0.0;
  std::size_t feature = 0;
  double threshold = 0.0;
};

// Best variance-reduction split of `rows` over a fresh feature subsample.
inline SplitChoice best_split(std::span<const FeatureVector> x, std::span<const double> y,
                              const std::vector<std::size_t>& rows, const ForestParams& params, Rng& rng) {
  SplitChoice best;
  const std::size_t n = rows.size();
  if (n < 2 * params.min_samples_leaf) return best;
  const std::size_t m = x.front().size();
  const std::size_t draw = std::max<std::size_t>(
      1, std::min(m, static_cast<std::size_t>(std::llround(params.feature_fraction * static_cast<double>(m)))));
  std::vector<std::size_t> feats(m);
  std::iota(feats.begin(), feats.end(), 0);
  if (draw < m) {
    for (std::size_t k = 0; k < draw; ++k) std::swap(feats[k], feats[k + rng.below(m - k)]);
    feats.resize(draw);
    std::sort(feats.begin(), feats.end());
  }

  double total = 0.0, total_sq = 0.0;
  for (std::size_t r : rows) {
    total += y[r];
    total_sq += y[r] * y[r];
  }
  const double parent_sse = total_sq - total * total / static_cast<double>(n);

  std::vector<std::size_t> order(rows);
  for (std::size_t f : feats) {
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a][f] < x[b][f]; });
    double left = 0.0, left_sq = 0.0;
    for (std::size_t k = 0; k + 1 < n; ++k) {
      const double v = y[order[k]];
      left += v;
      left_sq += v * v;
      const std::size_t nl = k + 1;
      const std::size_t nr = n - nl;
      const double lo_val = x[order[k]][f];
      const double hi_val = x[order[k + 1]][f];
      if (nl < params.min_samples_leaf || nr < params.min_samples_leaf || !(lo_val < hi_val)) continue;
      const double right = total - left;
      const double right_sq = total_sq - left_sq;
      const double sse = (left_sq - left * left / static_cast<double>(nl)) +
                         (right_sq - right * right / static_cast<double>(nr));
      const double gain = parent_sse - sse;
      if (gain > 1e-12 * (1.0 + std::abs(parent_sse)) && (!best.valid || gain > best.gain)) {
        double threshold = lo_val + (hi_val - lo_val) / 2.0;
        if (!(threshold >= lo_val && threshold < hi_val)) threshold = lo_val;
        best = {true, gain, f, threshold};
      }
    }
  }
  return best;
}

inline double mean_of(std::span<const double> y, const std::vector<std::size_t>& rows) {
  double s = 0.0;
  for (std::size_t r : rows) s += y[r];
  return s / static_cast<double>(rows.size());
}

}  // namespace detail

/// CART regression tree grown best-first: the leaf whose best split reduces
/// the squared error most is split next, until `max_leaves` leaves exist or
/// no leaf has a split that leaves `min_samples_leaf` samples on each side.
inline RegressionTree grow_tree(std::span<const FeatureVector> x, std::span<const double> y,
                                std::vector<std::size_t> rows, const ForestParams& params, Rng& rng) {
  struct Pending {
    std::size_t node;
    std::vector<std::size_t> rows;
    detail::SplitChoice split;
  };
  RegressionTree tree;
  tree.nodes.push_back({true, 0, 0.0, 0, 0, detail::mean_of(y, rows)});
  std::vector<Pending> frontier;
  if (params.max_leaves > 1) {
    auto split = detail::best_split(x, y, rows, params, rng);
    frontier.push_back({0, std::move(rows), split});
  }
  std::size_t leaves = 1;
  while (leaves < params.max_leaves) {
    std::size_t pick = frontier.size();
    for (std::size_t k = 0; k < frontier.size(); ++k) {
      if (frontier[k].split.valid && (pick == frontier.size() || frontier[k].split.gain > frontier[pick].split.gain)) {
        pick = k;
      }
    }
    if (pick == frontier.size()) break;
    Pending p = std::move(frontier[pick]);
    frontier.erase(frontier.begin() + static_cast<std::ptrdiff_t>(pick));

    std::vector<std::size_t> left_rows, right_rows;
    for (std::size_t r : p.rows) (x[r][p.split.feature] <= p.split.threshold ? left_rows : right_rows).push_back(r);
    const std::size_t left = tree.nodes.size();
    tree.nodes.push_back({true, 0, 0.0, 0, 0, detail::mean_of(y, left_rows)});
    const std::size_t right = tree.nodes.size();
    tree.nodes.push_back({true, 0, 0.0, 0, 0, detail::mean_of(y, right_rows)});
    TreeNode& parent = tree.nodes[p.node];
    parent.leaf = false;
    parent.feature = p.split.feature;
    parent.threshold = p.split.threshold;
    parent.left = left;
    parent.right = right;
    ++leaves;
    auto left_split = detail::best_split(x, y, left_rows, params, rng);
    frontier.push_back({left, std::move(left_rows), left_split});
    auto right_split = detail::best_split(x, y, right_rows, params, rng);
    frontier.push_back({right, std::move(right_rows), right_split});
  }
  return tree;
}

struct ForestSelector {
  std::vector<std::vector<RegressionTree>> forests;  // one forest per portfolio entry
  Portfolio portfolio;
  Orientation orientation = Orientation::Minimize;
  ForestParams params;
  std::size_t feature_dim = 0;

  static double forest_predict(const std::vector<RegressionTree>& forest, std::span<const double> phi) {
    double s = 0.0;
    for (const auto& t : forest) s += t.predict(phi);
    return s / static_cast<double>(forest.size());
  }

  std::vector<double> scores(std::span<const double> phi) const {
    if (phi.size() != feature_dim) throw ArgumentError("feature dimension mismatch");
    std::vector<double> s(forests.size());
    for (std::size_t j = 0; j < forests.size(); ++j) s[j] = forest_predict(forests[j], phi);
    return s;
  }
};

/// One forest for portfolio entry `entry`; tree t draws from its own stream so
/// the forest is reproducible tree by tree.
inline std::vector<RegressionTree> train_forest_entry(std::span<const FeatureVector> features,
                                                      std::span<const double> y, std::size_t entry,
                                                      const ForestParams& params) {
  std::vector<RegressionTree> forest;
  forest.reserve(params.tree_count);
  const std::size_t n = features.size();
  for (std::size_t t = 0; t < params.tree_count; ++t) {
    Rng rng(derive_seed(params.seed, stream_tag("forest"), entry, t));
    std::vector<std::size_t> rows(n);
    if (params.bootstrap) {
      for (auto& r : rows) r = rng.below(n);
      std::sort(rows.begin(), rows.end());
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    forest.push_back(grow_tree(features, y, std::move(rows), params, rng));
  }
  return forest;
}

inline ForestSelector train_forest(std::span<const FeatureVector> features, const LabelSet& labels,
                                   const Portfolio& portfolio, const ForestParams& params,
                                   std::size_t jobs = 1) {
  params.validate();
  detail::check_portfolio_labels(portfolio, labels);
  const std::size_t m = detail::check_features(features, labels.rows());
  if (features.size() < params.min_samples_leaf) {
    throw ArgumentError("fewer samples than min_samples_leaf");
  }
  ForestSelector out{std::vector<std::vector<RegressionTree>>(portfolio.size()), portfolio,
                     labels.orientation, params, m};
  parallel_for(portfolio.size(), jobs, [&](std::size_t j) {
    const std::vector<double> y = labels.utilities.col(j);
    out.forests[j] = train_forest_entry(features, y, j, params);
  });
  return out;
}

inline ForestSelector train_forest(std::span<const FeatureVector> features, const PerformanceTable& table,
                                   const Portfolio& portfolio, const ForestParams& params) {
  return train_forest(features, labels_from_table(table, portfolio), portfolio, params);
}

// ---------------------------------------------------------------------------
// Clustering selector: k-means centers, each assigned the portfolio entry with
// the best average utility over its training rows. Training minimizes squared
// Euclidean distance; inference picks the nearest center under the l_p norm.

struct ClusterSelector {
  std::vector<std::vector<double>> centers;  // kappa centers of dimension m
  std::vector<std::size_t> assigned;         // portfolio index per center
  Portfolio portfolio;
  double norm_p = 2.0;
  Orientation orientation = Orientation::Minimize;

  std::size_t nearest(std::span<const double> phi) const {
    if (phi.size() != centers.front().size()) throw ArgumentError("feature dimension mismatch");
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centers.size(); ++c) {
      double d = 0.0;
      for (std::size_t k = 0; k < phi.size(); ++k) d += std::pow(std::abs(centers[c][k] - phi[k]), norm_p);
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    return best;
  }
};

inline constexpr std::size_t kKMeansMaxIter = 100;
inline constexpr double kKMeansTol = 1e-9;

namespace detail {

inline double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return s;
}

inline std::size_t nearest_sq(const std::vector<std::vector<double>>& centers, std::span<const double> p) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centers.size(); ++c) {
    const double d = sq_dist(centers[c], p);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

}  // namespace detail

/// Lloyd's k-means with k-means++ (D^2-weighted) seeding.
inline std::vector<std::vector<double>> kmeans(std::span<const FeatureVector> x, std::size_t k, std::uint64_t seed) {
  const std::size_t n = x.size();
  if (k < 1 || k > n) throw ArgumentError("kmeans: need 1 <= k <= sample count");
  Rng rng(derive_seed(seed, stream_tag("kmeans")));
  std::vector<std::vector<double>> centers;
  centers.push_back(x[rng.below(n)]);
  std::vector<double> d2(n);
  while (centers.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = detail::sq_dist(x[i], centers[detail::nearest_sq(centers, x[i])]);
      total += d2[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      double target = rng.uniform() * total;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        if (target < d2[i]) {
          pick = i;
          break;
        }
        target -= d2[i];
      }
    } else {
      pick = rng.below(n);
    }
    centers.push_back(x[pick]);
  }

  const std::size_t m = x.front().size();
  for (std::size_t iter = 0; iter < kKMeansMaxIter; ++iter) {
    std::vector<std::vector<double>> sums(k, std::vector<double>(m, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = detail::nearest_sq(centers, x[i]);
      ++counts[c];
      for (std::size_t d = 0; d < m; ++d) sums[c][d] += x[i][d];
    }
    double moved = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;  // an empty cluster keeps its center
      for (std::size_t d = 0; d < m; ++d) sums[c][d] /= static_cast<double>(counts[c]);
      moved = std::max(moved, std::sqrt(detail::sq_dist(sums[c], centers[c])));
      centers[c] = std::move(sums[c]);
    }
    if (moved <= kKMeansTol) break;
  }
  return centers;
}

inline ClusterSelector train_cluster(std::span<const FeatureVector> features, const LabelSet& labels,
                                     const Portfolio& portfolio, double norm_p, std::uint64_t seed) {
  detail::check_portfolio_labels(portfolio, labels);
  detail::check_features(features, labels.rows());
  if (!(norm_p >= 1.0 && std::isfinite(norm_p))) throw ArgumentError("norm_p must be finite and >= 1");
  const std::size_t k = portfolio.size();
  if (k > features.size()) throw ArgumentError("train_cluster: kappa exceeds the sample count");

  ClusterSelector out;
  out.centers = kmeans(features, k, seed);
  out.portfolio = portfolio;
  out.norm_p = norm_p;
  out.orientation = labels.orientation;

  std::vector<std::vector<double>> sums(k, std::vector<double>(k, 0.0));
  std::vector<std::size_t> counts(k, 0);
  std::vector<double> overall(k, 0.0);
  for (std::size_t i = 0; i < features.size(); ++i) {
    const std::size_t c = detail::nearest_sq(out.centers, features[i]);
    ++counts[c];
    for (std::size_t j = 0; j < k; ++j) {
      sums[c][j] += labels.utilities(i, j);
      overall[j] += labels.utilities(i, j);
    }
  }
  const std::size_t fallback = detail::best_index(out.orientation, overall);
  out.assigned.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    out.assigned[c] = counts[c] == 0 ? fallback : detail::best_index(out.orientation, sums[c]);
  }
  return out;
}

inline ClusterSelector train_cluster(std::span<const FeatureVector> features, const PerformanceTable& table,
                                     const Portfolio& portfolio, double norm_p, std::uint64_t seed) {
  return train_cluster(features, labels_from_table(table, portfolio), portfolio, norm_p, seed);
}

// ---------------------------------------------------------------------------

using Selector = std::variant<LinearSelector, ForestSelector, ClusterSelector>;

inline Selection select(const LinearSelector& s, std::span<const double> phi) {
  const auto sc = s.scores(phi);
  const std::size_t i = detail::best_index(s.orientation, sc);
  return {s.portfolio.params[i], i};
}

inline Selection select(const ForestSelector& s, std::span<const double> phi) {
  const auto sc = s.scores(phi);
  const std::size_t i = detail::best_index(s.orientation, sc);
  return {s.portfolio.params[i], i};
}

inline Selection select(const ClusterSelector& s, std::span<const double> phi) {
  const std::size_t i = s.assigned[s.nearest(phi)];
  return {s.portfolio.params[i], i};
}

inline Selection select(const Selector& s, std::span<const double> phi) {
  return std::visit([&](const auto& sel) { return select(sel, phi); }, s);
}

inline const Portfolio& portfolio_of(const Selector& s) {
  return std::visit([](const auto& sel) -> const Portfolio& { return sel.portfolio; }, s);
}

/// Best true entry for one row of labels; ties to the lowest index.
inline Selection oracle_select(const LabelSet& labels, const Portfolio& portfolio, std::size_t row) {
  if (row >= labels.rows()) throw ArgumentError("oracle_select: row out of range");
  const auto r = labels.utilities.row(row);
  const std::size_t i = detail::best_index(labels.orientation, r);
  return {portfolio.params[i], i};
}

inline Selection oracle_select(const PerformanceTable& table, const Portfolio& portfolio, std::size_t row) {
  if (row >= table.rows()) throw ArgumentError("oracle_select: row out of range");
  return oracle_select(labels_from_table(table, portfolio), portfolio, row);
}

/// Mean achieved utility (1/N) sum_i u_{f(z_i)}(z_i).
template <typename Sel>
double average_utility(const Sel& selector, std::span<const FeatureVector> features, const LabelSet& labels) {
  if (features.size() != labels.rows()) throw ArgumentError("features and labels are not aligned");
  if (features.empty()) throw ArgumentError("average over an empty set");
  double s = 0.0;
  for (std::size_t i = 0; i < features.size(); ++i) s += labels.utilities(i, select(selector, features[i]).index);
  return s / static_cast<double>(features.size());
}

inline double oracle_average(const LabelSet& labels) {
  if (labels.rows() == 0) throw ArgumentError("average over an empty set");
  double s = 0.0;
  for (std::size_t i = 0; i < labels.rows(); ++i) {
    const auto r = labels.utilities.row(i);
    s += r[detail::best_index(labels.orientation, r)];
  }
  return s / static_cast<double>(labels.rows());
}

}  // namespace portfolio_lab
