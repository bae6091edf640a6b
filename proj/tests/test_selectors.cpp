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

#include <algorithm>
#include <numeric>
#include <vector>

#include "oracles.hpp"
#include "portfolio_lab/selectors.hpp"

namespace pl = portfolio_lab;

namespace {

pl::LabelSet labels_of(const std::vector<std::vector<double>>& rows, pl::Orientation o) {
  return {pl::Matrix::from_rows(rows), o};
}

pl::Portfolio portfolio_n(std::size_t k) {
  std::vector<double> p;
  for (std::size_t j = 0; j < k; ++j) p.push_back(0.1 * static_cast<double>(j + 1));
  return pl::Portfolio::make(p, k);
}

std::vector<pl::FeatureVector> random_features(pl::Rng& rng, std::size_t n, std::size_t m) {
  std::vector<pl::FeatureVector> x(n, pl::FeatureVector(m));
  for (auto& row : x) {
    for (auto& v : row) v = rng.uniform(-1.0, 1.0);
  }
  return x;
}

pl::ForestParams exact_forest() {
  pl::ForestParams p;
  p.tree_count = 1;
  p.bootstrap = false;
  p.min_samples_leaf = 1;
  return p;
}

}  // namespace

TEST(Linear, RecoversExactLinearLabels) {
  pl::Rng rng(101);
  const auto x = random_features(rng, 60, 4);
  std::vector<std::vector<double>> rows;
  for (const auto& phi : x) {
    rows.push_back({2 * phi[0] - phi[3] + 1, 0.5 * phi[1] + 3, -phi[2]});
  }
  const auto lab = labels_of(rows, pl::Orientation::Minimize);
  const auto sel = pl::train_linear(x, lab, portfolio_n(3));
  ASSERT_EQ(sel.feature_dim(), 4u);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto s = sel.scores(x[i]);
    for (std::size_t j = 0; j < 3; ++j) ASSERT_NEAR(s[j], rows[i][j], 1e-5);
  }
  EXPECT_NEAR(sel.weights(0, 0), 2.0, 1e-5);
  EXPECT_NEAR(sel.weights(4, 1), 3.0, 1e-5);
}

TEST(Linear, NoFeaturesGivesColumnMeans) {
  const std::vector<pl::FeatureVector> x(4, pl::FeatureVector{});
  const auto lab = labels_of({{1, 8}, {3, 8}, {5, 0}, {7, 0}}, pl::Orientation::Minimize);
  const auto sel = pl::train_linear(x, lab, portfolio_n(2));
  const auto s = sel.scores(std::vector<double>{});
  EXPECT_NEAR(s[0], 4.0, 1e-5);
  EXPECT_NEAR(s[1], 4.0, 1e-5);
  EXPECT_EQ(pl::select(sel, std::vector<double>{}).index, 0u);  // near tie broken by the fit
}

TEST(Linear, InvariantToRowOrder) {
  pl::Rng rng(103);
  auto x = random_features(rng, 40, 3);
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < x.size(); ++i) rows.push_back({rng.uniform(), rng.uniform()});
  const auto a = pl::train_linear(x, labels_of(rows, pl::Orientation::Maximize), portfolio_n(2));
  std::reverse(x.begin(), x.end());
  std::reverse(rows.begin(), rows.end());
  const auto b = pl::train_linear(x, labels_of(rows, pl::Orientation::Maximize), portfolio_n(2));
  for (const auto& phi : x) {
    const auto sa = a.scores(phi), sb = b.scores(phi);
    for (std::size_t j = 0; j < 2; ++j) ASSERT_NEAR(sa[j], sb[j], 1e-9);
  }
}

TEST(Linear, ShapeErrors) {
  const std::vector<pl::FeatureVector> x{{1.0}, {2.0, 3.0}};
  const auto lab = labels_of({{1}, {2}}, pl::Orientation::Minimize);
  EXPECT_THROW(pl::train_linear(x, lab, portfolio_n(1)), pl::ArgumentError);
  const std::vector<pl::FeatureVector> y{{1.0}, {2.0}};
  EXPECT_THROW(pl::train_linear(y, lab, portfolio_n(2)), pl::ArgumentError);
  const auto sel = pl::train_linear(y, lab, portfolio_n(1));
  EXPECT_THROW(sel.scores(std::vector<double>{1.0, 2.0}), pl::ArgumentError);
}

TEST(Forest, SingleLeafPredictsTheMean) {
  pl::Rng rng(107);
  const auto x = random_features(rng, 30, 3);
  std::vector<std::vector<double>> rows;
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    rows.push_back({static_cast<double>(i)});
    total += static_cast<double>(i);
  }
  auto params = exact_forest();
  params.max_leaves = 1;
  params.tree_count = 3;
  const auto sel = pl::train_forest(x, labels_of(rows, pl::Orientation::Minimize), portfolio_n(1), params);
  for (const auto& phi : x) ASSERT_DOUBLE_EQ(sel.scores(phi)[0], total / 30.0);
}

TEST(Forest, ConstantLabelsGiveConstantPredictions) {
  pl::Rng rng(109);
  const auto x = random_features(rng, 25, 4);
  const std::vector<std::vector<double>> rows(25, std::vector<double>{7.0, 2.0});
  const auto sel = pl::train_forest(x, labels_of(rows, pl::Orientation::Minimize), portfolio_n(2), pl::ForestParams{});
  for (const auto& phi : random_features(rng, 10, 4)) {
    const auto s = sel.scores(phi);
    ASSERT_EQ(s[0], 7.0);
    ASSERT_EQ(s[1], 2.0);
    ASSERT_EQ(pl::select(sel, phi).index, 1u);
  }
  for (const auto& t : sel.forests[0]) EXPECT_EQ(t.leaf_count(), 1u);
}

TEST(Forest, StepFunctionFitExactly) {
  pl::Rng rng(113);
  const auto x = random_features(rng, 50, 3);
  std::vector<std::vector<double>> rows;
  for (const auto& phi : x) rows.push_back({phi[1] > 0.2 ? 5.0 : 1.0});
  const auto sel = pl::train_forest(x, labels_of(rows, pl::Orientation::Minimize), portfolio_n(1), exact_forest());
  for (std::size_t i = 0; i < x.size(); ++i) ASSERT_EQ(sel.scores(x[i])[0], rows[i][0]);
  EXPECT_EQ(sel.forests[0][0].leaf_count(), 2u);
  EXPECT_EQ(sel.forests[0][0].nodes[0].feature, 1u);
}

TEST(Forest, LeafLimitsHold) {
  pl::Rng rng(127);
  const auto x = random_features(rng, 80, 5);
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < x.size(); ++i) rows.push_back({rng.uniform()});
  auto params = exact_forest();
  params.min_samples_leaf = 5;
  params.max_leaves = 9;
  const auto sel = pl::train_forest(x, labels_of(rows, pl::Orientation::Minimize), portfolio_n(1), params);
  const auto& tree = sel.forests[0][0];
  EXPECT_LE(tree.leaf_count(), 9u);
  // Route the training rows and count per leaf.
  std::vector<std::size_t> hits(tree.nodes.size(), 0);
  for (const auto& phi : x) {
    std::size_t k = 0;
    while (!tree.nodes[k].leaf) k = phi[tree.nodes[k].feature] <= tree.nodes[k].threshold ? tree.nodes[k].left : tree.nodes[k].right;
    ++hits[k];
  }
  for (std::size_t k = 0; k < tree.nodes.size(); ++k) {
    if (tree.nodes[k].leaf) {
      EXPECT_GE(hits[k], 5u);
    }
  }
}

TEST(Forest, PredictionIsMeanOfTrees) {
  pl::Rng rng(131);
  const auto x = random_features(rng, 40, 3);
  std::vector<std::vector<double>> rows;
  for (const auto& phi : x) rows.push_back({phi[0] * phi[0] + rng.uniform()});
  pl::ForestParams params;
  params.tree_count = 7;
  params.feature_fraction = 0.67;
  const auto sel = pl::train_forest(x, labels_of(rows, pl::Orientation::Minimize), portfolio_n(1), params);
  for (const auto& phi : random_features(rng, 10, 3)) {
    double s = 0.0;
    for (const auto& t : sel.forests[0]) s += t.predict(phi);
    ASSERT_DOUBLE_EQ(sel.scores(phi)[0], s / 7.0);
  }
}

TEST(Forest, DeterministicAcrossJobs) {
  pl::Rng rng(137);
  const auto x = random_features(rng, 60, 4);
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < x.size(); ++i) rows.push_back({rng.uniform(), rng.uniform(), rng.uniform()});
  const auto lab = labels_of(rows, pl::Orientation::Maximize);
  pl::ForestParams params;
  params.tree_count = 10;
  params.seed = 5;
  const auto a = pl::train_forest(x, lab, portfolio_n(3), params, 1);
  const auto b = pl::train_forest(x, lab, portfolio_n(3), params, 3);
  for (const auto& phi : random_features(rng, 20, 4)) ASSERT_EQ(a.scores(phi), b.scores(phi));
}

TEST(Forest, ScalingAFeatureByAPowerOfTwoKeepsDecisions) {
  pl::Rng rng(139);
  auto x = random_features(rng, 50, 3);
  std::vector<std::vector<double>> rows;
  for (const auto& phi : x) rows.push_back({phi[0] + phi[2], -phi[0]});
  const auto lab = labels_of(rows, pl::Orientation::Minimize);
  auto params = exact_forest();
  params.tree_count = 3;
  const auto a = pl::train_forest(x, lab, portfolio_n(2), params);
  auto scaled = x;
  for (auto& phi : scaled) phi[0] *= 4.0;
  const auto b = pl::train_forest(scaled, lab, portfolio_n(2), params);
  for (std::size_t i = 0; i < x.size(); ++i) ASSERT_EQ(a.scores(x[i]), b.scores(scaled[i]));
}

TEST(Forest, RejectsTooFewSamples) {
  const std::vector<pl::FeatureVector> x{{0.0}};
  pl::ForestParams p;
  p.min_samples_leaf = 2;
  EXPECT_THROW(pl::train_forest(x, labels_of({{1}}, pl::Orientation::Minimize), portfolio_n(1), p), pl::ArgumentError);
  p.feature_fraction = 0.0;
  EXPECT_THROW(p.validate(), pl::ArgumentError);
}

TEST(Cluster, SingleCenterIsTheFeatureMean) {
  pl::Rng rng(149);
  const auto x = random_features(rng, 20, 2);
  std::vector<double> mean(2, 0.0);
  for (const auto& phi : x) {
    mean[0] += phi[0] / 20.0;
    mean[1] += phi[1] / 20.0;
  }
  const auto lab = labels_of(std::vector<std::vector<double>>(20, {1.0}), pl::Orientation::Minimize);
  const auto sel = pl::train_cluster(x, lab, pl::Portfolio::make({0.5}, 1), 2.0, 0);
  ASSERT_EQ(sel.centers.size(), 1u);
  EXPECT_NEAR(sel.centers[0][0], mean[0], 1e-12);
  EXPECT_NEAR(sel.centers[0][1], mean[1], 1e-12);
}

TEST(Cluster, SeparatesBlobs) {
  pl::Rng rng(151);
  std::vector<pl::FeatureVector> x;
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < 40; ++i) {
    const bool left = i % 2 == 0;
    x.push_back({(left ? -10.0 : 10.0) + rng.uniform(-1, 1), rng.uniform(-1, 1)});
    rows.push_back(left ? std::vector<double>{1.0, 9.0} : std::vector<double>{9.0, 1.0});
  }
  for (double p : {1.0, 2.0, 3.5}) {
    const auto sel = pl::train_cluster(x, labels_of(rows, pl::Orientation::Minimize), portfolio_n(2), p, 3);
    EXPECT_EQ(pl::select(sel, std::vector<double>{-9.5, 0.3}).index, 0u);
    EXPECT_EQ(pl::select(sel, std::vector<double>{10.2, -0.4}).index, 1u);
    EXPECT_DOUBLE_EQ(pl::average_utility(sel, x, labels_of(rows, pl::Orientation::Minimize)), 1.0);
  }
}

TEST(Cluster, DeterministicAndValidated) {
  pl::Rng rng(157);
  const auto x = random_features(rng, 30, 3);
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < x.size(); ++i) rows.push_back({rng.uniform(), rng.uniform(), rng.uniform()});
  const auto lab = labels_of(rows, pl::Orientation::Minimize);
  const auto a = pl::train_cluster(x, lab, portfolio_n(3), 2.0, 8);
  const auto b = pl::train_cluster(x, lab, portfolio_n(3), 2.0, 8);
  EXPECT_EQ(a.centers, b.centers);
  EXPECT_EQ(a.assigned, b.assigned);
  EXPECT_THROW(pl::train_cluster(x, lab, portfolio_n(3), 0.5, 8), pl::ArgumentError);
  const std::vector<pl::FeatureVector> tiny{{0.0}, {1.0}};
  EXPECT_THROW(pl::train_cluster(tiny, labels_of({{1, 2, 3}, {1, 2, 3}}, pl::Orientation::Minimize), portfolio_n(3), 2.0, 0),
               pl::ArgumentError);
}

TEST(Oracle, PicksRowBestWithLowestIndexOnTies) {
  const auto lab = labels_of({{3, 1, 1}, {2, 2, 5}}, pl::Orientation::Minimize);
  const auto p = portfolio_n(3);
  EXPECT_EQ(pl::oracle_select(lab, p, 0).index, 1u);
  EXPECT_DOUBLE_EQ(pl::oracle_select(lab, p, 0).parameter, 0.2);
  EXPECT_EQ(pl::oracle_select(lab, p, 1).index, 0u);
  EXPECT_DOUBLE_EQ(pl::oracle_average(lab), 1.5);
  EXPECT_THROW(pl::oracle_select(lab, p, 2), pl::ArgumentError);
}

TEST(Oracle, NoSelectorBeatsIt) {
  pl::Rng rng(163);
  for (int rep = 0; rep < 10; ++rep) {
    const auto x = random_features(rng, 30, 3);
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < x.size(); ++i) rows.push_back({rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()});
    const auto lab = labels_of(rows, pl::Orientation::Minimize);
    const auto p = portfolio_n(4);
    const double best = pl::oracle_average(lab);
    pl::ForestParams fp;
    fp.tree_count = 5;
    const pl::Selector sels[] = {pl::train_linear(x, lab, p), pl::train_forest(x, lab, p, fp),
                                 pl::train_cluster(x, lab, p, 2.0, 1)};
    for (const auto& s : sels) {
      ASSERT_GE(pl::average_utility(s, x, lab), best - 1e-12);
      ASSERT_EQ(pl::portfolio_of(s).params, p.params);
    }
  }
}

TEST(Select, TiesGoToTheLowestIndex) {
  pl::LinearSelector s;
  s.weights = pl::Matrix(2, 3, 0.0);
  s.portfolio = portfolio_n(3);
  EXPECT_EQ(pl::select(s, std::vector<double>{1.0}).index, 0u);
  s.weights(1, 2) = -1.0;
  EXPECT_EQ(pl::select(s, std::vector<double>{1.0}).index, 2u);
}

TEST(Labels, FromTableFollowsPortfolioOrder) {
  pl::Rng rng(167);
  const auto t = oracle::random_table(rng, 5, 6, pl::Orientation::Minimize);
  const auto p = pl::Portfolio::make({t.candidates.params[4], t.candidates.params[1]}, 2);
  const auto lab = pl::labels_from_table(t, p);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(lab.utilities(i, 0), t.at(i, 1));
    EXPECT_EQ(lab.utilities(i, 1), t.at(i, 4));
  }
}
