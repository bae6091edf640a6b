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

// Traces tree-size functions for a handful of instances, picks a portfolio
// greedily and trains a forest selector over it.
//
//   demo_trace_and_select [kappa]

#include <cstdio>
#include <cstdlib>
#include <vector>

#include "portfolio_lab/bnb.hpp"
#include "portfolio_lab/generators.hpp"
#include "portfolio_lab/portfolio.hpp"
#include "portfolio_lab/selectors.hpp"

namespace pl = portfolio_lab;

namespace {

constexpr std::size_t kNodeCap = 500;

pl::IpInstance draw(const char* stage, std::size_t i) {
  return pl::draw_mixture_instance(pl::derive_seed(42, pl::stream_tag(stage), i));
}

struct Labeled {
  std::vector<pl::FeatureVector> features;
  pl::LabelSet labels;
};

Labeled label(const char* stage, std::size_t n, const pl::Portfolio& p) {
  Labeled out{{}, {pl::Matrix(n, p.size()), pl::Orientation::Minimize}};
  for (std::size_t i = 0; i < n; ++i) {
    const auto inst = draw(stage, i);
    out.features.push_back(pl::extract_features(inst));
    const auto sizes = pl::tree_sizes_at(inst, p.params, kNodeCap);
    for (std::size_t j = 0; j < p.size(); ++j) out.labels.utilities(i, j) = sizes[j];
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  const std::size_t kappa = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 4;

  std::vector<pl::PiecewiseConstantFn> fns;
  for (std::size_t i = 0; i < 30; ++i) {
    const auto inst = draw("duals", i);
    const auto tr = pl::dual_trace(inst, kNodeCap, 10000);
    if (i < 3) {
      std::printf("instance %zu (%s, %zu vars): %zu pieces, %zu runs\n", i, inst.family.c_str(), inst.num_vars(),
                  tr.fn.piece_count(), tr.bnb_runs);
    }
    fns.push_back(tr.fn);
  }
  const auto table = pl::build_table(fns, pl::Orientation::Minimize, static_cast<double>(kNodeCap));
  const auto g = pl::greedy_select(table, kappa, true);
  std::printf("%zu candidates; greedy portfolio:\n", table.cols());
  for (std::size_t k = 0; k < g.order.size(); ++k) std::printf("  rho=%.6f  gain %.0f\n", g.order[k], g.gains[k]);

  const auto train = label("train", 60, g.portfolio);
  const auto test = label("test", 60, g.portfolio);
  pl::ForestParams fp;
  fp.tree_count = 30;
  const auto sel = pl::train_forest(train.features, train.labels, g.portfolio, fp);
  std::printf("mean tree size  train %.2f  test %.2f\n", pl::average_utility(sel, train.features, train.labels),
              pl::average_utility(sel, test.features, test.labels));
  std::printf("oracle          train %.2f  test %.2f\n", pl::oracle_average(train.labels),
              pl::oracle_average(test.labels));
  return 0;
}
