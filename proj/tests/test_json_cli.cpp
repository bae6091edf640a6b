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

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "cli_app.hpp"
#include "oracles.hpp"
#include "portfolio_lab/json_io.hpp"

namespace pl = portfolio_lab;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun cli(std::vector<std::string> args) {
  args.insert(args.begin(), "portfolio_lab");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = pl::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("portfolio_lab_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

}  // namespace

TEST(Json, InstanceRoundTrip) {
  const auto inst = oracle::small_instance(4);
  const auto back = pl::instance_from_json(pl::to_json(inst));
  EXPECT_EQ(back.c, inst.c);
  EXPECT_EQ(back.A.to_rows(), inst.A.to_rows());
  EXPECT_EQ(back.b, inst.b);
  EXPECT_EQ(back.integer_vars, inst.integer_vars);
  EXPECT_EQ(back.lo, inst.lo);
  EXPECT_EQ(back.hi, inst.hi);
  EXPECT_EQ(back.family, inst.family);
  EXPECT_EQ(back.seed, inst.seed);
  const auto list = pl::instances_from_json(pl::instances_to_json({inst, inst}));
  EXPECT_EQ(list.size(), 2u);
  EXPECT_EQ(pl::instances_from_json(pl::to_json(inst)).size(), 1u);
}

TEST(Json, PiecewiseAndTableRoundTrip) {
  const pl::PiecewiseConstantFn f(0, 1, {0.25, 0.5}, {3, 1, 2});
  EXPECT_EQ(pl::piecewise_from_json(pl::to_json(f)), f);
  pl::Rng rng(181);
  const auto t = oracle::random_table(rng, 4, 5, pl::Orientation::Minimize);
  const auto back = pl::table_from_json(pl::to_json(t));
  EXPECT_EQ(back.utilities.to_rows(), t.utilities.to_rows());
  EXPECT_EQ(back.candidates.params, t.candidates.params);
  EXPECT_EQ(back.orientation, t.orientation);
  EXPECT_EQ(back.range_cap, t.range_cap);
}

TEST(Json, SelectorsRoundTripWithIdenticalChoices) {
  pl::Rng rng(191);
  std::vector<pl::FeatureVector> x(30, pl::FeatureVector(3));
  for (auto& row : x) {
    for (auto& v : row) v = rng.uniform(-1, 1);
  }
  pl::LabelSet lab{pl::Matrix(30, 3), pl::Orientation::Minimize};
  for (std::size_t i = 0; i < 30; ++i) {
    for (std::size_t j = 0; j < 3; ++j) lab.utilities(i, j) = rng.uniform();
  }
  const auto p = pl::Portfolio::make({0.1, 0.4, 0.9}, 3);
  pl::ForestParams fp;
  fp.tree_count = 4;
  const pl::Selector sels[] = {pl::train_linear(x, lab, p), pl::train_forest(x, lab, p, fp),
                               pl::train_cluster(x, lab, p, 1.5, 2)};
  for (const auto& s : sels) {
    const auto back = pl::selector_from_json(pl::parse_json(pl::to_json(s).dump(), "selector"));
    for (const auto& phi : x) ASSERT_EQ(pl::select(back, phi).index, pl::select(s, phi).index);
  }
}

TEST(Json, ConfigRoundTripAndUnknownKeys) {
  pl::ExperimentConfig c;
  c.seed = 9;
  c.train_sizes = {10, 20};
  c.selector = pl::SelectorKind::Linear;
  c.forest.tree_count = 7;
  c.family_b.n_items = 11;
  const auto back = pl::config_from_json(pl::to_json(c));
  EXPECT_EQ(back.seed, 9u);
  EXPECT_EQ(back.train_sizes, c.train_sizes);
  EXPECT_EQ(back.selector, pl::SelectorKind::Linear);
  EXPECT_EQ(back.forest.tree_count, 7u);
  EXPECT_EQ(back.family_b.n_items, 11u);
  auto j = pl::to_json(c);
  j["bogus"] = 1;
  EXPECT_THROW(pl::config_from_json(j), pl::ParseError);
}

TEST(Json, ParseErrorReportsByteOffset) {
  try {
    pl::parse_json("{\"a\": [1, 2,, 3]}", "doc");
    FAIL() << "expected ParseError";
  } catch (const pl::ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("malformed JSON at byte"), std::string::npos);
  }
  EXPECT_THROW(pl::instance_from_json(pl::Json{{"c", "oops"}}), pl::ParseError);
}

TEST_F(TempDir, GenIsDeterministicPerSeed) {
  ASSERT_EQ(cli({"gen", "--family", "B", "--count", "3", "--seed", "5", "--out", path("a.json")}).code, 0);
  ASSERT_EQ(cli({"gen", "--family", "B", "--count", "3", "--seed", "5", "--out", path("b.json")}).code, 0);
  ASSERT_EQ(cli({"gen", "--family", "B", "--count", "3", "--seed", "6", "--out", path("c.json")}).code, 0);
  const auto a = pl::read_text_file(path("a.json"));
  EXPECT_EQ(a, pl::read_text_file(path("b.json")));
  EXPECT_NE(a, pl::read_text_file(path("c.json")));
  const auto list = pl::instances_from_json(pl::parse_json(a, "a"));
  ASSERT_EQ(list.size(), 3u);
  EXPECT_EQ(list[0].num_vars(), 40u);
}

TEST_F(TempDir, PipelineFromGenToEval) {
  ASSERT_EQ(cli({"gen", "--family", "mix", "--count", "12", "--seed", "1", "--out", path("duals_in.json")}).code, 0);
  ASSERT_EQ(cli({"duals", "--in", path("duals_in.json"), "--node-cap", "200", "--out", path("duals.json")}).code, 0);
  ASSERT_EQ(cli({"portfolio", "--table", path("duals.json"), "--kappa", "3", "--fill", "--out", path("p.json")}).code, 0);
  const auto port = pl::read_json_file(path("p.json"));
  EXPECT_EQ(port.at("portfolio").at("params").size(), 3u);
  EXPECT_EQ(port.at("report").at("epsilon").get<double>(), 0.0);
  ASSERT_EQ(cli({"gen", "--family", "mix", "--count", "10", "--seed", "2", "--out", path("train.json")}).code, 0);
  ASSERT_EQ(cli({"gen", "--family", "mix", "--count", "10", "--seed", "3", "--out", path("test.json")}).code, 0);
  for (const std::string model : {"linear", "forest", "cluster"}) {
    const auto sel = path(model + ".json");
    ASSERT_EQ(cli({"train", "--instances", path("train.json"), "--portfolio", path("p.json"), "--model", model,
                   "--trees", "5", "--node-cap", "200", "--out", sel})
                  .code,
              0)
        << model;
    const auto r = cli({"eval", "--selector", sel, "--train", path("train.json"), "--test", path("test.json"),
                        "--node-cap", "200"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto m = pl::parse_json(r.out, "metrics");
    EXPECT_GE(m.at("test_avg").get<double>(), m.at("oracle_test_avg").get<double>() - 1e-12);
    EXPECT_GE(m.at("epsilon").get<double>(), -1e-12);
  }
}

TEST(Cli, LowerBoundVerify) {
  const auto r = cli({"lowerbound", "--kappa", "6", "--verify"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = pl::parse_json(r.out, "verdict");
  EXPECT_TRUE(j.at("shattered").get<bool>());
  EXPECT_FALSE(j.at("natarajan_shatters_d1").get<bool>());
  EXPECT_EQ(j.at("points").size(), 6u);
}

TEST(Cli, BoundsValue) {
  const auto r = cli({"bounds", "--dbar", "2", "--kappa", "2", "--t", "2", "--N", "100"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = pl::parse_json(r.out, "bounds");
  const auto& first = j.at("reports").at(0);
  EXPECT_EQ(first.at("bound_name"), "pdim_upper_bound");
  EXPECT_NEAR(first.at("value").get<double>(), 4 * std::log2(5.0) + 2, 1e-12);
  EXPECT_EQ(first.at("note"), "up to universal constants");
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(cli({}).code, 1);
  EXPECT_EQ(cli({"nonsense"}).code, 1);
  EXPECT_EQ(cli({"bounds", "--kappa", "0"}).code, 1);
  EXPECT_EQ(cli({"lowerbound", "--kappa", "21", "--verify"}).code, 2);  // capacity guard
  EXPECT_EQ(cli({"lowerbound", "--kappa", "3", "--gap-N", "10"}).code, 1);
  EXPECT_EQ(cli({"--version"}).code, 0);
}

TEST_F(TempDir, MalformedInputIsADomainError) {
  {
    std::ofstream f(path("bad.json"));
    f << "{ not json";
  }
  const auto r = cli({"duals", "--in", path("bad.json"), "--out", path("x.json")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("malformed JSON"), std::string::npos);
}
