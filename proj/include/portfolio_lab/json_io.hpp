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

// JSON schemas for every artifact the CLI reads or writes. Requires
// nlohmann/json (json.hpp) on the include path.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "portfolio_lab/bnb.hpp"
#include "portfolio_lab/bounds.hpp"
#include "portfolio_lab/core.hpp"
#include "portfolio_lab/harness.hpp"
#include "portfolio_lab/lp.hpp"
#include "portfolio_lab/piecewise.hpp"
#include "portfolio_lab/portfolio.hpp"
#include "portfolio_lab/selectors.hpp"

namespace portfolio_lab {

using Json = nlohmann::json;

inline constexpr std::string_view kFormatVersion = "v1";
inline constexpr std::string_view kLibraryVersion = "0.1.0";

namespace detail {

inline Json matrix_rows(const Matrix& m) {
  Json rows = Json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) rows.push_back(m.row(i));
  return rows;
}

inline Matrix matrix_from_json(const Json& j, std::size_t expected_cols) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  if (rows.empty()) return Matrix(0, expected_cols);
  return Matrix::from_rows(rows);
}

// Non-finite numbers travel as null.
inline Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline void require_version(const Json& j, std::string_view what) {
  if (!j.is_object()) throw ParseError(std::string(what) + ": expected a JSON object");
  if (j.contains("version") && j.at("version") != kFormatVersion) {
    throw ParseError(std::string(what) + ": unsupported version " + j.at("version").dump());
  }
}

inline void reject_unknown_keys(const Json& j, std::initializer_list<std::string_view> allowed, std::string_view what) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw ParseError(std::string(what) + ": unknown key '" + key + "'");
  }
}

}  // namespace detail

/// Parses text, reporting the byte offset of a syntax error.
inline Json parse_json(const std::string& text, std::string_view what) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string(what) + ": malformed JSON at byte " + std::to_string(e.byte) + ": " + e.what());
  }
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Json read_json_file(const std::string& path) { return parse_json(read_text_file(path), path); }

inline void write_json_file(const std::string& path, const Json& j) { detail::write_file(path, j.dump(2) + "\n"); }

// Typed accessors turn library exceptions into ParseError.
template <typename T, typename F>
T decode(std::string_view what, F&& f) {
  try {
    return f();
  } catch (const Json::exception& e) {
    throw ParseError(std::string(what) + ": " + e.what());
  }
}

// --- instances ---------------------------------------------------------------

inline Json to_json(const IpInstance& inst) {
  return {{"c", inst.c},
          {"A", detail::matrix_rows(inst.A)},
          {"b", inst.b},
          {"I", inst.integer_vars},
          {"lo", inst.lo},
          {"hi", inst.hi},
          {"meta", {{"family", inst.family}, {"seed", inst.seed}}}};
}

inline IpInstance instance_from_json(const Json& j) {
  return decode<IpInstance>("instance", [&] {
    IpInstance inst;
    inst.c = j.at("c").get<std::vector<double>>();
    inst.A = detail::matrix_from_json(j.at("A"), inst.c.size());
    inst.b = j.at("b").get<std::vector<double>>();
    inst.integer_vars = j.at("I").get<std::vector<std::size_t>>();
    inst.lo = j.at("lo").get<std::vector<double>>();
    inst.hi = j.at("hi").get<std::vector<double>>();
    if (j.contains("meta")) {
      inst.family = j.at("meta").value("family", "");
      inst.seed = j.at("meta").value("seed", std::uint64_t{0});
    }
    inst.validate();
    return inst;
  });
}

inline Json instances_to_json(const std::vector<IpInstance>& list) {
  Json arr = Json::array();
  for (const auto& inst : list) arr.push_back(to_json(inst));
  return {{"version", kFormatVersion}, {"instances", arr}};
}

/// Accepts {"instances": [...]}, a bare array, or a single instance object.
inline std::vector<IpInstance> instances_from_json(const Json& j) {
  std::vector<IpInstance> out;
  const Json* list = &j;
  if (j.is_object() && j.contains("instances")) {
    detail::require_version(j, "instances");
    list = &j.at("instances");
  } else if (j.is_object()) {
    out.push_back(instance_from_json(j));
    return out;
  }
  if (!list->is_array()) throw ParseError("instances: expected an array");
  for (const auto& e : *list) out.push_back(instance_from_json(e));
  return out;
}

inline Json to_json(const BnbResult& r) {
  return {{"tree_size", r.tree_size},
          {"status", to_string(r.status)},
          {"has_incumbent", r.has_incumbent},
          {"incumbent_objective", detail::number_or_null(r.incumbent_objective)},
          {"incumbent_x", r.incumbent_x}};
}

// --- piecewise functions and tables ------------------------------------------

inline Json to_json(const PiecewiseConstantFn& f) {
  return {{"domain", {f.lo(), f.hi()}}, {"breakpoints", f.breakpoints()}, {"values", f.values()}};
}

inline PiecewiseConstantFn piecewise_from_json(const Json& j) {
  return decode<PiecewiseConstantFn>("piecewise function", [&] {
    const auto dom = j.at("domain").get<std::vector<double>>();
    if (dom.size() != 2) throw ParseError("piecewise function: domain needs two numbers");
    return PiecewiseConstantFn(dom[0], dom[1], j.at("breakpoints").get<std::vector<double>>(),
                               j.at("values").get<std::vector<double>>());
  });
}

inline Json to_json(const DualTrace& t) {
  Json j = to_json(t.fn);
  j["capped"] = t.capped;
  j["bnb_runs"] = t.bnb_runs;
  return j;
}

inline Json to_json(const PerformanceTable& t) {
  return {{"version", kFormatVersion},
          {"orientation", to_string(t.orientation)},
          {"range_cap", t.range_cap},
          {"candidates",
           {{"params", t.candidates.params}, {"source_interval_count", t.candidates.source_interval_count}}},
          {"utilities", detail::matrix_rows(t.utilities)}};
}

inline PerformanceTable table_from_json(const Json& j) {
  detail::require_version(j, "table");
  return decode<PerformanceTable>("table", [&] {
    PerformanceTable t;
    t.orientation = orientation_from_string(j.at("orientation").get<std::string>());
    t.range_cap = j.at("range_cap").get<double>();
    t.candidates.params = j.at("candidates").at("params").get<std::vector<double>>();
    t.candidates.source_interval_count = j.at("candidates").value("source_interval_count", t.candidates.params.size());
    t.utilities = detail::matrix_from_json(j.at("utilities"), t.candidates.params.size());
    t.validate();
    return t;
  });
}

// --- portfolios ----------------------------------------------------------------

inline Json to_json(const Portfolio& p) { return {{"params", p.params}, {"kappa_cap", p.kappa_cap}}; }

inline Portfolio portfolio_from_json(const Json& j) {
  return decode<Portfolio>("portfolio", [&] {
    const Json& src = j.contains("portfolio") ? j.at("portfolio") : j;
    return Portfolio::make(src.at("params").get<std::vector<double>>(), src.at("kappa_cap").get<std::size_t>());
  });
}

inline Json to_json(const OptimalityReport& r) {
  return {{"alpha", r.alpha},
          {"beta", r.beta},
          {"epsilon", r.epsilon},
          {"train_coverage", r.train_coverage},
          {"opt_coverage_or_bound", r.opt_coverage_or_bound},
          {"opt_is_exact", r.opt_is_exact}};
}

// --- selectors -------------------------------------------------------------------

inline Json to_json(const ForestParams& p) {
  return {{"tree_count", p.tree_count},
          {"max_leaves", p.max_leaves},
          {"min_samples_leaf", p.min_samples_leaf},
          {"feature_fraction", p.feature_fraction},
          {"bootstrap", p.bootstrap},
          {"seed", p.seed}};
}

inline ForestParams forest_params_from_json(const Json& j) {
  detail::reject_unknown_keys(j, {"tree_count", "max_leaves", "min_samples_leaf", "feature_fraction", "bootstrap", "seed"},
                              "forest params");
  return decode<ForestParams>("forest params", [&] {
    ForestParams p;
    p.tree_count = j.value("tree_count", p.tree_count);
    p.max_leaves = j.value("max_leaves", p.max_leaves);
    p.min_samples_leaf = j.value("min_samples_leaf", p.min_samples_leaf);
    p.feature_fraction = j.value("feature_fraction", p.feature_fraction);
    p.bootstrap = j.value("bootstrap", p.bootstrap);
    p.seed = j.value("seed", p.seed);
    p.validate();
    return p;
  });
}

inline Json to_json(const RegressionTree& t) {
  Json nodes = Json::array();
  for (const auto& n : t.nodes) {
    if (n.leaf) {
      nodes.push_back({{"value", n.value}});
    } else {
      nodes.push_back({{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left}, {"right", n.right}});
    }
  }
  return nodes;
}

inline RegressionTree tree_from_json(const Json& j, std::size_t feature_dim) {
  RegressionTree t;
  for (const auto& n : j) {
    TreeNode node;
    if (n.contains("value")) {
      node.value = n.at("value").get<double>();
    } else {
      node.leaf = false;
      node.feature = n.at("feature").get<std::size_t>();
      node.threshold = n.at("threshold").get<double>();
      node.left = n.at("left").get<std::size_t>();
      node.right = n.at("right").get<std::size_t>();
    }
    t.nodes.push_back(node);
  }
  if (t.nodes.empty()) throw ParseError("tree: no nodes");
  for (const auto& n : t.nodes) {
    if (!n.leaf && (n.feature >= feature_dim || n.left >= t.nodes.size() || n.right >= t.nodes.size())) {
      throw ParseError("tree: node index or feature out of range");
    }
  }
  return t;
}

inline Json to_json(const Selector& s) {
  Json j{{"version", kFormatVersion}};
  std::visit(
      [&](const auto& sel) {
        using T = std::decay_t<decltype(sel)>;
        j["portfolio"] = to_json(sel.portfolio);
        j["orientation"] = to_string(sel.orientation);
        if constexpr (std::is_same_v<T, LinearSelector>) {
          j["model"] = "linear";
          j["weights"] = detail::matrix_rows(sel.weights);
        } else if constexpr (std::is_same_v<T, ForestSelector>) {
          j["model"] = "forest";
          j["hyperparams"] = to_json(sel.params);
          j["feature_dim"] = sel.feature_dim;
          Json forests = Json::array();
          for (const auto& f : sel.forests) {
            Json trees = Json::array();
            for (const auto& t : f) trees.push_back(to_json(t));
            forests.push_back(trees);
          }
          j["forests"] = forests;
        } else {
          j["model"] = "cluster";
          j["norm_p"] = sel.norm_p;
          j["centers"] = sel.centers;
          j["assigned"] = sel.assigned;
        }
      },
      s);
  return j;
}

inline Selector selector_from_json(const Json& j) {
  detail::require_version(j, "selector");
  return decode<Selector>("selector", [&]() -> Selector {
    const std::string model = j.at("model").get<std::string>();
    const Portfolio portfolio = portfolio_from_json(j.at("portfolio"));
    const Orientation orientation = orientation_from_string(j.at("orientation").get<std::string>());
    if (model == "linear") {
      LinearSelector s{detail::matrix_from_json(j.at("weights"), portfolio.size()), portfolio, orientation};
      if (s.weights.cols() != portfolio.size() || s.weights.rows() < 1) {
        throw ParseError("selector: weight matrix does not match the portfolio");
      }
      return s;
    }
    if (model == "forest") {
      ForestSelector s;
      s.portfolio = portfolio;
      s.orientation = orientation;
      s.params = forest_params_from_json(j.at("hyperparams"));
      s.feature_dim = j.at("feature_dim").get<std::size_t>();
      for (const auto& f : j.at("forests")) {
        std::vector<RegressionTree> trees;
        for (const auto& t : f) trees.push_back(tree_from_json(t, s.feature_dim));
        if (trees.empty()) throw ParseError("selector: empty forest");
        s.forests.push_back(std::move(trees));
      }
      if (s.forests.size() != portfolio.size()) throw ParseError("selector: forest count does not match the portfolio");
      return s;
    }
    if (model == "cluster") {
      ClusterSelector s;
      s.portfolio = portfolio;
      s.orientation = orientation;
      s.norm_p = j.at("norm_p").get<double>();
      s.centers = j.at("centers").get<std::vector<std::vector<double>>>();
      s.assigned = j.at("assigned").get<std::vector<std::size_t>>();
      if (s.centers.size() != portfolio.size() || s.assigned.size() != portfolio.size()) {
        throw ParseError("selector: center count does not match the portfolio");
      }
      for (std::size_t a : s.assigned) {
        if (a >= portfolio.size()) throw ParseError("selector: assigned entry out of range");
      }
      return s;
    }
    throw ParseError("selector: unknown model '" + model + "'");
  });
}

// --- experiment config and manifest ----------------------------------------------

inline Json to_json(const ExperimentConfig& c) {
  return {{"version", kFormatVersion},
          {"seed", c.seed},
          {"n_dual_instances", c.n_dual_instances},
          {"train_sizes", c.train_sizes},
          {"test_size", c.test_size},
          {"kappa_max", c.kappa_max},
          {"replications", c.replications},
          {"selector",
           {{"kind", to_string(c.selector)}, {"forest", to_json(c.forest)}, {"norm_p", c.norm_p}}},
          {"families",
           {{"A", {{"items", c.family_a.n_items}, {"bids", c.family_a.n_bids}}},
            {"B", {{"items", c.family_b.n_items}, {"bids", c.family_b.n_bids}}}}},
          {"node_cap", c.node_cap},
          {"piece_cap", c.piece_cap},
          {"fill_portfolio", c.fill_portfolio}};
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline ExperimentConfig config_from_json(const Json& j) {
  detail::require_version(j, "config");
  detail::reject_unknown_keys(j,
                              {"version", "seed", "n_dual_instances", "train_sizes", "test_size", "kappa_max",
                               "replications", "selector", "families", "node_cap", "piece_cap", "fill_portfolio"},
                              "config");
  return decode<ExperimentConfig>("config", [&] {
    ExperimentConfig c;
    c.seed = j.value("seed", c.seed);
    c.n_dual_instances = j.value("n_dual_instances", c.n_dual_instances);
    c.train_sizes = j.value("train_sizes", c.train_sizes);
    c.test_size = j.value("test_size", c.test_size);
    c.kappa_max = j.value("kappa_max", c.kappa_max);
    c.replications = j.value("replications", c.replications);
    c.node_cap = j.value("node_cap", c.node_cap);
    c.piece_cap = j.value("piece_cap", c.piece_cap);
    c.fill_portfolio = j.value("fill_portfolio", c.fill_portfolio);
    if (j.contains("selector")) {
      const Json& s = j.at("selector");
      detail::reject_unknown_keys(s, {"kind", "forest", "norm_p"}, "config.selector");
      if (s.contains("kind")) c.selector = selector_kind_from_string(s.at("kind").get<std::string>());
      if (s.contains("forest")) c.forest = forest_params_from_json(s.at("forest"));
      c.norm_p = s.value("norm_p", c.norm_p);
    }
    if (j.contains("families")) {
      const Json& f = j.at("families");
      detail::reject_unknown_keys(f, {"A", "B"}, "config.families");
      auto read = [](const Json& e, GeneratorSpec& spec) {
        detail::reject_unknown_keys(e, {"items", "bids"}, "config.families entry");
        spec.n_items = e.value("items", spec.n_items);
        spec.n_bids = e.value("bids", spec.n_bids);
      };
      if (f.contains("A")) read(f.at("A"), c.family_a);
      if (f.contains("B")) read(f.at("B"), c.family_b);
    }
    c.validate();
    return c;
  });
}

/// Run manifest. Everything except "timings" is a deterministic function of
/// the config.
inline Json manifest_json(const ExperimentConfig& c, const ExperimentResult& r) {
  Json details = Json::array();
  for (const auto& d : r.details) {
    details.push_back({{"train_size", d.train_size},
                       {"replication", d.replication},
                       {"kappa", d.kappa},
                       {"test_avg", d.test_avg},
                       {"train_avg", d.train_avg},
                       {"oracle_test_avg", d.oracle_test_avg},
                       {"oracle_train_avg", d.oracle_train_avg},
                       {"epsilon", d.epsilon}});
  }
  return {{"version", kFormatVersion},
          {"library_version", kLibraryVersion},
          {"config", to_json(c)},
          {"seed", c.seed},
          {"seed_scheme", "splitmix64 over (seed, stage tag, indices)"},
          {"portfolio", {{"order", r.portfolio_order}, {"gains", r.portfolio_gains}}},
          {"candidate_count", r.candidate_count},
          {"dual_pieces_max", r.dual_pieces_max},
          {"capped_dual_instances", r.capped_dual_instances},
          {"capped_labels", r.capped_labels},
          {"label_cap", c.node_cap},
          {"warnings", r.warnings},
          {"details", details},
          {"timings", r.timings}};
}

// --- bound reports ------------------------------------------------------------------

inline Json to_json(const BoundQuery& q) {
  return {{"d_bar", q.d_bar}, {"kappa", q.kappa}, {"t", q.t},         {"N", q.N},
          {"H", q.H},         {"delta", q.delta}, {"alpha", q.alpha}, {"beta", q.beta},
          {"epsilon", q.epsilon}};
}

inline Json bound_report(std::string_view name, const Json& inputs, double value) {
  return {{"bound_name", name}, {"inputs", inputs}, {"value", value}, {"note", kBoundNote}};
}

}  // namespace portfolio_lab
