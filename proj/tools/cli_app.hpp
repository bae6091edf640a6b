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

#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "portfolio_lab/json_io.hpp"

namespace portfolio_lab::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitDomain = 2;

/// --seed, else PORTFOLIO_LAB_SEED, else 0.
inline std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("PORTFOLIO_LAB_SEED"); env && *env) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0') throw ArgumentError("PORTFOLIO_LAB_SEED is not an unsigned integer");
    return v;
  }
  return 0;
}

inline void emit(const Json& j, const std::string& out_path, std::ostream& out) {
  if (out_path.empty()) {
    out << j.dump(2) << '\n';
  } else {
    write_json_file(out_path, j);
  }
}

struct LabeledInstances {
  std::vector<FeatureVector> features;
  LabelSet labels;
};

inline LabeledInstances label_for(const std::vector<IpInstance>& instances, const Portfolio& p, std::size_t node_cap,
                                  std::size_t jobs) {
  LabeledInstances out{std::vector<FeatureVector>(instances.size()),
                       LabelSet{Matrix(instances.size(), p.size()), Orientation::Minimize}};
  parallel_for(instances.size(), jobs, [&](std::size_t i) {
    out.features[i] = extract_features(instances[i]);
    const auto sizes = tree_sizes_at(instances[i], p.params, node_cap);
    for (std::size_t j = 0; j < p.size(); ++j) out.labels.utilities(i, j) = sizes[j];
  });
  return out;
}

/// Runs one command line. Returns the process exit status.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"portfolio_lab: portfolio-based algorithm selection for a parameterized branch-and-bound solver"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kLibraryVersion));

  std::optional<std::uint64_t> seed;
  std::size_t jobs = default_jobs();
  std::string out_path;
  auto add_common = [&](CLI::App* sub, bool with_seed, bool with_jobs) {
    if (with_seed) sub->add_option("--seed", seed, "RNG seed (fallback: PORTFOLIO_LAB_SEED, then 0)");
    if (with_jobs) {
      sub->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    }
  };

  // gen
  auto* gen = app.add_subcommand("gen", "generate winner-determination instances");
  std::string family = "A";
  std::optional<std::size_t> items, bids;
  std::size_t count = 1;
  gen->add_option("--family", family, "A, B, or mix (fair coin per instance)")
      ->check(CLI::IsMember({"A", "B", "a", "b", "mix"}))
      ->capture_default_str();
  gen->add_option("--items", items, "item count (default 15 for A, 20 for B)")->check(CLI::PositiveNumber);
  gen->add_option("--bids", bids, "bid count (default 30 for A, 40 for B)")->check(CLI::PositiveNumber);
  gen->add_option("--count", count, "number of instances")->check(CLI::PositiveNumber)->capture_default_str();
  gen->add_option("--out", out_path, "output instances JSON")->required();
  add_common(gen, true, false);

  // duals
  auto* duals = app.add_subcommand("duals", "trace exact tree-size functions and build the performance table");
  std::string in_path;
  std::size_t node_cap = 1000;
  std::size_t piece_cap = 10000;
  duals->add_option("--in", in_path, "instances JSON")->required()->check(CLI::ExistingFile);
  duals->add_option("--node-cap", node_cap, "B&B node cap (also the range cap H)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  duals->add_option("--piece-cap", piece_cap, "max pieces per traced function")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  duals->add_option("--out", out_path, "output JSON (traces + table)")->required();
  add_common(duals, false, true);

  // portfolio
  auto* port = app.add_subcommand("portfolio", "select a portfolio from a performance table");
  std::string table_path;
  std::size_t kappa = 5;
  std::string method = "greedy";
  bool fill = false;
  port->add_option("--table", table_path, "table JSON (or the output of duals)")->required()->check(CLI::ExistingFile);
  port->add_option("--kappa", kappa, "portfolio size")->check(CLI::PositiveNumber)->capture_default_str();
  port->add_option("--method", method, "greedy or exhaustive")
      ->check(CLI::IsMember({"greedy", "exhaustive"}))
      ->capture_default_str();
  port->add_flag("--fill", fill, "greedy: keep picking after the marginal gain reaches zero");
  port->add_option("--out", out_path, "output portfolio JSON")->required();

  // train
  auto* train = app.add_subcommand("train", "train a selector on labeled instances");
  std::string train_path, portfolio_path;
  std::string model = "forest";
  ForestParams fp;
  bool no_bootstrap = false;
  double norm_p = 2.0;
  train->add_option("--instances", train_path, "training instances JSON")->required()->check(CLI::ExistingFile);
  train->add_option("--portfolio", portfolio_path, "portfolio JSON")->required()->check(CLI::ExistingFile);
  train->add_option("--model", model, "forest, linear, or cluster")
      ->check(CLI::IsMember({"forest", "linear", "cluster"}))
      ->capture_default_str();
  train->add_option("--trees", fp.tree_count, "forest: trees per entry")->check(CLI::PositiveNumber)->capture_default_str();
  train->add_option("--max-leaves", fp.max_leaves, "forest: leaf cap")->check(CLI::PositiveNumber)->capture_default_str();
  train->add_option("--min-leaf", fp.min_samples_leaf, "forest: min samples per leaf")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  train->add_option("--feature-fraction", fp.feature_fraction, "forest: features tried per split")
      ->check(CLI::Range(1e-9, 1.0))
      ->capture_default_str();
  train->add_flag("--no-bootstrap", no_bootstrap, "forest: grow trees on the full sample");
  train->add_option("--norm-p", norm_p, "cluster: inference norm p >= 1")->check(CLI::Range(1.0, 1e300))->capture_default_str();
  train->add_option("--node-cap", node_cap, "B&B node cap for labels")->check(CLI::PositiveNumber)->capture_default_str();
  train->add_option("--out", out_path, "output selector JSON")->required();
  add_common(train, true, true);

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a selector on training and test instances");
  std::string selector_path, test_path;
  eval->add_option("--selector", selector_path, "selector JSON")->required()->check(CLI::ExistingFile);
  eval->add_option("--train", train_path, "training instances JSON")->required()->check(CLI::ExistingFile);
  eval->add_option("--test", test_path, "test instances JSON")->required()->check(CLI::ExistingFile);
  eval->add_option("--node-cap", node_cap, "B&B node cap for labels")->check(CLI::PositiveNumber)->capture_default_str();
  eval->add_option("--out", out_path, "output metrics JSON (stdout when omitted)");
  add_common(eval, false, true);

  // experiment
  auto* exp = app.add_subcommand("experiment", "run the portfolio-size / training-size experiment");
  std::string config_path;
  exp->add_option("--config", config_path, "experiment config JSON (defaults when omitted)")->check(CLI::ExistingFile);
  exp->add_option("--out", out_path, "output prefix: writes <prefix>.csv, <prefix>.svg, <prefix>.manifest.json")
      ->required();
  add_common(exp, true, true);

  // bounds
  auto* bnd = app.add_subcommand("bounds", "evaluate sample-complexity bounds (up to universal constants)");
  BoundQuery q;
  std::string cls;
  std::size_t m = 16, ell = 64;
  double p = 2.0;
  bnd->add_option("--dbar", q.d_bar, "Natarajan dimension of the selector projection")->capture_default_str();
  bnd->add_option("--kappa", q.kappa, "portfolio size")->check(CLI::PositiveNumber)->capture_default_str();
  bnd->add_option("--t", q.t, "pieces per dual function")->check(CLI::PositiveNumber)->capture_default_str();
  bnd->add_option("--N", q.N, "sample count")->check(CLI::Range(1.0, 1e300))->capture_default_str();
  bnd->add_option("--H", q.H, "utility range")->check(CLI::NonNegativeNumber)->capture_default_str();
  bnd->add_option("--delta", q.delta, "failure probability")->check(CLI::Range(1e-300, 1.0))->capture_default_str();
  bnd->add_option("--alpha", q.alpha, "portfolio approximation factor")->capture_default_str();
  bnd->add_option("--beta", q.beta, "portfolio additive loss")->capture_default_str();
  bnd->add_option("--epsilon", q.epsilon, "selector loss against the portfolio oracle")->capture_default_str();
  bnd->add_option("--class", cls, "also report the Natarajan bound: linear, tree, or cluster")
      ->check(CLI::IsMember({"linear", "tree", "cluster"}));
  bnd->add_option("--m", m, "feature dimension for --class")->check(CLI::PositiveNumber)->capture_default_str();
  bnd->add_option("--ell", ell, "leaf count for --class tree")->check(CLI::PositiveNumber)->capture_default_str();
  bnd->add_option("--p", p, "norm for --class cluster")->check(CLI::Range(1.0, 1e300))->capture_default_str();
  bnd->add_option("--out", out_path, "output JSON (stdout when omitted)");

  // lowerbound
  auto* lb = app.add_subcommand("lowerbound", "lower-bound family: shattering check and gap experiment");
  std::size_t lb_kappa = 4;
  bool verify = false;
  std::vector<std::size_t> gap_n;
  std::size_t trials = 1000;
  std::string csv_path;
  lb->add_option("--kappa", lb_kappa, "portfolio size (>= 2)")->check(CLI::Range(2, 1 << 20))->capture_default_str();
  lb->add_flag("--verify", verify, "check shattering of the kappa points and Natarajan dimension 0");
  lb->add_option("--gap-N", gap_n, "sample sizes for the gap experiment")->check(CLI::PositiveNumber);
  lb->add_option("--trials", trials, "gap experiment trials")->check(CLI::PositiveNumber)->capture_default_str();
  lb->add_option("--csv", csv_path, "gap CSV path (kappa,N,trials,mean_gap); required with --gap-N");
  lb->add_option("--out", out_path, "verdict JSON (stdout when omitted)");
  add_common(lb, true, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kLibraryVersion << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n\n";
    const CLI::App* failing = &app;
    for (auto* sub : app.get_subcommands()) failing = sub;
    err << failing->help();
    return kExitUsage;
  }

  try {
    if (*gen) {
      const std::uint64_t s = resolve_seed(seed);
      std::vector<IpInstance> list;
      for (std::size_t k = 0; k < count; ++k) {
        const std::uint64_t sk = derive_seed(s, stream_tag("gen"), k);
        if (family == "mix") {
          list.push_back(draw_mixture_instance(sk));
        } else {
          const Family f = family_from_string(family);
          GeneratorSpec spec = GeneratorSpec::defaults(f, sk);
          if (items) spec.n_items = *items;
          if (bids) spec.n_bids = *bids;
          list.push_back(generate_instance(spec));
        }
      }
      write_json_file(out_path, instances_to_json(list));
    } else if (*duals) {
      const auto list = instances_from_json(read_json_file(in_path));
      if (list.empty()) throw ArgumentError("duals: no instances");
      std::vector<DualTrace> traces(list.size());
      parallel_for(list.size(), jobs, [&](std::size_t i) { traces[i] = dual_trace(list[i], node_cap, piece_cap); });
      std::vector<PiecewiseConstantFn> fns;
      Json arr = Json::array();
      for (std::size_t i = 0; i < traces.size(); ++i) {
        fns.push_back(traces[i].fn);
        Json j = to_json(traces[i]);
        j["instance"] = i;
        arr.push_back(j);
      }
      const PerformanceTable table = build_table(fns, Orientation::Minimize, static_cast<double>(node_cap));
      write_json_file(out_path, {{"version", kFormatVersion}, {"node_cap", node_cap}, {"duals", arr}, {"table", to_json(table)}});
    } else if (*port) {
      const Json doc = read_json_file(table_path);
      const PerformanceTable table = table_from_json(doc.contains("table") ? doc.at("table") : doc);
      Json j{{"version", kFormatVersion}, {"method", method}};
      Portfolio portfolio;
      SelectionMethod sm = SelectionMethod::Greedy;
      if (method == "greedy") {
        const GreedyResult g = greedy_select(table, kappa, fill);
        portfolio = g.portfolio;
        j["order"] = g.order;
        j["gains"] = g.gains;
      } else {
        portfolio = exhaustive_select(table, kappa);
        sm = SelectionMethod::Exhaustive;
      }
      j["portfolio"] = to_json(portfolio);
      // The portfolio oracle is the selector here, so epsilon is 0.
      const double oracle_avg = coverage(table, portfolio) / static_cast<double>(table.rows());
      j["report"] = to_json(optimality_report(table, portfolio, oracle_avg, sm));
      write_json_file(out_path, j);
    } else if (*train) {
      const auto list = instances_from_json(read_json_file(train_path));
      const Portfolio portfolio = portfolio_from_json(read_json_file(portfolio_path));
      const auto data = label_for(list, portfolio, node_cap, jobs);
      const std::uint64_t s = resolve_seed(seed);
      Selector sel = [&]() -> Selector {
        if (model == "linear") return train_linear(data.features, data.labels, portfolio);
        if (model == "cluster") return train_cluster(data.features, data.labels, portfolio, norm_p, s);
        fp.bootstrap = !no_bootstrap;
        fp.seed = s;
        return train_forest(data.features, data.labels, portfolio, fp, jobs);
      }();
      Json j = to_json(sel);
      j["node_cap"] = node_cap;
      write_json_file(out_path, j);
    } else if (*eval) {
      const Selector sel = selector_from_json(read_json_file(selector_path));
      const Portfolio& portfolio = portfolio_of(sel);
      const auto tr = label_for(instances_from_json(read_json_file(train_path)), portfolio, node_cap, jobs);
      const auto te = label_for(instances_from_json(read_json_file(test_path)), portfolio, node_cap, jobs);
      const double train_avg = average_utility(sel, tr.features, tr.labels);
      const double test_avg = average_utility(sel, te.features, te.labels);
      const double oracle_train = oracle_average(tr.labels);
      const double oracle_test = oracle_average(te.labels);
      emit({{"version", kFormatVersion},
            {"train_avg", train_avg},
            {"test_avg", test_avg},
            {"oracle_train_avg", oracle_train},
            {"oracle_test_avg", oracle_test},
            {"epsilon", train_avg - oracle_train},
            {"gap", measure_gap(sel, tr.features, tr.labels, te.features, te.labels)},
            {"train_count", tr.features.size()},
            {"test_count", te.features.size()}},
           out_path, out);
    } else if (*exp) {
      ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{} : config_from_json(read_json_file(config_path));
      // Precedence: --seed, then the config's own seed, then the environment.
      if (seed || config_path.empty()) cfg.seed = resolve_seed(seed);
      const ExperimentResult r = run_experiment(cfg, jobs);
      if (r.points.empty()) throw CapacityError("experiment produced no curve points");
      export_curves(r.points, out_path);
      write_json_file(out_path + ".manifest.json", manifest_json(cfg, r));
      for (const auto& w : r.warnings) err << "warning: " << w << '\n';
    } else if (*bnd) {
      Json reports = Json::array();
      const Json inputs = to_json(q);
      const double pdim = pdim_upper_bound(q);
      reports.push_back(bound_report("pdim_upper_bound", inputs, pdim));
      reports.push_back(bound_report("generalization_bound", inputs, generalization_bound(q, pdim)));
      const EndToEndBound e2e = end_to_end_bound(q);
      Json r = bound_report("end_to_end_slack", inputs, e2e.slack);
      r["alpha"] = e2e.alpha;
      r["beta"] = e2e.beta;
      r["epsilon"] = e2e.epsilon;
      r["generalization"] = e2e.generalization;
      reports.push_back(r);
      if (!cls.empty()) {
        Json in{{"class", cls}, {"m", m}, {"kappa", q.kappa}, {"ell", ell}, {"p", p}};
        reports.push_back(bound_report("natarajan_bound", in, natarajan_bound(selector_class_from_string(cls), m, q.kappa, ell, p)));
      }
      emit({{"version", kFormatVersion}, {"reports", reports}}, out_path, out);
    } else if (*lb) {
      if (!gap_n.empty() && csv_path.empty()) throw ArgumentError("lowerbound: --gap-N needs --csv");
      const LowerBoundFamily fam = lb_construct(lb_kappa);
      Json j{{"version", kFormatVersion}, {"kappa", lb_kappa}, {"points", fam.points}};
      if (verify) {
        j["shattered"] = lb_verify_shattering(fam);
        std::vector<std::size_t> idx(fam.points.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        j["natarajan_shatters_d1"] = verify_multiclass_shatter(lb_multiclass_projection(fam), idx, 1);
        j["witness"] = kShatterWitness;
      }
      if (!gap_n.empty()) {
        const std::uint64_t s = resolve_seed(seed);
        std::string csv = "kappa,N,trials,mean_gap\n";
        Json gaps = Json::array();
        for (std::size_t n : gap_n) {
          const double g = lb_gap_experiment(lb_kappa, n, trials, s, jobs);
          csv += std::to_string(lb_kappa) + ',' + std::to_string(n) + ',' + std::to_string(trials) + ',' +
                 detail::fmt_exact(g) + '\n';
          gaps.push_back({{"N", n}, {"mean_gap", g}});
        }
        detail::write_file(csv_path, csv);
        j["gap"] = gaps;
        j["seed"] = s;
      }
      emit(j, out_path, out);
    }
  } catch (const ArgumentError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitDomain;
  }
  return kExitOk;
}

}  // namespace portfolio_lab::cli
