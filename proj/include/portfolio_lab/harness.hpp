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
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "portfolio_lab/bnb.hpp"
#include "portfolio_lab/core.hpp"
#include "portfolio_lab/generators.hpp"
#include "portfolio_lab/piecewise.hpp"
#include "portfolio_lab/portfolio.hpp"
#include "portfolio_lab/selectors.hpp"

namespace portfolio_lab {

enum class SelectorKind { Forest, Linear, Cluster };

inline std::string_view to_string(SelectorKind k) {
  switch (k) {
    case SelectorKind::Forest: return "forest";
    case SelectorKind::Linear: return "linear";
    case SelectorKind::Cluster: return "cluster";
  }
  return "?";
}

inline SelectorKind selector_kind_from_string(std::string_view s) {
  if (s == "forest") return SelectorKind::Forest;
  if (s == "linear") return SelectorKind::Linear;
  if (s == "cluster") return SelectorKind::Cluster;
  throw ArgumentError("unknown selector kind '" + std::string(s) + "'");
}

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::size_t n_dual_instances = 200;
  std::vector<std::size_t> train_sizes{30, 100, 300};
  std::size_t test_size = 500;
  std::size_t kappa_max = 15;
  std::size_t replications = 5;
  SelectorKind selector = SelectorKind::Forest;
  ForestParams forest;
  double norm_p = 2.0;
  GeneratorSpec family_a = GeneratorSpec::defaults(Family::A, 0);
  GeneratorSpec family_b = GeneratorSpec::defaults(Family::B, 0);
  std::size_t node_cap = 1000;
  std::size_t piece_cap = 10000;
  // Keep adding greedy picks after the marginal gain reaches zero.
  bool fill_portfolio = true;

  void validate() const {
    if (n_dual_instances < 1 || test_size < 1 || kappa_max < 1 || replications < 1 || node_cap < 1 ||
        piece_cap < 1) {
      throw ArgumentError("experiment counts must all be >= 1");
    }
    if (train_sizes.empty()) throw ArgumentError("experiment needs at least one train size");
    for (std::size_t n : train_sizes) {
      if (n < 1) throw ArgumentError("train sizes must be >= 1");
      if (selector == SelectorKind::Forest && n < forest.min_samples_leaf) {
        throw ArgumentError("train size below the forest's min_samples_leaf");
      }
      if (selector == SelectorKind::Cluster && n < kappa_max) {
        throw ArgumentError("cluster selector needs every train size >= kappa_max");
      }
    }
    if (family_a.family != Family::A || family_b.family != Family::B) {
      throw ArgumentError("generator specs must be for families A and B");
    }
    if (family_a.n_items < 1 || family_a.n_bids < 1 || family_b.n_items < 1 || family_b.n_bids < 1) {
      throw ArgumentError("generator sizes must be >= 1");
    }
    forest.validate();
    if (!(norm_p >= 1.0 && std::isfinite(norm_p))) throw ArgumentError("norm_p must be finite and >= 1");
  }
};

struct CurvePoint {
  std::size_t train_size = 0;
  std::size_t replication = 0;
  std::size_t kappa = 0;
  double test_ratio = 1.0;    // v_hat_kappa / v_hat_1
  double train_ratio = 1.0;   // v_tilde_kappa / v_tilde_1
  double oracle_ratio = 1.0;  // v_star_kappa / v_star_1

  friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

/// Unnormalized averages behind one curve point.
struct CurveDetail {
  std::size_t train_size = 0;
  std::size_t replication = 0;
  std::size_t kappa = 0;
  double test_avg = 0.0;
  double train_avg = 0.0;
  double oracle_test_avg = 0.0;
  double oracle_train_avg = 0.0;
  double epsilon = 0.0;  // train_avg - oracle_train_avg
};

struct ExperimentResult {
  std::vector<CurvePoint> points;
  std::vector<CurveDetail> details;
  std::vector<double> portfolio_order;  // greedy order
  std::vector<double> portfolio_gains;
  std::size_t candidate_count = 0;
  std::size_t dual_pieces_max = 0;
  std::size_t capped_dual_instances = 0;
  std::size_t capped_labels = 0;
  std::vector<std::string> warnings;
  std::map<std::string, double> timings;  // seconds per stage
};

namespace detail {

class StageTimer {
 public:
  explicit StageTimer(std::map<std::string, double>& sink) : sink_(sink), last_(Clock::now()) {}
  void lap(const std::string& stage) {
    const auto now = Clock::now();
    sink_[stage] += std::chrono::duration<double>(now - last_).count();
    last_ = now;
  }

 private:
  using Clock = std::chrono::steady_clock;
  std::map<std::string, double>& sink_;
  Clock::time_point last_;
};

struct LabeledSet {
  std::vector<FeatureVector> features;
  Matrix labels;  // rows x portfolio entries, columns in greedy order
  std::size_t capped = 0;
};

inline LabeledSet label_instances(const ExperimentConfig& cfg, const std::vector<std::uint64_t>& seeds,
                                  const std::vector<double>& order, std::size_t jobs) {
  LabeledSet out{std::vector<FeatureVector>(seeds.size()), Matrix(seeds.size(), order.size())};
  std::vector<std::size_t> capped(seeds.size(), 0);
  parallel_for(seeds.size(), jobs, [&](std::size_t i) {
    const IpInstance inst = draw_mixture_instance(seeds[i], cfg.family_a, cfg.family_b);
    out.features[i] = extract_features(inst);
    const auto sizes = tree_sizes_at(inst, order, cfg.node_cap);
    for (std::size_t g = 0; g < order.size(); ++g) {
      out.labels(i, g) = sizes[g];
      if (sizes[g] >= static_cast<double>(cfg.node_cap)) ++capped[i];
    }
  });
  for (std::size_t c : capped) out.capped += c;
  return out;
}

// Predicted scores of every entry (greedy order) for every row; entries are
// scored independently, so prefix selectors read a prefix of each row.
template <typename Sel>
Matrix score_rows(const Sel& sel, const std::vector<FeatureVector>& features,
                  const std::vector<std::size_t>& sorted_to_greedy) {
  Matrix out(features.size(), sorted_to_greedy.size());
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto s = sel.scores(features[i]);
    for (std::size_t j = 0; j < s.size(); ++j) out(i, sorted_to_greedy[j]) = s[j];
  }
  return out;
}

// Greedy-order entry chosen among the first kappa; earliest entry on ties.
inline std::size_t prefix_choice(const Matrix& scores, std::size_t row, std::size_t kappa) {
  std::size_t best = 0;
  for (std::size_t g = 1; g < kappa; ++g) {
    if (scores(row, g) < scores(row, best)) best = g;
  }
  return best;
}

inline double row_min_avg(const Matrix& labels, std::size_t kappa) {
  double total = 0.0;
  for (std::size_t i = 0; i < labels.rows(); ++i) {
    double best = labels(i, 0);
    for (std::size_t g = 1; g < kappa; ++g) best = std::min(best, labels(i, g));
    total += best;
  }
  return total / static_cast<double>(labels.rows());
}

}  // namespace detail

/// Builds the greedy portfolio from traced duals, then for every train size
/// and replication trains a performance model per entry on fresh labeled
/// instances and measures the prefix selectors on the training set, a fresh
/// test set, and the test-set oracle.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, std::size_t jobs = 1) {
  cfg.validate();
  ExperimentResult res;
  detail::StageTimer timer(res.timings);

  // Stage 1: portfolio from the dual set.
  std::vector<PiecewiseConstantFn> fns(cfg.n_dual_instances, PiecewiseConstantFn::constant(0.0, 1.0, 1.0));
  std::vector<char> dual_capped(cfg.n_dual_instances, 0);
  parallel_for(cfg.n_dual_instances, jobs, [&](std::size_t i) {
    const IpInstance inst =
        draw_mixture_instance(derive_seed(cfg.seed, stream_tag("dual-set"), i), cfg.family_a, cfg.family_b);
    DualTrace tr = dual_trace(inst, cfg.node_cap, cfg.piece_cap);
    dual_capped[i] = std::find(tr.capped.begin(), tr.capped.end(), true) != tr.capped.end();
    fns[i] = std::move(tr.fn);
  });
  for (const auto& f : fns) res.dual_pieces_max = std::max(res.dual_pieces_max, f.piece_count());
  res.capped_dual_instances = static_cast<std::size_t>(std::count(dual_capped.begin(), dual_capped.end(), 1));
  timer.lap("dual_trace");

  const PerformanceTable table = build_table(fns, Orientation::Minimize, static_cast<double>(cfg.node_cap));
  res.candidate_count = table.cols();
  const GreedyResult greedy = greedy_select(table, cfg.kappa_max, cfg.fill_portfolio);
  res.portfolio_order = greedy.order;
  res.portfolio_gains = greedy.gains;
  const std::size_t K = greedy.order.size();
  if (K < cfg.kappa_max) {
    res.warnings.push_back("portfolio has " + std::to_string(K) + " entries, fewer than kappa_max " +
                           std::to_string(cfg.kappa_max) + "; curves truncated");
  }
  const auto zero_gain = std::find_if(greedy.gains.begin(), greedy.gains.end(), [](double g) { return g <= 0.0; });
  if (zero_gain != greedy.gains.end()) {
    res.warnings.push_back("portfolio entries from " + std::to_string(zero_gain - greedy.gains.begin() + 1) +
                           " on add no training coverage");
  }
  if (res.capped_dual_instances > 0) {
    res.warnings.push_back(std::to_string(res.capped_dual_instances) + " dual instances hit the node cap");
  }
  timer.lap("portfolio");

  // sorted position -> greedy position
  const Portfolio sorted = Portfolio::make(greedy.order, std::max<std::size_t>(K, 1));
  std::vector<std::size_t> sorted_to_greedy(K);
  for (std::size_t j = 0; j < K; ++j) {
    sorted_to_greedy[j] = static_cast<std::size_t>(
        std::find(greedy.order.begin(), greedy.order.end(), sorted.params[j]) - greedy.order.begin());
  }

  // Stage 2 and 3: curves.
  for (std::size_t rep = 0; rep < cfg.replications; ++rep) {
    std::vector<std::uint64_t> test_seeds(cfg.test_size);
    for (std::size_t i = 0; i < cfg.test_size; ++i) test_seeds[i] = derive_seed(cfg.seed, stream_tag("test"), rep, i);
    const detail::LabeledSet test = detail::label_instances(cfg, test_seeds, greedy.order, jobs);
    res.capped_labels += test.capped;
    timer.lap("label_test");

    for (std::size_t n_train : cfg.train_sizes) {
      std::vector<std::uint64_t> train_seeds(n_train);
      for (std::size_t i = 0; i < n_train; ++i) {
        train_seeds[i] = derive_seed(cfg.seed, stream_tag("train"), n_train, rep, i);
      }
      const detail::LabeledSet train = detail::label_instances(cfg, train_seeds, greedy.order, jobs);
      res.capped_labels += train.capped;
      timer.lap("label_train");

      // Label columns in sorted-portfolio order for the selector trainers.
      LabelSet sorted_labels{Matrix(n_train, K), Orientation::Minimize};
      for (std::size_t i = 0; i < n_train; ++i) {
        for (std::size_t j = 0; j < K; ++j) sorted_labels.utilities(i, j) = train.labels(i, sorted_to_greedy[j]);
      }

      // chosen[k-1][i]: greedy-order entry picked by the kappa = k selector.
      std::vector<std::vector<std::size_t>> chosen_train(K), chosen_test(K);
      if (cfg.selector == SelectorKind::Cluster) {
        for (std::size_t k = 1; k <= K; ++k) {
          std::vector<double> prefix(greedy.order.begin(), greedy.order.begin() + static_cast<std::ptrdiff_t>(k));
          const Portfolio p = Portfolio::make(prefix, k);
          LabelSet lab{Matrix(n_train, k), Orientation::Minimize};
          std::vector<std::size_t> to_greedy(k);
          for (std::size_t j = 0; j < k; ++j) {
            to_greedy[j] = static_cast<std::size_t>(std::find(prefix.begin(), prefix.end(), p.params[j]) - prefix.begin());
            for (std::size_t i = 0; i < n_train; ++i) lab.utilities(i, j) = train.labels(i, to_greedy[j]);
          }
          const ClusterSelector sel = train_cluster(train.features, lab, p, cfg.norm_p,
                                                    derive_seed(cfg.seed, stream_tag("cluster"), n_train, rep, k));
          for (const auto& f : train.features) chosen_train[k - 1].push_back(to_greedy[select(sel, f).index]);
          for (const auto& f : test.features) chosen_test[k - 1].push_back(to_greedy[select(sel, f).index]);
        }
      } else {
        Matrix s_train, s_test;
        if (cfg.selector == SelectorKind::Linear) {
          const LinearSelector sel = train_linear(train.features, sorted_labels, sorted);
          s_train = detail::score_rows(sel, train.features, sorted_to_greedy);
          s_test = detail::score_rows(sel, test.features, sorted_to_greedy);
        } else {
          ForestParams fp = cfg.forest;
          fp.seed = derive_seed(cfg.seed, stream_tag("forest"), n_train, rep);
          const ForestSelector sel = train_forest(train.features, sorted_labels, sorted, fp, jobs);
          s_train = detail::score_rows(sel, train.features, sorted_to_greedy);
          s_test = detail::score_rows(sel, test.features, sorted_to_greedy);
        }
        for (std::size_t k = 1; k <= K; ++k) {
          for (std::size_t i = 0; i < n_train; ++i) chosen_train[k - 1].push_back(detail::prefix_choice(s_train, i, k));
          for (std::size_t i = 0; i < cfg.test_size; ++i) chosen_test[k - 1].push_back(detail::prefix_choice(s_test, i, k));
        }
      }
      timer.lap("train_select");

      std::vector<CurveDetail> block;
      for (std::size_t k = 1; k <= K; ++k) {
        CurveDetail d{n_train, rep, k};
        for (std::size_t i = 0; i < n_train; ++i) d.train_avg += train.labels(i, chosen_train[k - 1][i]);
        d.train_avg /= static_cast<double>(n_train);
        for (std::size_t i = 0; i < cfg.test_size; ++i) d.test_avg += test.labels(i, chosen_test[k - 1][i]);
        d.test_avg /= static_cast<double>(cfg.test_size);
        d.oracle_test_avg = detail::row_min_avg(test.labels, k);
        d.oracle_train_avg = detail::row_min_avg(train.labels, k);
        d.epsilon = d.train_avg - d.oracle_train_avg;
        block.push_back(d);
      }
      for (const auto& d : block) {
        res.points.push_back({n_train, rep, d.kappa, d.test_avg / block.front().test_avg,
                              d.train_avg / block.front().train_avg,
                              d.oracle_test_avg / block.front().oracle_test_avg});
        res.details.push_back(d);
      }
    }
  }
  if (res.capped_labels > 0) {
    res.warnings.push_back(std::to_string(res.capped_labels) + " labels hit the node cap");
  }
  return res;
}

/// |train average - test average| of the selector's achieved utility.
template <typename Sel>
double measure_gap(const Sel& selector, std::span<const FeatureVector> train_features, const LabelSet& train_labels,
                   std::span<const FeatureVector> test_features, const LabelSet& test_labels) {
  if (train_features.empty() || test_features.empty()) throw ArgumentError("measure_gap: empty sample");
  return std::abs(average_utility(selector, train_features, train_labels) -
                  average_utility(selector, test_features, test_labels));
}

// ---------------------------------------------------------------------------
// Export.

inline constexpr std::string_view kCurveCsvHeader = "train_size,replication,kappa,test_ratio,train_ratio,oracle_ratio";

namespace detail {

inline std::string fmt_exact(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string fmt_fixed(double v, int digits) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << content;
  out.flush();
  if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace detail

inline std::string curves_csv(const std::vector<CurvePoint>& points) {
  std::string out(kCurveCsvHeader);
  out += '\n';
  for (const auto& p : points) {
    out += std::to_string(p.train_size) + ',' + std::to_string(p.replication) + ',' + std::to_string(p.kappa) + ',' +
           detail::fmt_exact(p.test_ratio) + ',' + detail::fmt_exact(p.train_ratio) + ',' +
           detail::fmt_exact(p.oracle_ratio) + '\n';
  }
  return out;
}

inline std::vector<CurvePoint> parse_curves_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kCurveCsvHeader) throw ParseError("curves CSV: missing or wrong header");
  std::vector<CurvePoint> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 6) throw ParseError("curves CSV: line " + std::to_string(line_no) + " needs 6 fields");
    try {
      out.push_back({std::stoul(cells[0]), std::stoul(cells[1]), std::stoul(cells[2]), std::stod(cells[3]),
                     std::stod(cells[4]), std::stod(cells[5])});
    } catch (const std::logic_error&) {
      throw ParseError("curves CSV: bad number on line " + std::to_string(line_no));
    }
  }
  return out;
}

/// Line chart of replication means against kappa: a test and a train series
/// per train size plus one oracle series averaged over every run.
inline std::string curves_svg(const std::vector<CurvePoint>& points) {
  if (points.empty()) throw ArgumentError("curves_svg: no points");
  struct Acc {
    double sum = 0.0;
    std::size_t n = 0;
    void add(double v) {
      sum += v;
      ++n;
    }
    double mean() const { return sum / static_cast<double>(n); }
  };
  std::map<std::size_t, std::map<std::size_t, Acc>> test, train;
  std::map<std::size_t, Acc> oracle;
  std::size_t kmax = 1;
  double ymin = 1.0, ymax = 1.0;
  for (const auto& p : points) {
    test[p.train_size][p.kappa].add(p.test_ratio);
    train[p.train_size][p.kappa].add(p.train_ratio);
    oracle[p.kappa].add(p.oracle_ratio);
    kmax = std::max(kmax, p.kappa);
  }
  auto widen = [&](const std::map<std::size_t, Acc>& s) {
    for (const auto& [k, a] : s) {
      ymin = std::min(ymin, a.mean());
      ymax = std::max(ymax, a.mean());
    }
  };
  for (const auto& [n, s] : test) widen(s);
  for (const auto& [n, s] : train) widen(s);
  widen(oracle);
  if (ymax - ymin < 1e-9) {
    ymin -= 0.05;
    ymax += 0.05;
  }
  const double w = 640, h = 400, left = 60, right = 160, top = 20, bottom = 40;
  auto px = [&](std::size_t k) {
    return kmax == 1 ? left : left + (w - left - right) * static_cast<double>(k - 1) / static_cast<double>(kmax - 1);
  };
  auto py = [&](double v) { return top + (h - top - bottom) * (ymax - v) / (ymax - ymin); };
  static constexpr const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2"};

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" viewBox=\"0 0 640 400\">\n";
  out += "<rect x=\"0\" y=\"0\" width=\"640\" height=\"400\" fill=\"white\"/>\n";
  out += "<line x1=\"60\" y1=\"360\" x2=\"480\" y2=\"360\" stroke=\"black\"/>\n";
  out += "<line x1=\"60\" y1=\"20\" x2=\"60\" y2=\"360\" stroke=\"black\"/>\n";
  out += "<text x=\"270\" y=\"390\" font-size=\"12\">portfolio size</text>\n";
  out += "<text x=\"4\" y=\"14\" font-size=\"11\">ratio to kappa=1: " + detail::fmt_fixed(ymin, 3) + " .. " +
         detail::fmt_fixed(ymax, 3) + "</text>\n";
  std::size_t series = 0;
  double legend_y = 30;
  auto emit = [&](const std::map<std::size_t, Acc>& s, const std::string& label, const char* color, bool dashed) {
    out += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\"";
    if (dashed) out += " stroke-dasharray=\"4 3\"";
    out += " points=\"";
    bool first = true;
    for (const auto& [k, a] : s) {
      if (!first) out += ' ';
      first = false;
      out += detail::fmt_fixed(px(k), 2) + ',' + detail::fmt_fixed(py(a.mean()), 2);
    }
    out += "\"/>\n";
    out += "<text x=\"490\" y=\"" + detail::fmt_fixed(legend_y, 0) + "\" font-size=\"11\" fill=\"" + color + "\">" +
           label + "</text>\n";
    legend_y += 16;
    ++series;
  };
  std::size_t c = 0;
  for (const auto& [n, s] : test) {
    const char* color = palette[c++ % std::size(palette)];
    emit(s, "test N=" + std::to_string(n), color, false);
    emit(train[n], "train N=" + std::to_string(n), color, true);
  }
  emit(oracle, "oracle", "#000000", false);
  out += "</svg>\n";
  return out;
}

/// Writes <prefix>.csv and <prefix>.svg.
inline void export_curves(const std::vector<CurvePoint>& points, const std::string& path_prefix) {
  if (points.empty()) throw ArgumentError("export_curves: no points");
  detail::write_file(path_prefix + ".csv", curves_csv(points));
  detail::write_file(path_prefix + ".svg", curves_svg(points));
}

}  // namespace portfolio_lab
