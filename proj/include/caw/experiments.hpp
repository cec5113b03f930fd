// Copyright (c) 2026, the caw-reader authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "caw/checkpoint.hpp"
#include "caw/train.hpp"

namespace caw {

struct RunData {
  std::vector<ClozeExample> train, valid, test;
};

inline RunData run_data_from(const SyntheticData& d) { return RunData{d.train, d.valid, d.test}; }

struct RunOutcome {
  TrainResult training;
  EvalResult valid_eval;
  EvalResult test_eval;  // total == 0 when no test split was given
};

// Train a fresh reader on the given splits and evaluate the best-validation
// parameters.
inline RunOutcome run_training(CawReader& model, const TrainConfig& cfg, const RunData& data) {
  RunOutcome out;
  const auto& valid = data.valid.empty() ? data.train : data.valid;
  out.training = train(model, cfg, data.train, valid);
  out.valid_eval = evaluate(model, valid, cfg.batch);
  if (!data.test.empty()) out.test_eval = evaluate(model, data.test, cfg.batch);
  return out;
}

// ---- strategy ablation: one row per join strategy, shared data and seed ----

struct StrategyResult {
  JoinStrategy strategy;
  double valid_acc = 0.0;
  double test_acc = 0.0;
  std::uint64_t seed = 0;
};

inline std::vector<StrategyResult> run_ablation(const TrainConfig& base, const RunData& data) {
  std::vector<StrategyResult> rows;
  for (JoinStrategy s :
       {JoinStrategy::word_only, JoinStrategy::concat, JoinStrategy::sum, JoinStrategy::mul}) {
    TrainConfig cfg = base;
    cfg.model.strategy = s;
    CawReader model = build_reader(cfg, data.train);
    RunOutcome out = run_training(model, cfg, data);
    rows.push_back({s, out.valid_eval.accuracy, out.test_eval.accuracy, cfg.seed});
  }
  return rows;
}

inline std::string ablation_csv(const std::vector<StrategyResult>& rows, const TrainConfig& cfg) {
  std::ostringstream os;
  os << "# " << config_echo(cfg) << "\n";
  os << "strategy,valid_acc,test_acc,seed\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%.9g,%.9g,%llu\n", to_string(r.strategy), r.valid_acc,
                  r.test_acc, static_cast<unsigned long long>(r.seed));
    os << buf;
  }
  return os.str();
}

// ---- filter-ratio sweep over gamma in {0.1, ..., 1.0} ----

struct SweepPoint {
  double gamma = 0.0;
  double valid_acc = 0.0;
  double test_acc = 0.0;
};

inline std::vector<double> sweep_grid() {
  return {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
}

// Each grid point trains n_seeds fresh models (seeds base, base+1, ...) on
// the same data and reports mean accuracies.
inline std::vector<SweepPoint> run_gamma_sweep(const TrainConfig& base, const RunData& data,
                                               std::size_t n_seeds) {
  if (n_seeds == 0) throw ConfigError("sweep: need at least one seed");
  std::vector<SweepPoint> points;
  for (double gamma : sweep_grid()) {
    SweepPoint pt;
    pt.gamma = gamma;
    for (std::size_t s = 0; s < n_seeds; ++s) {
      TrainConfig cfg = base;
      cfg.model.gamma = gamma;
      cfg.seed = base.seed + s;
      CawReader model = build_reader(cfg, data.train);
      RunOutcome out = run_training(model, cfg, data);
      pt.valid_acc += out.valid_eval.accuracy;
      pt.test_acc += out.test_eval.accuracy;
    }
    pt.valid_acc /= static_cast<double>(n_seeds);
    pt.test_acc /= static_cast<double>(n_seeds);
    points.push_back(pt);
  }
  return points;
}

inline std::string sweep_csv(const std::vector<SweepPoint>& points, const TrainConfig& cfg) {
  std::ostringstream os;
  os << "# " << config_echo(cfg) << "\n";
  os << "gamma,valid_acc,test_acc\n";
  char buf[96];
  for (const auto& p : points) {
    std::snprintf(buf, sizeof buf, "%.1f,%.9g,%.9g\n", p.gamma, p.valid_acc, p.test_acc);
    os << buf;
  }
  return os.str();
}

inline SweepPoint best_sweep_point(const std::vector<SweepPoint>& points) {
  SweepPoint best = points.at(0);
  for (const auto& p : points)
    if (p.valid_acc > best.valid_acc) best = p;
  return best;
}

}  // namespace caw
