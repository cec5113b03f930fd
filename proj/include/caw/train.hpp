// Copyright (c) 2026, the caw-reader authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "caw/data.hpp"
#include "caw/reader.hpp"
#include "caw/version.hpp"

namespace caw {

struct TrainConfig {
  ModelConfig model;
  double lr0 = 0.001;
  std::size_t batch = 64;
  double clip_norm = 10.0;
  std::size_t epochs = 10;
  std::uint64_t seed = 1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const {
    model.validate();
    if (lr0 <= 0 || batch == 0 || clip_norm <= 0 || epochs == 0)
      throw ConfigError("train config: lr0, batch, clip_norm and epochs must be positive");
  }
};

// Key=value echo embedded into every artifact for provenance.
inline std::string config_echo(const TrainConfig& c) {
  std::ostringstream os;
  os << "version=" << kVersion << " strategy=" << to_string(c.model.strategy)
     << " char_encoder=" << to_string(c.model.char_encoder) << " gamma=" << c.model.gamma
     << " word_dim=" << c.model.word_dim << " char_dim=" << c.model.char_dim
     << " char_hidden=" << c.model.char_hidden << " char_proj_dim=" << c.model.char_proj_dim
     << " hidden=" << c.model.hidden << " layers=" << c.model.layers
     << " init_gain=" << c.model.init_gain << " lr0=" << c.lr0
     << " batch=" << c.batch << " clip_norm=" << c.clip_norm << " epochs=" << c.epochs
     << " seed=" << c.seed;
  return os.str();
}

// ---- optimizer pieces ----

// Epochs are 1-based; the rate holds for the first two epochs and halves
// every epoch afterwards.
inline double lr_at(double lr0, std::size_t epoch) {
  if (epoch < 1) throw ConfigError("lr_at: epochs are 1-based");
  if (epoch <= 2) return lr0;
  return lr0 / std::pow(2.0, static_cast<double>(epoch - 2));
}

inline double global_grad_norm(const std::vector<Parameter*>& params) {
  double sq = 0.0;
  for (const Parameter* p : params)
    for (double g : p->grad.v) sq += g * g;
  return std::sqrt(sq);
}

// Scales all gradients by threshold/norm when the global L2 norm exceeds the
// threshold. Returns the pre-clip norm.
inline double clip_gradients(const std::vector<Parameter*>& params, double threshold) {
  const double norm = global_grad_norm(params);
  if (norm > threshold) {
    const double scale = threshold / norm;
    for (Parameter* p : params)
      for (double& g : p->grad.v) g *= scale;
  }
  return norm;
}

struct AdamState {
  std::vector<Tensor> m, v;
  std::size_t step = 0;

  void init(const std::vector<Parameter*>& params) {
    m.clear();
    v.clear();
    for (const Parameter* p : params) {
      m.emplace_back(p->value.shape);
      v.emplace_back(p->value.shape);
    }
    step = 0;
  }
};

// Standard bias-corrected update from the parameters' current gradients.
inline void adam_step(const std::vector<Parameter*>& params, AdamState& state, double lr,
                      double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
  if (state.m.size() != params.size()) throw ContractError("adam_step: state not initialized");
  ++state.step;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    if (!p.grad.same_shape(state.m[i]))
      throw ShapeError("adam_step: " + p.name + " " + p.grad.shape_str() + " vs " +
                       state.m[i].shape_str());
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double g = p.grad.v[k];
      double& m = state.m[i].v[k];
      double& v = state.v[i].v[k];
      m = beta1 * m + (1.0 - beta1) * g;
      v = beta2 * v + (1.0 - beta2) * g * g;
      p.value.v[k] -= lr * (m / bc1) / (std::sqrt(v / bc2) + eps);
    }
  }
}

// ---- evaluation ----

struct EvalResult {
  double accuracy = 0.0;
  std::size_t correct = 0;
  std::size_t total = 0;
  std::size_t unanswerable = 0;
};

inline EvalResult evaluate(CawReader& model, const std::vector<ClozeExample>& data,
                           std::size_t batch_size) {
  if (data.empty()) throw ConfigError("evaluate: empty dataset");
  EvalResult res;
  for (const Batch& b : make_batches(data, batch_size)) {
    for (std::size_t i = 0; i < b.examples.size(); ++i) {
      PaddedExample ex =
          make_padded(b.examples[i], model.config().punctuation, b.passage_len, b.query_len);
      Prediction pred = model.predict(ex);
      if (!pred.answerable) ++res.unanswerable;
      if (pred.answerable && pred.answer == ex.answer) ++res.correct;
      ++res.total;
    }
  }
  res.accuracy = static_cast<double>(res.correct) / static_cast<double>(res.total);
  return res;
}

// ---- training loop ----

struct MetricRow {
  std::size_t epoch;
  std::string split;
  double loss;      // NaN printed as empty for eval-only rows
  double accuracy;
  double lr;
};

inline std::string metrics_csv(const std::vector<MetricRow>& rows, const TrainConfig& cfg) {
  std::ostringstream os;
  os << "# " << config_echo(cfg) << "\n";
  os << "epoch,split,loss,accuracy,lr\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%zu,%s,%.9g,%.9g,%.9g\n", r.epoch, r.split.c_str(), r.loss,
                  r.accuracy, r.lr);
    os << buf;
  }
  return os.str();
}

struct TrainResult {
  std::vector<MetricRow> metrics;
  double best_valid_accuracy = 0.0;
  std::size_t best_epoch = 0;
  std::size_t skipped = 0;  // answers that never occur in their passage
  double first_loss = 0.0;
  double final_train_accuracy = 0.0;
};

// Runs the optimization loop, logging per-epoch training loss and validation
// accuracy. The model is left holding the best-validation parameters.
inline TrainResult train(CawReader& model, const TrainConfig& cfg,
                         const std::vector<ClozeExample>& train_data,
                         const std::vector<ClozeExample>& valid_data) {
  cfg.validate();
  if (train_data.empty()) throw ConfigError("train: empty dataset");
  auto params = model.parameters();
  AdamState adam;
  adam.init(params);
  Rng base(mix64(cfg.seed) ^ 0x7261696e);

  TrainResult result;
  std::vector<Tensor> best_params;
  bool have_first_loss = false;

  std::vector<ClozeExample> order = train_data;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double lr = lr_at(cfg.lr0, epoch);
    Rng shuffler = base.fork(epoch);
    shuffler.shuffle(order);

    double loss_sum = 0.0;
    std::size_t loss_count = 0, correct = 0, seen = 0;
    for (const Batch& b : make_batches(order, cfg.batch)) {
      for (Parameter* p : params) p->zero_grad();
      std::size_t n_valid = 0;
      double batch_loss = 0.0;
      for (std::size_t i = 0; i < b.examples.size(); ++i) {
        PaddedExample ex =
            make_padded(b.examples[i], cfg.model.punctuation, b.passage_len, b.query_len);
        if (!trainable_example(ex)) {
          ++result.skipped;
          continue;
        }
        Tape t;
        auto f = model.forward(t, ex);
        const auto it = std::find(f.candidates.begin(), f.candidates.end(), ex.answer);
        NodeId loss = pointer_sum_loss(t, f.r, f.cand_positions,
                                       static_cast<std::size_t>(it - f.candidates.begin()));
        t.backward(loss);
        batch_loss += t.value(loss).v[0];
        ++n_valid;
        Aggregated agg = aggregate(t.value(f.r).v, ex.passage, f.candidates);
        if (agg.answerable && agg.best == ex.answer) ++correct;
        ++seen;
      }
      if (n_valid == 0) continue;
      const double inv = 1.0 / static_cast<double>(n_valid);
      for (Parameter* p : params)
        for (double& g : p->grad.v) g *= inv;
      clip_gradients(params, cfg.clip_norm);
      adam_step(params, adam, lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
      loss_sum += batch_loss;
      loss_count += n_valid;
      if (!have_first_loss) {
        result.first_loss = batch_loss * inv;
        have_first_loss = true;
      }
    }

    const double train_loss = loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0;
    const double train_acc = seen ? static_cast<double>(correct) / static_cast<double>(seen) : 0.0;
    result.metrics.push_back({epoch, "train", train_loss, train_acc, lr});
    result.final_train_accuracy = train_acc;

    EvalResult va = evaluate(model, valid_data, cfg.batch);
    result.metrics.push_back({epoch, "valid", 0.0, va.accuracy, lr});
    if (best_params.empty() || va.accuracy > result.best_valid_accuracy) {
      result.best_valid_accuracy = va.accuracy;
      result.best_epoch = epoch;
      best_params.clear();
      for (Parameter* p : params) best_params.push_back(p->value);
    }
  }

  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best_params[i];
  return result;
}

// Builds the reader from the training split only: vocabulary, short list and
// character inventory all come from these examples.
inline CawReader build_reader(const TrainConfig& cfg, const std::vector<ClozeExample>& train_data) {
  if (train_data.empty()) throw ConfigError("build_reader: empty training split");
  std::vector<std::vector<std::string>> corpus;
  corpus.reserve(train_data.size() * 2);
  for (const auto& ex : train_data) {
    corpus.push_back(ex.passage);
    corpus.push_back(ex.query);
  }
  return CawReader(cfg.model, build_vocab(corpus), build_char_vocab(corpus), cfg.seed);
}

}  // namespace caw
