// Copyright (c) 2026, the caw-reader authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "caw/autodiff.hpp"
#include "caw/data.hpp"
#include "caw/embed.hpp"
#include "caw/gru.hpp"
#include "caw/vocab.hpp"

namespace caw {

struct ModelConfig {
  JoinStrategy strategy = JoinStrategy::mul;
  CharEncoderKind char_encoder = CharEncoderKind::rnn;
  double gamma = 0.9;
  std::size_t word_dim = 200;
  std::size_t char_dim = 100;
  std::size_t char_hidden = 128;
  std::size_t char_proj_dim = 100;  // char output dim under concat
  std::size_t hidden = 128;         // contextual GRU units per direction
  std::size_t layers = 3;           // stacked attention hops
  std::vector<std::size_t> cnn_widths{1, 2, 3};
  std::size_t cnn_channels = 50;
  double table_init = 0.05;
  double init_gain = 1.0;
  std::vector<std::string> punctuation = default_punctuation();

  void validate() const {
    if (!(gamma > 0.0) || gamma > 1.0) throw ConfigError("gamma must be in (0,1]");
    if (layers == 0) throw ConfigError("need at least one attention layer");
    if (word_dim == 0 || hidden == 0) throw ConfigError("dims must be positive");
  }

  JointEmbedder::Options embed_options() const {
    JointEmbedder::Options o;
    o.word_dim = word_dim;
    o.char_dim = char_dim;
    o.char_hidden = char_hidden;
    o.char_proj_dim = char_proj_dim;
    o.encoder = char_encoder;
    o.cnn_widths = cnn_widths;
    o.cnn_channels = cnn_channels;
    o.table_init = table_init;
    o.init_gain = init_gain;
    return o;
  }
};

// One example as the model consumes it: true tokens plus padded lengths (the
// padded tail positions are masked out of every softmax and carry exactly
// zero probability).
struct PaddedExample {
  std::vector<std::string> passage;
  std::vector<std::string> query;
  std::size_t passage_pad = 0;  // >= passage.size()
  std::size_t query_pad = 0;    // >= query.size()
  std::size_t placeholder = 0;
  std::string answer;
  std::vector<std::string> candidates;
};

inline PaddedExample make_padded(const ClozeExample& ex, const std::vector<std::string>& punctuation,
                                 std::size_t passage_pad = 0, std::size_t query_pad = 0) {
  PaddedExample p;
  p.passage = ex.passage;
  p.query = ex.query;
  p.passage_pad = std::max(passage_pad, ex.passage.size());
  p.query_pad = std::max(query_pad, ex.query.size());
  p.placeholder = placeholder_position(ex.query);
  p.answer = ex.answer;
  p.candidates = candidate_set(ex, punctuation);
  return p;
}

// ---- pointer-sum aggregation ----

struct Aggregated {
  bool answerable = false;
  std::string best;
  std::vector<std::pair<std::string, double>> probs;  // per candidate, renormalized
};

inline std::vector<std::vector<std::size_t>> candidate_positions(
    const std::vector<std::string>& passage, const std::vector<std::string>& candidates) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t c = 0; c < candidates.size(); ++c) index.emplace(candidates[c], c);
  std::vector<std::vector<std::size_t>> pos(candidates.size());
  for (std::size_t i = 0; i < passage.size(); ++i) {
    auto it = index.find(passage[i]);
    if (it != index.end()) pos[it->second].push_back(i);
  }
  return pos;
}

// Per-word probability mass: the sum of r over each candidate's passage
// positions, renormalized over the candidate set. Candidates absent from the
// passage keep zero mass. Argmax ties go to the lexicographically first
// surface form. No candidate in the passage flags the example unanswerable.
inline Aggregated aggregate(const std::vector<double>& r, const std::vector<std::string>& passage,
                            const std::vector<std::string>& candidates) {
  if (candidates.empty()) throw ConfigError("aggregate: empty candidate set");
  auto pos = candidate_positions(passage, candidates);
  Aggregated out;
  double total = 0.0;
  std::vector<double> mass(candidates.size(), 0.0);
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    for (std::size_t i : pos[c]) mass[c] += r[i];
    total += mass[c];
  }
  if (total <= 0.0) {
    for (std::size_t c = 0; c < candidates.size(); ++c) out.probs.emplace_back(candidates[c], 0.0);
    return out;  // unanswerable
  }
  out.answerable = true;
  std::size_t best = 0;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    mass[c] /= total;
    out.probs.emplace_back(candidates[c], mass[c]);
    if (mass[c] > mass[best] || (mass[c] == mass[best] && candidates[c] < candidates[best]))
      best = c;
  }
  out.best = candidates[best];
  return out;
}

// ---- attention building blocks ----

struct GatedAttention {
  NodeId alpha;  // [k_p x k_q] attention over query per passage position
  NodeId beta;   // [k_p x 2h]  query summaries
  NodeId x;      // [k_p x 2h]  gated passage representation
};

// For each passage position i: attention weights over the query tokens
// (masked softmax of inner products), a query summary, and the element-wise
// gate x_i = p_i . beta_i.
inline GatedAttention gated_attention(Tape& t, NodeId g_p, NodeId g_q, const Mask* query_mask) {
  const Tensor& pv = t.value(g_p);
  const Tensor& qv = t.value(g_q);
  if (pv.rows() == 0 || qv.rows() == 0)
    throw ShapeError("gated_attention: empty inputs " + pv.shape_str() + ", " + qv.shape_str());
  GatedAttention ga;
  NodeId scores = t.matmul(g_p, t.transpose(g_q));
  ga.alpha = t.softmax(scores, query_mask);
  ga.beta = t.matmul(ga.alpha, g_q);
  ga.x = t.mul(g_p, ga.beta);
  return ga;
}

// Masked softmax over per-position inner products between the final passage
// representation and the query vector at the placeholder.
inline NodeId pointer_distribution(Tape& t, NodeId g_p_final, NodeId q_k, const Mask& passage_mask) {
  if (t.value(g_p_final).rows() == 0) throw ShapeError("pointer_distribution: empty passage");
  return t.softmax(t.matmul(g_p_final, q_k), &passage_mask);
}

// -log of the answer mass renormalized over the candidate positions.
inline NodeId pointer_sum_loss(Tape& t, NodeId r, const std::vector<std::vector<std::size_t>>& positions,
                               std::size_t answer_index) {
  if (answer_index >= positions.size() || positions[answer_index].empty())
    throw ContractError("loss: answer has no passage positions");
  std::vector<std::size_t> all;
  for (const auto& p : positions) all.insert(all.end(), p.begin(), p.end());
  NodeId num = t.select_sum(r, positions[answer_index]);
  NodeId den = t.select_sum(r, all);
  return t.sub(t.log_op(den), t.log_op(num));
}

// ---- the reader ----

struct AttentionLayer {
  BiGru passage_enc;
  BiGru query_enc;
};

struct Prediction {
  bool answerable = false;
  std::string answer;
  std::vector<std::pair<std::string, double>> probs;
};

class CawReader {
 public:
  CawReader(ModelConfig cfg, Vocabulary vocab, CharVocabulary chars, std::uint64_t seed)
      : cfg_(std::move(cfg)) {
    cfg_.validate();
    Rng rng(mix64(seed));
    embedder_ = JointEmbedder(cfg_.strategy, std::move(vocab), cfg_.gamma, std::move(chars),
                              cfg_.embed_options(), rng);
    const std::size_t je = embedder_.joint_dim();
    for (std::size_t k = 0; k < cfg_.layers; ++k) {
      const std::size_t p_in = k == 0 ? je : 2 * cfg_.hidden;
      layers_.push_back(AttentionLayer{
          BiGru("reader.l" + std::to_string(k) + ".passage", p_in, cfg_.hidden, rng, cfg_.init_gain),
          BiGru("reader.l" + std::to_string(k) + ".query", je, cfg_.hidden, rng, cfg_.init_gain)});
    }
  }

  const ModelConfig& config() const { return cfg_; }
  JointEmbedder& embedder() { return embedder_; }
  const JointEmbedder& embedder() const { return embedder_; }

  std::vector<Parameter*> parameters() {
    std::vector<Parameter*> ps;
    embedder_.collect(ps);
    for (auto& l : layers_) {
      l.passage_enc.collect(ps);
      l.query_enc.collect(ps);
    }
    return ps;
  }

  struct Forward {
    NodeId r = 0;  // [passage_pad]
    Mask passage_mask;
    std::vector<std::string> candidates;
    std::vector<std::vector<std::size_t>> cand_positions;
  };

  Forward forward(Tape& t, const PaddedExample& ex) {
    if (ex.passage.empty()) throw ShapeError("forward: empty passage");
    if (ex.query.empty()) throw ShapeError("forward: empty query");
    if (ex.placeholder >= ex.query.size()) throw ContractError("forward: placeholder out of range");

    std::vector<NodeId> je_p, je_q;
    je_p.reserve(ex.passage.size());
    std::unordered_map<std::string, NodeId> memo;  // identical surfaces share one embedding node
    auto embed_tok = [&](const std::string& tok) {
      auto it = memo.find(tok);
      if (it != memo.end()) return it->second;
      NodeId id = embedder_.embed(t, tok);
      memo.emplace(tok, id);
      return id;
    };
    for (const auto& tok : ex.passage) je_p.push_back(embed_tok(tok));
    for (const auto& tok : ex.query) je_q.push_back(embed_tok(tok));

    Mask p_mask(ex.passage_pad, 0), q_mask(ex.query_pad, 0);
    std::fill(p_mask.begin(), p_mask.begin() + static_cast<std::ptrdiff_t>(ex.passage.size()), 1);
    std::fill(q_mask.begin(), q_mask.begin() + static_cast<std::ptrdiff_t>(ex.query.size()), 1);

    const std::size_t two_h = 2 * cfg_.hidden;
    auto stack_padded = [&](const std::vector<NodeId>& rows, std::size_t pad_to) {
      std::vector<NodeId> parts;
      parts.reserve(rows.size() + 1);
      for (NodeId r : rows) parts.push_back(t.reshape(r, {1, two_h}));
      if (pad_to > rows.size()) parts.push_back(t.zeros({pad_to - rows.size(), two_h}));
      return t.concat(parts, 0);
    };

    std::vector<NodeId> p_in = je_p;
    NodeId g_p_final = 0, q_k = 0;
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      std::vector<NodeId> p_states = layers_[k].passage_enc.run(t, p_in);
      std::vector<NodeId> q_states = layers_[k].query_enc.run(t, je_q);
      NodeId g_p = stack_padded(p_states, ex.passage_pad);
      NodeId g_q = stack_padded(q_states, ex.query_pad);
      GatedAttention ga = gated_attention(t, g_p, g_q, &q_mask);
      if (k + 1 < layers_.size()) {
        p_in.clear();
        for (std::size_t i = 0; i < ex.passage.size(); ++i)
          p_in.push_back(t.reshape(t.gather(ga.x, {i}), {two_h}));
      } else {
        g_p_final = ga.x;
        q_k = q_states[ex.placeholder];
      }
    }

    Forward f;
    f.passage_mask = std::move(p_mask);
    f.r = pointer_distribution(t, g_p_final, q_k, f.passage_mask);
    f.candidates = ex.candidates.empty() ? candidate_set(ClozeExample{ex.passage, ex.query, ex.answer, {}},
                                                         cfg_.punctuation)
                                         : ex.candidates;
    f.cand_positions = candidate_positions(ex.passage, f.candidates);
    return f;
  }

  // Training loss; the caller guarantees the answer occurs in the passage
  // and the candidate set (examples violating that are skipped upstream).
  NodeId loss(Tape& t, const PaddedExample& ex) {
    Forward f = forward(t, ex);
    const auto it = std::find(f.candidates.begin(), f.candidates.end(), ex.answer);
    if (it == f.candidates.end()) throw ContractError("loss: answer not in candidate set");
    return pointer_sum_loss(t, f.r, f.cand_positions,
                            static_cast<std::size_t>(it - f.candidates.begin()));
  }

  Prediction predict(const PaddedExample& ex) {
    Tape t;
    Forward f = forward(t, ex);
    Aggregated agg = aggregate(t.value(f.r).v, ex.passage, f.candidates);
    return Prediction{agg.answerable, agg.best, std::move(agg.probs)};
  }

 private:
  ModelConfig cfg_;
  JointEmbedder embedder_;
  std::vector<AttentionLayer> layers_;
};

// True when the example can contribute a training term.
inline bool trainable_example(const PaddedExample& ex) {
  if (std::find(ex.candidates.begin(), ex.candidates.end(), ex.answer) == ex.candidates.end())
    return false;
  return std::find(ex.passage.begin(), ex.passage.end(), ex.answer) != ex.passage.end();
}

}  // namespace caw
