// Copyright (c) 2026, the caw-reader authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "caw/autodiff.hpp"
#include "caw/gru.hpp"
#include "caw/vocab.hpp"

namespace caw {

enum class CharEncoderKind { rnn, cnn };

inline const char* to_string(CharEncoderKind k) {
  return k == CharEncoderKind::rnn ? "rnn" : "cnn";
}

namespace detail {

// Trailing PAD_CHAR is never part of a surface form; stripping it first makes
// batch padding neutral for both encoders.
inline std::vector<std::size_t> strip_trailing_pad(std::vector<std::size_t> ids) {
  while (!ids.empty() && ids.back() == CharVocabulary::kPadChar) ids.pop_back();
  return ids;
}

inline std::vector<NodeId> embed_chars(Tape& t, Parameter& char_table,
                                       const std::vector<std::size_t>& ids) {
  NodeId rows = t.gather_param(char_table, ids);
  const std::size_t d = char_table.value.cols();
  std::vector<NodeId> out;
  out.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i)
    out.push_back(t.reshape(t.gather(rows, {i}), {d}));
  return out;
}

}  // namespace detail

// Bidirectional GRU over the character sequence; the two final states are
// concatenated and passed through a fully connected layer.
struct CharRnnEncoder {
  BiGru gru;
  Parameter proj_w, proj_b;

  CharRnnEncoder() = default;
  CharRnnEncoder(std::size_t char_dim, std::size_t hidden, std::size_t out_dim, Rng& rng,
                 double gain = 1.0)
      : gru("charenc.gru", char_dim, hidden, rng, gain),
        proj_w("charenc.proj_w", Tensor({out_dim, 2 * hidden})),
        proj_b("charenc.proj_b", Tensor({out_dim})) {
    xavier_init(proj_w.value, 2 * hidden, out_dim, rng, gain);
  }

  NodeId encode(Tape& t, Parameter& char_table, const std::vector<std::size_t>& raw_ids) {
    std::vector<std::size_t> ids = detail::strip_trailing_pad(raw_ids);
    if (ids.empty()) throw ConfigError("char encoder: empty character sequence");
    std::vector<NodeId> xs = detail::embed_chars(t, char_table, ids);
    NodeId h = gru.final_state(t, xs);
    return t.affine(t.param(proj_w), h, t.param(proj_b));
  }

  void collect(std::vector<Parameter*>& out) {
    gru.collect(out);
    out.push_back(&proj_w);
    out.push_back(&proj_b);
  }
};

// Per-width tanh convolutions with one-max-pooling over time; pooled channels
// are concatenated and projected. Words shorter than the widest filter are
// right-padded with PAD_CHAR to that width; windows never extend past
// max(word length, widest width), so padding beyond the minimum cannot change
// the output.
struct CharCnnEncoder {
  std::vector<std::size_t> widths;
  std::size_t channels = 0;
  std::size_t char_dim = 0;
  std::vector<Parameter> filter_w;  // per width: [channels x width*char_dim]
  std::vector<Parameter> filter_b;  // per width: [channels]
  Parameter proj_w, proj_b;

  CharCnnEncoder() = default;
  CharCnnEncoder(std::size_t char_dim_, std::vector<std::size_t> widths_, std::size_t channels_,
                 std::size_t out_dim, Rng& rng, double gain = 1.0)
      : widths(std::move(widths_)), channels(channels_), char_dim(char_dim_) {
    if (widths.empty()) throw ConfigError("char cnn: need at least one filter width");
    for (std::size_t w : widths) {
      filter_w.emplace_back("charenc.cnn.w" + std::to_string(w), Tensor({channels, w * char_dim}));
      filter_b.emplace_back("charenc.cnn.b" + std::to_string(w), Tensor({channels}));
      xavier_init(filter_w.back().value, w * char_dim, channels, rng, gain);
    }
    proj_w = Parameter("charenc.proj_w", Tensor({out_dim, channels * widths.size()}));
    proj_b = Parameter("charenc.proj_b", Tensor({out_dim}));
    xavier_init(proj_w.value, channels * widths.size(), out_dim, rng, gain);
  }

  NodeId encode(Tape& t, Parameter& char_table, const std::vector<std::size_t>& raw_ids) {
    std::vector<std::size_t> ids = detail::strip_trailing_pad(raw_ids);
    if (ids.empty()) throw ConfigError("char encoder: empty character sequence");
    const std::size_t widest = *std::max_element(widths.begin(), widths.end());
    const std::size_t eff_len = std::max(ids.size(), widest);
    ids.resize(eff_len, CharVocabulary::kPadChar);

    NodeId emb = t.gather_param(char_table, ids);
    std::vector<NodeId> pooled;
    for (std::size_t wi = 0; wi < widths.size(); ++wi) {
      const std::size_t w = widths[wi];
      std::vector<NodeId> acts;
      for (std::size_t i = 0; i + w <= eff_len; ++i) {
        std::vector<std::size_t> win(w);
        for (std::size_t k = 0; k < w; ++k) win[k] = i + k;
        NodeId window = t.reshape(t.gather(emb, win), {w * char_dim});
        NodeId act = t.tanh_op(t.affine(t.param(filter_w[wi]), window, t.param(filter_b[wi])));
        acts.push_back(t.reshape(act, {1, channels}));
      }
      pooled.push_back(t.max_over_time(t.concat(acts, 0)));
    }
    NodeId features = t.concat(pooled);
    return t.affine(t.param(proj_w), features, t.param(proj_b));
  }

  void collect(std::vector<Parameter*>& out) {
    for (auto& p : filter_w) out.push_back(&p);
    for (auto& p : filter_b) out.push_back(&p);
    out.push_back(&proj_w);
    out.push_back(&proj_b);
  }
};

}  // namespace caw
