// Copyright (c) 2026, the caw-reader authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "caw/autodiff.hpp"
#include "caw/charenc.hpp"
#include "caw/vocab.hpp"

namespace caw {

// How the word path and the character path are joined per token. word_only
// is the word-embedding-only ablation baseline.
enum class JoinStrategy { word_only, concat, sum, mul };

inline const char* to_string(JoinStrategy s) {
  switch (s) {
    case JoinStrategy::word_only: return "word_only";
    case JoinStrategy::concat: return "concat";
    case JoinStrategy::sum: return "sum";
    case JoinStrategy::mul: return "mul";
  }
  return "?";
}

inline JoinStrategy parse_strategy(const std::string& s) {
  if (s == "word_only") return JoinStrategy::word_only;
  if (s == "concat") return JoinStrategy::concat;
  if (s == "sum") return JoinStrategy::sum;
  if (s == "mul") return JoinStrategy::mul;
  throw ConfigError("unknown strategy: " + s + " (want word_only|concat|sum|mul)");
}

inline CharEncoderKind parse_char_encoder(const std::string& s) {
  if (s == "rnn") return CharEncoderKind::rnn;
  if (s == "cnn") return CharEncoderKind::cnn;
  throw ConfigError("unknown char encoder: " + s + " (want rnn|cnn)");
}

// Per-token joint embedding. Members of the short list use their own row of
// the word table; everything else shares the trainable UNK row (row 0). The
// character path always reads the original surface form, so two filtered
// words keep distinct representations whenever their spellings differ.
struct JointEmbedder {
  JoinStrategy strategy = JoinStrategy::mul;
  Vocabulary vocab;
  ShortList shortlist;
  CharVocabulary chars;

  std::size_t word_dim = 0;
  std::size_t char_out = 0;  // 0 for word_only

  Parameter word_table;  // [s x word_dim], row 0 = UNK vector
  Parameter char_table;  // [n_chars x char_dim]
  std::optional<CharRnnEncoder> rnn;
  std::optional<CharCnnEncoder> cnn;

  struct Options {
    std::size_t word_dim = 200;
    std::size_t char_dim = 100;
    std::size_t char_hidden = 128;
    std::size_t char_proj_dim = 100;  // concat only; sum/mul project to word_dim
    CharEncoderKind encoder = CharEncoderKind::rnn;
    std::vector<std::size_t> cnn_widths{1, 2, 3};
    std::size_t cnn_channels = 50;
    double table_init = 0.05;  // uniform [-x, x] for both lookup tables
    double init_gain = 1.0;    // scales the xavier range of network weights
  };

  JointEmbedder() = default;

  JointEmbedder(JoinStrategy strat, Vocabulary v, double gamma, CharVocabulary cv,
                const Options& opt, Rng& rng)
      : strategy(strat), vocab(std::move(v)), chars(std::move(cv)), word_dim(opt.word_dim) {
    shortlist = apply_filter(vocab, gamma);
    word_table = Parameter("embed.word_table", Tensor({vocab.size(), word_dim}));
    for (double& x : word_table.value.v) x = rng.uniform(-opt.table_init, opt.table_init);
    if (strategy != JoinStrategy::word_only) {
      char_out = strategy == JoinStrategy::concat ? opt.char_proj_dim : word_dim;
      char_table = Parameter("embed.char_table", Tensor({chars.size(), opt.char_dim}));
      for (double& x : char_table.value.v) x = rng.uniform(-opt.table_init, opt.table_init);
      if (opt.encoder == CharEncoderKind::rnn)
        rnn.emplace(opt.char_dim, opt.char_hidden, char_out, rng, opt.init_gain);
      else
        cnn.emplace(opt.char_dim, opt.cnn_widths, opt.cnn_channels, char_out, rng, opt.init_gain);
      // under mul the char path and the UNK row start at the multiplicative
      // identity: JE(w) opens as e_w for members and as e_c for OOV words,
      // and training modulates from there
      if (strategy == JoinStrategy::mul) {
        Parameter& pb = rnn ? rnn->proj_b : cnn->proj_b;
        pb.value.fill(1.0);
        for (std::size_t c = 0; c < word_dim; ++c) word_table.value.at(0, c) = 1.0;
      }
    }
  }

  std::size_t joint_dim() const {
    return strategy == JoinStrategy::concat ? word_dim + char_out : word_dim;
  }

  NodeId word_path(Tape& t, const std::string& token) {
    const std::size_t id = word_id_for_embedding(token, vocab, shortlist);
    return t.reshape(t.gather_param(word_table, {id}), {word_dim});
  }

  NodeId char_path(Tape& t, const std::string& token) {
    const std::vector<std::size_t> ids = char_ids(token, chars);
    return rnn ? rnn->encode(t, char_table, ids) : cnn->encode(t, char_table, ids);
  }

  NodeId embed(Tape& t, const std::string& token) {
    NodeId w = word_path(t, token);
    switch (strategy) {
      case JoinStrategy::word_only: return w;
      case JoinStrategy::concat: return t.concat({w, char_path(t, token)});
      case JoinStrategy::sum: return t.add(w, char_path(t, token));
      case JoinStrategy::mul: return t.mul(w, char_path(t, token));
    }
    throw ContractError("embed: bad strategy");
  }

  void collect(std::vector<Parameter*>& out) {
    out.push_back(&word_table);
    if (strategy != JoinStrategy::word_only) {
      out.push_back(&char_table);
      if (rnn) rnn->collect(out);
      if (cnn) cnn->collect(out);
    }
  }
};

// Loads pretrained vectors in text format: "<word> <v1> ... <v_dw>" per line.
// Words missing from the vocabulary are skipped; vocabulary words missing
// from the file keep their random rows. Returns the number of rows replaced.
inline std::size_t load_pretrained_embeddings(Parameter& word_table, const Vocabulary& vocab,
                                              const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot read pretrained embeddings: " + path);
  const std::size_t dim = word_table.value.cols();
  std::string line;
  std::size_t lineno = 0, loaded = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (!vocab.contains(word)) continue;
    const std::size_t id = vocab.id_of(word);
    std::vector<double> vals;
    double x;
    while (ls >> x) vals.push_back(x);
    if (vals.size() != dim)
      throw ParseError("pretrained embeddings line " + std::to_string(lineno) + ": got " +
                       std::to_string(vals.size()) + " values, want " + std::to_string(dim));
    for (std::size_t c = 0; c < dim; ++c) word_table.value.at(id, c) = vals[c];
    ++loaded;
  }
  return loaded;
}

}  // namespace caw
