// Copyright (c) 2026, the caw-reader authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "caw/reader.hpp"
#include "caw/train.hpp"
#include "caw/version.hpp"
#include "caw/vocab.hpp"

namespace caw {

inline nlohmann::json config_to_json(const TrainConfig& c) {
  return nlohmann::json{{"strategy", to_string(c.model.strategy)},
                        {"char_encoder", to_string(c.model.char_encoder)},
                        {"gamma", c.model.gamma},
                        {"word_dim", c.model.word_dim},
                        {"char_dim", c.model.char_dim},
                        {"char_hidden", c.model.char_hidden},
                        {"char_proj_dim", c.model.char_proj_dim},
                        {"hidden", c.model.hidden},
                        {"layers", c.model.layers},
                        {"cnn_widths", c.model.cnn_widths},
                        {"cnn_channels", c.model.cnn_channels},
                        {"table_init", c.model.table_init},
                        {"init_gain", c.model.init_gain},
                        {"punctuation", c.model.punctuation},
                        {"lr0", c.lr0},
                        {"batch", c.batch},
                        {"clip_norm", c.clip_norm},
                        {"epochs", c.epochs},
                        {"seed", c.seed},
                        {"adam_beta1", c.adam_beta1},
                        {"adam_beta2", c.adam_beta2},
                        {"adam_eps", c.adam_eps}};
}

inline TrainConfig config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.model.strategy = parse_strategy(j.at("strategy").get<std::string>());
  c.model.char_encoder = parse_char_encoder(j.at("char_encoder").get<std::string>());
  c.model.gamma = j.at("gamma").get<double>();
  c.model.word_dim = j.at("word_dim").get<std::size_t>();
  c.model.char_dim = j.at("char_dim").get<std::size_t>();
  c.model.char_hidden = j.at("char_hidden").get<std::size_t>();
  c.model.char_proj_dim = j.at("char_proj_dim").get<std::size_t>();
  c.model.hidden = j.at("hidden").get<std::size_t>();
  c.model.layers = j.at("layers").get<std::size_t>();
  c.model.cnn_widths = j.at("cnn_widths").get<std::vector<std::size_t>>();
  c.model.cnn_channels = j.at("cnn_channels").get<std::size_t>();
  c.model.table_init = j.at("table_init").get<double>();
  c.model.init_gain = j.at("init_gain").get<double>();
  c.model.punctuation = j.at("punctuation").get<std::vector<std::string>>();
  c.lr0 = j.at("lr0").get<double>();
  c.batch = j.at("batch").get<std::size_t>();
  c.clip_norm = j.at("clip_norm").get<double>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.adam_beta1 = j.at("adam_beta1").get<double>();
  c.adam_beta2 = j.at("adam_beta2").get<double>();
  c.adam_eps = j.at("adam_eps").get<double>();
  return c;
}

// Self-describing container: config echo, vocabulary (with hash), character
// inventory and every parameter array with its shape. Doubles survive the
// JSON round trip bit-exactly.
inline void save_checkpoint(const std::string& path, CawReader& model, const TrainConfig& cfg) {
  nlohmann::json j;
  j["version"] = kVersion;
  j["config"] = config_to_json(cfg);
  const Vocabulary& vocab = model.embedder().vocab;
  j["vocab_hash"] = vocab_hash(vocab);
  j["vocab"] = serialize_vocab(vocab);
  std::vector<std::uint32_t> chars;
  for (char32_t c : model.embedder().chars.id_to_char) chars.push_back(static_cast<std::uint32_t>(c));
  j["chars"] = chars;
  nlohmann::json params = nlohmann::json::array();
  for (Parameter* p : model.parameters())
    params.push_back(nlohmann::json{{"name", p->name}, {"shape", p->value.shape}, {"values", p->value.v}});
  j["params"] = std::move(params);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write checkpoint: " + path);
  out << j.dump();
}

struct Checkpoint {
  TrainConfig config;
  CawReader model;
};

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot read checkpoint: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("corrupt checkpoint " + path + ": " + e.what());
  }
  try {
    TrainConfig cfg = config_from_json(j.at("config"));
    std::istringstream vin(j.at("vocab").get<std::string>());
    Vocabulary vocab = parse_vocab(vin);
    const std::string stored_hash = j.at("vocab_hash").get<std::string>();
    if (vocab_hash(vocab) != stored_hash)
      throw ParseError("checkpoint " + path + ": vocabulary does not match its stored hash");
    CharVocabulary chars;
    for (std::uint32_t c : j.at("chars").get<std::vector<std::uint32_t>>()) {
      chars.id_to_char.push_back(static_cast<char32_t>(c));
      if (chars.id_to_char.size() > 2)
        chars.char_to_id[static_cast<char32_t>(c)] = chars.id_to_char.size() - 1;
    }
    Checkpoint ck{cfg, CawReader(cfg.model, std::move(vocab), std::move(chars), cfg.seed)};
    std::unordered_map<std::string, const nlohmann::json*> by_name;
    for (const auto& pj : j.at("params")) by_name[pj.at("name").get<std::string>()] = &pj;
    for (Parameter* p : ck.model.parameters()) {
      auto it = by_name.find(p->name);
      if (it == by_name.end()) throw ParseError("checkpoint missing parameter: " + p->name);
      const auto shape = it->second->at("shape").get<std::vector<std::size_t>>();
      if (shape != p->value.shape)
        throw ParseError("checkpoint parameter " + p->name + ": shape mismatch");
      p->value.v = it->second->at("values").get<std::vector<double>>();
      p->grad = Tensor(p->value.shape);
    }
    return ck;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("corrupt checkpoint " + path + ": " + e.what());
  }
}

}  // namespace caw
