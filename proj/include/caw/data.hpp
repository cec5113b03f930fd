// Copyright (c) 2026, the caw-reader authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "caw/autodiff.hpp"
#include "caw/error.hpp"
#include "caw/rng.hpp"
#include "caw/vocab.hpp"

namespace caw {

inline constexpr const char* kPlaceholder = "XXXXX";
inline constexpr const char* kPadToken = "<pad>";

struct ClozeExample {
  std::vector<std::string> passage;
  std::vector<std::string> query;  // contains exactly one placeholder
  std::string answer;
  std::vector<std::string> candidates;  // empty = whole-passage candidate mode

  bool operator==(const ClozeExample&) const = default;
};

inline std::size_t placeholder_position(const std::vector<std::string>& query) {
  std::size_t pos = 0, count = 0;
  for (std::size_t i = 0; i < query.size(); ++i)
    if (query[i] == kPlaceholder) {
      pos = i;
      ++count;
    }
  if (count != 1)
    throw ParseError("query must contain exactly one " + std::string(kPlaceholder) + ", found " +
                     std::to_string(count));
  return pos;
}

inline std::vector<std::string> default_punctuation() {
  return {".", ",", "!", "?", ";", ":", "\"", "'", "、", "。", "，", "！", "？", "“", "”"};
}

// Candidate set: the supplied list when present, otherwise the distinct
// passage tokens minus punctuation, in first-occurrence order.
inline std::vector<std::string> candidate_set(const ClozeExample& ex,
                                              const std::vector<std::string>& punctuation) {
  if (!ex.candidates.empty()) return ex.candidates;
  std::unordered_set<std::string> punct(punctuation.begin(), punctuation.end());
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& tok : ex.passage)
    if (!punct.count(tok) && seen.insert(tok).second) out.push_back(tok);
  return out;
}

// ---- CBT-format files ----
//
// Blocks of 20 numbered context lines followed by line 21 carrying the query
// (with the XXXXX placeholder), the answer, and the |-separated candidate
// list, tab-separated. Blocks are separated by blank lines.

namespace detail {

inline std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

inline std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace detail

inline std::vector<ClozeExample> parse_cbt(std::istream& in) {
  std::vector<ClozeExample> out;
  std::string line;
  std::size_t lineno = 0;
  ClozeExample cur;
  std::size_t expect = 1;  // next numbered line within the block
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      if (expect != 1)
        throw ParseError("cbt line " + std::to_string(lineno) + ": block ended after line " +
                         std::to_string(expect - 1) + " of 21");
      continue;
    }
    const std::size_t sp = line.find_first_of(" \t");
    const std::string numtok = line.substr(0, sp);
    std::size_t num = 0;
    try {
      num = std::stoull(numtok);
    } catch (const std::exception&) {
      throw ParseError("cbt line " + std::to_string(lineno) + ": expected line number, got '" +
                       numtok + "'");
    }
    if (num != expect)
      throw ParseError("cbt line " + std::to_string(lineno) + ": expected line " +
                       std::to_string(expect) + ", got " + std::to_string(num));
    const std::string rest = sp == std::string::npos ? "" : line.substr(sp + 1);
    if (num < 21) {
      for (auto& tok : detail::split_ws(rest)) cur.passage.push_back(std::move(tok));
      ++expect;
      continue;
    }
    // line 21: query \t answer [\t ignored] \t candidates
    std::vector<std::string> fields = detail::split_on(rest, '\t');
    while (!fields.empty() && fields.back().empty()) fields.pop_back();
    if (fields.size() < 3)
      throw ParseError("cbt line " + std::to_string(lineno) +
                       ": expected query, answer and candidates, got " +
                       std::to_string(fields.size()) + " fields");
    cur.query = detail::split_ws(fields[0]);
    cur.answer = fields[1];
    for (auto& c : detail::split_on(fields.back(), '|'))
      if (!c.empty()) cur.candidates.push_back(std::move(c));
    if (cur.candidates.empty())
      throw ParseError("cbt line " + std::to_string(lineno) + ": empty candidate list");
    try {
      placeholder_position(cur.query);
    } catch (const ParseError& e) {
      throw ParseError("cbt line " + std::to_string(lineno) + ": " + e.what());
    }
    if (std::find(cur.candidates.begin(), cur.candidates.end(), cur.answer) ==
        cur.candidates.end())
      throw ParseError("cbt line " + std::to_string(lineno) + ": answer '" + cur.answer +
                       "' not among candidates");
    out.push_back(std::move(cur));
    cur = ClozeExample{};
    expect = 1;
  }
  if (expect != 1)
    throw ParseError("cbt: unexpected end of file inside a block after line " +
                     std::to_string(expect - 1));
  return out;
}

inline std::vector<ClozeExample> load_cbt(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot read dataset file: " + path);
  return parse_cbt(in);
}

inline std::string serialize_cbt(const std::vector<ClozeExample>& examples) {
  std::ostringstream os;
  for (const auto& ex : examples) {
    // repack passage tokens into 20 lines, breaking after sentence-final "."
    std::vector<std::vector<std::string>> lines(20);
    std::size_t li = 0;
    for (const auto& tok : ex.passage) {
      lines[li].push_back(tok);
      if (tok == "." && li + 1 < 20) ++li;
    }
    for (std::size_t i = 0; i < 20; ++i) {
      os << (i + 1);
      for (const auto& tok : lines[i]) os << ' ' << tok;
      os << '\n';
    }
    os << 21 << ' ';
    for (std::size_t i = 0; i < ex.query.size(); ++i) os << (i ? " " : "") << ex.query[i];
    os << '\t' << ex.answer << "\t\t";
    const auto& cands =
        ex.candidates.empty() ? candidate_set(ex, default_punctuation()) : ex.candidates;
    for (std::size_t i = 0; i < cands.size(); ++i) os << (i ? "|" : "") << cands[i];
    os << "\n\n";
  }
  return os.str();
}

inline void write_cbt(const std::string& path, const std::vector<ClozeExample>& examples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write dataset file: " + path);
  out << serialize_cbt(examples);
}

// ---- JSONL export: one record per line with passage/query/answer/candidates ----

inline std::string to_jsonl(const std::vector<ClozeExample>& examples) {
  std::ostringstream os;
  for (const auto& ex : examples) {
    nlohmann::json j{{"passage", ex.passage},
                     {"query", ex.query},
                     {"answer", ex.answer},
                     {"candidates", ex.candidates}};
    os << j.dump() << '\n';
  }
  return os.str();
}

inline std::vector<ClozeExample> parse_jsonl(std::istream& in) {
  std::vector<ClozeExample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("jsonl line " + std::to_string(lineno) + ": " + e.what());
    }
    ClozeExample ex;
    ex.passage = j.at("passage").get<std::vector<std::string>>();
    ex.query = j.at("query").get<std::vector<std::string>>();
    ex.answer = j.at("answer").get<std::string>();
    if (j.contains("candidates")) ex.candidates = j.at("candidates").get<std::vector<std::string>>();
    out.push_back(std::move(ex));
  }
  return out;
}

// ---- synthetic cloze stories ----
//
// Template stories: every sentence is "<entity> <verb> <object> ." where the
// entity and object share a morphological stem and the object is unique
// within the passage, so the blanked entity is always recoverable from the
// query by matching the object. A configurable fraction of queries blanks a
// sentence whose entity/object pair are fresh singleton coinages (rare
// words); coinage ranges are disjoint across splits, so test answers with
// rare morphology are guaranteed OOV.

struct SyntheticSpec {
  std::string name = "custom";
  std::uint64_t seed = 1;
  std::size_t train = 600, valid = 100, test = 200;
  std::size_t sentences = 6;       // per passage
  std::size_t rare_sentences = 3;  // coinage sentences per passage
  double rare_rate = 0.5;          // fraction of queries blanking a rare sentence
  std::size_t stems = 18;
  std::size_t entity_suffixes = 3;
  std::size_t object_suffixes = 3;
  std::size_t verbs = 12;
  // optional model/train keys carried from a spec file; CLI flags override
  std::map<std::string, std::string> overrides;

  void validate() const {
    if (train == 0 || valid == 0 || test == 0)
      throw ConfigError("synthetic spec: split sizes must be positive");
    if (sentences < 2) throw ConfigError("synthetic spec: need at least 2 sentences per passage");
    if (rare_sentences > sentences)
      throw ConfigError("synthetic spec: rare_sentences exceeds sentences per passage");
    if (rare_rate < 0.0 || rare_rate > 1.0)
      throw ConfigError("synthetic spec: rare_rate must be in [0,1]");
    if (rare_rate > 0.0 && rare_sentences == 0)
      throw ConfigError("synthetic spec: rare_rate > 0 needs rare_sentences > 0");
    if (stems < sentences)
      throw ConfigError("synthetic spec: need stems >= sentences for distinct stems per passage");
    if (verbs < sentences)
      throw ConfigError("synthetic spec: need verbs >= sentences for distinct verbs per passage");
    if (entity_suffixes == 0 || object_suffixes == 0)
      throw ConfigError("synthetic spec: suffix pools must be non-empty");
  }
};

struct SyntheticData {
  std::vector<ClozeExample> train, valid, test;
};

namespace detail {

inline std::vector<std::string> make_stems(std::size_t n, Rng& rng) {
  const std::string cons = "bdfglmnprstvz", vow = "aeiou";
  std::vector<std::string> all;
  for (char c1 : cons)
    for (char v : vow)
      for (char c2 : cons) all.push_back(std::string{c1, v, c2});
  rng.shuffle(all);
  if (n > all.size()) throw ConfigError("synthetic spec: too many stems requested");
  all.resize(n);
  return all;
}

inline std::vector<std::string> make_verbs(std::size_t n) {
  std::vector<std::string> pool{"took", "kept", "hid",  "found", "saw",  "lost",
                                "gave", "made", "held", "left",  "sent", "got"};
  for (std::size_t i = pool.size(); i < n; ++i) pool.push_back("did" + std::to_string(i));
  pool.resize(n);
  return pool;
}

inline std::string letter_code(std::size_t n) {
  std::string s;
  do {
    s += static_cast<char>('a' + n % 26);
    n /= 26;
  } while (n > 0);
  return s;
}

}  // namespace detail

inline std::vector<ClozeExample> generate_split(const SyntheticSpec& spec, std::size_t count,
                                                std::size_t coinage_base, Rng rng,
                                                const std::vector<std::string>& stems,
                                                const std::vector<std::string>& verbs) {
  static const std::vector<std::string> esuf{"o", "a", "u", "i", "e", "on", "el", "ette"};
  static const std::vector<std::string> osuf{"ik", "ek", "uk", "ok", "ak", "ix", "ax", "eck"};
  if (spec.entity_suffixes > esuf.size() || spec.object_suffixes > osuf.size())
    throw ConfigError("synthetic spec: suffix pool too large");

  std::size_t coinage = coinage_base;
  const auto n_rare = static_cast<std::size_t>(spec.rare_rate * static_cast<double>(count) + 0.5);
  std::vector<std::uint8_t> query_is_rare(count, 0);
  for (std::size_t i = 0; i < n_rare; ++i) query_is_rare[i] = 1;
  rng.shuffle(query_is_rare);

  std::vector<ClozeExample> out;
  out.reserve(count);
  for (std::size_t e = 0; e < count; ++e) {
    // distinct stems and verbs per passage
    std::vector<std::size_t> stem_ids(stems.size());
    for (std::size_t i = 0; i < stem_ids.size(); ++i) stem_ids[i] = i;
    rng.shuffle(stem_ids);
    std::vector<std::size_t> verb_ids(verbs.size());
    for (std::size_t i = 0; i < verb_ids.size(); ++i) verb_ids[i] = i;
    rng.shuffle(verb_ids);

    struct Sent {
      std::string entity, verb, object;
      bool rare;
    };
    // all rare sentences in a passage share one verb, so among them only the
    // object's characters identify the blanked sentence; frequent sentences
    // keep distinct verbs
    const std::string rare_verb = verbs[verb_ids[0]];
    std::vector<Sent> sents;
    for (std::size_t s = 0; s < spec.sentences; ++s) {
      const std::string& stem = stems[stem_ids[s]];
      Sent sent;
      sent.rare = s < spec.rare_sentences;
      sent.verb = sent.rare ? rare_verb : verbs[verb_ids[s]];
      if (sent.rare) {
        const std::string code = detail::letter_code(coinage++);
        sent.entity = stem + "x" + code;
        sent.object = stem + "z" + code;
      } else {
        sent.entity = stem + esuf[rng.below(spec.entity_suffixes)];
        sent.object = stem + osuf[rng.below(spec.object_suffixes)];
      }
      sents.push_back(std::move(sent));
    }
    rng.shuffle(sents);

    std::vector<std::size_t> rare_idx, freq_idx;
    for (std::size_t i = 0; i < sents.size(); ++i)
      (sents[i].rare ? rare_idx : freq_idx).push_back(i);
    const bool want_rare = query_is_rare[e] && !rare_idx.empty();
    const auto& pool = want_rare ? rare_idx : freq_idx;
    const std::size_t qi = pool[rng.below(pool.size())];

    ClozeExample ex;
    for (const auto& s : sents) {
      ex.passage.push_back(s.entity);
      ex.passage.push_back(s.verb);
      ex.passage.push_back(s.object);
      ex.passage.push_back(".");
    }
    ex.query = {kPlaceholder, sents[qi].verb, sents[qi].object, "."};
    ex.answer = sents[qi].entity;
    out.push_back(std::move(ex));
  }
  return out;
}

inline SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng base(spec.seed);
  Rng inv = base.fork(0);
  const auto stems = detail::make_stems(spec.stems, inv);
  const auto verbs = detail::make_verbs(spec.verbs);
  SyntheticData d;
  d.train = generate_split(spec, spec.train, 0, base.fork(1), stems, verbs);
  d.valid = generate_split(spec, spec.valid, 200000, base.fork(2), stems, verbs);
  d.test = generate_split(spec, spec.test, 400000, base.fork(3), stems, verbs);
  return d;
}

// ---- statistics ----

struct DatasetStats {
  std::size_t queries = 0;
  double avg_passage_words = 0.0;
  double avg_query_words = 0.0;
  std::size_t vocabulary = 0;

  bool operator==(const DatasetStats&) const = default;
};

inline DatasetStats stats(const std::vector<ClozeExample>& data) {
  DatasetStats s;
  s.queries = data.size();
  std::unordered_set<std::string> vocab;
  double ptotal = 0, qtotal = 0;
  for (const auto& ex : data) {
    ptotal += static_cast<double>(ex.passage.size());
    qtotal += static_cast<double>(ex.query.size());
    vocab.insert(ex.passage.begin(), ex.passage.end());
    vocab.insert(ex.query.begin(), ex.query.end());
    vocab.insert(ex.answer);
  }
  if (!data.empty()) {
    ptotal /= static_cast<double>(data.size());
    qtotal /= static_cast<double>(data.size());
  }
  s.avg_passage_words = ptotal;
  s.avg_query_words = qtotal;
  s.vocabulary = vocab.size();
  return s;
}

// ---- batching ----

// Token and character grids padded to per-batch maxima, with mask arrays.
// Masked (padded) positions are excluded from every softmax downstream.
struct Batch {
  std::vector<ClozeExample> examples;
  std::size_t passage_len = 0, query_len = 0, char_len = 0;
  std::vector<std::vector<std::string>> passage;
  std::vector<Mask> passage_mask;
  std::vector<std::vector<std::string>> query;
  std::vector<Mask> query_mask;
  std::vector<std::size_t> placeholder;
  // char id grids (present when a character vocabulary is supplied)
  std::vector<std::vector<std::vector<std::size_t>>> passage_chars;
  std::vector<std::vector<Mask>> passage_char_mask;
};

inline std::vector<Batch> make_batches(const std::vector<ClozeExample>& data, std::size_t size,
                                       const CharVocabulary* chars = nullptr) {
  if (size == 0) throw ConfigError("batch size must be positive");
  std::vector<Batch> out;
  for (std::size_t start = 0; start < data.size(); start += size) {
    Batch b;
    const std::size_t end = std::min(data.size(), start + size);
    for (std::size_t i = start; i < end; ++i) b.examples.push_back(data[i]);
    for (const auto& ex : b.examples) {
      b.passage_len = std::max(b.passage_len, ex.passage.size());
      b.query_len = std::max(b.query_len, ex.query.size());
      if (chars)
        for (const auto& tok : ex.passage)
          b.char_len = std::max(b.char_len, utf8_codepoints(tok).size());
    }
    for (const auto& ex : b.examples) {
      std::vector<std::string> p = ex.passage, q = ex.query;
      Mask pm(b.passage_len, 0), qm(b.query_len, 0);
      std::fill(pm.begin(), pm.begin() + static_cast<std::ptrdiff_t>(p.size()), 1);
      std::fill(qm.begin(), qm.begin() + static_cast<std::ptrdiff_t>(q.size()), 1);
      p.resize(b.passage_len, kPadToken);
      q.resize(b.query_len, kPadToken);
      b.placeholder.push_back(placeholder_position(ex.query));
      if (chars) {
        std::vector<std::vector<std::size_t>> grid;
        std::vector<Mask> cmask;
        for (const auto& tok : ex.passage) {
          auto ids = char_ids(tok, *chars);
          Mask m(b.char_len, 0);
          std::fill(m.begin(), m.begin() + static_cast<std::ptrdiff_t>(ids.size()), 1);
          ids.resize(b.char_len, CharVocabulary::kPadChar);
          grid.push_back(std::move(ids));
          cmask.push_back(std::move(m));
        }
        grid.resize(b.passage_len, std::vector<std::size_t>(b.char_len, CharVocabulary::kPadChar));
        cmask.resize(b.passage_len, Mask(b.char_len, 0));
        b.passage_chars.push_back(std::move(grid));
        b.passage_char_mask.push_back(std::move(cmask));
      }
      b.passage.push_back(std::move(p));
      b.query.push_back(std::move(q));
      b.passage_mask.push_back(std::move(pm));
      b.query_mask.push_back(std::move(qm));
    }
    out.push_back(std::move(b));
  }
  return out;
}

// ---- synthetic spec files: "key value" or "key=value" lines ----

inline SyntheticSpec parse_synthetic_spec(std::istream& in) {
  SyntheticSpec spec;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::replace(line.begin(), line.end(), '=', ' ');
    std::istringstream ls(line);
    std::string key, value;
    if (!(ls >> key)) continue;
    if (!(ls >> value))
      throw ParseError("synthetic spec line " + std::to_string(lineno) + ": missing value for '" +
                       key + "'");
    try {
      if (key == "name") spec.name = value;
      else if (key == "seed") spec.seed = std::stoull(value);
      else if (key == "train") spec.train = std::stoull(value);
      else if (key == "valid") spec.valid = std::stoull(value);
      else if (key == "test") spec.test = std::stoull(value);
      else if (key == "sentences") spec.sentences = std::stoull(value);
      else if (key == "rare_sentences") spec.rare_sentences = std::stoull(value);
      else if (key == "rare_rate") spec.rare_rate = std::stod(value);
      else if (key == "stems") spec.stems = std::stoull(value);
      else if (key == "entity_suffixes") spec.entity_suffixes = std::stoull(value);
      else if (key == "object_suffixes") spec.object_suffixes = std::stoull(value);
      else if (key == "verbs") spec.verbs = std::stoull(value);
      else spec.overrides[key] = value;
    } catch (const std::invalid_argument&) {
      throw ParseError("synthetic spec line " + std::to_string(lineno) + ": bad value for '" +
                       key + "'");
    }
  }
  spec.validate();
  return spec;
}

inline SyntheticSpec synthetic_preset(const std::string& name) {
  SyntheticSpec s;
  s.name = name;
  if (name == "small") {
    s.train = 400;
    s.valid = 60;
    s.test = 120;
    s.sentences = 4;
    s.rare_sentences = 2;
    s.stems = 12;
    s.verbs = 8;
    s.overrides = {{"word_dim", "12"}, {"char_dim", "6"},  {"char_hidden", "8"},
                   {"hidden", "12"},   {"layers", "2"},    {"epochs", "2"},
                   {"batch", "4"},     {"char_proj_dim", "6"}, {"init_gain", "2"}};
  } else if (name == "rare") {
    s.train = 3000;
    s.valid = 150;
    s.test = 300;
    s.sentences = 6;
    s.rare_sentences = 3;
    s.stems = 18;
    s.verbs = 12;
    s.overrides = {{"word_dim", "16"}, {"char_dim", "8"},  {"char_hidden", "10"},
                   {"hidden", "16"},   {"layers", "2"},    {"epochs", "2"},
                   {"batch", "4"},     {"char_proj_dim", "8"}, {"init_gain", "2"}};
  } else if (name == "sweep") {
    s.train = 1600;
    s.valid = 120;
    s.test = 240;
    s.sentences = 5;
    s.rare_sentences = 2;
    s.stems = 15;
    s.verbs = 10;
    s.overrides = {{"word_dim", "16"}, {"char_dim", "8"},  {"char_hidden", "10"},
                   {"hidden", "16"},   {"layers", "2"},    {"epochs", "2"},
                   {"batch", "4"},     {"char_proj_dim", "8"}, {"init_gain", "2"}};
  } else {
    throw ConfigError("unknown synthetic preset: " + name + " (want small|rare|sweep)");
  }
  return s;
}

// Accepts a preset name or a path to a key-value spec file.
inline SyntheticSpec load_synthetic_spec(const std::string& name_or_path) {
  if (name_or_path == "small" || name_or_path == "rare" || name_or_path == "sweep")
    return synthetic_preset(name_or_path);
  std::ifstream in(name_or_path, std::ios::binary);
  if (!in) throw ParseError("cannot read synthetic spec: " + name_or_path);
  SyntheticSpec s = parse_synthetic_spec(in);
  if (s.name == "custom") s.name = name_or_path;
  return s;
}

}  // namespace caw
