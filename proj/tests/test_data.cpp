// Copyright (c) 2026, the caw-reader authors
// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "caw/data.hpp"

using namespace caw;

namespace {
const std::string kFixture = std::string(CAW_FIXTURE_DIR) + "/cbt_two_blocks.txt";

// Answer oracle: the blanked entity is the token whose following context
// matches the query after the placeholder.
std::string oracle_answer(const ClozeExample& ex) {
  const std::size_t pos = placeholder_position(ex.query);
  std::string found;
  std::size_t matches = 0;
  for (std::size_t i = 0; i + ex.query.size() - pos <= ex.passage.size() + 1 && i < ex.passage.size(); ++i) {
    bool ok = true;
    for (std::size_t k = 1; k < ex.query.size() - pos; ++k) {
      if (i + k >= ex.passage.size() || ex.passage[i + k] != ex.query[pos + k]) {
        ok = false;
        break;
      }
    }
    if (ok) {
      found = ex.passage[i];
      ++matches;
    }
  }
  return matches == 1 ? found : std::string{};
}
}  // namespace

TEST_CASE("cbt fixture parses into two examples with ten candidates") {
  auto examples = load_cbt(kFixture);
  REQUIRE(examples.size() == 2);
  for (const auto& ex : examples) {
    CHECK(ex.candidates.size() == 10);
    CHECK(placeholder_position(ex.query) == 1);
    CHECK(!ex.passage.empty());
  }
  CHECK(examples[0].answer == "king");
  CHECK(examples[1].answer == "net");
  // hand count: block 1 line 1 has 10 tokens
  CHECK(examples[0].passage[0] == "once");
  CHECK(examples[0].passage[9] == ".");
}

TEST_CASE("cbt parse errors") {
  SECTION("missing candidate field names the line") {
    CHECK_THROWS_MATCHES(
        load_cbt(std::string(CAW_FIXTURE_DIR) + "/cbt_missing_candidates.txt"), ParseError,
        Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("21")));
  }
  SECTION("placeholder count must be exactly one") {
    CHECK_THROWS_AS(load_cbt(std::string(CAW_FIXTURE_DIR) + "/cbt_no_placeholder.txt"), ParseError);
  }
  SECTION("wrong line numbering") {
    std::istringstream in("2 hello world\n");
    CHECK_THROWS_AS(parse_cbt(in), ParseError);
  }
  SECTION("truncated block") {
    std::istringstream in("1 just one line .\n");
    CHECK_THROWS_AS(parse_cbt(in), ParseError);
  }
}

TEST_CASE("cbt round trip: parse -> serialize -> parse is identity") {
  auto first = load_cbt(kFixture);
  std::istringstream again(serialize_cbt(first));
  auto second = parse_cbt(again);
  CHECK(first == second);
}

TEST_CASE("jsonl round trip") {
  auto examples = load_cbt(kFixture);
  std::istringstream in(to_jsonl(examples));
  CHECK(parse_jsonl(in) == examples);
}

TEST_CASE("candidate derivation in whole-passage mode") {
  ClozeExample ex;
  ex.passage = {"ana", "took", "bol", ".", "eda", "hid", "gor", ".", "ana", "."};
  ex.query = {kPlaceholder, "hid", "gor", "."};
  ex.answer = "eda";
  auto cands = candidate_set(ex, default_punctuation());
  CHECK(cands == std::vector<std::string>{"ana", "took", "bol", "eda", "hid", "gor"});
  ex.candidates = {"eda", "ana"};
  CHECK(candidate_set(ex, default_punctuation()) == std::vector<std::string>{"eda", "ana"});
}

TEST_CASE("synthetic generation is seed-deterministic") {
  SyntheticSpec spec = synthetic_preset("small");
  SyntheticData a = generate_synthetic(spec);
  SyntheticData b = generate_synthetic(spec);
  CHECK(a.train == b.train);
  CHECK(a.valid == b.valid);
  CHECK(a.test == b.test);
  spec.seed = 99;
  SyntheticData c = generate_synthetic(spec);
  CHECK(a.train != c.train);
}

TEST_CASE("synthetic rare rate zero means high-frequency answers only") {
  SyntheticSpec spec = synthetic_preset("small");
  spec.rare_rate = 0.0;
  SyntheticData d = generate_synthetic(spec);
  // frequent entities are stem+suffix forms that recur; no "x"-coinages
  for (const auto& ex : d.test) CHECK(ex.answer.find('x') == std::string::npos);
}

TEST_CASE("synthetic rare answers fall outside the gamma=0.9 short list") {
  SyntheticSpec spec = synthetic_preset("small");
  spec.rare_rate = 0.5;
  spec.test = 64;
  SyntheticData d = generate_synthetic(spec);

  std::vector<std::vector<std::string>> corpus;
  for (const auto& ex : d.train) {
    corpus.push_back(ex.passage);
    corpus.push_back(ex.query);
  }
  Vocabulary v = build_vocab(corpus);
  ShortList sl = apply_filter(v, 0.9);

  std::size_t outside = 0;
  for (const auto& ex : d.test)
    if (word_id_for_embedding(ex.answer, v, sl) == 0) ++outside;
  CHECK(outside >= 31);
  CHECK(outside <= 33);  // exactly 50% +/- 1
}

TEST_CASE("synthetic answers are recoverable by the context-matching oracle") {
  SyntheticSpec spec = synthetic_preset("small");
  SyntheticData d = generate_synthetic(spec);
  std::size_t solved = 0, total = 0;
  for (const auto* split : {&d.train, &d.valid, &d.test})
    for (const auto& ex : *split) {
      ++total;
      if (oracle_answer(ex) == ex.answer) ++solved;
    }
  CHECK(solved == total);
}

TEST_CASE("synthetic train and test coinages are disjoint") {
  SyntheticSpec spec = synthetic_preset("small");
  SyntheticData d = generate_synthetic(spec);
  std::set<std::string> train_words;
  for (const auto& ex : d.train) train_words.insert(ex.passage.begin(), ex.passage.end());
  for (const auto& ex : d.test)
    if (ex.answer.find('x') != std::string::npos) CHECK(!train_words.count(ex.answer));
}

TEST_CASE("stats match a hand count") {
  ClozeExample a{{"w1", "w2", "w3", "w4"}, {kPlaceholder, "q"}, "w1", {}};
  ClozeExample b{{"w1", "w5"}, {kPlaceholder, "q", "z"}, "w5", {}};
  DatasetStats s = stats({a, b});
  CHECK(s.queries == 2);
  CHECK(s.avg_passage_words == Catch::Approx(3.0));
  CHECK(s.avg_query_words == Catch::Approx(2.5));
  CHECK(s.vocabulary == 8);  // w1..w5, XXXXX, q, z
}

TEST_CASE("batching pads to per-batch maxima and preserves content") {
  ClozeExample a{{"t1", "t2", "t3"}, {kPlaceholder, "v"}, "t1", {}};
  ClozeExample b{{"t1"}, {kPlaceholder, "v", "w"}, "t1", {}};
  ClozeExample c{{"t1", "t2"}, {"u", kPlaceholder}, "t2", {}};
  std::vector<ClozeExample> data{a, b, c};

  auto corpus = std::vector<std::vector<std::string>>{{"t1", "t2", "t3", "v", "w", "u"}};
  CharVocabulary cv = build_char_vocab(corpus);
  auto batches = make_batches(data, 2, &cv);

  REQUIRE(batches.size() == 2);
  CHECK(batches[0].examples.size() == 2);
  CHECK(batches[1].examples.size() == 1);

  // padding and masks
  const Batch& b0 = batches[0];
  CHECK(b0.passage_len == 3);
  CHECK(b0.query_len == 3);
  CHECK(b0.passage[1][1] == kPadToken);
  CHECK(b0.passage_mask[1] == Mask{1, 0, 0});
  CHECK(b0.query_mask[0] == Mask{1, 1, 0});
  CHECK(b0.placeholder == std::vector<std::size_t>{0, 0});
  CHECK(batches[1].placeholder == std::vector<std::size_t>{1});

  // char grid: "t1" has 2 chars, padded to batch char_len
  REQUIRE(!b0.passage_chars.empty());
  CHECK(b0.char_len == 2);
  CHECK(b0.passage_chars[0][0].size() == 2);
  CHECK(b0.passage_char_mask[1][0] == Mask{1, 1});

  // content preservation: concatenating unpadded examples reproduces order
  std::vector<ClozeExample> rebuilt;
  for (const auto& batch : batches)
    for (const auto& ex : batch.examples) rebuilt.push_back(ex);
  CHECK(rebuilt == data);
}

TEST_CASE("synthetic spec files parse and validate") {
  SECTION("key value and key=value forms with comments") {
    std::istringstream in(
        "# demo spec\n"
        "seed 7\n"
        "train=40\nvalid 10\ntest 20\n"
        "sentences 4\nrare_sentences 2\nrare_rate 0.25\n"
        "stems 10\nverbs 8\n"
        "word_dim 12\n");
    SyntheticSpec s = parse_synthetic_spec(in);
    CHECK(s.seed == 7);
    CHECK(s.train == 40);
    CHECK(s.rare_rate == 0.25);
    CHECK(s.overrides.at("word_dim") == "12");
  }
  SECTION("inconsistent spec rejected") {
    std::istringstream in("train 10\nvalid 5\ntest 5\nsentences 6\nstems 3\n");
    CHECK_THROWS_AS(parse_synthetic_spec(in), ConfigError);
  }
  SECTION("missing value rejected") {
    std::istringstream in("seed\n");
    CHECK_THROWS_AS(parse_synthetic_spec(in), ParseError);
  }
  SECTION("unknown preset rejected") {
    CHECK_THROWS_AS(synthetic_preset("huge"), ConfigError);
  }
}
