// Copyright (c) 2026, the caw-reader authors
// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>

#include "caw/embed.hpp"

using namespace caw;

namespace {

using Corpus = std::vector<std::vector<std::string>>;

const Corpus kCorpus{{"sun", "sun", "sun", "sun", "moon", "moon", "moon", "star", "star", "dust"}};

JointEmbedder make(JoinStrategy s, double gamma, JointEmbedder::Options opt, std::uint64_t seed = 21) {
  Rng rng(seed);
  return JointEmbedder(s, build_vocab(kCorpus), gamma, build_char_vocab(kCorpus), opt, rng);
}

JointEmbedder::Options small_opts() {
  JointEmbedder::Options o;
  o.word_dim = 4;
  o.char_dim = 3;
  o.char_hidden = 3;
  o.char_proj_dim = 2;
  return o;
}

void zero_char_path(JointEmbedder& e) {
  std::vector<Parameter*> ps;
  if (e.rnn) e.rnn->collect(ps);
  if (e.cnn) e.cnn->collect(ps);
  for (auto* p : ps) p->value.fill(0.0);
}

std::vector<double> embed_values(JointEmbedder& e, const std::string& tok) {
  Tape t;
  return t.value(e.embed(t, tok)).v;
}

}  // namespace

TEST_CASE("mul with an all-ones char encoding is the word path") {
  JointEmbedder e = make(JoinStrategy::mul, 1.0, small_opts());
  zero_char_path(e);
  e.rnn->proj_b.value.fill(1.0);  // e_c == 1 for every word
  Tape t;
  CHECK(t.value(e.embed(t, "sun")).v == t.value(e.word_path(t, "sun")).v);
}

TEST_CASE("sum with a zero char encoding is the word path") {
  JointEmbedder e = make(JoinStrategy::sum, 1.0, small_opts());
  zero_char_path(e);
  Tape t;
  CHECK(t.value(e.embed(t, "moon")).v == t.value(e.word_path(t, "moon")).v);
}

TEST_CASE("concat output dimension adds the char projection") {
  JointEmbedder::Options o;
  o.word_dim = 200;
  o.char_dim = 8;
  o.char_hidden = 4;
  o.char_proj_dim = 100;
  JointEmbedder e = make(JoinStrategy::concat, 1.0, o);
  CHECK(e.joint_dim() == 300);
  Tape t;
  CHECK(t.value(e.embed(t, "sun")).size() == 300);
}

TEST_CASE("word_only ignores characters entirely") {
  JointEmbedder e = make(JoinStrategy::word_only, 1.0, small_opts());
  CHECK(e.joint_dim() == 4);
  CHECK(!e.rnn);
  CHECK(!e.cnn);
}

TEST_CASE("non-members share the word path but differ through characters") {
  // gamma = 0.5 over 4 real words -> 2 members (sun, moon); star/dust filtered
  JointEmbedder e = make(JoinStrategy::sum, 0.5, small_opts());
  REQUIRE(word_id_for_embedding("star", e.vocab, e.shortlist) == 0);
  REQUIRE(word_id_for_embedding("dust", e.vocab, e.shortlist) == 0);

  Tape t;
  CHECK(t.value(e.word_path(t, "star")).v == t.value(e.word_path(t, "dust")).v);

  // componentwise oracle: joint must equal word path + char path assembled here
  const auto star_w = t.value(e.word_path(t, "star")).v;
  const auto star_c = t.value(e.char_path(t, "star")).v;
  auto joint = embed_values(e, "star");
  for (std::size_t i = 0; i < joint.size(); ++i)
    CHECK(joint[i] == Catch::Approx(star_w[i] + star_c[i]).margin(1e-12));

  CHECK(embed_values(e, "star") != embed_values(e, "dust"));
}

TEST_CASE("member embeddings are independent of gamma") {
  auto a = make(JoinStrategy::mul, 1.0, small_opts(), 77);
  auto b = make(JoinStrategy::mul, 0.5, small_opts(), 77);
  REQUIRE(b.shortlist.member[b.vocab.id_of("sun")]);
  CHECK(embed_values(a, "sun") == embed_values(b, "sun"));
}

TEST_CASE("word_only collapses OOV words; char strategies separate them") {
  JointEmbedder wo = make(JoinStrategy::word_only, 0.9, small_opts());
  CHECK(embed_values(wo, "zebra") == embed_values(wo, "quark"));
  JointEmbedder mu = make(JoinStrategy::mul, 0.9, small_opts());
  CHECK(embed_values(mu, "zebra") != embed_values(mu, "quark"));
}

TEST_CASE("UNK row receives gradient whenever a non-member appears") {
  JointEmbedder e = make(JoinStrategy::sum, 0.5, small_opts());
  e.word_table.zero_grad();
  Tape t;
  t.backward(t.sum_all(e.embed(t, "dust")));
  double unk_row = 0.0, member_row = 0.0;
  for (std::size_t c = 0; c < e.word_dim; ++c) {
    unk_row += std::abs(e.word_table.grad.at(0, c));
    member_row += std::abs(e.word_table.grad.at(e.vocab.id_of("sun"), c));
  }
  CHECK(unk_row > 0.0);
  CHECK(member_row == 0.0);
}

TEST_CASE("pretrained embedding loader") {
  const std::string path = std::string(CAW_FIXTURE_DIR) + "/pretrained_4d.txt";
  JointEmbedder e = make(JoinStrategy::word_only, 1.0, small_opts());
  const auto before_moon = embed_values(e, "moon");
  const std::size_t loaded = load_pretrained_embeddings(e.word_table, e.vocab, path);
  CHECK(loaded == 2);  // sun + star; "comet" not in vocab is skipped
  CHECK(embed_values(e, "sun") == std::vector<double>{0.5, -0.25, 0.125, 1.0});
  CHECK(embed_values(e, "star") == std::vector<double>{1, 2, 3, 4});
  CHECK(embed_values(e, "moon") == before_moon);  // absent words keep random init

  SECTION("dimension mismatch is a parse error naming the line") {
    std::string bad = std::string(CAW_FIXTURE_DIR) + "/pretrained_bad.txt";
    CHECK_THROWS_MATCHES(load_pretrained_embeddings(e.word_table, e.vocab, bad), ParseError,
                         Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("2")));
  }
}
