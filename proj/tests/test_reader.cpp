// Copyright (c) 2026, the caw-reader authors
// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>

#include "caw/reader.hpp"
#include "fd_util.hpp"

using namespace caw;

namespace {

using Corpus = std::vector<std::vector<std::string>>;

const Corpus kCorpus{{"ana", "took", "bol", ".", "eda", "hid", "gor", ".", "ana", "saw", "dug", "."},
                     {kPlaceholder, "hid", "gor", "."}};

ModelConfig tiny_config(JoinStrategy s, std::size_t layers = 2) {
  ModelConfig c;
  c.strategy = s;
  c.gamma = 1.0;
  c.word_dim = 4;
  c.char_dim = 3;
  c.char_hidden = 3;
  c.char_proj_dim = 3;
  c.hidden = 3;
  c.layers = layers;
  return c;
}

CawReader tiny_reader(JoinStrategy s, std::size_t layers = 2, std::uint64_t seed = 5) {
  return CawReader(tiny_config(s, layers), build_vocab(kCorpus), build_char_vocab(kCorpus), seed);
}

ClozeExample example() {
  ClozeExample ex;
  ex.passage = {"ana", "took", "bol", ".", "eda", "hid", "gor", ".", "ana", "saw", "dug", "."};
  ex.query = {kPlaceholder, "hid", "gor", "."};
  ex.answer = "eda";
  return ex;
}

}  // namespace

TEST_CASE("gated attention with a singleton query multiplies by q1") {
  Tape t;
  NodeId gp = t.constant(Tensor::of({2, 3}, {1, 2, 3, -1, 0.5, 2}));
  NodeId gq = t.constant(Tensor::of({1, 3}, {2, -1, 0.5}));
  Mask qm{1};
  GatedAttention ga = gated_attention(t, gp, gq, &qm);
  CHECK(t.value(ga.alpha).v == std::vector<double>{1, 1});
  CHECK(t.value(ga.x).v == std::vector<double>{2, -2, 1.5, -2, -0.5, 1});
}

TEST_CASE("gated attention identity when the query summary is all ones") {
  Tape t;
  NodeId gp = t.constant(Tensor::of({3, 2}, {1, 2, 3, 4, 5, 6}));
  NodeId gq = t.constant(Tensor::of({1, 2}, {1, 1}));  // beta_i = [1,1] for all i
  GatedAttention ga = gated_attention(t, gp, gq, nullptr);
  CHECK(t.value(ga.x).v == t.value(gp).v);
}

TEST_CASE("gated attention matches a scalar hand computation") {
  Tape t;
  NodeId gp = t.constant(Tensor::of({2, 2}, {1, 2, 3, 4}));
  NodeId gq = t.constant(Tensor::of({2, 2}, {1, 0, 0, 1}));
  GatedAttention ga = gated_attention(t, gp, gq, nullptr);

  // scores row i = [p_i0, p_i1]; alpha = softmax; beta = alpha * Gq; x = p . beta
  for (std::size_t i = 0; i < 2; ++i) {
    const double s0 = t.value(gp).at(i, 0), s1 = t.value(gp).at(i, 1);
    const double m = std::max(s0, s1);
    const double e0 = std::exp(s0 - m), e1 = std::exp(s1 - m);
    const double a0 = e0 / (e0 + e1), a1 = e1 / (e0 + e1);
    CHECK(t.value(ga.alpha).at(i, 0) == Catch::Approx(a0).margin(1e-10));
    CHECK(t.value(ga.alpha).at(i, 1) == Catch::Approx(a1).margin(1e-10));
    CHECK(t.value(ga.x).at(i, 0) == Catch::Approx(t.value(gp).at(i, 0) * a0).margin(1e-10));
    CHECK(t.value(ga.x).at(i, 1) == Catch::Approx(t.value(gp).at(i, 1) * a1).margin(1e-10));
  }
}

TEST_CASE("gated attention rejects an all-masked query") {
  Tape t;
  NodeId gp = t.constant(Tensor::of({1, 2}, {1, 2}));
  NodeId gq = t.constant(Tensor::of({1, 2}, {1, 2}));
  Mask qm{0};
  CHECK_THROWS_AS(gated_attention(t, gp, gq, &qm), MaskError);
}

TEST_CASE("pointer distribution") {
  SECTION("equal inner products give a uniform distribution") {
    Tape t;
    NodeId gp = t.constant(Tensor::of({3, 2}, {1, 2, 5, -1, 0, 9}));
    NodeId q = t.constant(Tensor::of({2}, {0, 0}));
    Mask m{1, 1, 1};
    const Tensor& r = t.value(pointer_distribution(t, gp, q, m));
    for (double x : r.v) CHECK(x == Catch::Approx(1.0 / 3).margin(1e-12));
  }
  SECTION("a dominant product saturates to one-hot") {
    Tape t;
    NodeId gp = t.constant(Tensor::of({3, 1}, {1000, 0, -3}));
    NodeId q = t.constant(Tensor::of({1}, {1}));
    Mask m{1, 1, 1};
    const Tensor& r = t.value(pointer_distribution(t, gp, q, m));
    CHECK(r.v[0] == Catch::Approx(1.0).margin(1e-12));
    CHECK(r.finite());
  }
  SECTION("matches an independent softmax oracle on a seeded 4-position case") {
    Rng rng(31);
    Tensor gp({4, 3});
    Tensor q({3});
    for (double& x : gp.v) x = rng.uniform(-2, 2);
    for (double& x : q.v) x = rng.uniform(-2, 2);
    Tape t;
    Mask m{1, 1, 1, 0};
    const Tensor& r = t.value(pointer_distribution(t, t.constant(gp), t.constant(q), m));
    // oracle: plain double logits + exp-normalize over unmasked
    std::vector<double> logits(4, 0.0);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 3; ++j) logits[i] += gp.at(i, j) * q.v[j];
    double mx = std::max({logits[0], logits[1], logits[2]});
    double z = 0;
    std::vector<double> expect(4, 0.0);
    for (std::size_t i = 0; i < 3; ++i) z += std::exp(logits[i] - mx);
    for (std::size_t i = 0; i < 3; ++i) expect[i] = std::exp(logits[i] - mx) / z;
    for (std::size_t i = 0; i < 4; ++i) CHECK(r.v[i] == Catch::Approx(expect[i]).margin(1e-12));
  }
  SECTION("empty passage is rejected") {
    Tape t;
    NodeId gp = t.constant(Tensor({0, 2}));
    NodeId q = t.constant(Tensor({2}));
    Mask m;
    CHECK_THROWS_AS(pointer_distribution(t, gp, q, m), ShapeError);
  }
}

TEST_CASE("aggregate") {
  SECTION("direct summation") {
    Aggregated a = aggregate({0.2, 0.3, 0.5}, {"a", "b", "a"}, {"a", "b"});
    CHECK(a.answerable);
    CHECK(a.probs[0].second == Catch::Approx(0.7).margin(1e-12));
    CHECK(a.probs[1].second == Catch::Approx(0.3).margin(1e-12));
    CHECK(a.best == "a");
  }
  SECTION("absent candidate keeps zero mass") {
    Aggregated a = aggregate({0.5, 0.5}, {"a", "a"}, {"a", "zz"});
    CHECK(a.probs[1].second == 0.0);
    CHECK(a.probs[0].second == Catch::Approx(1.0));
  }
  SECTION("no candidate in passage flags unanswerable") {
    Aggregated a = aggregate({1.0}, {"a"}, {"b", "c"});
    CHECK(!a.answerable);
  }
  SECTION("argmax ties break to the lexicographically first surface") {
    Aggregated a = aggregate({0.5, 0.5}, {"zed", "abe"}, {"zed", "abe"});
    CHECK(a.best == "abe");
  }
  SECTION("matches a brute-force position enumeration on random cases") {
    Rng rng(17);
    std::vector<std::string> words{"w0", "w1", "w2", "w3", "w4", "w5", "w6"};
    for (int rep = 0; rep < 200; ++rep) {
      std::vector<std::string> passage;
      for (int i = 0; i < 12; ++i) passage.push_back(words[rng.below(words.size())]);
      std::vector<std::string> cands(words.begin(), words.begin() + 5);
      std::vector<double> logits(12);
      for (double& x : logits) x = rng.uniform(-3, 3);
      double mx = *std::max_element(logits.begin(), logits.end());
      double z = 0;
      std::vector<double> r(12);
      for (int i = 0; i < 12; ++i) z += std::exp(logits[i] - mx);
      for (int i = 0; i < 12; ++i) r[i] = std::exp(logits[i] - mx) / z;

      Aggregated got = aggregate(r, passage, cands);

      // oracle: enumerate positions per word independently
      double total = 0;
      std::vector<double> mass(cands.size(), 0.0);
      for (std::size_t c = 0; c < cands.size(); ++c) {
        for (std::size_t i = 0; i < passage.size(); ++i)
          if (passage[i] == cands[c]) mass[c] += r[i];
        total += mass[c];
      }
      REQUIRE(got.probs.size() == cands.size());
      for (std::size_t c = 0; c < cands.size(); ++c) {
        const double expect = total > 0 ? mass[c] / total : 0.0;
        CHECK(std::abs(got.probs[c].second - expect) <= 1e-12);
      }
    }
  }
  SECTION("summation order permutation does not change the result") {
    Rng rng(23);
    std::vector<double> r(16);
    double z = 0;
    for (double& x : r) z += (x = rng.uniform(0, 1));
    for (double& x : r) x /= z;
    std::vector<std::string> passage(16, "a");
    for (std::size_t i = 0; i < 16; i += 2) passage[i] = "b";
    Aggregated fwd = aggregate(r, passage, {"a", "b"});
    // manual reversed-order summation
    double a_mass = 0, b_mass = 0;
    for (std::size_t i = 16; i-- > 0;) (passage[i] == "a" ? a_mass : b_mass) += r[i];
    const double total = a_mass + b_mass;
    CHECK(std::abs(fwd.probs[0].second - a_mass / total) <= 1e-12);
    CHECK(std::abs(fwd.probs[1].second - b_mass / total) <= 1e-12);
  }
}

TEST_CASE("pointer-sum loss values") {
  SECTION("certain answer has zero loss") {
    Tape t;
    NodeId r = t.constant(Tensor::of({1}, {1.0}));
    NodeId l = pointer_sum_loss(t, r, {{0}}, 0);
    CHECK(t.value(l).v[0] == Catch::Approx(0.0).margin(1e-12));
  }
  SECTION("P(A) = 0.5 costs ln 2") {
    Tape t;
    NodeId r = t.constant(Tensor::of({2}, {0.5, 0.5}));
    NodeId l = pointer_sum_loss(t, r, {{0}, {1}}, 0);
    CHECK(t.value(l).v[0] == Catch::Approx(std::log(2.0)).margin(1e-9));
  }
  SECTION("answer without positions is a contract violation") {
    Tape t;
    NodeId r = t.constant(Tensor::of({2}, {0.5, 0.5}));
    CHECK_THROWS_AS(pointer_sum_loss(t, r, {{}, {1}}, 0), ContractError);
  }
}

TEST_CASE("reader end-to-end probability conservation and masking") {
  for (JoinStrategy s : {JoinStrategy::word_only, JoinStrategy::mul}) {
    CawReader reader = tiny_reader(s);
    PaddedExample ex = make_padded(example(), default_punctuation(), 16, 6);
    Tape t;
    auto f = reader.forward(t, ex);
    const Tensor& r = t.value(f.r);
    REQUIRE(r.size() == 16);
    for (std::size_t i = ex.passage.size(); i < 16; ++i) CHECK(r.v[i] == 0.0);

    Prediction p = reader.predict(ex);
    double total = 0;
    for (auto& [w, prob] : p.probs) total += prob;
    CHECK(total == Catch::Approx(1.0).margin(1e-6));
  }
}

TEST_CASE("padding does not change the distribution over true positions") {
  CawReader reader = tiny_reader(JoinStrategy::mul);
  PaddedExample plain = make_padded(example(), default_punctuation());
  PaddedExample padded = make_padded(example(), default_punctuation(), 20, 9);
  Tape t1, t2;
  const Tensor& r1 = t1.value(reader.forward(t1, plain).r);
  const Tensor& r2 = t2.value(reader.forward(t2, padded).r);
  for (std::size_t i = 0; i < plain.passage.size(); ++i) CHECK(r1.v[i] == r2.v[i]);
}

TEST_CASE("stacked layers change the distribution") {
  CawReader one = tiny_reader(JoinStrategy::mul, 1, 7);
  CawReader three = tiny_reader(JoinStrategy::mul, 3, 7);
  PaddedExample ex = make_padded(example(), default_punctuation());
  CHECK(one.predict(ex).probs != three.predict(ex).probs);
}

TEST_CASE("reader determinism: same seed, bit-identical forward") {
  CawReader a = tiny_reader(JoinStrategy::concat, 2, 11);
  CawReader b = tiny_reader(JoinStrategy::concat, 2, 11);
  PaddedExample ex = make_padded(example(), default_punctuation());
  Tape ta, tb;
  CHECK(ta.value(a.forward(ta, ex).r).v == tb.value(b.forward(tb, ex).r).v);
}

TEST_CASE("full reader gradients match finite differences at toy dims") {
  CawReader reader = tiny_reader(JoinStrategy::mul, 2, 13);
  PaddedExample ex = make_padded(example(), default_punctuation());
  REQUIRE(trainable_example(ex));

  auto params = reader.parameters();
  for (auto* p : params) p->zero_grad();
  {
    Tape t;
    t.backward(reader.loss(t, ex));
  }
  auto forward = [&] {
    Tape t;
    return t.value(reader.loss(t, ex)).v[0];
  };
  auto bad = test::check_gradients(params, forward);
  if (!bad.empty()) {
    CAPTURE(bad[0].param, bad[0].index, bad[0].analytic, bad[0].numeric);
  }
  CHECK(bad.empty());
}

TEST_CASE("loss rejects answers outside the candidate set") {
  CawReader reader = tiny_reader(JoinStrategy::mul);
  ClozeExample ex = example();
  ex.answer = "not-a-passage-word";
  PaddedExample p = make_padded(ex, default_punctuation());
  CHECK(!trainable_example(p));
  Tape t;
  CHECK_THROWS_AS(reader.loss(t, p), ContractError);
}
