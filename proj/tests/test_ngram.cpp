#include "syneval/ngram.hpp"

#include <cmath>
#include <cstdio>

#include "doctest.h"
#include "syneval/rng.hpp"

using namespace syneval;

namespace {

// The two-sentence hand-oracle corpus. With ids <s>=0 </s>=1, five UNK
// classes 2..6, a=7 b=8 c=9 (V=10), the interpolated-KN derivation worked out
// by hand gives, for order 2:
//
//   raw bigrams: (<s>,a)=2 (a,b)=1 (a,c)=1 (b,</s>)=1 (c,</s>)=1
//     -> n1=4, n2=1, D2 = 4/(4+2) = 2/3
//   continuation unigrams: a=1 b=1 c=1 </s>=2
//     -> n1=3, n2=1, D1 = 3/(3+2) = 3/5, S1=5, 4 types
//   p1(w) = max(cont(w)-D1,0)/5 + (D1*4/5) * 1/10
//     p1(a)=p1(b)=p1(c) = 0.4/5 + 0.48/10          = 16/125
//     p1(</s>)          = 1.4/5 + 0.48/10          = 41/125
//     p1(zero-count id) = 0.48/10                  = 6/125
//   context "a": S=2, 2 types, lambda = (2/3)*2/2 = 2/3
//     p(b|a) = (1-2/3)/2 + (2/3)*16/125            = 63/250
//     p(</s>|a) = (2/3)*41/125                     = 82/375
//     p(zero|a) = (2/3)*6/125                      = 4/125
//   context "<s>": S=2, 1 type, lambda = (2/3)*1/2 = 1/3
//     p(a|<s>) = (2-2/3)/2 + (1/3)*16/125          = 266/375
//     p(b|<s>) = (1/3)*16/125                      = 16/375
//     p(</s>|<s>) = (1/3)*41/125                   = 41/375
//   context "b": S=1, 1 type, lambda = 2/3
//     p(</s>|b) = (1-2/3)/1 + (2/3)*41/125         = 69/125
//   unseen context: backs off to p1 directly.
struct HandOracle {
  Vocabulary vocab;
  NGramModel model;
  TokenId a, b, c;

  HandOracle() {
    std::vector<Sentence> corpus{{{"a", "b"}, "s1"}, {{"a", "c"}, "s2"}};
    vocab = build_vocabulary(corpus, 1);
    a = vocab.lookup("a");
    b = vocab.lookup("b");
    c = vocab.lookup("c");
    model = fit_kn(corpus, 2, vocab);
  }
};

constexpr double kTol = 1e-12;

}  // namespace

TEST_CASE("interpolated KN matches the hand derivation exactly") {
  HandOracle h;
  REQUIRE(h.vocab.size() == 10);
  CHECK(h.model.discount(2) == doctest::Approx(2.0 / 3.0).epsilon(kTol));
  CHECK(h.model.discount(1) == doctest::Approx(0.6).epsilon(kTol));

  const TokenId bos = Vocabulary::kBos, eos = Vocabulary::kEos;
  auto p = [&](std::vector<TokenId> ctx, TokenId w) { return ngram_prob(h.model, ctx, w); };

  // unigram continuation level via an unseen context
  const std::vector<TokenId> unseen{eos};
  CHECK(p(unseen, h.a) == doctest::Approx(16.0 / 125.0).epsilon(kTol));
  CHECK(p(unseen, h.b) == doctest::Approx(16.0 / 125.0).epsilon(kTol));
  CHECK(p(unseen, eos) == doctest::Approx(41.0 / 125.0).epsilon(kTol));
  CHECK(p(unseen, bos) == doctest::Approx(6.0 / 125.0).epsilon(kTol));

  CHECK(p({h.a}, h.b) == doctest::Approx(63.0 / 250.0).epsilon(kTol));
  CHECK(p({h.a}, h.c) == doctest::Approx(63.0 / 250.0).epsilon(kTol));
  CHECK(p({h.a}, h.a) == doctest::Approx((2.0 / 3.0) * 16.0 / 125.0).epsilon(kTol));
  CHECK(p({h.a}, eos) == doctest::Approx(82.0 / 375.0).epsilon(kTol));
  CHECK(p({h.a}, bos) == doctest::Approx(4.0 / 125.0).epsilon(kTol));

  CHECK(p({bos}, h.a) == doctest::Approx(266.0 / 375.0).epsilon(kTol));
  CHECK(p({bos}, h.b) == doctest::Approx(16.0 / 375.0).epsilon(kTol));
  CHECK(p({bos}, eos) == doctest::Approx(41.0 / 375.0).epsilon(kTol));

  CHECK(p({h.b}, eos) == doctest::Approx(69.0 / 125.0).epsilon(kTol));
  CHECK(p({h.c}, eos) == doctest::Approx(69.0 / 125.0).epsilon(kTol));
  CHECK(p({h.b}, h.a) == doctest::Approx((2.0 / 3.0) * 16.0 / 125.0).epsilon(kTol));

  SUBCASE("empty context behaves like <s> padding") {
    CHECK(p({}, h.a) == doctest::Approx(266.0 / 375.0).epsilon(kTol));
  }
}

TEST_CASE("full-vocabulary sums are exactly one for all contexts") {
  HandOracle h;
  for (TokenId ctx = 0; ctx < h.vocab.size(); ++ctx) {
    double sum = 0.0;
    for (TokenId w = 0; w < h.vocab.size(); ++w) sum += ngram_prob(h.model, {ctx}, w);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("markov property: long contexts truncate") {
  HandOracle h;
  const double expect = ngram_prob(h.model, {h.a}, h.b);
  CHECK(ngram_prob(h.model, {h.b, h.c, h.a}, h.b) == doctest::Approx(expect).epsilon(kTol));
}

TEST_CASE("order-5 normalization over random contexts") {
  Rng rng(3);
  std::vector<std::vector<TokenId>> ids;
  std::vector<Sentence> corpus;
  for (int i = 0; i < 60; ++i) {
    Sentence s;
    s.id = std::to_string(i);
    const std::size_t len = 1 + rng.next_below(8);
    for (std::size_t k = 0; k < len; ++k)
      s.tokens.push_back("w" + std::to_string(rng.next_below(12)));
    corpus.push_back(std::move(s));
  }
  const Vocabulary vocab = build_vocabulary(corpus, 1);
  const NGramModel m = fit_kn(corpus, 5, vocab);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<TokenId> ctx;
    const std::size_t len = rng.next_below(6);
    for (std::size_t k = 0; k < len; ++k)
      ctx.push_back(static_cast<TokenId>(rng.next_below(static_cast<std::uint64_t>(vocab.size()))));
    double sum = 0.0;
    for (TokenId w = 0; w < vocab.size(); ++w) sum += ngram_prob(m, ctx, w);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("seen continuations outrank unseen ones") {
  std::vector<Sentence> corpus(20, Sentence{{"x", "y", "z"}, "s"});
  const Vocabulary vocab = build_vocabulary(corpus, 1);
  const NGramModel m = fit_kn(corpus, 3, vocab);
  const TokenId x = vocab.lookup("x"), y = vocab.lookup("y"), z = vocab.lookup("z");
  CHECK(ngram_prob(m, {x}, y) > ngram_prob(m, {x}, z));
  CHECK(ngram_prob(m, {x, y}, z) > ngram_prob(m, {x, y}, x));
}

TEST_CASE("zero discount reduces to ML on seen contexts") {
  HandOracle h;
  std::vector<Sentence> corpus{{{"a", "b"}, "s1"}, {{"a", "c"}, "s2"}};
  const NGramModel ml = fit_kn(corpus, 2, h.vocab, 0.0);
  CHECK(ngram_prob(ml, {h.a}, h.b) == doctest::Approx(0.5).epsilon(kTol));
  CHECK(ngram_prob(ml, {h.a}, h.c) == doctest::Approx(0.5).epsilon(kTol));
  CHECK(ngram_prob(ml, {Vocabulary::kBos}, h.a) == doctest::Approx(1.0).epsilon(kTol));
  CHECK(ngram_prob(ml, {h.b}, Vocabulary::kEos) == doctest::Approx(1.0).epsilon(kTol));
}

TEST_CASE("surprisals telescope to the joint probability") {
  HandOracle h;
  const std::vector<TokenId> sent{h.a, h.b};
  const std::vector<double> s = ngram_surprisals(h.model, sent);
  REQUIRE(s.size() == 2);
  CHECK(s[0] == doctest::Approx(-std::log(266.0 / 375.0)).epsilon(1e-9));
  CHECK(s[1] == doctest::Approx(-std::log(63.0 / 250.0)).epsilon(1e-9));
  const double joint = ngram_prob(h.model, {}, h.a) * ngram_prob(h.model, {h.a}, h.b);
  CHECK(s[0] + s[1] == doctest::Approx(-std::log(joint)).epsilon(1e-9));
}

TEST_CASE("perplexity counts end-of-sentence events") {
  HandOracle h;
  const std::vector<std::vector<TokenId>> corpus{{h.a, h.b}, {h.a, h.c}};
  const double ppl = ngram_perplexity(h.model, corpus);
  double total = 0.0;
  total -= std::log(266.0 / 375.0) * 2;           // a after <s>, twice
  total -= std::log(63.0 / 250.0) * 2;            // b|a and c|a
  total -= std::log(69.0 / 125.0) * 2;            // </s> after b and after c
  CHECK(ppl == doctest::Approx(std::exp(total / 6.0)).epsilon(1e-9));
  CHECK_THROWS_AS(ngram_perplexity(h.model, {}), std::invalid_argument);
}

TEST_CASE("fit_kn validates arguments") {
  HandOracle h;
  CHECK_THROWS_AS(fit_kn({}, 2, h.vocab), std::invalid_argument);
  std::vector<Sentence> corpus{{{"a"}, "s"}};
  CHECK_THROWS_AS(fit_kn(corpus, 1, h.vocab), std::invalid_argument);
}

TEST_CASE("arpa round-trip reproduces every conditional probability") {
  HandOracle h;
  const std::string path = "model_test.arpa";
  save_arpa(h.model, path, h.vocab);
  const ArpaModel loaded = load_arpa(path, h.vocab);
  CHECK(loaded.order() == 2);
  for (TokenId ctx = 0; ctx < h.vocab.size(); ++ctx) {
    for (TokenId w = 0; w < h.vocab.size(); ++w) {
      const double expect = ngram_prob(h.model, {ctx}, w);
      const double got = loaded.prob({ctx}, w);
      CHECK(got == doctest::Approx(expect).epsilon(1e-12));
    }
  }
  std::remove(path.c_str());
}

TEST_CASE("arpa round-trip at order 5 on a random corpus") {
  Rng rng(17);
  std::vector<Sentence> corpus;
  for (int i = 0; i < 40; ++i) {
    Sentence s;
    s.id = std::to_string(i);
    const std::size_t len = 1 + rng.next_below(7);
    for (std::size_t k = 0; k < len; ++k)
      s.tokens.push_back("w" + std::to_string(rng.next_below(9)));
    corpus.push_back(std::move(s));
  }
  const Vocabulary vocab = build_vocabulary(corpus, 1);
  const NGramModel m = fit_kn(corpus, 5, vocab);
  const std::string path = "model5_test.arpa";
  save_arpa(m, path, vocab);
  const ArpaModel loaded = load_arpa(path, vocab);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<TokenId> ctx;
    const std::size_t len = rng.next_below(5);
    for (std::size_t k = 0; k < len; ++k)
      ctx.push_back(static_cast<TokenId>(rng.next_below(static_cast<std::uint64_t>(vocab.size()))));
    const TokenId w = static_cast<TokenId>(rng.next_below(static_cast<std::uint64_t>(vocab.size())));
    CHECK(loaded.prob(ctx, w) == doctest::Approx(ngram_prob(m, ctx, w)).epsilon(1e-12));
  }
  std::remove(path.c_str());
}
