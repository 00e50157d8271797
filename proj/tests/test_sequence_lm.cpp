#include "syneval/nnet/sequence_lm.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include "doctest.h"
#include "syneval/nnet/checkpoint.hpp"
#include "syneval/nnet/train.hpp"

using namespace syneval;
using namespace syneval::nnet;

namespace {

constexpr int kVocab = 14;  // 7 reserved + 7 content ids

std::vector<std::vector<TokenId>> pair_corpus(int sentences, std::uint64_t seed) {
  // Deterministic bigram structure: an even content token is always followed
  // by its odd partner, so context-aware models easily beat the unigram.
  Rng rng(seed);
  std::vector<std::vector<TokenId>> corpus;
  for (int i = 0; i < sentences; ++i) {
    std::vector<TokenId> s;
    const std::size_t pairs = 1 + rng.next_below(3);
    for (std::size_t k = 0; k < pairs; ++k) {
      const TokenId even = static_cast<TokenId>(7 + 2 * rng.next_below(3));
      s.push_back(even);
      s.push_back(even + 1);
    }
    corpus.push_back(std::move(s));
  }
  return corpus;
}

double unigram_perplexity(const std::vector<std::vector<TokenId>>& corpus) {
  std::map<TokenId, double> counts;
  double total = 0.0;
  for (const auto& s : corpus) {
    for (TokenId t : s) ++counts[t];
    ++counts[Vocabulary::kEos];
    total += static_cast<double>(s.size()) + 1.0;
  }
  double entropy = 0.0;
  for (const auto& [t, c] : counts) {
    (void)t;
    const double p = c / total;
    entropy -= p * std::log(p);
  }
  return std::exp(entropy);
}

template <class Model>
std::string checkpoint_bytes(const Model& m) {
  const std::string path = "ck_tmp.bin";
  save_checkpoint(path, "test", "{}", m.params());
  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::remove(path.c_str());
  return bytes;
}

}  // namespace

TEST_CASE("full tiny models pass gradient checks") {
  const std::vector<TokenId> sent{7, 9, 8, 10};
  SUBCASE("recurrent") {
    RecurrentDims dims{2, 5, 4};
    RecurrentLM<double> lm(kVocab, dims, 3);
    Rng rng(101);
    randomize_store(lm.params(), rng, 0.4);
    const double err = grad_check<double>(
        [&](Graph<double>& g) {
          std::size_t n = 0;
          return lm.sequence_loss(g, sent, 0.0, nullptr, &n);
        },
        lm.params(), 1e-4);
    CHECK(err < 1e-4);
  }
  SUBCASE("attention") {
    AttentionDims dims{2, 2, 6, 16};
    AttentionLM<double> lm(kVocab, dims, 3);
    Rng rng(101);
    randomize_store(lm.params(), rng, 0.4);
    const double err = grad_check<double>(
        [&](Graph<double>& g) {
          std::size_t n = 0;
          return lm.sequence_loss(g, sent, 0.0, nullptr, &n);
        },
        lm.params(), 1e-4);
    CHECK(err < 1e-4);
  }
}

TEST_CASE("tape loss equals the sum of raw-path surprisals") {
  const std::vector<TokenId> sent{7, 9, 8, 10, 7};
  SUBCASE("recurrent") {
    RecurrentLM<double> lm(kVocab, RecurrentDims{2, 8, 6}, 11);
    Graph<double> g(&lm.params());
    std::size_t n = 0;
    const double tape = g.val(lm.sequence_loss(g, sent, 0.0, nullptr, &n))(0, 0);
    const auto raw = lm.sentence_surprisals(sent, true);
    CHECK(n == raw.size());
    double total = 0.0;
    for (double x : raw) total += x;
    CHECK(tape == doctest::Approx(total).epsilon(1e-10));
  }
  SUBCASE("attention") {
    AttentionLM<double> lm(kVocab, AttentionDims{2, 2, 8, 16}, 11);
    Graph<double> g(&lm.params());
    std::size_t n = 0;
    const double tape = g.val(lm.sequence_loss(g, sent, 0.0, nullptr, &n))(0, 0);
    const auto raw = lm.sentence_surprisals(sent, true);
    double total = 0.0;
    for (double x : raw) total += x;
    CHECK(tape == doctest::Approx(total).epsilon(1e-10));
  }
}

TEST_CASE("next_token_dist sums to one over random prefixes") {
  RecurrentLM<float> rec(kVocab, RecurrentDims{2, 12, 8}, 5);
  AttentionLM<float> att(kVocab, AttentionDims{2, 2, 12, 64}, 5);
  Rng rng(77);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<TokenId> prefix;
    const std::size_t len = rng.next_below(8);
    for (std::size_t i = 0; i < len; ++i)
      prefix.push_back(static_cast<TokenId>(rng.next_below(kVocab)));
    const Eigen::VectorXd dist =
        (trial % 2) == 0 ? next_token_dist(rec, prefix) : next_token_dist(att, prefix);
    CHECK(std::abs(dist.sum() - 1.0) < 1e-6);
    CHECK(dist.minCoeff() >= 0.0);
  }
  SUBCASE("deterministic and conditioned on <s> for the empty prefix") {
    const Eigen::VectorXd a = next_token_dist(rec, {});
    const Eigen::VectorXd b = next_token_dist(rec, {});
    CHECK(a == b);
  }
}

TEST_CASE("initialized model perplexity is near the vocabulary size") {
  const auto corpus = pair_corpus(50, 1);
  SUBCASE("recurrent") {
    RecurrentLM<float> lm(kVocab, RecurrentDims{2, 16, 12}, 9);
    const double ppl = perplexity(lm, corpus);
    CHECK(ppl > kVocab * 0.8);
    CHECK(ppl < kVocab * 1.2);
  }
  SUBCASE("attention") {
    AttentionLM<float> lm(kVocab, AttentionDims{2, 2, 12, 64}, 9);
    const double ppl = perplexity(lm, corpus);
    CHECK(ppl > kVocab * 0.8);
    CHECK(ppl < kVocab * 1.2);
  }
}

TEST_CASE("training beats the unigram baseline") {
  const auto corpus = pair_corpus(400, 2);
  const auto dev = pair_corpus(80, 3);
  const double unigram = unigram_perplexity(dev);
  TrainingConfig cfg;
  cfg.seed = 4;
  cfg.epochs = 6;
  cfg.batch_size = 16;
  cfg.learning_rate = 5e-3;
  cfg.dropout = 0.0;
  SUBCASE("recurrent") {
    RecurrentLM<float> lm(kVocab, RecurrentDims{2, 16, 12}, cfg.seed);
    const TrainLog log = train_sequence_model(lm, corpus, dev, cfg);
    CHECK(log.best_dev_perplexity < unigram);
    for (std::size_t e = 1; e < log.train_loss.size(); ++e)
      CHECK(log.train_loss[e] < log.train_loss[e - 1] * 1.10);
    CHECK(log.train_loss.back() < log.train_loss.front());
  }
  SUBCASE("attention") {
    AttentionLM<float> lm(kVocab, AttentionDims{2, 2, 12, 64}, cfg.seed);
    const TrainLog log = train_sequence_model(lm, corpus, dev, cfg);
    CHECK(log.best_dev_perplexity < unigram);
  }
}

TEST_CASE("epochs 0 returns the initialized model") {
  const auto corpus = pair_corpus(30, 5);
  TrainingConfig cfg;
  cfg.epochs = 0;
  RecurrentLM<float> lm(kVocab, RecurrentDims{2, 16, 12}, 21);
  const double before = perplexity(lm, corpus);
  const TrainLog log = train_sequence_model(lm, corpus, corpus, cfg);
  CHECK(log.best_epoch == 0);
  CHECK(perplexity(lm, corpus) == doctest::Approx(before));
  CHECK(before == doctest::Approx(kVocab).epsilon(0.2));
}

TEST_CASE("a memorized sentence gets near-zero surprisal and monotone perplexity") {
  const std::vector<std::vector<TokenId>> corpus(12, std::vector<TokenId>{7, 9, 11, 8});
  TrainingConfig cfg;
  cfg.seed = 6;
  cfg.epochs = 50;
  cfg.batch_size = 2;
  cfg.learning_rate = 1e-2;
  cfg.dropout = 0.0;
  RecurrentLM<float> lm(kVocab, RecurrentDims{1, 24, 16}, cfg.seed);
  const TrainLog log = train_sequence_model(lm, corpus, corpus, cfg);
  const auto s = lm.sentence_surprisals(corpus[0], true);
  double mean = 0.0;
  for (double x : s) mean += x;
  mean /= static_cast<double>(s.size());
  CHECK(mean < 0.25);
  int violations = 0;
  for (std::size_t e = 1; e < log.dev_perplexity.size(); ++e)
    if (log.dev_perplexity[e] > log.dev_perplexity[e - 1] * 1.02) ++violations;
  CHECK(violations <= 2);
  CHECK(log.dev_perplexity.back() < log.dev_perplexity.front() / 4.0);
  // profile matches per-step next_token_dist reads
  std::vector<TokenId> prefix;
  for (std::size_t i = 0; i < corpus[0].size(); ++i) {
    const Eigen::VectorXd dist = next_token_dist(lm, prefix);
    CHECK(-std::log(dist(corpus[0][i])) == doctest::Approx(s[i]).epsilon(1e-5));
    prefix.push_back(corpus[0][i]);
  }
}

TEST_CASE("same seed gives bit-identical checkpoints; different seed differs") {
  const auto corpus = pair_corpus(60, 7);
  auto run = [&](std::uint64_t seed) {
    TrainingConfig c;
    c.epochs = 2;
    c.seed = seed;
    RecurrentLM<float> lm(kVocab, RecurrentDims{2, 12, 8}, c.seed);
    train_sequence_model(lm, corpus, corpus, c);
    return checkpoint_bytes(lm);
  };
  const std::string a = run(11);
  const std::string b = run(11);
  const std::string c = run(12);
  CHECK(a == b);
  CHECK(a != c);
}

TEST_CASE("checkpoint reload reproduces evaluation outputs bit for bit") {
  const auto corpus = pair_corpus(40, 8);
  TrainingConfig cfg;
  cfg.seed = 3;
  cfg.epochs = 2;
  RecurrentLM<float> lm(kVocab, RecurrentDims{2, 12, 8}, cfg.seed);
  train_sequence_model(lm, corpus, corpus, cfg);
  const std::string path = "ck_roundtrip.bin";
  save_checkpoint(path, "recurrent", "{\"note\":1}", lm.params());
  const LoadedCheckpoint ck = read_checkpoint(path);
  CHECK(ck.arch == "recurrent");
  CHECK(ck.config_json == "{\"note\":1}");
  RecurrentLM<float> fresh(kVocab, RecurrentDims{2, 12, 8}, 999);
  fill_params(fresh.params(), ck);
  for (const auto& sent : corpus) {
    const auto a = lm.sentence_surprisals(sent, true);
    const auto b = fresh.sentence_surprisals(sent, true);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
  }
  std::remove(path.c_str());
}

TEST_CASE("corrupted parameters raise a training failure") {
  const auto corpus = pair_corpus(20, 9);
  TrainingConfig cfg;
  cfg.epochs = 1;
  RecurrentLM<float> lm(kVocab, RecurrentDims{1, 8, 8}, 1);
  lm.params().slot(0).value(0, 0) = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(train_sequence_model(lm, corpus, corpus, cfg), TrainingError);
}
