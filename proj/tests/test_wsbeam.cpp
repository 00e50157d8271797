#include "syneval/wsbeam.hpp"

#include <cmath>

#include "doctest.h"
#include "syneval/synlm/models.hpp"

using namespace syneval;
using namespace syneval::synlm;
using namespace syneval::wsbeam;

namespace {

// Vocabulary with one or two content words; GEN spreads over the content
// word(s) plus the five UNK classes, so masked-uniform probabilities are
// small exact fractions.
Vocabulary tiny_vocab(int content_words) {
  std::vector<Sentence> corpus;
  Sentence s;
  s.id = "s";
  for (int i = 0; i < content_words; ++i) s.tokens.push_back("w" + std::to_string(i));
  corpus.push_back(s);
  return build_vocabulary(corpus, 1);
}

// Constant-logits model: the masked renormalized distribution is uniform
// over the allowed actions, so prefix masses are exact fractions.
struct UniformMock {
  const ActionInventory* inv;
  struct State {};
  State initial_state() const { return {}; }
  Eigen::VectorXd action_logits(const State&) const {
    return Eigen::VectorXd::Zero(inv->symbol_count());
  }
  State advance(const State&, const Action&) const { return {}; }
  const ActionInventory& inventory() const { return *inv; }
};

// Boosts one symbol per step along a scripted path.
struct ScriptedMock {
  const ActionInventory* inv;
  std::vector<int> script;
  double boost = 12.0;
  struct State {
    int t = 0;
  };
  State initial_state() const { return {}; }
  Eigen::VectorXd action_logits(const State& s) const {
    Eigen::VectorXd logits = Eigen::VectorXd::Zero(inv->symbol_count());
    if (s.t < static_cast<int>(script.size())) logits(script[static_cast<std::size_t>(s.t)]) = boost;
    return logits;
  }
  State advance(const State& s, const Action&) const { return {s.t + 1}; }
  const ActionInventory& inventory() const { return *inv; }
};

// Path-dependent pseudo-random logits, deterministic for both the beam and
// the exhaustive enumeration.
struct HashMock {
  const ActionInventory* inv;
  struct State {
    std::uint64_t h = 0x12345;
  };
  State initial_state() const { return {}; }
  Eigen::VectorXd action_logits(const State& s) const {
    Eigen::VectorXd logits(inv->symbol_count());
    for (int i = 0; i < inv->symbol_count(); ++i) {
      std::uint64_t x = s.h ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(i + 1));
      logits(i) = static_cast<double>(splitmix64(x) % 1000) / 250.0;
    }
    return logits;
  }
  State advance(const State& s, const Action& a) const {
    std::uint64_t x = s.h ^ (0xff51afd7ed558ccdULL * static_cast<std::uint64_t>(
                                 inv->symbol_of(a) + 7));
    return {splitmix64(x)};
  }
  const ActionInventory& inventory() const { return *inv; }
};

}  // namespace

TEST_CASE("single forced derivation: one hypothesis with the exact joint probability") {
  const Vocabulary vocab = tiny_vocab(1);
  const ActionInventory inv(vocab, {"X"});
  UniformMock model{&inv};
  TransitionLimits limits;
  limits.max_open = 1;  // exactly one derivation shape exists
  const TokenId w = vocab.lookup("w0");

  for (int action_beam : {1, 2, 10, 100}) {
    BeamConfig config;
    config.action_beam = action_beam;
    config.word_beam = std::min(10, action_beam);
    const auto res = beam_surprisals(model, {w, w}, config, limits);
    // after OPEN (forced), GEN is a 6-way choice; afterwards CLOSE joins in
    REQUIRE(res.estimate.log_mass.size() == 2);
    CHECK(res.estimate.hypothesis_count[0] == 1);
    CHECK(res.estimate.hypothesis_count[1] == 1);
    CHECK(std::exp(res.estimate.log_mass[0]) == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
    CHECK(std::exp(res.estimate.log_mass[1]) == doctest::Approx(1.0 / 42.0).epsilon(1e-12));
    CHECK(res.surprisals[0] == doctest::Approx(std::log(6.0)).epsilon(1e-12));
    CHECK(res.surprisals[1] == doctest::Approx(std::log(7.0)).epsilon(1e-12));
  }
}

TEST_CASE("two-derivation grammar: both survive and the mass is their sum") {
  const Vocabulary vocab = tiny_vocab(1);
  const ActionInventory inv(vocab, {"X"});
  UniformMock model{&inv};
  TransitionLimits limits;
  limits.max_open = 2;
  const TokenId w = vocab.lookup("w0");

  // derivations of the one-word prefix: OPEN GEN (1/7) and OPEN OPEN GEN
  // (1/7 * 1/6); the exact mass is their sum
  const double exact1 = 1.0 / 7.0 + (1.0 / 7.0) * (1.0 / 6.0);

  const auto exact = exact_prefix_mass(model, {w}, limits.max_open);
  REQUIRE(exact.size() == 1);
  CHECK(exact[0] == doctest::Approx(exact1).epsilon(1e-12));

  BeamConfig config;
  config.action_beam = 10;
  config.word_beam = 10;
  const auto res = beam_surprisals(model, {w}, config, limits);
  CHECK(res.estimate.hypothesis_count[0] == 2);
  CHECK(std::exp(res.estimate.log_mass[0]) == doctest::Approx(exact1).epsilon(1e-12));

  SUBCASE("action beam 1 keeps only the greedy derivation") {
    BeamConfig greedy;
    greedy.action_beam = 1;
    greedy.word_beam = 1;
    const auto res1 = beam_surprisals(model, {w}, greedy, limits);
    CHECK(res1.estimate.hypothesis_count[0] == 1);
    CHECK(std::exp(res1.estimate.log_mass[0]) == doctest::Approx(1.0 / 7.0).epsilon(1e-12));
    CHECK(std::exp(res1.estimate.log_mass[0]) < exact1);
  }
}

TEST_CASE("prefix_mass basics") {
  using Hyp = BeamHypothesis<UniformMock>;
  Hyp h;
  h.logp = -2.0;
  CHECK(prefix_mass<UniformMock>({h}) == doctest::Approx(std::exp(-2.0)).epsilon(1e-12));
  Hyp h2;
  h2.logp = -3.0;
  CHECK(prefix_mass<UniformMock>({h, h2}) ==
        doctest::Approx(std::exp(-2.0) + std::exp(-3.0)).epsilon(1e-12));
  CHECK(prefix_mass<UniformMock>({h, h2}) <= 1.0);
  CHECK_THROWS_AS(prefix_mass<UniformMock>({}), std::invalid_argument);
}

TEST_CASE("beam mass is a lower bound of the exact mass at every position") {
  const Vocabulary vocab = tiny_vocab(2);
  const ActionInventory inv(vocab, {"X", "Y"});
  HashMock model{&inv};
  TransitionLimits limits;
  limits.max_open = 3;
  const std::vector<TokenId> sentence{vocab.lookup("w0"), vocab.lookup("w1"),
                                      vocab.lookup("w0")};
  const auto exact = exact_prefix_mass(model, sentence, limits.max_open);
  REQUIRE(exact.size() == 3);
  for (int action_beam : {1, 2, 10, 100}) {
    BeamConfig config;
    config.action_beam = action_beam;
    config.word_beam = std::min(10, action_beam);
    const auto res = beam_surprisals(model, sentence, config, limits);
    for (std::size_t i = 0; i < exact.size(); ++i) {
      CHECK(std::exp(res.estimate.log_mass[i]) <= exact[i] * (1.0 + 1e-12));
    }
  }
  SUBCASE("a saturating beam reaches the exact mass") {
    BeamConfig config;
    config.action_beam = 1000;
    config.word_beam = 1000;
    config.max_actions_per_word = 60;
    const auto res = beam_surprisals(model, sentence, config, limits);
    for (std::size_t i = 0; i < exact.size(); ++i)
      CHECK(std::exp(res.estimate.log_mass[i]) == doctest::Approx(exact[i]).epsilon(1e-6));
  }
}

TEST_CASE("surprisals telescope to the final mass") {
  const Vocabulary vocab = tiny_vocab(2);
  const ActionInventory inv(vocab, {"X", "Y"});
  HashMock model{&inv};
  TransitionLimits limits;
  limits.max_open = 3;
  BeamConfig config;
  const std::vector<TokenId> sentence{vocab.lookup("w1"), vocab.lookup("w0")};
  const auto res = beam_surprisals(model, sentence, config, limits);
  double total = 0.0;
  for (double s : res.surprisals) total += s;
  CHECK(total == doctest::Approx(-res.estimate.log_mass.back()).epsilon(1e-9));
  // synchronization: every surviving hypothesis generated every word
  for (const auto& h : res.final_beam) {
    CHECK(h.parser.gen_count == static_cast<int>(sentence.size()));
  }
  // masses are non-increasing
  for (std::size_t i = 1; i < res.estimate.log_mass.size(); ++i)
    CHECK(res.estimate.log_mass[i] <= res.estimate.log_mass[i - 1]);
}

TEST_CASE("beam exhaustion raises a distinct error") {
  const Vocabulary vocab = tiny_vocab(1);
  const ActionInventory inv(vocab, {"X"});
  const TokenId w = vocab.lookup("w0");
  // script: OPEN, GEN w; then boost CLOSE so the greedy beam closes the root
  // and dies before the second word
  ScriptedMock model{&inv, {inv.symbol_of(Action::open(0)), w, inv.close_symbol()}, 50.0};
  TransitionLimits limits;
  limits.max_open = 1;
  BeamConfig config;
  config.action_beam = 1;
  config.word_beam = 1;
  CHECK_THROWS_AS(beam_surprisals(model, {w, w}, config, limits), BeamExhaustedError);
  try {
    beam_surprisals(model, {w, w}, config, limits);
  } catch (const BeamExhaustedError& e) {
    CHECK(e.word_index == 1);
  }
}

TEST_CASE("exact_prefix_mass rejects oversized inputs and is deterministic") {
  const Vocabulary vocab = tiny_vocab(1);
  const ActionInventory inv(vocab, {"X"});
  UniformMock model{&inv};
  const TokenId w = vocab.lookup("w0");
  CHECK_THROWS_AS(exact_prefix_mass(model, {w, w, w, w, w, w}, 2), std::invalid_argument);
  CHECK_THROWS_AS(exact_prefix_mass(model, {w, w}, 4, 10), ResourceError);
  const auto a = exact_prefix_mass(model, {w, w}, 2);
  const auto b = exact_prefix_mass(model, {w, w}, 2);
  CHECK(a == b);
}

TEST_CASE("word_sync_step validates inputs") {
  const Vocabulary vocab = tiny_vocab(1);
  const ActionInventory inv(vocab, {"X"});
  UniformMock model{&inv};
  BeamConfig config;
  TransitionLimits limits;
  CHECK_THROWS_AS(
      word_sync_step(model, std::vector<BeamHypothesis<UniformMock>>{}, 7, config, limits),
      std::invalid_argument);
}

TEST_CASE("beam search over a random-init syntax model agrees with enumeration") {
  const Vocabulary vocab = tiny_vocab(2);
  std::vector<ParseTree> trees{parse_bracketed("(X (Y w0 w1))")};
  const ActionInventory inv = ActionInventory::from_treebank(vocab, trees);
  RnngModel<float> model(&inv, nnet::RecurrentDims{1, 8, 6}, 77);
  TransitionLimits limits;
  limits.max_open = 3;
  const std::vector<TokenId> sentence{vocab.lookup("w0"), vocab.lookup("w1")};
  const auto exact = exact_prefix_mass(model, sentence, limits.max_open);
  for (int action_beam : {1, 2, 10, 100}) {
    BeamConfig config;
    config.action_beam = action_beam;
    config.word_beam = std::min(10, action_beam);
    // a tiny beam may exhaust when the greedy path closes the root early;
    // that is a sound (zero-mass) outcome for the lower-bound law
    try {
      const auto res = beam_surprisals(model, sentence, config, limits);
      for (std::size_t i = 0; i < exact.size(); ++i)
        CHECK(std::exp(res.estimate.log_mass[i]) <= exact[i] * (1.0 + 1e-12));
    } catch (const BeamExhaustedError&) {
      CHECK(action_beam <= 2);
    }
  }
  BeamConfig big;
  big.action_beam = 1000;
  big.word_beam = 1000;
  big.max_actions_per_word = 60;
  const auto res = beam_surprisals(model, sentence, big, limits);
  for (std::size_t i = 0; i < exact.size(); ++i)
    CHECK(std::exp(res.estimate.log_mass[i]) == doctest::Approx(exact[i]).epsilon(1e-6));
}

TEST_CASE("beam_perplexity matches the final masses") {
  const Vocabulary vocab = tiny_vocab(1);
  const ActionInventory inv(vocab, {"X"});
  UniformMock model{&inv};
  TransitionLimits limits;
  limits.max_open = 1;
  BeamConfig config;
  const TokenId w = vocab.lookup("w0");
  const std::vector<std::vector<TokenId>> corpus{{w, w}, {w}};
  const double ppl = beam_perplexity(model, corpus, config, limits);
  const double total = -std::log(1.0 / 42.0) - std::log(1.0 / 6.0);
  CHECK(ppl == doctest::Approx(std::exp(total / 3.0)).epsilon(1e-9));
}
