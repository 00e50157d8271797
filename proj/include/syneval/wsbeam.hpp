#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <vector>

#include "syneval/synlm/actions.hpp"

namespace syneval::wsbeam {

struct BeamConfig {
  int action_beam = 100;
  int word_beam = 10;
  int fast_track = 0;            // word-generating hypotheses exempted from the cut
  int max_actions_per_word = 30; // structural expansion rounds between words
};

template <class Model>
struct BeamHypothesis {
  typename Model::State state;
  synlm::ParserState parser;
  double logp = 0.0;
  std::vector<std::int32_t> history;  // action symbols since the start
};

// Sum of surviving hypothesis masses; underflow-safe.
template <class Model>
double log_prefix_mass(const std::vector<BeamHypothesis<Model>>& beams) {
  if (beams.empty()) throw std::invalid_argument("prefix_mass: empty beam");
  double mx = -std::numeric_limits<double>::infinity();
  for (const auto& h : beams) mx = std::max(mx, h.logp);
  double z = 0.0;
  for (const auto& h : beams) z += std::exp(h.logp - mx);
  return mx + std::log(z);
}

template <class Model>
double prefix_mass(const std::vector<BeamHypothesis<Model>>& beams) {
  return std::exp(log_prefix_mass(beams));
}

namespace detail {

// Lexicographic order of (history + symbol) without materializing it.
inline bool extended_history_less(const std::vector<std::int32_t>& ha, std::int32_t sa,
                                  const std::vector<std::int32_t>& hb, std::int32_t sb) {
  const std::size_t na = ha.size() + 1, nb = hb.size() + 1;
  const std::size_t n = std::min(na, nb);
  for (std::size_t i = 0; i < n; ++i) {
    const std::int32_t a = i < ha.size() ? ha[i] : sa;
    const std::int32_t b = i < hb.size() ? hb[i] : sb;
    if (a != b) return a < b;
  }
  return na < nb;
}

}  // namespace detail

// One word-synchronous advance per the two-beam search: every hypothesis
// expands over its masked actions; word-generating successors and structural
// successors compete in one pool pruned to action_beam per round (score ties
// broken by lexicographic action history); surviving word successors advance
// and surviving structural successors form the next frontier. fast_track top
// word successors bypass the cut. Expansion stops when no structural
// candidate can still enter the final top word_beam.
template <class Model>
std::vector<BeamHypothesis<Model>> word_sync_step(const Model& model,
                                                  const std::vector<BeamHypothesis<Model>>& beams,
                                                  TokenId next_word, const BeamConfig& config,
                                                  const synlm::TransitionLimits& limits,
                                                  std::size_t word_index = 0,
                                                  std::size_t max_total_actions = 0) {
  using Hyp = BeamHypothesis<Model>;
  if (beams.empty()) throw std::invalid_argument("word_sync_step: empty beam");

  struct Candidate {
    const Hyp* parent;
    std::int32_t symbol;
    double logp;
    bool advances;  // generates next_word
  };
  auto candidate_less = [](const Candidate& a, const Candidate& b) {
    if (a.logp != b.logp) return a.logp > b.logp;
    return detail::extended_history_less(a.parent->history, a.symbol, b.parent->history, b.symbol);
  };

  std::vector<Hyp> frontier = beams;
  std::vector<Hyp> advanced;
  const int close_symbol = model.inventory().close_symbol();
  const int word_count = model.inventory().word_count();

  auto materialize = [&](const Candidate& c) {
    Hyp h;
    const synlm::Action a = model.inventory().action_of(c.symbol);
    h.state = model.advance(c.parent->state, a);
    h.parser = synlm::apply_action(c.parent->parser, a, model.inventory());
    h.logp = c.logp;
    h.history = c.parent->history;
    h.history.push_back(c.symbol);
    return h;
  };

  for (int round = 0; round < config.max_actions_per_word && !frontier.empty(); ++round) {
    std::vector<Candidate> pool;
    for (const Hyp& h : frontier) {
      if (h.parser.terminated) continue;
      const auto logits = model.action_logits(h.state);
      Eigen::VectorXd logits_d(logits.size());
      for (Eigen::Index i = 0; i < logits.size(); ++i)
        logits_d(i) = static_cast<double>(logits(i));
      const std::vector<char> mask = synlm::action_mask(h.parser, limits, model.inventory());
      const Eigen::VectorXd logd = synlm::masked_action_log_dist(logits_d, mask);
      if (max_total_actions > 0 && h.history.size() + 1 > max_total_actions) continue;
      // word-generating successor
      if (mask[static_cast<std::size_t>(next_word)])
        pool.push_back({&h, next_word, h.logp + logd(next_word), true});
      // structural successors (all opens plus close); other GENs cannot
      // yield this sentence and are dropped
      for (int s = word_count; s <= close_symbol; ++s)
        if (mask[static_cast<std::size_t>(s)])
          pool.push_back({&h, s, h.logp + logd(s), false});
    }
    if (pool.empty()) break;
    std::sort(pool.begin(), pool.end(), candidate_less);

    // fast track: best word successors advance outside the action beam
    int fast_left = config.fast_track;
    std::vector<char> taken(pool.size(), 0);
    if (fast_left > 0) {
      for (std::size_t i = 0; i < pool.size() && fast_left > 0; ++i) {
        if (!pool[i].advances) continue;
        advanced.push_back(materialize(pool[i]));
        taken[i] = 1;
        --fast_left;
      }
    }
    std::vector<Hyp> next_frontier;
    int kept = 0;
    for (std::size_t i = 0; i < pool.size() && kept < config.action_beam; ++i) {
      if (taken[i]) continue;
      ++kept;
      if (pool[i].advances)
        advanced.push_back(materialize(pool[i]));
      else
        next_frontier.push_back(materialize(pool[i]));
    }
    frontier = std::move(next_frontier);

    // admissible stop: scores only decrease along a derivation, so once the
    // word beam is full and outranks the whole frontier nothing can change
    if (static_cast<int>(advanced.size()) >= config.word_beam && !frontier.empty()) {
      std::vector<double> scores;
      scores.reserve(advanced.size());
      for (const Hyp& h : advanced) scores.push_back(h.logp);
      std::nth_element(scores.begin(), scores.begin() + (config.word_beam - 1), scores.end(),
                       std::greater<double>());
      const double kth = scores[static_cast<std::size_t>(config.word_beam - 1)];
      double max_frontier = -std::numeric_limits<double>::infinity();
      for (const Hyp& h : frontier) max_frontier = std::max(max_frontier, h.logp);
      if (max_frontier <= kth) break;
    }
  }

  if (advanced.empty())
    throw BeamExhaustedError("beam exhausted: no hypothesis generated word " +
                                 std::to_string(word_index),
                             word_index);
  std::sort(advanced.begin(), advanced.end(), [](const Hyp& a, const Hyp& b) {
    if (a.logp != b.logp) return a.logp > b.logp;
    return std::lexicographical_compare(a.history.begin(), a.history.end(), b.history.begin(),
                                        b.history.end());
  });
  if (static_cast<int>(advanced.size()) > config.word_beam)
    advanced.resize(static_cast<std::size_t>(config.word_beam));
  return advanced;
}

struct PrefixProbEstimate {
  std::vector<double> log_mass;        // after each word; mass is non-increasing
  std::vector<int> hypothesis_count;   // surviving hypotheses per position
};

template <class Model>
struct BeamSurprisalResult {
  std::vector<double> surprisals;  // natural log, one per word
  PrefixProbEstimate estimate;
  std::vector<BeamHypothesis<Model>> final_beam;
};

// Word surprisals from prefix-mass ratios: surprisal(i) = log m(i-1) - log
// m(i) with m(0) = 1. Beam exhaustion propagates as BeamExhaustedError.
template <class Model>
BeamSurprisalResult<Model> beam_surprisals(const Model& model, const std::vector<TokenId>& words,
                                           const BeamConfig& config,
                                           const synlm::TransitionLimits& limits,
                                           std::ostream* trace = nullptr) {
  using Hyp = BeamHypothesis<Model>;
  BeamSurprisalResult<Model> result;
  std::vector<Hyp> beams;
  Hyp init;
  init.state = model.initial_state();
  beams.push_back(std::move(init));
  const std::size_t max_total = 12 * words.size();
  double prev_log_mass = 0.0;
  for (std::size_t i = 0; i < words.size(); ++i) {
    beams = word_sync_step(model, beams, words[i], config, limits, i, max_total);
    const double lm = log_prefix_mass(beams);
    result.surprisals.push_back(prev_log_mass - lm);
    result.estimate.log_mass.push_back(lm);
    result.estimate.hypothesis_count.push_back(static_cast<int>(beams.size()));
    if (trace) {
      *trace << i << '\t' << beams.size() << '\t';
      for (std::size_t k = 0; k < beams.front().history.size(); ++k) {
        if (k) *trace << ' ';
        *trace << model.inventory().symbol_string(beams.front().history[k]);
      }
      *trace << '\t' << lm << '\n';
    }
    prev_log_mass = lm;
  }
  result.final_beam = std::move(beams);
  return result;
}

// Exhaustive prefix masses on toy inputs; the independent check that beam
// masses are sound lower bounds. Vocabulary and sentence length are capped
// because the derivation space grows combinatorially.
template <class Model>
std::vector<double> exact_prefix_mass(const Model& model, const std::vector<TokenId>& words,
                                      int depth_bound,
                                      std::int64_t node_budget = 4'000'000) {
  if (model.inventory().word_count() > 16)
    throw std::invalid_argument("exact_prefix_mass: vocabulary too large");
  if (words.size() > 5) throw std::invalid_argument("exact_prefix_mass: sentence too long");
  synlm::TransitionLimits limits;
  limits.max_open = depth_bound;

  std::vector<double> mass(words.size(), 0.0);
  std::int64_t nodes = 0;
  const int close_symbol = model.inventory().close_symbol();
  const int word_count = model.inventory().word_count();

  struct Frame {
    typename Model::State state;
    synlm::ParserState parser;
    double logp;
    std::size_t word_index;
  };

  const std::function<void(const Frame&)> expand = [&](const Frame& f) {
    if (++nodes > node_budget)
      throw ResourceError("exact_prefix_mass: node budget exceeded");
    if (f.parser.terminated) return;
    const auto logits = model.action_logits(f.state);
    Eigen::VectorXd logits_d(logits.size());
    for (Eigen::Index i = 0; i < logits.size(); ++i)
      logits_d(i) = static_cast<double>(logits(i));
    const std::vector<char> mask = synlm::action_mask(f.parser, limits, model.inventory());
    const Eigen::VectorXd logd = synlm::masked_action_log_dist(logits_d, mask);

    const TokenId target = words[f.word_index];
    if (mask[static_cast<std::size_t>(target)]) {
      const synlm::Action a = model.inventory().action_of(target);
      Frame next;
      next.parser = synlm::apply_action(f.parser, a, model.inventory());
      next.logp = f.logp + logd(target);
      next.word_index = f.word_index + 1;
      mass[f.word_index] += std::exp(next.logp);
      if (next.word_index < words.size()) {
        next.state = model.advance(f.state, a);
        expand(next);
      }
    }
    for (int s = word_count; s <= close_symbol; ++s) {
      if (!mask[static_cast<std::size_t>(s)]) continue;
      const synlm::Action a = model.inventory().action_of(s);
      Frame next;
      next.state = model.advance(f.state, a);
      next.parser = synlm::apply_action(f.parser, a, model.inventory());
      next.logp = f.logp + logd(s);
      next.word_index = f.word_index;
      expand(next);
    }
  };

  Frame root;
  root.state = model.initial_state();
  root.logp = 0.0;
  root.word_index = 0;
  expand(root);
  return mass;
}

// Beam-marginal word perplexity: exp of mean per-word negative log prefix
// mass. The beam mass lower-bounds the true marginal, so this estimate is an
// upper bound on the model's true word-marginal perplexity.
template <class Model>
double beam_perplexity(const Model& model, const std::vector<std::vector<TokenId>>& corpus,
                       const BeamConfig& config, const synlm::TransitionLimits& limits) {
  if (corpus.empty()) throw std::invalid_argument("beam_perplexity: empty corpus");
  double total = 0.0;
  std::int64_t count = 0;
  for (const auto& sent : corpus) {
    const auto res = beam_surprisals(model, sent, config, limits);
    total -= res.estimate.log_mass.back();
    count += static_cast<std::int64_t>(sent.size());
  }
  return std::exp(total / static_cast<double>(count));
}

}  // namespace syneval::wsbeam
