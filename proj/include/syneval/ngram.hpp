#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "syneval/treebank.hpp"

namespace syneval {

// Interpolated Kneser-Ney model with a single estimated discount per order.
// Counts are taken over sentences padded with order-1 <s> markers and one
// </s>; windows consisting only of padding are never counted. Lower orders
// use left-continuation counts, and the unigram level interpolates with the
// uniform distribution so no probability is ever zero.
class NGramModel {
 public:
  struct ContextStat {
    double total = 0.0;   // sum of adjusted counts over continuations
    std::int32_t types = 0;  // distinct continuations
  };
  struct Level {
    std::unordered_map<std::string, double> grams;  // packed ids -> adjusted count
    std::unordered_map<std::string, ContextStat> contexts;
  };

  int order() const { return order_; }
  TokenId vocab_size() const { return vocab_size_; }
  double discount(int level) const { return discounts_.at(static_cast<std::size_t>(level)); }

  // Conditional probability with the context truncated to the last order-1
  // ids (padded with <s> on the left when shorter).
  double prob(const std::vector<TokenId>& context, TokenId token) const;

  double prob_from_padded(const TokenId* context, std::size_t len, TokenId token) const;

  friend NGramModel fit_kn_ids(const std::vector<std::vector<TokenId>>& corpus, int order,
                               TokenId vocab_size, std::optional<double> discount_override);

  const std::vector<Level>& levels() const { return levels_; }

 private:
  int order_ = 0;
  TokenId vocab_size_ = 0;
  std::vector<double> discounts_;  // indexed by level, [0] unused
  std::vector<Level> levels_;      // indexed by level, [0] unused
};

// Fits on id sequences (without sentence markers; padding is internal).
// discount_override pins every per-order discount, e.g. 0.0 reduces the model
// to maximum-likelihood relative frequencies on seen contexts.
NGramModel fit_kn_ids(const std::vector<std::vector<TokenId>>& corpus, int order,
                      TokenId vocab_size, std::optional<double> discount_override = std::nullopt);

NGramModel fit_kn(const std::vector<Sentence>& corpus, int order, const Vocabulary& vocab,
                  std::optional<double> discount_override = std::nullopt);

double ngram_prob(const NGramModel& model, const std::vector<TokenId>& context, TokenId token);

// ARPA-backed query model; loading a saved NGramModel reproduces its
// conditional probabilities through the standard backoff equations.
class ArpaModel {
 public:
  struct Entry {
    double logprob = 0.0;   // natural log
    double backoff = 0.0;   // natural log, 0 when absent
    bool has_backoff = false;
  };

  int order() const { return order_; }
  double prob(const std::vector<TokenId>& context, TokenId token) const;
  double prob_from_padded(const TokenId* context, std::size_t len, TokenId token) const;

  friend ArpaModel load_arpa(const std::string& path, const Vocabulary& vocab);

 private:
  int order_ = 0;
  std::vector<std::unordered_map<std::string, Entry>> levels_;
};

void save_arpa(const NGramModel& model, const std::string& path, const Vocabulary& vocab);
ArpaModel load_arpa(const std::string& path, const Vocabulary& vocab);

// Per-token surprisal (natural log), tokens only; the </s> event is appended
// when include_eos is set (used for perplexity).
template <class Model>
std::vector<double> model_surprisals_ids(const Model& model, const std::vector<TokenId>& ids,
                                         int order, bool include_eos);

std::vector<double> ngram_surprisals(const NGramModel& model, const std::vector<TokenId>& ids);
std::vector<double> ngram_surprisals(const ArpaModel& model, const std::vector<TokenId>& ids);

double ngram_perplexity(const NGramModel& model, const std::vector<std::vector<TokenId>>& corpus);

}  // namespace syneval
