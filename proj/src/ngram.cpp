#include "syneval/ngram.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "syneval/errors.hpp"

namespace syneval {

namespace {

std::string pack(const TokenId* ids, std::size_t n) {
  std::string key(n * sizeof(TokenId), '\0');
  if (n) std::memcpy(key.data(), ids, n * sizeof(TokenId));
  return key;
}

std::vector<TokenId> unpack(const std::string& key) {
  std::vector<TokenId> ids(key.size() / sizeof(TokenId));
  if (!ids.empty()) std::memcpy(ids.data(), key.data(), key.size());
  return ids;
}

}  // namespace

NGramModel fit_kn_ids(const std::vector<std::vector<TokenId>>& corpus, int order,
                      TokenId vocab_size, std::optional<double> discount_override) {
  if (corpus.empty()) throw std::invalid_argument("fit_kn: corpus must be non-empty");
  if (order < 2) throw std::invalid_argument("fit_kn: order must be >= 2");
  if (vocab_size < 2) throw std::invalid_argument("fit_kn: vocabulary too small");

  NGramModel m;
  m.order_ = order;
  m.vocab_size_ = vocab_size;
  m.levels_.resize(static_cast<std::size_t>(order) + 1);
  m.discounts_.assign(static_cast<std::size_t>(order) + 1, 0.0);

  // Raw counts per order over padded sentences. Windows whose last token is
  // <s> are skipped so pure-padding grams are never counted.
  std::vector<std::unordered_map<std::string, std::int64_t>> raw(
      static_cast<std::size_t>(order) + 1);
  std::vector<TokenId> padded;
  for (const std::vector<TokenId>& sent : corpus) {
    padded.assign(static_cast<std::size_t>(order - 1), Vocabulary::kBos);
    padded.insert(padded.end(), sent.begin(), sent.end());
    padded.push_back(Vocabulary::kEos);
    for (int k = 1; k <= order; ++k) {
      for (std::size_t end = static_cast<std::size_t>(k); end <= padded.size(); ++end) {
        if (padded[end - 1] == Vocabulary::kBos) continue;
        ++raw[static_cast<std::size_t>(k)][pack(&padded[end - static_cast<std::size_t>(k)],
                                                static_cast<std::size_t>(k))];
      }
    }
  }

  // Adjusted counts: raw at the top order, left-continuation counts below.
  // Each distinct (k+1)-gram contributes one continuation to its suffix.
  for (auto& [key, count] : raw[static_cast<std::size_t>(order)])
    m.levels_[static_cast<std::size_t>(order)].grams[key] = static_cast<double>(count);
  for (int k = order - 1; k >= 1; --k) {
    auto& grams = m.levels_[static_cast<std::size_t>(k)].grams;
    for (const auto& [key, count] : raw[static_cast<std::size_t>(k) + 1]) {
      (void)count;
      grams[key.substr(sizeof(TokenId))] += 1.0;
    }
  }

  // Context sums/types and per-order discounts D = n1 / (n1 + 2 n2) from the
  // counts-of-counts of whichever counts that order discounts.
  for (int k = 1; k <= order; ++k) {
    NGramModel::Level& level = m.levels_[static_cast<std::size_t>(k)];
    std::int64_t n1 = 0, n2 = 0;
    for (const auto& [key, count] : level.grams) {
      NGramModel::ContextStat& stat = level.contexts[key.substr(0, key.size() - sizeof(TokenId))];
      stat.total += count;
      stat.types += 1;
      if (count == 1.0) ++n1;
      if (count == 2.0) ++n2;
    }
    if (discount_override.has_value()) {
      m.discounts_[static_cast<std::size_t>(k)] = *discount_override;
    } else if (n1 == 0 || n2 == 0) {
      m.discounts_[static_cast<std::size_t>(k)] = 0.75;
    } else {
      m.discounts_[static_cast<std::size_t>(k)] =
          static_cast<double>(n1) / (static_cast<double>(n1) + 2.0 * static_cast<double>(n2));
    }
  }
  return m;
}

NGramModel fit_kn(const std::vector<Sentence>& corpus, int order, const Vocabulary& vocab,
                  std::optional<double> discount_override) {
  std::vector<std::vector<TokenId>> ids;
  ids.reserve(corpus.size());
  for (const Sentence& s : corpus) ids.push_back(vocab.to_ids(s.tokens));
  return fit_kn_ids(ids, order, vocab.size(), discount_override);
}

double NGramModel::prob_from_padded(const TokenId* context, std::size_t len, TokenId token) const {
  // Walks levels downward accumulating interpolation; a context shorter than
  // order-1 starts the chain at the matching level.
  double acc = 0.0;      // probability mass fixed so far
  double weight = 1.0;   // product of interpolation weights on the open path
  const int top = std::min<int>(order_, static_cast<int>(len) + 1);
  for (int k = top; k >= 1; --k) {
    const Level& level = levels_[static_cast<std::size_t>(k)];
    const TokenId* ctx = context + (len - static_cast<std::size_t>(k - 1));
    const std::string ctx_key = pack(ctx, static_cast<std::size_t>(k - 1));
    auto stat_it = level.contexts.find(ctx_key);
    if (stat_it == level.contexts.end() || stat_it->second.total <= 0.0) continue;
    const ContextStat& stat = stat_it->second;
    const double d = discounts_[static_cast<std::size_t>(k)];
    std::string gram_key = ctx_key;
    gram_key.append(reinterpret_cast<const char*>(&token), sizeof(TokenId));
    auto gram_it = level.grams.find(gram_key);
    if (gram_it != level.grams.end())
      acc += weight * std::max(gram_it->second - d, 0.0) / stat.total;
    weight *= d * static_cast<double>(stat.types) / stat.total;
    if (weight <= 0.0) return acc;  // zero-discount mode: no mass flows lower
  }
  return acc + weight / static_cast<double>(vocab_size_);
}

double NGramModel::prob(const std::vector<TokenId>& context, TokenId token) const {
  const std::size_t need = static_cast<std::size_t>(order_ - 1);
  std::vector<TokenId> padded(need, Vocabulary::kBos);
  const std::size_t take = std::min(context.size(), need);
  std::copy(context.end() - static_cast<std::ptrdiff_t>(take), context.end(),
            padded.end() - static_cast<std::ptrdiff_t>(take));
  return prob_from_padded(padded.data(), need, token);
}

double ngram_prob(const NGramModel& model, const std::vector<TokenId>& context, TokenId token) {
  return model.prob(context, token);
}

template <class Model>
std::vector<double> model_surprisals_ids(const Model& model, const std::vector<TokenId>& ids,
                                         int order, bool include_eos) {
  const std::size_t need = static_cast<std::size_t>(order - 1);
  std::vector<TokenId> padded(need, Vocabulary::kBos);
  padded.insert(padded.end(), ids.begin(), ids.end());
  if (include_eos) padded.push_back(Vocabulary::kEos);
  std::vector<double> out;
  out.reserve(padded.size() - need);
  for (std::size_t i = need; i < padded.size(); ++i) {
    const double p = model.prob_from_padded(&padded[i - need], need, padded[i]);
    out.push_back(-std::log(p));
  }
  return out;
}

template std::vector<double> model_surprisals_ids<NGramModel>(const NGramModel&,
                                                              const std::vector<TokenId>&, int,
                                                              bool);
template std::vector<double> model_surprisals_ids<ArpaModel>(const ArpaModel&,
                                                             const std::vector<TokenId>&, int,
                                                             bool);

std::vector<double> ngram_surprisals(const NGramModel& model, const std::vector<TokenId>& ids) {
  return model_surprisals_ids(model, ids, model.order(), false);
}

std::vector<double> ngram_surprisals(const ArpaModel& model, const std::vector<TokenId>& ids) {
  return model_surprisals_ids(model, ids, model.order(), false);
}

double ngram_perplexity(const NGramModel& model, const std::vector<std::vector<TokenId>>& corpus) {
  if (corpus.empty()) throw std::invalid_argument("perplexity: empty corpus");
  double total = 0.0;
  std::int64_t tokens = 0;
  for (const std::vector<TokenId>& sent : corpus) {
    const std::vector<double> s = model_surprisals_ids(model, sent, model.order(), true);
    for (double x : s) total += x;
    tokens += static_cast<std::int64_t>(s.size());
  }
  return std::exp(total / static_cast<double>(tokens));
}

namespace {

constexpr double kLn10 = 2.302585092994045684;

std::string render_gram(const std::string& key, const Vocabulary& vocab) {
  const std::vector<TokenId> ids = unpack(key);
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ' ';
    out += vocab.token(ids[i]);
  }
  return out;
}

std::string format_log10(double natural_log) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", natural_log / kLn10);
  return buf;
}

}  // namespace

void save_arpa(const NGramModel& model, const std::string& path, const Vocabulary& vocab) {
  // Every gram with positive adjusted count is listed with its full
  // interpolated probability; grams that act as contexts one level up carry
  // the interpolation weight as their backoff. The resulting backoff model
  // reproduces the interpolated probabilities exactly.
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write arpa file: " + path);

  const int order = model.order();
  std::vector<std::map<std::string, std::pair<double, std::optional<double>>>> entries(
      static_cast<std::size_t>(order) + 1);

  std::vector<TokenId> scratch;
  auto interpolated = [&](const std::string& key) {
    scratch = unpack(key);
    return std::log(model.prob_from_padded(scratch.data(), scratch.size() - 1, scratch.back()));
  };

  // Level 1 lists the whole vocabulary so every backoff chain terminates on a
  // listed entry, zero-count ids included.
  for (TokenId id = 0; id < model.vocab_size(); ++id) {
    const std::string key = pack(&id, 1);
    entries[1][key] = {interpolated(key), std::nullopt};
  }
  for (int k = 2; k <= order; ++k) {
    for (const auto& [key, count] : model.levels()[static_cast<std::size_t>(k)].grams) {
      (void)count;
      entries[static_cast<std::size_t>(k)][key] = {interpolated(key), std::nullopt};
    }
  }
  // Contexts of level k+1 carry the interpolation weight as their backoff;
  // contexts that are not grams themselves (e.g. <s> runs) still get a line.
  for (int k = 1; k < order; ++k) {
    for (const auto& [ctx_key, stat] : model.levels()[static_cast<std::size_t>(k) + 1].contexts) {
      if (stat.total <= 0.0) continue;
      const double bow = model.discount(k + 1) * static_cast<double>(stat.types) / stat.total;
      auto it = entries[static_cast<std::size_t>(k)].find(ctx_key);
      if (it == entries[static_cast<std::size_t>(k)].end())
        it = entries[static_cast<std::size_t>(k)].emplace(ctx_key,
                                                          std::make_pair(interpolated(ctx_key),
                                                                         std::nullopt)).first;
      it->second.second = std::log(bow);
    }
  }

  out << "\\data\\\n";
  for (int k = 1; k <= order; ++k)
    out << "ngram " << k << "=" << entries[static_cast<std::size_t>(k)].size() << "\n";
  for (int k = 1; k <= order; ++k) {
    out << "\n\\" << k << "-grams:\n";
    for (const auto& [key, pb] : entries[static_cast<std::size_t>(k)]) {
      out << format_log10(pb.first) << '\t' << render_gram(key, vocab);
      if (pb.second.has_value()) out << '\t' << format_log10(*pb.second);
      out << '\n';
    }
  }
  out << "\n\\end\\\n";
}

ArpaModel load_arpa(const std::string& path, const Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open arpa file: " + path);
  ArpaModel m;
  std::string line;
  int section = 0;  // 0 = header, k = k-gram section
  int max_order = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\\data\\") continue;
    if (line == "\\end\\") break;
    if (line.size() > 1 && line[0] == '\\') {
      section = std::stoi(line.substr(1));
      continue;
    }
    if (section == 0) {
      if (line.rfind("ngram ", 0) == 0) {
        const int k = std::stoi(line.substr(6, line.find('=') - 6));
        max_order = std::max(max_order, k);
        m.levels_.resize(static_cast<std::size_t>(max_order) + 1);
        m.order_ = max_order;
      }
      continue;
    }
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (start <= line.size()) {
      const std::size_t tab = line.find('\t', start);
      if (tab == std::string::npos) {
        fields.push_back(line.substr(start));
        break;
      }
      fields.push_back(line.substr(start, tab - start));
      start = tab + 1;
    }
    if (fields.size() < 2) throw ValidationError("malformed arpa line: " + line);
    ArpaModel::Entry e;
    e.logprob = std::stod(fields[0]) * kLn10;
    if (fields.size() >= 3) {
      e.backoff = std::stod(fields[2]) * kLn10;
      e.has_backoff = true;
    }
    std::istringstream gram(fields[1]);
    std::string tok;
    std::vector<TokenId> ids;
    while (gram >> tok) {
      const TokenId id = vocab.lookup(tok);
      if (id < 0) throw ValidationError("arpa token not in vocabulary: " + tok);
      ids.push_back(id);
    }
    if (static_cast<int>(ids.size()) != section)
      throw ValidationError("arpa gram length mismatch: " + line);
    m.levels_[static_cast<std::size_t>(section)].emplace(pack(ids.data(), ids.size()), e);
  }
  if (m.order_ < 1) throw ValidationError("arpa file without data header: " + path);
  return m;
}

double ArpaModel::prob_from_padded(const TokenId* context, std::size_t len, TokenId token) const {
  // Standard backoff query over the longest available suffix.
  double bow_acc = 0.0;
  const int top = std::min<int>(order_, static_cast<int>(len) + 1);
  for (int k = top; k >= 1; --k) {
    const std::size_t ctx_len = static_cast<std::size_t>(k - 1);
    const TokenId* ctx = context + (len - ctx_len);
    std::string gram_key = pack(ctx, ctx_len);
    gram_key.append(reinterpret_cast<const char*>(&token), sizeof(TokenId));
    const auto& level = levels_[static_cast<std::size_t>(k)];
    auto it = level.find(gram_key);
    if (it != level.end()) return std::exp(bow_acc + it->second.logprob);
    if (k >= 2) {
      const auto& ctx_level = levels_[static_cast<std::size_t>(k) - 1];
      auto ctx_it = ctx_level.find(pack(ctx, ctx_len));
      if (ctx_it != ctx_level.end() && ctx_it->second.has_backoff)
        bow_acc += ctx_it->second.backoff;
    }
  }
  return 0.0;
}

double ArpaModel::prob(const std::vector<TokenId>& context, TokenId token) const {
  const std::size_t need = static_cast<std::size_t>(order_ - 1);
  std::vector<TokenId> padded(need, Vocabulary::kBos);
  const std::size_t take = std::min(context.size(), need);
  std::copy(context.end() - static_cast<std::ptrdiff_t>(take), context.end(),
            padded.end() - static_cast<std::ptrdiff_t>(take));
  return prob_from_padded(padded.data(), need, token);
}

}  // namespace syneval
