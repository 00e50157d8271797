#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "syneval/errors.hpp"

namespace syneval {

using TokenId = std::int32_t;

struct Sentence {
  std::vector<std::string> tokens;
  std::string id;
};

// Labeled constituency tree. A node is either a terminal carrying a token or
// an internal node with a nonterminal label and at least one child. POS
// preterminals are just internal nodes with a single terminal child and are
// kept as-is.
struct ParseTree {
  std::string label;  // empty for terminals
  std::string token;  // empty for internal nodes
  std::vector<ParseTree> children;

  bool is_terminal() const { return children.empty() && label.empty(); }

  static ParseTree terminal(std::string tok) {
    ParseTree t;
    t.token = std::move(tok);
    return t;
  }
  static ParseTree internal(std::string lab, std::vector<ParseTree> kids) {
    ParseTree t;
    t.label = std::move(lab);
    t.children = std::move(kids);
    return t;
  }

  bool operator==(const ParseTree& o) const {
    return label == o.label && token == o.token && children == o.children;
  }
};

// Parses a single whitespace-separated parenthesized expression, e.g.
// "(S (NP a) (VP b))". Tokens and labels must not contain parentheses or
// whitespace. Malformed input raises MalformedInputError with a byte offset.
ParseTree parse_bracketed(const std::string& text);

// Inverse of parse_bracketed for well-formed trees.
std::string render(const ParseTree& tree);

// In-order terminal sequence.
Sentence leaves(const ParseTree& tree);

// One bracketed tree per line; blank lines skipped. Tree ids are
// "<stem>:<line>" for error reporting.
std::vector<ParseTree> read_treebank_file(const std::string& path);
void write_treebank_file(const std::string& path, const std::vector<ParseTree>& trees);

// Surface-form classes for out-of-vocabulary tokens. Checked in order; the
// first match wins, UNK-LONG applies to tokens of >= 4 code points, and
// plain UNK is the fallback.
enum class UnkClass { Num = 0, Latin, Punct, Long, Other };
extern const char* const kUnkClassNames[5];
UnkClass classify_unk(const std::string& token);

std::size_t utf8_length(const std::string& token);

class Vocabulary {
 public:
  // Reserved layout: 0 <s>, 1 </s>, then the five UNK classes, then regular
  // tokens in first-occurrence order.
  static constexpr TokenId kBos = 0;
  static constexpr TokenId kEos = 1;
  static constexpr TokenId kFirstUnk = 2;
  static constexpr TokenId kNumUnkClasses = 5;
  static constexpr TokenId kFirstRegular = kFirstUnk + kNumUnkClasses;

  // Builds the reserved ids only; regular tokens added via add_token.
  Vocabulary();

  TokenId add_token(const std::string& token, std::int64_t frequency);

  // Total id count, including reserved ids and UNK classes.
  TokenId size() const { return static_cast<TokenId>(id_to_token_.size()); }

  // In-vocabulary lookup; -1 when absent.
  TokenId lookup(const std::string& token) const;

  // Total mapping: in-vocabulary id or the id of the token's UNK class.
  TokenId to_id(const std::string& token) const;

  const std::string& token(TokenId id) const { return id_to_token_.at(static_cast<std::size_t>(id)); }
  bool is_reserved_marker(TokenId id) const { return id == kBos || id == kEos; }
  static TokenId unk_id(UnkClass c) { return kFirstUnk + static_cast<TokenId>(c); }

  std::int64_t frequency(TokenId id) const { return frequencies_.at(static_cast<std::size_t>(id)); }
  std::int64_t min_count() const { return min_count_; }
  void set_min_count(std::int64_t m) { min_count_ = m; }

  std::vector<TokenId> to_ids(const std::vector<std::string>& tokens) const;

  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);
  void save_frequencies(const std::string& path) const;
  void load_frequencies(const std::string& path);

 private:
  std::vector<std::string> id_to_token_;
  std::vector<std::int64_t> frequencies_;
  std::unordered_map<std::string, TokenId> token_to_id_;
  std::int64_t min_count_ = 2;
};

// Tokens with frequency >= min_count get their own id; everything else maps
// to an UNK class. min_count < 1 is an error.
Vocabulary build_vocabulary(const std::vector<Sentence>& corpus, std::int64_t min_count);

TokenId unkify(const std::string& token, const Vocabulary& vocab);

// Keeps sentences with token count <= max_len, order preserved.
std::vector<Sentence> filter_corpus(const std::vector<Sentence>& corpus, std::size_t max_len);
std::vector<ParseTree> filter_treebank(const std::vector<ParseTree>& trees, std::size_t max_len);

struct CorpusStats {
  std::int64_t token_count = 0;
  std::int64_t vocab_size = 0;
  std::map<std::size_t, std::int64_t> sentence_length_histogram;
};

CorpusStats corpus_stats(const std::vector<Sentence>& corpus, const Vocabulary& vocab);

// Replaces out-of-vocabulary terminals by their UNK class surface form.
ParseTree unkify_tree(const ParseTree& tree, const Vocabulary& vocab);

}  // namespace syneval
