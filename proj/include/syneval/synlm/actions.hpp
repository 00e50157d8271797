#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "syneval/errors.hpp"
#include "syneval/treebank.hpp"

namespace syneval::synlm {

enum class ActionKind { OpenNt, Gen, Close };

struct Action {
  ActionKind kind = ActionKind::Close;
  std::int32_t arg = -1;  // nonterminal index for OpenNt, token id for Gen

  static Action open(std::int32_t nt) { return {ActionKind::OpenNt, nt}; }
  static Action gen(TokenId token) { return {ActionKind::Gen, token}; }
  static Action close() { return {ActionKind::Close, -1}; }

  bool operator==(const Action&) const = default;
};

using ActionSequence = std::vector<Action>;

// Contiguous symbol ids shared by both syntax parameterizations and equal to
// the PLM's extended vocabulary:
//   [0, V)        GEN(word)   -- word-vocabulary ids, "(X" rendering for open
//   [V, V+N)      OPEN(nt)
//   V+N           CLOSE       -- ")"
class ActionInventory {
 public:
  ActionInventory(const Vocabulary& vocab, std::vector<std::string> nonterminals);

  // Nonterminal labels collected from a treebank, sorted for determinism.
  static ActionInventory from_treebank(const Vocabulary& vocab,
                                       const std::vector<ParseTree>& trees);

  int word_count() const { return word_count_; }
  int nonterminal_count() const { return static_cast<int>(labels_.size()); }
  int symbol_count() const { return word_count_ + nonterminal_count() + 1; }
  int close_symbol() const { return symbol_count() - 1; }

  int symbol_of(const Action& a) const;
  Action action_of(int symbol) const;
  int nonterminal_index(const std::string& label) const;  // -1 when unknown
  const std::string& nonterminal_label(int index) const { return labels_.at(static_cast<std::size_t>(index)); }
  const std::vector<std::string>& nonterminals() const { return labels_; }
  const Vocabulary& vocab() const { return *vocab_; }

  // "(X" / ")" / word surface string, as in the linearized form.
  std::string symbol_string(int symbol) const;

 private:
  const Vocabulary* vocab_;
  int word_count_;
  std::vector<std::string> labels_;
  std::map<std::string, int> label_index_;
};

// Value-type generative parser state; apply_action returns a fresh state so
// beam fan-out never shares mutable structure.
struct OpenConstituent {
  std::int32_t label = -1;
  std::vector<ParseTree> children;
};

struct ParserState {
  std::vector<OpenConstituent> stack;
  std::int32_t gen_count = 0;
  bool terminated = false;
  ParseTree completed_root;  // meaningful only when terminated

  int open_count() const { return static_cast<int>(stack.size()); }
};

struct TransitionLimits {
  int max_open = 100;
  // Words the evaluated sentence still has to produce; -1 leaves generation
  // unrestricted, 0 switches to the closing phase where only CLOSE applies.
  int words_remaining = -1;
};

struct ActionKindSet {
  bool open = false;
  bool gen = false;
  bool close = false;
};

// Kind-level validity; throws InvalidStateError on terminated states.
ActionKindSet valid_actions(const ParserState& state, const TransitionLimits& limits);

// Structural transition; enforces the rules that do not depend on limits
// (GEN without an open constituent, closing an empty constituent, closing the
// root before any GEN, acting on a terminated state).
ParserState apply_action(const ParserState& state, const Action& action,
                         const ActionInventory& inventory);

// Depth-first derivation: OPEN at each internal node, GEN at each terminal,
// CLOSE when a node's children are exhausted.
ActionSequence oracle_actions(const ParseTree& tree, const ActionInventory& inventory);

// Replays a full derivation; TransitionError (with the offending index) if
// the sequence is not executable or does not terminate.
ParseTree decode_tree(const ActionSequence& actions, const ActionInventory& inventory);

// Flat symbol stream over the extended vocabulary; invertible.
std::vector<TokenId> linearize_plm(const ParseTree& tree, const ActionInventory& inventory);
std::vector<TokenId> symbols_of(const ActionSequence& actions, const ActionInventory& inventory);
ActionSequence delinearize(const std::vector<TokenId>& symbols, const ActionInventory& inventory);

// Per-symbol mask over the inventory: kind validity plus the reserved-marker
// ban (<s> and </s> are never generated as terminals).
std::vector<char> action_mask(const ParserState& state, const TransitionLimits& limits,
                              const ActionInventory& inventory);

// Masked renormalized distribution (double precision) over action symbols;
// masked symbols carry exactly zero.
Eigen::VectorXd masked_action_dist(const Eigen::VectorXd& logits, const std::vector<char>& mask);
Eigen::VectorXd masked_action_log_dist(const Eigen::VectorXd& logits,
                                       const std::vector<char>& mask);

// One space-separated action sequence per line, rendered as in
// linearize_plm, for cross-checking against external implementations.
void write_oracle_file(const std::string& path, const std::vector<ParseTree>& trees,
                       const ActionInventory& inventory);

}  // namespace syneval::synlm
