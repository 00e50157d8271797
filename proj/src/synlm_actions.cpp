#include "syneval/synlm/actions.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>

namespace syneval::synlm {

ActionInventory::ActionInventory(const Vocabulary& vocab, std::vector<std::string> nonterminals)
    : vocab_(&vocab), word_count_(vocab.size()), labels_(std::move(nonterminals)) {
  for (std::size_t i = 0; i < labels_.size(); ++i)
    label_index_.emplace(labels_[i], static_cast<int>(i));
}

ActionInventory ActionInventory::from_treebank(const Vocabulary& vocab,
                                               const std::vector<ParseTree>& trees) {
  std::set<std::string> labels;
  const std::function<void(const ParseTree&)> walk = [&](const ParseTree& t) {
    if (t.is_terminal()) return;
    labels.insert(t.label);
    for (const ParseTree& kid : t.children) walk(kid);
  };
  for (const ParseTree& t : trees) walk(t);
  return ActionInventory(vocab, std::vector<std::string>(labels.begin(), labels.end()));
}

int ActionInventory::symbol_of(const Action& a) const {
  switch (a.kind) {
    case ActionKind::Gen: return a.arg;
    case ActionKind::OpenNt: return word_count_ + a.arg;
    case ActionKind::Close: return close_symbol();
  }
  throw std::invalid_argument("bad action kind");
}

Action ActionInventory::action_of(int symbol) const {
  if (symbol < 0 || symbol >= symbol_count())
    throw std::invalid_argument("action symbol out of range: " + std::to_string(symbol));
  if (symbol < word_count_) return Action::gen(symbol);
  if (symbol < word_count_ + nonterminal_count()) return Action::open(symbol - word_count_);
  return Action::close();
}

int ActionInventory::nonterminal_index(const std::string& label) const {
  auto it = label_index_.find(label);
  return it == label_index_.end() ? -1 : it->second;
}

std::string ActionInventory::symbol_string(int symbol) const {
  const Action a = action_of(symbol);
  switch (a.kind) {
    case ActionKind::Gen: return vocab_->token(a.arg);
    case ActionKind::OpenNt: return "(" + labels_[static_cast<std::size_t>(a.arg)];
    case ActionKind::Close: return ")";
  }
  return "?";
}

ActionKindSet valid_actions(const ParserState& state, const TransitionLimits& limits) {
  if (state.terminated) throw InvalidStateError("valid_actions: state is terminated");
  ActionKindSet set;
  const bool closing_phase = limits.words_remaining == 0;
  set.open = !closing_phase && state.open_count() < limits.max_open;
  set.gen = !closing_phase && state.open_count() >= 1;
  set.close = state.open_count() >= 1 && !state.stack.back().children.empty() &&
              !(state.open_count() == 1 && state.gen_count == 0);
  return set;
}

ParserState apply_action(const ParserState& state, const Action& action,
                         const ActionInventory& inventory) {
  auto describe = [&]() {
    return "open=" + std::to_string(state.open_count()) +
           " gen=" + std::to_string(state.gen_count) +
           (state.terminated ? " terminated" : "");
  };
  if (state.terminated)
    throw TransitionError("apply_action on terminated state (" + describe() + ")");
  ParserState next = state;
  switch (action.kind) {
    case ActionKind::OpenNt: {
      if (action.arg < 0 || action.arg >= inventory.nonterminal_count())
        throw TransitionError("OPEN with unknown nonterminal index " + std::to_string(action.arg));
      OpenConstituent open;
      open.label = action.arg;
      next.stack.push_back(std::move(open));
      return next;
    }
    case ActionKind::Gen: {
      if (next.stack.empty())
        throw TransitionError("GEN with no open nonterminal (" + describe() + ")");
      if (action.arg < 0 || action.arg >= inventory.word_count())
        throw TransitionError("GEN with out-of-range token id " + std::to_string(action.arg));
      next.stack.back().children.push_back(
          ParseTree::terminal(inventory.vocab().token(action.arg)));
      ++next.gen_count;
      return next;
    }
    case ActionKind::Close: {
      if (next.stack.empty())
        throw TransitionError("CLOSE with no open nonterminal (" + describe() + ")");
      if (next.stack.back().children.empty())
        throw TransitionError("CLOSE of empty constituent (" + describe() + ")");
      if (next.stack.size() == 1 && next.gen_count == 0)
        throw TransitionError("CLOSE of root before any GEN (" + describe() + ")");
      OpenConstituent top = std::move(next.stack.back());
      next.stack.pop_back();
      ParseTree completed = ParseTree::internal(
          inventory.nonterminal_label(top.label), std::move(top.children));
      if (next.stack.empty()) {
        next.terminated = true;
        next.completed_root = std::move(completed);
      } else {
        next.stack.back().children.push_back(std::move(completed));
      }
      return next;
    }
  }
  throw TransitionError("unknown action kind");
}

namespace {

void oracle_walk(const ParseTree& t, const ActionInventory& inv, ActionSequence& out) {
  if (t.is_terminal()) {
    out.push_back(Action::gen(inv.vocab().to_id(t.token)));
    return;
  }
  const int nt = inv.nonterminal_index(t.label);
  if (nt < 0) throw std::invalid_argument("oracle_actions: unknown nonterminal " + t.label);
  out.push_back(Action::open(nt));
  for (const ParseTree& kid : t.children) oracle_walk(kid, inv, out);
  out.push_back(Action::close());
}

}  // namespace

ActionSequence oracle_actions(const ParseTree& tree, const ActionInventory& inventory) {
  if (tree.is_terminal())
    throw std::invalid_argument("oracle_actions: tree root must be a constituent");
  ActionSequence out;
  oracle_walk(tree, inventory, out);
  return out;
}

ParseTree decode_tree(const ActionSequence& actions, const ActionInventory& inventory) {
  ParserState state;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (state.terminated)
      throw TransitionError("decode_tree: trailing action at index " + std::to_string(i));
    try {
      state = apply_action(state, actions[i], inventory);
    } catch (const TransitionError& e) {
      throw TransitionError("decode_tree: index " + std::to_string(i) + ": " + e.what());
    }
  }
  if (!state.terminated) throw TransitionError("decode_tree: sequence does not terminate");
  return state.completed_root;
}

std::vector<TokenId> symbols_of(const ActionSequence& actions, const ActionInventory& inventory) {
  std::vector<TokenId> out;
  out.reserve(actions.size());
  for (const Action& a : actions) out.push_back(inventory.symbol_of(a));
  return out;
}

std::vector<TokenId> linearize_plm(const ParseTree& tree, const ActionInventory& inventory) {
  return symbols_of(oracle_actions(tree, inventory), inventory);
}

ActionSequence delinearize(const std::vector<TokenId>& symbols,
                           const ActionInventory& inventory) {
  ActionSequence out;
  out.reserve(symbols.size());
  for (TokenId s : symbols) out.push_back(inventory.action_of(s));
  return out;
}

std::vector<char> action_mask(const ParserState& state, const TransitionLimits& limits,
                              const ActionInventory& inventory) {
  const ActionKindSet kinds = valid_actions(state, limits);
  std::vector<char> mask(static_cast<std::size_t>(inventory.symbol_count()), 0);
  if (kinds.gen) {
    for (int w = 0; w < inventory.word_count(); ++w)
      mask[static_cast<std::size_t>(w)] =
          inventory.vocab().is_reserved_marker(w) ? 0 : 1;
  }
  if (kinds.open) {
    for (int n = 0; n < inventory.nonterminal_count(); ++n)
      mask[static_cast<std::size_t>(inventory.word_count() + n)] = 1;
  }
  if (kinds.close) mask[static_cast<std::size_t>(inventory.close_symbol())] = 1;
  return mask;
}

Eigen::VectorXd masked_action_log_dist(const Eigen::VectorXd& logits,
                                       const std::vector<char>& mask) {
  double mx = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < logits.size(); ++i)
    if (mask[static_cast<std::size_t>(i)]) mx = std::max(mx, logits(i));
  if (!std::isfinite(mx)) throw InvalidStateError("masked_action_dist: no valid action");
  double z = 0.0;
  for (Eigen::Index i = 0; i < logits.size(); ++i)
    if (mask[static_cast<std::size_t>(i)]) z += std::exp(logits(i) - mx);
  const double logz = std::log(z) + mx;
  Eigen::VectorXd out = Eigen::VectorXd::Constant(logits.size(),
                                                  -std::numeric_limits<double>::infinity());
  for (Eigen::Index i = 0; i < logits.size(); ++i)
    if (mask[static_cast<std::size_t>(i)]) out(i) = logits(i) - logz;
  return out;
}

Eigen::VectorXd masked_action_dist(const Eigen::VectorXd& logits, const std::vector<char>& mask) {
  Eigen::VectorXd logd = masked_action_log_dist(logits, mask);
  Eigen::VectorXd out(logd.size());
  for (Eigen::Index i = 0; i < logd.size(); ++i)
    out(i) = std::isfinite(logd(i)) ? std::exp(logd(i)) : 0.0;
  return out;
}

void write_oracle_file(const std::string& path, const std::vector<ParseTree>& trees,
                       const ActionInventory& inventory) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write oracle file: " + path);
  for (const ParseTree& t : trees) {
    const std::vector<TokenId> symbols = linearize_plm(t, inventory);
    for (std::size_t i = 0; i < symbols.size(); ++i) {
      if (i) out << ' ';
      out << inventory.symbol_string(symbols[i]);
    }
    out << '\n';
  }
}

}  // namespace syneval::synlm
