#pragma once

#include <memory>
#include <vector>

#include "syneval/nnet/sequence_lm.hpp"
#include "syneval/nnet/train.hpp"
#include "syneval/synlm/actions.hpp"

namespace syneval::synlm {

using nnet::Mat;
using nnet::NodeRef;
using nnet::Vec;

// ---------------------------------------------------------------------------
// Recurrent-composition joint model: a stack LSTM over constituent
// representations, completed constituents composed by a bidirectional LSTM
// over the label embedding and child representations.
// ---------------------------------------------------------------------------

template <typename Scalar>
class RnngModel {
 public:
  static constexpr double kInnerInit = 0.1;
  static constexpr double kHeadInit = 0.02;

  RnngModel(const ActionInventory* inventory, nnet::RecurrentDims dims, std::uint64_t init_seed)
      : inv_(inventory), dims_(dims) {
    Rng rng(init_seed);
    const int E = dims.embedding;
    const int H = dims.hidden;
    const int V = inv_->word_count();
    const int N = inv_->nonterminal_count();
    word_emb_ = store_.add_gaussian("word_emb", E, V, rng, kInnerInit);
    nt_emb_ = store_.add_gaussian("nt_emb", E, N, rng, kInnerInit);
    guard_ = store_.add_gaussian("stack_guard", E, 1, rng, kInnerInit);
    for (int l = 0; l < dims.layers; ++l) {
      const int in = l == 0 ? E : H;
      const std::string p = "stack" + std::to_string(l) + "_";
      wx_.push_back(store_.add_gaussian(p + "wx", 4 * H, in, rng, kInnerInit));
      wh_.push_back(store_.add_gaussian(p + "wh", 4 * H, H, rng, kInnerInit));
      const int b = store_.add(p + "b", 4 * H, 1);
      store_.slot(b).value.block(H, 0, H, 1).setConstant(Scalar(1));
      bias_.push_back(b);
    }
    comp_fwd_wx_ = store_.add_gaussian("comp_fwd_wx", 4 * E, E, rng, kInnerInit);
    comp_fwd_wh_ = store_.add_gaussian("comp_fwd_wh", 4 * E, E, rng, kInnerInit);
    comp_fwd_b_ = store_.add("comp_fwd_b", 4 * E, 1);
    comp_bwd_wx_ = store_.add_gaussian("comp_bwd_wx", 4 * E, E, rng, kInnerInit);
    comp_bwd_wh_ = store_.add_gaussian("comp_bwd_wh", 4 * E, E, rng, kInnerInit);
    comp_bwd_b_ = store_.add("comp_bwd_b", 4 * E, 1);
    comp_w_ = store_.add_gaussian("comp_w", E, 2 * E, rng, kInnerInit);
    comp_b_ = store_.add("comp_b", E, 1);
    out_w_ = store_.add_gaussian("out_w", inv_->symbol_count(), H, rng, kHeadInit);
    out_b_ = store_.add("out_b", inv_->symbol_count(), 1);
  }

  const ActionInventory& inventory() const { return *inv_; }
  nnet::ParamStore<Scalar>& params() { return store_; }
  const nnet::ParamStore<Scalar>& params() const { return store_; }
  const nnet::RecurrentDims& dims() const { return dims_; }

  // ----- raw inference over a persistent functional stack -----

  struct StackNode {
    std::shared_ptr<const StackNode> below;
    std::vector<Vec<Scalar>> h, c;  // stack-LSTM state after this push
    Vec<Scalar> rep;                // element representation
    bool open_marker = false;
    std::int32_t nt_label = -1;
  };

  struct State {
    std::shared_ptr<const StackNode> top;
  };

  State initial_state() const {
    State s;
    s.top = push_node(nullptr, store_.slot(guard_).value.col(0), false, -1);
    return s;
  }

  Vec<Scalar> action_logits(const State& s) const {
    return store_.slot(out_w_).value * s.top->h.back() + store_.slot(out_b_).value.col(0);
  }

  State advance(const State& s, const Action& a) const {
    State next;
    switch (a.kind) {
      case ActionKind::OpenNt:
        next.top = push_node(s.top, store_.slot(nt_emb_).value.col(a.arg), true, a.arg);
        return next;
      case ActionKind::Gen:
        next.top = push_node(s.top, store_.slot(word_emb_).value.col(a.arg), false, -1);
        return next;
      case ActionKind::Close: {
        // collect children reps down to the matching open marker
        std::vector<const StackNode*> kids;
        const StackNode* walk = s.top.get();
        while (walk && !walk->open_marker) {
          kids.push_back(walk);
          walk = walk->below.get();
        }
        if (!walk) throw TransitionError("rnng advance: CLOSE without open marker");
        const int label = walk->nt_label;
        std::vector<Vec<Scalar>> fwd_inputs;
        fwd_inputs.push_back(store_.slot(nt_emb_).value.col(label));
        for (auto it = kids.rbegin(); it != kids.rend(); ++it)
          fwd_inputs.push_back((*it)->rep);
        const Vec<Scalar> composed = compose(fwd_inputs);
        next.top = push_node(walk->below, composed, false, -1);
        return next;
      }
    }
    throw TransitionError("rnng advance: bad action");
  }

  // The composed representation depends only on the label and child reps.
  Vec<Scalar> compose(const std::vector<Vec<Scalar>>& label_then_children) const {
    const int E = dims_.embedding;
    Vec<Scalar> hf = Vec<Scalar>::Zero(E), cf = Vec<Scalar>::Zero(E);
    for (const Vec<Scalar>& x : label_then_children)
      lstm_cell_raw(store_.slot(comp_fwd_wx_).value, store_.slot(comp_fwd_wh_).value,
                    store_.slot(comp_fwd_b_).value, x, hf, cf);
    Vec<Scalar> hb = Vec<Scalar>::Zero(E), cb = Vec<Scalar>::Zero(E);
    lstm_cell_raw(store_.slot(comp_bwd_wx_).value, store_.slot(comp_bwd_wh_).value,
                  store_.slot(comp_bwd_b_).value, label_then_children.front(), hb, cb);
    for (std::size_t i = label_then_children.size(); i > 1; --i)
      lstm_cell_raw(store_.slot(comp_bwd_wx_).value, store_.slot(comp_bwd_wh_).value,
                    store_.slot(comp_bwd_b_).value, label_then_children[i - 1], hb, cb);
    Vec<Scalar> cat(2 * E);
    cat << hf, hb;
    return (store_.slot(comp_w_).value * cat + store_.slot(comp_b_).value.col(0))
        .array()
        .tanh()
        .matrix();
  }

  const Vec<Scalar>& top_rep(const State& s) const { return s.top->rep; }

  // ----- tape training: replay a symbol stream (an oracle linearization) ---

  NodeRef sequence_loss(nnet::Graph<Scalar>& g, const std::vector<TokenId>& symbols,
                        double dropout_rate, Rng* dropout_rng, std::size_t* n_predictions) const {
    if (n_predictions) *n_predictions = symbols.size();
    const int H = dims_.hidden;
    const int E = dims_.embedding;
    const NodeRef word_emb = g.param(word_emb_);
    const NodeRef nt_emb = g.param(nt_emb_);
    std::vector<NodeRef> wx, wh, b;
    for (int l = 0; l < dims_.layers; ++l) {
      wx.push_back(g.param(wx_[l]));
      wh.push_back(g.param(wh_[l]));
      b.push_back(g.param(bias_[l]));
    }
    const NodeRef ow = g.param(out_w_);
    const NodeRef ob = g.param(out_b_);
    const NodeRef fwx = g.param(comp_fwd_wx_), fwh = g.param(comp_fwd_wh_),
                  fb = g.param(comp_fwd_b_);
    const NodeRef bwx = g.param(comp_bwd_wx_), bwh = g.param(comp_bwd_wh_),
                  bb = g.param(comp_bwd_b_);
    const NodeRef cw = g.param(comp_w_), cb = g.param(comp_b_);
    const NodeRef zeroH = g.constant(Mat<Scalar>::Zero(H, 1));
    const NodeRef zeroE = g.constant(Mat<Scalar>::Zero(E, 1));

    struct TapeElem {
      std::vector<NodeRef> h, c;
      NodeRef rep;
      bool open_marker;
      std::int32_t nt_label;
    };

    auto lstm_tower = [&](const std::vector<NodeRef>& h_prev, const std::vector<NodeRef>& c_prev,
                          NodeRef x) {
      TapeElem e;
      e.rep = x;
      for (int l = 0; l < dims_.layers; ++l) {
        x = nnet::dropout(g, x, dropout_rate, dropout_rng);
        const NodeRef z =
            nnet::add_col(g, nnet::add(g, nnet::matmul(g, wx[l], x), nnet::matmul(g, wh[l], h_prev[l])),
                          b[l]);
        const NodeRef i = nnet::sigmoid(g, nnet::slice_rows(g, z, 0, H));
        const NodeRef f = nnet::sigmoid(g, nnet::slice_rows(g, z, H, H));
        const NodeRef o = nnet::sigmoid(g, nnet::slice_rows(g, z, 2 * H, H));
        const NodeRef u = nnet::tanh_op(g, nnet::slice_rows(g, z, 3 * H, H));
        e.c.push_back(nnet::add(g, nnet::cwise_mul(g, f, c_prev[l]), nnet::cwise_mul(g, i, u)));
        e.h.push_back(nnet::cwise_mul(g, o, nnet::tanh_op(g, e.c.back())));
        x = e.h.back();
      }
      return e;
    };

    auto comp_lstm_cell = [&](NodeRef wxn, NodeRef whn, NodeRef bn, NodeRef x, NodeRef& h,
                              NodeRef& c) {
      const NodeRef z =
          nnet::add_col(g, nnet::add(g, nnet::matmul(g, wxn, x), nnet::matmul(g, whn, h)), bn);
      const NodeRef i = nnet::sigmoid(g, nnet::slice_rows(g, z, 0, E));
      const NodeRef f = nnet::sigmoid(g, nnet::slice_rows(g, z, E, E));
      const NodeRef o = nnet::sigmoid(g, nnet::slice_rows(g, z, 2 * E, E));
      const NodeRef u = nnet::tanh_op(g, nnet::slice_rows(g, z, 3 * E, E));
      c = nnet::add(g, nnet::cwise_mul(g, f, c), nnet::cwise_mul(g, i, u));
      h = nnet::cwise_mul(g, o, nnet::tanh_op(g, c));
    };

    std::vector<TapeElem> stack;
    const std::vector<NodeRef> zerosH(static_cast<std::size_t>(dims_.layers), zeroH);
    TapeElem base = lstm_tower(zerosH, zerosH, g.param(guard_));
    std::vector<NodeRef> losses;
    losses.reserve(symbols.size());

    auto top_elem = [&]() -> const TapeElem& { return stack.empty() ? base : stack.back(); };

    for (TokenId sym : symbols) {
      const NodeRef hid = nnet::dropout(g, top_elem().h.back(), dropout_rate, dropout_rng);
      const NodeRef logits = nnet::add_col(g, nnet::matmul(g, ow, hid), ob);
      losses.push_back(nnet::softmax_cross_entropy(g, logits, {static_cast<int>(sym)}));

      const Action a = inv_->action_of(sym);
      switch (a.kind) {
        case ActionKind::OpenNt: {
          TapeElem e = lstm_tower(top_elem().h, top_elem().c,
                                  nnet::cols_select(g, nt_emb, {a.arg}));
          e.open_marker = true;
          e.nt_label = a.arg;
          stack.push_back(std::move(e));
          break;
        }
        case ActionKind::Gen: {
          TapeElem e = lstm_tower(top_elem().h, top_elem().c,
                                  nnet::cols_select(g, word_emb, {static_cast<int>(a.arg)}));
          e.open_marker = false;
          stack.push_back(std::move(e));
          break;
        }
        case ActionKind::Close: {
          std::vector<NodeRef> kids;
          while (!stack.empty() && !stack.back().open_marker) {
            kids.push_back(stack.back().rep);
            stack.pop_back();
          }
          if (stack.empty()) throw TransitionError("rnng loss: CLOSE without open marker");
          const std::int32_t label = stack.back().nt_label;
          stack.pop_back();
          std::vector<NodeRef> seq;
          seq.push_back(nnet::cols_select(g, nt_emb, {label}));
          for (auto it = kids.rbegin(); it != kids.rend(); ++it) seq.push_back(*it);
          NodeRef hf = zeroE, cf = zeroE, hb = zeroE, cbn = zeroE;
          for (NodeRef x : seq) comp_lstm_cell(fwx, fwh, fb, x, hf, cf);
          comp_lstm_cell(bwx, bwh, bb, seq.front(), hb, cbn);
          for (std::size_t i = seq.size(); i > 1; --i)
            comp_lstm_cell(bwx, bwh, bb, seq[i - 1], hb, cbn);
          const NodeRef composed = nnet::tanh_op(
              g, nnet::add_col(g, nnet::matmul(g, cw, nnet::concat_rows(g, {hf, hb})), cb));
          const std::vector<NodeRef>& ph = stack.empty() ? base.h : stack.back().h;
          const std::vector<NodeRef>& pc = stack.empty() ? base.c : stack.back().c;
          TapeElem e = lstm_tower(ph, pc, composed);
          e.open_marker = false;
          stack.push_back(std::move(e));
          break;
        }
      }
    }
    return nnet::sum_scalars(g, losses);
  }

  // Unmasked per-action NLL of a symbol stream; the stream has no </s> event
  // so include_eos is ignored.
  std::vector<double> sentence_surprisals(const std::vector<TokenId>& symbols,
                                          bool /*include_eos*/) const {
    State s = initial_state();
    std::vector<double> out;
    out.reserve(symbols.size());
    for (TokenId sym : symbols) {
      const Vec<Scalar> logits = action_logits(s);
      out.push_back(nnet::RecurrentLM<Scalar>::nll_from_logits(logits, sym));
      s = advance(s, inv_->action_of(sym));
    }
    return out;
  }

 private:
  std::shared_ptr<const StackNode> push_node(std::shared_ptr<const StackNode> below,
                                             Vec<Scalar> rep, bool open_marker,
                                             std::int32_t label) const {
    auto node = std::make_shared<StackNode>();
    node->below = below;
    node->rep = std::move(rep);
    node->open_marker = open_marker;
    node->nt_label = label;
    const int H = dims_.hidden;
    Vec<Scalar> x = node->rep;
    for (int l = 0; l < dims_.layers; ++l) {
      Vec<Scalar> h = below ? below->h[static_cast<std::size_t>(l)] : Vec<Scalar>::Zero(H);
      Vec<Scalar> c = below ? below->c[static_cast<std::size_t>(l)] : Vec<Scalar>::Zero(H);
      lstm_cell_raw(store_.slot(wx_[static_cast<std::size_t>(l)]).value,
                    store_.slot(wh_[static_cast<std::size_t>(l)]).value,
                    store_.slot(bias_[static_cast<std::size_t>(l)]).value, x, h, c);
      node->h.push_back(h);
      node->c.push_back(c);
      x = node->h.back();
    }
    return node;
  }

  static void lstm_cell_raw(const Mat<Scalar>& wx, const Mat<Scalar>& wh, const Mat<Scalar>& b,
                            const Vec<Scalar>& x, Vec<Scalar>& h, Vec<Scalar>& c) {
    const int H = static_cast<int>(h.size());
    Vec<Scalar> z = wx * x + wh * h + b.col(0);
    const auto seg = [&](int k) { return z.segment(k * H, H); };
    const Vec<Scalar> i =
        seg(0).unaryExpr([](Scalar v) { return Scalar(1) / (Scalar(1) + std::exp(-v)); });
    const Vec<Scalar> f =
        seg(1).unaryExpr([](Scalar v) { return Scalar(1) / (Scalar(1) + std::exp(-v)); });
    const Vec<Scalar> o =
        seg(2).unaryExpr([](Scalar v) { return Scalar(1) / (Scalar(1) + std::exp(-v)); });
    const Vec<Scalar> u = seg(3).array().tanh().matrix();
    c = f.cwiseProduct(c) + i.cwiseProduct(u);
    h = o.cwiseProduct(c.array().tanh().matrix());
  }

  const ActionInventory* inv_;
  nnet::RecurrentDims dims_;
  nnet::ParamStore<Scalar> store_;
  int word_emb_ = -1, nt_emb_ = -1, guard_ = -1;
  std::vector<int> wx_, wh_, bias_;
  int comp_fwd_wx_ = -1, comp_fwd_wh_ = -1, comp_fwd_b_ = -1;
  int comp_bwd_wx_ = -1, comp_bwd_wh_ = -1, comp_bwd_b_ = -1;
  int comp_w_ = -1, comp_b_ = -1, out_w_ = -1, out_b_ = -1;
};

// ---------------------------------------------------------------------------
// Action-sequence attention model: the vanilla attention architecture over
// the extended vocabulary, plus a persistent-cache beam state.
// ---------------------------------------------------------------------------

template <typename Scalar>
class PlmModel {
 public:
  PlmModel(const ActionInventory* inventory, nnet::AttentionDims dims, std::uint64_t init_seed)
      : inv_(inventory), lm_(inventory->symbol_count(), dims, init_seed) {}

  const ActionInventory& inventory() const { return *inv_; }
  nnet::AttentionLM<Scalar>& lm() { return lm_; }
  const nnet::AttentionLM<Scalar>& lm() const { return lm_; }
  nnet::ParamStore<Scalar>& params() { return lm_.params(); }
  const nnet::ParamStore<Scalar>& params() const { return lm_.params(); }

  // Persistent per-position cache chain; states share prefixes across the
  // beam and assemble dense caches on demand.
  struct ChainNode {
    std::shared_ptr<const ChainNode> prev;
    std::vector<Vec<Scalar>> k, v;  // one column per layer
  };

  struct State {
    std::shared_ptr<const ChainNode> tail;
    int length = 0;
    Vec<Scalar> logits;  // for the next symbol
  };

  State initial_state() const { return advance_symbol(State{}, Vocabulary::kBos); }

  Vec<Scalar> action_logits(const State& s) const { return s.logits; }

  State advance(const State& s, const Action& a) const {
    return advance_symbol(s, inv_->symbol_of(a));
  }

  State advance_symbol(const State& s, TokenId symbol) const {
    const int layers = lm_.layer_count();
    const int d = lm_.dims().hidden;
    const int pos = s.length;
    std::vector<Mat<Scalar>> K(static_cast<std::size_t>(layers)),
        V(static_cast<std::size_t>(layers));
    for (int l = 0; l < layers; ++l) {
      K[static_cast<std::size_t>(l)].resize(d, pos + 1);
      V[static_cast<std::size_t>(l)].resize(d, pos + 1);
    }
    const ChainNode* walk = s.tail.get();
    for (int col = pos - 1; col >= 0; --col) {
      for (int l = 0; l < layers; ++l) {
        K[static_cast<std::size_t>(l)].col(col) = walk->k[static_cast<std::size_t>(l)];
        V[static_cast<std::size_t>(l)].col(col) = walk->v[static_cast<std::size_t>(l)];
      }
      walk = walk->prev.get();
    }
    State next;
    next.logits = lm_.step_with_cache(K, V, pos, symbol);
    auto node = std::make_shared<ChainNode>();
    node->prev = s.tail;
    node->k.reserve(static_cast<std::size_t>(layers));
    node->v.reserve(static_cast<std::size_t>(layers));
    for (int l = 0; l < layers; ++l) {
      node->k.push_back(K[static_cast<std::size_t>(l)].col(pos));
      node->v.push_back(V[static_cast<std::size_t>(l)].col(pos));
    }
    next.tail = std::move(node);
    next.length = pos + 1;
    return next;
  }

  NodeRef sequence_loss(nnet::Graph<Scalar>& g, const std::vector<TokenId>& symbols,
                        double dropout_rate, Rng* dropout_rng, std::size_t* n_predictions) const {
    return lm_.sequence_loss(g, symbols, dropout_rate, dropout_rng, n_predictions);
  }

  std::vector<double> sentence_surprisals(const std::vector<TokenId>& symbols,
                                          bool include_eos) const {
    return lm_.sentence_surprisals(symbols, include_eos);
  }

 private:
  const ActionInventory* inv_;
  nnet::AttentionLM<Scalar> lm_;
};

// Masked renormalized next-action distribution (spec: next_action_dist).
template <class Model>
Eigen::VectorXd next_action_dist(const Model& model, const typename Model::State& state,
                                 const ParserState& parser, const TransitionLimits& limits) {
  const auto logits = model.action_logits(state);
  Eigen::VectorXd logits_d(logits.size());
  for (Eigen::Index i = 0; i < logits.size(); ++i)
    logits_d(i) = static_cast<double>(logits(i));
  return masked_action_dist(logits_d, action_mask(parser, limits, model.inventory()));
}

// Joint log probability of a derivation: the sum of masked renormalized
// log probabilities along the action sequence (structural mask only).
template <class Model>
double joint_logprob(const Model& model, const ActionSequence& actions,
                     const TransitionLimits& limits) {
  typename Model::State s = model.initial_state();
  ParserState parser;
  double total = 0.0;
  for (const Action& a : actions) {
    const auto logits = model.action_logits(s);
    Eigen::VectorXd logits_d(logits.size());
    for (Eigen::Index i = 0; i < logits.size(); ++i)
      logits_d(i) = static_cast<double>(logits(i));
    const Eigen::VectorXd logd =
        masked_action_log_dist(logits_d, action_mask(parser, limits, model.inventory()));
    total += logd(model.inventory().symbol_of(a));
    parser = apply_action(parser, a, model.inventory());
    s = model.advance(s, a);
  }
  return total;
}

}  // namespace syneval::synlm
