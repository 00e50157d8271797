#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "syneval/nnet/graph.hpp"
#include "syneval/treebank.hpp"

namespace syneval::nnet {

// Desk-scale defaults; the paper-scale presets live in pipeline.hpp.
struct RecurrentDims {
  int layers = 2;
  int hidden = 64;
  int embedding = 64;
};

struct AttentionDims {
  int layers = 2;
  int heads = 4;
  int hidden = 128;  // embedding size equals hidden
  int max_seq = 512;
};

// ---------------------------------------------------------------------------
// Recurrent (LSTM) language model.
// ---------------------------------------------------------------------------

template <typename Scalar>
class RecurrentLM {
 public:
  // Inner weights start at 0.1 so token identities separate quickly; the
  // output head starts small so the initial distribution is near uniform.
  static constexpr double kInnerInit = 0.1;
  static constexpr double kHeadInit = 0.02;

  RecurrentLM(int vocab_size, RecurrentDims dims, std::uint64_t init_seed)
      : vocab_(vocab_size), dims_(dims) {
    Rng rng(init_seed);
    emb_ = store_.add_gaussian("emb", dims.embedding, vocab_size, rng, kInnerInit);
    for (int l = 0; l < dims.layers; ++l) {
      const int in = l == 0 ? dims.embedding : dims.hidden;
      const std::string p = "lstm" + std::to_string(l) + "_";
      wx_.push_back(store_.add_gaussian(p + "wx", 4 * dims.hidden, in, rng, kInnerInit));
      wh_.push_back(store_.add_gaussian(p + "wh", 4 * dims.hidden, dims.hidden, rng, kInnerInit));
      const int b = store_.add(p + "b", 4 * dims.hidden, 1);
      // forget-gate bias starts at 1
      store_.slot(b).value.block(dims.hidden, 0, dims.hidden, 1).setConstant(Scalar(1));
      bias_.push_back(b);
    }
    out_w_ = store_.add_gaussian("out_w", vocab_size, dims.hidden, rng, kHeadInit);
    out_b_ = store_.add("out_b", vocab_size, 1);
  }

  int vocab_size() const { return vocab_; }
  const RecurrentDims& dims() const { return dims_; }
  ParamStore<Scalar>& params() { return store_; }
  const ParamStore<Scalar>& params() const { return store_; }

  // Tape forward over [<s>, ids...] predicting [ids..., </s>]; returns the
  // summed cross-entropy node and reports the number of predictions.
  NodeRef sequence_loss(Graph<Scalar>& g, const std::vector<TokenId>& ids, double dropout_rate,
                        Rng* dropout_rng, std::size_t* n_predictions) const {
    std::vector<int> inputs{Vocabulary::kBos};
    std::vector<int> targets;
    for (TokenId t : ids) {
      inputs.push_back(t);
      targets.push_back(t);
    }
    targets.push_back(Vocabulary::kEos);
    if (n_predictions) *n_predictions = targets.size();

    const NodeRef emb = g.param(emb_);
    std::vector<NodeRef> wx, wh, b;
    for (int l = 0; l < dims_.layers; ++l) {
      wx.push_back(g.param(wx_[l]));
      wh.push_back(g.param(wh_[l]));
      b.push_back(g.param(bias_[l]));
    }
    const NodeRef ow = g.param(out_w_);
    const NodeRef ob = g.param(out_b_);

    const int H = dims_.hidden;
    std::vector<NodeRef> h(dims_.layers), c(dims_.layers);
    const NodeRef zero = g.constant(Mat<Scalar>::Zero(H, 1));
    for (int l = 0; l < dims_.layers; ++l) h[l] = c[l] = zero;

    std::vector<NodeRef> losses;
    losses.reserve(targets.size());
    for (std::size_t t = 0; t < inputs.size(); ++t) {
      NodeRef x = cols_select(g, emb, {inputs[t]});
      for (int l = 0; l < dims_.layers; ++l) {
        x = dropout(g, x, dropout_rate, dropout_rng);
        const NodeRef z = add_col(g, add(g, matmul(g, wx[l], x), matmul(g, wh[l], h[l])), b[l]);
        const NodeRef i = sigmoid(g, slice_rows(g, z, 0, H));
        const NodeRef f = sigmoid(g, slice_rows(g, z, H, H));
        const NodeRef o = sigmoid(g, slice_rows(g, z, 2 * H, H));
        const NodeRef u = tanh_op(g, slice_rows(g, z, 3 * H, H));
        c[l] = add(g, cwise_mul(g, f, c[l]), cwise_mul(g, i, u));
        h[l] = cwise_mul(g, o, tanh_op(g, c[l]));
        x = h[l];
      }
      x = dropout(g, x, dropout_rate, dropout_rng);
      const NodeRef logits = add_col(g, matmul(g, ow, x), ob);
      losses.push_back(softmax_cross_entropy(g, logits, {targets[t]}));
    }
    return sum_scalars(g, losses);
  }

  // Raw incremental evaluation state.
  struct InferState {
    std::vector<Vec<Scalar>> h, c;
  };

  InferState initial_state() const {
    InferState s;
    s.h.assign(static_cast<std::size_t>(dims_.layers), Vec<Scalar>::Zero(dims_.hidden));
    s.c = s.h;
    return s;
  }

  // Advances on `token` and returns logits for the next prediction.
  Vec<Scalar> step(InferState& s, TokenId token) const {
    const int H = dims_.hidden;
    Vec<Scalar> x = store_.slot(emb_).value.col(token);
    for (int l = 0; l < dims_.layers; ++l) {
      Vec<Scalar> z = store_.slot(wx_[l]).value * x + store_.slot(wh_[l]).value * s.h[l] +
                      store_.slot(bias_[l]).value.col(0);
      const auto seg = [&](int k) { return z.segment(k * H, H); };
      const Vec<Scalar> i = seg(0).unaryExpr([](Scalar v) { return sigmoid_s(v); });
      const Vec<Scalar> f = seg(1).unaryExpr([](Scalar v) { return sigmoid_s(v); });
      const Vec<Scalar> o = seg(2).unaryExpr([](Scalar v) { return sigmoid_s(v); });
      const Vec<Scalar> u = seg(3).array().tanh().matrix();
      s.c[l] = f.cwiseProduct(s.c[l]) + i.cwiseProduct(u);
      s.h[l] = o.cwiseProduct(s.c[l].array().tanh().matrix());
      x = s.h[l];
    }
    return store_.slot(out_w_).value * x + store_.slot(out_b_).value.col(0);
  }

  // Per-token surprisal (natural log); </s> appended when include_eos.
  std::vector<double> sentence_surprisals(const std::vector<TokenId>& ids,
                                          bool include_eos) const {
    InferState s = initial_state();
    Vec<Scalar> logits = step(s, Vocabulary::kBos);
    std::vector<double> out;
    std::vector<TokenId> seq = ids;
    if (include_eos) seq.push_back(Vocabulary::kEos);
    out.reserve(seq.size());
    for (std::size_t i = 0; i < seq.size(); ++i) {
      out.push_back(nll_from_logits(logits, seq[i]));
      if (i + 1 < seq.size()) logits = step(s, seq[i]);
    }
    return out;
  }

  static double nll_from_logits(const Vec<Scalar>& logits, TokenId target) {
    // log-sum-exp in double for stable surprisals
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < logits.size(); ++i)
      mx = std::max(mx, static_cast<double>(logits(i)));
    double z = 0.0;
    for (Eigen::Index i = 0; i < logits.size(); ++i)
      z += std::exp(static_cast<double>(logits(i)) - mx);
    return std::log(z) + mx - static_cast<double>(logits(target));
  }

  static Scalar sigmoid_s(Scalar v) { return Scalar(1) / (Scalar(1) + std::exp(-v)); }

 private:
  int vocab_;
  RecurrentDims dims_;
  ParamStore<Scalar> store_;
  int emb_ = -1, out_w_ = -1, out_b_ = -1;
  std::vector<int> wx_, wh_, bias_;
};

// ---------------------------------------------------------------------------
// Decoder-only attention language model with learned positional embeddings.
// ---------------------------------------------------------------------------

template <typename Scalar>
class AttentionLM {
 public:
  static constexpr double kInnerInit = 0.1;
  static constexpr double kHeadInit = 0.02;

  AttentionLM(int vocab_size, AttentionDims dims, std::uint64_t init_seed)
      : vocab_(vocab_size), dims_(dims) {
    if (dims.hidden % dims.heads != 0)
      throw std::invalid_argument("attention: hidden must be divisible by heads");
    Rng rng(init_seed);
    const int d = dims.hidden;
    tok_emb_ = store_.add_gaussian("tok_emb", d, vocab_size, rng, kInnerInit);
    pos_emb_ = store_.add_gaussian("pos_emb", d, dims.max_seq, rng, kInnerInit);
    for (int l = 0; l < dims.layers; ++l) {
      const std::string p = "layer" + std::to_string(l) + "_";
      Layer lay;
      lay.ln1_g = store_.add(p + "ln1_g", d, 1);
      store_.slot(lay.ln1_g).value.setOnes();
      lay.ln1_b = store_.add(p + "ln1_b", d, 1);
      lay.wqkv = store_.add_gaussian(p + "wqkv", 3 * d, d, rng, kInnerInit);
      lay.bqkv = store_.add(p + "bqkv", 3 * d, 1);
      lay.wo = store_.add_gaussian(p + "wo", d, d, rng, kInnerInit);
      lay.bo = store_.add(p + "bo", d, 1);
      lay.ln2_g = store_.add(p + "ln2_g", d, 1);
      store_.slot(lay.ln2_g).value.setOnes();
      lay.ln2_b = store_.add(p + "ln2_b", d, 1);
      lay.w1 = store_.add_gaussian(p + "mlp_w1", 4 * d, d, rng, kInnerInit);
      lay.b1 = store_.add(p + "mlp_b1", 4 * d, 1);
      lay.w2 = store_.add_gaussian(p + "mlp_w2", d, 4 * d, rng, kInnerInit);
      lay.b2 = store_.add(p + "mlp_b2", d, 1);
      layers_.push_back(lay);
    }
    lnf_g_ = store_.add("lnf_g", d, 1);
    store_.slot(lnf_g_).value.setOnes();
    lnf_b_ = store_.add("lnf_b", d, 1);
    head_w_ = store_.add_gaussian("head_w", vocab_size, d, rng, kHeadInit);
    head_b_ = store_.add("head_b", vocab_size, 1);
  }

  int vocab_size() const { return vocab_; }
  const AttentionDims& dims() const { return dims_; }
  ParamStore<Scalar>& params() { return store_; }
  const ParamStore<Scalar>& params() const { return store_; }

  NodeRef sequence_loss(Graph<Scalar>& g, const std::vector<TokenId>& ids, double dropout_rate,
                        Rng* dropout_rng, std::size_t* n_predictions) const {
    std::vector<int> inputs{Vocabulary::kBos};
    std::vector<int> targets;
    for (TokenId t : ids) {
      inputs.push_back(t);
      targets.push_back(t);
    }
    targets.push_back(Vocabulary::kEos);
    if (n_predictions) *n_predictions = targets.size();
    const int T = static_cast<int>(inputs.size());
    if (T > dims_.max_seq)
      throw std::invalid_argument("attention: sequence longer than max_seq");
    const int d = dims_.hidden;
    const int dh = d / dims_.heads;

    std::vector<int> positions(static_cast<std::size_t>(T));
    for (int i = 0; i < T; ++i) positions[static_cast<std::size_t>(i)] = i;

    NodeRef x = add(g, cols_select(g, g.param(tok_emb_), inputs),
                    cols_select(g, g.param(pos_emb_), positions));
    x = dropout(g, x, dropout_rate, dropout_rng);
    for (const Layer& lay : layers_) {
      const NodeRef a = layer_norm(g, x, g.param(lay.ln1_g), g.param(lay.ln1_b));
      const NodeRef qkv = add_col(g, matmul(g, g.param(lay.wqkv), a), g.param(lay.bqkv));
      const NodeRef q = slice_rows(g, qkv, 0, d);
      const NodeRef k = slice_rows(g, qkv, d, d);
      const NodeRef v = slice_rows(g, qkv, 2 * d, d);
      std::vector<NodeRef> heads;
      heads.reserve(static_cast<std::size_t>(dims_.heads));
      for (int hh = 0; hh < dims_.heads; ++hh) {
        const NodeRef qh = slice_rows(g, q, hh * dh, dh);
        const NodeRef kh = slice_rows(g, k, hh * dh, dh);
        const NodeRef vh = slice_rows(g, v, hh * dh, dh);
        const NodeRef scores =
            scale(g, matmul(g, transpose(g, kh), qh), Scalar(1.0 / std::sqrt(double(dh))));
        const NodeRef attn = softmax_cols(g, scores, /*causal=*/true);
        heads.push_back(matmul(g, vh, attn));
      }
      const NodeRef z = concat_rows(g, heads);
      x = add(g, x,
              dropout(g, add_col(g, matmul(g, g.param(lay.wo), z), g.param(lay.bo)),
                      dropout_rate, dropout_rng));
      const NodeRef b2 = layer_norm(g, x, g.param(lay.ln2_g), g.param(lay.ln2_b));
      const NodeRef h1 = gelu(g, add_col(g, matmul(g, g.param(lay.w1), b2), g.param(lay.b1)));
      x = add(g, x,
              dropout(g, add_col(g, matmul(g, g.param(lay.w2), h1), g.param(lay.b2)),
                      dropout_rate, dropout_rng));
    }
    const NodeRef f = layer_norm(g, x, g.param(lnf_g_), g.param(lnf_b_));
    const NodeRef logits = add_col(g, matmul(g, g.param(head_w_), f), g.param(head_b_));
    return softmax_cross_entropy(g, logits, targets);
  }

  // Raw incremental state: cached K/V per layer, one column per position.
  struct InferState {
    std::vector<Mat<Scalar>> k, v;
    int length = 0;
  };

  InferState initial_state() const {
    InferState s;
    s.k.assign(layers_.size(), Mat<Scalar>(dims_.hidden, 0));
    s.v.assign(layers_.size(), Mat<Scalar>(dims_.hidden, 0));
    return s;
  }

  // Core incremental step: the per-layer caches must have at least pos+1
  // columns with [0, pos) filled; column pos is written and logits for the
  // following position are returned.
  Vec<Scalar> step_with_cache(std::vector<Mat<Scalar>>& K, std::vector<Mat<Scalar>>& V, int pos,
                              TokenId token) const {
    const int d = dims_.hidden;
    const int dh = d / dims_.heads;
    if (pos >= dims_.max_seq) throw std::invalid_argument("attention: prefix exceeds max_seq");
    Vec<Scalar> x =
        store_.slot(tok_emb_).value.col(token) + store_.slot(pos_emb_).value.col(pos);
    for (std::size_t li = 0; li < layers_.size(); ++li) {
      const Layer& lay = layers_[li];
      const Vec<Scalar> a = layer_norm_vec(x, lay.ln1_g, lay.ln1_b);
      Vec<Scalar> qkv = store_.slot(lay.wqkv).value * a + store_.slot(lay.bqkv).value.col(0);
      K[li].col(pos) = qkv.segment(d, d);
      V[li].col(pos) = qkv.segment(2 * d, d);
      const auto keys = K[li].leftCols(pos + 1);
      const auto vals = V[li].leftCols(pos + 1);
      Vec<Scalar> z(d);
      for (int hh = 0; hh < dims_.heads; ++hh) {
        const auto qh = qkv.segment(hh * dh, dh);
        const auto kh = keys.middleRows(hh * dh, dh);
        const auto vh = vals.middleRows(hh * dh, dh);
        Vec<Scalar> scores = kh.transpose() * qh * Scalar(1.0 / std::sqrt(double(dh)));
        const Scalar mx = scores.maxCoeff();
        Vec<Scalar> w = (scores.array() - mx).exp().matrix();
        w /= w.sum();
        z.segment(hh * dh, dh) = vh * w;
      }
      x += store_.slot(lay.wo).value * z + store_.slot(lay.bo).value.col(0);
      const Vec<Scalar> b2 = layer_norm_vec(x, lay.ln2_g, lay.ln2_b);
      Vec<Scalar> h1 = store_.slot(lay.w1).value * b2 + store_.slot(lay.b1).value.col(0);
      for (Eigen::Index i = 0; i < h1.size(); ++i) {
        const double xv = static_cast<double>(h1(i));
        h1(i) = static_cast<Scalar>(0.5 * xv * (1.0 + std::erf(xv * M_SQRT1_2)));
      }
      x += store_.slot(lay.w2).value * h1 + store_.slot(lay.b2).value.col(0);
    }
    const Vec<Scalar> f = layer_norm_vec(x, lnf_g_, lnf_b_);
    return store_.slot(head_w_).value * f + store_.slot(head_b_).value.col(0);
  }

  // Consumes `token` at the state's next position, appends cache columns and
  // returns logits for the following token.
  Vec<Scalar> step(InferState& s, TokenId token) const {
    const int pos = s.length;
    for (std::size_t li = 0; li < layers_.size(); ++li) {
      s.k[li].conservativeResize(Eigen::NoChange, pos + 1);
      s.v[li].conservativeResize(Eigen::NoChange, pos + 1);
    }
    Vec<Scalar> out = step_with_cache(s.k, s.v, pos, token);
    s.length = pos + 1;
    return out;
  }

  int layer_count() const { return static_cast<int>(layers_.size()); }

  std::vector<double> sentence_surprisals(const std::vector<TokenId>& ids,
                                          bool include_eos) const {
    InferState s = initial_state();
    Vec<Scalar> logits = step(s, Vocabulary::kBos);
    std::vector<double> out;
    std::vector<TokenId> seq = ids;
    if (include_eos) seq.push_back(Vocabulary::kEos);
    out.reserve(seq.size());
    for (std::size_t i = 0; i < seq.size(); ++i) {
      out.push_back(RecurrentLM<Scalar>::nll_from_logits(logits, seq[i]));
      if (i + 1 < seq.size()) logits = step(s, seq[i]);
    }
    return out;
  }

 private:
  struct Layer {
    int ln1_g, ln1_b, wqkv, bqkv, wo, bo, ln2_g, ln2_b, w1, b1, w2, b2;
  };

  Vec<Scalar> layer_norm_vec(const Vec<Scalar>& x, int gain, int bias) const {
    const Scalar mean = x.mean();
    const Scalar var = (x.array() - mean).square().sum() / Scalar(x.size());
    const Scalar inv = Scalar(1) / std::sqrt(var + Scalar(1e-5));
    return ((x.array() - mean) * inv).matrix().cwiseProduct(store_.slot(gain).value.col(0)) +
           store_.slot(bias).value.col(0);
  }

  int vocab_;
  AttentionDims dims_;
  ParamStore<Scalar> store_;
  int tok_emb_ = -1, pos_emb_ = -1, lnf_g_ = -1, lnf_b_ = -1, head_w_ = -1, head_b_ = -1;
  std::vector<Layer> layers_;

  template <typename S>
  friend class AttentionStepper;
};

// Softmax of logits computed in double; sums to 1 at double precision.
template <typename Scalar>
Eigen::VectorXd dist_from_logits(const Vec<Scalar>& logits) {
  Eigen::VectorXd out(logits.size());
  double mx = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < logits.size(); ++i)
    mx = std::max(mx, static_cast<double>(logits(i)));
  double z = 0.0;
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    out(i) = std::exp(static_cast<double>(logits(i)) - mx);
    z += out(i);
  }
  out /= z;
  return out;
}

// Probability vector over the full vocabulary after consuming `prefix`
// (sentence-initial conditioning on <s> included).
template <class Model>
Eigen::VectorXd next_token_dist(const Model& model, const std::vector<TokenId>& prefix) {
  typename Model::InferState s = model.initial_state();
  auto logits = model.step(s, Vocabulary::kBos);
  for (TokenId t : prefix) logits = model.step(s, t);
  return dist_from_logits(logits);
}

template <class Model>
std::vector<double> lm_surprisals(const Model& model, const std::vector<TokenId>& ids) {
  return model.sentence_surprisals(ids, /*include_eos=*/false);
}

// exp(total surprisal / token count) with </s> events counted.
template <class Model>
double perplexity(const Model& model, const std::vector<std::vector<TokenId>>& corpus) {
  if (corpus.empty()) throw std::invalid_argument("perplexity: empty corpus");
  double total = 0.0;
  std::int64_t count = 0;
  for (const std::vector<TokenId>& sent : corpus) {
    const std::vector<double> s = model.sentence_surprisals(sent, /*include_eos=*/true);
    for (double x : s) total += x;
    count += static_cast<std::int64_t>(s.size());
  }
  return std::exp(total / static_cast<double>(count));
}

}  // namespace syneval::nnet
