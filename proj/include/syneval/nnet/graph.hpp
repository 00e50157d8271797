#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "syneval/errors.hpp"
#include "syneval/rng.hpp"

namespace syneval::nnet {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using NodeRef = std::int32_t;

// Named dense parameters with Adam state. Models allocate slots once; graphs
// bind them as leaves and accumulate slot gradients on backward().
template <typename Scalar>
class ParamStore {
 public:
  struct Slot {
    std::string name;
    Mat<Scalar> value;
    Mat<Scalar> grad;
    Mat<Scalar> adam_m;
    Mat<Scalar> adam_v;
  };

  int add(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    Slot s;
    s.name = name;
    s.value = Mat<Scalar>::Zero(rows, cols);
    s.grad = Mat<Scalar>::Zero(rows, cols);
    s.adam_m = Mat<Scalar>::Zero(rows, cols);
    s.adam_v = Mat<Scalar>::Zero(rows, cols);
    slots_.push_back(std::move(s));
    return static_cast<int>(slots_.size()) - 1;
  }

  int add_gaussian(const std::string& name, Eigen::Index rows, Eigen::Index cols, Rng& rng,
                   double stddev = 0.02) {
    const int idx = add(name, rows, cols);
    Mat<Scalar>& v = slots_[static_cast<std::size_t>(idx)].value;
    for (Eigen::Index c = 0; c < cols; ++c)
      for (Eigen::Index r = 0; r < rows; ++r)
        v(r, c) = static_cast<Scalar>(rng.next_gaussian() * stddev);
    return idx;
  }

  Slot& slot(int i) { return slots_[static_cast<std::size_t>(i)]; }
  const Slot& slot(int i) const { return slots_[static_cast<std::size_t>(i)]; }
  std::size_t size() const { return slots_.size(); }
  std::vector<Slot>& slots() { return slots_; }
  const std::vector<Slot>& slots() const { return slots_; }

  void zero_grads() {
    for (Slot& s : slots_) s.grad.setZero();
  }

  std::int64_t parameter_count() const {
    std::int64_t n = 0;
    for (const Slot& s : slots_) n += s.value.size();
    return n;
  }

 private:
  std::vector<Slot> slots_;
};

// Reverse-mode tape over dense matrices. Nodes are appended in topological
// order and backward() walks the tape in reverse, so any value computed
// through these free functions gets exact reverse-mode gradients.
template <typename Scalar>
class Graph {
 public:
  using BackFn = std::function<void(Graph&, NodeRef)>;

  explicit Graph(ParamStore<Scalar>* store = nullptr) : store_(store) {}

  NodeRef constant(Mat<Scalar> value) { return push(std::move(value), nullptr, -1); }

  NodeRef param(int slot_index) {
    Node n;
    n.external = &store_->slot(slot_index).value;
    n.param_slot = slot_index;
    nodes_.push_back(std::move(n));
    return last();
  }

  NodeRef make(Mat<Scalar> value, BackFn backprop) {
    return push(std::move(value), std::move(backprop), -1);
  }

  const Mat<Scalar>& val(NodeRef i) const {
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    return n.external ? *n.external : n.value;
  }

  Mat<Scalar>& grad(NodeRef i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.grad.size() == 0) n.grad = Mat<Scalar>::Zero(val(i).rows(), val(i).cols());
    return n.grad;
  }

  bool has_grad(NodeRef i) const { return nodes_[static_cast<std::size_t>(i)].grad.size() != 0; }

  void backward(NodeRef loss) {
    if (val(loss).rows() != 1 || val(loss).cols() != 1)
      throw std::invalid_argument("backward: loss must be scalar");
    grad(loss)(0, 0) = Scalar(1);
    for (NodeRef i = loss; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.grad.size() == 0) continue;
      if (n.backprop) n.backprop(*this, i);
      if (n.param_slot >= 0) store_->slot(n.param_slot).grad += n.grad;
    }
  }

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  struct Node {
    Mat<Scalar> value;
    const Mat<Scalar>* external = nullptr;
    Mat<Scalar> grad;
    int param_slot = -1;
    BackFn backprop;
  };

  NodeRef push(Mat<Scalar> value, BackFn fn, int slot) {
    Node n;
    n.value = std::move(value);
    n.backprop = std::move(fn);
    n.param_slot = slot;
    nodes_.push_back(std::move(n));
    return last();
  }

  NodeRef last() const { return static_cast<NodeRef>(nodes_.size()) - 1; }

  ParamStore<Scalar>* store_;
  std::deque<Node> nodes_;
};

// --------------------------------------------------------------------------
// Tape ops. Each returns a new node; gradients accumulate into the parents.
// --------------------------------------------------------------------------

template <typename Scalar>
NodeRef matmul(Graph<Scalar>& g, NodeRef a, NodeRef b) {
  return g.make(g.val(a) * g.val(b), [a, b](Graph<Scalar>& gr, NodeRef self) {
    const Mat<Scalar>& dc = gr.grad(self);
    gr.grad(a).noalias() += dc * gr.val(b).transpose();
    gr.grad(b).noalias() += gr.val(a).transpose() * dc;
  });
}

template <typename Scalar>
NodeRef add(Graph<Scalar>& g, NodeRef a, NodeRef b) {
  return g.make(g.val(a) + g.val(b), [a, b](Graph<Scalar>& gr, NodeRef self) {
    gr.grad(a) += gr.grad(self);
    gr.grad(b) += gr.grad(self);
  });
}

// Adds a column vector to every column.
template <typename Scalar>
NodeRef add_col(Graph<Scalar>& g, NodeRef a, NodeRef bias) {
  Mat<Scalar> v = g.val(a);
  v.colwise() += g.val(bias).col(0);
  return g.make(std::move(v), [a, bias](Graph<Scalar>& gr, NodeRef self) {
    const Mat<Scalar>& dc = gr.grad(self);
    gr.grad(a) += dc;
    gr.grad(bias).col(0) += dc.rowwise().sum();
  });
}

template <typename Scalar>
NodeRef sub(Graph<Scalar>& g, NodeRef a, NodeRef b) {
  return g.make(g.val(a) - g.val(b), [a, b](Graph<Scalar>& gr, NodeRef self) {
    gr.grad(a) += gr.grad(self);
    gr.grad(b) -= gr.grad(self);
  });
}

template <typename Scalar>
NodeRef cwise_mul(Graph<Scalar>& g, NodeRef a, NodeRef b) {
  return g.make(g.val(a).cwiseProduct(g.val(b)), [a, b](Graph<Scalar>& gr, NodeRef self) {
    const Mat<Scalar>& dc = gr.grad(self);
    gr.grad(a) += dc.cwiseProduct(gr.val(b));
    gr.grad(b) += dc.cwiseProduct(gr.val(a));
  });
}

template <typename Scalar>
NodeRef scale(Graph<Scalar>& g, NodeRef a, Scalar s) {
  return g.make(g.val(a) * s, [a, s](Graph<Scalar>& gr, NodeRef self) {
    gr.grad(a) += gr.grad(self) * s;
  });
}

template <typename Scalar>
NodeRef tanh_op(Graph<Scalar>& g, NodeRef a) {
  return g.make(g.val(a).array().tanh().matrix(), [a](Graph<Scalar>& gr, NodeRef self) {
    const Mat<Scalar>& y = gr.val(self);
    gr.grad(a).array() += gr.grad(self).array() * (Scalar(1) - y.array().square());
  });
}

template <typename Scalar>
NodeRef sigmoid(Graph<Scalar>& g, NodeRef a) {
  Mat<Scalar> y = ((g.val(a).array() * Scalar(-1)).exp() + Scalar(1)).inverse().matrix();
  return g.make(std::move(y), [a](Graph<Scalar>& gr, NodeRef self) {
    const Mat<Scalar>& y2 = gr.val(self);
    gr.grad(a).array() += gr.grad(self).array() * y2.array() * (Scalar(1) - y2.array());
  });
}

template <typename Scalar>
NodeRef relu(Graph<Scalar>& g, NodeRef a) {
  return g.make(g.val(a).cwiseMax(Scalar(0)), [a](Graph<Scalar>& gr, NodeRef self) {
    gr.grad(a).array() +=
        gr.grad(self).array() * (gr.val(a).array() > Scalar(0)).template cast<Scalar>();
  });
}

// Exact gelu: 0.5 x (1 + erf(x / sqrt(2))).
template <typename Scalar>
NodeRef gelu(Graph<Scalar>& g, NodeRef a) {
  const Mat<Scalar>& x = g.val(a);
  Mat<Scalar> y(x.rows(), x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c)
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const double xv = static_cast<double>(x(r, c));
      y(r, c) = static_cast<Scalar>(0.5 * xv * (1.0 + std::erf(xv * M_SQRT1_2)));
    }
  return g.make(std::move(y), [a](Graph<Scalar>& gr, NodeRef self) {
    const Mat<Scalar>& x2 = gr.val(a);
    const Mat<Scalar>& dc = gr.grad(self);
    Mat<Scalar>& da = gr.grad(a);
    constexpr double inv_sqrt_2pi = 0.3989422804014327;
    for (Eigen::Index c = 0; c < x2.cols(); ++c)
      for (Eigen::Index r = 0; r < x2.rows(); ++r) {
        const double xv = static_cast<double>(x2(r, c));
        const double cdf = 0.5 * (1.0 + std::erf(xv * M_SQRT1_2));
        const double pdf = inv_sqrt_2pi * std::exp(-0.5 * xv * xv);
        da(r, c) += dc(r, c) * static_cast<Scalar>(cdf + xv * pdf);
      }
  });
}

template <typename Scalar>
NodeRef transpose(Graph<Scalar>& g, NodeRef a) {
  return g.make(g.val(a).transpose(), [a](Graph<Scalar>& gr, NodeRef self) {
    gr.grad(a) += gr.grad(self).transpose();
  });
}

template <typename Scalar>
NodeRef slice_rows(Graph<Scalar>& g, NodeRef a, Eigen::Index r0, Eigen::Index n) {
  return g.make(g.val(a).middleRows(r0, n), [a, r0, n](Graph<Scalar>& gr, NodeRef self) {
    gr.grad(a).middleRows(r0, n) += gr.grad(self);
  });
}

template <typename Scalar>
NodeRef concat_rows(Graph<Scalar>& g, const std::vector<NodeRef>& parts) {
  Eigen::Index rows = 0;
  const Eigen::Index cols = g.val(parts.front()).cols();
  for (NodeRef p : parts) rows += g.val(p).rows();
  Mat<Scalar> v(rows, cols);
  Eigen::Index r = 0;
  for (NodeRef p : parts) {
    v.middleRows(r, g.val(p).rows()) = g.val(p);
    r += g.val(p).rows();
  }
  return g.make(std::move(v), [parts](Graph<Scalar>& gr, NodeRef self) {
    Eigen::Index r2 = 0;
    for (NodeRef p : parts) {
      const Eigen::Index n = gr.val(p).rows();
      gr.grad(p) += gr.grad(self).middleRows(r2, n);
      r2 += n;
    }
  });
}

// Column gather, used for embedding lookups; gradients scatter-add back.
template <typename Scalar>
NodeRef cols_select(Graph<Scalar>& g, NodeRef table, std::vector<int> ids) {
  const Mat<Scalar>& t = g.val(table);
  Mat<Scalar> v(t.rows(), static_cast<Eigen::Index>(ids.size()));
  for (std::size_t i = 0; i < ids.size(); ++i) v.col(static_cast<Eigen::Index>(i)) = t.col(ids[i]);
  return g.make(std::move(v), [table, ids = std::move(ids)](Graph<Scalar>& gr, NodeRef self) {
    const Mat<Scalar>& dc = gr.grad(self);
    Mat<Scalar>& dt = gr.grad(table);
    for (std::size_t i = 0; i < ids.size(); ++i)
      dt.col(ids[i]) += dc.col(static_cast<Eigen::Index>(i));
  });
}

// Per-column softmax over logits with optional causal masking: entry (i, j)
// participates only when i <= j. Masked entries get exactly zero probability.
template <typename Scalar>
NodeRef softmax_cols(Graph<Scalar>& g, NodeRef scores, bool causal) {
  const Mat<Scalar>& s = g.val(scores);
  Mat<Scalar> y = Mat<Scalar>::Zero(s.rows(), s.cols());
  for (Eigen::Index j = 0; j < s.cols(); ++j) {
    const Eigen::Index limit = causal ? std::min<Eigen::Index>(j + 1, s.rows()) : s.rows();
    Scalar mx = s(0, j);
    for (Eigen::Index i = 1; i < limit; ++i) mx = std::max(mx, s(i, j));
    Scalar z = Scalar(0);
    for (Eigen::Index i = 0; i < limit; ++i) z += std::exp(s(i, j) - mx);
    for (Eigen::Index i = 0; i < limit; ++i) y(i, j) = std::exp(s(i, j) - mx) / z;
  }
  return g.make(std::move(y), [scores, causal](Graph<Scalar>& gr, NodeRef self) {
    const Mat<Scalar>& y2 = gr.val(self);
    const Mat<Scalar>& dy = gr.grad(self);
    Mat<Scalar>& ds = gr.grad(scores);
    for (Eigen::Index j = 0; j < y2.cols(); ++j) {
      const Eigen::Index limit = causal ? std::min<Eigen::Index>(j + 1, y2.rows()) : y2.rows();
      Scalar dot = Scalar(0);
      for (Eigen::Index i = 0; i < limit; ++i) dot += dy(i, j) * y2(i, j);
      for (Eigen::Index i = 0; i < limit; ++i) ds(i, j) += y2(i, j) * (dy(i, j) - dot);
    }
  });
}

// Per-column layer normalization with learned gain/bias column vectors.
template <typename Scalar>
NodeRef layer_norm(Graph<Scalar>& g, NodeRef x, NodeRef gain, NodeRef bias,
                   Scalar eps = Scalar(1e-5)) {
  const Mat<Scalar>& v = g.val(x);
  const Eigen::Index d = v.rows();
  Mat<Scalar> xhat(v.rows(), v.cols());
  std::vector<Scalar> inv_std(static_cast<std::size_t>(v.cols()));
  for (Eigen::Index j = 0; j < v.cols(); ++j) {
    const Scalar mean = v.col(j).mean();
    const Scalar var = (v.col(j).array() - mean).square().sum() / Scalar(d);
    const Scalar is = Scalar(1) / std::sqrt(var + eps);
    inv_std[static_cast<std::size_t>(j)] = is;
    xhat.col(j) = (v.col(j).array() - mean).matrix() * is;
  }
  Mat<Scalar> y = xhat;
  for (Eigen::Index j = 0; j < y.cols(); ++j)
    y.col(j) = y.col(j).cwiseProduct(g.val(gain).col(0)) + g.val(bias).col(0);
  // xhat and inv_std are needed for the backward pass; capture by value.
  return g.make(std::move(y), [x, gain, bias, xhat = std::move(xhat),
                               inv_std = std::move(inv_std), d](Graph<Scalar>& gr, NodeRef self) {
    const Mat<Scalar>& dy = gr.grad(self);
    const Vec<Scalar> gv = gr.val(gain).col(0);
    Mat<Scalar>& dxm = gr.grad(x);
    for (Eigen::Index j = 0; j < dy.cols(); ++j) {
      gr.grad(gain).col(0) += dy.col(j).cwiseProduct(xhat.col(j));
      gr.grad(bias).col(0) += dy.col(j);
      const Vec<Scalar> dxhat = dy.col(j).cwiseProduct(gv);
      const Scalar m1 = dxhat.mean();
      const Scalar m2 = dxhat.cwiseProduct(xhat.col(j)).mean();
      dxm.col(j) += (dxhat.array() - m1 - xhat.col(j).array() * m2).matrix() *
                    inv_std[static_cast<std::size_t>(j)];
      (void)d;
    }
  });
}

// Summed cross entropy of per-column logits against integer targets.
// Numerically stable; the node value is 1x1.
template <typename Scalar>
NodeRef softmax_cross_entropy(Graph<Scalar>& g, NodeRef logits, std::vector<int> targets) {
  const Mat<Scalar>& z = g.val(logits);
  Mat<Scalar> probs(z.rows(), z.cols());
  Scalar loss = Scalar(0);
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    const Scalar mx = z.col(j).maxCoeff();
    const Vec<Scalar> e = (z.col(j).array() - mx).exp().matrix();
    const Scalar sum = e.sum();
    probs.col(j) = e / sum;
    loss += std::log(sum) + mx - z(targets[static_cast<std::size_t>(j)], j);
  }
  Mat<Scalar> out(1, 1);
  out(0, 0) = loss;
  return g.make(std::move(out), [logits, targets = std::move(targets),
                                 probs = std::move(probs)](Graph<Scalar>& gr, NodeRef self) {
    const Scalar d = gr.grad(self)(0, 0);
    Mat<Scalar>& dz = gr.grad(logits);
    dz += probs * d;
    for (Eigen::Index j = 0; j < dz.cols(); ++j)
      dz(targets[static_cast<std::size_t>(j)], j) -= d;
  });
}

template <typename Scalar>
NodeRef sum_scalars(Graph<Scalar>& g, const std::vector<NodeRef>& parts) {
  Scalar total = Scalar(0);
  for (NodeRef p : parts) total += g.val(p)(0, 0);
  Mat<Scalar> v(1, 1);
  v(0, 0) = total;
  return g.make(std::move(v), [parts](Graph<Scalar>& gr, NodeRef self) {
    for (NodeRef p : parts) gr.grad(p)(0, 0) += gr.grad(self)(0, 0);
  });
}

// Inverted dropout as a constant mask; identity when rate <= 0.
template <typename Scalar>
NodeRef dropout(Graph<Scalar>& g, NodeRef a, double rate, Rng* rng) {
  if (rate <= 0.0 || rng == nullptr) return a;
  const Mat<Scalar>& v = g.val(a);
  Mat<Scalar> mask(v.rows(), v.cols());
  const Scalar keep_scale = static_cast<Scalar>(1.0 / (1.0 - rate));
  for (Eigen::Index c = 0; c < v.cols(); ++c)
    for (Eigen::Index r = 0; r < v.rows(); ++r)
      mask(r, c) = rng->next_double() < rate ? Scalar(0) : keep_scale;
  const NodeRef m = g.constant(std::move(mask));
  return cwise_mul(g, a, m);
}

// Refills every slot with gaussian noise; gradient checks run at healthy
// parameter scales so finite differences stay above rounding noise.
template <typename Scalar>
void randomize_store(ParamStore<Scalar>& store, Rng& rng, double stddev) {
  for (auto& slot : store.slots())
    for (Eigen::Index c = 0; c < slot.value.cols(); ++c)
      for (Eigen::Index r = 0; r < slot.value.rows(); ++r)
        slot.value(r, c) = static_cast<Scalar>(rng.next_gaussian() * stddev);
}

// ---------------------------------------------------------------------------
// Gradient checking against central finite differences.
// ---------------------------------------------------------------------------

// Returns max over parameter entries of |analytic - numeric| /
// max(|analytic|, |numeric|, 1e-8). The builder must rebuild the loss from
// the store on every call.
template <typename Scalar>
double grad_check(const std::function<NodeRef(Graph<Scalar>&)>& build, ParamStore<Scalar>& store,
                  double eps = 1e-5) {
  store.zero_grads();
  Graph<Scalar> g(&store);
  const NodeRef loss = build(g);
  if (g.val(loss).rows() != 1 || g.val(loss).cols() != 1)
    throw std::invalid_argument("grad_check: loss must be scalar");
  g.backward(loss);

  std::vector<Mat<Scalar>> analytic;
  analytic.reserve(store.size());
  for (const auto& s : store.slots()) analytic.push_back(s.grad);

  auto eval = [&]() -> double {
    Graph<Scalar> g2(&store);
    return static_cast<double>(g2.val(build(g2))(0, 0));
  };

  double max_rel = 0.0;
  for (std::size_t si = 0; si < store.size(); ++si) {
    Mat<Scalar>& theta = store.slot(static_cast<int>(si)).value;
    for (Eigen::Index c = 0; c < theta.cols(); ++c) {
      for (Eigen::Index r = 0; r < theta.rows(); ++r) {
        const Scalar saved = theta(r, c);
        theta(r, c) = saved + static_cast<Scalar>(eps);
        const double up = eval();
        theta(r, c) = saved - static_cast<Scalar>(eps);
        const double down = eval();
        theta(r, c) = saved;
        const double numeric = (up - down) / (2.0 * eps);
        const double a = static_cast<double>(analytic[si](r, c));
        const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
        max_rel = std::max(max_rel, rel);
      }
    }
  }
  return max_rel;
}

}  // namespace syneval::nnet
