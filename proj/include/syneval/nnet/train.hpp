#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "syneval/errors.hpp"
#include "syneval/nnet/graph.hpp"
#include "syneval/treebank.hpp"

namespace syneval::nnet {

struct TrainingConfig {
  std::uint64_t seed = 1;
  int epochs = 10;
  int batch_size = 16;
  double learning_rate = 3e-3;
  double grad_clip_norm = 5.0;
  std::string optimizer = "adam";
  double dropout = 0.1;
};

struct TrainLog {
  std::vector<double> train_loss;      // mean NLL per prediction, by epoch
  std::vector<double> dev_perplexity;  // after each epoch; index 0 = initial model
  int best_epoch = 0;                  // 0 means the initial parameters
  double best_dev_perplexity = std::numeric_limits<double>::infinity();
};

// Scales accumulated gradients, applies global-norm clipping and one Adam
// update. `t` is the 1-based update counter for bias correction.
template <typename Scalar>
void adam_step(ParamStore<Scalar>& store, const TrainingConfig& cfg, std::int64_t t,
               double grad_scale) {
  double sq_norm = 0.0;
  for (auto& s : store.slots()) {
    s.grad *= static_cast<Scalar>(grad_scale);
    sq_norm += static_cast<double>(s.grad.template cast<double>().squaredNorm());
  }
  const double norm = std::sqrt(sq_norm);
  const double clip_scale =
      (cfg.grad_clip_norm > 0.0 && norm > cfg.grad_clip_norm) ? cfg.grad_clip_norm / norm : 1.0;
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (auto& s : store.slots()) {
    s.grad *= static_cast<Scalar>(clip_scale);
    s.adam_m = s.adam_m * Scalar(beta1) + s.grad * Scalar(1.0 - beta1);
    s.adam_v = s.adam_v * Scalar(beta2) + s.grad.cwiseProduct(s.grad) * Scalar(1.0 - beta2);
    const double step = cfg.learning_rate / bc1;
    s.value.array() -= Scalar(step) * s.adam_m.array() /
                       ((s.adam_v.array() / Scalar(bc2)).sqrt() + Scalar(eps));
  }
}

// Shared mini-batch loop for every tape-trained model. A model only needs
// sequence_loss() on the tape and sentence_surprisals() for dev scoring; the
// sequences may be word sentences or linearized action streams.
template <class Model, typename Scalar = float>
TrainLog train_sequence_model(Model& model, const std::vector<std::vector<TokenId>>& train_seqs,
                              const std::vector<std::vector<TokenId>>& dev_seqs,
                              const TrainingConfig& cfg) {
  if (train_seqs.empty()) throw std::invalid_argument("train: corpus must be non-empty");
  if (cfg.optimizer != "adam") throw std::invalid_argument("unknown optimizer: " + cfg.optimizer);

  Rng shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  Rng dropout_rng(cfg.seed ^ 0x7f4a7c159e3779b9ULL);

  auto dev_ppl = [&]() {
    double total = 0.0;
    std::int64_t count = 0;
    for (const auto& sent : dev_seqs) {
      const std::vector<double> s = model.sentence_surprisals(sent, /*include_eos=*/true);
      for (double x : s) total += x;
      count += static_cast<std::int64_t>(s.size());
    }
    return count == 0 ? std::numeric_limits<double>::infinity()
                      : std::exp(total / static_cast<double>(count));
  };

  TrainLog log;
  std::vector<typename ParamStore<Scalar>::Slot> best_slots = model.params().slots();
  log.best_dev_perplexity = dev_ppl();
  log.dev_perplexity.push_back(log.best_dev_perplexity);

  std::vector<std::size_t> order(train_seqs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::int64_t update = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    std::int64_t epoch_preds = 0;
    std::size_t cursor = 0;
    while (cursor < order.size()) {
      const std::size_t batch_end =
          std::min(order.size(), cursor + static_cast<std::size_t>(cfg.batch_size));
      model.params().zero_grads();
      std::size_t batch_preds = 0;
      double batch_loss = 0.0;
      for (std::size_t i = cursor; i < batch_end; ++i) {
        Graph<Scalar> g(&model.params());
        std::size_t n = 0;
        const NodeRef loss = model.sequence_loss(g, train_seqs[order[i]], cfg.dropout,
                                                 &dropout_rng, &n);
        batch_loss += static_cast<double>(g.val(loss)(0, 0));
        batch_preds += n;
        g.backward(loss);
      }
      ++update;
      if (!std::isfinite(batch_loss))
        throw TrainingError("training diverged at update " + std::to_string(update));
      adam_step(model.params(), cfg, update, 1.0 / static_cast<double>(batch_preds));
      epoch_loss += batch_loss;
      epoch_preds += static_cast<std::int64_t>(batch_preds);
      cursor = batch_end;
    }
    log.train_loss.push_back(epoch_loss / static_cast<double>(epoch_preds));
    const double ppl = dev_ppl();
    log.dev_perplexity.push_back(ppl);
    if (ppl < log.best_dev_perplexity) {
      log.best_dev_perplexity = ppl;
      log.best_epoch = epoch;
      best_slots = model.params().slots();
    }
  }
  model.params().slots() = std::move(best_slots);
  return log;
}

}  // namespace syneval::nnet
