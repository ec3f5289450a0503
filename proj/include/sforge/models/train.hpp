#pragma once

#include <algorithm>
#include <functional>
#include <numeric>
#include <vector>

#include "sforge/autograd/loss.hpp"
#include "sforge/autograd/optim.hpp"
#include "sforge/autograd/regularize.hpp"
#include "sforge/models/classifier.hpp"

namespace sforge {

struct EpochStats {
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  bool stopped_early = false;
  OptimizerState optimizer;
};

struct TrainOptions {
  std::size_t epochs = 10;
  std::uint64_t seed = 1;
  // stop as soon as eval-mode train accuracy reaches this (1.0+ disables)
  double target_train_accuracy = 2.0;
  std::function<void(std::size_t, const EpochStats&)> log;
};

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
  std::vector<Label> predictions;
};

namespace detail {

inline Tensor batch_loss(const Classifier& model, const Tensor& outputs, std::span<const std::size_t> labels,
                         std::span<const double> weights) {
  Tensor targets = ops::one_hot(labels, kNumClasses);
  if (model.capsule_head()) {
    const auto& r = *model.spec().routing;
    return ops::margin_loss(outputs, targets, {r.m_plus, r.m_minus, r.lambda}, weights);
  }
  return ops::cross_entropy(outputs, targets, weights);
}

}  // namespace detail

inline std::vector<double> balanced_class_weights(std::span<const LabeledDocument> docs) {
  std::vector<double> counts(kNumClasses, 0.0);
  for (const auto& d : docs) counts[index_of(d.label)] += 1.0;
  std::vector<double> w(kNumClasses, 1.0);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (counts[c] > 0) w[c] = static_cast<double>(docs.size()) / (kNumClasses * counts[c]);
  }
  return w;
}

// Eval-mode loss and accuracy. The loss is unweighted.
inline Evaluation evaluate(const Classifier& model, std::span<const LabeledDocument> docs) {
  Evaluation ev;
  if (docs.empty()) return ev;
  Tape::Pause no_recording;
  std::size_t correct = 0;
  double total = 0.0;
  for (const auto& d : docs) {
    Tensor out = model.forward(d.token_ids);
    const std::size_t label = index_of(d.label);
    total += detail::batch_loss(model, out, std::span<const std::size_t>(&label, 1), {}).item();
    auto v = out.values();
    const auto pred = label_from_index(static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin()));
    ev.predictions.push_back(pred);
    if (pred == d.label) ++correct;
  }
  ev.loss = total / static_cast<double>(docs.size());
  ev.accuracy = static_cast<double>(correct) / static_cast<double>(docs.size());
  return ev;
}

// Mini-batch training with the spec's optimizer, loss and regularizers.
// Early stopping watches validation loss when patience > 0 and a
// validation set is given.
inline TrainHistory train_model(Classifier& model, std::span<const LabeledDocument> train,
                                std::span<const LabeledDocument> val, const TrainOptions& opt) {
  if (train.empty()) fail(ErrorKind::Training, "training set is empty");
  const ModelSpec& spec = model.spec();
  Rng rng(opt.seed);
  OptimizerState optimizer(spec.optimizer);
  auto params = model.trainable();
  optimizer.attach(params);
  const auto weights = spec.class_weights ? balanced_class_weights(train) : std::vector<double>{};

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  TrainHistory history;
  std::vector<double> val_losses;

  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += spec.batch_size) {
      const std::size_t stop = std::min(order.size(), start + spec.batch_size);
      for (auto& p : params) p.zero_grad();
      Tape tape;
      Tensor loss;
      {
        Tape::Scope scope(tape);
        std::vector<Tensor> outputs;
        std::vector<std::size_t> labels;
        for (std::size_t i = start; i < stop; ++i) {
          const auto& doc = train[order[i]];
          outputs.push_back(model.forward(doc.token_ids, true, &rng));
          labels.push_back(index_of(doc.label));
        }
        loss = detail::batch_loss(model, ops::concat_rows(outputs), labels, weights);
      }
      if (!std::isfinite(loss.item())) fail(ErrorKind::Training, "loss diverged at epoch ", epoch + 1);
      tape.backward(loss);
      apply_weight_penalty(params, spec.l1, spec.l2);
      optimizer_step(optimizer, params);
    }

    EpochStats stats;
    const auto tr = evaluate(model, train);
    stats.train_loss = tr.loss;
    stats.train_accuracy = tr.accuracy;
    if (!val.empty()) {
      const auto va = evaluate(model, val);
      stats.val_loss = va.loss;
      stats.val_accuracy = va.accuracy;
      val_losses.push_back(va.loss);
    }
    history.epochs.push_back(stats);
    if (opt.log) opt.log(epoch + 1, stats);
    if (stats.train_accuracy >= opt.target_train_accuracy) break;
    if (spec.early_stop_patience > 0 && !val_losses.empty() &&
        early_stop_check(val_losses, spec.early_stop_patience) == EarlyStop::Stop) {
      history.stopped_early = true;
      break;
    }
  }
  history.optimizer = optimizer;
  return history;
}

}  // namespace sforge
