#pragma once

#include <atomic>
#include <exception>
#include <string>
#include <thread>
#include <vector>

#include "sforge/eval/metrics.hpp"
#include "sforge/eval/report.hpp"
#include "sforge/eval/split.hpp"
#include "sforge/models/train.hpp"

namespace sforge {

struct CvOptions {
  std::size_t k = 10;
  bool stratified = true;
  std::uint64_t seed = 1;
  std::size_t epochs = 10;
  std::size_t jobs = 1;
};

struct FoldResult {
  std::size_t fold = 0;
  ConfusionMatrix cm;
  MetricsReport metrics;
  TrainHistory history;
};

struct CvResult {
  FoldPlan plan;
  std::vector<FoldResult> folds;
  MetricsReport aggregate;
};

inline std::uint64_t fold_seed(std::uint64_t seed, std::size_t fold) { return seed * 1000003ULL + 7919ULL * (fold + 1); }

inline FoldResult run_fold(const ModelSpec& spec, const Tensor& embedding, std::span<const LabeledDocument> docs,
                           const FoldPlan& plan, std::size_t fold, const CvOptions& opt) {
  const auto train = select(docs, std::span<const std::size_t>(plan.complement(fold)));
  const auto test = select(docs, std::span<const std::size_t>(plan.folds[fold]));
  const auto seed = fold_seed(opt.seed, fold);
  Classifier model(spec, embedding.clone(), seed);
  TrainOptions to;
  to.epochs = opt.epochs;
  to.seed = seed + 1;
  FoldResult r;
  r.fold = fold;
  // the held-out fold doubles as the validation set for early stopping
  r.history = train_model(model, train, test, to);
  const auto ev = evaluate(model, test);
  std::vector<Label> actual;
  for (const auto& d : test) actual.push_back(d.label);
  r.cm = confusion(ev.predictions, actual);
  r.metrics = weighted_metrics(r.cm);
  return r;
}

// Trains k independent models. Results do not depend on `jobs`: every fold
// derives its own seeds and owns its model and embedding copy.
inline CvResult cross_validate(const ModelSpec& spec, const Tensor& embedding, std::span<const LabeledDocument> docs,
                               const CvOptions& opt) {
  spec.validate();
  CvResult out;
  out.plan = kfold(docs, opt.k, opt.stratified, opt.seed);
  out.folds.resize(opt.k);
  std::vector<std::exception_ptr> errors(opt.k);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t f = next++; f < opt.k; f = next++) {
      try {
        out.folds[f] = run_fold(spec, embedding, docs, out.plan, f, opt);
      } catch (...) {
        errors[f] = std::current_exception();
      }
    }
  };
  const std::size_t jobs = std::clamp<std::size_t>(opt.jobs, 1, opt.k);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (std::size_t f = 0; f < opt.k; ++f) {
    if (!errors[f]) continue;
    try {
      std::rethrow_exception(errors[f]);
    } catch (const Error& e) {
      fail(e.kind(), "fold ", f + 1, ": ", e.detail());
    } catch (const std::exception& e) {
      fail(ErrorKind::Training, "fold ", f + 1, ": ", e.what());
    }
  }
  std::vector<MetricsReport> reports;
  for (const auto& f : out.folds) reports.push_back(f.metrics);
  out.aggregate = mean_report(reports);
  return out;
}

inline std::string cv_report(const CvResult& r, const ReproBlock& repro) {
  std::string s = metrics_table(r.aggregate) + '\n';
  for (const auto& f : r.folds) s += metrics_block("fold." + std::to_string(f.fold + 1), f.metrics, &f.cm);
  s += metrics_block("aggregate", r.aggregate);
  s += repro_block(repro);
  return s;
}

}  // namespace sforge
