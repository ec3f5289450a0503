#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "sforge/autograd/ops.hpp"
#include "sforge/textprep/corpus.hpp"

namespace sforge {

struct SplitRatio {
  std::size_t train = 4;
  std::size_t val = 1;
};

// Shuffled train/val index split; train gets floor(n * train / (train + val)).
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> holdout_indices(std::size_t n, SplitRatio ratio,
                                                                                      std::uint64_t seed) {
  if (ratio.train < 1 || ratio.val < 1) fail(ErrorKind::Split, "split ratio parts must be positive integers");
  if (n < kNumClasses) fail(ErrorKind::Split, "holdout split needs at least ", kNumClasses, " documents, got ", n);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const std::size_t cut = n * ratio.train / (ratio.train + ratio.val);
  return {std::vector<std::size_t>(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(cut)),
          std::vector<std::size_t>(idx.begin() + static_cast<std::ptrdiff_t>(cut), idx.end())};
}

template <class T>
std::vector<T> select(std::span<const T> items, std::span<const std::size_t> idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(items[i]);
  return out;
}

template <class T>
std::pair<std::vector<T>, std::vector<T>> holdout_split(std::span<const T> docs, SplitRatio ratio, std::uint64_t seed) {
  auto [tr, va] = holdout_indices(docs.size(), ratio, seed);
  return {select(docs, std::span<const std::size_t>(tr)), select(docs, std::span<const std::size_t>(va))};
}

struct FoldPlan {
  std::size_t k = 0;
  std::vector<std::vector<std::size_t>> folds;
  bool stratified = false;
  std::uint64_t seed = 0;

  // Indices outside fold `f`, ascending.
  std::vector<std::size_t> complement(std::size_t f) const {
    std::vector<std::size_t> out;
    for (std::size_t g = 0; g < folds.size(); ++g) {
      if (g != f) out.insert(out.end(), folds[g].begin(), folds[g].end());
    }
    std::sort(out.begin(), out.end());
    return out;
  }
};

namespace detail {

inline void check_k(std::size_t n, std::size_t k) {
  if (k < 2) fail(ErrorKind::Split, "k must be >= 2, got ", k);
  if (k > n) fail(ErrorKind::Split, "k = ", k, " exceeds the ", n, " documents");
}

}  // namespace detail

// Shuffled round-robin deal: fold sizes differ by at most one.
inline FoldPlan kfold(std::size_t n, std::size_t k, std::uint64_t seed) {
  detail::check_k(n, k);
  FoldPlan plan{k, std::vector<std::vector<std::size_t>>(k), false, seed};
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  for (std::size_t i = 0; i < n; ++i) plan.folds[i % k].push_back(idx[i]);
  for (auto& f : plan.folds) std::sort(f.begin(), f.end());
  return plan;
}

// Classes are shuffled separately and dealt in turn, with the fold counter
// carried across classes, so every fold holds each class within +-1 and
// overall sizes still differ by at most one.
inline FoldPlan kfold_stratified(std::span<const Label> labels, std::size_t k, std::uint64_t seed) {
  detail::check_k(labels.size(), k);
  FoldPlan plan{k, std::vector<std::vector<std::size_t>>(k), true, seed};
  Rng rng(seed);
  std::size_t next = 0;
  for (auto cls : kAllLabels) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == cls) members.push_back(i);
    std::shuffle(members.begin(), members.end(), rng);
    for (auto i : members) plan.folds[next++ % k].push_back(i);
  }
  for (auto& f : plan.folds) std::sort(f.begin(), f.end());
  return plan;
}

inline FoldPlan kfold(std::span<const LabeledDocument> docs, std::size_t k, bool stratified, std::uint64_t seed) {
  if (!stratified) return kfold(docs.size(), k, seed);
  std::vector<Label> labels;
  for (const auto& d : docs) labels.push_back(d.label);
  return kfold_stratified(labels, k, seed);
}

}  // namespace sforge
