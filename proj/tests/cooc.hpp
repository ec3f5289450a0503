#pragma once

#include <random>
#include <string>
#include <vector>

#include "sforge/embed/skipgram.hpp"

namespace sforge::testing {

using Corpus = std::vector<std::vector<std::string>>;

// "foo" and "bar" share contexts; "qux" never does.
inline Corpus cooccurrence_corpus(std::uint64_t seed) {
  const std::vector<std::string> left{"red", "green", "blue", "pink"};
  const std::vector<std::string> right{"cat", "dog", "cow", "hen"};
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, 3), coin(0, 1);
  Corpus c;
  for (int i = 0; i < 600; ++i) {
    const bool grp = coin(rng);
    const auto& ctx = grp ? left : right;
    std::string centre = grp ? (coin(rng) ? "foo" : "bar") : "qux";
    c.push_back({ctx[pick(rng)], ctx[pick(rng)], centre, ctx[pick(rng)], ctx[pick(rng)]});
  }
  return c;
}

inline EmbeddingConfig small_config(EmbeddingMode mode) {
  EmbeddingConfig cfg;
  cfg.dim = 20;
  cfg.window = 2;
  cfg.epochs = 10;
  cfg.negatives = 5;
  cfg.downsample_t = 0.1;
  cfg.mode = mode;
  cfg.bucket_count = 5000;
  return cfg;
}

}  // namespace sforge::testing
