#pragma once

#include <atomic>
#include <cmath>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "sforge/autograd/ops.hpp"
#include "sforge/embed/embedding.hpp"

namespace sforge {

// Probability of keeping a token with corpus frequency fraction f under
// downsampling threshold t: sqrt(t/f), clamped to [0, 1].
inline double subsample_keep(double f, double t) {
  if (!(f > 0 && f <= 1) || !(t > 0)) fail(ErrorKind::Config, "subsample_keep: need 0 < f <= 1 and t > 0");
  const double discard = std::clamp(1.0 - std::sqrt(t / f), 0.0, 1.0);
  return 1.0 - discard;
}

// Unnormalized noise weights count^0.75 for every id (reserved ids get 0).
inline std::vector<double> negative_sampling_weights(const Vocabulary& vocab) {
  std::vector<double> w(vocab.size(), 0.0);
  for (TokenId id = 2; id < vocab.size(); ++id) w[id] = std::pow(static_cast<double>(vocab.count(id)), 0.75);
  return w;
}

struct EmbeddingTraining {
  EmbeddingMatrix matrix;
  std::vector<double> epoch_loss;  // mean negative-sampling loss per (center, context) pair
  bool deterministic = true;
};

namespace detail {

inline double sigmoid(double x) {
  if (x > 30) return 1.0;
  if (x < -30) return 0.0;
  return 1.0 / (1.0 + std::exp(-x));
}

// Element access for the shared matrices. The asynchronous mode goes
// through relaxed atomics so concurrent updates are well-defined.
template <bool Concurrent>
inline double load(double& x) {
  if constexpr (Concurrent) return std::atomic_ref<double>(x).load(std::memory_order_relaxed);
  else return x;
}

template <bool Concurrent>
inline void add_to(double& x, double delta) {
  if constexpr (Concurrent) std::atomic_ref<double>(x).fetch_add(delta, std::memory_order_relaxed);
  else x += delta;
}

struct SkipGramState {
  std::size_t dim;
  std::vector<std::vector<double*>> input_rows;  // per token id: rows averaged into its input vector
  std::vector<double> output;                     // [V x dim]
  std::discrete_distribution<std::size_t> noise;
  std::vector<double> keep_prob;
  std::vector<std::vector<TokenId>> sentences;
  double lr0;
  std::size_t window;
  std::size_t negatives;
  std::size_t planned_tokens;
  std::atomic<std::size_t> processed{0};
};

struct WorkerResult {
  double loss = 0.0;
  std::size_t pairs = 0;
};

template <bool Concurrent>
WorkerResult train_shard(SkipGramState& st, std::size_t begin, std::size_t end, Rng& rng) {
  WorkerResult res;
  const std::size_t dim = st.dim;
  std::vector<double> hidden(dim), grad(dim);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> span(1, st.window);
  std::vector<TokenId> kept;
  auto noise = st.noise;

  for (std::size_t s = begin; s < end; ++s) {
    const auto& sentence = st.sentences[s];
    kept.clear();
    for (TokenId id : sentence) {
      if (unit(rng) < st.keep_prob[id]) kept.push_back(id);
    }
    const std::size_t done = st.processed.fetch_add(sentence.size(), std::memory_order_relaxed);
    const double progress = static_cast<double>(done) / static_cast<double>(st.planned_tokens);
    const double lr = st.lr0 * std::max(1e-4, 1.0 - progress);

    for (std::size_t i = 0; i < kept.size(); ++i) {
      const std::size_t b = span(rng);
      const auto& rows = st.input_rows[kept[i]];
      const double inv = 1.0 / static_cast<double>(rows.size());
      const std::size_t lo = i >= b ? i - b : 0;
      const std::size_t hi = std::min(kept.size() - 1, i + b);
      for (std::size_t c = lo; c <= hi; ++c) {
        if (c == i) continue;
        std::fill(hidden.begin(), hidden.end(), 0.0);
        for (double* r : rows)
          for (std::size_t j = 0; j < dim; ++j) hidden[j] += load<Concurrent>(r[j]) * inv;
        std::fill(grad.begin(), grad.end(), 0.0);
        for (std::size_t n = 0; n <= st.negatives; ++n) {
          TokenId target = kept[c];
          double label = 1.0;
          if (n > 0) {
            target = noise(rng);
            if (target == kept[c]) continue;
            label = 0.0;
          }
          double* out = &st.output[target * dim];
          double score = 0.0;
          for (std::size_t j = 0; j < dim; ++j) score += hidden[j] * load<Concurrent>(out[j]);
          const double p = sigmoid(score);
          res.loss -= label > 0 ? std::log(std::max(p, 1e-12)) : std::log(std::max(1.0 - p, 1e-12));
          const double g = (label - p) * lr;
          for (std::size_t j = 0; j < dim; ++j) {
            grad[j] += g * load<Concurrent>(out[j]);
            add_to<Concurrent>(out[j], g * hidden[j]);
          }
        }
        for (double* r : rows)
          for (std::size_t j = 0; j < dim; ++j) add_to<Concurrent>(r[j], grad[j]);
        ++res.pairs;
      }
    }
  }
  return res;
}

}  // namespace detail

// Skip-gram with negative sampling. In fastText mode a token's input vector
// is the mean of its own row and its subword rows. workers == 1 is
// deterministic for a fixed seed; more workers run asynchronous updates on
// shared matrices and are not reproducible run to run.
inline EmbeddingTraining train_embeddings(const std::vector<std::vector<std::string>>& corpus,
                                          const EmbeddingConfig& config, std::uint64_t seed) {
  config.validate();
  std::size_t total_tokens = 0;
  for (const auto& s : corpus) total_tokens += s.size();
  if (total_tokens == 0) fail(ErrorKind::Training, "embedding corpus is empty");

  Vocabulary vocab = [&] {
    try {
      return Vocabulary::build(corpus, config.min_count);
    } catch (const Error& e) {
      fail(ErrorKind::Training, e.what());
    }
  }();

  Rng rng(seed);
  const std::size_t dim = config.dim;
  EmbeddingTraining result{
      EmbeddingMatrix(std::move(vocab), dim, config.mode, config.ngram_min, config.ngram_max, config.bucket_count),
      {},
      config.workers == 1};
  EmbeddingMatrix& matrix = result.matrix;
  const auto& v = matrix.vocab();
  std::uniform_real_distribution<double> init(-0.5 / static_cast<double>(dim), 0.5 / static_cast<double>(dim));
  for (TokenId id = 2; id < v.size(); ++id) {
    double* r = matrix.word_row(id);
    for (std::size_t j = 0; j < dim; ++j) r[j] = init(rng);
  }
  std::vector<std::vector<std::size_t>> bucket_rows(v.size());
  if (config.mode == EmbeddingMode::FastText) {
    for (TokenId id = 2; id < v.size(); ++id) {
      for (auto b : matrix.buckets_for(v.token(id))) {
        const bool fresh = matrix.bucket_row(b) == nullptr;
        const std::size_t row = matrix.ensure_bucket(b);
        if (fresh) {
          double* r = matrix.subword_row(row);
          for (std::size_t j = 0; j < dim; ++j) r[j] = init(rng);
        }
        bucket_rows[id].push_back(row);
      }
    }
  }

  // Row pointers stay valid: no rows are allocated past this point.
  detail::SkipGramState st;
  st.dim = dim;
  st.input_rows.resize(v.size());
  for (TokenId id = 2; id < v.size(); ++id) {
    st.input_rows[id].push_back(matrix.word_row(id));
    for (auto row : bucket_rows[id]) st.input_rows[id].push_back(matrix.subword_row(row));
  }
  st.output.assign(v.size() * dim, 0.0);
  const auto weights = negative_sampling_weights(v);
  st.noise = std::discrete_distribution<std::size_t>(weights.begin(), weights.end());
  const double counted = static_cast<double>(v.total_count());
  st.keep_prob.assign(v.size(), 0.0);
  for (TokenId id = 2; id < v.size(); ++id) {
    st.keep_prob[id] = subsample_keep(static_cast<double>(v.count(id)) / counted, config.downsample_t);
  }
  for (const auto& s : corpus) {
    std::vector<TokenId> ids;
    for (const auto& tok : s) {
      const TokenId id = v.id(tok);
      if (id != kOovId) ids.push_back(id);
    }
    if (ids.size() > 1) st.sentences.push_back(std::move(ids));
  }
  st.lr0 = config.learning_rate;
  st.window = config.window;
  st.negatives = config.negatives;
  std::size_t per_epoch = 0;
  for (const auto& s : st.sentences) per_epoch += s.size();
  st.planned_tokens = std::max<std::size_t>(1, per_epoch * config.epochs);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    detail::WorkerResult total;
    if (config.workers == 1) {
      total = detail::train_shard<false>(st, 0, st.sentences.size(), rng);
    } else {
      const std::size_t w = config.workers;
      std::vector<detail::WorkerResult> parts(w);
      std::vector<Rng> rngs;
      for (std::size_t k = 0; k < w; ++k) rngs.emplace_back(rng());
      std::vector<std::thread> threads;
      const std::size_t n = st.sentences.size();
      for (std::size_t k = 0; k < w; ++k) {
        threads.emplace_back([&, k] { parts[k] = detail::train_shard<true>(st, n * k / w, n * (k + 1) / w, rngs[k]); });
      }
      for (auto& t : threads) t.join();
      for (const auto& p : parts) {
        total.loss += p.loss;
        total.pairs += p.pairs;
      }
    }
    result.epoch_loss.push_back(total.pairs ? total.loss / static_cast<double>(total.pairs) : 0.0);
  }
  return result;
}

}  // namespace sforge
