#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "sforge/autograd/checkpoint.hpp"
#include "sforge/models/capsule.hpp"
#include "sforge/models/layers.hpp"
#include "sforge/textprep/corpus.hpp"
#include "sforge/textprep/vocab.hpp"

namespace sforge {

struct ForwardTrace {
  std::vector<Tensor> word_attention;  // one [1 x n] row per sentence
  Tensor sentence_attention;           // [1 x sentences]
  std::vector<RoutingTrace> routing;   // one per capsule branch
  std::size_t conv_rows = 0;           // cnn hybrids: length fed to the recurrent layer
};

// Splits a token sequence into chunks of at most `sentence_len` tokens; a
// break token also closes the current chunk (and stays in it).
inline std::vector<std::vector<TokenId>> split_sentences(std::span<const TokenId> ids, std::size_t sentence_len,
                                                         std::optional<TokenId> break_id = std::nullopt) {
  if (sentence_len < 1) fail(ErrorKind::Config, "sentence length must be >= 1");
  std::vector<std::vector<TokenId>> out;
  std::vector<TokenId> current;
  for (TokenId id : ids) {
    current.push_back(id);
    if (current.size() == sentence_len || (break_id && id == *break_id)) {
      out.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

// Maps a padded token-id sequence to four class scores. Softmax-head
// variants return logits; capsule variants return class-capsule norms.
//
// Inputs are truncated to max_len and stripped of trailing PAD ids, so
// extra padding never changes a prediction. Convolutional variants re-pad
// the embedded sequence with zero rows up to max_len.
class Classifier {
 public:
  Classifier(ModelSpec spec, Tensor embedding, std::uint64_t seed) : spec_(std::move(spec)), embedding_(embedding) {
    spec_.validate();
    if (embedding_.rank() != 2 || embedding_.dim(1) != spec_.embedding_dim) {
      fail(ErrorKind::Config, "embedding table ", shape_str(embedding_.shape()), " does not match model dim ",
           spec_.embedding_dim);
    }
    if (embedding_.dim(0) < 3) fail(ErrorKind::Config, "embedding table needs PAD, OOV and at least one token row");
    embedding_.set_requires_grad(spec_.trainable_embeddings);
    Rng rng(seed);
    build(rng);
  }

  const ModelSpec& spec() const { return spec_; }
  const ParamStore& params() const { return params_; }
  ParamStore& params() { return params_; }
  const Tensor& embedding() const { return embedding_; }
  bool capsule_head() const { return spec_.is_capsule(); }

  std::vector<Tensor> trainable() {
    std::vector<Tensor> out = params_.tensors();
    if (spec_.trainable_embeddings) out.push_back(embedding_);
    return out;
  }

  std::vector<TokenId> content(std::span<const TokenId> ids) const {
    std::vector<TokenId> out(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(std::min(ids.size(), spec_.max_len)));
    while (!out.empty() && out.back() == kPadId) out.pop_back();
    if (out.empty()) fail(ErrorKind::EmptySequence, "input has no non-PAD tokens");
    return out;
  }

  Tensor forward(std::span<const TokenId> ids, bool training = false, Rng* rng = nullptr,
                 ForwardTrace* trace = nullptr) const {
    if (training && spec_.dropout_p > 0 && rng == nullptr) fail(ErrorKind::Training, "training forward needs an rng");
    const auto tokens = content(ids);
    Tensor embedded = ops::gather_rows(embedding_, tokens);
    switch (spec_.variant) {
      case Variant::Rnn:
      case Variant::Lstm:
      case Variant::Gru:
      case Variant::StackedLstm: return forward_unidirectional(embedded, training, rng);
      case Variant::BiLstm:
      case Variant::StackedBiLstm: return forward_bidirectional(embedded, training, rng);
      case Variant::CnnGru:
      case Variant::CnnLstm:
      case Variant::CnnBiLstm: return forward_cnn(pad_rows(embedded, spec_.max_len), training, rng, trace);
      case Variant::Hahnn: return forward_hahnn(tokens, training, rng, trace);
      case Variant::CapsuleA:
      case Variant::CapsuleB: return forward_capsule(pad_rows(embedded, spec_.max_len), trace);
    }
    fail(ErrorKind::Config, "unhandled variant");
  }

  // Evaluation-mode class scores: softmax probabilities or capsule norms.
  std::vector<double> scores(std::span<const TokenId> ids, ForwardTrace* trace = nullptr) const {
    Tape::Pause no_recording;
    Tensor out = forward(ids, false, nullptr, trace);
    if (!capsule_head()) out = ops::softmax(out);
    return {out.values().begin(), out.values().end()};
  }

  Label predict(std::span<const TokenId> ids) const {
    const auto s = scores(ids);
    return label_from_index(static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin()));
  }

  std::string describe() const {
    std::ostringstream o;
    o << "model " << spec_.name() << '\n';
    o << "embedding " << shape_str(embedding_.shape()) << ' ' << embedding_.size()
      << (spec_.trainable_embeddings ? " trainable" : " frozen") << '\n';
    for (std::size_t i = 0; i < params_.names().size(); ++i) {
      const auto& t = params_.tensors()[i];
      o << params_.names()[i] << ' ' << shape_str(t.shape()) << ' ' << t.size() << '\n';
    }
    o << "total_parameters " << params_.scalar_count() << '\n';
    return o.str();
  }

  void save(Checkpoint& ck) const {
    ck.put_text("spec", to_text(spec_));
    ck.put_tensor("embedding", embedding_);
    for (std::size_t i = 0; i < params_.names().size(); ++i) {
      ck.put_tensor("param/" + params_.names()[i], params_.tensors()[i]);
    }
  }

  static Classifier load(const Checkpoint& ck) {
    Classifier model(spec_from_text(ck.text("spec")), ck.tensor("embedding").clone(), 0);
    for (std::size_t i = 0; i < model.params_.names().size(); ++i) {
      const Tensor& stored = ck.tensor("param/" + model.params_.names()[i]);
      Tensor& dst = model.params_.tensors()[i];
      if (stored.shape() != dst.shape()) {
        fail(ErrorKind::Parse, "checkpoint parameter '", model.params_.names()[i], "' has shape ",
             shape_str(stored.shape()), ", model expects ", shape_str(dst.shape()));
      }
      std::copy(stored.values().begin(), stored.values().end(), dst.values().begin());
    }
    return model;
  }

 private:
  static Tensor pad_rows(const Tensor& x, std::size_t rows) {
    if (x.dim(0) >= rows) return x;
    return ops::concat_rows({x, Tensor({rows - x.dim(0), x.dim(1)})});
  }

  Tensor drop(const Tensor& x, bool training, Rng* rng) const {
    return training ? ops::dropout(x, spec_.dropout_p, true, *rng) : x;
  }

  void build(Rng& rng) {
    const std::size_t d = spec_.embedding_dim, h = spec_.hidden_units;
    switch (spec_.variant) {
      case Variant::Rnn:
      case Variant::Lstm:
      case Variant::Gru:
      case Variant::StackedLstm: {
        const RecurrentKind kind = spec_.variant == Variant::Rnn   ? RecurrentKind::Rnn
                                   : spec_.variant == Variant::Gru ? RecurrentKind::Gru
                                                                   : RecurrentKind::Lstm;
        for (std::size_t l = 0; l < spec_.depth; ++l) {
          layers_.push_back(
              RecurrentParams::create(params_, "rec" + std::to_string(l), kind, l == 0 ? d : h, h, rng));
        }
        dense_ = Dense::create(params_, "dense", h, spec_.dense_units, rng);
        head_ = Dense::create(params_, "head", spec_.dense_units, kNumClasses, rng);
        break;
      }
      case Variant::BiLstm:
      case Variant::StackedBiLstm:
        for (std::size_t l = 0; l < spec_.depth; ++l) {
          bi_layers_.push_back(
              BiRecurrent::create(params_, "bilstm" + std::to_string(l), RecurrentKind::Lstm, l == 0 ? d : 2 * h, h, rng));
        }
        dense_ = Dense::create(params_, "timestep_dense", 2 * h, spec_.dense_units, rng);
        head_ = Dense::create(params_, "head", spec_.max_len * spec_.dense_units, kNumClasses, rng);
        break;
      case Variant::CnnGru:
      case Variant::CnnLstm:
      case Variant::CnnBiLstm: {
        const auto& c = *spec_.conv;
        for (std::size_t i = 0; i < c.kernel_sizes.size(); ++i) {
          const std::size_t k = c.kernel_sizes[i];
          convs_.emplace_back(params_.add("conv" + std::to_string(i) + "/w", he_init({k, d, c.filters}, k * d, rng)),
                              params_.add("conv" + std::to_string(i) + "/b", Tensor({c.filters})));
        }
        const std::size_t in = c.filters * c.kernel_sizes.size();
        if (spec_.variant == Variant::CnnBiLstm) {
          bi_layers_.push_back(BiRecurrent::create(params_, "bilstm0", RecurrentKind::Lstm, in, h, rng));
          head_ = Dense::create(params_, "head", 2 * h, kNumClasses, rng);
        } else {
          const auto kind = spec_.variant == Variant::CnnGru ? RecurrentKind::Gru : RecurrentKind::Lstm;
          layers_.push_back(RecurrentParams::create(params_, "rec0", kind, in, h, rng));
          head_ = Dense::create(params_, "head", h, kNumClasses, rng);
        }
        break;
      }
      case Variant::Hahnn: {
        const auto& a = *spec_.attention;
        bi_layers_.push_back(BiRecurrent::create(params_, "word_encoder", a.word_encoder, d, h, rng));
        word_attention_ = Attention::create(params_, "word_attention", 2 * h, a.word_context_dim, rng);
        for (std::size_t i = 0; i < a.conv_filter_sizes.size(); ++i) {
          const std::size_t k = a.conv_filter_sizes[i];
          convs_.emplace_back(
              params_.add("word_conv" + std::to_string(i) + "/w", he_init({k, d, a.conv_filters}, k * d, rng)),
              params_.add("word_conv" + std::to_string(i) + "/b", Tensor({a.conv_filters})));
        }
        const std::size_t sentence_in = 2 * h + a.conv_filters * a.conv_filter_sizes.size();
        bi_layers_.push_back(BiRecurrent::create(params_, "sentence_encoder", a.word_encoder, sentence_in, h, rng));
        sentence_attention_ = Attention::create(params_, "sentence_attention", 2 * h, a.sentence_context_dim, rng);
        head_ = Dense::create(params_, "head", 2 * h, kNumClasses, rng);
        break;
      }
      case Variant::CapsuleA:
      case Variant::CapsuleB:
        for (auto g : spec_.routing->grams) {
          branches_.push_back(CapsuleBranch::create(params_, g, d, *spec_.routing, kNumClasses, rng));
        }
        break;
    }
  }

  Tensor forward_unidirectional(const Tensor& embedded, bool training, Rng* rng) const {
    Tensor x = drop(embedded, training, rng);
    Tensor last;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      auto states = run_recurrent(layers_[l], x);
      last = states.back();
      if (l + 1 < layers_.size()) x = ops::concat_rows(states);
    }
    Tensor hidden = ops::relu((*dense_)(drop(last, training, rng)));
    return head_(hidden);
  }

  Tensor forward_bidirectional(const Tensor& embedded, bool training, Rng* rng) const {
    Tensor x = drop(embedded, training, rng);
    for (const auto& layer : bi_layers_) x = layer.sequence(x);
    const std::size_t len = x.dim(0);
    Tensor per_step = ops::relu((*dense_)(x));
    // Flatten over the real timesteps only; the head rows for padded
    // positions would multiply zeros.
    Tensor flat = drop(ops::reshape(per_step, {1, len * spec_.dense_units}), training, rng);
    return ops::add(ops::matmul(flat, ops::slice_rows(head_.weight, 0, len * spec_.dense_units)), head_.bias);
  }

  Tensor forward_cnn(const Tensor& embedded, bool training, Rng* rng, ForwardTrace* trace) const {
    const auto& c = *spec_.conv;
    Tensor x = drop(embedded, training, rng);
    std::vector<Tensor> branches;
    std::size_t rows = 0;
    for (const auto& [kernel, bias] : convs_) {
      Tensor fmap = ops::relu(ops::add(ops::conv1d(x, kernel, 1, c.dilation), bias));
      branches.push_back(ops::maxpool1d(fmap, c.pool_window));
      rows = rows == 0 ? branches.back().dim(0) : std::min(rows, branches.back().dim(0));
    }
    for (auto& b : branches) {
      if (b.dim(0) > rows) b = ops::slice_rows(b, 0, rows);
    }
    Tensor seq = ops::concat_cols(branches);
    if (trace) trace->conv_rows = rows;
    Tensor summary;
    if (spec_.variant == Variant::CnnBiLstm) {
      auto fwd = run_recurrent(bi_layers_[0].forward, seq, false);
      auto bwd = run_recurrent(bi_layers_[0].backward, seq, true);
      summary = ops::concat_cols({fwd.back(), bwd.front()});
    } else {
      summary = run_recurrent(layers_[0], seq).back();
    }
    return head_(drop(summary, training, rng));
  }

  Tensor forward_hahnn(const std::vector<TokenId>& tokens, bool training, Rng* rng, ForwardTrace* trace) const {
    const auto& a = *spec_.attention;
    const auto sentences = split_sentences(tokens, a.sentence_len, spec_.sentence_break_id);
    std::vector<Tensor> sentence_vectors;
    for (const auto& sentence : sentences) {
      Tensor words = drop(ops::gather_rows(embedding_, sentence), training, rng);
      auto [pooled, alpha] = word_attention_(bi_layers_[0].sequence(words));
      if (trace) trace->word_attention.push_back(alpha.clone());
      std::vector<Tensor> parts{pooled};
      Tensor padded = pad_rows(words, a.sentence_len);
      for (const auto& [kernel, bias] : convs_) {
        Tensor fmap = ops::relu(ops::add(ops::conv1d(padded, kernel), bias));
        parts.push_back(ops::maxpool1d(fmap, fmap.dim(0)));
      }
      sentence_vectors.push_back(ops::concat_cols(parts));
    }
    auto [document, beta] = sentence_attention_(bi_layers_[1].sequence(ops::concat_rows(sentence_vectors)));
    if (trace) trace->sentence_attention = beta.clone();
    return head_(drop(document, training, rng));
  }

  Tensor forward_capsule(const Tensor& embedded, ForwardTrace* trace) const {
    Tensor total;
    for (const auto& branch : branches_) {
      RoutingTrace rt;
      Tensor n = branch.norms(embedded, *spec_.routing, kNumClasses, trace ? &rt : nullptr);
      if (trace) trace->routing.push_back(std::move(rt));
      total = total.defined() ? ops::add(total, n) : n;
    }
    if (branches_.size() == 1) return total;
    return ops::scale(total, 1.0 / static_cast<double>(branches_.size()));
  }

  ModelSpec spec_;
  Tensor embedding_;
  ParamStore params_;
  std::vector<RecurrentParams> layers_;
  std::vector<BiRecurrent> bi_layers_;
  std::vector<std::pair<Tensor, Tensor>> convs_;
  std::optional<Dense> dense_;
  Dense head_;
  Attention word_attention_;
  Attention sentence_attention_;
  std::vector<CapsuleBranch> branches_;
};

}  // namespace sforge
