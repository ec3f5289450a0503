#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "sforge/autograd/ops.hpp"

namespace sforge::ops {

namespace detail {

// Returns the hot column of each row; rejects anything that is not one-hot.
inline std::vector<std::size_t> one_hot_targets(const Tensor& targets, std::size_t rows, std::size_t cols) {
  if (targets.rank() != 2 || targets.dim(0) != rows || targets.dim(1) != cols) {
    fail(ErrorKind::Label, "targets ", shape_str(targets.shape()), " do not match scores [", rows, "x", cols, "]");
  }
  std::vector<std::size_t> hot(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    int ones = 0;
    for (std::size_t j = 0; j < cols; ++j) {
      const double t = targets.at(i, j);
      if (t == 1.0) {
        ++ones;
        hot[i] = j;
      } else if (t != 0.0) {
        fail(ErrorKind::Label, "target row ", i, " is not one-hot (entry ", t, ")");
      }
    }
    if (ones != 1) fail(ErrorKind::Label, "target row ", i, " has ", ones, " hot entries");
  }
  return hot;
}

}  // namespace detail

inline Tensor one_hot(std::span<const std::size_t> labels, std::size_t classes) {
  Tensor t({labels.size(), classes});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= classes) fail(ErrorKind::Label, "label ", labels[i], " outside ", classes, " classes");
    t.at(i, labels[i]) = 1.0;
  }
  return t;
}

// Mean over the batch of -log softmax(logits)[target]. Optional per-class
// weights scale each row's term.
inline Tensor cross_entropy(const Tensor& logits, const Tensor& targets,
                            std::span<const double> class_weights = {}) {
  if (logits.rank() != 2) fail(ErrorKind::Dimension, "cross_entropy expects [n x classes] logits, got ", shape_str(logits.shape()));
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  const auto hot = detail::one_hot_targets(targets, n, c);
  if (!class_weights.empty() && class_weights.size() != c) {
    fail(ErrorKind::Config, "class weight count ", class_weights.size(), " != ", c);
  }
  const bool track = detail::tracking({&logits});
  std::vector<double> probs(n * c);
  std::vector<double> weights(n, 1.0);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double mx = logits.at(i, 0);
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, logits.at(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(logits.at(i, j) - mx);
    const double log_z = mx + std::log(z);
    for (std::size_t j = 0; j < c; ++j) probs[i * c + j] = std::exp(logits.at(i, j) - log_z);
    if (!class_weights.empty()) weights[i] = class_weights[hot[i]];
    total += weights[i] * (log_z - logits.at(i, hot[i]));
  }
  Tensor out = detail::output({1}, {total / static_cast<double>(n)}, track);
  if (track) {
    Tape::active()->record([logits, out, probs, hot, weights, n, c]() mutable {
      if (!logits.has_grad()) return;
      auto gl = logits.grad();
      const double g = out.grad()[0] / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
          const double target = j == hot[i] ? 1.0 : 0.0;
          gl[i * c + j] += g * weights[i] * (probs[i * c + j] - target);
        }
      }
    });
  }
  return out;
}

struct MarginLossConfig {
  double m_plus = 0.8;
  double m_minus = 0.2;
  double lambda = 0.5;
};

// Capsule margin loss, averaged over the batch:
//   sum_k T_k max(0, m+ - |v_k|)^2 + lambda (1 - T_k) max(0, |v_k| - m-)^2
inline Tensor margin_loss(const Tensor& norms, const Tensor& targets, MarginLossConfig cfg = {},
                          std::span<const double> class_weights = {}) {
  if (norms.rank() != 2) fail(ErrorKind::Dimension, "margin_loss expects [n x classes] norms, got ", shape_str(norms.shape()));
  const std::size_t n = norms.dim(0), c = norms.dim(1);
  const auto hot = detail::one_hot_targets(targets, n, c);
  const bool track = detail::tracking({&norms});
  std::vector<double> weights(n, 1.0);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!class_weights.empty()) weights[i] = class_weights[hot[i]];
    for (std::size_t k = 0; k < c; ++k) {
      const double v = norms.at(i, k);
      if (k == hot[i]) {
        const double h = std::max(0.0, cfg.m_plus - v);
        total += weights[i] * h * h;
      } else {
        const double h = std::max(0.0, v - cfg.m_minus);
        total += weights[i] * cfg.lambda * h * h;
      }
    }
  }
  Tensor out = detail::output({1}, {total / static_cast<double>(n)}, track);
  if (track) {
    Tape::active()->record([norms, out, hot, weights, cfg, n, c]() mutable {
      if (!norms.has_grad()) return;
      auto gn = norms.grad();
      const double g = out.grad()[0] / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < c; ++k) {
          const double v = norms.at(i, k);
          double d = 0.0;
          if (k == hot[i]) {
            d = -2.0 * std::max(0.0, cfg.m_plus - v);
          } else {
            d = 2.0 * cfg.lambda * std::max(0.0, v - cfg.m_minus);
          }
          gn[i * c + k] += g * weights[i] * d;
        }
      }
    });
  }
  return out;
}

}  // namespace sforge::ops
