#pragma once

#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sforge/autograd/tensor.hpp"

namespace sforge {

enum class OptimizerKind { Sgd, Adam, Adadelta };

inline const char* to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::Sgd: return "sgd";
    case OptimizerKind::Adam: return "adam";
    case OptimizerKind::Adadelta: return "adadelta";
  }
  return "?";
}

inline OptimizerKind parse_optimizer_kind(std::string_view s) {
  if (s == "sgd") return OptimizerKind::Sgd;
  if (s == "adam") return OptimizerKind::Adam;
  if (s == "adadelta") return OptimizerKind::Adadelta;
  fail(ErrorKind::Config, "unknown optimizer '", s, "' (expected sgd|adam|adadelta)");
}

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double learning_rate = 0.001;
  // Time-based decay: lr_t = lr / (1 + decay * step)
  double decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double rho = 0.95;
  // Adam uses 1e-8, Adadelta 1e-6 unless overridden.
  double epsilon = -1.0;

  double eps() const {
    if (epsilon > 0) return epsilon;
    return kind == OptimizerKind::Adadelta ? 1e-6 : 1e-8;
  }

  void validate() const {
    if (!(learning_rate > 0)) fail(ErrorKind::Config, "learning rate must be > 0, got ", learning_rate);
    if (decay < 0) fail(ErrorKind::Config, "learning rate decay must be >= 0, got ", decay);
    if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) fail(ErrorKind::Config, "Adam betas must lie in [0, 1)");
    if (!(rho > 0 && rho < 1)) fail(ErrorKind::Config, "Adadelta rho must lie in (0, 1)");
  }

  static OptimizerConfig adam(double lr = 0.001, double decay = 0.0) {
    return OptimizerConfig{OptimizerKind::Adam, lr, decay};
  }
  static OptimizerConfig adadelta(double lr = 0.95) { return OptimizerConfig{OptimizerKind::Adadelta, lr}; }
  static OptimizerConfig sgd(double lr) { return OptimizerConfig{OptimizerKind::Sgd, lr}; }
};

// Per-parameter auxiliary state. For Adam `first`/`second` are the moment
// estimates; for Adadelta they are the accumulated squared gradient and
// squared update.
struct OptimizerSlot {
  std::vector<double> first;
  std::vector<double> second;
};

struct OptimizerState {
  OptimizerConfig config;
  std::vector<OptimizerSlot> slots;
  long step_count = 0;

  explicit OptimizerState(OptimizerConfig cfg = {}) : config(cfg) { config.validate(); }

  void attach(std::span<const Tensor> params) {
    slots.clear();
    for (const auto& p : params) slots.push_back({std::vector<double>(p.size(), 0.0), std::vector<double>(p.size(), 0.0)});
  }
};

// Applies one update to every parameter from its gradient buffer.
inline void optimizer_step(OptimizerState& state, std::span<Tensor> params) {
  if (state.slots.size() != params.size()) state.attach(params);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].has_grad()) fail(ErrorKind::Training, "parameter ", i, " has no gradient");
    if (state.slots[i].first.size() != params[i].size()) {
      fail(ErrorKind::Training, "optimizer slot ", i, " does not match its parameter shape");
    }
  }
  const auto& cfg = state.config;
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double lr = cfg.learning_rate / (1.0 + cfg.decay * (t - 1.0));
  const double eps = cfg.eps();

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i].values();
    auto g = params[i].grad();
    auto& slot = state.slots[i];
    switch (cfg.kind) {
      case OptimizerKind::Sgd:
        for (std::size_t j = 0; j < w.size(); ++j) w[j] -= lr * g[j];
        break;
      case OptimizerKind::Adam: {
        const double c1 = 1.0 - std::pow(cfg.beta1, t);
        const double c2 = 1.0 - std::pow(cfg.beta2, t);
        for (std::size_t j = 0; j < w.size(); ++j) {
          slot.first[j] = cfg.beta1 * slot.first[j] + (1.0 - cfg.beta1) * g[j];
          slot.second[j] = cfg.beta2 * slot.second[j] + (1.0 - cfg.beta2) * g[j] * g[j];
          const double m_hat = slot.first[j] / c1;
          const double v_hat = slot.second[j] / c2;
          w[j] -= lr * m_hat / (std::sqrt(v_hat) + eps);
        }
        break;
      }
      case OptimizerKind::Adadelta:
        for (std::size_t j = 0; j < w.size(); ++j) {
          slot.first[j] = cfg.rho * slot.first[j] + (1.0 - cfg.rho) * g[j] * g[j];
          const double update = g[j] * std::sqrt(slot.second[j] + eps) / std::sqrt(slot.first[j] + eps);
          w[j] -= lr * update;
          slot.second[j] = cfg.rho * slot.second[j] + (1.0 - cfg.rho) * update * update;
        }
        break;
    }
  }
}

}  // namespace sforge
