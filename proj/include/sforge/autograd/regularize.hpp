#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "sforge/autograd/tensor.hpp"

namespace sforge {

struct RegularizerConfig {
  double l1 = 0.0;
  double l2 = 0.0;
  double dropout_p = 0.0;
  int early_stop_patience = 0;  // 0 disables early stopping in the trainer

  void validate() const {
    if (l1 < 0 || l2 < 0) fail(ErrorKind::Config, "l1/l2 must be non-negative");
    if (!(dropout_p >= 0 && dropout_p < 1)) fail(ErrorKind::Config, "dropout must lie in [0, 1), got ", dropout_p);
    if (early_stop_patience < 0) fail(ErrorKind::Config, "early-stop patience must be >= 0");
  }
};

// Adds the l1/l2 penalty gradients to each parameter's gradient buffer and
// returns the penalty value l1*sum|w| + l2*sum w^2.
inline double apply_weight_penalty(std::span<Tensor> params, double l1, double l2) {
  if (l1 == 0.0 && l2 == 0.0) return 0.0;
  double penalty = 0.0;
  for (auto& p : params) {
    auto w = p.values();
    auto g = p.grad();
    for (std::size_t j = 0; j < w.size(); ++j) {
      penalty += l1 * std::abs(w[j]) + l2 * w[j] * w[j];
      const double sign = w[j] > 0 ? 1.0 : (w[j] < 0 ? -1.0 : 0.0);
      g[j] += l1 * sign + 2.0 * l2 * w[j];
    }
  }
  return penalty;
}

enum class EarlyStop { Continue, Stop };

// Stop once the best (lowest) loss is at least `patience` epochs old; with
// patience 0 any non-improving epoch stops.
inline EarlyStop early_stop_check(std::span<const double> history, int patience) {
  if (history.empty()) fail(ErrorKind::Training, "early_stop_check: empty loss history");
  std::size_t best = 0;
  for (std::size_t i = 1; i < history.size(); ++i) {
    if (history[i] < history[best]) best = i;
  }
  const std::size_t stale = history.size() - 1 - best;
  if (stale > 0 && stale >= static_cast<std::size_t>(std::max(patience, 0))) return EarlyStop::Stop;
  return EarlyStop::Continue;
}

}  // namespace sforge
