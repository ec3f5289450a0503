#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "sforge/autograd/ops.hpp"

namespace sforge::testing {

struct GradReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

// Central differences (step h) against the tape's gradients for every
// input tensor. `f` may return any shape; it is reduced with fixed random
// weights so that every output entry contributes. At most `per_tensor`
// coordinates are sampled from each input.
inline GradReport check_gradients(const std::function<Tensor()>& f, std::vector<Tensor> inputs, std::uint64_t seed,
                                  std::size_t per_tensor = 40, double h = 1e-5) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  std::vector<double> weights;
  auto reduce = [&](const Tensor& out) {
    if (weights.empty()) {
      for (std::size_t i = 0; i < out.size(); ++i) weights.push_back(u(rng) * (i % 2 ? -1.0 : 1.0));
    }
    return ops::sum(ops::mul(out, Tensor(out.shape(), weights)));
  };
  for (auto& t : inputs) {
    if (!t.has_grad()) t.set_requires_grad();
    t.zero_grad();
  }
  Tape tape;
  Tensor loss;
  {
    Tape::Scope scope(tape);
    loss = reduce(f());
  }
  tape.backward(loss);
  std::vector<std::vector<double>> analytic;
  for (auto& t : inputs) analytic.emplace_back(t.grad().begin(), t.grad().end());

  auto value = [&] {
    Tape::Pause off;
    return reduce(f()).item();
  };
  GradReport rep;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto& t = inputs[k];
    std::vector<std::size_t> coords(t.size());
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
    if (coords.size() > per_tensor) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(per_tensor);
    }
    for (auto i : coords) {
      const double orig = t[i];
      t[i] = orig + h;
      const double up = value();
      t[i] = orig - h;
      const double down = value();
      t[i] = orig;
      const double numeric = (up - down) / (2 * h);
      const double a = analytic[k][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
      rep.max_rel_error = std::max(rep.max_rel_error, std::abs(a - numeric) / denom);
      ++rep.checked;
    }
  }
  return rep;
}

inline Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = n(rng);
  return t;
}

}  // namespace sforge::testing
