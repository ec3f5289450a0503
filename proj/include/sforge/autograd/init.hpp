#pragma once

#include <cmath>
#include <random>

#include "sforge/autograd/ops.hpp"

namespace sforge {

// He-normal initialization: N(0, sqrt(2 / fan_in)).
inline Tensor he_init(Shape shape, std::size_t fan_in, Rng& rng) {
  if (fan_in < 1) fail(ErrorKind::Config, "he_init: fan_in must be >= 1");
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = dist(rng);
  return t;
}

inline Tensor uniform_init(Shape shape, double lo, double hi, Rng& rng) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = dist(rng);
  return t;
}

}  // namespace sforge
