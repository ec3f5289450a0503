#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "sforge/models/layers.hpp"

namespace sforge {

// squash on a plain vector: s |s| / (1 + |s|^2).
inline std::vector<double> squash(std::span<const double> s) {
  double n2 = 0.0;
  for (double v : s) n2 += v * v;
  std::vector<double> out(s.begin(), s.end());
  if (n2 == 0.0) return out;
  const double factor = std::sqrt(n2) / (1.0 + n2);
  for (double& v : out) v *= factor;
  return out;
}

struct RoutingTrace {
  // Coupling coefficients c_ij ([inputs x outputs]) used at each iteration.
  std::vector<Tensor> coupling;
};

// Routing-by-agreement. predictions[j] holds u_hat_{j|i} for every input
// capsule i as a [inputs x dim] matrix. Returns the output capsules
// v_j as rows of a [outputs x dim] matrix.
inline Tensor dynamic_routing(std::span<const Tensor> predictions, std::size_t iterations,
                              RoutingTrace* trace = nullptr) {
  if (iterations < 1) fail(ErrorKind::Config, "routing iterations must be >= 1");
  if (predictions.empty()) fail(ErrorKind::Dimension, "routing needs at least one output capsule");
  const std::size_t inputs = predictions[0].dim(0);
  const std::size_t outputs = predictions.size();
  for (const auto& p : predictions) {
    if (p.rank() != 2 || p.shape() != predictions[0].shape()) {
      fail(ErrorKind::Dimension, "routing predictions must share one [inputs x dim] shape");
    }
  }
  Tensor logits({inputs, outputs});
  Tensor capsules;
  for (std::size_t it = 0; it < iterations; ++it) {
    Tensor coupling = ops::softmax(logits);
    if (trace) trace->coupling.push_back(coupling.clone());
    std::vector<Tensor> totals;
    totals.reserve(outputs);
    for (std::size_t j = 0; j < outputs; ++j) {
      totals.push_back(ops::matmul(ops::transpose(ops::slice_cols(coupling, j, j + 1)), predictions[j]));
    }
    capsules = ops::squash_rows(ops::concat_rows(totals));
    if (it + 1 == iterations) break;
    std::vector<Tensor> agreement;
    agreement.reserve(outputs);
    for (std::size_t j = 0; j < outputs; ++j) {
      agreement.push_back(ops::matmul(predictions[j], ops::transpose(ops::row(capsules, j))));
    }
    logits = ops::add(logits, ops::concat_cols(agreement));
  }
  return capsules;
}

// One n-gram branch: conv (ReLU, stride 1) -> primary capsules -> routing
// to the class capsules. Transform matrices are shared across positions
// per primary capsule filter.
struct CapsuleBranch {
  std::size_t gram = 3;
  Tensor conv_kernel;  // [gram x emb x conv_filters]
  Tensor conv_bias;    // [conv_filters]
  Tensor primary_w;    // [conv_filters x capsule_filters*dim]
  Tensor primary_b;    // [capsule_filters*dim]
  Tensor transform;    // [capsule_filters*dim x classes*dim]

  static CapsuleBranch create(ParamStore& store, std::size_t gram, std::size_t emb, const RoutingConfig& r,
                              std::size_t classes, Rng& rng) {
    const std::string name = "caps" + std::to_string(gram);
    const std::size_t cf = r.conv_filters, pf = r.capsule_filters, d = r.capsule_dim;
    CapsuleBranch b;
    b.gram = gram;
    b.conv_kernel = store.add(name + "/conv_w", he_init({gram, emb, cf}, gram * emb, rng));
    b.conv_bias = store.add(name + "/conv_b", Tensor({cf}));
    b.primary_w = store.add(name + "/primary_w", he_init({cf, pf * d}, cf, rng));
    b.primary_b = store.add(name + "/primary_b", Tensor({pf * d}));
    b.transform = store.add(name + "/transform", he_init({pf * d, classes * d}, d, rng));
    return b;
  }

  static std::size_t parameter_count(std::size_t gram, std::size_t emb, const RoutingConfig& r, std::size_t classes) {
    const std::size_t cf = r.conv_filters, pf = r.capsule_filters, d = r.capsule_dim;
    return gram * emb * cf + cf + cf * pf * d + pf * d + pf * d * classes * d;
  }

  // x: [L x emb] -> class capsule norms [1 x classes]
  Tensor norms(const Tensor& x, const RoutingConfig& r, std::size_t classes, RoutingTrace* trace) const {
    const std::size_t pf = r.capsule_filters, d = r.capsule_dim;
    Tensor features = ops::relu(ops::add(ops::conv1d(x, conv_kernel), conv_bias));
    Tensor primary = ops::add(ops::matmul(features, primary_w), primary_b);
    std::vector<Tensor> per_filter;
    per_filter.reserve(pf);
    for (std::size_t c = 0; c < pf; ++c) {
      Tensor caps = ops::squash_rows(ops::slice_cols(primary, c * d, (c + 1) * d));
      per_filter.push_back(ops::matmul(caps, ops::slice_rows(transform, c * d, (c + 1) * d)));
    }
    Tensor votes = ops::concat_rows(per_filter);  // [positions*pf x classes*d]
    std::vector<Tensor> predictions;
    predictions.reserve(classes);
    for (std::size_t j = 0; j < classes; ++j) predictions.push_back(ops::slice_cols(votes, j * d, (j + 1) * d));
    Tensor capsules = dynamic_routing(predictions, r.iterations, trace);
    return ops::transpose(ops::row_norms(capsules));
  }
};

}  // namespace sforge
