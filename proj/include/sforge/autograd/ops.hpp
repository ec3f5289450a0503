#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "sforge/autograd/tensor.hpp"

namespace sforge {

using Rng = std::mt19937_64;

namespace ops {

namespace detail {

inline bool tracking(std::initializer_list<const Tensor*> inputs) {
  if (Tape::active() == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

inline bool tracking(std::span<const Tensor> inputs) {
  if (Tape::active() == nullptr) return false;
  for (const Tensor& t : inputs) {
    if (t.requires_grad()) return true;
  }
  return false;
}

inline Tensor output(Shape shape, std::vector<double> values, bool track) {
  Tensor out(std::move(shape), std::move(values));
  if (track) out.set_requires_grad();
  return out;
}

inline void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) fail(ErrorKind::Dimension, op, " expects a matrix, got ", shape_str(t.shape()));
}

// b broadcasts onto a when shapes match, b is a single value, or b's shape
// is a trailing suffix of a's shape.
inline bool broadcasts_onto(const Shape& a, const Shape& b) {
  if (a == b) return true;
  if (shape_size(b) == 1) return true;
  if (b.size() > a.size()) return false;
  return std::equal(b.rbegin(), b.rend(), a.rbegin());
}

template <typename F, typename DF>
Tensor unary(const Tensor& x, F f, DF df) {
  const bool track = tracking({&x});
  std::vector<double> y(x.size());
  auto xv = x.values();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = f(xv[i]);
  Tensor out = output(x.shape(), std::move(y), track);
  if (track) {
    Tape::active()->record([x, out, df]() mutable {
      if (!x.has_grad()) return;
      auto gx = x.grad();
      auto go = out.grad();
      auto xv = x.values();
      auto yv = out.values();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go[i] * df(xv[i], yv[i]);
    });
  }
  return out;
}

enum class Binary { Add, Sub, Mul };

inline Tensor binary(Tensor a, Tensor b, Binary op, const char* name) {
  if (!broadcasts_onto(a.shape(), b.shape())) {
    if (op != Binary::Sub && broadcasts_onto(b.shape(), a.shape())) {
      std::swap(a, b);
    } else {
      fail(ErrorKind::Dimension, name, ": shapes ", shape_str(a.shape()), " and ", shape_str(b.shape()),
           " are not broadcast-compatible");
    }
  }
  const bool track = tracking({&a, &b});
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  auto av = a.values();
  auto bv = b.values();
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double bi = bv[i % m];
    switch (op) {
      case Binary::Add: y[i] = av[i] + bi; break;
      case Binary::Sub: y[i] = av[i] - bi; break;
      case Binary::Mul: y[i] = av[i] * bi; break;
    }
  }
  Tensor out = output(a.shape(), std::move(y), track);
  if (track) {
    Tape::active()->record([a, b, out, op]() mutable {
      auto go = out.grad();
      const std::size_t m = b.size();
      if (a.has_grad()) {
        auto ga = a.grad();
        auto bv = b.values();
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += op == Binary::Mul ? go[i] * bv[i % m] : go[i];
      }
      if (b.has_grad()) {
        auto gb = b.grad();
        auto av = a.values();
        for (std::size_t i = 0; i < go.size(); ++i) {
          switch (op) {
            case Binary::Add: gb[i % m] += go[i]; break;
            case Binary::Sub: gb[i % m] -= go[i]; break;
            case Binary::Mul: gb[i % m] += go[i] * av[i]; break;
          }
        }
      }
    });
  }
  return out;
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) { return detail::binary(a, b, detail::Binary::Add, "add"); }
inline Tensor sub(const Tensor& a, const Tensor& b) { return detail::binary(a, b, detail::Binary::Sub, "sub"); }
inline Tensor mul(const Tensor& a, const Tensor& b) { return detail::binary(a, b, detail::Binary::Mul, "mul"); }

// scale * x + shift
inline Tensor affine(const Tensor& x, double scale, double shift) {
  return detail::unary(
      x, [=](double v) { return scale * v + shift; }, [=](double, double) { return scale; });
}

inline Tensor scale(const Tensor& x, double s) { return affine(x, s, 0.0); }

inline Tensor tanh(const Tensor& x) {
  return detail::unary(
      x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

inline Tensor sigmoid(const Tensor& x) {
  return detail::unary(
      x,
      [](double v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

inline Tensor relu(const Tensor& x) {
  return detail::unary(
      x, [](double v) { return v > 0 ? v : 0.0; }, [](double v, double) { return v > 0 ? 1.0 : 0.0; });
}

inline Tensor exp(const Tensor& x) {
  return detail::unary(
      x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

inline Tensor square(const Tensor& x) {
  return detail::unary(
      x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  detail::require_rank2(a, "matmul");
  detail::require_rank2(b, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    fail(ErrorKind::Dimension, "matmul: inner dimensions disagree for ", shape_str(a.shape()), " and ",
         shape_str(b.shape()));
  }
  const bool track = detail::tracking({&a, &b});
  std::vector<double> y(m * n, 0.0);
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = &bv[p * n];
      double* yrow = &y[i * n];
      for (std::size_t j = 0; j < n; ++j) yrow[j] += aip * brow[j];
    }
  }
  Tensor out = detail::output({m, n}, std::move(y), track);
  if (track) {
    Tape::active()->record([a, b, out, m, k, n]() mutable {
      auto go = out.grad();
      if (a.has_grad()) {
        auto ga = a.grad();
        auto bv = b.values();
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t p = 0; p < k; ++p) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += go[i * n + j] * bv[p * n + j];
            ga[i * k + p] += acc;
          }
        }
      }
      if (b.has_grad()) {
        auto gb = b.grad();
        auto av = a.values();
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t p = 0; p < k; ++p) {
            const double aip = av[i * k + p];
            if (aip == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += aip * go[i * n + j];
          }
        }
      }
    });
  }
  return out;
}

// Softmax over the last axis with max-subtraction.
inline Tensor softmax(const Tensor& x) {
  const std::size_t n = x.shape().back();
  const std::size_t rows = x.size() / n;
  const bool track = detail::tracking({&x});
  std::vector<double> y(x.size());
  auto xv = x.values();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = &xv[r * n];
    double* o = &y[r * n];
    const double mx = *std::max_element(in, in + n);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      o[j] = std::exp(in[j] - mx);
      total += o[j];
    }
    for (std::size_t j = 0; j < n; ++j) o[j] /= total;
  }
  Tensor out = detail::output(x.shape(), std::move(y), track);
  if (track) {
    Tape::active()->record([x, out, n, rows]() mutable {
      if (!x.has_grad()) return;
      auto gx = x.grad();
      auto go = out.grad();
      auto yv = out.values();
      for (std::size_t r = 0; r < rows; ++r) {
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += go[r * n + j] * yv[r * n + j];
        for (std::size_t j = 0; j < n; ++j) gx[r * n + j] += yv[r * n + j] * (go[r * n + j] - dot);
      }
    });
  }
  return out;
}

inline Tensor sum(const Tensor& x) {
  const bool track = detail::tracking({&x});
  double total = 0.0;
  for (double v : x.values()) total += v;
  Tensor out = detail::output({1}, {total}, track);
  if (track) {
    Tape::active()->record([x, out]() mutable {
      if (!x.has_grad()) return;
      const double g = out.grad()[0];
      for (double& gi : x.grad()) gi += g;
    });
  }
  return out;
}

inline Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.size())); }

// [m x n] -> [1 x n]
inline Tensor sum_rows(const Tensor& x) {
  detail::require_rank2(x, "sum_rows");
  const std::size_t m = x.dim(0), n = x.dim(1);
  const bool track = detail::tracking({&x});
  std::vector<double> y(n, 0.0);
  auto xv = x.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) y[j] += xv[i * n + j];
  Tensor out = detail::output({1, n}, std::move(y), track);
  if (track) {
    Tape::active()->record([x, out, m, n]() mutable {
      if (!x.has_grad()) return;
      auto gx = x.grad();
      auto go = out.grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += go[j];
    });
  }
  return out;
}

inline Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    fail(ErrorKind::Dimension, "reshape: cannot view ", shape_str(x.shape()), " as ", shape_str(shape));
  }
  const bool track = detail::tracking({&x});
  Tensor out = detail::output(std::move(shape), std::vector<double>(x.values().begin(), x.values().end()), track);
  if (track) {
    Tape::active()->record([x, out]() mutable {
      if (!x.has_grad()) return;
      auto gx = x.grad();
      auto go = out.grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go[i];
    });
  }
  return out;
}

inline Tensor transpose(const Tensor& x) {
  detail::require_rank2(x, "transpose");
  const std::size_t m = x.dim(0), n = x.dim(1);
  const bool track = detail::tracking({&x});
  std::vector<double> y(m * n);
  auto xv = x.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) y[j * m + i] = xv[i * n + j];
  Tensor out = detail::output({n, m}, std::move(y), track);
  if (track) {
    Tape::active()->record([x, out, m, n]() mutable {
      if (!x.has_grad()) return;
      auto gx = x.grad();
      auto go = out.grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += go[j * m + i];
    });
  }
  return out;
}

// Concatenates matrices with equal row counts along the column axis.
inline Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) fail(ErrorKind::Dimension, "concat_cols: no inputs");
  const std::size_t m = parts[0].rows();
  std::size_t total = 0;
  for (const auto& p : parts) {
    detail::require_rank2(p, "concat_cols");
    if (p.dim(0) != m) {
      fail(ErrorKind::Dimension, "concat_cols: row mismatch ", shape_str(parts[0].shape()), " vs ",
           shape_str(p.shape()));
    }
    total += p.dim(1);
  }
  const bool track = detail::tracking(parts);
  std::vector<double> y(m * total);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t n = p.dim(1);
    auto pv = p.values();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) y[i * total + offset + j] = pv[i * n + j];
    offset += n;
  }
  Tensor out = detail::output({m, total}, std::move(y), track);
  if (track) {
    std::vector<Tensor> inputs(parts.begin(), parts.end());
    Tape::active()->record([inputs, out, m, total]() mutable {
      auto go = out.grad();
      std::size_t offset = 0;
      for (auto& p : inputs) {
        const std::size_t n = p.dim(1);
        if (p.has_grad()) {
          auto gp = p.grad();
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) gp[i * n + j] += go[i * total + offset + j];
        }
        offset += n;
      }
    });
  }
  return out;
}

inline Tensor concat_cols(std::initializer_list<Tensor> parts) {
  return concat_cols(std::span<const Tensor>(parts.begin(), parts.size()));
}

// Stacks matrices with equal column counts along the row axis.
inline Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) fail(ErrorKind::Dimension, "concat_rows: no inputs");
  const std::size_t n = parts[0].cols();
  std::size_t total = 0;
  for (const auto& p : parts) {
    detail::require_rank2(p, "concat_rows");
    if (p.dim(1) != n) {
      fail(ErrorKind::Dimension, "concat_rows: column mismatch ", shape_str(parts[0].shape()), " vs ",
           shape_str(p.shape()));
    }
    total += p.dim(0);
  }
  const bool track = detail::tracking(parts);
  std::vector<double> y;
  y.reserve(total * n);
  for (const auto& p : parts) y.insert(y.end(), p.values().begin(), p.values().end());
  Tensor out = detail::output({total, n}, std::move(y), track);
  if (track) {
    std::vector<Tensor> inputs(parts.begin(), parts.end());
    Tape::active()->record([inputs, out]() mutable {
      auto go = out.grad();
      std::size_t offset = 0;
      for (auto& p : inputs) {
        if (p.has_grad()) {
          auto gp = p.grad();
          for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += go[offset + i];
        }
        offset += p.size();
      }
    });
  }
  return out;
}

inline Tensor concat_rows(std::initializer_list<Tensor> parts) {
  return concat_rows(std::span<const Tensor>(parts.begin(), parts.size()));
}

// Rows [begin, end) of a matrix.
inline Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  detail::require_rank2(x, "slice_rows");
  if (begin >= end || end > x.dim(0)) {
    fail(ErrorKind::Dimension, "slice_rows: range [", begin, ",", end, ") invalid for ", shape_str(x.shape()));
  }
  const std::size_t n = x.dim(1);
  const bool track = detail::tracking({&x});
  auto xv = x.values();
  Tensor out = detail::output({end - begin, n},
                              std::vector<double>(xv.begin() + begin * n, xv.begin() + end * n), track);
  if (track) {
    Tape::active()->record([x, out, begin, n]() mutable {
      if (!x.has_grad()) return;
      auto gx = x.grad();
      auto go = out.grad();
      for (std::size_t i = 0; i < go.size(); ++i) gx[begin * n + i] += go[i];
    });
  }
  return out;
}

inline Tensor row(const Tensor& x, std::size_t i) { return slice_rows(x, i, i + 1); }

// Columns [begin, end) of a matrix.
inline Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
  detail::require_rank2(x, "slice_cols");
  if (begin >= end || end > x.dim(1)) {
    fail(ErrorKind::Dimension, "slice_cols: range [", begin, ",", end, ") invalid for ", shape_str(x.shape()));
  }
  const std::size_t m = x.dim(0), n = x.dim(1), w = end - begin;
  const bool track = detail::tracking({&x});
  std::vector<double> y(m * w);
  auto xv = x.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < w; ++j) y[i * w + j] = xv[i * n + begin + j];
  Tensor out = detail::output({m, w}, std::move(y), track);
  if (track) {
    Tape::active()->record([x, out, m, n, w, begin]() mutable {
      if (!x.has_grad()) return;
      auto gx = x.grad();
      auto go = out.grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < w; ++j) gx[i * n + begin + j] += go[i * w + j];
    });
  }
  return out;
}

// Gathers rows by index; the backward pass scatter-adds. Doubles as the
// embedding lookup.
inline Tensor gather_rows(const Tensor& table, std::span<const std::size_t> indices) {
  detail::require_rank2(table, "gather_rows");
  if (indices.empty()) fail(ErrorKind::EmptySequence, "gather_rows: no indices");
  const std::size_t n = table.dim(1);
  for (auto idx : indices) {
    if (idx >= table.dim(0)) {
      fail(ErrorKind::Dimension, "gather_rows: index ", idx, " out of range for ", shape_str(table.shape()));
    }
  }
  const bool track = detail::tracking({&table});
  std::vector<double> y(indices.size() * n);
  auto tv = table.values();
  for (std::size_t r = 0; r < indices.size(); ++r)
    std::copy_n(&tv[indices[r] * n], n, &y[r * n]);
  Tensor out = detail::output({indices.size(), n}, std::move(y), track);
  if (track) {
    std::vector<std::size_t> idx(indices.begin(), indices.end());
    Tape::active()->record([table, out, idx, n]() mutable {
      if (!table.has_grad()) return;
      auto gt = table.grad();
      auto go = out.grad();
      for (std::size_t r = 0; r < idx.size(); ++r)
        for (std::size_t j = 0; j < n; ++j) gt[idx[r] * n + j] += go[r * n + j];
    });
  }
  return out;
}

// Valid cross-correlation along the sequence axis.
// x: [L x c_in], kernels: [k x c_in x c_out] -> [(L - (k-1)*dilation - 1)/stride + 1 x c_out]
inline Tensor conv1d(const Tensor& x, const Tensor& kernels, std::size_t stride = 1, std::size_t dilation = 1) {
  detail::require_rank2(x, "conv1d");
  if (kernels.rank() != 3) fail(ErrorKind::Dimension, "conv1d: kernels must be [k x c_in x c_out], got ", shape_str(kernels.shape()));
  if (stride == 0 || dilation == 0) fail(ErrorKind::Config, "conv1d: stride and dilation must be >= 1");
  const std::size_t len = x.dim(0), cin = x.dim(1);
  const std::size_t k = kernels.dim(0), cout = kernels.dim(2);
  if (kernels.dim(1) != cin) {
    fail(ErrorKind::Dimension, "conv1d: input ", shape_str(x.shape()), " has ", cin, " channels, kernels ",
         shape_str(kernels.shape()), " expect ", kernels.dim(1));
  }
  const std::size_t span = (k - 1) * dilation + 1;
  if (len < span) fail(ErrorKind::SequenceTooShort, "conv1d: sequence length ", len, " shorter than kernel span ", span);
  const std::size_t out_len = (len - span) / stride + 1;
  const bool track = detail::tracking({&x, &kernels});
  std::vector<double> y(out_len * cout, 0.0);
  auto xv = x.values();
  auto kv = kernels.values();
  for (std::size_t t = 0; t < out_len; ++t) {
    double* yrow = &y[t * cout];
    for (std::size_t q = 0; q < k; ++q) {
      const double* xrow = &xv[(t * stride + q * dilation) * cin];
      for (std::size_t c = 0; c < cin; ++c) {
        const double xval = xrow[c];
        if (xval == 0.0) continue;
        const double* krow = &kv[(q * cin + c) * cout];
        for (std::size_t o = 0; o < cout; ++o) yrow[o] += xval * krow[o];
      }
    }
  }
  Tensor out = detail::output({out_len, cout}, std::move(y), track);
  if (track) {
    Tape::active()->record([x, kernels, out, out_len, k, cin, cout, stride, dilation]() mutable {
      auto go = out.grad();
      auto xv = x.values();
      auto kv = kernels.values();
      const bool gx_on = x.has_grad();
      const bool gk_on = kernels.has_grad();
      auto gx = x.grad();
      auto gk = kernels.grad();
      for (std::size_t t = 0; t < out_len; ++t) {
        const double* grow = &go[t * cout];
        for (std::size_t q = 0; q < k; ++q) {
          const std::size_t pos = t * stride + q * dilation;
          for (std::size_t c = 0; c < cin; ++c) {
            const std::size_t kbase = (q * cin + c) * cout;
            if (gx_on) {
              double acc = 0.0;
              for (std::size_t o = 0; o < cout; ++o) acc += grow[o] * kv[kbase + o];
              gx[pos * cin + c] += acc;
            }
            if (gk_on) {
              const double xval = xv[pos * cin + c];
              for (std::size_t o = 0; o < cout; ++o) gk[kbase + o] += xval * grow[o];
            }
          }
        }
      }
    });
  }
  return out;
}

// Non-overlapping max over windows of the sequence axis; ties go to the
// lowest index. Trailing rows that do not fill a window are dropped.
inline Tensor maxpool1d(const Tensor& x, std::size_t window) {
  detail::require_rank2(x, "maxpool1d");
  const std::size_t len = x.dim(0), c = x.dim(1);
  if (window < 1) fail(ErrorKind::Pooling, "maxpool1d: window must be >= 1");
  if (window > len) fail(ErrorKind::Pooling, "maxpool1d: window ", window, " exceeds sequence length ", len);
  const std::size_t out_len = len / window;
  const bool track = detail::tracking({&x});
  std::vector<double> y(out_len * c);
  std::vector<std::size_t> argmax(out_len * c);
  auto xv = x.values();
  for (std::size_t w = 0; w < out_len; ++w) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      std::size_t best = w * window;
      for (std::size_t t = w * window + 1; t < (w + 1) * window; ++t) {
        if (xv[t * c + ch] > xv[best * c + ch]) best = t;
      }
      y[w * c + ch] = xv[best * c + ch];
      argmax[w * c + ch] = best * c + ch;
    }
  }
  Tensor out = detail::output({out_len, c}, std::move(y), track);
  if (track) {
    Tape::active()->record([x, out, argmax]() mutable {
      if (!x.has_grad()) return;
      auto gx = x.grad();
      auto go = out.grad();
      for (std::size_t i = 0; i < go.size(); ++i) gx[argmax[i]] += go[i];
    });
  }
  return out;
}

// Inverted dropout: in training mode each entry survives with probability
// 1 - p and is scaled by 1/(1 - p); evaluation mode is the identity.
inline Tensor dropout(const Tensor& x, double p, bool training, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) fail(ErrorKind::Config, "dropout probability ", p, " outside [0, 1)");
  if (!training || p == 0.0) return x;
  std::bernoulli_distribution keep(1.0 - p);
  const double inv = 1.0 / (1.0 - p);
  std::vector<double> mask(x.size());
  for (auto& m : mask) m = keep(rng) ? inv : 0.0;
  return mul(x, Tensor(x.shape(), std::move(mask)));
}

// Euclidean norm of each row: [m x n] -> [m x 1]. The gradient at a zero
// row is taken as zero.
inline Tensor row_norms(const Tensor& x) {
  detail::require_rank2(x, "row_norms");
  const std::size_t m = x.dim(0), n = x.dim(1);
  const bool track = detail::tracking({&x});
  std::vector<double> y(m);
  auto xv = x.values();
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += xv[i * n + j] * xv[i * n + j];
    y[i] = std::sqrt(s);
  }
  Tensor out = detail::output({m, 1}, std::move(y), track);
  if (track) {
    Tape::active()->record([x, out, m, n]() mutable {
      if (!x.has_grad()) return;
      auto gx = x.grad();
      auto go = out.grad();
      auto xv = x.values();
      auto yv = out.values();
      for (std::size_t i = 0; i < m; ++i) {
        if (yv[i] == 0.0) continue;
        for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += go[i] * xv[i * n + j] / yv[i];
      }
    });
  }
  return out;
}

// Capsule squash applied to every row: s * |s| / (1 + |s|^2). Zero rows map
// to zero with zero gradient.
inline Tensor squash_rows(const Tensor& x) {
  detail::require_rank2(x, "squash_rows");
  const std::size_t m = x.dim(0), n = x.dim(1);
  const bool track = detail::tracking({&x});
  std::vector<double> y(m * n);
  std::vector<double> norms(m);
  auto xv = x.values();
  for (std::size_t i = 0; i < m; ++i) {
    double s2 = 0.0;
    for (std::size_t j = 0; j < n; ++j) s2 += xv[i * n + j] * xv[i * n + j];
    const double r = std::sqrt(s2);
    norms[i] = r;
    const double factor = r / (1.0 + s2);
    for (std::size_t j = 0; j < n; ++j) y[i * n + j] = xv[i * n + j] * factor;
  }
  Tensor out = detail::output({m, n}, std::move(y), track);
  if (track) {
    Tape::active()->record([x, out, norms, m, n]() mutable {
      if (!x.has_grad()) return;
      auto gx = x.grad();
      auto go = out.grad();
      auto xv = x.values();
      for (std::size_t i = 0; i < m; ++i) {
        const double r = norms[i];
        if (r == 0.0) continue;
        const double r2 = r * r;
        const double g = r / (1.0 + r2);
        // d/dr [r / (1 + r^2)] divided by r
        const double dg_over_r = (1.0 - r2) / ((1.0 + r2) * (1.0 + r2)) / r;
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += xv[i * n + j] * go[i * n + j];
        for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += g * go[i * n + j] + xv[i * n + j] * dg_over_r * dot;
      }
    });
  }
  return out;
}

}  // namespace ops
}  // namespace sforge
