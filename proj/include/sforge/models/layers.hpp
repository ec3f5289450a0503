#pragma once

#include <string>
#include <utility>
#include <vector>

#include "sforge/autograd/init.hpp"
#include "sforge/autograd/ops.hpp"
#include "sforge/models/spec.hpp"

namespace sforge {

// Named trainable tensors in creation order.
class ParamStore {
 public:
  Tensor add(const std::string& name, Tensor t) {
    for (const auto& n : names_) {
      if (n == name) fail(ErrorKind::Config, "duplicate parameter name '", name, "'");
    }
    t.set_requires_grad();
    names_.push_back(name);
    tensors_.push_back(t);
    return t;
  }

  const std::vector<std::string>& names() const { return names_; }
  std::vector<Tensor>& tensors() { return tensors_; }
  const std::vector<Tensor>& tensors() const { return tensors_; }

  const Tensor& get(const std::string& name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
      if (names_[i] == name) return tensors_[i];
    fail(ErrorKind::Config, "no parameter named '", name, "'");
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += t.size();
    return n;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
};

struct Dense {
  Tensor weight;  // [in x out]
  Tensor bias;    // [out]

  static Dense create(ParamStore& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
    return {store.add(name + "/w", he_init({in, out}, in, rng)), store.add(name + "/b", Tensor({out}))};
  }

  Tensor operator()(const Tensor& x) const { return ops::add(ops::matmul(x, weight), bias); }
};

// Recurrent weights. Gate columns: LSTM [i | f | g | o]; GRU [z | r | n]
// where the candidate's recurrent weights live in `recurrent_candidate`.
struct RecurrentParams {
  RecurrentKind kind = RecurrentKind::Lstm;
  std::size_t hidden = 0;
  Tensor input;                // [in x G*h]
  Tensor recurrent;            // [h x G*h]   (GRU: [h x 2h], gates z and r)
  Tensor recurrent_candidate;  // GRU only: [h x h]
  Tensor bias;                 // [G*h]

  static std::size_t gates(RecurrentKind k) {
    switch (k) {
      case RecurrentKind::Rnn: return 1;
      case RecurrentKind::Lstm: return 4;
      case RecurrentKind::Gru: return 3;
    }
    return 0;
  }

  static RecurrentParams create(ParamStore& store, const std::string& name, RecurrentKind kind, std::size_t in,
                                std::size_t hidden, Rng& rng) {
    RecurrentParams p;
    p.kind = kind;
    p.hidden = hidden;
    const std::size_t g = gates(kind);
    p.input = store.add(name + "/wx", he_init({in, g * hidden}, in, rng));
    if (kind == RecurrentKind::Gru) {
      p.recurrent = store.add(name + "/wh", he_init({hidden, 2 * hidden}, hidden, rng));
      p.recurrent_candidate = store.add(name + "/wh_n", he_init({hidden, hidden}, hidden, rng));
    } else {
      p.recurrent = store.add(name + "/wh", he_init({hidden, g * hidden}, hidden, rng));
    }
    Tensor bias({g * hidden});
    if (kind == RecurrentKind::Lstm) {
      for (std::size_t j = hidden; j < 2 * hidden; ++j) bias[j] = 1.0;  // forget gate
    }
    p.bias = store.add(name + "/b", bias);
    return p;
  }

  static std::size_t parameter_count(RecurrentKind kind, std::size_t in, std::size_t hidden) {
    const std::size_t g = gates(kind);
    return in * g * hidden + hidden * g * hidden + g * hidden;
  }
};

// One LSTM step. `projected` is x_t * W_x + b for this step ([1 x 4h]).
inline std::pair<Tensor, Tensor> lstm_step(const Tensor& projected, const Tensor& h_prev, const Tensor& c_prev,
                                           const RecurrentParams& p) {
  const std::size_t h = p.hidden;
  Tensor z = ops::add(projected, ops::matmul(h_prev, p.recurrent));
  Tensor i = ops::sigmoid(ops::slice_cols(z, 0, h));
  Tensor f = ops::sigmoid(ops::slice_cols(z, h, 2 * h));
  Tensor g = ops::tanh(ops::slice_cols(z, 2 * h, 3 * h));
  Tensor o = ops::sigmoid(ops::slice_cols(z, 3 * h, 4 * h));
  Tensor c = ops::add(ops::mul(f, c_prev), ops::mul(i, g));
  Tensor hn = ops::mul(o, ops::tanh(c));
  return {hn, c};
}

inline Tensor gru_step(const Tensor& projected, const Tensor& h_prev, const RecurrentParams& p) {
  const std::size_t h = p.hidden;
  Tensor zr = ops::add(ops::slice_cols(projected, 0, 2 * h), ops::matmul(h_prev, p.recurrent));
  Tensor z = ops::sigmoid(ops::slice_cols(zr, 0, h));
  Tensor r = ops::sigmoid(ops::slice_cols(zr, h, 2 * h));
  Tensor n = ops::tanh(
      ops::add(ops::slice_cols(projected, 2 * h, 3 * h), ops::matmul(ops::mul(r, h_prev), p.recurrent_candidate)));
  // (1 - z) * h_prev + z * n
  return ops::add(ops::mul(ops::affine(z, -1.0, 1.0), h_prev), ops::mul(z, n));
}

inline Tensor rnn_step(const Tensor& projected, const Tensor& h_prev, const RecurrentParams& p) {
  return ops::tanh(ops::add(projected, ops::matmul(h_prev, p.recurrent)));
}

inline void check_cell_input(const Tensor& x_t, const Tensor& h_prev, const RecurrentParams& p) {
  if (x_t.rank() != 2 || x_t.dim(0) != 1 || x_t.dim(1) != p.input.dim(0)) {
    fail(ErrorKind::Dimension, "cell input ", shape_str(x_t.shape()), " does not match weights ",
         shape_str(p.input.shape()));
  }
  if (h_prev.rank() != 2 || h_prev.dim(0) != 1 || h_prev.dim(1) != p.hidden) {
    fail(ErrorKind::Dimension, "hidden state ", shape_str(h_prev.shape()), " does not match ", p.hidden, " units");
  }
}

// Single LSTM cell on a [1 x in] input.
inline std::pair<Tensor, Tensor> lstm_cell(const Tensor& x_t, const Tensor& h_prev, const Tensor& c_prev,
                                           const RecurrentParams& p) {
  check_cell_input(x_t, h_prev, p);
  if (c_prev.shape() != h_prev.shape()) fail(ErrorKind::Dimension, "cell state shape ", shape_str(c_prev.shape()));
  return lstm_step(ops::add(ops::matmul(x_t, p.input), p.bias), h_prev, c_prev, p);
}

inline Tensor gru_cell(const Tensor& x_t, const Tensor& h_prev, const RecurrentParams& p) {
  check_cell_input(x_t, h_prev, p);
  return gru_step(ops::add(ops::matmul(x_t, p.input), p.bias), h_prev, p);
}

// Runs a recurrent layer over x ([T x in]); returns the T hidden states in
// input order. `reverse` consumes the sequence back to front.
inline std::vector<Tensor> run_recurrent(const RecurrentParams& p, const Tensor& x, bool reverse = false) {
  const std::size_t len = x.dim(0);
  Tensor projected = ops::add(ops::matmul(x, p.input), p.bias);
  Tensor h({1, p.hidden});
  Tensor c({1, p.hidden});
  std::vector<Tensor> states(len);
  for (std::size_t step = 0; step < len; ++step) {
    const std::size_t t = reverse ? len - 1 - step : step;
    Tensor xt = ops::row(projected, t);
    switch (p.kind) {
      case RecurrentKind::Lstm: std::tie(h, c) = lstm_step(xt, h, c, p); break;
      case RecurrentKind::Gru: h = gru_step(xt, h, p); break;
      case RecurrentKind::Rnn: h = rnn_step(xt, h, p); break;
    }
    states[t] = h;
  }
  return states;
}

struct BiRecurrent {
  RecurrentParams forward;
  RecurrentParams backward;

  static BiRecurrent create(ParamStore& store, const std::string& name, RecurrentKind kind, std::size_t in,
                            std::size_t hidden, Rng& rng) {
    auto f = RecurrentParams::create(store, name + "/fwd", kind, in, hidden, rng);
    auto b = RecurrentParams::create(store, name + "/bwd", kind, in, hidden, rng);
    return {f, b};
  }

  // [T x in] -> [T x 2h], forward states first in each row.
  Tensor sequence(const Tensor& x) const {
    auto fwd = run_recurrent(forward, x, false);
    auto bwd = run_recurrent(backward, x, true);
    return ops::concat_cols({ops::concat_rows(fwd), ops::concat_rows(bwd)});
  }
};

struct Attention {
  Tensor weight;   // [d x a]
  Tensor bias;     // [a]
  Tensor context;  // [a x 1]

  static Attention create(ParamStore& store, const std::string& name, std::size_t in, std::size_t ctx, Rng& rng) {
    return {store.add(name + "/w", he_init({in, ctx}, in, rng)), store.add(name + "/b", Tensor({ctx})),
            store.add(name + "/context", he_init({ctx, 1}, ctx, rng))};
  }

  // u = tanh(H W + b); alpha = softmax(u . context); pooled = alpha H.
  // Returns (pooled [1 x d], alpha [1 x n]).
  std::pair<Tensor, Tensor> operator()(const Tensor& states) const {
    Tensor u = ops::tanh(ops::add(ops::matmul(states, weight), bias));
    Tensor alpha = ops::softmax(ops::transpose(ops::matmul(u, context)));
    return {ops::matmul(alpha, states), alpha};
  }
};

}  // namespace sforge
