#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "gradcheck.hpp"
#include "op_cases.hpp"
#include "sforge/autograd/checkpoint.hpp"
#include "sforge/autograd/init.hpp"
#include "sforge/autograd/loss.hpp"
#include "sforge/autograd/optim.hpp"
#include "sforge/autograd/regularize.hpp"

using namespace sforge;
using sforge::testing::check_gradients;
using sforge::testing::random_tensor;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::Config;
}

std::vector<double> vals(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

}  // namespace

TEST(Tensor, ShapeAndErrors) {
  Tensor t({2, 3}, 1.5);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
  EXPECT_EQ(kind_of([] { Tensor({2, 0}); }), ErrorKind::Dimension);
  EXPECT_EQ(kind_of([] { Tensor({2, 2}, std::vector<double>{1, 2, 3}); }), ErrorKind::Dimension);
  EXPECT_FALSE(t.has_grad());
  t.set_requires_grad();
  EXPECT_TRUE(t.has_grad());
  EXPECT_EQ(t.grad().size(), 6u);
}

TEST(Tape, ReplaysInReverseOrder) {
  Tape tape;
  std::vector<int> order;
  tape.record([&] { order.push_back(1); });
  tape.record([&] { order.push_back(2); });
  tape.record([&] { order.push_back(3); });
  Tensor loss = Tensor::scalar(0.0);
  loss.set_requires_grad();
  tape.backward(loss);
  EXPECT_EQ(order, (std::vector<int>{3, 2, 1}));
  EXPECT_EQ(tape.size(), 0u);
}

TEST(Tape, NoRecordingWithoutActiveTape) {
  Tensor a({2}, 1.0);
  a.set_requires_grad();
  Tensor b = ops::tanh(a);
  EXPECT_FALSE(b.has_grad());
  Tape tape;
  {
    Tape::Scope s(tape);
    Tensor c = ops::tanh(a);
    EXPECT_EQ(tape.size(), 1u);
    {
      Tape::Pause p;
      ops::tanh(a);
    }
    EXPECT_EQ(tape.size(), 1u);
  }
}

TEST(Matmul, Values) {
  Tensor i2 = Tensor::matrix(2, 2, {1, 0, 0, 1});
  EXPECT_EQ(vals(ops::matmul(i2, i2)), vals(i2));
  auto r = ops::matmul(Tensor::matrix(2, 2, {1, 2, 3, 4}), Tensor::matrix(2, 1, {1, 1}));
  EXPECT_EQ(r.shape(), (Shape{2, 1}));
  EXPECT_EQ(vals(r), (std::vector<double>{3, 7}));
}

TEST(Matmul, DimensionErrorNamesShapes) {
  try {
    ops::matmul(Tensor({2, 3}), Tensor({2, 3}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Dimension);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3]"), std::string::npos) << msg;
  }
}

TEST(Elementwise, Values) {
  EXPECT_EQ(vals(ops::relu(Tensor({3}, std::vector<double>{-1, 0, 2}))), (std::vector<double>{0, 0, 2}));
  EXPECT_EQ(ops::sigmoid(Tensor::scalar(0)).item(), 0.5);
  EXPECT_EQ(vals(ops::add(Tensor::matrix(2, 2, {1, 2, 3, 4}), Tensor({2}, std::vector<double>{10, 20}))),
            (std::vector<double>{11, 22, 13, 24}));
  EXPECT_EQ(kind_of([] { ops::add(Tensor({2, 3}), Tensor({2})); }), ErrorKind::Dimension);
}

TEST(Softmax, Values) {
  auto s = ops::softmax(Tensor({4}, 0.0));
  for (double v : s.values()) EXPECT_DOUBLE_EQ(v, 0.25);
  auto big = ops::softmax(Tensor({2}, std::vector<double>{1000, 0}));
  EXPECT_TRUE(big.all_finite());
  EXPECT_NEAR(big[0], 1.0, 1e-12);
  EXPECT_NEAR(big[1], 0.0, 1e-12);
}

TEST(Softmax, RowsSumToOne) {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    auto s = ops::softmax(random_tensor({5, 7}, rng, 5.0));
    for (std::size_t r = 0; r < 5; ++r) {
      double total = 0;
      for (std::size_t c = 0; c < 7; ++c) total += s.at(r, c);
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
  }
}

TEST(Conv1d, ShapeAndConstant) {
  EXPECT_EQ(ops::conv1d(Tensor({10, 2}), Tensor({3, 2, 4})).shape(), (Shape{8, 4}));
  auto out = ops::conv1d(Tensor({6, 1}, 1.0), Tensor({3, 1, 1}, 1.0 / 3));
  for (double v : out.values()) EXPECT_NEAR(v, 1.0, 1e-15);
  EXPECT_EQ(kind_of([] { ops::conv1d(Tensor({2, 1}), Tensor({3, 1, 1})); }), ErrorKind::SequenceTooShort);
}

TEST(Maxpool, ValuesAndTies) {
  EXPECT_EQ(vals(ops::maxpool1d(Tensor({4, 1}, std::vector<double>{1, 5, 2, 4}), 2)), (std::vector<double>{5, 4}));
  Tensor x({4, 1}, 3.0);
  x.set_requires_grad();
  Tape tape;
  Tensor loss;
  {
    Tape::Scope s(tape);
    loss = ops::sum(ops::maxpool1d(x, 2));
  }
  tape.backward(loss);
  EXPECT_EQ(std::vector<double>(x.grad().begin(), x.grad().end()), (std::vector<double>{1, 0, 1, 0}));
  EXPECT_EQ(kind_of([] { ops::maxpool1d(Tensor({2, 1}), 3); }), ErrorKind::Pooling);
}

TEST(Dropout, Modes) {
  Rng rng(1);
  Tensor x({100}, 2.0);
  EXPECT_EQ(vals(ops::dropout(x, 0.0, true, rng)), vals(x));
  EXPECT_EQ(vals(ops::dropout(x, 0.5, false, rng)), vals(x));
  EXPECT_EQ(kind_of([&] { ops::dropout(x, 1.0, true, rng); }), ErrorKind::Config);
  EXPECT_EQ(kind_of([&] { ops::dropout(x, -0.1, true, rng); }), ErrorKind::Config);
  Tensor big({100000}, 1.0);
  auto d = ops::dropout(big, 0.5, true, rng);
  std::size_t alive = 0;
  for (double v : d.values()) {
    if (v != 0) {
      ++alive;
      EXPECT_EQ(v, 2.0);
    }
  }
  EXPECT_NEAR(static_cast<double>(alive) / 1e5, 0.5, 0.01);
}

TEST(Dropout, ExpectationMatchesEval) {
  Rng rng(2);
  Tensor x = random_tensor({20}, rng);
  std::vector<double> mean(20, 0.0);
  const int masks = 10000;
  for (int m = 0; m < masks; ++m) {
    auto d = ops::dropout(x, 0.3, true, rng);
    for (std::size_t i = 0; i < 20; ++i) mean[i] += d[i] / masks;
  }
  for (std::size_t i = 0; i < 20; ++i) EXPECT_NEAR(mean[i], x[i], 0.01 * std::max(1.0, std::abs(x[i])) * 3);
}

TEST(Loss, CrossEntropyValues) {
  auto t = ops::one_hot(std::vector<std::size_t>{0, 2}, 4);
  EXPECT_NEAR(ops::cross_entropy(Tensor({2, 4}, 0.0), t).item(), std::log(4.0), 1e-12);
  auto near0 = ops::cross_entropy(Tensor::matrix(1, 4, {10, -10, -10, -10}), ops::one_hot(std::vector<std::size_t>{0}, 4));
  EXPECT_LT(near0.item(), 1e-8);
  EXPECT_GT(near0.item(), 0.0);
  EXPECT_EQ(kind_of([] { ops::cross_entropy(Tensor({1, 4}), Tensor::matrix(1, 4, {1, 1, 0, 0})); }), ErrorKind::Label);
}

TEST(Loss, MarginLossValues) {
  auto t = ops::one_hot(std::vector<std::size_t>{0}, 4);
  EXPECT_EQ(ops::margin_loss(Tensor::matrix(1, 4, {0.9, 0.1, 0.1, 0.1}), t).item(), 0.0);
  EXPECT_NEAR(ops::margin_loss(Tensor::matrix(1, 4, {0.0, 0.1, 0.1, 0.1}), t).item(), 0.64, 1e-15);
  Rng rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> norms(8);
    for (auto& v : norms) v = u(rng);
    std::vector<std::size_t> labels{static_cast<std::size_t>(trial % 4), static_cast<std::size_t>((trial / 4) % 4)};
    double expect = 0;
    for (std::size_t i = 0; i < 2; ++i) {
      for (std::size_t k = 0; k < 4; ++k) {
        const double n = norms[i * 4 + k];
        if (k == labels[i]) expect += std::pow(std::max(0.0, 0.8 - n), 2);
        else expect += 0.5 * std::pow(std::max(0.0, n - 0.2), 2);
      }
    }
    EXPECT_NEAR(ops::margin_loss(Tensor({2, 4}, norms), ops::one_hot(labels, 4)).item(), expect / 2, 1e-14);
  }
}

TEST(Gradients, MatmulTight) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    Tensor a = random_tensor({3, 4}, rng), b = random_tensor({4, 2}, rng);
    auto rep = check_gradients([&] { return ops::matmul(a, b); }, {a, b}, seed);
    EXPECT_LE(rep.max_rel_error, 1e-6) << "seed " << seed;
  }
}

TEST(Gradients, EveryOp) {
  const auto cases = sforge::testing::op_cases();
  for (const auto& c : cases) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      Rng rng(seed * 31 + 7);
      std::vector<Tensor> inputs;
      for (const auto& s : c.shapes) inputs.push_back(random_tensor(s, rng));
      auto rep = check_gradients([&] { return c.f(inputs); }, inputs, seed);
      EXPECT_LE(rep.max_rel_error, 1e-4) << c.name << " seed " << seed;
    }
  }
}

TEST(Gradients, AccumulationIsLinear) {
  Rng rng(9);
  Tensor x = random_tensor({3, 3}, rng);
  x.set_requires_grad();
  auto grad_of = [&](const std::function<Tensor()>& f) {
    x.zero_grad();
    Tape tape;
    Tensor loss;
    {
      Tape::Scope s(tape);
      loss = f();
    }
    tape.backward(loss);
    return std::vector<double>(x.grad().begin(), x.grad().end());
  };
  auto gf = grad_of([&] { return ops::sum(ops::tanh(x)); });
  auto gg = grad_of([&] { return ops::sum(ops::square(x)); });
  auto gs = grad_of([&] { return ops::add(ops::sum(ops::tanh(x)), ops::sum(ops::square(x))); });
  for (std::size_t i = 0; i < gs.size(); ++i) EXPECT_NEAR(gs[i], gf[i] + gg[i], 1e-14);
}

TEST(Optimizer, SgdStep) {
  Tensor w = Tensor::scalar(1.0);
  w.set_requires_grad();
  w.grad()[0] = 2.0 * w[0];
  OptimizerState st(OptimizerConfig::sgd(0.1));
  std::vector<Tensor> ps{w};
  optimizer_step(st, ps);
  EXPECT_DOUBLE_EQ(w[0], 0.8);
}

TEST(Optimizer, ZeroGradientLeavesParameters) {
  for (auto cfg : {OptimizerConfig::sgd(0.1), OptimizerConfig::adam(0.01), OptimizerConfig::adadelta(0.95)}) {
    Tensor w({3}, std::vector<double>{1, -2, 3});
    w.set_requires_grad();
    OptimizerState st(cfg);
    std::vector<Tensor> ps{w};
    for (int i = 0; i < 3; ++i) optimizer_step(st, ps);
    EXPECT_EQ(vals(w), (std::vector<double>{1, -2, 3})) << to_string(cfg.kind);
  }
}

TEST(Optimizer, MissingGradientIsTrainingError) {
  Tensor w({2}, 1.0);
  OptimizerState st(OptimizerConfig::adam());
  std::vector<Tensor> ps{w};
  EXPECT_EQ(kind_of([&] { optimizer_step(st, ps); }), ErrorKind::Training);
}

TEST(Optimizer, AdamConvergesOnBowl) {
  Tensor w({2}, std::vector<double>{3.0, -2.0});
  w.set_requires_grad();
  OptimizerState st(OptimizerConfig::adam(0.05));
  std::vector<Tensor> ps{w};
  for (int step = 0; step < 500; ++step) {
    w.grad()[0] = 2 * (w[0] - 1.0);
    w.grad()[1] = 2 * (w[1] + 0.5);
    optimizer_step(st, ps);
  }
  EXPECT_NEAR(w[0], 1.0, 1e-3);
  EXPECT_NEAR(w[1], -0.5, 1e-3);
}

TEST(Optimizer, AdadeltaDescends) {
  Tensor w = Tensor::scalar(2.0);
  w.set_requires_grad();
  OptimizerState st(OptimizerConfig::adadelta(0.95));
  std::vector<Tensor> ps{w};
  for (int step = 0; step < 50; ++step) {
    w.grad()[0] = 2 * w[0];
    optimizer_step(st, ps);
  }
  EXPECT_LT(std::abs(w[0]), 2.0);
}

TEST(Init, HeMoments) {
  Rng rng(5);
  auto t = he_init({100000}, 100, rng);
  double m = 0, v = 0;
  for (double x : t.values()) m += x / 1e5;
  for (double x : t.values()) v += (x - m) * (x - m) / 1e5;
  EXPECT_NEAR(std::sqrt(v), std::sqrt(2.0 / 100), 0.01);
  Rng a(11), b(11);
  EXPECT_EQ(vals(he_init({4, 4}, 2, a)), vals(he_init({4, 4}, 2, b)));
  EXPECT_EQ(kind_of([&] { he_init({2}, 0, rng); }), ErrorKind::Config);
}

TEST(Regularize, EarlyStop) {
  std::vector<double> a{1.0, 0.9, 0.8}, b{1.0, 0.9, 0.91, 0.92}, c{1.0, 1.1};
  EXPECT_EQ(early_stop_check(a, 2), EarlyStop::Continue);
  EXPECT_EQ(early_stop_check(b, 2), EarlyStop::Stop);
  EXPECT_EQ(early_stop_check(c, 0), EarlyStop::Stop);
  EXPECT_EQ(early_stop_check(a, 0), EarlyStop::Continue);
}

TEST(Regularize, L2ShrinksWeights) {
  auto final_norm = [](double l2) {
    Rng rng(21);
    Tensor w = random_tensor({6}, rng);
    w.set_requires_grad();
    Tensor target = random_tensor({6}, rng);
    OptimizerState st(OptimizerConfig::sgd(0.05));
    std::vector<Tensor> ps{w};
    for (int epoch = 0; epoch < 50; ++epoch) {
      w.zero_grad();
      Tape tape;
      Tensor loss;
      {
        Tape::Scope s(tape);
        loss = ops::sum(ops::square(ops::sub(w, target)));
      }
      tape.backward(loss);
      apply_weight_penalty(ps, 0.0, l2);
      optimizer_step(st, ps);
    }
    double n = 0;
    for (double v : w.values()) n += v * v;
    return std::sqrt(n);
  };
  EXPECT_LT(final_norm(0.1), final_norm(0.0));
}

TEST(Regularize, PenaltyValueAndGradient) {
  Tensor w({2}, std::vector<double>{2.0, -1.0});
  w.set_requires_grad();
  std::vector<Tensor> ps{w};
  EXPECT_DOUBLE_EQ(apply_weight_penalty(ps, 0.1, 0.01), 0.1 * 3 + 0.01 * 5);
  EXPECT_DOUBLE_EQ(w.grad()[0], 0.1 + 0.04);
  EXPECT_DOUBLE_EQ(w.grad()[1], -0.1 - 0.02);
}

TEST(Checkpoint, RoundTrip) {
  Rng rng(8);
  Checkpoint ck;
  Tensor a = random_tensor({3, 2}, rng);
  ck.put_text("spec", "name = lstm\nhidden = 3\n");
  ck.put_tensor("param/a", a);
  OptimizerState st(OptimizerConfig::adam(0.002, 0.1));
  st.attach(std::vector<Tensor>{a});
  st.slots[0].first[1] = 0.25;
  st.step_count = 7;
  store_optimizer(ck, st);
  std::stringstream buf;
  ck.write(buf);
  EXPECT_EQ(buf.str().rfind("SFORGE1\n", 0), 0u);
  auto back = Checkpoint::read(buf);
  EXPECT_EQ(back.text("spec"), "name = lstm\nhidden = 3\n");
  EXPECT_EQ(vals(back.tensor("param/a")), vals(a));
  auto st2 = load_optimizer(back);
  EXPECT_EQ(st2.step_count, 7);
  EXPECT_EQ(st2.config.kind, OptimizerKind::Adam);
  EXPECT_DOUBLE_EQ(st2.config.learning_rate, 0.002);
  EXPECT_EQ(st2.slots[0].first[1], 0.25);
}

TEST(Checkpoint, PutReplaces) {
  Checkpoint ck;
  ck.put_text("spec", "a");
  ck.put_text("spec", "b");
  ck.put_tensor("w", Tensor({2}, 1.0));
  ck.put_tensor("w", Tensor({3}, 2.0));
  EXPECT_EQ(ck.text("spec"), "b");
  EXPECT_EQ(ck.tensor("w").size(), 3u);
  EXPECT_EQ(ck.tensors().size(), 1u);
}

TEST(Checkpoint, CorruptInputIsParseError) {
  std::stringstream bad("NOTMAGIC\n");
  EXPECT_EQ(kind_of([&] { Checkpoint::read(bad); }), ErrorKind::Parse);
  Checkpoint ck;
  ck.put_tensor("x", Tensor({4}, 1.0));
  std::stringstream buf;
  ck.write(buf);
  std::string s = buf.str();
  std::stringstream cut(s.substr(0, s.size() - 12));
  EXPECT_EQ(kind_of([&] { Checkpoint::read(cut); }), ErrorKind::Parse);
}
