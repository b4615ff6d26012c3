#include <cmath>
#include <vector>

#include "c2f/ops.hpp"
#include "c2f/rng.hpp"
#include "c2f/tape.hpp"
#include "c2f/tensor.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace c2f;
using c2f::testing::full_gradcheck;
using c2f::testing::randn;
using c2f::testing::randn_param;

namespace {
std::vector<double> vec(const Tensor& t) { return {t.data(), t.data() + t.size()}; }
}  // namespace

TEST_CASE("tensor basics") {
  Tensor t = Tensor::from_values({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.size() == 6);
  CHECK(t.dim(0) == 2);
  CHECK_THROWS_AS(Tensor::from_values({2, 2}, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(Tensor::zeros({0}), std::invalid_argument);
  CHECK_THROWS_AS(t.value(), std::invalid_argument);
  CHECK(Tensor::scalar(3.5).value() == 3.5);

  Tensor c = t.clone();
  CHECK_FALSE(c.same_storage(t));
  c.data()[0] = 99;
  CHECK(t.data()[0] == 1);
}

TEST_CASE("matmul identity and hand product") {
  Tensor eye = Tensor::from_values({2, 2}, {1, 0, 0, 1});
  Tensor m = Tensor::from_values({2, 2}, {1, 2, 3, 4});
  CHECK(vec(ops::matmul(eye, m)) == std::vector<double>{1, 2, 3, 4});

  Tensor a = Tensor::from_values({1, 2}, {1, 2});
  Tensor b = Tensor::from_values({2, 1}, {3, 4});
  Tensor p = ops::matmul(a, b);
  CHECK(p.value() == doctest::Approx(11.0).epsilon(1e-14));

  CHECK_THROWS_AS(ops::matmul(a, a), std::invalid_argument);
}

TEST_CASE("matmul gradient matches hand value and finite differences") {
  Tensor a = Tensor::from_values({1, 2}, {1, 1});
  Tensor b = Tensor::from_values({2, 1}, {2, 5});
  a.set_requires_grad(true);
  b.set_requires_grad(true);
  Tensor params[] = {a, b};
  const double err = full_gradcheck([&]() { return ops::sum(ops::matmul(a, b)); }, params);
  CHECK(err < 1e-4);
  CHECK(std::as_const(a).grad()[0] == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(std::as_const(a).grad()[1] == doctest::Approx(5.0).epsilon(1e-10));
}

TEST_CASE("conv2d identity kernel and channel-sum fusion") {
  Rng rng(11);
  Tensor in = randn({1, 4, 5}, rng);
  Tensor unit = Tensor::from_values({1, 1, 1, 1}, {1.0});
  Tensor zero_bias = Tensor::zeros({1});
  CHECK(vec(ops::conv2d(in, unit, zero_bias, 1, 0)) == vec(in));

  // Two-channel 1-D map fused by a 1x1 kernel with weights (1, 1).
  Tensor two = Tensor::from_values({2, 1, 3}, {1, 2, 3, 10, 20, 30});
  Tensor w = Tensor::from_values({1, 2, 1, 1}, {1, 1});
  Tensor fused = ops::conv2d(two, w, zero_bias, 1, 0);
  CHECK(vec(fused) == std::vector<double>{11, 22, 33});
}

TEST_CASE("conv2d hand-computed 3x3/2x2 case and shape errors") {
  Tensor in = Tensor::full({1, 3, 3}, 1.0);
  Tensor w = Tensor::full({1, 1, 2, 2}, 1.0);
  Tensor b = Tensor::zeros({1});
  Tensor out = ops::conv2d(in, w, b, 1, 0);
  CHECK(out.shape() == std::vector<int>{1, 2, 2});
  for (double v : out.values()) CHECK(v == doctest::Approx(4.0).epsilon(1e-14));

  Tensor big = Tensor::full({1, 1, 5, 5}, 1.0);
  CHECK_THROWS_AS(ops::conv2d(in, big, b, 1, 0), std::invalid_argument);  // kernel exceeds padded input
  CHECK_THROWS_AS(ops::conv2d(in, w, b, 0, 0), std::invalid_argument);
}

TEST_CASE("conv2d gradients match finite differences (padding and stride)") {
  Rng rng(5);
  for (int stride : {1, 2}) {
    for (int pad : {0, 1}) {
      Tensor in = randn_param({2, 5, 4}, rng);
      Tensor w = randn_param({3, 2, 3, 3}, rng, 0.5);
      Tensor b = randn_param({3}, rng, 0.1);
      Tensor params[] = {in, w, b};
      const double err = full_gradcheck(
          [&]() { return ops::sum(ops::hadamard(ops::conv2d(in, w, b, stride, pad),
                                                ops::conv2d(in, w, b, stride, pad))); },
          params);
      CAPTURE(stride);
      CAPTURE(pad);
      CHECK(err < 1e-4);
    }
  }
}

TEST_CASE("elementwise suite values") {
  Tensor x = Tensor::from_values({3}, {-1, 0, 2});
  CHECK(vec(ops::relu(x)) == std::vector<double>{0, 0, 2});
  CHECK(ops::sigmoid(Tensor::scalar(0.0)).value() == doctest::Approx(0.5).epsilon(1e-15));

  // d tanh at 0 is exactly 1.
  Tensor t = Tensor::scalar(0.0);
  t.set_requires_grad(true);
  Tape tape;
  {
    TapeScope scope(tape);
    Tensor y = ops::tanh(t);
    tape.backward(y);
  }
  CHECK(std::as_const(t).grad()[0] == doctest::Approx(1.0).epsilon(1e-14));

  CHECK_THROWS_AS(ops::add(Tensor::zeros({2}), Tensor::zeros({3})), std::invalid_argument);
  CHECK_THROWS_AS(ops::hadamard(Tensor::zeros({2, 2}), Tensor::zeros({4})), std::invalid_argument);
}

TEST_CASE("elementwise and reshape/concat/slice gradients match finite differences") {
  Rng rng(7);
  Tensor a = randn_param({4}, rng);
  Tensor b = randn_param({4}, rng);
  Tensor s = randn_param({}, rng);
  Tensor params[] = {a, b, s};
  const double err = full_gradcheck(
      [&]() {
        Tensor u = ops::add(ops::hadamard(a, b), s);
        Tensor v = ops::concat({ops::relu(u), ops::sigmoid(ops::scale(a, 0.7))});
        Tensor w = ops::slice0(v, 1, 5);
        Tensor y = ops::reshape(ops::tanh(w), {5, 1});
        return ops::sum(ops::hadamard(y, y));
      },
      params);
  CHECK(err < 1e-4);
}

TEST_CASE("softmax_cross_entropy values from scalar oracles") {
  Tensor uniform = Tensor::zeros({4});
  std::vector<int> t2{2};
  CHECK(ops::softmax_cross_entropy(uniform, t2, 1.0).value() ==
        doctest::Approx(std::log(4.0)).epsilon(1e-12));

  Tensor two = Tensor::zeros({2});
  std::vector<int> both{0, 1};
  CHECK(ops::softmax_cross_entropy(two, both, 1.0).value() ==
        doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));

  // Scalar oracle: -log p0 with logits (10, 0, 0) is log(1 + 2 e^-10).
  Tensor peaked = Tensor::from_values({3}, {10, 0, 0});
  std::vector<int> t0{0};
  const double oracle = std::log1p(2.0 * std::exp(-10.0));
  CHECK(ops::softmax_cross_entropy(peaked, t0, 1.0).value() == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(oracle == doctest::Approx(9.1e-5).epsilon(0.01));

  std::vector<int> empty;
  CHECK_THROWS_AS(ops::softmax_cross_entropy(uniform, empty, 1.0), std::invalid_argument);
  std::vector<int> dup{1, 1};
  CHECK_THROWS_AS(ops::softmax_cross_entropy(uniform, dup, 1.0), std::invalid_argument);
  std::vector<int> oob{4};
  CHECK_THROWS_AS(ops::softmax_cross_entropy(uniform, oob, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(ops::softmax_cross_entropy(uniform, t2, 0.0), std::invalid_argument);
}

TEST_CASE("softmax properties: positive, sums to one") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor logits = randn({7}, rng, 4.0);
    Tensor p = ops::softmax(logits);
    double s = 0.0;
    for (double v : p.values()) {
      CHECK(v > 0.0);
      s += v;
    }
    CHECK(std::abs(s - 1.0) <= 1e-12);
  }
}

TEST_CASE("backward: sum gives ones, half squared norm gives x") {
  Tensor x = Tensor::from_values({2, 2}, {1, -2, 3, 0.5});
  x.set_requires_grad(true);
  Tape tape;
  {
    TapeScope scope(tape);
    Tensor loss = ops::sum(x);
    tape.backward(loss);
  }
  for (double g : std::as_const(x).grad()) CHECK(g == 1.0);

  Tensor y = Tensor::from_values({2}, {3, -4});
  y.set_requires_grad(true);
  Tape tape2;
  {
    TapeScope scope(tape2);
    Tensor loss = ops::scale(ops::sum(ops::hadamard(y, y)), 0.5);
    tape2.backward(loss);
  }
  CHECK(std::as_const(y).grad()[0] == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(std::as_const(y).grad()[1] == doctest::Approx(-4.0).epsilon(1e-14));
}

TEST_CASE("backward rejects non-scalar and foreign losses") {
  Tensor x = Tensor::from_values({2}, {1, 2});
  x.set_requires_grad(true);
  Tape tape;
  TapeScope scope(tape);
  Tensor y = ops::scale(x, 2.0);
  CHECK_THROWS_AS(tape.backward(y), std::invalid_argument);
  CHECK_THROWS_AS(tape.backward(Tensor::scalar(1.0)), std::invalid_argument);
}

TEST_CASE("repeated backward accumulates into leaves; replay is bit-identical") {
  Rng rng(19);
  Tensor x = randn_param({6}, rng);
  Tape tape;
  Tensor loss;
  {
    TapeScope scope(tape);
    loss = ops::sum(ops::hadamard(ops::tanh(x), ops::sigmoid(x)));
  }
  tape.backward(loss);
  const std::vector<double> once(std::as_const(x).grad().begin(), std::as_const(x).grad().end());
  tape.backward(loss);
  for (std::size_t i = 0; i < once.size(); ++i) {
    CHECK(std::as_const(x).grad()[i] == doctest::Approx(2.0 * once[i]).epsilon(1e-15));
  }
  // From reset gradients, a replay reproduces the exact same bits.
  x.zero_grad();
  tape.backward(loss);
  for (std::size_t i = 0; i < once.size(); ++i) {
    CHECK(std::as_const(x).grad()[i] == once[i]);
  }
}

TEST_CASE("sgd with momentum: plain step, hand recurrence, zero gradient") {
  {
    std::vector<Tensor> p{Tensor::from_values({1}, {0})};
    std::vector<Tensor> g{Tensor::from_values({1}, {1})};
    std::vector<Tensor> v{Tensor::zeros({1})};
    ops::sgd_momentum_step(p, g, v, 0.1, 0.0);
    CHECK(p[0].value() == doctest::Approx(-0.1).epsilon(1e-15));
  }
  {
    std::vector<Tensor> p{Tensor::from_values({1}, {0})};
    std::vector<Tensor> g{Tensor::from_values({1}, {1})};
    std::vector<Tensor> v{Tensor::zeros({1})};
    ops::sgd_momentum_step(p, g, v, 0.1, 0.9);
    ops::sgd_momentum_step(p, g, v, 0.1, 0.9);
    CHECK(p[0].value() == doctest::Approx(-0.29).epsilon(1e-12));
  }
  {
    std::vector<Tensor> p{Tensor::from_values({2}, {1, 2})};
    std::vector<Tensor> g{Tensor::zeros({2})};
    std::vector<Tensor> v{Tensor::zeros({2})};
    ops::sgd_momentum_step(p, g, v, 0.1, 0.9);
    CHECK(vec(p[0]) == std::vector<double>{1, 2});
  }
  {
    std::vector<Tensor> p{Tensor::zeros({2})};
    std::vector<Tensor> g{Tensor::zeros({3})};
    std::vector<Tensor> v{Tensor::zeros({2})};
    CHECK_THROWS_AS(ops::sgd_momentum_step(p, g, v, 0.1, 0.9), std::invalid_argument);
    CHECK_THROWS_AS(ops::sgd_momentum_step(p, v, -1.0, 0.9), std::invalid_argument);
    CHECK_THROWS_AS(ops::sgd_momentum_step(p, v, 0.1, 1.0), std::invalid_argument);
  }
}

TEST_CASE("every primitive passes fd gradcheck over 20 seeds") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed * 7919 + 13);
    Tensor a = randn_param({3, 4}, rng);
    Tensor b = randn_param({4, 2}, rng);
    Tensor x = randn_param({2, 6, 6}, rng);
    Tensor w = randn_param({2, 2, 3, 3}, rng, 0.4);
    Tensor bias = randn_param({2}, rng, 0.2);
    Tensor v = randn_param({5}, rng);
    Tensor logits = randn_param({5}, rng, 2.0);
    std::vector<int> targets{0, 3};

    Tensor params[] = {a, b, x, w, bias, v, logits};
    const double err = full_gradcheck(
        [&]() {
          Tensor mm = ops::matmul(a, b);
          Tensor cv = ops::conv2d(x, w, bias, 1, 1);
          Tensor pooled = ops::maxpool2x2(cv);
          Tensor up = ops::upsample_nearest(pooled, 2);
          Tensor act = ops::add(ops::tanh(ops::flatten(up)),
                                ops::scale(ops::sigmoid(ops::flatten(ops::relu(cv))), 0.5));
          Tensor head = ops::softmax_cross_entropy(logits, targets, 0.7);
          Tensor probe = ops::sum(ops::hadamard(ops::softmax(v), v));
          return ops::add(ops::add(ops::sum(act), head), ops::add(probe, ops::sum(mm)));
        },
        params);
    CAPTURE(seed);
    CHECK(err < 1e-4);
  }
}

TEST_CASE("maxpool and upsample examples") {
  Tensor m = Tensor::from_values({1, 2, 2}, {1, 2, 3, 4});
  Tensor pooled = ops::maxpool2x2(m);
  CHECK(pooled.value() == 4.0);

  Tensor mm = m.clone();
  mm.set_requires_grad(true);
  Tape tape;
  {
    TapeScope scope(tape);
    Tensor loss = ops::sum(ops::maxpool2x2(mm));
    tape.backward(loss);
  }
  CHECK(vec(Tensor::from_values({4}, {std::as_const(mm).grad()[0], std::as_const(mm).grad()[1],
                                      std::as_const(mm).grad()[2], std::as_const(mm).grad()[3]})) ==
        std::vector<double>{0, 0, 0, 1});

  Tensor up1 = ops::upsample_nearest(m, 1);
  CHECK(vec(up1) == vec(m));
  Tensor up2 = ops::upsample_nearest(m, 2);
  CHECK(up2.shape() == std::vector<int>{1, 4, 4});
  CHECK(vec(up2) == std::vector<double>{1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4});
  CHECK_THROWS_AS(ops::upsample_nearest(m, 0), std::invalid_argument);
}

TEST_CASE("forward and backward stay finite on finite inputs") {
  Rng rng(23);
  Tensor x = randn_param({3, 8, 8}, rng, 3.0);
  Tensor w = randn_param({4, 3, 3, 3}, rng);
  Tensor b = randn_param({4}, rng);
  Tape tape;
  Tensor out, loss;
  {
    TapeScope scope(tape);
    out = ops::conv2d(x, w, b, 1, 1);
    loss = ops::sum(ops::sigmoid(out));
    tape.backward(loss);
  }
  CHECK(out.all_finite());
  CHECK(loss.all_finite());
  for (double g : std::as_const(w).grad()) CHECK(std::isfinite(g));
}

TEST_CASE("detach blocks gradient flow through the detached branch") {
  // loss = sum(detach(3x) ⊙ x): without the detach d/dx would be 6x,
  // with it only the plain-x factor carries gradient, so d/dx = 3x.
  Tensor x = Tensor::from_values({2}, {1, 2});
  x.set_requires_grad(true);
  Tape tape;
  Tensor loss;
  {
    TapeScope scope(tape);
    loss = ops::sum(ops::hadamard(ops::detach(ops::scale(x, 3.0)), x));
    tape.backward(loss);
  }
  CHECK(std::as_const(x).grad()[0] == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(std::as_const(x).grad()[1] == doctest::Approx(6.0).epsilon(1e-14));
}
