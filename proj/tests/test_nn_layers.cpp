#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "c2f/checkpoint.hpp"
#include "c2f/nn.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace c2f;
using c2f::testing::full_gradcheck;
using c2f::testing::randn;

namespace {
std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}
}  // namespace

TEST_CASE("glorot init bounds and lstm forget bias") {
  Rng rng(2);
  Tensor w = nn::glorot_uniform({10, 20}, 20, 10, rng);
  const double bound = std::sqrt(6.0 / 30.0);
  for (double v : w.values()) CHECK(std::abs(v) <= bound);
  CHECK(w.requires_grad());

  nn::LstmUnitParams p = nn::LstmUnitParams::create(3, 4, rng);
  CHECK(p.weight.shape() == std::vector<int>{16, 7});
  for (int i = 0; i < 16; ++i) {
    const double expect = (i >= 4 && i < 8) ? 1.0 : 0.0;
    CHECK(p.bias.data()[i] == expect);
  }
}

TEST_CASE("lstm unit: zero parameters give a zero hidden state") {
  Rng rng(3);
  nn::LstmUnitParams p = nn::LstmUnitParams::create(3, 4, rng);
  for (double& v : p.weight.values()) v = 0.0;
  for (double& v : p.bias.values()) v = 0.0;
  nn::LstmState s = nn::lstm_unit_start(p, randn({3}, rng));
  for (double v : s.h.values()) CHECK(v == 0.0);
  for (double v : s.c.values()) CHECK(v == 0.0);
}

TEST_CASE("lstm unit: saturated gates reduce to h = tanh(tanh(x))") {
  Rng rng(4);
  nn::LstmUnitParams p = nn::LstmUnitParams::create(1, 1, rng);
  // Rows i, f, g, o over inputs [x; h_prev]. Saturate i/f/o at +10 and
  // pass x straight into the candidate gate.
  p.weight = Tensor::from_values({4, 2}, {0, 0, 0, 0, 1, 0, 0, 0});
  p.bias = Tensor::from_values({4}, {10, 10, 0, 10});
  for (double x : {-1.5, -0.3, 0.0, 0.7, 2.0}) {
    nn::LstmState s = nn::lstm_unit_start(p, Tensor::from_values({1}, {x}));
    CHECK(s.h.value() == doctest::Approx(std::tanh(std::tanh(x))).epsilon(5e-4));
  }
}

TEST_CASE("lstm unit rejects mismatched shapes") {
  Rng rng(5);
  nn::LstmUnitParams p = nn::LstmUnitParams::create(3, 4, rng);
  CHECK_THROWS_AS(nn::lstm_unit_start(p, randn({2}, rng)), std::invalid_argument);
  CHECK_THROWS_AS(nn::lstm_unit(p, randn({3}, rng), randn({5}, rng), randn({4}, rng)), std::invalid_argument);
}

TEST_CASE("lstm unit gradients match finite differences") {
  Rng rng(6);
  nn::LstmUnitParams p = nn::LstmUnitParams::create(3, 4, rng);
  Tensor x = randn({3}, rng);
  Tensor h0 = randn({4}, rng, 0.3);
  Tensor c0 = randn({4}, rng, 0.3);
  x.set_requires_grad(true);
  Tensor params[] = {p.weight, p.bias, x};
  const double err = full_gradcheck(
      [&]() {
        nn::LstmState s = nn::lstm_unit(p, x, h0, c0);
        return ops::sum(ops::hadamard(s.h, s.h));
      },
      params);
  CHECK(err < 1e-4);
}

TEST_CASE("lstm hidden state stays inside (-1, 1)") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    nn::LstmUnitParams p = nn::LstmUnitParams::create(6, 5, rng);
    for (double& v : p.weight.values()) v = 4.0 * rng.normal();
    nn::LstmState s = nn::lstm_unit(p, randn({6}, rng, 5.0), randn({5}, rng), randn({5}, rng, 3.0));
    for (double v : s.h.values()) {
      CHECK(v > -1.0);
      CHECK(v < 1.0);
    }
  }
}

TEST_CASE("upsample then 2x2 average restores the map") {
  Rng rng(8);
  Tensor x = randn({3, 5, 4}, rng);
  Tensor up = ops::upsample_nearest(x, 2);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < 5; ++y) {
      for (int ix = 0; ix < 4; ++ix) {
        double acc = 0.0;
        for (int fy = 0; fy < 2; ++fy) {
          for (int fx = 0; fx < 2; ++fx) {
            acc += up.data()[(c * 10 + 2 * y + fy) * 8 + 2 * ix + fx];
          }
        }
        CHECK(acc / 4.0 == doctest::Approx(x.data()[(c * 5 + y) * 4 + ix]).epsilon(1e-15));
      }
    }
  }
}

TEST_CASE("a step changes exactly the parameters with nonzero gradients") {
  Rng rng(9);
  nn::FcParams fc1 = nn::FcParams::create(4, 3, rng);
  nn::FcParams fc2 = nn::FcParams::create(2, 4, rng);
  nn::FcParams unused = nn::FcParams::create(2, 2, rng);
  Tensor x = randn({3}, rng);

  std::vector<Tensor> params{fc1.weight, fc1.bias, fc2.weight, fc2.bias, unused.weight, unused.bias};
  std::vector<Tensor> before;
  for (const Tensor& p : params) before.push_back(p.clone());

  nn::SgdMomentum opt(params, 0.9);
  Tape tape;
  {
    TapeScope scope(tape);
    Tensor loss = ops::sum(nn::fc(fc2, ops::relu(nn::fc(fc1, x))));
    tape.backward(loss);
  }
  opt.step(0.05);

  for (std::size_t i = 0; i < params.size(); ++i) {
    for (std::int64_t j = 0; j < params[i].size(); ++j) {
      const double g = params[i].has_grad() ? std::as_const(params[i]).grad()[j] : 0.0;
      const bool changed = params[i].data()[j] != before[i].data()[j];
      CHECK(changed == (g != 0.0));
    }
  }
}

TEST_CASE("checkpoint round-trip is byte-stable and validates strictly") {
  Rng rng(10);
  nn::FcParams fc = nn::FcParams::create(3, 5, rng);
  nn::LstmUnitParams lstm = nn::LstmUnitParams::create(2, 3, rng);
  nn::NamedParams params;
  nn::append_params(params, "fc", fc.named(""));
  nn::append_params(params, "lstm", lstm.named(""));

  const auto dir = std::filesystem::temp_directory_path() / "c2f_ckpt_test";
  std::filesystem::create_directories(dir);
  const auto p1 = dir / "a.ckpt";
  const auto p2 = dir / "b.ckpt";

  save_checkpoint(p1, 42, params);
  Checkpoint ck = read_checkpoint(p1);
  CHECK(ck.fingerprint == 42);
  CHECK(ck.records.size() == params.size());

  // Perturb, reload, and confirm values come back; then rewrite.
  fc.weight.data()[0] += 1.0;
  load_checkpoint(p1, 42, params);
  CHECK(fc.weight.data()[0] == ck.records[0].values[0]);
  save_checkpoint(p2, 42, params);
  CHECK(slurp(p1) == slurp(p2));

  CHECK_THROWS_AS(load_checkpoint(p1, 41, params), std::runtime_error);
  nn::NamedParams renamed = params;
  renamed[0].first = "other";
  CHECK_THROWS_AS(load_checkpoint(p1, 42, renamed), std::runtime_error);
  std::filesystem::remove_all(dir);
}
