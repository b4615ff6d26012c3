#include <cmath>
#include <vector>

#include "c2f/c2f_net.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace c2f;
using c2f::testing::full_gradcheck;
using c2f::testing::randn;

namespace {

// Independent scalar re-computation of the group-guided loss: explicit
// softmax, explicit double loop over granularities and group members.
double group_loss_oracle(const std::vector<std::vector<double>>& logits, const std::vector<std::vector<int>>& groups,
                         const std::vector<double>& alpha, int n_classes) {
  double total = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    double m = logits[k][0];
    for (double v : logits[k]) m = std::max(m, v);
    double z = 0.0;
    for (double v : logits[k]) z += std::exp(v - m);
    for (int n : groups[k]) total -= alpha[k] * (logits[k][static_cast<std::size_t>(n)] - m - std::log(z));
  }
  return total / n_classes;
}

// Independent re-computation of the chain-prediction loss.
double chain_loss_oracle(const std::vector<std::vector<double>>& logits, int gt, double coef, int n_classes) {
  double total = 0.0;
  for (const auto& l : logits) {
    double m = l[0];
    for (double v : l) m = std::max(m, v);
    double z = 0.0;
    for (double v : l) z += std::exp(v - m);
    total -= l[static_cast<std::size_t>(gt)] - m - std::log(z);
  }
  return coef * total / n_classes;
}

C2fConfig tiny_config() {
  C2fConfig cfg;
  cfg.in_channels = 2;
  cfg.height = 8;
  cfg.width = 8;
  cfg.stage_channels = {3, 4};
  cfg.side_stages = {1, 2};
  cfg.granularities = 3;
  cfg.feature_dim = 5;
  cfg.head_hidden = 5;
  cfg.lstm_hidden = 4;
  cfg.num_classes = 4;
  return cfg;
}

void zero_params(const nn::NamedParams& params) {
  for (const auto& [name, t] : params) {
    Tensor tt = t;
    for (double& v : tt.values()) v = 0.0;
  }
}

}  // namespace

TEST_CASE("config validation rejects inconsistent side stages") {
  C2fConfig cfg = tiny_config();
  cfg.side_stages = {2, 1};
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = tiny_config();
  cfg.side_stages = {3};
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = tiny_config();
  cfg.height = 10;  // not divisible by 2^(stages-1)... still divisible by 2; make it odd instead
  cfg.height = 9;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = tiny_config();
  cfg.granularities = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("three granularities from three side stages, sized by the shallowest") {
  Rng rng(1);
  C2fConfig cfg;
  cfg.in_channels = 2;
  cfg.height = 16;
  cfg.width = 16;
  cfg.stage_channels = {3, 4, 4};
  cfg.side_stages = {1, 2, 3};
  cfg.granularities = 3;
  cfg.feature_dim = 6;
  cfg.head_hidden = 6;
  cfg.lstm_hidden = 5;
  cfg.num_classes = 4;
  C2fModel model = C2fModel::create(cfg, rng);
  GranularityFeatures f = model.extract_features(randn({2, 16, 16}, rng));
  CHECK(f.x.size() == 3);
  for (const Tensor& x : f.x) {
    CHECK(x.shape() == std::vector<int>{6});
    CHECK(x.all_finite());
  }
}

TEST_CASE("zero parameters propagate to zero features and zero final feature") {
  Rng rng(2);
  C2fModel model = C2fModel::create(tiny_config(), rng);
  zero_params(model.named_params());
  GranularityFeatures f = model.extract_features(randn({2, 8, 8}, rng));
  for (const Tensor& x : f.x) {
    for (double v : x.values()) CHECK(v == 0.0);
  }
  IntegrationResult r = model.integrate(f);
  for (double v : r.final_feature.values()) CHECK(v == 0.0);
}

TEST_CASE("group loss: uniform-head oracle value") {
  // N=4, uniform heads, group sizes (4,3,1), alpha (0.1,0.1,1):
  // (1/4)(0.1*4 + 0.1*3 + 1) log 4 = 0.425 log 4.
  const double expect = 0.425 * std::log(4.0);
  CHECK(expect == doctest::Approx(0.5891751034759535).epsilon(1e-12));

  std::vector<Tensor> logits{Tensor::zeros({4}), Tensor::zeros({4}), Tensor::zeros({4})};
  ClassGroupSet groups{{{0, 1, 2, 3}, {0, 1, 2}, {0}}};
  const std::vector<double> alpha{0.1, 0.1, 1.0};
  Tensor loss = granularity_group_loss(logits, groups, alpha, 4);
  CHECK(std::abs(loss.value() - expect) <= 1e-10);
}

TEST_CASE("group loss matches the scalar oracle on random logits") {
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<Tensor> logits;
    std::vector<std::vector<double>> raw;
    for (int k = 0; k < 3; ++k) {
      Tensor l = randn({6}, rng, 2.0);
      raw.push_back({l.data(), l.data() + l.size()});
      logits.push_back(l);
    }
    ClassGroupSet groups{{{0, 2, 3, 4, 5}, {1, 2, 5}, {2}}};
    const std::vector<double> alpha{0.1, 0.1, 1.0};
    Tensor loss = granularity_group_loss(logits, groups, alpha, 6);
    const double oracle = group_loss_oracle(raw, groups.groups, alpha, 6);
    CHECK(std::abs(loss.value() - oracle) <= 1e-10);
  }
}

TEST_CASE("group loss: degenerate weights reduce to plain cross-entropy over N") {
  Rng rng(6);
  Tensor l3 = randn({5}, rng, 2.0);
  std::vector<Tensor> logits{randn({5}, rng), randn({5}, rng), l3};
  ClassGroupSet groups{{{0, 1, 2}, {1, 3}, {2}}};
  const std::vector<double> alpha{0.0, 0.0, 1.0};
  Tensor loss = granularity_group_loss(logits, groups, alpha, 5);
  std::vector<int> gt{2};
  Tensor ce = ops::softmax_cross_entropy(l3, gt, 1.0);
  CHECK(loss.value() == doctest::Approx(ce.value() / 5.0).epsilon(1e-12));

  // Doubling the finest weight doubles that summand exactly.
  const std::vector<double> alpha2{0.0, 0.0, 2.0};
  Tensor loss2 = granularity_group_loss(logits, groups, alpha2, 5);
  CHECK(loss2.value() == doctest::Approx(2.0 * loss.value()).epsilon(1e-12));
}

TEST_CASE("group loss rejects empty groups and mismatched counts") {
  std::vector<Tensor> logits{Tensor::zeros({4}), Tensor::zeros({4}), Tensor::zeros({4})};
  ClassGroupSet bad{{{0, 1}, {}, {2}}};
  const std::vector<double> alpha{0.1, 0.1, 1.0};
  CHECK_THROWS_AS(granularity_group_loss(logits, bad, alpha, 4), std::invalid_argument);
  ClassGroupSet two{{{0}, {1}}};
  CHECK_THROWS_AS(granularity_group_loss(logits, two, alpha, 4), std::invalid_argument);
}

TEST_CASE("no-coarseness identity: shared logits collapse to a scaled single term") {
  Rng rng(7);
  Tensor shared = randn({4}, rng, 1.5);
  std::vector<Tensor> logits{shared, shared, shared};
  ClassGroupSet groups{{{1}, {1}, {1}}};
  const std::vector<double> alpha{0.1, 0.1, 1.0};
  Tensor loss = granularity_group_loss(logits, groups, alpha, 4);
  std::vector<int> gt{1};
  const double single = ops::softmax_cross_entropy(shared, gt, 1.0).value();
  CHECK(loss.value() == doctest::Approx((0.1 + 0.1 + 1.0) / 4.0 * single).epsilon(1e-12));
}

TEST_CASE("chain loss: uniform-head oracle, zero coefficient, perfect heads") {
  std::vector<Tensor> logits{Tensor::zeros({4}), Tensor::zeros({4}), Tensor::zeros({4})};
  Tensor loss = sequence_prediction_loss(logits, 0, 2.0, 4);
  CHECK(std::abs(loss.value() - 2.0794415416798357) <= 1e-10);  // (2/4) * 3 log 4

  CHECK(sequence_prediction_loss(logits, 0, 0.0, 4).value() == 0.0);

  std::vector<Tensor> confident;
  for (int t = 0; t < 3; ++t) {
    Tensor l = Tensor::zeros({4});
    l.data()[1] = 20.0;
    confident.push_back(l);
  }
  CHECK(sequence_prediction_loss(confident, 1, 2.0, 4).value() < 1e-7);
  CHECK(sequence_prediction_loss(confident, 1, 2.0, 4).value() > 0.0);

  CHECK_THROWS_AS(sequence_prediction_loss(logits, 4, 2.0, 4), std::invalid_argument);
}

TEST_CASE("chain loss matches the scalar oracle on random logits") {
  Rng rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<Tensor> logits;
    std::vector<std::vector<double>> raw;
    for (int t = 0; t < 3; ++t) {
      Tensor l = randn({5}, rng, 3.0);
      raw.push_back({l.data(), l.data() + l.size()});
      logits.push_back(l);
    }
    Tensor loss = sequence_prediction_loss(logits, 3, 2.0, 5);
    CHECK(std::abs(loss.value() - chain_loss_oracle(raw, 3, 2.0, 5)) <= 1e-10);
  }
}

TEST_CASE("combined loss is the exact sum of its parts") {
  Tensor lv = Tensor::scalar(0.5891751034759535);
  Tensor ll = Tensor::scalar(2.0794415416798357);
  CHECK(std::abs(c2f_total_loss(lv, ll).value() - 2.668616645155789) <= 1e-10);
}

TEST_CASE("integration is order sensitive and chains gradients to the first unit") {
  Rng rng(9);
  C2fModel model = C2fModel::create(tiny_config(), rng);
  GranularityFeatures f;
  for (int k = 0; k < 3; ++k) f.x.push_back(randn({5}, rng));
  GranularityFeatures swapped;
  swapped.x = {f.x[2], f.x[1], f.x[0]};

  Tensor h1 = model.integrate(f).final_feature;
  Tensor h2 = model.integrate(swapped).final_feature;
  bool differs = false;
  for (std::int64_t i = 0; i < h1.size(); ++i) differs = differs || std::abs(h1.data()[i] - h2.data()[i]) > 1e-9;
  CHECK(differs);

  // Gradient reaches the first unit's weights through the whole chain.
  nn::NamedParams params = model.named_params();
  Tape tape;
  {
    TapeScope scope(tape);
    Tensor loss = ops::sum(model.integrate(f).final_feature);
    tape.backward(loss);
  }
  double unit1_norm = 0.0;
  for (const auto& [name, t] : params) {
    if (name.find("g1.lstm") == 0 && t.has_grad()) {
      for (double g : std::as_const(t).grad()) unit1_norm += std::abs(g);
    }
  }
  CHECK(unit1_norm > 0.0);
}

TEST_CASE("backbone gradients through a granularity feature match finite differences") {
  Rng rng(10);
  C2fConfig cfg = tiny_config();
  C2fModel model = C2fModel::create(cfg, rng);
  Tensor input = randn({2, 8, 8}, rng);

  std::vector<Tensor> params = nn::param_tensors(model.named_params());
  const double err = full_gradcheck(
      [&]() {
        GranularityFeatures f = model.extract_features(input);
        return ops::sum(ops::hadamard(f.x[1], f.x[1]));
      },
      params);
  CHECK(err < 1e-4);
}

TEST_CASE("standalone prediction: simplex output, argmax equals logits argmax, uniform at zero") {
  Rng rng(11);
  C2fModel model = C2fModel::create(tiny_config(), rng);
  Tensor input = randn({2, 8, 8}, rng);
  Tensor p = model.predict(input);
  double s = 0.0;
  int argmax_p = 0;
  for (int i = 0; i < p.dim(0); ++i) {
    s += p.data()[i];
    if (p.data()[i] > p.data()[argmax_p]) argmax_p = i;
  }
  CHECK(std::abs(s - 1.0) <= 1e-12);

  Tensor logits = model.standalone_logits(model.integrate(model.extract_features(input)).final_feature);
  int argmax_l = 0;
  for (int i = 0; i < logits.dim(0); ++i) {
    if (logits.data()[i] > logits.data()[argmax_l]) argmax_l = i;
  }
  CHECK(argmax_p == argmax_l);

  zero_params(model.named_params());
  Tensor u = model.predict(input);
  for (double v : u.values()) CHECK(v == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("auxiliary heads receive gradient only from their own loss") {
  Rng rng(12);
  C2fModel model = C2fModel::create(tiny_config(), rng);
  Tensor input = randn({2, 8, 8}, rng);
  ClassGroupSet groups{{{0, 1, 2, 3}, {0, 1, 2}, {1}}};
  const std::vector<double> alpha{0.1, 0.1, 1.0};
  nn::NamedParams params = model.named_params();

  auto grad_norm = [&](const std::string& needle) {
    double norm = 0.0;
    for (const auto& [name, t] : params) {
      if (name.find(needle) != std::string::npos && t.has_grad()) {
        for (double g : std::as_const(t).grad()) norm += std::abs(g);
      }
    }
    return norm;
  };

  // Group loss only: unit heads and lstm params stay untouched.
  nn::zero_grads(nn::param_tensors(params));
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor loss = granularity_group_loss(model.granularity_logits(model.extract_features(input)), groups, alpha, 4);
    tape.backward(loss);
  }
  CHECK(grad_norm(".fc2.") > 0.0);
  CHECK(grad_norm(".fc3.") > 0.0);
  CHECK(grad_norm(".unit_head.") == 0.0);
  CHECK(grad_norm(".lstm.") == 0.0);

  // Chain loss only: fc2/fc3 stay untouched, unit heads train.
  nn::zero_grads(nn::param_tensors(params));
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor loss = sequence_prediction_loss(model.integrate(model.extract_features(input)).unit_logits, 1, 2.0, 4);
    tape.backward(loss);
  }
  CHECK(grad_norm(".fc2.") == 0.0);
  CHECK(grad_norm(".fc3.") == 0.0);
  CHECK(grad_norm(".unit_head.") > 0.0);
  CHECK(grad_norm(".lstm.") > 0.0);
}

TEST_CASE("two-granularity variant builds and trains with two units") {
  Rng rng(13);
  C2fConfig cfg = tiny_config();
  cfg.granularities = 2;
  C2fModel model = C2fModel::create(cfg, rng);
  Tensor input = randn({2, 8, 8}, rng);
  GranularityFeatures f = model.extract_features(input);
  CHECK(f.x.size() == 2);
  IntegrationResult r = model.integrate(f);
  CHECK(r.unit_logits.size() == 2);

  std::vector<Tensor> logits{Tensor::zeros({4}), Tensor::zeros({4})};
  Tensor loss = sequence_prediction_loss(logits, 0, 2.0, 4);
  CHECK(std::abs(loss.value() - 0.5 * 2.0 * std::log(4.0)) <= 1e-10);
}

TEST_CASE("baseline model: feature, head, prediction") {
  Rng rng(14);
  BaselineConfig cfg;
  cfg.in_channels = 2;
  cfg.height = 8;
  cfg.width = 8;
  cfg.stage_channels = {3, 4};
  cfg.feature_dim = 6;
  cfg.num_classes = 4;
  BaselineModel model = BaselineModel::create(cfg, rng);
  Tensor input = randn({2, 8, 8}, rng);
  Tensor feat = model.feature(input);
  CHECK(feat.shape() == std::vector<int>{6});
  Tensor p = model.predict(input);
  double s = 0.0;
  for (double v : p.values()) s += v;
  CHECK(std::abs(s - 1.0) <= 1e-12);

  std::vector<Tensor> params = nn::param_tensors(model.named_params());
  std::vector<int> gt{1};
  const double err = full_gradcheck(
      [&]() { return ops::softmax_cross_entropy(model.head_logits(model.feature(input)), gt, 1.0); }, params);
  CHECK(err < 1e-4);
}
