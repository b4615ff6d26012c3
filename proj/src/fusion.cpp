#include "c2f/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "c2f/c2f_net.hpp"

namespace c2f {

void FusionConfig::validate() const {
  if (feature_dim < 1) throw std::invalid_argument("fusion config: feature_dim must be positive");
  if (steps < 1) throw std::invalid_argument("fusion config: steps must be positive");
  if (fuse_channels < 1) throw std::invalid_argument("fusion config: fuse_channels must be positive");
  if (lstm_hidden < 1 || num_classes < 2) throw std::invalid_argument("fusion config: bad head dims");
}

AsyncFusionNet AsyncFusionNet::create(const FusionConfig& cfg, Rng& rng) {
  cfg.validate();
  AsyncFusionNet net;
  net.cfg_ = cfg;
  const int fuser_count = cfg.share_fusers ? 1 : cfg.steps;
  for (int t = 0; t < fuser_count; ++t) {
    net.fusers_.push_back(nn::ConvParams::create(cfg.fuse_channels, 2, 1, 1, 0, rng));
  }
  for (int t = 0; t < cfg.steps; ++t) {
    net.units_.push_back(nn::LstmUnitParams::create(cfg.fused_dim(), cfg.lstm_hidden, rng));
    net.heads_.push_back(nn::FcParams::create(cfg.num_classes, cfg.lstm_hidden, rng));
  }
  return net;
}

Tensor AsyncFusionNet::fuse(int t, const Tensor& anchor_feat, const Tensor& other_feat) const {
  if (t < 0 || t >= cfg_.steps) throw std::invalid_argument("fuse: step index out of range");
  if (anchor_feat.rank() != 1 || other_feat.rank() != 1 || anchor_feat.dim(0) != cfg_.feature_dim ||
      other_feat.dim(0) != cfg_.feature_dim) {
    throw std::invalid_argument("fuse: features must both be length-" + std::to_string(cfg_.feature_dim) +
                                " vectors, got " + shape_str(anchor_feat.shape()) + " and " +
                                shape_str(other_feat.shape()));
  }
  const int len = cfg_.feature_dim;
  Tensor stacked = ops::concat({ops::reshape(anchor_feat, {1, 1, len}), ops::reshape(other_feat, {1, 1, len})});
  const nn::ConvParams& fuser = fusers_[cfg_.share_fusers ? 0 : static_cast<std::size_t>(t)];
  return ops::flatten(nn::conv(fuser, stacked));
}

AsyncFusionNet::Result AsyncFusionNet::integrate(const std::vector<Tensor>& fused) const {
  if (static_cast<int>(fused.size()) != cfg_.steps) {
    throw std::invalid_argument("integrate: expected " + std::to_string(cfg_.steps) + " fused vectors, got " +
                                std::to_string(fused.size()));
  }
  Result r;
  nn::LstmState state;
  for (int t = 0; t < cfg_.steps; ++t) {
    state = (t == 0) ? nn::lstm_unit_start(units_[0], fused[0])
                     : nn::lstm_unit(units_[static_cast<std::size_t>(t)], fused[static_cast<std::size_t>(t)],
                                     state.h, state.c);
    r.unit_logits.push_back(nn::fc(heads_[static_cast<std::size_t>(t)], state.h));
  }
  if (cfg_.average_unit_heads) {
    Tensor acc = Tensor::zeros({cfg_.num_classes});
    for (const Tensor& logits : r.unit_logits) acc = ops::add(acc, ops::softmax(logits));
    r.prediction = ops::scale(acc, 1.0 / static_cast<double>(cfg_.steps));
  } else {
    r.prediction = ops::softmax(r.unit_logits.back());
  }
  return r;
}

nn::NamedParams AsyncFusionNet::named_params() const {
  nn::NamedParams out;
  for (std::size_t t = 0; t < fusers_.size(); ++t) {
    nn::append_params(out, "fuser" + std::to_string(t + 1), fusers_[t].named(""));
  }
  for (std::size_t t = 0; t < units_.size(); ++t) {
    const std::string u = "unit" + std::to_string(t + 1);
    nn::append_params(out, u + ".lstm", units_[t].named(""));
    nn::append_params(out, u + ".head", heads_[t].named(""));
  }
  return out;
}

Tensor async_fusion_loss(const std::vector<Tensor>& unit_logits, int gt_label, double gamma, int num_classes) {
  return sequence_prediction_loss(unit_logits, gt_label, gamma, num_classes);
}

std::vector<double> add_scores(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("add_scores: class counts differ");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

PeriodSpec make_period_spec(int anchor_time, int delta, int steps, int frames, AnchorAlignment alignment,
                            bool synchronous) {
  if (frames < 1) throw std::invalid_argument("make_period_spec: empty video");
  if (delta < 0) throw std::invalid_argument("make_period_spec: negative delta");
  auto clamp_t = [frames](int t) { return std::clamp(t, 0, frames - 1); };
  PeriodSpec spec;
  spec.anchor_time = clamp_t(anchor_time);
  for (int i = 0; i < steps; ++i) {
    int t = spec.anchor_time;
    if (!synchronous) {
      const int offset = (alignment == AnchorAlignment::center) ? (i - steps / 2) * delta : i * delta;
      t = spec.anchor_time + offset;
    }
    spec.sequence_times.push_back(clamp_t(t));
  }
  return spec;
}

std::vector<int> eval_anchor_positions(int frames, int delta, int steps, AnchorAlignment alignment, int count) {
  if (count < 1) throw std::invalid_argument("eval_anchor_positions: count must be positive");
  int lo = 0, hi = frames - 1;
  if (alignment == AnchorAlignment::center) {
    lo = (steps / 2) * delta;
    hi = frames - 1 - (steps - 1 - steps / 2) * delta;
  } else {
    hi = frames - 1 - (steps - 1) * delta;
  }
  if (lo > hi) {
    lo = 0;
    hi = frames - 1;
  }
  std::vector<int> anchors;
  if (count == 1) {
    anchors.push_back((lo + hi) / 2);
    return anchors;
  }
  for (int i = 0; i < count; ++i) {
    const double pos = lo + static_cast<double>(i) * (hi - lo) / static_cast<double>(count - 1);
    anchors.push_back(static_cast<int>(std::lround(pos)));
  }
  return anchors;
}

}  // namespace c2f
