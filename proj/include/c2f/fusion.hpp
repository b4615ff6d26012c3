#pragma once

#include <vector>

#include "c2f/nn.hpp"

namespace c2f {

/// The asynchronous two-stream fusion head: per-timestep 1x1 fusers over
/// stacked feature pairs, a chain of LSTM units, and a prediction head on
/// every unit.
struct FusionConfig {
  int feature_dim = 64;   // length of each per-stream feature vector
  int steps = 5;          // fusers and LSTM units
  int fuse_channels = 1;  // output channels of each 1x1 fuser
  int lstm_hidden = 64;
  int num_classes = 8;
  bool share_fusers = false;       // single fuser reused at every step
  bool average_unit_heads = false; // predict from all heads, not just the last
  void validate() const;
  int fused_dim() const { return feature_dim * fuse_channels; }
};

class AsyncFusionNet {
 public:
  AsyncFusionNet() = default;
  static AsyncFusionNet create(const FusionConfig& cfg, Rng& rng);

  /// Stacks the two feature vectors as a 2-channel length-H map and
  /// applies the step-t 1x1 fuser. With fuse_channels = 1 this reduces to
  /// fused[j] = w1*anchor[j] + w2*other[j] + b.
  Tensor fuse(int t, const Tensor& anchor_feat, const Tensor& other_feat) const;

  struct Result {
    std::vector<Tensor> unit_logits;
    Tensor prediction;  // probability vector for the period
  };
  /// Integrates exactly `steps` fused vectors in temporal order.
  Result integrate(const std::vector<Tensor>& fused) const;

  nn::NamedParams named_params() const;
  const FusionConfig& config() const { return cfg_; }

 private:
  FusionConfig cfg_;
  std::vector<nn::ConvParams> fusers_;
  std::vector<nn::LstmUnitParams> units_;
  std::vector<nn::FcParams> heads_;
};

/// Fusion training loss (the gamma-weighted chain-prediction loss).
Tensor async_fusion_loss(const std::vector<Tensor>& unit_logits, int gt_label, double gamma, int num_classes);

/// Element-wise sum of two per-period score vectors (the two-anchor-model
/// combination rule). Lengths must agree.
std::vector<double> add_scores(const std::vector<double>& a, const std::vector<double>& b);

/// How the five sequence-stream inputs sit around the anchor.
enum class AnchorAlignment { center, left };

/// Time indices for one period: the anchor plus `steps` sequence times
/// spaced `delta` apart (all equal to the anchor time when synchronous).
/// Out-of-range indices are clamped to the video.
struct PeriodSpec {
  int anchor_time = 0;
  std::vector<int> sequence_times;
};

PeriodSpec make_period_spec(int anchor_time, int delta, int steps, int frames, AnchorAlignment alignment,
                            bool synchronous);

/// Deterministic evaluation anchors: `count` positions uniformly spaced
/// over the range where the period window stays in bounds (falling back
/// to the full video when it cannot).
std::vector<int> eval_anchor_positions(int frames, int delta, int steps, AnchorAlignment alignment, int count);

}  // namespace c2f
