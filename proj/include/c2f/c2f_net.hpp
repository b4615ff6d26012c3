#pragma once

#include <span>
#include <vector>

#include "c2f/grouper.hpp"
#include "c2f/nn.hpp"

namespace c2f {

/// Geometry of the staged backbone and its side-output flows. Stages are
/// conv3x3 -> ReLU -> maxpool2x2; side outputs tap the post-ReLU conv map
/// of the listed stages through a 1x1 convolution that emits one map per
/// granularity. Side maps are upsampled to the shallowest side stage's
/// spatial size before grouping.
struct C2fConfig {
  int in_channels = 3;
  int height = 32;
  int width = 32;
  std::vector<int> stage_channels = {8, 16, 16, 32, 32};
  std::vector<int> side_stages = {3, 4, 5};  // 1-based
  int granularities = 3;                     // coarsest first
  int feature_dim = 64;                      // per-granularity feature size
  int head_hidden = 64;                      // auxiliary head hidden size
  int lstm_hidden = 64;
  int num_classes = 8;
  bool relu_after_fc1 = true;

  void validate() const;
  int num_stages() const { return static_cast<int>(stage_channels.size()); }
  /// Spatial edge length of the shallowest side stage (height direction).
  int common_side_height() const;
  int common_side_width() const;
};

/// Per-granularity feature vectors, coarsest first.
struct GranularityFeatures {
  std::vector<Tensor> x;
};

struct IntegrationResult {
  Tensor final_feature;             // hidden state of the last unit
  std::vector<Tensor> unit_logits;  // per-unit auxiliary head outputs
};

/// One stream's coarse-to-fine network: staged backbone, side-output
/// flows with per-granularity projections, auxiliary group heads, and the
/// granularity-ordered LSTM integrator.
class C2fModel {
 public:
  C2fModel() = default;
  static C2fModel create(const C2fConfig& cfg, Rng& rng);

  GranularityFeatures extract_features(const Tensor& input) const;
  /// Training-only group heads (FC2 -> ReLU -> FC3), one per granularity.
  std::vector<Tensor> granularity_logits(const GranularityFeatures& f) const;
  /// Chains the per-granularity LSTM units coarsest to finest.
  IntegrationResult integrate(const GranularityFeatures& f) const;
  Tensor standalone_logits(const Tensor& final_feature) const;
  /// Softmax prediction through the standalone head (no group guidance).
  Tensor predict(const Tensor& input) const;

  nn::NamedParams named_params() const;
  const C2fConfig& config() const { return cfg_; }

 private:
  C2fConfig cfg_;
  std::vector<nn::ConvParams> stages_;
  std::vector<nn::ConvParams> side_convs_;
  std::vector<nn::FcParams> fc1_;
  std::vector<nn::FcParams> fc2_;
  std::vector<nn::FcParams> fc3_;
  std::vector<nn::LstmUnitParams> lstm_units_;
  std::vector<nn::FcParams> unit_heads_;
  nn::FcParams standalone_head_;
};

/// Group-guided feature loss: -(1/N) sum_k alpha_k sum_{n in G_k} log p_k(n).
/// Zero-weighted granularities contribute exactly zero.
Tensor granularity_group_loss(const std::vector<Tensor>& granularity_logits, const ClassGroupSet& groups,
                              std::span<const double> alpha, int num_classes);

/// Chain-prediction loss shared by both integrators:
/// -(coef/N) sum_t log p_t(gt).
Tensor sequence_prediction_loss(const std::vector<Tensor>& unit_logits, int gt_label, double coef, int num_classes);

/// Combined coarse-to-fine loss: feature term plus integrator term.
Tensor c2f_total_loss(const Tensor& feature_loss, const Tensor& integration_loss);

/// Plain backbone + single feature head used by the baseline ablations:
/// no side flows, no grouping, no integrator.
struct BaselineConfig {
  int in_channels = 3;
  int height = 32;
  int width = 32;
  std::vector<int> stage_channels = {8, 16, 16, 32, 32};
  int feature_dim = 64;
  int num_classes = 8;
  bool relu_after_fc = true;
  void validate() const;
};

class BaselineModel {
 public:
  BaselineModel() = default;
  static BaselineModel create(const BaselineConfig& cfg, Rng& rng);
  Tensor feature(const Tensor& input) const;
  Tensor head_logits(const Tensor& feature) const;
  Tensor predict(const Tensor& input) const;
  nn::NamedParams named_params() const;
  const BaselineConfig& config() const { return cfg_; }

 private:
  BaselineConfig cfg_;
  std::vector<nn::ConvParams> stages_;
  nn::FcParams fc_feat_;
  nn::FcParams head_;
};

}  // namespace c2f
