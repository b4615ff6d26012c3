#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "c2f/data.hpp"
#include "c2f/nn.hpp"

namespace c2f {

/// Small frozen classifier that ranks classes per input; its top-k
/// predictions define the class groups used as multi-positive targets
/// during feature training.
struct GrouperConfig {
  int in_channels = 3;
  int height = 32;
  int width = 32;
  int num_classes = 8;
  int conv1_channels = 8;
  int conv2_channels = 16;
  int batch = 16;
  double lr = 0.01;
  double momentum = 0.9;
  /// Probability that a pretraining draw lands inside the signature
  /// window rather than anywhere in the video.
  double window_bias = 0.75;
};

class GrouperModel {
 public:
  GrouperModel() = default;
  static GrouperModel create(const GrouperConfig& cfg, Rng& rng);

  Tensor logits(const Tensor& frame) const;
  /// Softmax class probabilities, forward only (never recorded).
  std::vector<double> probabilities(const Tensor& frame) const;

  void freeze();
  bool frozen() const { return frozen_; }
  nn::NamedParams named_params() const;
  const GrouperConfig& config() const { return cfg_; }

 private:
  GrouperConfig cfg_;
  nn::ConvParams conv1_, conv2_;
  nn::FcParams head_;
  bool frozen_ = false;
};

/// The adaptive class groups for one input, coarsest first. Each group is
/// a sorted set of class indices containing the ground-truth label.
struct ClassGroupSet {
  std::vector<std::vector<int>> groups;
};

enum class GroupInclusion {
  replace_lowest,  // swap the lowest-ranked member for the ground truth
  append,          // grow the group by one instead
};

/// Group sizes per granularity: the coarsest-to-finest tail of {5, 3, 1}
/// for `granularities` levels, each clamped to the class count.
std::vector<int> group_sizes_for(int granularities, int num_classes);

/// Top-k groups from a probability vector. Ties rank the lower class
/// index first. The ground truth is mandatorily included per
/// GroupInclusion.
ClassGroupSet form_groups_from_probs(std::span<const double> probs, int gt_label, std::span<const int> sizes,
                                     GroupInclusion inclusion);

/// Runs the frozen grouper on an input and forms its groups; rejects an
/// unfrozen grouper so groups stay stable across training.
ClassGroupSet form_groups(const GrouperModel& grouper, const Tensor& input, int gt_label,
                          std::span<const int> sizes, GroupInclusion inclusion);

struct GrouperPretrainResult {
  GrouperModel model;
  double train_accuracy = 0.0;
};

/// Trains a grouper on a stratified `fraction` of the training videos and
/// freezes it. Training accuracy on that fraction must clear twice chance.
GrouperPretrainResult pretrain_grouper(const data::Dataset& ds, int stream, double fraction, int iterations,
                                       std::uint64_t seed, const GrouperConfig& cfg);

}  // namespace c2f
