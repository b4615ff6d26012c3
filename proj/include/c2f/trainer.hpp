#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "c2f/c2f_net.hpp"
#include "c2f/data.hpp"
#include "c2f/fusion.hpp"
#include "c2f/grouper.hpp"

namespace c2f {

/// Experiment variants. Frame-scored modes train one classifier per
/// stream; fusion modes train a joint model over periods.
enum class Mode {
  baseline,                // backbone + single head, no grouping, no integrator
  c2f_no_grouping,         // coarse-to-fine trained without the group loss
  c2f_two_granularities,   // coarsest granularity removed (2-unit chain)
  c2f_no_coarseness,       // every group collapsed to the ground truth
  c2f_complete,            // full coarse-to-fine network
  baseline_syn,            // baseline features fused at the anchor time
  baseline_asyn1,          // baseline features, offsets spaced 1 apart
  baseline_asyn5,          // baseline features, offsets spaced 5 apart
  c2f_asyn5,               // full joint system (coarse-to-fine + fusion)
};

Mode parse_mode(const std::string& name);
std::string mode_name(Mode m);
const std::vector<std::string>& all_mode_names();

bool mode_uses_fusion(Mode m);
bool mode_uses_c2f(Mode m);
bool mode_synchronous(Mode m);
int mode_delta(Mode m, int config_delta);
int mode_granularities(Mode m);

enum class GroupingMode { adaptive, none, gt_only };
GroupingMode mode_grouping(Mode m);

/// Architecture and loss hyper-parameters shared across modes.
struct ModelConfig {
  std::vector<int> stage_channels = {8, 16, 16, 32, 32};
  std::vector<int> side_stages = {3, 4, 5};
  int feature_dim = 64;
  int head_hidden = 64;
  int lstm_hidden = 64;
  bool relu_after_fc1 = true;
  std::vector<double> alpha = {0.1, 0.1, 1.0};
  double beta = 2.0;
  double gamma = 2.0;
  int fuse_channels = 1;
  int fusion_lstm_hidden = 64;
  bool share_fusers = false;
  bool average_unit_heads = false;
  AnchorAlignment anchor_alignment = AnchorAlignment::center;
  GroupInclusion group_inclusion = GroupInclusion::replace_lowest;
};

struct TrainConfig {
  int batch_size = 16;
  double momentum = 0.9;
  double lr = 0.01;
  double lr_decay = 0.1;
  int decay_interval = 500;
  int max_iterations = 1200;
  int eval_interval = 0;  // 0 disables periodic held-out evaluation
  int eval_videos = 32;
  int eval_periods = 4;
  std::uint64_t seed = 1;
  int delta = 5;
  bool stop_fusion_gradient = false;
  void validate(std::size_t dataset_size) const;
};

/// Learning rate as a pure function of the 1-based iteration index.
double lr_at(const TrainConfig& cfg, int iteration);

/// Alpha weights for a reduced granularity count (the coarsest entries
/// are dropped first).
std::vector<double> alpha_for(const ModelConfig& hp, int granularities);

C2fConfig make_c2f_config(const data::SyntheticConfig& d, const ModelConfig& hp, int granularities);
BaselineConfig make_baseline_config(const data::SyntheticConfig& d, const ModelConfig& hp);
FusionConfig make_fusion_config(const data::SyntheticConfig& d, const ModelConfig& hp);

/// One stream's frame classifier (baseline or coarse-to-fine variant).
struct StreamModel {
  Mode mode = Mode::baseline;
  int stream = 1;
  std::optional<C2fModel> c2f;
  std::optional<BaselineModel> base;

  std::vector<double> class_scores(const Tensor& input) const;
  nn::NamedParams named_params() const;
};

/// One anchor direction of the fused system: a feature extractor per
/// stream plus the fusion head. The five sequence-stream passes all read
/// the single sequence-side parameter set.
struct JointModel {
  Mode mode = Mode::c2f_asyn5;
  int anchor_stream = 2;
  std::optional<C2fModel> seq_c2f, anchor_c2f;
  std::optional<BaselineModel> seq_base, anchor_base;
  AsyncFusionNet fusion;

  int sequence_stream() const { return anchor_stream == 2 ? 1 : 2; }
  nn::NamedParams named_params() const;
};

/// One training/evaluation unit: the anchor-stream input plus the
/// delta-spaced sequence-stream inputs, oldest first.
struct PeriodInputs {
  Tensor anchor;
  std::vector<Tensor> sequence;
  int label = 0;
};

struct JointLossBreakdown {
  Tensor total;
  double sequence_stream = 0.0;
  double anchor_stream = 0.0;
  double fusion = 0.0;
};

/// The joint objective for one period: the five weight-sharing
/// sequence-stream feature losses, the anchor-stream feature loss, and
/// the fusion loss, summed. `groups` carries one ClassGroupSet per
/// sequence input followed by one for the anchor (empty when the mode
/// does not use the group loss).
JointLossBreakdown joint_loss(const JointModel& model, const PeriodInputs& inputs,
                              const std::vector<ClassGroupSet>& groups, const ModelConfig& hp,
                              bool stop_fusion_gradient);

/// Forward-only per-period probability scores.
std::vector<double> joint_period_scores(const JointModel& model, const PeriodInputs& inputs);

/// Per-video memo of stream features so overlapping evaluation periods
/// do not recompute them.
class VideoFeatureCache {
 public:
  VideoFeatureCache(const JointModel& model, const data::Dataset& ds, int video);
  const Tensor& anchor_feature(int t);
  const Tensor& sequence_feature(int t);

 private:
  const JointModel& model_;
  const data::Dataset& ds_;
  int video_;
  std::map<int, Tensor> anchor_cache_, seq_cache_;
};

/// Cached variant of the per-period scores for repeated-period evaluation.
std::vector<double> joint_period_scores(const JointModel& model, VideoFeatureCache& cache, const PeriodSpec& spec);

/// Groupers by stream; entries may be null for modes without grouping.
struct GrouperPair {
  const GrouperModel* s1 = nullptr;
  const GrouperModel* s2 = nullptr;
  const GrouperModel* for_stream(int stream) const { return stream == 1 ? s1 : s2; }
};

PeriodInputs materialize_period(const data::Dataset& ds, int video, int anchor_stream, const PeriodSpec& spec);

/// Trains one stream's frame classifier. When `out_dir` is nonempty,
/// writes train_log.jsonl and model.ckpt there.
StreamModel train_stream_model(const data::Dataset& ds, int stream, Mode mode, const ModelConfig& hp,
                               const TrainConfig& cfg, const GrouperModel* grouper,
                               const std::filesystem::path& out_dir, std::uint64_t ckpt_fingerprint);

/// Trains one anchor direction of a fusion mode.
JointModel train_joint_model(const data::Dataset& ds, Mode mode, int anchor_stream, const ModelConfig& hp,
                             const TrainConfig& cfg, const GrouperPair& groupers,
                             const std::filesystem::path& out_dir, std::uint64_t ckpt_fingerprint);

}  // namespace c2f
