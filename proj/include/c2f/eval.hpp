#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "c2f/trainer.hpp"

namespace c2f {

struct EvalOptions {
  int periods_per_video = 12;
  int trace_videos = 4;  // videos whose per-period score vectors are kept
};

/// Evaluation outcome with everything needed to regenerate it.
struct EvalReport {
  double accuracy = 0.0;
  int correct = 0;
  int total = 0;
  std::vector<std::vector<int>> confusion;  // [ground truth][prediction]

  struct Trace {
    int video = 0;
    int label = 0;
    std::vector<std::vector<double>> period_scores;  // combined across models
  };
  std::vector<Trace> traces;

  std::uint64_t config_fingerprint = 0;
  std::vector<std::uint64_t> seeds;

  void save(const std::filesystem::path& path) const;
};

/// Frame-scored evaluation: softmax scores summed over uniformly spaced
/// frames and over the given per-stream models.
EvalReport evaluate_stream_models(const std::vector<const StreamModel*>& models, const data::Dataset& ds,
                                  const EvalOptions& opts);

/// Period-scored evaluation: per-period predictions summed over uniformly
/// spaced anchors and over the given anchor-direction models.
EvalReport evaluate_joint_models(const std::vector<const JointModel*>& models, const data::Dataset& ds,
                                 const ModelConfig& hp, int delta, bool synchronous, const EvalOptions& opts);

/// Per-cell outcome of the ablation grid.
struct CellResult {
  std::string mode;
  std::uint64_t seed = 0;
  double acc_stream1 = -1.0;   // -1 marks "not applicable"
  double acc_stream2 = -1.0;
  double acc_combined = -1.0;
};

struct AblateOptions {
  std::vector<std::string> modes;
  std::vector<std::uint64_t> seeds;
  ModelConfig model;
  TrainConfig train;
  EvalOptions eval;
  double grouper_fraction = 0.125;
  int grouper_iterations = 400;
  GrouperConfig grouper;  // geometry fields are filled from the dataset
  bool joint_both_directions = true;  // for the full joint mode
};

struct AblateResult {
  std::vector<CellResult> cells;
  std::vector<std::string> unknown_modes;
  std::string csv;
};

/// Trains and evaluates every known (mode, seed) cell, reusing finished
/// cells found under out_dir, and writes grid.csv there. Unknown mode
/// names are skipped and reported.
AblateResult run_ablation_grid(const data::Dataset& ds, const AblateOptions& opts,
                               const std::filesystem::path& out_dir);

/// The fixed grid CSV schema: one data row per cell, then mean/std rows
/// per mode. Not-applicable entries are empty.
std::string grid_csv(const std::vector<CellResult>& cells, const std::vector<std::string>& mode_order,
                     const std::vector<std::uint64_t>& seed_order);

}  // namespace c2f
