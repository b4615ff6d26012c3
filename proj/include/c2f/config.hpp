#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "c2f/eval.hpp"

namespace c2f {

/// Grouper pretraining settings (architecture fields of GrouperConfig are
/// derived from the dataset at use sites).
struct GrouperSettings {
  double fraction = 0.125;
  int iterations = 400;
  double lr = 0.01;
  double window_bias = 0.75;
  int conv1_channels = 8;
  int conv2_channels = 16;
  int batch = 16;
};

/// Everything one run needs, mirrored 1:1 by the JSON config file.
/// Unknown keys are rejected; missing keys keep their defaults.
struct FullConfig {
  data::SyntheticConfig data;
  ModelConfig model;
  GrouperSettings grouper;
  TrainConfig train;
  EvalOptions eval;
  std::string train_mode = "c2f-asyn5";
  std::string anchor_direction = "both";  // "s1" | "s2" | "both"
};

FullConfig default_config();
FullConfig load_config_file(const std::filesystem::path& path);
/// Applies a JSON document over the defaults.
FullConfig parse_config_json(const std::string& text);
std::string config_to_json_text(const FullConfig& cfg);

/// Fingerprint of everything that determines checkpoint compatibility:
/// the input geometry, the model section, and a role tag (mode plus
/// stream or anchor direction).
std::uint64_t arch_fingerprint(const FullConfig& cfg, const std::string& tag);

GrouperConfig make_grouper_config(const data::SyntheticConfig& d, const GrouperSettings& g);

}  // namespace c2f
