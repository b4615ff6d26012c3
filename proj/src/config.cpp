#include "c2f/config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "c2f/checkpoint.hpp"

namespace c2f {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& section) {
  for (const auto& [key, value] : j.items()) {
    if (!allowed.contains(key)) {
      throw std::invalid_argument("config: unknown key '" + key + "' in section '" + section + "'");
    }
  }
}

template <typename T>
void get_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void parse_data(const json& j, data::SyntheticConfig& d) {
  check_keys(j,
             {"num_classes", "videos_per_class", "frames", "channels", "height", "width", "lag", "signature_width",
              "signature_size", "signature_amplitude", "noise_sigma", "confusable_pairs", "train_fraction", "seed"},
             "data");
  get_if(j, "num_classes", d.num_classes);
  get_if(j, "videos_per_class", d.videos_per_class);
  get_if(j, "frames", d.frames);
  get_if(j, "channels", d.channels);
  get_if(j, "height", d.height);
  get_if(j, "width", d.width);
  get_if(j, "lag", d.lag);
  get_if(j, "signature_width", d.signature_width);
  get_if(j, "signature_size", d.signature_size);
  get_if(j, "signature_amplitude", d.signature_amplitude);
  get_if(j, "noise_sigma", d.noise_sigma);
  get_if(j, "train_fraction", d.train_fraction);
  get_if(j, "seed", d.seed);
  if (j.contains("confusable_pairs")) {
    d.confusable_pairs.clear();
    for (const auto& p : j.at("confusable_pairs")) {
      d.confusable_pairs.emplace_back(p.at(0).get<int>(), p.at(1).get<int>());
    }
  }
}

void parse_model(const json& j, ModelConfig& m) {
  check_keys(j,
             {"stage_channels", "side_stages", "feature_dim", "head_hidden", "lstm_hidden", "relu_after_fc1", "alpha",
              "beta", "gamma", "fuse_channels", "fusion_lstm_hidden", "share_fusers", "average_unit_heads",
              "anchor_alignment", "group_inclusion"},
             "model");
  get_if(j, "stage_channels", m.stage_channels);
  get_if(j, "side_stages", m.side_stages);
  get_if(j, "feature_dim", m.feature_dim);
  get_if(j, "head_hidden", m.head_hidden);
  get_if(j, "lstm_hidden", m.lstm_hidden);
  get_if(j, "relu_after_fc1", m.relu_after_fc1);
  get_if(j, "alpha", m.alpha);
  get_if(j, "beta", m.beta);
  get_if(j, "gamma", m.gamma);
  get_if(j, "fuse_channels", m.fuse_channels);
  get_if(j, "fusion_lstm_hidden", m.fusion_lstm_hidden);
  get_if(j, "share_fusers", m.share_fusers);
  get_if(j, "average_unit_heads", m.average_unit_heads);
  if (j.contains("anchor_alignment")) {
    const std::string a = j.at("anchor_alignment").get<std::string>();
    if (a == "center") {
      m.anchor_alignment = AnchorAlignment::center;
    } else if (a == "left") {
      m.anchor_alignment = AnchorAlignment::left;
    } else {
      throw std::invalid_argument("config: anchor_alignment must be 'center' or 'left', got '" + a + "'");
    }
  }
  if (j.contains("group_inclusion")) {
    const std::string g = j.at("group_inclusion").get<std::string>();
    if (g == "replace") {
      m.group_inclusion = GroupInclusion::replace_lowest;
    } else if (g == "append") {
      m.group_inclusion = GroupInclusion::append;
    } else {
      throw std::invalid_argument("config: group_inclusion must be 'replace' or 'append', got '" + g + "'");
    }
  }
}

void parse_grouper(const json& j, GrouperSettings& g) {
  check_keys(j, {"fraction", "iterations", "lr", "window_bias", "conv1_channels", "conv2_channels", "batch"},
             "grouper");
  get_if(j, "fraction", g.fraction);
  get_if(j, "iterations", g.iterations);
  get_if(j, "lr", g.lr);
  get_if(j, "window_bias", g.window_bias);
  get_if(j, "conv1_channels", g.conv1_channels);
  get_if(j, "conv2_channels", g.conv2_channels);
  get_if(j, "batch", g.batch);
}

void parse_train(const json& j, TrainConfig& t) {
  check_keys(j,
             {"batch_size", "momentum", "lr", "lr_decay", "decay_interval", "max_iterations", "eval_interval",
              "eval_videos", "eval_periods", "seed", "delta", "stop_fusion_gradient"},
             "train");
  get_if(j, "batch_size", t.batch_size);
  get_if(j, "momentum", t.momentum);
  get_if(j, "lr", t.lr);
  get_if(j, "lr_decay", t.lr_decay);
  get_if(j, "decay_interval", t.decay_interval);
  get_if(j, "max_iterations", t.max_iterations);
  get_if(j, "eval_interval", t.eval_interval);
  get_if(j, "eval_videos", t.eval_videos);
  get_if(j, "eval_periods", t.eval_periods);
  get_if(j, "seed", t.seed);
  get_if(j, "delta", t.delta);
  get_if(j, "stop_fusion_gradient", t.stop_fusion_gradient);
}

void parse_eval(const json& j, EvalOptions& e) {
  check_keys(j, {"periods_per_video", "trace_videos"}, "eval");
  get_if(j, "periods_per_video", e.periods_per_video);
  get_if(j, "trace_videos", e.trace_videos);
}

json data_to_json(const data::SyntheticConfig& d) {
  json pairs = json::array();
  for (const auto& [a, b] : d.confusable_pairs) pairs.push_back({a, b});
  return json{{"num_classes", d.num_classes},
              {"videos_per_class", d.videos_per_class},
              {"frames", d.frames},
              {"channels", d.channels},
              {"height", d.height},
              {"width", d.width},
              {"lag", d.lag},
              {"signature_width", d.signature_width},
              {"signature_size", d.signature_size},
              {"signature_amplitude", d.signature_amplitude},
              {"noise_sigma", d.noise_sigma},
              {"confusable_pairs", pairs},
              {"train_fraction", d.train_fraction},
              {"seed", d.seed}};
}

json model_to_json(const ModelConfig& m) {
  return json{{"stage_channels", m.stage_channels},
              {"side_stages", m.side_stages},
              {"feature_dim", m.feature_dim},
              {"head_hidden", m.head_hidden},
              {"lstm_hidden", m.lstm_hidden},
              {"relu_after_fc1", m.relu_after_fc1},
              {"alpha", m.alpha},
              {"beta", m.beta},
              {"gamma", m.gamma},
              {"fuse_channels", m.fuse_channels},
              {"fusion_lstm_hidden", m.fusion_lstm_hidden},
              {"share_fusers", m.share_fusers},
              {"average_unit_heads", m.average_unit_heads},
              {"anchor_alignment", m.anchor_alignment == AnchorAlignment::center ? "center" : "left"},
              {"group_inclusion", m.group_inclusion == GroupInclusion::replace_lowest ? "replace" : "append"}};
}

}  // namespace

FullConfig default_config() { return FullConfig{}; }

FullConfig parse_config_json(const std::string& text) {
  json j = json::parse(text);
  check_keys(j, {"schema_version", "data", "model", "grouper", "train", "eval", "train_mode", "anchor_direction"},
             "top level");
  FullConfig cfg;
  if (j.contains("data")) parse_data(j.at("data"), cfg.data);
  if (j.contains("model")) parse_model(j.at("model"), cfg.model);
  if (j.contains("grouper")) parse_grouper(j.at("grouper"), cfg.grouper);
  if (j.contains("train")) parse_train(j.at("train"), cfg.train);
  if (j.contains("eval")) parse_eval(j.at("eval"), cfg.eval);
  if (j.contains("train_mode")) {
    cfg.train_mode = j.at("train_mode").get<std::string>();
    parse_mode(cfg.train_mode);  // validate early
  }
  if (j.contains("anchor_direction")) {
    cfg.anchor_direction = j.at("anchor_direction").get<std::string>();
    if (cfg.anchor_direction != "s1" && cfg.anchor_direction != "s2" && cfg.anchor_direction != "both") {
      throw std::invalid_argument("config: anchor_direction must be 's1', 's2' or 'both'");
    }
  }
  return cfg;
}

FullConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("config file not found: " + path.string());
  std::string text{std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
  return parse_config_json(text);
}

std::string config_to_json_text(const FullConfig& cfg) {
  json j;
  j["schema_version"] = 1;
  j["data"] = data_to_json(cfg.data);
  j["model"] = model_to_json(cfg.model);
  j["grouper"] = json{{"fraction", cfg.grouper.fraction},   {"iterations", cfg.grouper.iterations},
                      {"lr", cfg.grouper.lr},               {"window_bias", cfg.grouper.window_bias},
                      {"conv1_channels", cfg.grouper.conv1_channels}, {"conv2_channels", cfg.grouper.conv2_channels},
                      {"batch", cfg.grouper.batch}};
  j["train"] = json{{"batch_size", cfg.train.batch_size},
                    {"momentum", cfg.train.momentum},
                    {"lr", cfg.train.lr},
                    {"lr_decay", cfg.train.lr_decay},
                    {"decay_interval", cfg.train.decay_interval},
                    {"max_iterations", cfg.train.max_iterations},
                    {"eval_interval", cfg.train.eval_interval},
                    {"eval_videos", cfg.train.eval_videos},
                    {"eval_periods", cfg.train.eval_periods},
                    {"seed", cfg.train.seed},
                    {"delta", cfg.train.delta},
                    {"stop_fusion_gradient", cfg.train.stop_fusion_gradient}};
  j["eval"] = json{{"periods_per_video", cfg.eval.periods_per_video}, {"trace_videos", cfg.eval.trace_videos}};
  j["train_mode"] = cfg.train_mode;
  j["anchor_direction"] = cfg.anchor_direction;
  return j.dump(2);
}

std::uint64_t arch_fingerprint(const FullConfig& cfg, const std::string& tag) {
  json j;
  j["geometry"] = json{{"channels", cfg.data.channels},
                       {"height", cfg.data.height},
                       {"width", cfg.data.width},
                       {"num_classes", cfg.data.num_classes}};
  j["model"] = model_to_json(cfg.model);
  j["tag"] = tag;
  return fnv1a64(j.dump());
}

GrouperConfig make_grouper_config(const data::SyntheticConfig& d, const GrouperSettings& g) {
  GrouperConfig cfg;
  cfg.in_channels = d.channels;
  cfg.height = d.height;
  cfg.width = d.width;
  cfg.num_classes = d.num_classes;
  cfg.conv1_channels = g.conv1_channels;
  cfg.conv2_channels = g.conv2_channels;
  cfg.batch = g.batch;
  cfg.lr = g.lr;
  cfg.window_bias = g.window_bias;
  return cfg;
}

}  // namespace c2f
