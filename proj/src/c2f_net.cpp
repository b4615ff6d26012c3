#include "c2f/c2f_net.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace c2f {

namespace {
int pow2(int e) { return 1 << e; }
}  // namespace

void C2fConfig::validate() const {
  if (stage_channels.empty()) throw std::invalid_argument("c2f config: no backbone stages");
  if (in_channels < 1 || height < 2 || width < 2) throw std::invalid_argument("c2f config: bad input geometry");
  if (granularities < 1 || granularities > 3) throw std::invalid_argument("c2f config: granularities must be 1..3");
  if (feature_dim < 1 || head_hidden < 1 || lstm_hidden < 1) throw std::invalid_argument("c2f config: bad dims");
  if (num_classes < 2) throw std::invalid_argument("c2f config: need at least 2 classes");
  if (side_stages.empty()) throw std::invalid_argument("c2f config: need at least one side stage");
  const int s_count = num_stages();
  int prev = 0;
  for (int s : side_stages) {
    if (s < 1 || s > s_count) {
      throw std::invalid_argument("c2f config: side stage " + std::to_string(s) + " outside 1.." +
                                  std::to_string(s_count));
    }
    if (s <= prev) throw std::invalid_argument("c2f config: side stages must be strictly increasing");
    prev = s;
  }
  // Each stage pools 2x2, so spatial sizes must survive all stages and
  // side maps must upsample exactly onto the shallowest side size.
  if (height % pow2(s_count - 1) != 0 || width % pow2(s_count - 1) != 0) {
    throw std::invalid_argument("c2f config: input size must be divisible by 2^(stages-1)");
  }
  if (height / pow2(s_count - 1) < 2 || width / pow2(s_count - 1) < 2) {
    throw std::invalid_argument("c2f config: input too small for " + std::to_string(s_count) + " pooling stages");
  }
}

int C2fConfig::common_side_height() const { return height / pow2(side_stages.front() - 1); }
int C2fConfig::common_side_width() const { return width / pow2(side_stages.front() - 1); }

C2fModel C2fModel::create(const C2fConfig& cfg, Rng& rng) {
  cfg.validate();
  C2fModel m;
  m.cfg_ = cfg;
  const int k_gran = cfg.granularities;

  int in_c = cfg.in_channels;
  for (int s = 0; s < cfg.num_stages(); ++s) {
    m.stages_.push_back(nn::ConvParams::create(cfg.stage_channels[static_cast<std::size_t>(s)], in_c, 3, 1, 1, rng));
    in_c = cfg.stage_channels[static_cast<std::size_t>(s)];
  }
  for (int s : cfg.side_stages) {
    m.side_convs_.push_back(
        nn::ConvParams::create(k_gran, cfg.stage_channels[static_cast<std::size_t>(s - 1)], 1, 1, 0, rng));
  }
  const int group_flat = static_cast<int>(cfg.side_stages.size()) * cfg.common_side_height() * cfg.common_side_width();
  for (int k = 0; k < k_gran; ++k) {
    m.fc1_.push_back(nn::FcParams::create(cfg.feature_dim, group_flat, rng));
    m.fc2_.push_back(nn::FcParams::create(cfg.head_hidden, cfg.feature_dim, rng));
    m.fc3_.push_back(nn::FcParams::create(cfg.num_classes, cfg.head_hidden, rng));
    m.lstm_units_.push_back(nn::LstmUnitParams::create(cfg.feature_dim, cfg.lstm_hidden, rng));
    m.unit_heads_.push_back(nn::FcParams::create(cfg.num_classes, cfg.lstm_hidden, rng));
  }
  m.standalone_head_ = nn::FcParams::create(cfg.num_classes, cfg.lstm_hidden, rng);
  return m;
}

GranularityFeatures C2fModel::extract_features(const Tensor& input) const {
  if (input.rank() != 3 || input.dim(0) != cfg_.in_channels || input.dim(1) != cfg_.height ||
      input.dim(2) != cfg_.width) {
    throw std::invalid_argument("c2f extract: input shape " + shape_str(input.shape()) + " does not match config");
  }

  // Backbone pass, keeping the post-ReLU conv map of every stage.
  std::vector<Tensor> taps;
  Tensor cur = input;
  for (const auto& stage : stages_) {
    Tensor t = ops::relu(nn::conv(stage, cur));
    taps.push_back(t);
    cur = ops::maxpool2x2(t);
  }

  // Side maps, upsampled to the shallowest side stage's size.
  const int base_stage = cfg_.side_stages.front();
  std::vector<Tensor> side_maps;
  for (std::size_t i = 0; i < side_convs_.size(); ++i) {
    const int stage = cfg_.side_stages[i];
    Tensor side = nn::conv(side_convs_[i], taps[static_cast<std::size_t>(stage - 1)]);
    const int factor = pow2(stage - base_stage);
    if (factor > 1) side = ops::upsample_nearest(side, factor);
    side_maps.push_back(side);
  }

  // Scale-specific grouping: the k-th channel of every side map forms the
  // granularity-k group.
  GranularityFeatures f;
  for (int k = 0; k < cfg_.granularities; ++k) {
    std::vector<Tensor> slices;
    slices.reserve(side_maps.size());
    for (const Tensor& s : side_maps) slices.push_back(ops::slice0(s, k, 1));
    Tensor group = ops::flatten(ops::concat(slices));
    Tensor x = nn::fc(fc1_[static_cast<std::size_t>(k)], group);
    if (cfg_.relu_after_fc1) x = ops::relu(x);
    f.x.push_back(x);
  }
  return f;
}

std::vector<Tensor> C2fModel::granularity_logits(const GranularityFeatures& f) const {
  if (static_cast<int>(f.x.size()) != cfg_.granularities) {
    throw std::invalid_argument("granularity_logits: wrong feature count");
  }
  std::vector<Tensor> logits;
  for (int k = 0; k < cfg_.granularities; ++k) {
    Tensor hidden = ops::relu(nn::fc(fc2_[static_cast<std::size_t>(k)], f.x[static_cast<std::size_t>(k)]));
    logits.push_back(nn::fc(fc3_[static_cast<std::size_t>(k)], hidden));
  }
  return logits;
}

IntegrationResult C2fModel::integrate(const GranularityFeatures& f) const {
  if (static_cast<int>(f.x.size()) != cfg_.granularities) {
    throw std::invalid_argument("integrate: wrong feature count");
  }
  IntegrationResult r;
  nn::LstmState state;
  for (int k = 0; k < cfg_.granularities; ++k) {
    state = (k == 0) ? nn::lstm_unit_start(lstm_units_[0], f.x[0])
                     : nn::lstm_unit(lstm_units_[static_cast<std::size_t>(k)], f.x[static_cast<std::size_t>(k)],
                                     state.h, state.c);
    r.unit_logits.push_back(nn::fc(unit_heads_[static_cast<std::size_t>(k)], state.h));
  }
  r.final_feature = state.h;
  return r;
}

Tensor C2fModel::standalone_logits(const Tensor& final_feature) const {
  return nn::fc(standalone_head_, final_feature);
}

Tensor C2fModel::predict(const Tensor& input) const {
  return ops::softmax(standalone_logits(integrate(extract_features(input)).final_feature));
}

nn::NamedParams C2fModel::named_params() const {
  nn::NamedParams out;
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    nn::append_params(out, "stage" + std::to_string(s + 1), stages_[s].named(""));
  }
  for (std::size_t i = 0; i < side_convs_.size(); ++i) {
    nn::append_params(out, "side" + std::to_string(cfg_.side_stages[i]), side_convs_[i].named(""));
  }
  for (int k = 0; k < cfg_.granularities; ++k) {
    const std::string g = "g" + std::to_string(k + 1);
    nn::append_params(out, g + ".fc1", fc1_[static_cast<std::size_t>(k)].named(""));
    nn::append_params(out, g + ".fc2", fc2_[static_cast<std::size_t>(k)].named(""));
    nn::append_params(out, g + ".fc3", fc3_[static_cast<std::size_t>(k)].named(""));
    nn::append_params(out, g + ".lstm", lstm_units_[static_cast<std::size_t>(k)].named(""));
    nn::append_params(out, g + ".unit_head", unit_heads_[static_cast<std::size_t>(k)].named(""));
  }
  nn::append_params(out, "standalone_head", standalone_head_.named(""));
  return out;
}

Tensor granularity_group_loss(const std::vector<Tensor>& granularity_logits, const ClassGroupSet& groups,
                              std::span<const double> alpha, int num_classes) {
  if (granularity_logits.size() != groups.groups.size() || granularity_logits.size() != alpha.size()) {
    throw std::invalid_argument("granularity_group_loss: logits/groups/alpha counts disagree");
  }
  Tensor total = Tensor::scalar(0.0);
  for (std::size_t k = 0; k < granularity_logits.size(); ++k) {
    if (groups.groups[k].empty()) throw std::invalid_argument("granularity_group_loss: empty class group");
    if (alpha[k] < 0.0) throw std::invalid_argument("granularity_group_loss: negative alpha");
    if (alpha[k] == 0.0) continue;
    total = ops::add(total, ops::softmax_cross_entropy(granularity_logits[k], groups.groups[k], alpha[k]));
  }
  return ops::scale(total, 1.0 / static_cast<double>(num_classes));
}

Tensor sequence_prediction_loss(const std::vector<Tensor>& unit_logits, int gt_label, double coef, int num_classes) {
  if (unit_logits.empty()) throw std::invalid_argument("sequence_prediction_loss: no unit logits");
  if (gt_label < 0 || gt_label >= num_classes) {
    throw std::invalid_argument("sequence_prediction_loss: label " + std::to_string(gt_label) + " outside 0.." +
                                std::to_string(num_classes - 1));
  }
  if (coef < 0.0) throw std::invalid_argument("sequence_prediction_loss: negative coefficient");
  if (coef == 0.0) return Tensor::scalar(0.0);
  const std::vector<int> target{gt_label};
  Tensor total = Tensor::scalar(0.0);
  for (const Tensor& logits : unit_logits) {
    total = ops::add(total, ops::softmax_cross_entropy(logits, target, 1.0));
  }
  return ops::scale(total, coef / static_cast<double>(num_classes));
}

Tensor c2f_total_loss(const Tensor& feature_loss, const Tensor& integration_loss) {
  return ops::add(feature_loss, integration_loss);
}

void BaselineConfig::validate() const {
  if (stage_channels.empty()) throw std::invalid_argument("baseline config: no backbone stages");
  if (num_classes < 2) throw std::invalid_argument("baseline config: need at least 2 classes");
  const int s_count = static_cast<int>(stage_channels.size());
  if (height % pow2(s_count - 1) != 0 || width % pow2(s_count - 1) != 0 || height / pow2(s_count - 1) < 2 ||
      width / pow2(s_count - 1) < 2) {
    throw std::invalid_argument("baseline config: input size incompatible with pooling stages");
  }
}

BaselineModel BaselineModel::create(const BaselineConfig& cfg, Rng& rng) {
  cfg.validate();
  BaselineModel m;
  m.cfg_ = cfg;
  int in_c = cfg.in_channels;
  for (int ch : cfg.stage_channels) {
    m.stages_.push_back(nn::ConvParams::create(ch, in_c, 3, 1, 1, rng));
    in_c = ch;
  }
  const int s_count = static_cast<int>(cfg.stage_channels.size());
  const int flat = cfg.stage_channels.back() * (cfg.height / pow2(s_count)) * (cfg.width / pow2(s_count));
  m.fc_feat_ = nn::FcParams::create(cfg.feature_dim, flat, rng);
  m.head_ = nn::FcParams::create(cfg.num_classes, cfg.feature_dim, rng);
  return m;
}

Tensor BaselineModel::feature(const Tensor& input) const {
  Tensor cur = input;
  for (const auto& stage : stages_) cur = ops::maxpool2x2(ops::relu(nn::conv(stage, cur)));
  Tensor x = nn::fc(fc_feat_, ops::flatten(cur));
  return cfg_.relu_after_fc ? ops::relu(x) : x;
}

Tensor BaselineModel::head_logits(const Tensor& feature) const { return nn::fc(head_, feature); }

Tensor BaselineModel::predict(const Tensor& input) const { return ops::softmax(head_logits(feature(input))); }

nn::NamedParams BaselineModel::named_params() const {
  nn::NamedParams out;
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    nn::append_params(out, "stage" + std::to_string(s + 1), stages_[s].named(""));
  }
  nn::append_params(out, "fc_feat", fc_feat_.named(""));
  nn::append_params(out, "head", head_.named(""));
  return out;
}

}  // namespace c2f
