#include "c2f/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "c2f/checkpoint.hpp"
#include "c2f/tape.hpp"

namespace c2f {

using nlohmann::json;

namespace {
const std::vector<std::pair<Mode, const char*>>& mode_table() {
  static const std::vector<std::pair<Mode, const char*>> table = {
      {Mode::baseline, "baseline"},
      {Mode::c2f_no_grouping, "c2f-no-grouping"},
      {Mode::c2f_two_granularities, "c2f-two-granularities"},
      {Mode::c2f_no_coarseness, "c2f-no-coarseness"},
      {Mode::c2f_complete, "c2f-complete"},
      {Mode::baseline_syn, "baseline-syn"},
      {Mode::baseline_asyn1, "baseline-asyn1"},
      {Mode::baseline_asyn5, "baseline-asyn5"},
      {Mode::c2f_asyn5, "c2f-asyn5"},
  };
  return table;
}
}  // namespace

Mode parse_mode(const std::string& name) {
  for (const auto& [mode, n] : mode_table()) {
    if (name == n) return mode;
  }
  std::string valid;
  for (const auto& [mode, n] : mode_table()) valid += std::string(n) + " ";
  throw std::invalid_argument("unknown mode '" + name + "'; valid modes: " + valid);
}

std::string mode_name(Mode m) {
  for (const auto& [mode, n] : mode_table()) {
    if (mode == m) return n;
  }
  return "?";
}

const std::vector<std::string>& all_mode_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [mode, n] : mode_table()) out.emplace_back(n);
    return out;
  }();
  return names;
}

bool mode_uses_fusion(Mode m) {
  return m == Mode::baseline_syn || m == Mode::baseline_asyn1 || m == Mode::baseline_asyn5 || m == Mode::c2f_asyn5;
}

bool mode_uses_c2f(Mode m) {
  switch (m) {
    case Mode::c2f_no_grouping:
    case Mode::c2f_two_granularities:
    case Mode::c2f_no_coarseness:
    case Mode::c2f_complete:
    case Mode::c2f_asyn5:
      return true;
    default:
      return false;
  }
}

bool mode_synchronous(Mode m) { return m == Mode::baseline_syn; }

int mode_delta(Mode m, int config_delta) {
  switch (m) {
    case Mode::baseline_syn:
      return 0;
    case Mode::baseline_asyn1:
      return 1;
    case Mode::baseline_asyn5:
      return 5;
    case Mode::c2f_asyn5:
      return config_delta;
    default:
      return config_delta;
  }
}

int mode_granularities(Mode m) { return m == Mode::c2f_two_granularities ? 2 : 3; }

GroupingMode mode_grouping(Mode m) {
  switch (m) {
    case Mode::c2f_no_grouping:
      return GroupingMode::none;
    case Mode::c2f_no_coarseness:
      return GroupingMode::gt_only;
    case Mode::c2f_two_granularities:
    case Mode::c2f_complete:
    case Mode::c2f_asyn5:
      return GroupingMode::adaptive;
    default:
      return GroupingMode::none;
  }
}

void TrainConfig::validate(std::size_t dataset_size) const {
  if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be positive");
  if (dataset_size > 0 && static_cast<std::size_t>(batch_size) > dataset_size) {
    throw std::invalid_argument("train config: batch_size exceeds the training set size");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("train config: momentum must be in [0,1)");
  if (lr <= 0.0) throw std::invalid_argument("train config: lr must be positive");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw std::invalid_argument("train config: lr_decay must be in (0,1]");
  if (decay_interval < 1) throw std::invalid_argument("train config: decay_interval must be positive");
  if (max_iterations < 1) throw std::invalid_argument("train config: max_iterations must be positive");
  if (delta < 0) throw std::invalid_argument("train config: delta must be nonnegative");
}

double lr_at(const TrainConfig& cfg, int iteration) {
  const int drops = (iteration - 1) / cfg.decay_interval;
  return cfg.lr * std::pow(cfg.lr_decay, drops);
}

std::vector<double> alpha_for(const ModelConfig& hp, int granularities) {
  if (static_cast<int>(hp.alpha.size()) == granularities) return hp.alpha;
  if (hp.alpha.size() == 3 && granularities < 3) {
    return {hp.alpha.end() - granularities, hp.alpha.end()};
  }
  throw std::invalid_argument("alpha weights do not cover " + std::to_string(granularities) + " granularities");
}

C2fConfig make_c2f_config(const data::SyntheticConfig& d, const ModelConfig& hp, int granularities) {
  C2fConfig cfg;
  cfg.in_channels = d.channels;
  cfg.height = d.height;
  cfg.width = d.width;
  cfg.stage_channels = hp.stage_channels;
  cfg.side_stages = hp.side_stages;
  cfg.granularities = granularities;
  cfg.feature_dim = hp.feature_dim;
  cfg.head_hidden = hp.head_hidden;
  cfg.lstm_hidden = hp.lstm_hidden;
  cfg.num_classes = d.num_classes;
  cfg.relu_after_fc1 = hp.relu_after_fc1;
  return cfg;
}

BaselineConfig make_baseline_config(const data::SyntheticConfig& d, const ModelConfig& hp) {
  BaselineConfig cfg;
  cfg.in_channels = d.channels;
  cfg.height = d.height;
  cfg.width = d.width;
  cfg.stage_channels = hp.stage_channels;
  cfg.feature_dim = hp.feature_dim;
  cfg.num_classes = d.num_classes;
  cfg.relu_after_fc = hp.relu_after_fc1;
  return cfg;
}

FusionConfig make_fusion_config(const data::SyntheticConfig& d, const ModelConfig& hp) {
  FusionConfig cfg;
  // Baseline features and the integrated coarse-to-fine feature share the
  // same length by construction (feature_dim == lstm_hidden is allowed to
  // differ; the fuser consumes whichever the mode produces).
  cfg.feature_dim = hp.lstm_hidden;
  cfg.steps = 5;
  cfg.fuse_channels = hp.fuse_channels;
  cfg.lstm_hidden = hp.fusion_lstm_hidden;
  cfg.num_classes = d.num_classes;
  cfg.share_fusers = hp.share_fusers;
  cfg.average_unit_heads = hp.average_unit_heads;
  return cfg;
}

std::vector<double> StreamModel::class_scores(const Tensor& input) const {
  Tensor p = c2f ? c2f->predict(input) : base->predict(input);
  return {p.data(), p.data() + p.size()};
}

nn::NamedParams StreamModel::named_params() const {
  nn::NamedParams out;
  if (c2f) nn::append_params(out, "c2f.", c2f->named_params());
  if (base) nn::append_params(out, "base.", base->named_params());
  return out;
}

nn::NamedParams JointModel::named_params() const {
  nn::NamedParams out;
  if (seq_c2f) nn::append_params(out, "seq.", seq_c2f->named_params());
  if (seq_base) nn::append_params(out, "seq.", seq_base->named_params());
  if (anchor_c2f) nn::append_params(out, "anchor.", anchor_c2f->named_params());
  if (anchor_base) nn::append_params(out, "anchor.", anchor_base->named_params());
  nn::append_params(out, "fusion.", fusion.named_params());
  return out;
}

namespace {

// Feature + per-input feature loss for one input through whichever
// extractor the mode uses. `groups` may be null when the mode has no
// group loss.
struct InputPass {
  Tensor feature;
  Tensor loss;  // scalar
};

InputPass c2f_input_pass(const C2fModel& model, const Tensor& input, int label, const ClassGroupSet* groups,
                         const std::vector<double>& alpha, double beta, int num_classes) {
  GranularityFeatures f = model.extract_features(input);
  IntegrationResult integ = model.integrate(f);
  Tensor loss = sequence_prediction_loss(integ.unit_logits, label, beta, num_classes);
  if (groups != nullptr) {
    loss = ops::add(granularity_group_loss(model.granularity_logits(f), *groups, alpha, num_classes), loss);
  }
  return {integ.final_feature, loss};
}

InputPass baseline_input_pass(const BaselineModel& model, const Tensor& input, int label) {
  Tensor feature = model.feature(input);
  std::vector<int> gt{label};
  Tensor loss = ops::softmax_cross_entropy(model.head_logits(feature), gt, 1.0);
  return {feature, loss};
}

}  // namespace

JointLossBreakdown joint_loss(const JointModel& model, const PeriodInputs& inputs,
                              const std::vector<ClassGroupSet>& groups, const ModelConfig& hp,
                              bool stop_fusion_gradient) {
  const int steps = model.fusion.config().steps;
  if (static_cast<int>(inputs.sequence.size()) != steps) {
    throw std::invalid_argument("joint_loss: expected " + std::to_string(steps) + " sequence inputs");
  }
  const bool use_groups = mode_grouping(model.mode) != GroupingMode::none && mode_uses_c2f(model.mode);
  if (use_groups && static_cast<int>(groups.size()) != steps + 1) {
    throw std::invalid_argument("joint_loss: expected one class group set per input (sequence inputs plus anchor)");
  }
  const int num_classes = model.fusion.config().num_classes;
  const std::vector<double> alpha =
      mode_uses_c2f(model.mode) ? alpha_for(hp, mode_granularities(model.mode)) : std::vector<double>{};

  JointLossBreakdown out;
  Tensor total = Tensor::scalar(0.0);

  std::vector<Tensor> seq_features;
  for (int t = 0; t < steps; ++t) {
    InputPass pass = mode_uses_c2f(model.mode)
                         ? c2f_input_pass(*model.seq_c2f, inputs.sequence[static_cast<std::size_t>(t)], inputs.label,
                                          use_groups ? &groups[static_cast<std::size_t>(t)] : nullptr, alpha, hp.beta,
                                          num_classes)
                         : baseline_input_pass(*model.seq_base, inputs.sequence[static_cast<std::size_t>(t)],
                                               inputs.label);
    seq_features.push_back(pass.feature);
    out.sequence_stream += pass.loss.value();
    total = ops::add(total, pass.loss);
  }

  InputPass anchor_pass =
      mode_uses_c2f(model.mode)
          ? c2f_input_pass(*model.anchor_c2f, inputs.anchor, inputs.label,
                           use_groups ? &groups[static_cast<std::size_t>(steps)] : nullptr, alpha, hp.beta,
                           num_classes)
          : baseline_input_pass(*model.anchor_base, inputs.anchor, inputs.label);
  out.anchor_stream = anchor_pass.loss.value();
  total = ops::add(total, anchor_pass.loss);

  Tensor anchor_feature = stop_fusion_gradient ? ops::detach(anchor_pass.feature) : anchor_pass.feature;
  std::vector<Tensor> fused;
  for (int t = 0; t < steps; ++t) {
    Tensor seq_feature = stop_fusion_gradient ? ops::detach(seq_features[static_cast<std::size_t>(t)])
                                              : seq_features[static_cast<std::size_t>(t)];
    fused.push_back(model.fusion.fuse(t, anchor_feature, seq_feature));
  }
  AsyncFusionNet::Result fusion_result = model.fusion.integrate(fused);
  Tensor fusion_loss = async_fusion_loss(fusion_result.unit_logits, inputs.label, hp.gamma, num_classes);
  out.fusion = fusion_loss.value();
  total = ops::add(total, fusion_loss);

  out.total = total;
  return out;
}

std::vector<double> joint_period_scores(const JointModel& model, const PeriodInputs& inputs) {
  const int steps = model.fusion.config().steps;
  if (static_cast<int>(inputs.sequence.size()) != steps) {
    throw std::invalid_argument("joint_period_scores: wrong sequence length");
  }
  auto feature_of = [&](const Tensor& input, bool anchor) {
    if (mode_uses_c2f(model.mode)) {
      const C2fModel& net = anchor ? *model.anchor_c2f : *model.seq_c2f;
      return net.integrate(net.extract_features(input)).final_feature;
    }
    const BaselineModel& net = anchor ? *model.anchor_base : *model.seq_base;
    return net.feature(input);
  };
  Tensor anchor_feature = feature_of(inputs.anchor, true);
  std::vector<Tensor> fused;
  for (int t = 0; t < steps; ++t) {
    fused.push_back(model.fusion.fuse(t, anchor_feature, feature_of(inputs.sequence[static_cast<std::size_t>(t)], false)));
  }
  Tensor p = model.fusion.integrate(fused).prediction;
  return {p.data(), p.data() + p.size()};
}

PeriodInputs materialize_period(const data::Dataset& ds, int video, int anchor_stream, const PeriodSpec& spec) {
  PeriodInputs inputs;
  const int seq_stream = anchor_stream == 2 ? 1 : 2;
  inputs.anchor = ds.frame(video, anchor_stream, spec.anchor_time);
  for (int t : spec.sequence_times) inputs.sequence.push_back(ds.frame(video, seq_stream, t));
  inputs.label = ds.videos[static_cast<std::size_t>(video)].label;
  return inputs;
}

namespace {

struct LogWriter {
  std::ofstream os;
  explicit LogWriter(const std::filesystem::path& out_dir) {
    if (!out_dir.empty()) {
      std::filesystem::create_directories(out_dir);
      os.open(out_dir / "train_log.jsonl", std::ios::trunc);
      if (!os) throw std::runtime_error("cannot open train log in " + out_dir.string());
    }
  }
  void write(const json& j) {
    if (os.is_open()) os << j.dump() << "\n";
  }
};

[[noreturn]] void abort_on_nan(const std::filesystem::path& out_dir, int iteration, const json& batch_desc) {
  json dump{{"iteration", iteration}, {"batch", batch_desc}};
  if (!out_dir.empty()) {
    std::ofstream os(out_dir / "nan_dump.json", std::ios::trunc);
    os << dump.dump(2) << "\n";
  }
  throw std::runtime_error("training aborted: non-finite loss at iteration " + std::to_string(iteration) +
                           (out_dir.empty() ? "" : "; offending batch written to " +
                                                       (out_dir / "nan_dump.json").string()));
}

ClassGroupSet gt_only_groups(int granularities, int label) {
  ClassGroupSet g;
  for (int k = 0; k < granularities; ++k) g.groups.push_back({label});
  return g;
}

int uniform_from(const std::vector<int>& pool, Rng& rng) {
  return pool[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(pool.size())))];
}

struct AnchorRange {
  int lo, hi;
};

AnchorRange anchor_range(int frames, int delta, int steps, AnchorAlignment alignment) {
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
  return {lo, hi};
}

double quick_eval_stream(const StreamModel& model, const data::Dataset& ds, int videos, int samples) {
  const int n = std::min<int>(videos, static_cast<int>(ds.test_indices.size()));
  if (n == 0) return -1.0;
  const std::vector<int> times = eval_anchor_positions(ds.config.frames, 0, 1, AnchorAlignment::center, samples);
  int correct = 0;
  for (int i = 0; i < n; ++i) {
    const int vid = ds.test_indices[static_cast<std::size_t>(i)];
    std::vector<double> scores(static_cast<std::size_t>(ds.config.num_classes), 0.0);
    for (int t : times) {
      const std::vector<double> p = model.class_scores(ds.frame(vid, model.stream, t));
      for (std::size_t c = 0; c < scores.size(); ++c) scores[c] += p[c];
    }
    const int pred = static_cast<int>(std::max_element(scores.begin(), scores.end()) - scores.begin());
    correct += (pred == ds.videos[static_cast<std::size_t>(vid)].label) ? 1 : 0;
  }
  return static_cast<double>(correct) / n;
}

double quick_eval_joint(const JointModel& model, const data::Dataset& ds, const ModelConfig& hp, int delta,
                        bool synchronous, int videos, int periods) {
  const int n = std::min<int>(videos, static_cast<int>(ds.test_indices.size()));
  if (n == 0) return -1.0;
  const int steps = model.fusion.config().steps;
  const std::vector<int> anchors =
      eval_anchor_positions(ds.config.frames, delta, steps, hp.anchor_alignment, periods);
  int correct = 0;
  for (int i = 0; i < n; ++i) {
    const int vid = ds.test_indices[static_cast<std::size_t>(i)];
    std::vector<double> scores(static_cast<std::size_t>(ds.config.num_classes), 0.0);
    for (int a : anchors) {
      const PeriodSpec spec = make_period_spec(a, delta, steps, ds.config.frames, hp.anchor_alignment, synchronous);
      const std::vector<double> p = joint_period_scores(model, materialize_period(ds, vid, model.anchor_stream, spec));
      for (std::size_t c = 0; c < scores.size(); ++c) scores[c] += p[c];
    }
    const int pred = static_cast<int>(std::max_element(scores.begin(), scores.end()) - scores.begin());
    correct += (pred == ds.videos[static_cast<std::size_t>(vid)].label) ? 1 : 0;
  }
  return static_cast<double>(correct) / n;
}

}  // namespace

StreamModel train_stream_model(const data::Dataset& ds, int stream, Mode mode, const ModelConfig& hp,
                               const TrainConfig& cfg, const GrouperModel* grouper,
                               const std::filesystem::path& out_dir, std::uint64_t ckpt_fingerprint) {
  if (mode_uses_fusion(mode)) throw std::invalid_argument("train_stream_model: " + mode_name(mode) + " is a fusion mode");
  cfg.validate(ds.train_indices.size());
  const GroupingMode grouping = mode_grouping(mode);
  if (grouping == GroupingMode::adaptive) {
    if (grouper == nullptr) throw std::invalid_argument("train_stream_model: mode requires a pretrained grouper");
    if (!grouper->frozen()) throw std::invalid_argument("train_stream_model: grouper must be frozen");
  }

  Rng master(cfg.seed);
  Rng init_rng = master.fork(10 + static_cast<std::uint64_t>(stream));
  Rng draw_rng = master.fork(20 + static_cast<std::uint64_t>(stream));

  StreamModel model;
  model.mode = mode;
  model.stream = stream;
  const int granularities = mode_granularities(mode);
  std::vector<double> alpha;
  std::vector<int> sizes;
  if (mode_uses_c2f(mode)) {
    model.c2f = C2fModel::create(make_c2f_config(ds.config, hp, granularities), init_rng);
    alpha = alpha_for(hp, granularities);
    sizes = group_sizes_for(granularities, ds.config.num_classes);
  } else {
    model.base = BaselineModel::create(make_baseline_config(ds.config, hp), init_rng);
  }

  nn::SgdMomentum opt(nn::param_tensors(model.named_params()), cfg.momentum);
  LogWriter log(out_dir);

  for (int it = 1; it <= cfg.max_iterations; ++it) {
    const double lr = lr_at(cfg, it);
    double batch_loss = 0.0;
    json batch_desc = json::array();
    for (int b = 0; b < cfg.batch_size; ++b) {
      const int vid = uniform_from(ds.train_indices, draw_rng);
      const int t = draw_rng.uniform_int(ds.config.frames);
      const int label = ds.videos[static_cast<std::size_t>(vid)].label;
      Tensor input = ds.frame(vid, stream, t);

      ClassGroupSet groups;
      if (grouping == GroupingMode::adaptive) {
        groups = form_groups(*grouper, input, label, sizes, hp.group_inclusion);
      } else if (grouping == GroupingMode::gt_only) {
        groups = gt_only_groups(granularities, label);
      }

      Tape tape;
      double sample_loss = 0.0;
      {
        TapeScope scope(tape);
        Tensor loss;
        if (mode_uses_c2f(mode)) {
          GranularityFeatures f = model.c2f->extract_features(input);
          IntegrationResult integ = model.c2f->integrate(f);
          loss = sequence_prediction_loss(integ.unit_logits, label, hp.beta, ds.config.num_classes);
          if (grouping != GroupingMode::none) {
            loss = ops::add(granularity_group_loss(model.c2f->granularity_logits(f), groups, alpha,
                                                   ds.config.num_classes),
                            loss);
          }
          std::vector<int> gt{label};
          loss = ops::add(loss, ops::softmax_cross_entropy(model.c2f->standalone_logits(integ.final_feature), gt, 1.0));
        } else {
          std::vector<int> gt{label};
          loss = ops::softmax_cross_entropy(model.base->head_logits(model.base->feature(input)), gt, 1.0);
        }
        loss = ops::scale(loss, 1.0 / cfg.batch_size);
        sample_loss = loss.value();
        tape.backward(loss);
      }
      batch_loss += sample_loss;
      batch_desc.push_back(json{{"video", vid}, {"frame", t}, {"loss", sample_loss}});
    }
    if (!std::isfinite(batch_loss)) abort_on_nan(out_dir, it, batch_desc);
    opt.step(lr);
    opt.zero_grad();

    json record{{"iteration", it}, {"lr", lr}, {"loss", batch_loss}};
    if (cfg.eval_interval > 0 && (it % cfg.eval_interval == 0 || it == cfg.max_iterations)) {
      record["eval_accuracy"] = quick_eval_stream(model, ds, cfg.eval_videos, cfg.eval_periods);
    }
    log.write(record);
  }

  if (!out_dir.empty()) save_checkpoint(out_dir / "model.ckpt", ckpt_fingerprint, model.named_params());
  return model;
}

JointModel train_joint_model(const data::Dataset& ds, Mode mode, int anchor_stream, const ModelConfig& hp,
                             const TrainConfig& cfg, const GrouperPair& groupers,
                             const std::filesystem::path& out_dir, std::uint64_t ckpt_fingerprint) {
  if (!mode_uses_fusion(mode)) throw std::invalid_argument("train_joint_model: " + mode_name(mode) + " is not a fusion mode");
  if (anchor_stream != 1 && anchor_stream != 2) throw std::invalid_argument("train_joint_model: anchor_stream must be 1 or 2");
  cfg.validate(ds.train_indices.size());

  const GroupingMode grouping = mode_grouping(mode);
  const int seq_stream = anchor_stream == 2 ? 1 : 2;
  const GrouperModel* seq_grouper = groupers.for_stream(seq_stream);
  const GrouperModel* anchor_grouper = groupers.for_stream(anchor_stream);
  if (grouping == GroupingMode::adaptive) {
    if (seq_grouper == nullptr || anchor_grouper == nullptr) {
      throw std::invalid_argument("train_joint_model: mode requires pretrained groupers for both streams");
    }
    if (!seq_grouper->frozen() || !anchor_grouper->frozen()) {
      throw std::invalid_argument("train_joint_model: groupers must be frozen");
    }
  }

  Rng master(cfg.seed);
  Rng init_rng = master.fork(30 + static_cast<std::uint64_t>(anchor_stream));
  Rng draw_rng = master.fork(40 + static_cast<std::uint64_t>(anchor_stream));

  JointModel model;
  model.mode = mode;
  model.anchor_stream = anchor_stream;
  const int granularities = mode_granularities(mode);
  std::vector<int> sizes;
  if (mode_uses_c2f(mode)) {
    model.seq_c2f = C2fModel::create(make_c2f_config(ds.config, hp, granularities), init_rng);
    model.anchor_c2f = C2fModel::create(make_c2f_config(ds.config, hp, granularities), init_rng);
    sizes = group_sizes_for(granularities, ds.config.num_classes);
  } else {
    model.seq_base = BaselineModel::create(make_baseline_config(ds.config, hp), init_rng);
    model.anchor_base = BaselineModel::create(make_baseline_config(ds.config, hp), init_rng);
  }
  model.fusion = AsyncFusionNet::create(make_fusion_config(ds.config, hp), init_rng);

  const int delta = mode_delta(mode, cfg.delta);
  const bool synchronous = mode_synchronous(mode);
  const int steps = model.fusion.config().steps;
  const AnchorRange range = anchor_range(ds.config.frames, delta, steps, hp.anchor_alignment);

  nn::SgdMomentum opt(nn::param_tensors(model.named_params()), cfg.momentum);
  LogWriter log(out_dir);

  for (int it = 1; it <= cfg.max_iterations; ++it) {
    const double lr = lr_at(cfg, it);
    double batch_loss = 0.0, batch_seq = 0.0, batch_anchor = 0.0, batch_fusion = 0.0;
    json batch_desc = json::array();
    for (int b = 0; b < cfg.batch_size; ++b) {
      const int vid = uniform_from(ds.train_indices, draw_rng);
      const int anchor_t = range.lo + draw_rng.uniform_int(range.hi - range.lo + 1);
      const PeriodSpec spec = make_period_spec(anchor_t, delta, steps, ds.config.frames, hp.anchor_alignment,
                                               synchronous);
      PeriodInputs inputs = materialize_period(ds, vid, anchor_stream, spec);

      std::vector<ClassGroupSet> groups;
      if (mode_uses_c2f(mode) && grouping != GroupingMode::none) {
        for (int t = 0; t < steps; ++t) {
          groups.push_back(grouping == GroupingMode::adaptive
                               ? form_groups(*seq_grouper, inputs.sequence[static_cast<std::size_t>(t)], inputs.label,
                                             sizes, hp.group_inclusion)
                               : gt_only_groups(granularities, inputs.label));
        }
        groups.push_back(grouping == GroupingMode::adaptive
                             ? form_groups(*anchor_grouper, inputs.anchor, inputs.label, sizes, hp.group_inclusion)
                             : gt_only_groups(granularities, inputs.label));
      }

      Tape tape;
      double sample_loss = 0.0;
      JointLossBreakdown parts;
      {
        TapeScope scope(tape);
        parts = joint_loss(model, inputs, groups, hp, cfg.stop_fusion_gradient);
        Tensor scaled = ops::scale(parts.total, 1.0 / cfg.batch_size);
        sample_loss = scaled.value();
        tape.backward(scaled);
      }
      batch_loss += sample_loss;
      batch_seq += parts.sequence_stream / cfg.batch_size;
      batch_anchor += parts.anchor_stream / cfg.batch_size;
      batch_fusion += parts.fusion / cfg.batch_size;
      batch_desc.push_back(json{{"video", vid}, {"anchor_time", anchor_t}, {"loss", sample_loss}});
    }
    if (!std::isfinite(batch_loss)) abort_on_nan(out_dir, it, batch_desc);
    opt.step(lr);
    opt.zero_grad();

    json record{{"iteration", it},
                {"lr", lr},
                {"loss", batch_loss},
                {"loss_sequence", batch_seq},
                {"loss_anchor", batch_anchor},
                {"loss_fusion", batch_fusion}};
    if (cfg.eval_interval > 0 && (it % cfg.eval_interval == 0 || it == cfg.max_iterations)) {
      record["eval_accuracy"] = quick_eval_joint(model, ds, hp, delta, synchronous, cfg.eval_videos, cfg.eval_periods);
    }
    log.write(record);
  }

  if (!out_dir.empty()) save_checkpoint(out_dir / "model.ckpt", ckpt_fingerprint, model.named_params());
  return model;
}

}  // namespace c2f
