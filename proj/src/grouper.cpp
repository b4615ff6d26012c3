#include "c2f/grouper.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "c2f/tape.hpp"

namespace c2f {

GrouperModel GrouperModel::create(const GrouperConfig& cfg, Rng& rng) {
  GrouperModel m;
  m.cfg_ = cfg;
  m.conv1_ = nn::ConvParams::create(cfg.conv1_channels, cfg.in_channels, 3, 1, 1, rng);
  m.conv2_ = nn::ConvParams::create(cfg.conv2_channels, cfg.conv1_channels, 3, 1, 1, rng);
  const int flat = cfg.conv2_channels * (cfg.height / 4) * (cfg.width / 4);
  m.head_ = nn::FcParams::create(cfg.num_classes, flat, rng);
  return m;
}

Tensor GrouperModel::logits(const Tensor& frame) const {
  Tensor a = ops::maxpool2x2(ops::relu(nn::conv(conv1_, frame)));
  Tensor b = ops::maxpool2x2(ops::relu(nn::conv(conv2_, a)));
  return nn::fc(head_, ops::flatten(b));
}

std::vector<double> GrouperModel::probabilities(const Tensor& frame) const {
  Tensor p = ops::softmax(logits(frame));
  return {p.data(), p.data() + p.size()};
}

void GrouperModel::freeze() {
  nn::set_requires_grad(named_params(), false);
  frozen_ = true;
}

nn::NamedParams GrouperModel::named_params() const {
  nn::NamedParams out;
  nn::append_params(out, "conv1", conv1_.named(""));
  nn::append_params(out, "conv2", conv2_.named(""));
  nn::append_params(out, "head", head_.named(""));
  return out;
}

std::vector<int> group_sizes_for(int granularities, int num_classes) {
  static constexpr int kBase[3] = {5, 3, 1};
  if (granularities < 1 || granularities > 3) {
    throw std::invalid_argument("group_sizes_for: granularities must be 1..3");
  }
  std::vector<int> sizes;
  for (int k = 3 - granularities; k < 3; ++k) sizes.push_back(std::min(kBase[k], num_classes));
  return sizes;
}

ClassGroupSet form_groups_from_probs(std::span<const double> probs, int gt_label, std::span<const int> sizes,
                                     GroupInclusion inclusion) {
  const int n = static_cast<int>(probs.size());
  if (gt_label < 0 || gt_label >= n) throw std::invalid_argument("form_groups: ground-truth label out of range");
  if (sizes.empty()) throw std::invalid_argument("form_groups: no group sizes");

  // Rank by probability, lower class index first on ties.
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (probs[static_cast<std::size_t>(a)] != probs[static_cast<std::size_t>(b)]) {
      return probs[static_cast<std::size_t>(a)] > probs[static_cast<std::size_t>(b)];
    }
    return a < b;
  });

  ClassGroupSet set;
  for (int size : sizes) {
    if (size < 1 || size > n) throw std::invalid_argument("form_groups: group size out of range");
    std::vector<int> group(order.begin(), order.begin() + size);
    if (std::find(group.begin(), group.end(), gt_label) == group.end()) {
      if (inclusion == GroupInclusion::replace_lowest) {
        group.back() = gt_label;
      } else {
        group.push_back(gt_label);
      }
    }
    std::sort(group.begin(), group.end());
    set.groups.push_back(std::move(group));
  }
  return set;
}

ClassGroupSet form_groups(const GrouperModel& grouper, const Tensor& input, int gt_label,
                          std::span<const int> sizes, GroupInclusion inclusion) {
  if (!grouper.frozen()) {
    throw std::invalid_argument("form_groups: grouper must be frozen so groups stay stable across training");
  }
  const std::vector<double> probs = grouper.probabilities(input);
  return form_groups_from_probs(probs, gt_label, sizes, inclusion);
}

namespace {

// All videos of the fraction subset, per class, from the train split.
std::vector<int> sample_fraction(const data::Dataset& ds, double fraction, Rng& rng) {
  const int n_classes = ds.config.num_classes;
  std::vector<std::vector<int>> per_class(static_cast<std::size_t>(n_classes));
  for (int idx : ds.train_indices) {
    per_class[static_cast<std::size_t>(ds.videos[static_cast<std::size_t>(idx)].label)].push_back(idx);
  }
  std::vector<int> subset;
  for (auto& cls : per_class) {
    rng.shuffle(cls);
    const int take = static_cast<int>(std::floor(fraction * static_cast<double>(cls.size())));
    for (int i = 0; i < take; ++i) subset.push_back(cls[static_cast<std::size_t>(i)]);
  }
  std::sort(subset.begin(), subset.end());
  return subset;
}

int window_frame(const data::Video& v, int stream, int width, Rng& rng) {
  const int onset = (stream == 1) ? v.onset1 : v.onset2;
  return onset + rng.uniform_int(width);
}

}  // namespace

GrouperPretrainResult pretrain_grouper(const data::Dataset& ds, int stream, double fraction, int iterations,
                                       std::uint64_t seed, const GrouperConfig& cfg) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw std::invalid_argument("pretrain_grouper: fraction must be in (0,1]");
  if (iterations <= 0) throw std::invalid_argument("pretrain_grouper: iterations must be positive");

  Rng master(seed);
  Rng init_rng = master.fork(1);
  Rng subset_rng = master.fork(2);
  Rng draw_rng = master.fork(3);

  const std::vector<int> subset = sample_fraction(ds, fraction, subset_rng);
  if (subset.empty()) throw std::invalid_argument("pretrain_grouper: sampled training subset is empty");

  GrouperModel model = GrouperModel::create(cfg, init_rng);
  nn::SgdMomentum opt(nn::param_tensors(model.named_params()), cfg.momentum);

  const int batch = cfg.batch;
  for (int it = 0; it < iterations; ++it) {
    for (int b = 0; b < batch; ++b) {
      const int vid = subset[static_cast<std::size_t>(draw_rng.uniform_int(static_cast<int>(subset.size())))];
      const data::Video& v = ds.videos[static_cast<std::size_t>(vid)];
      const int t = (draw_rng.uniform01() < cfg.window_bias)
                        ? window_frame(v, stream, ds.config.signature_width, draw_rng)
                        : draw_rng.uniform_int(ds.config.frames);
      Tensor input = ds.frame(vid, stream, t);
      std::vector<int> target{v.label};
      Tape tape;
      TapeScope scope(tape);
      Tensor loss = ops::scale(ops::softmax_cross_entropy(model.logits(input), target, 1.0), 1.0 / batch);
      tape.backward(loss);
    }
    opt.step(cfg.lr);
    opt.zero_grad();
  }

  // Accuracy on the window frames of the trained fraction.
  int correct = 0, total = 0;
  for (int vid : subset) {
    const data::Video& v = ds.videos[static_cast<std::size_t>(vid)];
    const int onset = (stream == 1) ? v.onset1 : v.onset2;
    for (int t = onset; t < onset + ds.config.signature_width; ++t) {
      const std::vector<double> p = model.probabilities(ds.frame(vid, stream, t));
      const int pred = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
      correct += (pred == v.label) ? 1 : 0;
      ++total;
    }
  }
  const double accuracy = static_cast<double>(correct) / static_cast<double>(total);
  const double chance = 1.0 / static_cast<double>(ds.config.num_classes);
  if (accuracy < 2.0 * chance) {
    throw std::runtime_error("pretrain_grouper: training accuracy " + std::to_string(accuracy) +
                             " is below twice chance (" + std::to_string(2.0 * chance) +
                             "); increase iterations or the data fraction");
  }

  model.freeze();
  return {std::move(model), accuracy};
}

}  // namespace c2f
