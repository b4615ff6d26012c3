#include <algorithm>
#include <set>

#include "c2f/grouper.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace c2f;
using c2f::testing::randn;

namespace {
std::vector<int> sizes531(int n) { return group_sizes_for(3, n); }
}  // namespace

TEST_CASE("group sizes clamp to the class count") {
  CHECK(group_sizes_for(3, 8) == std::vector<int>{5, 3, 1});
  CHECK(group_sizes_for(3, 3) == std::vector<int>{3, 3, 1});
  CHECK(group_sizes_for(2, 8) == std::vector<int>{3, 1});
  CHECK(group_sizes_for(1, 8) == std::vector<int>{1});
  CHECK_THROWS_AS(group_sizes_for(4, 8), std::invalid_argument);
}

TEST_CASE("form_groups_from_probs: direct top-k when gt leads") {
  const std::vector<double> probs{0.4, 0.2, 0.15, 0.1, 0.1, 0.05};
  ClassGroupSet g = form_groups_from_probs(probs, 0, sizes531(6), GroupInclusion::replace_lowest);
  CHECK(g.groups[0] == std::vector<int>{0, 1, 2, 3, 4});
  CHECK(g.groups[1] == std::vector<int>{0, 1, 2});
  CHECK(g.groups[2] == std::vector<int>{0});
}

TEST_CASE("form_groups_from_probs: mandatory inclusion replaces the lowest-ranked member") {
  const std::vector<double> probs{0.4, 0.2, 0.15, 0.1, 0.1, 0.05};
  ClassGroupSet g = form_groups_from_probs(probs, 5, sizes531(6), GroupInclusion::replace_lowest);
  CHECK(g.groups[2] == std::vector<int>{5});
  CHECK(g.groups[1] == std::vector<int>{0, 1, 5});
  CHECK(g.groups[0] == std::vector<int>{0, 1, 2, 3, 5});
}

TEST_CASE("form_groups_from_probs: append mode grows the group") {
  const std::vector<double> probs{0.4, 0.2, 0.15, 0.1, 0.1, 0.05};
  ClassGroupSet g = form_groups_from_probs(probs, 5, sizes531(6), GroupInclusion::append);
  CHECK(g.groups[2] == std::vector<int>{0, 5});
  CHECK(g.groups[1] == std::vector<int>{0, 1, 2, 5});
  CHECK(g.groups[0] == std::vector<int>{0, 1, 2, 3, 4, 5});
}

TEST_CASE("form_groups_from_probs: ties rank the lower class index first") {
  const std::vector<double> probs{0.25, 0.25, 0.25, 0.25};
  ClassGroupSet g = form_groups_from_probs(probs, 3, group_sizes_for(3, 4), GroupInclusion::replace_lowest);
  CHECK(g.groups[1] == std::vector<int>{0, 1, 3});  // {0,1,2} with 2 (lowest-ranked) replaced
  CHECK(g.groups[2] == std::vector<int>{3});
  CHECK_THROWS_AS(form_groups_from_probs(probs, 4, group_sizes_for(3, 4), GroupInclusion::replace_lowest),
                  std::invalid_argument);
}

TEST_CASE("ground truth lands in every group over random draws") {
  Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + rng.uniform_int(9);
    std::vector<double> probs(static_cast<std::size_t>(n));
    double z = 0;
    for (double& p : probs) {
      p = rng.uniform01();
      z += p;
    }
    for (double& p : probs) p /= z;
    const int gt = rng.uniform_int(n);
    const auto sizes = sizes531(n);
    ClassGroupSet g = form_groups_from_probs(probs, gt, sizes, GroupInclusion::replace_lowest);
    for (std::size_t k = 0; k < g.groups.size(); ++k) {
      CHECK(static_cast<int>(g.groups[k].size()) == sizes[k]);
      CHECK(std::binary_search(g.groups[k].begin(), g.groups[k].end(), gt));
      // groups are sets
      std::set<int> uniq(g.groups[k].begin(), g.groups[k].end());
      CHECK(uniq.size() == g.groups[k].size());
    }
  }
}

namespace {
data::SyntheticConfig grouper_data_config() {
  data::SyntheticConfig cfg;
  cfg.num_classes = 6;
  cfg.videos_per_class = 10;
  cfg.frames = 20;
  cfg.channels = 2;
  cfg.height = 16;
  cfg.width = 16;
  cfg.lag = 3;
  cfg.signature_width = 4;
  cfg.signature_size = 8;
  cfg.noise_sigma = 0.3;
  cfg.confusable_pairs = {{0, 1}, {2, 3}};
  cfg.seed = 11;
  return cfg;
}

GrouperConfig grouper_model_config(const data::SyntheticConfig& d) {
  GrouperConfig g;
  g.in_channels = d.channels;
  g.height = d.height;
  g.width = d.width;
  g.num_classes = d.num_classes;
  g.conv1_channels = 6;
  g.conv2_channels = 8;
  return g;
}
}  // namespace

TEST_CASE("unfrozen grouper is rejected; frozen grouper is deterministic") {
  const auto dcfg = grouper_data_config();
  data::Dataset ds = data::generate_dataset(dcfg);
  Rng rng(3);
  GrouperModel raw = GrouperModel::create(grouper_model_config(dcfg), rng);
  Tensor input = ds.frame(0, 1, ds.videos[0].onset1);
  CHECK_THROWS_AS(form_groups(raw, input, 0, sizes531(6), GroupInclusion::replace_lowest), std::invalid_argument);

  raw.freeze();
  CHECK(raw.frozen());
  ClassGroupSet a = form_groups(raw, input, 0, sizes531(6), GroupInclusion::replace_lowest);
  ClassGroupSet b = form_groups(raw, input, 0, sizes531(6), GroupInclusion::replace_lowest);
  CHECK(a.groups == b.groups);
}

TEST_CASE("pretraining clears twice chance, freezes, and keeps determinism") {
  const auto dcfg = grouper_data_config();
  data::Dataset ds = data::generate_dataset(dcfg);
  GrouperPretrainResult r1 = pretrain_grouper(ds, 1, 0.5, 150, 99, grouper_model_config(dcfg));
  CHECK(r1.model.frozen());
  CHECK(r1.train_accuracy >= 2.0 / dcfg.num_classes);

  GrouperPretrainResult r2 = pretrain_grouper(ds, 1, 0.5, 150, 99, grouper_model_config(dcfg));
  const auto p1 = r1.model.named_params(), p2 = r2.model.named_params();
  REQUIRE(p1.size() == p2.size());
  for (std::size_t i = 0; i < p1.size(); ++i) {
    for (std::int64_t j = 0; j < p1[i].second.size(); ++j) {
      CHECK(p1[i].second.data()[j] == p2[i].second.data()[j]);
    }
  }

  CHECK_THROWS_AS(pretrain_grouper(ds, 1, 0.0, 10, 1, grouper_model_config(dcfg)), std::invalid_argument);
  CHECK_THROWS_AS(pretrain_grouper(ds, 1, 0.5, 0, 1, grouper_model_config(dcfg)), std::invalid_argument);
  // A fraction below one video per class leaves the subset empty.
  CHECK_THROWS_AS(pretrain_grouper(ds, 1, 0.01, 10, 1, grouper_model_config(dcfg)), std::invalid_argument);
}

TEST_CASE("separable two-class toy reaches near-perfect grouper accuracy") {
  data::SyntheticConfig dcfg;
  dcfg.num_classes = 2;
  dcfg.videos_per_class = 8;
  dcfg.frames = 16;
  dcfg.channels = 1;
  dcfg.height = 16;
  dcfg.width = 16;
  dcfg.lag = 2;
  dcfg.signature_width = 4;
  dcfg.signature_size = 10;
  dcfg.noise_sigma = 0.05;
  dcfg.confusable_pairs = {};
  dcfg.seed = 21;
  data::Dataset ds = data::generate_dataset(dcfg);
  GrouperPretrainResult r = pretrain_grouper(ds, 1, 1.0, 200, 4, grouper_model_config(dcfg));
  CHECK(r.train_accuracy >= 0.95);
}

TEST_CASE("same-class inputs produce more similar groups than disjoint-signature classes") {
  const auto dcfg = grouper_data_config();
  data::Dataset ds = data::generate_dataset(dcfg);
  GrouperPretrainResult r = pretrain_grouper(ds, 1, 1.0, 300, 7, grouper_model_config(dcfg));

  auto group_for = [&](int vid, int t) {
    const auto& v = ds.videos[static_cast<std::size_t>(vid)];
    return form_groups(r.model, ds.frame(vid, 1, t), v.label, sizes531(dcfg.num_classes),
                       GroupInclusion::replace_lowest);
  };
  auto jaccard = [](const std::vector<int>& a, const std::vector<int>& b) {
    std::vector<int> inter, uni;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(inter));
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(uni));
    return static_cast<double>(inter.size()) / static_cast<double>(uni.size());
  };

  // Classes 4 and 5 share no signature with anyone.
  double same = 0.0, cross = 0.0;
  int n_same = 0, n_cross = 0;
  for (int rep = 0; rep < 6; ++rep) {
    for (int cls : {4, 5}) {
      const int v1 = cls * dcfg.videos_per_class + rep;
      const int v2 = cls * dcfg.videos_per_class + rep + 1;
      const auto g1 = group_for(v1, ds.videos[static_cast<std::size_t>(v1)].onset1 + 1);
      const auto g2 = group_for(v2, ds.videos[static_cast<std::size_t>(v2)].onset1 + 1);
      for (std::size_t k = 0; k < g1.groups.size(); ++k) same += jaccard(g1.groups[k], g2.groups[k]);
      ++n_same;
    }
    const int v4 = 4 * dcfg.videos_per_class + rep;
    const int v5 = 5 * dcfg.videos_per_class + rep;
    const auto g4 = group_for(v4, ds.videos[static_cast<std::size_t>(v4)].onset1 + 1);
    const auto g5 = group_for(v5, ds.videos[static_cast<std::size_t>(v5)].onset1 + 1);
    for (std::size_t k = 0; k < g4.groups.size(); ++k) cross += jaccard(g4.groups[k], g5.groups[k]);
    ++n_cross;
  }
  same /= n_same;
  cross /= n_cross;
  MESSAGE("mean jaccard same-class ", same, " vs disjoint-signature ", cross);
  CHECK(same >= cross);
}
