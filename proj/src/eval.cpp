#include "c2f/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>

#include <json.hpp>

#include "c2f/checkpoint.hpp"

namespace c2f {

using nlohmann::json;

namespace {

struct VideoOutcome {
  int prediction = 0;
  std::vector<std::vector<double>> period_scores;
};

EvalReport build_report(const data::Dataset& ds, const std::vector<VideoOutcome>& outcomes, int trace_videos) {
  EvalReport report;
  const int n_classes = ds.config.num_classes;
  report.confusion.assign(static_cast<std::size_t>(n_classes), std::vector<int>(static_cast<std::size_t>(n_classes), 0));
  for (std::size_t i = 0; i < ds.test_indices.size(); ++i) {
    const int vid = ds.test_indices[i];
    const int label = ds.videos[static_cast<std::size_t>(vid)].label;
    const int pred = outcomes[i].prediction;
    report.confusion[static_cast<std::size_t>(label)][static_cast<std::size_t>(pred)]++;
    report.correct += (pred == label) ? 1 : 0;
    report.total += 1;
    if (static_cast<int>(report.traces.size()) < trace_videos) {
      report.traces.push_back({vid, label, outcomes[i].period_scores});
    }
  }
  report.accuracy = report.total > 0 ? static_cast<double>(report.correct) / report.total : 0.0;
  return report;
}

}  // namespace

void EvalReport::save(const std::filesystem::path& path) const {
  json j;
  j["schema_version"] = 1;
  j["accuracy"] = accuracy;
  j["correct"] = correct;
  j["total"] = total;
  j["confusion"] = confusion;
  j["config_fingerprint"] = config_fingerprint;
  j["seeds"] = seeds;
  json traces_j = json::array();
  for (const Trace& t : traces) {
    traces_j.push_back(json{{"video", t.video}, {"label", t.label}, {"period_scores", t.period_scores}});
  }
  j["traces"] = std::move(traces_j);
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write eval report: " + path.string());
  os << j.dump(2) << "\n";
}

EvalReport evaluate_stream_models(const std::vector<const StreamModel*>& models, const data::Dataset& ds,
                                  const EvalOptions& opts) {
  if (models.empty()) throw std::invalid_argument("evaluate_stream_models: no models");
  const int n_classes = ds.config.num_classes;
  const std::vector<int> times =
      eval_anchor_positions(ds.config.frames, 0, 1, AnchorAlignment::center, opts.periods_per_video);
  const int n = static_cast<int>(ds.test_indices.size());
  std::vector<VideoOutcome> outcomes(static_cast<std::size_t>(n));

#pragma omp parallel for schedule(dynamic) if (n > 1)
  for (int i = 0; i < n; ++i) {
    const int vid = ds.test_indices[static_cast<std::size_t>(i)];
    VideoOutcome& out = outcomes[static_cast<std::size_t>(i)];
    std::vector<double> scores(static_cast<std::size_t>(n_classes), 0.0);
    for (int t : times) {
      std::vector<double> at_t(static_cast<std::size_t>(n_classes), 0.0);
      for (const StreamModel* m : models) {
        const std::vector<double> p = m->class_scores(ds.frame(vid, m->stream, t));
        for (std::size_t c = 0; c < at_t.size(); ++c) at_t[c] += p[c];
      }
      for (std::size_t c = 0; c < scores.size(); ++c) scores[c] += at_t[c];
      out.period_scores.push_back(std::move(at_t));
    }
    out.prediction = static_cast<int>(std::max_element(scores.begin(), scores.end()) - scores.begin());
  }
  return build_report(ds, outcomes, opts.trace_videos);
}

EvalReport evaluate_joint_models(const std::vector<const JointModel*>& models, const data::Dataset& ds,
                                 const ModelConfig& hp, int delta, bool synchronous, const EvalOptions& opts) {
  if (models.empty()) throw std::invalid_argument("evaluate_joint_models: no models");
  const int n_classes = ds.config.num_classes;
  for (const JointModel* m : models) {
    if (m->fusion.config().num_classes != n_classes) {
      throw std::invalid_argument("evaluate_joint_models: model/dataset class counts differ");
    }
  }
  const int steps = models.front()->fusion.config().steps;
  const std::vector<int> anchors =
      eval_anchor_positions(ds.config.frames, delta, steps, hp.anchor_alignment, opts.periods_per_video);
  const int n = static_cast<int>(ds.test_indices.size());
  std::vector<VideoOutcome> outcomes(static_cast<std::size_t>(n));

#pragma omp parallel for schedule(dynamic) if (n > 1)
  for (int i = 0; i < n; ++i) {
    const int vid = ds.test_indices[static_cast<std::size_t>(i)];
    VideoOutcome& out = outcomes[static_cast<std::size_t>(i)];
    std::vector<double> scores(static_cast<std::size_t>(n_classes), 0.0);
    for (int a : anchors) {
      std::vector<double> at_a(static_cast<std::size_t>(n_classes), 0.0);
      for (const JointModel* m : models) {
        const PeriodSpec spec =
            make_period_spec(a, delta, steps, ds.config.frames, hp.anchor_alignment, synchronous);
        const std::vector<double> p = joint_period_scores(*m, materialize_period(ds, vid, m->anchor_stream, spec));
        at_a = add_scores(at_a, p);
      }
      for (std::size_t c = 0; c < scores.size(); ++c) scores[c] += at_a[c];
      out.period_scores.push_back(std::move(at_a));
    }
    out.prediction = static_cast<int>(std::max_element(scores.begin(), scores.end()) - scores.begin());
  }
  return build_report(ds, outcomes, opts.trace_videos);
}

namespace {

std::string fmt(double v) {
  if (v < 0.0) return "";  // not applicable
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

json cell_to_json(const CellResult& c) {
  return json{{"mode", c.mode},
              {"seed", c.seed},
              {"acc_stream1", c.acc_stream1},
              {"acc_stream2", c.acc_stream2},
              {"acc_combined", c.acc_combined}};
}

CellResult cell_from_json(const json& j) {
  CellResult c;
  c.mode = j.at("mode").get<std::string>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.acc_stream1 = j.at("acc_stream1").get<double>();
  c.acc_stream2 = j.at("acc_stream2").get<double>();
  c.acc_combined = j.at("acc_combined").get<double>();
  return c;
}

struct SeedGroupers {
  GrouperModel s1, s2;
  bool ready = false;
};

}  // namespace

std::string grid_csv(const std::vector<CellResult>& cells, const std::vector<std::string>& mode_order,
                     const std::vector<std::uint64_t>& seed_order) {
  std::string csv = "mode,seed,acc_stream1,acc_stream2,acc_combined\n";
  auto find_cell = [&](const std::string& mode, std::uint64_t seed) -> const CellResult* {
    for (const CellResult& c : cells) {
      if (c.mode == mode && c.seed == seed) return &c;
    }
    return nullptr;
  };
  for (const std::string& mode : mode_order) {
    for (std::uint64_t seed : seed_order) {
      const CellResult* c = find_cell(mode, seed);
      if (c == nullptr) continue;
      csv += c->mode + "," + std::to_string(c->seed) + "," + fmt(c->acc_stream1) + "," + fmt(c->acc_stream2) + "," +
             fmt(c->acc_combined) + "\n";
    }
  }
  // Aggregates: mean and sample-free std over the seeds of each mode.
  for (const std::string& mode : mode_order) {
    std::vector<const CellResult*> rows;
    for (std::uint64_t seed : seed_order) {
      if (const CellResult* c = find_cell(mode, seed)) rows.push_back(c);
    }
    if (rows.empty()) continue;
    auto agg = [&](auto getter) {
      double mean = 0.0, sq = 0.0;
      int n = 0;
      for (const CellResult* c : rows) {
        const double v = getter(*c);
        if (v < 0.0) return std::pair<double, double>{-1.0, -1.0};
        mean += v;
        ++n;
      }
      mean /= n;
      for (const CellResult* c : rows) sq += (getter(*c) - mean) * (getter(*c) - mean);
      return std::pair<double, double>{mean, std::sqrt(sq / n)};
    };
    const auto [m1, s1] = agg([](const CellResult& c) { return c.acc_stream1; });
    const auto [m2, s2] = agg([](const CellResult& c) { return c.acc_stream2; });
    const auto [mc, sc] = agg([](const CellResult& c) { return c.acc_combined; });
    csv += mode + ",mean," + fmt(m1) + "," + fmt(m2) + "," + fmt(mc) + "\n";
    csv += mode + ",std," + fmt(s1) + "," + fmt(s2) + "," + fmt(sc) + "\n";
  }
  return csv;
}

AblateResult run_ablation_grid(const data::Dataset& ds, const AblateOptions& opts,
                               const std::filesystem::path& out_dir) {
  AblateResult result;
  std::filesystem::create_directories(out_dir);

  std::vector<std::string> known_modes;
  for (const std::string& name : opts.modes) {
    bool ok = true;
    try {
      parse_mode(name);
    } catch (const std::invalid_argument&) {
      ok = false;
    }
    (ok ? known_modes : result.unknown_modes).push_back(name);
  }

  GrouperConfig grouper_cfg = opts.grouper;
  grouper_cfg.in_channels = ds.config.channels;
  grouper_cfg.height = ds.config.height;
  grouper_cfg.width = ds.config.width;
  grouper_cfg.num_classes = ds.config.num_classes;

  std::map<std::uint64_t, SeedGroupers> groupers;
  auto groupers_for_seed = [&](std::uint64_t seed) -> SeedGroupers& {
    SeedGroupers& g = groupers[seed];
    if (!g.ready) {
      g.s1 = pretrain_grouper(ds, 1, opts.grouper_fraction, opts.grouper_iterations, seed, grouper_cfg).model;
      g.s2 = pretrain_grouper(ds, 2, opts.grouper_fraction, opts.grouper_iterations, seed, grouper_cfg).model;
      g.ready = true;
    }
    return g;
  };

  for (const std::string& mode_str : known_modes) {
    const Mode mode = parse_mode(mode_str);
    for (std::uint64_t seed : opts.seeds) {
      const std::filesystem::path cell_dir = out_dir / "cells" / mode_str / ("s" + std::to_string(seed));
      const std::filesystem::path marker = cell_dir / "result.json";
      if (std::filesystem::exists(marker)) {
        std::ifstream is(marker);
        result.cells.push_back(cell_from_json(json::parse(is)));
        continue;
      }
      std::filesystem::create_directories(cell_dir);

      TrainConfig cfg = opts.train;
      cfg.seed = seed;
      CellResult cell;
      cell.mode = mode_str;
      cell.seed = seed;

      if (!mode_uses_fusion(mode)) {
        const GrouperModel* g1 = nullptr;
        const GrouperModel* g2 = nullptr;
        if (mode_grouping(mode) == GroupingMode::adaptive) {
          SeedGroupers& g = groupers_for_seed(seed);
          g1 = &g.s1;
          g2 = &g.s2;
        }
        StreamModel m1 = train_stream_model(ds, 1, mode, opts.model, cfg, g1, cell_dir / "stream1", seed);
        StreamModel m2 = train_stream_model(ds, 2, mode, opts.model, cfg, g2, cell_dir / "stream2", seed);
        cell.acc_stream1 = evaluate_stream_models({&m1}, ds, opts.eval).accuracy;
        cell.acc_stream2 = evaluate_stream_models({&m2}, ds, opts.eval).accuracy;
        cell.acc_combined = evaluate_stream_models({&m1, &m2}, ds, opts.eval).accuracy;
      } else {
        GrouperPair pair;
        if (mode_grouping(mode) == GroupingMode::adaptive) {
          SeedGroupers& g = groupers_for_seed(seed);
          pair.s1 = &g.s1;
          pair.s2 = &g.s2;
        }
        const int delta = mode_delta(mode, cfg.delta);
        const bool synchronous = mode_synchronous(mode);
        std::vector<JointModel> trained;
        trained.push_back(
            train_joint_model(ds, mode, 2, opts.model, cfg, pair, cell_dir / "anchor_s2", seed));
        if (mode == Mode::c2f_asyn5 && opts.joint_both_directions) {
          TrainConfig cfg_b = cfg;
          cfg_b.seed = Rng(seed).fork(99).next();
          trained.push_back(
              train_joint_model(ds, mode, 1, opts.model, cfg_b, pair, cell_dir / "anchor_s1", seed));
        }
        std::vector<const JointModel*> model_ptrs;
        for (const JointModel& m : trained) model_ptrs.push_back(&m);
        cell.acc_combined = evaluate_joint_models(model_ptrs, ds, opts.model, delta, synchronous, opts.eval).accuracy;
      }

      std::ofstream os(marker, std::ios::trunc);
      os << cell_to_json(cell).dump(2) << "\n";
      result.cells.push_back(cell);
    }
  }

  result.csv = grid_csv(result.cells, known_modes, opts.seeds);
  std::ofstream csv_os(out_dir / "grid.csv", std::ios::trunc);
  if (!csv_os) throw std::runtime_error("cannot write grid csv in " + out_dir.string());
  csv_os << result.csv;
  return result;
}

}  // namespace c2f
