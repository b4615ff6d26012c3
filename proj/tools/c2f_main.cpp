// Command-line entry point: dataset generation, grouper pretraining,
// training, evaluation, the ablation grid, and report rendering.
//
// Exit codes: 0 success, 1 usage error, 2 runtime failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "c2f/checkpoint.hpp"
#include "c2f/config.hpp"
#include "c2f/eval.hpp"
#include "c2f/kernels.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace c2f;

namespace {

struct CommonArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
};

FullConfig load_config(const CommonArgs& args) {
  FullConfig cfg = args.config_path.empty() ? default_config() : load_config_file(args.config_path);
  if (args.seed) {
    cfg.data.seed = *args.seed;
    cfg.train.seed = *args.seed;
  }
  return cfg;
}

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "JSON config file (defaults apply when omitted)");
  cmd->add_option("--seed", args.seed, "Override the data and training seeds");
  cmd->add_option("--out-dir", args.out_dir, "Output directory");
}

GrouperConfig grouper_config_of(const FullConfig& cfg) { return make_grouper_config(cfg.data, cfg.grouper); }

nn::NamedParams grouper_pair_params(const GrouperModel& g1, const GrouperModel& g2) {
  nn::NamedParams out;
  nn::append_params(out, "s1.", g1.named_params());
  nn::append_params(out, "s2.", g2.named_params());
  return out;
}

std::pair<GrouperModel, GrouperModel> load_grouper_pair(const fs::path& path, const FullConfig& cfg) {
  Rng rng(0);
  GrouperModel g1 = GrouperModel::create(grouper_config_of(cfg), rng);
  GrouperModel g2 = GrouperModel::create(grouper_config_of(cfg), rng);
  load_checkpoint(path, arch_fingerprint(cfg, "grouper"), grouper_pair_params(g1, g2));
  g1.freeze();
  g2.freeze();
  return {std::move(g1), std::move(g2)};
}

StreamModel stream_model_shell(Mode mode, const FullConfig& cfg, int stream) {
  Rng rng(0);
  StreamModel m;
  m.mode = mode;
  m.stream = stream;
  if (mode_uses_c2f(mode)) {
    m.c2f = C2fModel::create(make_c2f_config(cfg.data, cfg.model, mode_granularities(mode)), rng);
  } else {
    m.base = BaselineModel::create(make_baseline_config(cfg.data, cfg.model), rng);
  }
  return m;
}

JointModel joint_model_shell(Mode mode, const FullConfig& cfg, int anchor_stream) {
  Rng rng(0);
  JointModel m;
  m.mode = mode;
  m.anchor_stream = anchor_stream;
  if (mode_uses_c2f(mode)) {
    m.seq_c2f = C2fModel::create(make_c2f_config(cfg.data, cfg.model, mode_granularities(mode)), rng);
    m.anchor_c2f = C2fModel::create(make_c2f_config(cfg.data, cfg.model, mode_granularities(mode)), rng);
  } else {
    m.seq_base = BaselineModel::create(make_baseline_config(cfg.data, cfg.model), rng);
    m.anchor_base = BaselineModel::create(make_baseline_config(cfg.data, cfg.model), rng);
  }
  m.fusion = AsyncFusionNet::create(make_fusion_config(cfg.data, cfg.model), rng);
  return m;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) seeds.push_back(std::stoull(tok));
  }
  if (seeds.empty()) throw std::invalid_argument("no seeds given");
  return seeds;
}

std::vector<std::string> parse_mode_list(const std::string& text) {
  std::vector<std::string> modes;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) modes.push_back(tok);
  }
  if (modes.empty()) throw std::invalid_argument("no modes given");
  return modes;
}

int cmd_gen_data(const CommonArgs& common) {
  FullConfig cfg = load_config(common);
  const fs::path out = common.out_dir.empty() ? fs::path("data") : fs::path(common.out_dir);
  data::Dataset ds = data::generate_dataset(cfg.data);
  data::save_dataset(ds, out);
  std::printf("generated %zu videos (%zu train / %zu test) in %s\n", ds.videos.size(), ds.train_indices.size(),
              ds.test_indices.size(), out.string().c_str());
  return 0;
}

int cmd_pretrain_grouper(const CommonArgs& common, const std::string& data_dir, const std::string& out_file,
                         std::optional<double> fraction, std::optional<int> iters) {
  FullConfig cfg = load_config(common);
  if (fraction) cfg.grouper.fraction = *fraction;
  if (iters) cfg.grouper.iterations = *iters;
  data::Dataset ds = data::load_dataset(data_dir);
  cfg.data = ds.config;

  const std::uint64_t seed = common.seed.value_or(cfg.train.seed);
  GrouperPretrainResult r1 = pretrain_grouper(ds, 1, cfg.grouper.fraction, cfg.grouper.iterations, seed,
                                              grouper_config_of(cfg));
  GrouperPretrainResult r2 = pretrain_grouper(ds, 2, cfg.grouper.fraction, cfg.grouper.iterations, seed,
                                              grouper_config_of(cfg));
  const fs::path out = out_file.empty() ? fs::path("grouper.ckpt") : fs::path(out_file);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_checkpoint(out, arch_fingerprint(cfg, "grouper"), grouper_pair_params(r1.model, r2.model));
  std::printf("grouper accuracies on the trained fraction: stream1 %.4f, stream2 %.4f -> %s\n", r1.train_accuracy,
              r2.train_accuracy, out.string().c_str());
  return 0;
}

int cmd_train(const CommonArgs& common, const std::string& data_dir, const std::string& grouper_path,
              const std::string& mode_str, const std::string& anchor_direction) {
  FullConfig cfg = load_config(common);
  data::Dataset ds = data::load_dataset(data_dir);
  cfg.data = ds.config;
  const Mode mode = parse_mode(mode_str.empty() ? cfg.train_mode : mode_str);
  const std::string direction = anchor_direction.empty() ? cfg.anchor_direction : anchor_direction;
  const fs::path out = common.out_dir.empty() ? fs::path("run") : fs::path(common.out_dir);
  fs::create_directories(out);

  std::optional<std::pair<GrouperModel, GrouperModel>> groupers;
  if (mode_grouping(mode) == GroupingMode::adaptive) {
    if (grouper_path.empty()) {
      throw std::invalid_argument("mode '" + mode_name(mode) + "' needs --grouper (run pretrain-grouper first)");
    }
    groupers = load_grouper_pair(grouper_path, cfg);
  }

  {
    std::ofstream cfg_out(out / "config.json", std::ios::trunc);
    cfg_out << config_to_json_text(cfg) << "\n";
  }

  if (!mode_uses_fusion(mode)) {
    const GrouperModel* g1 = groupers ? &groupers->first : nullptr;
    const GrouperModel* g2 = groupers ? &groupers->second : nullptr;
    StreamModel m1 = train_stream_model(ds, 1, mode, cfg.model, cfg.train, g1, out / "stream1",
                                        arch_fingerprint(cfg, "stream1/" + mode_name(mode)));
    StreamModel m2 = train_stream_model(ds, 2, mode, cfg.model, cfg.train, g2, out / "stream2",
                                        arch_fingerprint(cfg, "stream2/" + mode_name(mode)));
    EvalReport combined = evaluate_stream_models({&m1, &m2}, ds, cfg.eval);
    std::printf("trained %s (streams 1+2); two-stream test accuracy %.4f\n", mode_name(mode).c_str(),
                combined.accuracy);
    return 0;
  }

  GrouperPair pair;
  if (groupers) {
    pair.s1 = &groupers->first;
    pair.s2 = &groupers->second;
  }
  std::vector<JointModel> trained;
  if (direction == "s2" || direction == "both") {
    trained.push_back(train_joint_model(ds, mode, 2, cfg.model, cfg.train, pair, out / "anchor_s2",
                                        arch_fingerprint(cfg, "anchor_s2/" + mode_name(mode))));
  }
  if (direction == "s1" || direction == "both") {
    TrainConfig cfg_b = cfg.train;
    cfg_b.seed = Rng(cfg.train.seed).fork(99).next();
    trained.push_back(train_joint_model(ds, mode, 1, cfg.model, cfg_b, pair, out / "anchor_s1",
                                        arch_fingerprint(cfg, "anchor_s1/" + mode_name(mode))));
  }
  std::vector<const JointModel*> ptrs;
  for (const JointModel& m : trained) ptrs.push_back(&m);
  EvalReport report = evaluate_joint_models(ptrs, ds, cfg.model, mode_delta(mode, cfg.train.delta),
                                            mode_synchronous(mode), cfg.eval);
  std::printf("trained %s (%s); test accuracy %.4f\n", mode_name(mode).c_str(), direction.c_str(), report.accuracy);
  return 0;
}

int cmd_eval(const CommonArgs& common, const std::string& data_dir, const std::string& model_dir,
             const std::string& mode_str, const std::string& report_path) {
  FullConfig cfg = load_config(common);
  data::Dataset ds = data::load_dataset(data_dir);
  cfg.data = ds.config;
  const Mode mode = parse_mode(mode_str.empty() ? cfg.train_mode : mode_str);
  const fs::path dir(model_dir);

  EvalReport report;
  if (!mode_uses_fusion(mode)) {
    StreamModel m1 = stream_model_shell(mode, cfg, 1);
    StreamModel m2 = stream_model_shell(mode, cfg, 2);
    load_checkpoint(dir / "stream1" / "model.ckpt", arch_fingerprint(cfg, "stream1/" + mode_name(mode)),
                    m1.named_params());
    load_checkpoint(dir / "stream2" / "model.ckpt", arch_fingerprint(cfg, "stream2/" + mode_name(mode)),
                    m2.named_params());
    report = evaluate_stream_models({&m1, &m2}, ds, cfg.eval);
  } else {
    std::vector<JointModel> models;
    if (fs::exists(dir / "anchor_s2" / "model.ckpt")) {
      JointModel m = joint_model_shell(mode, cfg, 2);
      load_checkpoint(dir / "anchor_s2" / "model.ckpt", arch_fingerprint(cfg, "anchor_s2/" + mode_name(mode)),
                      m.named_params());
      models.push_back(std::move(m));
    }
    if (fs::exists(dir / "anchor_s1" / "model.ckpt")) {
      JointModel m = joint_model_shell(mode, cfg, 1);
      load_checkpoint(dir / "anchor_s1" / "model.ckpt", arch_fingerprint(cfg, "anchor_s1/" + mode_name(mode)),
                      m.named_params());
      models.push_back(std::move(m));
    }
    if (models.empty()) {
      throw std::runtime_error("no checkpoints found under " + dir.string() +
                               " (expected anchor_s2/model.ckpt or anchor_s1/model.ckpt)");
    }
    std::vector<const JointModel*> ptrs;
    for (const JointModel& m : models) ptrs.push_back(&m);
    report = evaluate_joint_models(ptrs, ds, cfg.model, mode_delta(mode, cfg.train.delta), mode_synchronous(mode),
                                   cfg.eval);
  }

  report.config_fingerprint = arch_fingerprint(cfg, mode_name(mode));
  report.seeds = {cfg.data.seed, cfg.train.seed};
  const fs::path rpt = report_path.empty() ? dir / "eval_report.json" : fs::path(report_path);
  if (rpt.has_parent_path()) fs::create_directories(rpt.parent_path());
  report.save(rpt);
  std::printf("%s test accuracy: %.4f (%d/%d) -> %s\n", mode_name(mode).c_str(), report.accuracy, report.correct,
              report.total, rpt.string().c_str());
  return 0;
}

int cmd_ablate(const CommonArgs& common, const std::string& data_dir, const std::string& modes_str,
               const std::string& seeds_str) {
  FullConfig cfg = load_config(common);
  data::Dataset ds = data::load_dataset(data_dir);
  cfg.data = ds.config;
  const fs::path out = common.out_dir.empty() ? fs::path("ablation") : fs::path(common.out_dir);

  AblateOptions opts;
  opts.modes = modes_str.empty() ? all_mode_names() : parse_mode_list(modes_str);
  opts.seeds = seeds_str.empty() ? std::vector<std::uint64_t>{1, 2, 3} : parse_seed_list(seeds_str);
  opts.model = cfg.model;
  opts.train = cfg.train;
  opts.eval = cfg.eval;
  opts.grouper = grouper_config_of(cfg);
  opts.grouper_fraction = cfg.grouper.fraction;
  opts.grouper_iterations = cfg.grouper.iterations;

  AblateResult result = run_ablation_grid(ds, opts, out);
  std::printf("%s", result.csv.c_str());
  std::printf("grid written to %s\n", (out / "grid.csv").string().c_str());
  if (!result.unknown_modes.empty()) {
    std::fprintf(stderr, "unknown modes skipped:");
    for (const std::string& m : result.unknown_modes) std::fprintf(stderr, " %s", m.c_str());
    std::fprintf(stderr, "\n");
    return 1;
  }
  return 0;
}

int cmd_report(const std::string& in_path, const std::string& out_path) {
  const fs::path in(in_path);
  std::ifstream is(in);
  if (!is) throw std::invalid_argument("report input not found: " + in.string());
  std::ostringstream rendered;

  if (in.extension() == ".csv") {
    std::string line;
    bool first = true;
    while (std::getline(is, line)) {
      std::stringstream ss(line);
      std::string cell;
      std::vector<std::string> cells;
      while (std::getline(ss, cell, ',')) cells.push_back(cell);
      rendered << "|";
      for (const std::string& c : cells) rendered << " " << (c.empty() ? "-" : c) << " |";
      rendered << "\n";
      if (first) {
        rendered << "|";
        for (std::size_t i = 0; i < cells.size(); ++i) rendered << " --- |";
        rendered << "\n";
        first = false;
      }
    }
  } else {
    json j = json::parse(is);
    rendered << "# Evaluation report\n\n";
    rendered << "- accuracy: " << j.at("accuracy").get<double>() << " (" << j.at("correct").get<int>() << "/"
             << j.at("total").get<int>() << ")\n";
    rendered << "- config fingerprint: " << j.at("config_fingerprint").get<std::uint64_t>() << "\n";
    rendered << "- seeds:";
    for (const auto& s : j.at("seeds")) rendered << " " << s.get<std::uint64_t>();
    rendered << "\n\n## Confusion matrix (rows = ground truth)\n\n";
    for (const auto& row : j.at("confusion")) {
      rendered << "|";
      for (const auto& v : row) rendered << " " << v.get<int>() << " |";
      rendered << "\n";
    }
  }

  if (out_path.empty()) {
    std::printf("%s", rendered.str().c_str());
  } else {
    std::ofstream os(out_path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write report to " + out_path);
    os << rendered.str();
    std::printf("report written to %s\n", out_path.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coarse-to-fine two-stream action recognition on synthetic videos"};
  app.require_subcommand(1);

  int threads = 0;
  std::string backend = "parallel";
  app.add_option("--threads", threads, "OpenMP thread count (0 = library default)");
  app.add_option("--backend", backend, "Kernel backend: parallel | serial")
      ->check(CLI::IsMember({"parallel", "serial"}));

  CommonArgs gen_args, pre_args, train_args, eval_args, ablate_args;
  std::string data_dir, grouper_out, grouper_path, mode_str, anchor_direction, model_dir, report_path;
  std::string modes_str, seeds_str, report_in, report_out;
  std::optional<double> fraction;
  std::optional<int> iters;

  CLI::App* gen = app.add_subcommand("gen-data", "Generate the synthetic two-stream dataset");
  add_common(gen, gen_args);

  CLI::App* pre = app.add_subcommand("pretrain-grouper", "Pretrain and freeze the class-group classifiers");
  add_common(pre, pre_args);
  pre->add_option("--data", data_dir, "Dataset directory")->required();
  pre->add_option("--fraction", fraction, "Fraction of training videos to use");
  pre->add_option("--iters", iters, "Training iterations");
  pre->add_option("--out", grouper_out, "Output checkpoint file");

  CLI::App* train = app.add_subcommand("train", "Train a mode's models");
  add_common(train, train_args);
  train->add_option("--data", data_dir, "Dataset directory")->required();
  train->add_option("--grouper", grouper_path, "Grouper checkpoint (needed by grouping modes)");
  train->add_option("--mode", mode_str, "Training mode (overrides config)");
  train->add_option("--anchor", anchor_direction, "Fusion anchor direction: s1 | s2 | both")
      ->check(CLI::IsMember({"s1", "s2", "both"}));

  CLI::App* evalc = app.add_subcommand("eval", "Evaluate trained checkpoints");
  add_common(evalc, eval_args);
  evalc->add_option("--data", data_dir, "Dataset directory")->required();
  evalc->add_option("--model-dir", model_dir, "Directory written by train")->required();
  evalc->add_option("--mode", mode_str, "Mode the checkpoints were trained with");
  evalc->add_option("--report", report_path, "Report JSON output path");

  CLI::App* ablate = app.add_subcommand("ablate", "Run the ablation grid");
  add_common(ablate, ablate_args);
  ablate->add_option("--data", data_dir, "Dataset directory")->required();
  ablate->add_option("--modes", modes_str, "Comma-separated mode list (default: all)");
  ablate->add_option("--seeds", seeds_str, "Comma-separated seed list (default: 1,2,3)");

  CLI::App* report = app.add_subcommand("report", "Render a grid CSV or eval report as markdown");
  report->add_option("--in", report_in, "grid.csv or eval_report.json")->required();
  report->add_option("--out", report_out, "Output file (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  kern::set_threads(threads);
  kern::set_backend(backend == "serial" ? kern::Backend::serial : kern::Backend::parallel);

  try {
    if (gen->parsed()) return cmd_gen_data(gen_args);
    if (pre->parsed()) return cmd_pretrain_grouper(pre_args, data_dir, grouper_out, fraction, iters);
    if (train->parsed()) return cmd_train(train_args, data_dir, grouper_path, mode_str, anchor_direction);
    if (evalc->parsed()) return cmd_eval(eval_args, data_dir, model_dir, mode_str, report_path);
    if (ablate->parsed()) return cmd_ablate(ablate_args, data_dir, modes_str, seeds_str);
    if (report->parsed()) return cmd_report(report_in, report_out);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
