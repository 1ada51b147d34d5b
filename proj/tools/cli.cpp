/* Copyright 2026 The parkdiff Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "parkdiff/checkpoint.hpp"
#include "parkdiff/error.hpp"
#include "parkdiff/scene_io.hpp"

namespace parkdiff::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  long long seed = -1;
  long long threads = -1;
};

struct Options {
  Common common;
  std::string data;
  std::string split;
  std::string ckpt;
  std::string init;
  std::string resume;
  std::string stage = "1";
  std::string kind;
  std::size_t checkpoint_every = 0;
  std::size_t sample = 0;
  bool ekf = false;
  bool oracle = false;
};

// Defaults, then the file, then PARKDIFF_SEED, then flags.
RunConfig resolve_config(const Common& c) {
  RunConfig cfg = c.config_path.empty() ? RunConfig{} : load_config(c.config_path);
  if (const char* env = std::getenv("PARKDIFF_SEED")) {
    try {
      std::size_t used = 0;
      cfg.seed = std::stoull(env, &used);
      if (used != std::string(env).size()) throw std::invalid_argument(env);
    } catch (const std::exception&) {
      throw ConfigError(std::string("PARKDIFF_SEED: expected a non-negative integer, got '") + env + "'");
    }
  }
  for (const std::string& o : c.overrides) apply_override(cfg, o);
  if (c.seed >= 0) cfg.seed = static_cast<std::uint64_t>(c.seed);
  if (c.threads >= 0) cfg.threads = static_cast<std::size_t>(c.threads);
  cfg.validate();
  return cfg;
}

PreprocessConfig preprocess_config(const RunConfig& cfg) {
  PreprocessConfig p = cfg.data.preprocess;
  p.history_steps = cfg.model.history_steps;
  p.future_steps = cfg.model.future_steps;
  return p;
}

std::vector<EgoSample> load_split(const RunConfig& cfg, const std::string& path, const std::string& split) {
  if (path.empty()) throw ConfigError("--data: a scene file is required");
  std::vector<Scene> scenes = load_scenes(path);
  for (const Scene& s : scenes) {
    if (std::abs(s.dt - cfg.model.dt) > 1e-12) {
      throw Error(path + ": scene dt " + std::to_string(s.dt) + " differs from model.dt " +
                  std::to_string(cfg.model.dt));
    }
  }
  const std::size_t n_train = std::min(cfg.data.train_scenes, scenes.size());
  std::vector<Scene> chosen;
  if (split == "train") {
    chosen.assign(scenes.begin(), scenes.begin() + static_cast<long>(n_train));
  } else if (split == "val") {
    chosen.assign(scenes.begin() + static_cast<long>(n_train), scenes.end());
  } else {
    chosen = std::move(scenes);
  }
  // Scene indices stay global so sample keys match across splits.
  std::vector<EgoSample> samples = make_samples(chosen, preprocess_config(cfg), cfg.data.sampling);
  if (split == "val") {
    for (EgoSample& s : samples) s.scene_index += n_train;
  }
  if (samples.empty()) throw Error(path + ": the " + split + " split has no samples");
  return samples;
}

class RunDir {
 public:
  RunDir(std::string dir, std::string command, const std::vector<std::string>& args, const RunConfig& cfg)
      : dir_(std::move(dir)), command_(std::move(command)), args_(args), cfg_(cfg) {
    if (dir_.empty()) throw ConfigError("--out: a run directory is required");
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw IoError("cannot create run directory " + dir_ + ": " + ec.message());
  }
  std::string path(const std::string& name) const { return (fs::path(dir_) / name).string(); }
  void record(const std::string& name) { outputs_.push_back(name); }
  void write_text(const std::string& name, const std::string& text) {
    std::ofstream f(path(name), std::ios::binary);
    if (!f) throw IoError("cannot write " + path(name));
    f << text;
    if (!f) throw IoError("failed writing " + path(name));
    record(name);
  }
  // Deterministic: no timestamps, only inputs and output digests.
  void write_manifest() const {
    json m;
    m["command"] = command_;
    m["args"] = args_;
    m["config"] = json::parse(config_to_json(cfg_));
    m["config_hash"] = config_hash(cfg_);
    json outs = json::array();
    for (const std::string& name : outputs_) {
      std::ifstream f(path(name), std::ios::binary);
      std::stringstream ss;
      ss << f.rdbuf();
      outs.push_back({{"path", name}, {"fnv1a", fnv1a_hex(ss.str())}, {"bytes", ss.str().size()}});
    }
    m["outputs"] = outs;
    std::ofstream f(path("manifest.json"));
    f << m.dump(2) << "\n";
    if (!f) throw IoError("failed writing " + path("manifest.json"));
  }

 private:
  std::string dir_, command_;
  std::vector<std::string> args_;
  RunConfig cfg_;
  std::vector<std::string> outputs_;
};

void print_table(const MetricsTable& m, const std::string& title) {
  std::printf("%s\n  %-11s %8s %8s %8s %8s\n", title.c_str(), "class", "minADE", "minFDE", "MR%", "agents");
  const std::pair<const char*, const ClassMetrics*> rows[] = {
      {"Vehicle", &m.vehicle}, {"Pedestrian", &m.pedestrian}, {"All", &m.all}};
  for (const auto& [name, c] : rows) {
    if (c->count == 0) {
      std::printf("  %-11s %8s %8s %8s %8zu\n", name, "-", "-", "-", c->count);
    } else {
      std::printf("  %-11s %8.3f %8.3f %8.2f %8zu\n", name, c->min_ade, c->min_fde, *c->miss_rate, c->count);
    }
  }
}

Model model_from(const std::string& ckpt_path, RunConfig& cfg) {
  if (ckpt_path.empty()) throw ConfigError("--ckpt: a checkpoint is required");
  Checkpoint c = load_checkpoint(ckpt_path);
  if (config_to_json(RunConfig{.model = c.config.model}) != config_to_json(RunConfig{.model = cfg.model})) {
    std::fprintf(stderr, "note: using the model settings stored in %s\n", ckpt_path.c_str());
  }
  cfg.model = c.config.model;
  return std::move(c.state.model);
}

// Trains `state` up to the stage's iteration count, saving a checkpoint every
// `every` iterations (and at the end).
void run_stage(TrainState& state, const std::vector<EgoSample>& data, const RunConfig& cfg, int stage,
               std::size_t every, RunDir& run, std::vector<TrainLogRow>& log) {
  const TrainConfig tc = cfg.stage_config(stage);
  const std::string ckpt_name = "stage" + std::to_string(stage) + ".pkdf";
  const std::size_t chunk = every == 0 ? tc.iterations : every;
  while (state.iteration < tc.iterations) {
    TrainConfig part = tc;
    part.iterations = std::min(tc.iterations, state.iteration + chunk);
    train(state, data, part, &log, [&](const TrainLogRow& r) {
      if (r.iteration % 100 == 0 || r.iteration + 1 == tc.iterations) {
        std::fprintf(stderr, "stage %d iteration %zu loss %.5f\n", r.stage, r.iteration, r.loss);
      }
    });
    save_checkpoint({cfg, state}, run.path(ckpt_name));
  }
  if (tc.iterations == 0 || log.empty()) save_checkpoint({cfg, state}, run.path(ckpt_name));
  run.record(ckpt_name);
  const std::string log_name = "train_log_stage" + std::to_string(stage) + ".csv";
  write_train_log(log, run.path(log_name));
  run.record(log_name);
}

TrainState start_stage(int stage, const Model& from) {
  TrainState s;
  s.model = from;
  s.stage = stage;
  return s;
}

int cmd_synth(const Options& o, const std::vector<std::string>& args) {
  const RunConfig cfg = resolve_config(o.common);
  RunDir run(o.common.out_dir, "synth", args, cfg);
  save_scenes(synth_generate(cfg.synth, cfg.seed), run.path("scenes.jsonl"));
  run.record("scenes.jsonl");
  run.write_manifest();
  std::printf("wrote %zu scenes to %s\n", cfg.synth.num_scenes, run.path("scenes.jsonl").c_str());
  return 0;
}

int cmd_train(const Options& o, const std::vector<std::string>& args) {
  RunConfig cfg = resolve_config(o.common);
  if (o.stage != "1" && o.stage != "2" && o.stage != "both") throw ConfigError("--stage: expected 1, 2 or both");
  std::optional<TrainState> resumed;
  Model start;
  if (!o.resume.empty()) {
    Checkpoint c = load_checkpoint(o.resume);
    cfg.model = c.config.model;
    resumed = std::move(c.state);
  } else if (!o.init.empty()) {
    if (o.stage != "2") throw ConfigError("--init: only stage 2 starts from a checkpoint");
    start = model_from(o.init, cfg);
  } else {
    if (o.stage == "2") throw ConfigError("--stage 2 needs --init (a stage-1 checkpoint) or --resume");
    start = init_model(cfg.model, cfg.seed);
  }
  const std::vector<EgoSample> data = load_split(cfg, o.data, o.split.empty() ? "train" : o.split);
  RunDir run(o.common.out_dir, "train", args, cfg);
  std::printf("training on %zu samples\n", data.size());

  if (resumed) {
    const int stage = resumed->stage;
    if (o.stage != "both" && std::to_string(stage) != o.stage) {
      throw ConfigError("--resume: checkpoint is from stage " + std::to_string(stage) + ", not " + o.stage);
    }
    std::vector<TrainLogRow> log;
    run_stage(*resumed, data, cfg, stage, o.checkpoint_every, run, log);
    if (stage == 1 && o.stage == "both") {
      TrainState s2 = start_stage(2, resumed->model);
      std::vector<TrainLogRow> log2;
      run_stage(s2, data, cfg, 2, o.checkpoint_every, run, log2);
    }
  } else {
    if (o.stage == "1" || o.stage == "both") {
      TrainState s1 = start_stage(1, start);
      std::vector<TrainLogRow> log;
      run_stage(s1, data, cfg, 1, o.checkpoint_every, run, log);
      start = s1.model;
    }
    if (o.stage == "2" || o.stage == "both") {
      TrainState s2 = start_stage(2, start);
      const Model frozen = start;
      std::vector<TrainLogRow> log;
      run_stage(s2, data, cfg, 2, o.checkpoint_every, run, log);
      for (const auto& [name, t] : s2.model.params) {
        if (name.rfind(kDenoiserPrefix, 0) == 0 && !(t == frozen.params.get(name))) {
          throw Error("stage 2 modified denoiser parameter " + name);
        }
      }
    }
  }
  run.write_manifest();
  return 0;
}

json candidates_json(const EgoSample& s, const CandidateSet& c) {
  const std::size_t N = s.num_agents(), K = c.trajectories.dim(1), T = c.trajectories.dim(2);
  json agents = json::array();
  for (std::size_t a = 0; a < N; ++a) {
    json cands = json::array();
    for (std::size_t k = 0; k < K; ++k) {
      json traj = json::array();
      for (std::size_t t = 0; t < T; ++t) {
        const double* p = c.trajectories.data() + ((a * K + k) * T + t) * 2;
        traj.push_back({p[0], p[1]});
      }
      cands.push_back({{"probability", c.probabilities[a * K + k]}, {"trajectory", traj}});
    }
    agents.push_back({{"id", s.agent_ids[a]},
                      {"type", to_string(s.agent_types[a])},
                      {"fallback", c.fallback.empty() ? false : static_cast<bool>(c.fallback[a])},
                      {"candidates", cands}});
  }
  return {{"scene", s.scene_index}, {"ego_id", s.ego_id}, {"t0", s.t0}, {"agents", agents}};
}

int cmd_predict(const Options& o, const std::vector<std::string>& args) {
  RunConfig cfg = resolve_config(o.common);
  const Model model = model_from(o.ckpt, cfg);
  const std::vector<EgoSample> data = load_split(cfg, o.data, o.split.empty() ? "val" : o.split);
  RunDir run(o.common.out_dir, "predict", args, cfg);
  const Predictor p = model_predictor(model, cfg.seed);
  std::string lines;
  std::size_t fallbacks = 0;
  for (const EgoSample& s : data) {
    const CandidateSet c = p(s);
    for (bool f : c.fallback) fallbacks += f ? 1 : 0;
    lines += candidates_json(s, c).dump() + "\n";
  }
  run.write_text("predictions.jsonl", lines);
  run.write_manifest();
  std::printf("wrote predictions for %zu samples (%zu agents fell back to constant velocity)\n", data.size(),
              fallbacks);
  return 0;
}

Predictor choose_predictor(const Options& o, RunConfig& cfg, std::optional<Model>& holder) {
  const int chosen = (o.ekf ? 1 : 0) + (o.oracle ? 1 : 0) + (o.ckpt.empty() ? 0 : 1);
  if (chosen != 1) throw ConfigError("choose exactly one of --ckpt, --ekf, --oracle");
  if (o.ekf) return ekf_predictor(cfg.ekf);
  if (o.oracle) return oracle_predictor();
  holder = model_from(o.ckpt, cfg);
  return model_predictor(*holder, cfg.seed);
}

EvalConfig eval_config(const RunConfig& cfg) {
  EvalConfig e = cfg.eval;
  e.threads = cfg.threads;
  return e;
}

int cmd_eval(const Options& o, const std::vector<std::string>& args) {
  RunConfig cfg = resolve_config(o.common);
  std::optional<Model> holder;
  const Predictor p = choose_predictor(o, cfg, holder);
  const std::vector<EgoSample> data = load_split(cfg, o.data, o.split.empty() ? "val" : o.split);
  RunDir run(o.common.out_dir, "eval", args, cfg);
  const MetricsTable m = evaluate(data, p, eval_config(cfg));
  emit_report({{"", m}}, config_hash(cfg), run.path("metrics.csv"));
  run.record("metrics.csv");
  run.write_manifest();
  print_table(m, "metrics over " + std::to_string(data.size()) + " samples");
  return 0;
}

MetricsTable train_and_evaluate(RunConfig cfg, const std::vector<EgoSample>& train_data,
                                const std::vector<EgoSample>& eval_data, RunDir& run, const std::string& tag) {
  TrainState s1 = start_stage(1, init_model(cfg.model, cfg.seed));
  std::vector<TrainLogRow> log1, log2;
  train(s1, train_data, cfg.stage_config(1), &log1);
  TrainState s2 = start_stage(2, s1.model);
  train(s2, train_data, cfg.stage_config(2), &log2);
  const std::string name = "model_" + tag + ".pkdf";
  save_checkpoint({cfg, s2}, run.path(name));
  run.record(name);
  return evaluate(eval_data, model_predictor(s2.model, cfg.seed), eval_config(cfg));
}

int cmd_ablate(const Options& o, const std::vector<std::string>& args) {
  RunConfig cfg = resolve_config(o.common);
  if (o.kind != "mask" && o.kind != "buckets" && o.kind != "components") {
    throw ConfigError("--kind: expected mask, buckets or components");
  }
  std::vector<ReportTable> tables;
  if (o.kind == "components") {
    const std::vector<EgoSample> train_data = load_split(cfg, o.data, "train");
    const std::vector<EgoSample> eval_data = load_split(cfg, o.data, o.split.empty() ? "val" : o.split);
    RunDir run(o.common.out_dir, "ablate", args, cfg);
    struct Variant {
      const char* tag;
      bool map, type, kin;
    };
    for (const Variant& v : {Variant{"full", true, true, true}, Variant{"no_map", false, true, true},
                             Variant{"no_type", true, false, true}, Variant{"no_kinematics", true, true, false}}) {
      RunConfig vc = cfg;
      vc.model.use_map = v.map;
      vc.model.use_type = v.type;
      vc.model.use_kinematics = v.kin;
      std::fprintf(stderr, "training variant %s\n", v.tag);
      MetricsTable m;
      if (std::string(v.tag) == "full" && !o.ckpt.empty()) {
        const Model full = model_from(o.ckpt, vc);
        m = evaluate(eval_data, model_predictor(full, vc.seed), eval_config(vc));
      } else {
        m = train_and_evaluate(vc, train_data, eval_data, run, v.tag);
      }
      print_table(m, v.tag);
      tables.push_back({v.tag, m});
    }
    emit_report(tables, config_hash(cfg), run.path("ablation_components.csv"));
    run.record("ablation_components.csv");
    run.write_manifest();
    return 0;
  }

  std::optional<Model> holder;
  const Predictor p = choose_predictor(o, cfg, holder);
  const std::vector<EgoSample> data = load_split(cfg, o.data, o.split.empty() ? "val" : o.split);
  RunDir run(o.common.out_dir, "ablate", args, cfg);
  if (o.kind == "mask") {
    for (double f : kMaskFractions) {
      const std::string setting = "mask=" + std::to_string(static_cast<int>(std::lround(f * 100))) + "%";
      const MetricsTable m = ablate_mask(data, p, f, cfg.seed, eval_config(cfg));
      print_table(m, setting);
      tables.push_back({setting, m});
    }
  } else {
    for (const AgentBucket& b : bucket_by_agents(data)) {
      std::vector<EgoSample> subset;
      for (std::size_t i : b.samples) subset.push_back(data[i]);
      char setting[64];
      std::snprintf(setting, sizeof setting, "agents=%s ratio=%.1f%%", b.label.c_str(), b.ratio);
      const MetricsTable m = subset.empty() ? MetricsTable{} : evaluate(subset, p, eval_config(cfg));
      print_table(m, setting);
      tables.push_back({setting, m});
    }
  }
  const std::string name = "ablation_" + o.kind + ".csv";
  emit_report(tables, config_hash(cfg), run.path(name));
  run.record(name);
  run.write_manifest();
  return 0;
}

int cmd_plot(const Options& o, const std::vector<std::string>& args) {
  RunConfig cfg = resolve_config(o.common);
  std::optional<Model> holder;
  const Predictor p = choose_predictor(o, cfg, holder);
  const std::vector<EgoSample> data = load_split(cfg, o.data, o.split.empty() ? "val" : o.split);
  if (o.sample >= data.size()) {
    throw ConfigError("--sample: index " + std::to_string(o.sample) + " out of range (" +
                      std::to_string(data.size()) + " samples)");
  }
  RunDir run(o.common.out_dir, "plot", args, cfg);
  const std::string name = "sample_" + std::to_string(o.sample) + ".svg";
  emit_plot(data[o.sample], p(data[o.sample]), run.path(name));
  run.record(name);
  run.write_manifest();
  std::printf("wrote %s\n", run.path(name).c_str());
  return 0;
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_path, "JSON config file")->check(CLI::ExistingFile);
  app->add_option("--set", c.overrides, "Override a config field: section.field=value (repeatable)");
  app->add_option("--seed", c.seed, "Seed (overrides the config and PARKDIFF_SEED)")->check(CLI::NonNegativeNumber);
  app->add_option("--threads", c.threads, "Worker thread cap")->check(CLI::PositiveNumber);
  app->add_option("--out", c.out_dir, "Run directory for outputs and manifest.json")->required();
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Multi-agent trajectory prediction for parking lots with kinematic diffusion"};
  app.require_subcommand(1);
  app.footer(config_help());
  Options o;

  auto* synth = app.add_subcommand("synth", "Generate synthetic parking-lot scenes");
  add_common(synth, o.common);

  auto* trn = app.add_subcommand("train", "Train stage 1 (denoiser), stage 2 (encoders and initializer) or both");
  add_common(trn, o.common);
  trn->add_option("--data", o.data, "Scene file")->required();
  trn->add_option("--stage", o.stage, "1, 2 or both")->capture_default_str();
  trn->add_option("--init", o.init, "Stage-1 checkpoint to start stage 2 from");
  trn->add_option("--resume", o.resume, "Checkpoint to continue");
  trn->add_option("--checkpoint-every", o.checkpoint_every, "Save a checkpoint every N iterations");
  trn->add_option("--split", o.split, "train (default), val or all")->check(CLI::IsMember({"train", "val", "all"}));

  auto* pred = app.add_subcommand("predict", "Write candidate trajectories for a scene file");
  add_common(pred, o.common);
  pred->add_option("--ckpt", o.ckpt, "Model checkpoint")->required();

  auto* ev = app.add_subcommand("eval", "Metrics table for a model, the EKF baseline or the oracle");
  add_common(ev, o.common);
  ev->add_option("--ckpt", o.ckpt, "Model checkpoint");

  auto* abl = app.add_subcommand("ablate", "Context masking, agent-count buckets or component ablations");
  add_common(abl, o.common);
  abl->add_option("--kind", o.kind, "mask, buckets or components")->required();
  abl->add_option("--ckpt", o.ckpt, "Model checkpoint (for components: the full model)");

  auto* plt = app.add_subcommand("plot", "SVG overlay of one sample");
  add_common(plt, o.common);
  plt->add_option("--ckpt", o.ckpt, "Model checkpoint");
  plt->add_option("--sample", o.sample, "Sample index within the split");

  for (CLI::App* sub : {pred, ev, abl, plt}) {
    sub->add_option("--data", o.data, "Scene file")->required();
    sub->add_option("--split", o.split, "val (default), train or all")->check(CLI::IsMember({"train", "val", "all"}));
  }
  for (CLI::App* sub : {ev, abl, plt}) {
    sub->add_flag("--ekf", o.ekf, "Use the EKF baseline");
    sub->add_flag("--oracle", o.oracle, "Use the ground truth as the prediction");
  }
  for (CLI::App* sub : {synth, trn, pred, ev, abl, plt}) sub->footer(config_help());

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*synth) return cmd_synth(o, args);
    if (*trn) return cmd_train(o, args);
    if (*pred) return cmd_predict(o, args);
    if (*ev) return cmd_eval(o, args);
    if (*abl) return cmd_ablate(o, args);
    if (*plt) return cmd_plot(o, args);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitConfig;
}

}  // namespace parkdiff::cli
