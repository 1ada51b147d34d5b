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

#include "parkdiff/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

#include "parkdiff/error.hpp"

namespace parkdiff {

using nlohmann::json;

static_assert(std::is_same_v<std::uint64_t, std::size_t>, "seed and counts share one JSON conversion");

namespace {

struct FieldImpl {
  ConfigField info;
  std::function<json(const RunConfig&)> get;
  std::function<void(RunConfig&, const json&)> set;
};

[[noreturn]] void type_error(const std::string& key, const char* expected, const json& j) {
  throw ConfigError(key + ": expected " + expected + ", got " + j.dump());
}

template <class T>
T convert(const std::string& key, const json& j);

template <>
std::size_t convert<std::size_t>(const std::string& key, const json& j) {
  if (!j.is_number_unsigned()) type_error(key, "a non-negative integer", j);
  return j.get<std::size_t>();
}

template <>
double convert<double>(const std::string& key, const json& j) {
  if (!j.is_number()) type_error(key, "a number", j);
  return j.get<double>();
}

template <>
bool convert<bool>(const std::string& key, const json& j) {
  if (!j.is_boolean()) type_error(key, "true or false", j);
  return j.get<bool>();
}

template <>
std::string convert<std::string>(const std::string& key, const json& j) {
  if (!j.is_string()) type_error(key, "a string", j);
  return j.get<std::string>();
}

template <>
std::vector<double> convert<std::vector<double>>(const std::string& key, const json& j) {
  if (!j.is_array()) type_error(key, "an array of numbers", j);
  std::vector<double> out;
  for (const json& v : j) out.push_back(convert<double>(key, v));
  return out;
}

template <>
MissRateMode convert<MissRateMode>(const std::string& key, const json& j) {
  const std::string s = convert<std::string>(key, j);
  if (s == "best_of_k") return MissRateMode::kBestOfK;
  if (s == "most_probable") return MissRateMode::kMostProbable;
  throw ConfigError(key + ": expected \"best_of_k\" or \"most_probable\", got \"" + s + "\"");
}

json to_json_value(MissRateMode m) { return m == MissRateMode::kBestOfK ? "best_of_k" : "most_probable"; }
template <class T>
json to_json_value(const T& v) {
  return json(v);
}

template <class Access>
FieldImpl field(std::string key, std::string help, Access access) {
  using T = std::remove_reference_t<decltype(access(std::declval<RunConfig&>()))>;
  FieldImpl f;
  RunConfig defaults;
  f.info = {key, std::move(help), to_json_value(access(defaults)).dump()};
  f.get = [access](const RunConfig& c) { return to_json_value(access(const_cast<RunConfig&>(c))); };
  f.set = [access, key](RunConfig& c, const json& j) { access(c) = convert<T>(key, j); };
  return f;
}

#define PKD_FIELD(key, expr, help) field(key, help, [](RunConfig& c) -> auto& { return c.expr; })

const std::vector<FieldImpl>& registry() {
  static const std::vector<FieldImpl> fields = {
      PKD_FIELD("seed", seed, "Seed for data generation, initialization, training and sampling."),
      PKD_FIELD("threads", threads, "Worker threads for evaluation."),

      PKD_FIELD("model.d", model.d, "Fusion width d; agent embeddings are 2d wide, the context 3d."),
      PKD_FIELD("model.heads", model.heads, "Attention heads in the history transformer; must divide d."),
      PKD_FIELD("model.transformer_layers", model.transformer_layers, "Transformer layers in the history encoder."),
      PKD_FIELD("model.d_type", model.d_type, "Width of the agent-type embedding."),
      PKD_FIELD("model.K", model.K, "Candidate trajectories per agent."),
      PKD_FIELD("model.history_steps", model.history_steps, "Observed steps T_p."),
      PKD_FIELD("model.future_steps", model.future_steps, "Predicted steps T_f."),
      PKD_FIELD("model.dt", model.dt, "Step length in seconds."),
      PKD_FIELD("model.diffusion_steps", model.diffusion_steps, "Diffusion steps Gamma."),
      PKD_FIELD("model.beta_start", model.beta_start, "First value of the linear beta schedule."),
      PKD_FIELD("model.beta_end", model.beta_end, "Last value of the linear beta schedule."),
      PKD_FIELD("model.tau", model.tau, "Reverse steps run at inference, starting from the initializer output."),
      PKD_FIELD("model.step_embedding", model.step_embedding, "Width of the sinusoidal step embedding."),
      PKD_FIELD("model.v_ped_max", model.v_ped_max, "Pedestrian speed bound in m/s."),
      PKD_FIELD("model.ped_hidden", model.ped_hidden, "Hidden width of the pedestrian dynamics net."),
      PKD_FIELD("model.initializer_input", model.initializer_input,
                "Initializer input: \"fc\" (map feature) or \"context\" (map feature and agent embedding)."),
      PKD_FIELD("model.use_map", model.use_map, "Enable the map encoder and fusion."),
      PKD_FIELD("model.use_type", model.use_type, "Enable the agent-type modulation."),
      PKD_FIELD("model.use_kinematics", model.use_kinematics,
                "Enable the kinematic layer; when off the initializer emits position offsets."),

      PKD_FIELD("train.lr", train.lr, "Adam learning rate."),
      PKD_FIELD("train.adam_beta1", train.adam_beta1, "Adam first-moment decay."),
      PKD_FIELD("train.adam_beta2", train.adam_beta2, "Adam second-moment decay."),
      PKD_FIELD("train.adam_eps", train.adam_eps, "Adam epsilon."),
      PKD_FIELD("train.batch_size", train.batch_size, "Samples per minibatch."),
      PKD_FIELD("train.stage1_iterations", stage1_iterations, "Iterations of denoiser pretraining."),
      PKD_FIELD("train.stage2_iterations", stage2_iterations, "Iterations of encoder and initializer training."),
      PKD_FIELD("train.lambda_ce", train.lambda_ce, "Weight of the probability cross-entropy in stage 2."),
      PKD_FIELD("train.grad_clip", train.grad_clip, "Global gradient-norm clip; 0 disables."),
      PKD_FIELD("train.W", train.W, "Per-step reconstruction weights (length T_f); empty uses the preset."),
      PKD_FIELD("train.weight_preset", weight_preset, "Weights when train.W is empty: \"uniform\" or \"linear\"."),
      PKD_FIELD("train.log_every", train.log_every, "Training log interval in iterations."),

      PKD_FIELD("synth.num_scenes", synth.num_scenes, "Scenes to generate."),
      PKD_FIELD("synth.num_steps", synth.num_steps, "Timestamps per scene."),
      PKD_FIELD("synth.dt", synth.dt, "Sampling interval in seconds."),
      PKD_FIELD("synth.aisles", synth.aisles, "Driving aisles per lot."),
      PKD_FIELD("synth.spots_per_row", synth.spots_per_row, "Parking spots per row."),
      PKD_FIELD("synth.spot_width", synth.spot_width, "Spot width in m."),
      PKD_FIELD("synth.spot_depth", synth.spot_depth, "Spot depth in m."),
      PKD_FIELD("synth.lane_width", synth.lane_width, "Aisle width in m."),
      PKD_FIELD("synth.end_margin", synth.end_margin, "Width of the end zones in m."),
      PKD_FIELD("synth.parked_fraction", synth.parked_fraction, "Share of free spots holding a parked car."),
      PKD_FIELD("synth.min_vehicles", synth.min_vehicles, "Fewest moving vehicles per scene."),
      PKD_FIELD("synth.max_vehicles", synth.max_vehicles, "Most moving vehicles per scene."),
      PKD_FIELD("synth.min_pedestrians", synth.min_pedestrians, "Fewest pedestrians per scene."),
      PKD_FIELD("synth.max_pedestrians", synth.max_pedestrians, "Most pedestrians per scene."),
      PKD_FIELD("synth.turn_radius", synth.turn_radius, "Radius of generated turns in m."),
      PKD_FIELD("synth.max_long_accel", synth.max_long_accel, "Longitudinal acceleration bound in m/s^2."),
      PKD_FIELD("synth.max_turn_speed", synth.max_turn_speed, "Speed through turns in m/s."),
      PKD_FIELD("synth.min_cruise_speed", synth.min_cruise_speed, "Lower cruise speed in m/s."),
      PKD_FIELD("synth.max_cruise_speed", synth.max_cruise_speed, "Upper cruise speed in m/s."),
      PKD_FIELD("synth.min_ped_speed", synth.min_ped_speed, "Lower pedestrian speed in m/s."),
      PKD_FIELD("synth.max_ped_speed", synth.max_ped_speed, "Upper pedestrian speed in m/s."),

      PKD_FIELD("data.train_scenes", data.train_scenes,
                "Leading scenes of a scene file used for training; the rest form the validation split."),
      PKD_FIELD("data.radius", data.preprocess.radius, "Neighborhood radius around the ego in m."),
      PKD_FIELD("data.max_agents", data.preprocess.max_agents, "Agents kept per sample, ego included."),
      PKD_FIELD("data.stride", data.sampling.stride, "Steps between consecutive prediction times."),
      PKD_FIELD("data.max_egos_per_window", data.sampling.max_egos_per_window, "Ego vehicles per prediction time."),

      PKD_FIELD("eval.miss_threshold", eval.miss_threshold, "Miss-rate threshold in m (strictly exceeded)."),
      PKD_FIELD("eval.miss_rate_mode", eval.miss_rate_mode,
                "Candidate scored by the miss rate: \"best_of_k\" or \"most_probable\"."),

      PKD_FIELD("ekf.vehicle_accel_noise", ekf.vehicle_accel_noise, "Vehicle longitudinal acceleration std."),
      PKD_FIELD("ekf.vehicle_yaw_accel_noise", ekf.vehicle_yaw_accel_noise, "Vehicle yaw acceleration std."),
      PKD_FIELD("ekf.pedestrian_accel_noise", ekf.pedestrian_accel_noise, "Pedestrian acceleration std."),
      PKD_FIELD("ekf.position_noise", ekf.position_noise, "Position measurement std in m."),
      PKD_FIELD("ekf.heading_noise", ekf.heading_noise, "Heading measurement std in rad."),
  };
  return fields;
}

#undef PKD_FIELD

const FieldImpl& find_field(const std::string& key) {
  for (const FieldImpl& f : registry()) {
    if (f.info.key == key) return f;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void apply_object(RunConfig& config, const json& j, const std::string& prefix) {
  if (!j.is_object()) type_error(prefix.empty() ? "config" : prefix, "an object", j);
  for (const auto& [k, v] : j.items()) {
    const std::string key = prefix.empty() ? k : prefix + "." + k;
    if (v.is_object()) {
      if (!prefix.empty()) throw ConfigError("unknown config key '" + key + "'");
      apply_object(config, v, key);
    } else {
      find_field(key).set(config, v);
    }
  }
}

}  // namespace

TrainConfig RunConfig::stage_config(int stage) const {
  TrainConfig t = train;
  t.stage = stage;
  t.iterations = stage == 1 ? stage1_iterations : stage2_iterations;
  t.seed = seed;
  if (t.W.empty()) t.W = parkdiff::weight_preset(weight_preset, model.future_steps);
  return t;
}

void RunConfig::validate() const {
  model.validate();
  if (threads == 0) throw ConfigError("threads: must be at least 1");
  if (weight_preset != "uniform" && weight_preset != "linear") {
    throw ConfigError("train.weight_preset: expected \"uniform\" or \"linear\", got \"" + weight_preset + "\"");
  }
  if (stage1_iterations == 0 || stage2_iterations == 0) throw ConfigError("train: iterations must be at least 1");
  stage_config(1).validate(model.future_steps);
  synth.validate();
  if (synth.dt != model.dt) throw ConfigError("synth.dt: must equal model.dt");
  if (data.train_scenes == 0) throw ConfigError("data.train_scenes: must be at least 1");
  if (!(data.preprocess.radius > 0.0)) throw ConfigError("data.radius: must be positive");
  if (data.preprocess.max_agents == 0) throw ConfigError("data.max_agents: must be at least 1");
  if (data.sampling.stride == 0) throw ConfigError("data.stride: must be at least 1");
  if (data.sampling.max_egos_per_window == 0) throw ConfigError("data.max_egos_per_window: must be at least 1");
  if (!(eval.miss_threshold > 0.0)) throw ConfigError("eval.miss_threshold: must be positive");
  for (double v : {ekf.vehicle_accel_noise, ekf.vehicle_yaw_accel_noise, ekf.pedestrian_accel_noise,
                   ekf.position_noise, ekf.heading_noise}) {
    if (!(v > 0.0)) throw ConfigError("ekf: noise levels must be positive");
  }
}

const std::vector<ConfigField>& config_fields() {
  static const std::vector<ConfigField> fields = [] {
    std::vector<ConfigField> out;
    for (const FieldImpl& f : registry()) out.push_back(f.info);
    return out;
  }();
  return fields;
}

std::string config_help() {
  std::string out = "Configuration fields (JSON file sections, or --set key=value):\n";
  for (const ConfigField& f : config_fields()) {
    char head[96];
    std::snprintf(head, sizeof head, "  %-32s default %s\n", f.key.c_str(), f.default_value.c_str());
    out += head;
    out += "      " + f.help + "\n";
  }
  return out;
}

std::string config_to_json(const RunConfig& config) {
  json j = json::object();
  for (const FieldImpl& f : registry()) {
    const auto dot = f.info.key.find('.');
    if (dot == std::string::npos) {
      j[f.info.key] = f.get(config);
    } else {
      j[f.info.key.substr(0, dot)][f.info.key.substr(dot + 1)] = f.get(config);
    }
  }
  return j.dump();
}

void apply_config_json(RunConfig& config, const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  apply_object(config, j, "");
}

RunConfig config_from_json(const std::string& text) {
  RunConfig c;
  apply_config_json(c, text);
  return c;
}

void apply_override(RunConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  const json value = json::parse(text, nullptr, false);
  find_field(key).set(config, value.is_discarded() ? json(text) : value);
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  try {
    return config_from_json(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string config_hash(const RunConfig& config) { return fnv1a_hex(config_to_json(config)); }

}  // namespace parkdiff
