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

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "parkdiff/evaluation.hpp"
#include "parkdiff/preprocess.hpp"
#include "parkdiff/synth.hpp"
#include "parkdiff/training.hpp"

namespace parkdiff {

struct DataConfig {
  std::size_t train_scenes = 64;  // leading scenes of a file form the training split
  PreprocessConfig preprocess;
  SamplingConfig sampling;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  ModelConfig model;
  // Shared by both stages; the stage and iteration count are chosen per stage.
  TrainConfig train;
  std::size_t stage1_iterations = 1000;
  std::size_t stage2_iterations = 6000;
  std::string weight_preset = "uniform";  // used when train.W is empty
  SynthConfig synth;
  DataConfig data;
  EvalConfig eval;
  EkfConfig ekf;

  // TrainConfig for one stage with W resolved.
  TrainConfig stage_config(int stage) const;
  // Cross-field checks (T_p/T_f and dt agree across sections) plus every
  // section's own validation. Throws ConfigError naming the field.
  void validate() const;
};

// Every key is "section.field" (or a bare top-level field such as "seed").
struct ConfigField {
  std::string key;
  std::string help;
  std::string default_value;  // JSON text
};
const std::vector<ConfigField>& config_fields();

// Lists every field with its default and description.
std::string config_help();

// Canonical JSON: every field, keys sorted. Parsing rejects unknown keys and
// type mismatches with ConfigError naming the key; missing keys keep their
// defaults. Neither validates ranges.
std::string config_to_json(const RunConfig& config);
RunConfig config_from_json(const std::string& text);
void apply_config_json(RunConfig& config, const std::string& text);

// "section.field=value" where value is JSON, or a bare string.
void apply_override(RunConfig& config, const std::string& assignment);

RunConfig load_config(const std::string& path);

// 16 hex digits of FNV-1a over the canonical JSON.
std::string config_hash(const RunConfig& config);
std::string fnv1a_hex(const std::string& bytes);

}  // namespace parkdiff
