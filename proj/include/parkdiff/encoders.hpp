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

#include <random>
#include <vector>

#include "parkdiff/layers.hpp"
#include "parkdiff/model_config.hpp"
#include "parkdiff/preprocess.hpp"

namespace parkdiff {

// Several EgoSamples flattened into one set of agent rows so a single graph
// covers a minibatch. Polylines of all samples are stacked; each agent row
// attends only to the polyline range of its own sample.
struct Batch {
  std::size_t num_agents = 0;          // A
  Tensor features;                     // [A, T_p, 12]
  Tensor history_valid;                // [A, T_p]
  std::vector<double> agent_valid;     // [A], 1 if any history step is valid
  std::vector<AgentType> types;        // [A]
  Tensor soft;                         // [S, P * F_map]
  Tensor hard;                         // [H, P * F_map]
  std::vector<ops::Range> soft_ranges; // [A]
  std::vector<ops::Range> hard_ranges; // [A]
  Tensor gt_future;                    // [A, T_f, 2]
  Tensor future_valid;                 // [A, T_f]
  Tensor anchor_pos;                   // [A, 2]
  Tensor anchor_vel;                   // [A, 2]
  std::vector<std::size_t> sample_begin;  // first agent row of each sample, plus a final end entry

  std::size_t num_samples() const { return sample_begin.empty() ? 0 : sample_begin.size() - 1; }
};

Batch make_batch(const std::vector<const EgoSample*>& samples);
Batch make_batch(const EgoSample& sample);

void init_encoders(ParameterSet& ps, const ModelConfig& cfg, std::mt19937_64& rng);

// e_a [A, 2d]: masked mean-pool of (transformer(x0) + x0) concatenated with
// the final GRU state over conv features. x is [A, T, 12] (T <= T_p); rows
// without any valid step are zero.
Var agent_encode(const Scope& s, const ModelConfig& cfg, Var x, const Tensor& valid);

// One embedding [n, d] per polyline; branch is "soft" or "hard". polys is [n, P * F_map].
Var encode_polylines(const Scope& s, const std::string& branch, Var polys);

// softmax(q f_soft^T / sqrt(d)) f_soft per row over its range; rows whose
// range is empty pass q through unchanged.
Var fuse_soft(Var q, Var f_soft, const std::vector<ops::Range>& ranges);

// e_soft + softmax(e_soft f_hard^T / sqrt(d)) f_hard; empty ranges add zero.
Var fuse_hard(Var e_soft, Var f_hard, const std::vector<ops::Range>& ranges);

// f_c = e_map * (1 + gamma) + beta with (gamma, beta) from the type embedding.
Var type_modulate(const Scope& s, const ModelConfig& cfg, Var e_map, const std::vector<AgentType>& types);

// C = [f_c || e_a] per agent, rows with agent_valid == 0 zeroed.
Var build_context(Var f_c, Var e_a, const std::vector<double>& agent_valid);

struct Encoding {
  Var e_a;      // [A, 2d]
  Var query;    // [A, d], projected e_a
  Var e_soft;   // [A, d]
  Var e_map;    // [A, d]
  Var f_c;      // [A, d]
  Var context;  // [A, 3d]
};

Encoding encode(const Scope& s, const ModelConfig& cfg, const Batch& batch);

}  // namespace parkdiff
