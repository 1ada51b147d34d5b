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
#include <optional>
#include <random>

#include "parkdiff/diffusion.hpp"
#include "parkdiff/encoders.hpp"
#include "parkdiff/kinematics.hpp"

namespace parkdiff {

struct Model {
  ModelConfig config;
  ParameterSet params;
};

// Parameter prefixes: enc., map., fuse., type. (encoders), init. (initializer),
// ped. (pedestrian dynamics), den. (denoiser).
Model init_model(const ModelConfig& cfg, std::uint64_t seed);

inline constexpr const char* kDenoiserPrefix = "den.";

struct ForwardPass {
  Encoding enc;
  Var controls;    // [A * K, T_f, 2]
  Var initial;     // [A * K, T_f, 2], kinematic rollout used as the noisy sample at step tau
  Var candidates;  // [A * K, T_f, 2], after tau reverse steps
  Var logits;      // [A, K]
};

// Full pipeline in one graph: encode, initializer, clamp + rollout, then
// `tau` reverse diffusion steps (z = 0 on the last one). `noise` draws z for
// the other steps; nullptr uses z = 0 throughout.
ForwardPass forward(const Scope& s, const ModelConfig& cfg, const DiffusionSchedule& schedule, const Batch& batch,
                    std::size_t tau, std::mt19937_64* noise);

struct CandidateSet {
  Tensor trajectories;         // [A, K, T_f, 2]
  Tensor probabilities;        // [A, K]
  std::vector<bool> fallback;  // [A], true when the candidates are constant-velocity replacements
};

// Inference. Never throws on numeric divergence: affected samples fall back
// to constant-velocity extrapolation from the anchor and are flagged.
CandidateSet predict(const Model& model, const Batch& batch, std::uint64_t seed,
                     std::optional<std::size_t> tau = std::nullopt);

// Constant-velocity extrapolation from the anchor of every agent, K copies.
CandidateSet constant_velocity_candidates(const Batch& batch, std::size_t K, double dt);

}  // namespace parkdiff
