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

#include <string>

namespace parkdiff {

// Architecture and diffusion hyperparameters shared by every model component.
struct ModelConfig {
  std::size_t d = 64;                   // fusion width; e_a is 2d, C is 3d
  std::size_t heads = 4;
  std::size_t transformer_layers = 2;
  std::size_t d_type = 16;
  std::size_t K = 6;
  std::size_t history_steps = 10;       // T_p
  std::size_t future_steps = 10;        // T_f
  double dt = 0.4;                      // s

  std::size_t diffusion_steps = 100;    // Gamma
  double beta_start = 1e-4;
  double beta_end = 5e-2;
  std::size_t tau = 5;                  // reverse steps run at inference
  std::size_t step_embedding = 32;

  double v_ped_max = 3.0;               // m/s
  std::size_t ped_hidden = 32;

  // Initializer input: "fc" (type-modulated map feature) or "context" ([f_c || e_a]).
  std::string initializer_input = "context";

  // Component toggles for ablations.
  bool use_map = true;
  bool use_type = true;
  bool use_kinematics = true;

  std::size_t context_width() const { return 3 * d; }
  std::size_t denoiser_width() const { return 4 * d; }
  std::size_t initializer_width() const { return initializer_input == "context" ? 3 * d : d; }

  // Throws ConfigError on out-of-range values.
  void validate() const;
};

}  // namespace parkdiff
