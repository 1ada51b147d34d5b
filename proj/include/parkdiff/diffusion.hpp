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

namespace parkdiff {

// Tables indexed by diffusion step t in [1, steps] (stored at t - 1).
struct DiffusionSchedule {
  std::size_t steps = 0;
  std::size_t tau = 0;
  std::vector<double> beta, alpha, alpha_bar, sigma;

  double beta_at(std::size_t t) const { return beta.at(t - 1); }
  double alpha_at(std::size_t t) const { return alpha.at(t - 1); }
  double alpha_bar_at(std::size_t t) const { return alpha_bar.at(t - 1); }
  double sigma_at(std::size_t t) const { return sigma.at(t - 1); }
};

// Linear beta from beta_start (t = 1) to beta_end (t = steps).
// Throws ConfigError unless 0 < beta_start <= beta_end < 1 and 1 <= tau <= steps.
DiffusionSchedule make_schedule(std::size_t steps, double beta_start, double beta_end, std::size_t tau);
DiffusionSchedule make_schedule(const ModelConfig& cfg);

// sqrt(abar_t) y + sqrt(1 - abar_t) eps. Throws ContractError for t outside [1, steps].
Tensor forward_noise(const Tensor& y, std::size_t t, const Tensor& eps, const DiffusionSchedule& schedule);

void init_denoiser(ParameterSet& ps, const ModelConfig& cfg, std::mt19937_64& rng);

// eps_theta(y_t, t, C) for rows of y_noisy [R, T_f, 2] with per-row steps and
// context rows [R, 3d]. Returns [R, T_f, 2].
Var denoise_eps(const Scope& s, const ModelConfig& cfg, Var y_noisy, const std::vector<std::size_t>& steps,
                Var context);

// (1/sqrt(alpha_t)) (y_t - (1 - alpha_t)/sqrt(1 - abar_t) eps_hat) + sigma_t z.
// An empty z means z = 0.
Var reverse_step(Var y_t, std::size_t t, Var eps_hat, const DiffusionSchedule& schedule, const Tensor& z = Tensor());

void init_initializer(ParameterSet& ps, const ModelConfig& cfg, std::mt19937_64& rng);

struct InitializerOutput {
  Var controls;  // [A * K, T_f, 2], candidate k of agent a at row a * K + k
  Var logits;    // [A, K]
};
InitializerOutput init_candidates(const Scope& s, const ModelConfig& cfg, Var input);

}  // namespace parkdiff
