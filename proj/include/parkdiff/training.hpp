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
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "parkdiff/model.hpp"

namespace parkdiff {

struct TrainConfig {
  int stage = 1;
  double lr = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t batch_size = 16;
  std::size_t iterations = 2000;
  double lambda_ce = 0.1;
  double grad_clip = 10.0;          // global gradient norm; 0 disables clipping
  std::vector<double> W;            // per future step; empty means uniform ones
  std::uint64_t seed = 0;
  std::size_t log_every = 1;

  // Throws ConfigError on out-of-range values. T_f is the horizon W must match.
  void validate(std::size_t future_steps) const;
  // W, or uniform ones when W is empty.
  std::vector<double> weights(std::size_t future_steps) const;
};

// Named per-step weight presets: "uniform" (all ones) and "linear" (t / T_f
// for t = 1..T_f, emphasizing the endpoint). Throws ConfigError otherwise.
std::vector<double> weight_preset(const std::string& name, std::size_t future_steps);

// ---- losses ---------------------------------------------------------------------

// Mean of (eps_hat - eps)^2 over coordinates of valid steps. eps_hat and eps
// are [R, T_f, 2], valid is [R, T_f]. Zero valid entries gives a zero loss.
Var masked_noise_mse(Var eps_hat, const Tensor& eps, const Tensor& valid);

// Noise-prediction loss for rows y_gt [R, T_f, 2] at per-row steps with the
// given noise draw.
Var loss_denoiser(const Scope& s, const ModelConfig& cfg, const DiffusionSchedule& schedule, const Tensor& y_gt,
                  const std::vector<std::size_t>& steps, const Tensor& eps, Var context, const Tensor& valid);

struct WtaResult {
  Var loss;
  std::vector<long> winners;            // [N], -1 for agents without valid future steps
  Tensor errors;                        // [N, K] weighted squared error of every candidate
  std::size_t counted = 0;              // agents entering the average
};

// candidates [N * K, T_f, 2] (row n * K + k) or [N, K, T_f, 2]; gt [N, T_f, 2];
// future_valid [N, T_f]; W [T_f] strictly positive. Weights are renormalized
// over the valid steps of each agent so they keep the sum of W.
WtaResult loss_wta(Var candidates, std::size_t K, const Tensor& gt, const Tensor& future_valid,
                   const std::vector<double>& W);

// Cross-entropy of softmax(logits [N, K]) against the winners; agents with
// winner -1 are skipped.
Var loss_prob(Var logits, const std::vector<long>& winners);

// ---- optimizer -----------------------------------------------------------------

struct AdamState {
  std::map<std::string, Tensor> m;
  std::map<std::string, Tensor> v;
  std::uint64_t step = 0;

  bool operator==(const AdamState&) const = default;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Updates every parameter that has an entry in grads; others stay untouched.
void adam_step(ParameterSet& params, const GradMap& grads, AdamState& state, const AdamConfig& cfg);

double global_grad_norm(const GradMap& grads);
void clip_grad_norm(GradMap& grads, double max_norm);

// ---- training loop --------------------------------------------------------------

struct TrainLogRow {
  std::size_t iteration = 0;
  int stage = 0;
  double loss = 0.0;
  double loss_main = 0.0;   // noise MSE (stage 1) or winner-take-all (stage 2)
  double loss_ce = 0.0;     // stage 2 only
  double min_ade = 0.0;     // stage 2 only, on the minibatch
  double grad_norm = 0.0;   // before clipping
};

struct TrainState {
  Model model;
  AdamState adam;
  int stage = 1;
  std::size_t iteration = 0;  // completed iterations of the current stage
};

using TrainCallback = std::function<void(const TrainLogRow&)>;

// Runs iterations state.iteration .. config.iterations - 1 of config.stage.
// Each iteration's minibatch and noise come from (seed, stage, iteration)
// alone, so a run resumed from a saved state continues bit-identically.
// Stage 2 binds every "den." parameter as a constant. Throws NumericError
// when the loss or gradients stop being finite.
void train(TrainState& state, const std::vector<EgoSample>& data, const TrainConfig& config,
           std::vector<TrainLogRow>* log = nullptr, const TrainCallback& on_log = {});

// Fresh optimizer state on a stage-1 result, then train(). The denoiser is
// checked to be bit-identical afterwards.
TrainState train_stage1(Model model, const std::vector<EgoSample>& data, const TrainConfig& config,
                        std::vector<TrainLogRow>* log = nullptr, const TrainCallback& on_log = {});
TrainState train_stage2(Model stage1, const std::vector<EgoSample>& data, const TrainConfig& config,
                        std::vector<TrainLogRow>* log = nullptr, const TrainCallback& on_log = {});

void write_train_log(const std::vector<TrainLogRow>& rows, const std::string& path);

}  // namespace parkdiff
