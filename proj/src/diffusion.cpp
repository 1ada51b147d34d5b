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

#include "parkdiff/diffusion.hpp"

#include <cmath>

#include "parkdiff/error.hpp"

namespace parkdiff {

namespace {

constexpr double kTrajectoryScale = 10.0;

}  // namespace

DiffusionSchedule make_schedule(std::size_t steps, double beta_start, double beta_end, std::size_t tau) {
  if (steps == 0) throw ConfigError("diffusion schedule needs at least one step");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    throw ConfigError("diffusion schedule requires 0 < beta_start <= beta_end < 1");
  }
  if (tau < 1 || tau > steps) throw ConfigError("diffusion schedule requires 1 <= tau <= steps");
  DiffusionSchedule s;
  s.steps = steps;
  s.tau = tau;
  double abar = 1.0;
  for (std::size_t i = 0; i < steps; ++i) {
    const double f = steps == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(steps - 1);
    const double b = beta_start + f * (beta_end - beta_start);
    abar *= 1.0 - b;
    s.beta.push_back(b);
    s.alpha.push_back(1.0 - b);
    s.alpha_bar.push_back(abar);
    s.sigma.push_back(std::sqrt(b));
  }
  return s;
}

DiffusionSchedule make_schedule(const ModelConfig& cfg) {
  return make_schedule(cfg.diffusion_steps, cfg.beta_start, cfg.beta_end, cfg.tau);
}

Tensor forward_noise(const Tensor& y, std::size_t t, const Tensor& eps, const DiffusionSchedule& schedule) {
  if (t < 1 || t > schedule.steps) {
    throw ContractError("forward_noise: step " + std::to_string(t) + " outside [1, " +
                        std::to_string(schedule.steps) + "]");
  }
  if (y.shape() != eps.shape()) throw DimensionError("forward_noise: noise shape differs from trajectory");
  const double a = std::sqrt(schedule.alpha_bar_at(t)), b = std::sqrt(1.0 - schedule.alpha_bar_at(t));
  Tensor out(y.shape());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = a * y[i] + b * eps[i];
  return out;
}

void init_denoiser(ParameterSet& ps, const ModelConfig& cfg, std::mt19937_64& rng) {
  const std::size_t in = 2 * cfg.future_steps + cfg.step_embedding + cfg.context_width();
  const std::size_t w = cfg.denoiser_width();
  init_dense(ps, "den.l1", in, w, rng);
  init_dense(ps, "den.l2", w, w, rng);
  init_dense(ps, "den.l3", w, 2 * cfg.future_steps, rng);
}

Var denoise_eps(const Scope& s, const ModelConfig& cfg, Var y_noisy, const std::vector<std::size_t>& steps,
                Var context) {
  const Tensor& Y = y_noisy.value();
  const std::size_t R = Y.rank() == 3 ? Y.dim(0) : 0, T = cfg.future_steps;
  if (Y.shape() != Shape{R, T, 2} || R == 0) {
    throw DimensionError("denoise_eps: expected [R, " + std::to_string(T) + ", 2], got " + shape_string(Y.shape()));
  }
  if (steps.size() != R || context.value().shape() != Shape{R, cfg.context_width()}) {
    throw DimensionError("denoise_eps: steps/context rows do not match trajectories");
  }
  Tensor emb(Shape{R, cfg.step_embedding});
  for (std::size_t r = 0; r < R; ++r) {
    const Tensor e = sinusoidal_embedding(steps[r], cfg.step_embedding);
    std::copy_n(e.data(), e.size(), emb.data() + r * cfg.step_embedding);
  }
  Graph& g = s.graph();
  Var in = ops::concat({ops::scale(ops::reshape(y_noisy, Shape{R, 2 * T}), 1.0 / kTrajectoryScale),
                        g.constant(std::move(emb)), context});
  Var h = ops::gelu(dense(s, "den.l1", in));
  h = ops::gelu(dense(s, "den.l2", h));
  return ops::reshape(dense(s, "den.l3", h), Shape{R, T, 2});
}

Var reverse_step(Var y_t, std::size_t t, Var eps_hat, const DiffusionSchedule& schedule, const Tensor& z) {
  if (t < 1 || t > schedule.steps) throw ContractError("reverse_step: step out of range");
  const double a = schedule.alpha_at(t), abar = schedule.alpha_bar_at(t);
  Var out = ops::scale(ops::sub(y_t, ops::scale(eps_hat, (1.0 - a) / std::sqrt(1.0 - abar))), 1.0 / std::sqrt(a));
  if (z.empty()) return out;
  if (z.shape() != y_t.shape()) throw DimensionError("reverse_step: z shape differs from trajectory");
  Tensor noise = z;
  for (double& v : noise.values()) v *= schedule.sigma_at(t);
  return ops::add_const(out, noise);
}

void init_initializer(ParameterSet& ps, const ModelConfig& cfg, std::mt19937_64& rng) {
  const std::size_t in = cfg.initializer_width();
  init_mlp2(ps, "init.ctrl", in, 2 * cfg.d, cfg.K * cfg.future_steps * 2, rng);
  init_dense(ps, "init.prob", in, cfg.K, rng);
}

InitializerOutput init_candidates(const Scope& s, const ModelConfig& cfg, Var input) {
  if (input.value().rank() != 2 || input.value().cols() != cfg.initializer_width()) {
    throw DimensionError("init_candidates: expected [A, " + std::to_string(cfg.initializer_width()) + "], got " +
                         shape_string(input.shape()));
  }
  const std::size_t A = input.value().rows();
  InitializerOutput out;
  out.controls = ops::reshape(mlp2(s, "init.ctrl", input), Shape{A * cfg.K, cfg.future_steps, 2});
  out.logits = dense(s, "init.prob", input);
  return out;
}

}  // namespace parkdiff
