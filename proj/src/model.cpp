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

#include "parkdiff/model.hpp"

#include <cmath>

#include "parkdiff/error.hpp"

namespace parkdiff {

namespace {

constexpr double kDirectOffsetScale = 5.0;  // m per unit head output without kinematics

std::vector<std::size_t> repeat_rows(std::size_t A, std::size_t K) {
  std::vector<std::size_t> rep(A * K);
  for (std::size_t i = 0; i < rep.size(); ++i) rep[i] = i / K;
  return rep;
}

Tensor gather(const Tensor& t, const std::vector<std::size_t>& rows) {
  const std::size_t w = t.cols();
  Tensor out(Shape{rows.size(), w});
  for (std::size_t i = 0; i < rows.size(); ++i) std::copy_n(t.data() + rows[i] * w, w, out.data() + i * w);
  return out;
}

}  // namespace

Model init_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Model m;
  m.config = cfg;
  std::mt19937_64 rng(seed);
  init_encoders(m.params, cfg, rng);
  init_initializer(m.params, cfg, rng);
  init_pedestrian_net(m.params, cfg, rng);
  init_denoiser(m.params, cfg, rng);
  return m;
}

ForwardPass forward(const Scope& s, const ModelConfig& cfg, const DiffusionSchedule& schedule, const Batch& batch,
                    std::size_t tau, std::mt19937_64* noise) {
  if (tau > schedule.steps) throw ContractError("forward: tau exceeds the schedule length");
  Graph& g = s.graph();
  const std::size_t A = batch.num_agents, K = cfg.K, T = cfg.future_steps;
  ForwardPass f;
  f.enc = encode(s, cfg, batch);
  const InitializerOutput io =
      init_candidates(s, cfg, cfg.initializer_input == "context" ? f.enc.context : f.enc.f_c);
  f.controls = io.controls;
  f.logits = io.logits;

  const std::vector<std::size_t> rep = repeat_rows(A, K);
  const Tensor p0 = gather(batch.anchor_pos, rep);
  if (cfg.use_kinematics) {
    std::vector<bool> is_vehicle(A * K);
    for (std::size_t i = 0; i < rep.size(); ++i) is_vehicle[i] = batch.types[rep[i]] == AgentType::kVehicle;
    f.initial = rollout(s, cfg, g.constant(p0), g.constant(gather(batch.anchor_vel, rep)), f.controls, is_vehicle);
  } else {
    Tensor base(Shape{A * K, T, 2});
    for (std::size_t r = 0; r < A * K; ++r) {
      for (std::size_t t = 0; t < T; ++t) {
        base[(r * T + t) * 2] = p0[r * 2];
        base[(r * T + t) * 2 + 1] = p0[r * 2 + 1];
      }
    }
    f.initial = ops::add_const(ops::scale(f.controls, kDirectOffsetScale), base);
  }

  Var y = f.initial;
  if (tau > 0) {
    Var ctx = ops::gather_rows(f.enc.context, rep);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t t = tau; t >= 1; --t) {
      Var eps = denoise_eps(s, cfg, y, std::vector<std::size_t>(A * K, t), ctx);
      Tensor z;
      if (t > 1 && noise != nullptr) {
        z = Tensor(y.shape());
        for (double& v : z.values()) v = normal(*noise);
      }
      y = reverse_step(y, t, eps, schedule, z);
    }
  }
  f.candidates = y;
  return f;
}

CandidateSet constant_velocity_candidates(const Batch& batch, std::size_t K, double dt) {
  const std::size_t A = batch.num_agents, T = batch.gt_future.rank() == 3 ? batch.gt_future.dim(1) : 0;
  CandidateSet out;
  out.trajectories = Tensor(Shape{A, K, T, 2});
  out.probabilities = Tensor(Shape{A, K}, 1.0 / static_cast<double>(K));
  out.fallback.assign(A, true);
  for (std::size_t a = 0; a < A; ++a) {
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t c = 0; c < 2; ++c) {
          out.trajectories[((a * K + k) * T + t) * 2 + c] =
              batch.anchor_pos[a * 2 + c] + batch.anchor_vel[a * 2 + c] * dt * static_cast<double>(t + 1);
        }
      }
    }
  }
  return out;
}

namespace {

CandidateSet run_predict(const Model& model, const Batch& batch, std::mt19937_64& rng, std::size_t tau) {
  const ModelConfig& cfg = model.config;
  Graph g;
  const Scope s(g, model.params);
  const DiffusionSchedule schedule = make_schedule(cfg.diffusion_steps, cfg.beta_start, cfg.beta_end,
                                                   std::max<std::size_t>(1, cfg.tau));
  const ForwardPass f = forward(s, cfg, schedule, batch, tau, &rng);
  const std::size_t A = batch.num_agents, K = cfg.K, T = cfg.future_steps;
  CandidateSet out;
  out.trajectories = f.candidates.value().reshaped(Shape{A, K, T, 2});
  out.probabilities = Tensor(Shape{A, K});
  const Tensor& L = f.logits.value();
  for (std::size_t a = 0; a < A; ++a) {
    double mx = L[a * K];
    for (std::size_t k = 1; k < K; ++k) mx = std::max(mx, L[a * K + k]);
    double z = 0.0;
    for (std::size_t k = 0; k < K; ++k) z += std::exp(L[a * K + k] - mx);
    for (std::size_t k = 0; k < K; ++k) out.probabilities[a * K + k] = std::exp(L[a * K + k] - mx) / z;
  }
  out.fallback.assign(A, false);
  return out;
}

}  // namespace

CandidateSet predict(const Model& model, const Batch& batch, std::uint64_t seed, std::optional<std::size_t> tau) {
  const std::size_t steps = tau.value_or(model.config.tau);
  std::mt19937_64 rng(seed);
  try {
    return run_predict(model, batch, rng, steps);
  } catch (const NumericError&) {
  }
  // Divergence somewhere in the batch: redo sample by sample and replace the
  // failing ones.
  const std::size_t K = model.config.K, T = model.config.future_steps;
  CandidateSet out = constant_velocity_candidates(batch, K, model.config.dt);
  for (std::size_t i = 0; i < batch.num_samples(); ++i) {
    const std::size_t lo = batch.sample_begin[i], hi = batch.sample_begin[i + 1];
    Batch one = batch;
    std::vector<std::size_t> rows;
    for (std::size_t a = lo; a < hi; ++a) rows.push_back(a);
    // Restrict to the sample's agents; polylines are shared so ranges stay valid.
    one.num_agents = rows.size();
    one.features = Tensor(Shape{rows.size(), batch.features.dim(1), batch.features.dim(2)},
                          std::vector<double>(batch.features.data() + lo * batch.features.dim(1) * batch.features.dim(2),
                                              batch.features.data() + hi * batch.features.dim(1) * batch.features.dim(2)));
    one.history_valid = gather(batch.history_valid, rows);
    one.agent_valid.assign(batch.agent_valid.begin() + lo, batch.agent_valid.begin() + hi);
    one.types.assign(batch.types.begin() + lo, batch.types.begin() + hi);
    one.soft_ranges.assign(batch.soft_ranges.begin() + lo, batch.soft_ranges.begin() + hi);
    one.hard_ranges.assign(batch.hard_ranges.begin() + lo, batch.hard_ranges.begin() + hi);
    one.anchor_pos = gather(batch.anchor_pos, rows);
    one.anchor_vel = gather(batch.anchor_vel, rows);
    one.gt_future = gather(batch.gt_future.reshaped(Shape{batch.num_agents, 2 * T}), rows).reshaped(Shape{rows.size(), T, 2});
    one.future_valid = gather(batch.future_valid, rows);
    one.sample_begin = {0, rows.size()};
    try {
      std::mt19937_64 sample_rng(seed + i + 1);
      const CandidateSet part = run_predict(model, one, sample_rng, steps);
      const std::size_t stride = K * T * 2;
      std::copy_n(part.trajectories.data(), rows.size() * stride, out.trajectories.data() + lo * stride);
      std::copy_n(part.probabilities.data(), rows.size() * K, out.probabilities.data() + lo * K);
      for (std::size_t a = lo; a < hi; ++a) out.fallback[a] = false;
    } catch (const NumericError&) {
    }
  }
  return out;
}

}  // namespace parkdiff
