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

#include <functional>
#include <random>

#include "parkdiff/layers.hpp"
#include "parkdiff/model_config.hpp"

namespace parkdiff {

inline constexpr double kAdhesionMu = 0.7;
inline constexpr double kGravity = 9.81;
inline constexpr double kMaxAccel = kAdhesionMu * kGravity;  // 6.867 m/s^2

// Rows of u [R, 2] projected onto the ball of radius mu*g.
Var clamp_control(Var u);

// State derivative for a batch of rows: (state, control) -> d state / dt.
using Derivative = std::function<Var(Var state, Var control)>;

// Vehicle state rows are [p_x, p_y, v_x, v_y]; derivative is (v, u).
Var vehicle_derivative(Var z, Var u);

// p_dot = v_ped_max * tanh(net([p / 10, u])), rows [R, 2].
Var pedestrian_derivative(const Scope& s, const ModelConfig& cfg, Var p, Var u);
void init_pedestrian_net(ParameterSet& ps, const ModelConfig& cfg, std::mt19937_64& rng);

// Euler predictor followed by the trapezoidal corrector, u held over the step:
//   z~ = z + dt f(z, u);  z' = z + dt/2 (f(z, u) + f(z~, u))
Var heun_step(Var z, Var u, double dt, const Derivative& f);

// Positions [R, T, 2] from controls u [R, T, 2]. Vehicle controls are
// clamped before every step.
Var rollout_vehicles(Var p0, Var v0, Var u, double dt);
Var rollout_pedestrians(const Scope& s, const ModelConfig& cfg, Var p0, Var u, double dt);

// Mixed batch: row r uses the vehicle model when is_vehicle[r], else the
// pedestrian model.
Var rollout(const Scope& s, const ModelConfig& cfg, Var p0, Var v0, Var u, const std::vector<bool>& is_vehicle);

// Largest per-step |dv| / dt of each row, with velocities recovered from
// positions [R, T, 2] through the trapezoidal relation
// p_{t+1} - p_t = dt (v_t + v_{t+1}) / 2, starting from p0 and v0 [R, 2].
// Exact for vehicle rollouts; a slack measure for anything else.
std::vector<double> max_implied_accel(const Tensor& p0, const Tensor& v0, const Tensor& positions, double dt);

}  // namespace parkdiff
