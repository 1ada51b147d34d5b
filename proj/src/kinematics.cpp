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

#include "parkdiff/kinematics.hpp"

#include <cmath>

#include "parkdiff/error.hpp"

namespace parkdiff {

namespace {

constexpr double kPedPositionScale = 10.0;

void check_controls(const Var& p0, const Var& u, const char* who) {
  const Tensor& U = u.value();
  if (U.rank() != 3 || U.dim(2) != 2 || p0.value().shape() != Shape{U.dim(0), 2}) {
    throw DimensionError(std::string(who) + ": expected p0 [R,2] and u [R,T,2], got " +
                         shape_string(p0.shape()) + " and " + shape_string(U.shape()));
  }
}

Var stack_steps(const std::vector<Var>& steps, std::size_t rows) {
  return ops::reshape(ops::concat(steps), Shape{rows, steps.size(), 2});
}

}  // namespace

Var clamp_control(Var u) { return ops::clamp_norm_rows(u, kMaxAccel); }

Var vehicle_derivative(Var z, Var u) { return ops::concat({ops::slice_cols(z, 2, 2), u}); }

void init_pedestrian_net(ParameterSet& ps, const ModelConfig& cfg, std::mt19937_64& rng) {
  init_mlp2(ps, "ped", 4, cfg.ped_hidden, 2, rng);
}

Var pedestrian_derivative(const Scope& s, const ModelConfig& cfg, Var p, Var u) {
  Var in = ops::concat({ops::scale(p, 1.0 / kPedPositionScale), u});
  return ops::scale(ops::tanh(mlp2(s, "ped", in)), cfg.v_ped_max);
}

Var heun_step(Var z, Var u, double dt, const Derivative& f) {
  Var k1 = f(z, u);
  Var z_pred = ops::add(z, ops::scale(k1, dt));
  Var k2 = f(z_pred, u);
  return ops::add(z, ops::scale(ops::add(k1, k2), 0.5 * dt));
}

Var rollout_vehicles(Var p0, Var v0, Var u, double dt) {
  check_controls(p0, u, "rollout_vehicles");
  const std::size_t R = u.value().dim(0), T = u.value().dim(1);
  Var z = ops::concat({p0, v0});
  std::vector<Var> positions;
  for (std::size_t t = 0; t < T; ++t) {
    z = heun_step(z, clamp_control(ops::time_slice(u, t)), dt, vehicle_derivative);
    positions.push_back(ops::slice_cols(z, 0, 2));
  }
  return stack_steps(positions, R);
}

Var rollout_pedestrians(const Scope& s, const ModelConfig& cfg, Var p0, Var u, double dt) {
  check_controls(p0, u, "rollout_pedestrians");
  const std::size_t R = u.value().dim(0), T = u.value().dim(1);
  const Derivative f = [&](Var p, Var c) { return pedestrian_derivative(s, cfg, p, c); };
  Var p = p0;
  std::vector<Var> positions;
  for (std::size_t t = 0; t < T; ++t) {
    p = heun_step(p, ops::time_slice(u, t), dt, f);
    positions.push_back(p);
  }
  return stack_steps(positions, R);
}

Var rollout(const Scope& s, const ModelConfig& cfg, Var p0, Var v0, Var u, const std::vector<bool>& is_vehicle) {
  check_controls(p0, u, "rollout");
  const std::size_t R = u.value().dim(0), T = u.value().dim(1);
  if (is_vehicle.size() != R) throw DimensionError("rollout: one agent type per row required");
  std::vector<std::size_t> veh, ped;
  for (std::size_t r = 0; r < R; ++r) (is_vehicle[r] ? veh : ped).push_back(r);
  if (ped.empty()) return rollout_vehicles(p0, v0, u, cfg.dt);
  if (veh.empty()) return rollout_pedestrians(s, cfg, p0, u, cfg.dt);

  auto rows_of = [&](Var x, const std::vector<std::size_t>& idx, std::size_t width) {
    return ops::gather_rows(ops::reshape(x, Shape{R, width}), idx);
  };
  Var yv = rollout_vehicles(rows_of(p0, veh, 2), rows_of(v0, veh, 2),
                            ops::reshape(rows_of(u, veh, 2 * T), Shape{veh.size(), T, 2}), cfg.dt);
  Var yp = rollout_pedestrians(s, cfg, rows_of(p0, ped, 2),
                               ops::reshape(rows_of(u, ped, 2 * T), Shape{ped.size(), T, 2}), cfg.dt);
  // Put rows back in their original order: gather from the stacked [veh; ped] rows.
  std::vector<std::size_t> order(R);
  for (std::size_t i = 0; i < veh.size(); ++i) order[veh[i]] = i;
  for (std::size_t i = 0; i < ped.size(); ++i) order[ped[i]] = veh.size() + i;
  Var stacked = ops::concat_rows({ops::reshape(yv, Shape{veh.size(), 2 * T}), ops::reshape(yp, Shape{ped.size(), 2 * T})});
  return ops::reshape(ops::gather_rows(stacked, order), Shape{R, T, 2});
}

std::vector<double> max_implied_accel(const Tensor& p0, const Tensor& v0, const Tensor& positions, double dt) {
  if (positions.rank() != 3 || positions.dim(2) != 2) throw DimensionError("max_implied_accel: positions must be [R, T, 2]");
  const std::size_t R = positions.dim(0), T = positions.dim(1);
  if (p0.size() != 2 * R || v0.size() != 2 * R) throw DimensionError("max_implied_accel: anchors must be [R, 2]");
  std::vector<double> out(R, 0.0);
  for (std::size_t r = 0; r < R; ++r) {
    double px = p0[2 * r], py = p0[2 * r + 1], vx = v0[2 * r], vy = v0[2 * r + 1];
    for (std::size_t t = 0; t < T; ++t) {
      const double nx = positions[(r * T + t) * 2], ny = positions[(r * T + t) * 2 + 1];
      const double wx = 2.0 * (nx - px) / dt - vx, wy = 2.0 * (ny - py) / dt - vy;
      out[r] = std::max(out[r], std::hypot(wx - vx, wy - vy) / dt);
      px = nx;
      py = ny;
      vx = wx;
      vy = wy;
    }
  }
  return out;
}

}  // namespace parkdiff
