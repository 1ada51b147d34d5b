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

#include <array>
#include <limits>
#include <optional>
#include <vector>

#include "parkdiff/scene.hpp"
#include "parkdiff/tensor.hpp"

namespace parkdiff {

inline constexpr std::size_t kAgentFeatures = 12;
inline constexpr std::size_t kMapFeatures = 2 + kPolylineTypes;

struct PreprocessConfig {
  std::size_t history_steps = 10;  // T_p
  std::size_t future_steps = 10;   // T_f
  double radius = 20.0;            // m
  std::size_t max_agents = 32;     // N_max, ego included
};

// Rigid frame anchored at the ego pose at t0 (x-axis along the ego heading).
struct EgoFrame {
  double x0 = 0.0, y0 = 0.0, h0 = 0.0;

  Vec2 to_local(const Vec2& p) const;  // point
  Vec2 rotate(const Vec2& v) const;    // direction / velocity / acceleration
  double heading(double h) const { return wrap_angle(h - h0); }
};

// Finite-difference kinematics of a track at timestamp t:
//   velocity components = (p(t) - p(t-1)) / dt
//   acceleration        = (vel(t) - vel(t-1)) / dt
//   signed speed        = |vel| * sign(<vel, heading unit vector>)
// When the previous samples are missing the next interval is used instead
// (backfilled = true), but never beyond `latest` so nothing leaks from the
// future of a prediction window. With no usable interval the values are 0.
struct TrackKinematics {
  Vec2 velocity{0.0, 0.0};
  Vec2 acceleration{0.0, 0.0};
  double signed_speed = 0.0;
  bool backfilled = false;
};
TrackKinematics track_kinematics(const AgentTrack& track, std::size_t t, double dt,
                                 std::size_t latest = std::numeric_limits<std::size_t>::max());

// Recomputes the stored v/ax/ay of every valid state from positions.
void fill_track_kinematics(AgentTrack& track, double dt);

// The 12-vector (x, y, h, v, a_x, a_y, x_rel, y_rel, h_rel, v_rel, a_x_rel,
// a_y_rel) of `track` at t, expressed in `frame`. Relative entries are
// (agent - ego) at the same timestamp and are zero when the ego is invalid.
struct AgentFeatures {
  std::array<double, kAgentFeatures> values{};
  bool backfilled = false;
};
AgentFeatures compute_features(const AgentTrack& track, const AgentTrack& ego, std::size_t t,
                               double dt, const EgoFrame& frame,
                               std::size_t latest = std::numeric_limits<std::size_t>::max());

// One ego-centric sample. Agent 0 is the ego; the rest are ordered by
// distance to the ego at t0 (ties by id).
struct EgoSample {
  std::size_t scene_index = 0;
  int ego_id = 0;
  std::size_t t0 = 0;
  std::vector<int> agent_ids;
  std::vector<AgentType> agent_types;

  Tensor agent_features;  // [N, T_p, 12]
  Tensor agent_valid;     // [N, T_p]
  Tensor soft_polys;      // [N_soft, P, F_map]
  Tensor hard_polys;      // [N_hard, P, F_map]
  Tensor gt_future;       // [N, T_f, 2]; invalid steps hold the last known position
  Tensor future_valid;    // [N, T_f]

  // Rollout anchor per agent: position at t0 and finite-difference velocity.
  Tensor anchor_pos;  // [N, 2]
  Tensor anchor_vel;  // [N, 2]

  std::size_t num_agents() const { return agent_ids.size(); }
  std::size_t history_steps() const { return agent_features.rank() == 3 ? agent_features.dim(1) : 0; }
  std::size_t future_steps() const { return gt_future.rank() == 3 ? gt_future.dim(1) : 0; }
  std::size_t num_soft() const { return soft_polys.rank() == 3 ? soft_polys.dim(0) : 0; }
  std::size_t num_hard() const { return hard_polys.rank() == 3 ? hard_polys.dim(0) : 0; }
};

// Builds the sample for `ego_id` at t0. Returns nullopt when the ego is not
// valid at t0. Throws ContractError when the window [t0-T_p+1, t0+T_f] does
// not fit the recording or the ego id is unknown.
std::optional<EgoSample> ego_transform(const Scene& scene, int ego_id, std::size_t t0,
                                       const PreprocessConfig& cfg, std::size_t scene_index = 0);

struct SamplingConfig {
  std::size_t stride = 5;               // between consecutive t0 in a scene
  std::size_t max_egos_per_window = 2;  // vehicles valid at t0, lowest ids first
};

std::vector<EgoSample> make_samples(const std::vector<Scene>& scenes, const PreprocessConfig& cfg,
                                    const SamplingConfig& sampling);

// Drops polylines (for map masking ablations). keep_soft/keep_hard are
// indices into the sample's soft/hard sets.
EgoSample with_polylines(const EgoSample& sample, const std::vector<std::size_t>& keep_soft,
                         const std::vector<std::size_t>& keep_hard);

}  // namespace parkdiff
