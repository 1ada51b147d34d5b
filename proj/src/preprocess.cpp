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

#include "parkdiff/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "parkdiff/error.hpp"

namespace parkdiff {

Vec2 EgoFrame::rotate(const Vec2& v) const {
  const double c = std::cos(h0), s = std::sin(h0);
  return {c * v[0] + s * v[1], -s * v[0] + c * v[1]};
}

Vec2 EgoFrame::to_local(const Vec2& p) const { return rotate({p[0] - x0, p[1] - y0}); }

namespace {

bool displacement_velocity(const AgentTrack& tr, std::size_t s, double dt, Vec2& out) {
  if (s == 0 || s >= tr.states.size() || !tr.valid[s] || !tr.valid[s - 1]) return false;
  out = {(tr.states[s].x - tr.states[s - 1].x) / dt, (tr.states[s].y - tr.states[s - 1].y) / dt};
  return true;
}

}  // namespace

TrackKinematics track_kinematics(const AgentTrack& track, std::size_t t, double dt,
                                 std::size_t latest) {
  TrackKinematics k;
  if (t >= track.states.size() || !track.valid[t]) return k;
  auto usable = [&](std::size_t s) { return s <= latest && s < track.states.size(); };

  Vec2 d_now{}, d_prev{}, d_next{}, d_next2{};
  const bool has_now = displacement_velocity(track, t, dt, d_now);
  const bool has_prev = t >= 1 && displacement_velocity(track, t - 1, dt, d_prev);
  const bool has_next = usable(t + 1) && displacement_velocity(track, t + 1, dt, d_next);
  const bool has_next2 = has_next && usable(t + 2) && displacement_velocity(track, t + 2, dt, d_next2);

  if (has_now) {
    k.velocity = d_now;
  } else {
    k.backfilled = true;
    if (has_next) k.velocity = d_next;
  }

  if (has_now && has_prev) {
    k.acceleration = {(d_now[0] - d_prev[0]) / dt, (d_now[1] - d_prev[1]) / dt};
  } else {
    k.backfilled = true;
    if (has_now && has_next) {
      k.acceleration = {(d_next[0] - d_now[0]) / dt, (d_next[1] - d_now[1]) / dt};
    } else if (!has_now && has_next2) {
      k.acceleration = {(d_next2[0] - d_next[0]) / dt, (d_next2[1] - d_next[1]) / dt};
    }
  }

  const double speed = std::hypot(k.velocity[0], k.velocity[1]);
  const double h = track.states[t].h;
  const double along = k.velocity[0] * std::cos(h) + k.velocity[1] * std::sin(h);
  k.signed_speed = along < 0.0 ? -speed : speed;
  return k;
}

void fill_track_kinematics(AgentTrack& track, double dt) {
  std::vector<TrackKinematics> ks(track.states.size());
  for (std::size_t t = 0; t < track.states.size(); ++t) ks[t] = track_kinematics(track, t, dt);
  for (std::size_t t = 0; t < track.states.size(); ++t) {
    if (!track.valid[t]) continue;
    track.states[t].v = ks[t].signed_speed;
    track.states[t].ax = ks[t].acceleration[0];
    track.states[t].ay = ks[t].acceleration[1];
  }
}

AgentFeatures compute_features(const AgentTrack& track, const AgentTrack& ego, std::size_t t,
                               double dt, const EgoFrame& frame, std::size_t latest) {
  if (t >= track.states.size() || !track.valid[t]) {
    throw ContractError("compute_features: track " + std::to_string(track.id) +
                        " is not valid at step " + std::to_string(t));
  }
  AgentFeatures out;
  auto& f = out.values;
  const AgentState& s = track.states[t];
  const TrackKinematics k = track_kinematics(track, t, dt, latest);
  const Vec2 p = frame.to_local({s.x, s.y});
  const Vec2 a = frame.rotate(k.acceleration);
  f[0] = p[0];
  f[1] = p[1];
  f[2] = frame.heading(s.h);
  f[3] = k.signed_speed;
  f[4] = a[0];
  f[5] = a[1];
  out.backfilled = k.backfilled;
  if (t < ego.states.size() && ego.valid[t]) {
    const AgentState& e = ego.states[t];
    const TrackKinematics ke = track_kinematics(ego, t, dt, latest);
    const Vec2 pe = frame.to_local({e.x, e.y});
    const Vec2 ae = frame.rotate(ke.acceleration);
    f[6] = p[0] - pe[0];
    f[7] = p[1] - pe[1];
    f[8] = wrap_angle(s.h - e.h);
    f[9] = k.signed_speed - ke.signed_speed;
    f[10] = a[0] - ae[0];
    f[11] = a[1] - ae[1];
  }
  return out;
}

namespace {

Tensor polyline_tensor(const std::vector<const Polyline*>& polys, const EgoFrame& frame) {
  Tensor t(Shape{polys.size(), kPolylinePoints, kMapFeatures});
  for (std::size_t i = 0; i < polys.size(); ++i) {
    const Polyline& pl = *polys[i];
    if (pl.points.size() != kPolylinePoints) {
      throw ContractError("polyline with " + std::to_string(pl.points.size()) + " points, expected " +
                          std::to_string(kPolylinePoints));
    }
    if (pl.type < 0 || pl.type >= static_cast<int>(kPolylineTypes)) {
      throw ContractError("polyline type code out of range: " + std::to_string(pl.type));
    }
    for (std::size_t k = 0; k < kPolylinePoints; ++k) {
      const Vec2 q = frame.to_local(pl.points[k]);
      double* row = t.data() + (i * kPolylinePoints + k) * kMapFeatures;
      row[0] = q[0];
      row[1] = q[1];
      row[2 + static_cast<std::size_t>(pl.type)] = 1.0;
    }
  }
  return t;
}

std::vector<const Polyline*> polylines_near(const std::vector<Polyline>& polys, const Vec2& c,
                                            double radius) {
  std::vector<const Polyline*> out;
  for (const Polyline& pl : polys) {
    for (const Vec2& p : pl.points) {
      if (std::hypot(p[0] - c[0], p[1] - c[1]) <= radius) {
        out.push_back(&pl);
        break;
      }
    }
  }
  return out;
}

}  // namespace

std::optional<EgoSample> ego_transform(const Scene& scene, int ego_id, std::size_t t0,
                                       const PreprocessConfig& cfg, std::size_t scene_index) {
  const auto ego_it = std::find_if(scene.agents.begin(), scene.agents.end(),
                                   [&](const AgentTrack& a) { return a.id == ego_id; });
  if (ego_it == scene.agents.end()) {
    throw ContractError("ego_transform: unknown ego id " + std::to_string(ego_id));
  }
  const std::size_t Tp = cfg.history_steps, Tf = cfg.future_steps;
  const std::size_t len = scene.num_steps();
  if (Tp == 0 || t0 + 1 < Tp || t0 + Tf >= len) {
    throw ContractError("ego_transform: window around t0=" + std::to_string(t0) +
                        " does not fit a recording of " + std::to_string(len) + " steps");
  }
  const AgentTrack& ego = *ego_it;
  if (t0 >= ego.states.size() || !ego.valid[t0]) return std::nullopt;

  const AgentState& es = ego.states[t0];
  const EgoFrame frame{es.x, es.y, es.h};

  struct Candidate {
    const AgentTrack* track;
    double dist;
  };
  std::vector<Candidate> others;
  for (const AgentTrack& a : scene.agents) {
    if (a.id == ego_id || t0 >= a.states.size() || !a.valid[t0]) continue;
    const double d = std::hypot(a.states[t0].x - es.x, a.states[t0].y - es.y);
    if (d <= cfg.radius) others.push_back({&a, d});
  }
  std::sort(others.begin(), others.end(), [](const Candidate& a, const Candidate& b) {
    return a.dist != b.dist ? a.dist < b.dist : a.track->id < b.track->id;
  });
  std::vector<const AgentTrack*> included{&ego};
  for (const auto& c : others) {
    if (included.size() >= cfg.max_agents) break;
    included.push_back(c.track);
  }

  const std::size_t N = included.size();
  EgoSample s;
  s.scene_index = scene_index;
  s.ego_id = ego_id;
  s.t0 = t0;
  s.agent_features = Tensor(Shape{N, Tp, kAgentFeatures});
  s.agent_valid = Tensor(Shape{N, Tp});
  s.gt_future = Tensor(Shape{N, Tf, 2});
  s.future_valid = Tensor(Shape{N, Tf});
  s.anchor_pos = Tensor(Shape{N, 2});
  s.anchor_vel = Tensor(Shape{N, 2});
  for (std::size_t i = 0; i < N; ++i) {
    const AgentTrack& tr = *included[i];
    s.agent_ids.push_back(tr.id);
    s.agent_types.push_back(tr.type);
    for (std::size_t k = 0; k < Tp; ++k) {
      const std::size_t t = t0 + 1 - Tp + k;
      if (t >= tr.states.size() || !tr.valid[t]) continue;
      const AgentFeatures f = compute_features(tr, ego, t, scene.dt, frame, t0);
      std::copy(f.values.begin(), f.values.end(), s.agent_features.data() + (i * Tp + k) * kAgentFeatures);
      s.agent_valid[i * Tp + k] = 1.0;
    }
    const Vec2 p0 = frame.to_local({tr.states[t0].x, tr.states[t0].y});
    const Vec2 v0 = frame.rotate(track_kinematics(tr, t0, scene.dt, t0).velocity);
    s.anchor_pos[i * 2] = p0[0];
    s.anchor_pos[i * 2 + 1] = p0[1];
    s.anchor_vel[i * 2] = v0[0];
    s.anchor_vel[i * 2 + 1] = v0[1];
    Vec2 last = p0;
    for (std::size_t k = 0; k < Tf; ++k) {
      const std::size_t t = t0 + 1 + k;
      if (t < tr.states.size() && tr.valid[t]) {
        last = frame.to_local({tr.states[t].x, tr.states[t].y});
        s.future_valid[i * Tf + k] = 1.0;
      }
      s.gt_future[(i * Tf + k) * 2] = last[0];
      s.gt_future[(i * Tf + k) * 2 + 1] = last[1];
    }
  }
  s.soft_polys = polyline_tensor(polylines_near(scene.map.soft, {es.x, es.y}, cfg.radius), frame);
  s.hard_polys = polyline_tensor(polylines_near(scene.map.hard, {es.x, es.y}, cfg.radius), frame);
  return s;
}

std::vector<EgoSample> make_samples(const std::vector<Scene>& scenes, const PreprocessConfig& cfg,
                                    const SamplingConfig& sampling) {
  if (sampling.stride == 0) throw ConfigError("sampling stride must be positive");
  std::vector<EgoSample> out;
  for (std::size_t si = 0; si < scenes.size(); ++si) {
    const Scene& scene = scenes[si];
    const std::size_t len = scene.num_steps();
    std::vector<const AgentTrack*> vehicles;
    for (const auto& a : scene.agents) {
      if (a.type == AgentType::kVehicle) vehicles.push_back(&a);
    }
    std::sort(vehicles.begin(), vehicles.end(),
              [](const AgentTrack* a, const AgentTrack* b) { return a->id < b->id; });
    for (std::size_t t0 = cfg.history_steps - 1; t0 + cfg.future_steps < len;
         t0 += sampling.stride) {
      std::vector<const AgentTrack*> egos;
      for (const AgentTrack* v : vehicles) {
        if (t0 < v->states.size() && v->valid[t0] && t0 + 1 < v->states.size() && v->valid[t0 + 1]) {
          egos.push_back(v);
        }
      }
      if (egos.empty()) continue;
      const std::size_t take = std::min(sampling.max_egos_per_window, egos.size());
      for (std::size_t j = 0; j < take; ++j) {
        const AgentTrack* ego = egos[j];
        if (auto sample = ego_transform(scene, ego->id, t0, cfg, si)) out.push_back(std::move(*sample));
      }
    }
  }
  return out;
}

EgoSample with_polylines(const EgoSample& sample, const std::vector<std::size_t>& keep_soft,
                         const std::vector<std::size_t>& keep_hard) {
  auto select = [](const Tensor& polys, const std::vector<std::size_t>& keep) {
    const std::size_t stride = kPolylinePoints * kMapFeatures;
    Tensor out(Shape{keep.size(), kPolylinePoints, kMapFeatures});
    for (std::size_t i = 0; i < keep.size(); ++i) {
      if (polys.rank() != 3 || keep[i] >= polys.dim(0)) throw ContractError("with_polylines: bad index");
      std::copy_n(polys.data() + keep[i] * stride, stride, out.data() + i * stride);
    }
    return out;
  };
  EgoSample out = sample;
  out.soft_polys = select(sample.soft_polys, keep_soft);
  out.hard_polys = select(sample.hard_polys, keep_hard);
  return out;
}

}  // namespace parkdiff
