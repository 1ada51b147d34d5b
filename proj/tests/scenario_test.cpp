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

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "parkdiff/error.hpp"
#include "parkdiff/preprocess.hpp"
#include "parkdiff/scene_io.hpp"
#include "parkdiff/synth.hpp"

namespace parkdiff {
namespace {

AgentTrack straight_track(int id, AgentType type, double x0, double y0, double vx, double vy, double h,
                          std::size_t steps, double dt = 0.4) {
  AgentTrack tr;
  tr.id = id;
  tr.type = type;
  for (std::size_t t = 0; t < steps; ++t) {
    AgentState s;
    s.x = x0 + vx * dt * static_cast<double>(t);
    s.y = y0 + vy * dt * static_cast<double>(t);
    s.h = h;
    tr.states.push_back(s);
    tr.valid.push_back(true);
  }
  fill_track_kinematics(tr, dt);
  return tr;
}

Polyline line_polyline(Vec2 a, Vec2 b, PolylineType type) {
  return {resample_polyline({a, b}), static_cast<int>(type)};
}

Scene small_scene() {
  Scene s;
  s.agents.push_back(straight_track(0, AgentType::kVehicle, 10, 10, 0, 1.5, kPi / 2, 25));
  s.agents.push_back(straight_track(1, AgentType::kPedestrian, 10, 20, 1.0, 0.0, 0.0, 25));
  s.agents.push_back(straight_track(2, AgentType::kVehicle, 40, 40, -1.0, 0.0, kPi, 25));
  s.agents.push_back(straight_track(3, AgentType::kVehicle, 5, 3, 2.0, 0.5, 0.3, 25));
  s.map.soft.push_back(line_polyline({0, 5}, {30, 5}, PolylineType::kLaneEdge));
  s.map.soft.push_back(line_polyline({60, 60}, {70, 60}, PolylineType::kSpotBoundary));
  s.map.hard.push_back(line_polyline({8, 8}, {8, 12}, PolylineType::kObstacle));
  return s;
}

Scene rigid_transform(const Scene& s, double angle, double tx, double ty) {
  Scene out = s;
  const double c = std::cos(angle), sn = std::sin(angle);
  auto tf = [&](Vec2 p) { return Vec2{c * p[0] - sn * p[1] + tx, sn * p[0] + c * p[1] + ty}; };
  for (auto& a : out.agents) {
    for (auto& st : a.states) {
      const Vec2 p = tf({st.x, st.y});
      st.x = p[0];
      st.y = p[1];
      st.h = wrap_angle(st.h + angle);
    }
    fill_track_kinematics(a, s.dt);
  }
  for (auto* set : {&out.map.soft, &out.map.hard}) {
    for (auto& pl : *set) {
      for (auto& p : pl.points) p = tf(p);
    }
  }
  return out;
}

void expect_tensor_near(const Tensor& a, const Tensor& b, double tol) {
  ASSERT_EQ(a.shape(), b.shape());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], tol) << "index " << i;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("parkdiff_" + name)).string();
}

SynthConfig small_synth() {
  SynthConfig c;
  c.num_scenes = 12;
  return c;
}

TEST(WrapAngle, RangeAndTies) {
  EXPECT_DOUBLE_EQ(wrap_angle(0.0), 0.0);
  EXPECT_DOUBLE_EQ(wrap_angle(kPi), kPi);
  EXPECT_DOUBLE_EQ(wrap_angle(-kPi), kPi);
  EXPECT_NEAR(wrap_angle(3 * kPi / 2), -kPi / 2, 1e-12);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(-50, 50);
  for (int i = 0; i < 1000; ++i) {
    const double a = d(rng), w = wrap_angle(a);
    EXPECT_GT(w, -kPi);
    EXPECT_LE(w, kPi);
    EXPECT_NEAR(std::remainder(a - w, 2 * kPi), 0.0, 1e-9);
  }
}

TEST(ResamplePolyline, UniformArcLength) {
  const auto pts = resample_polyline({{0, 0}, {3, 0}, {3, 6}}, 10);
  ASSERT_EQ(pts.size(), 10u);
  EXPECT_EQ(pts.front(), (Vec2{0, 0}));
  EXPECT_EQ(pts.back(), (Vec2{3, 6}));
  EXPECT_NEAR(pts[1][0], 1.0, 1e-12);
  EXPECT_NEAR(pts[4][0], 3.0, 1e-12);
  EXPECT_NEAR(pts[4][1], 1.0, 1e-12);
  EXPECT_THROW(resample_polyline({}, 10), ContractError);
}

TEST(ComputeFeatures, StationaryAgent) {
  const AgentTrack tr = straight_track(0, AgentType::kVehicle, 3, 4, 0, 0, 0.5, 5);
  const auto f = compute_features(tr, tr, 3, 0.4, EgoFrame{});
  EXPECT_EQ(f.values[3], 0.0);
  EXPECT_EQ(f.values[4], 0.0);
  EXPECT_EQ(f.values[5], 0.0);
}

TEST(ComputeFeatures, ReversingGivesNegativeSpeed) {
  // Heading +x, moving 2 m per step along -x.
  const AgentTrack tr = straight_track(0, AgentType::kVehicle, 0, 0, -5.0, 0, 0.0, 5);
  const auto f = compute_features(tr, tr, 2, 0.4, EgoFrame{});
  EXPECT_NEAR(f.values[3], -5.0, 1e-12);
  EXPECT_FALSE(f.backfilled);
}

TEST(ComputeFeatures, AgentEqualsEgoHasZeroRelative) {
  const AgentTrack tr = straight_track(0, AgentType::kVehicle, 1, 2, 1.0, 0.7, 0.2, 6);
  const auto f = compute_features(tr, tr, 4, 0.4, EgoFrame{1, 2, 0.2});
  for (int k = 6; k < 12; ++k) EXPECT_EQ(f.values[k], 0.0);
}

TEST(ComputeFeatures, FirstStepIsBackfilled) {
  const AgentTrack tr = straight_track(0, AgentType::kVehicle, 0, 0, 2.0, 0, 0.0, 5);
  const auto f = compute_features(tr, tr, 0, 0.4, EgoFrame{});
  EXPECT_TRUE(f.backfilled);
  EXPECT_NEAR(f.values[3], 2.0, 1e-12);
}

TEST(ComputeFeatures, BackfillNeverLooksPastLatest) {
  AgentTrack tr = straight_track(0, AgentType::kVehicle, 0, 0, 2.0, 0, 0.0, 5);
  for (std::size_t t = 0; t < 3; ++t) tr.valid[t] = false;
  const auto k = track_kinematics(tr, 3, 0.4, 3);
  EXPECT_TRUE(k.backfilled);
  EXPECT_EQ(k.velocity, (Vec2{0, 0}));
  EXPECT_NEAR(track_kinematics(tr, 3, 0.4).velocity[0], 2.0, 1e-12);
}

TEST(ComputeFeatures, InvalidTrackThrows) {
  AgentTrack tr = straight_track(0, AgentType::kVehicle, 0, 0, 1, 0, 0, 3);
  tr.valid[1] = false;
  EXPECT_THROW(compute_features(tr, tr, 1, 0.4, EgoFrame{}), ContractError);
}

TEST(SignedVelocity, SignMatchesDisplacementProjection) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> d(-3, 3), ang(-kPi, kPi);
  for (int i = 0; i < 500; ++i) {
    const double vx = d(rng), vy = d(rng), h = ang(rng);
    const AgentTrack tr = straight_track(0, AgentType::kVehicle, d(rng), d(rng), vx, vy, h, 3);
    const double proj = vx * std::cos(h) + vy * std::sin(h);
    if (std::hypot(vx, vy) * 0.4 <= 1e-6 || std::abs(proj) < 1e-9) continue;
    const double v = track_kinematics(tr, 2, 0.4).signed_speed;
    EXPECT_EQ(v > 0, proj > 0);
    EXPECT_NEAR(std::abs(v), std::hypot(vx, vy), 1e-9);
  }
}

TEST(EgoTransform, HandRotationExample) {
  Scene s;
  AgentTrack ego = straight_track(0, AgentType::kVehicle, 10, 10, 0, 0, kPi / 2, 21);
  AgentTrack other = straight_track(1, AgentType::kVehicle, 10, 20, 0, 0, kPi / 2, 21);
  s.agents = {ego, other};
  const auto sample = ego_transform(s, 0, 9, PreprocessConfig{});
  ASSERT_TRUE(sample.has_value());
  ASSERT_EQ(sample->num_agents(), 2u);
  const double* f = sample->agent_features.data() + (1 * 10 + 9) * kAgentFeatures;
  EXPECT_NEAR(f[0], 10.0, 1e-12);
  EXPECT_NEAR(f[1], 0.0, 1e-12);
  EXPECT_NEAR(f[2], 0.0, 1e-12);
}

TEST(EgoTransform, CoincidentAgentAtOrigin) {
  Scene s;
  s.agents = {straight_track(0, AgentType::kVehicle, 3, -2, 1, 1, kPi / 4, 21),
              straight_track(5, AgentType::kPedestrian, 3, -2, 1, 1, kPi / 4, 21)};
  const auto sample = ego_transform(s, 0, 10, PreprocessConfig{});
  ASSERT_TRUE(sample.has_value());
  const double* f = sample->agent_features.data() + (1 * 10 + 9) * kAgentFeatures;
  EXPECT_NEAR(f[0], 0.0, 1e-12);
  EXPECT_NEAR(f[1], 0.0, 1e-12);
  EXPECT_NEAR(f[8], 0.0, 1e-12);
}

TEST(EgoTransform, EgoRowHasZeroRelativeFeatures) {
  const auto sample = ego_transform(small_scene(), 0, 12, PreprocessConfig{});
  ASSERT_TRUE(sample.has_value());
  EXPECT_EQ(sample->agent_ids[0], 0);
  for (std::size_t t = 0; t < 10; ++t) {
    ASSERT_EQ(sample->agent_valid[t], 1.0);
    for (std::size_t k = 6; k < 12; ++k) EXPECT_EQ(sample->agent_features[t * kAgentFeatures + k], 0.0);
  }
  EXPECT_NEAR(sample->agent_features[9 * kAgentFeatures + 0], 0.0, 1e-12);
  EXPECT_NEAR(sample->agent_features[9 * kAgentFeatures + 1], 0.0, 1e-12);
}

TEST(EgoTransform, RigidMotionInvariance) {
  const Scene base = small_scene();
  const auto ref = ego_transform(base, 0, 12, PreprocessConfig{});
  ASSERT_TRUE(ref.has_value());
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ang(-kPi, kPi), off(-100, 100);
  for (int trial = 0; trial < 20; ++trial) {
    const auto moved = ego_transform(rigid_transform(base, ang(rng), off(rng), off(rng)), 0, 12, PreprocessConfig{});
    ASSERT_TRUE(moved.has_value());
    EXPECT_EQ(moved->agent_ids, ref->agent_ids);
    EXPECT_EQ(moved->agent_valid, ref->agent_valid);
    for (std::size_t i = 0; i < ref->agent_features.size(); ++i) {
      const std::size_t k = i % kAgentFeatures;
      double diff = moved->agent_features[i] - ref->agent_features[i];
      if (k == 2 || k == 8) diff = wrap_angle(diff);
      EXPECT_NEAR(diff, 0.0, 1e-9) << "feature " << i;
    }
    expect_tensor_near(moved->gt_future, ref->gt_future, 1e-9);
    expect_tensor_near(moved->soft_polys, ref->soft_polys, 1e-9);
    expect_tensor_near(moved->hard_polys, ref->hard_polys, 1e-9);
    expect_tensor_near(moved->anchor_vel, ref->anchor_vel, 1e-9);
  }
}

TEST(EgoTransform, RadiusFilter) {
  const std::vector<Scene> scenes = synth_generate(small_synth(), 4);
  const PreprocessConfig cfg;
  std::size_t checked = 0;
  for (const auto& sample : make_samples(scenes, cfg, SamplingConfig{})) {
    const Scene& sc = scenes[sample.scene_index];
    const AgentTrack* ego = nullptr;
    for (const auto& a : sc.agents) {
      if (a.id == sample.ego_id) ego = &a;
    }
    ASSERT_NE(ego, nullptr);
    const AgentState& e = ego->states[sample.t0];
    for (const auto& a : sc.agents) {
      if (sample.t0 >= a.states.size() || !a.valid[sample.t0]) continue;
      const double d = std::hypot(a.states[sample.t0].x - e.x, a.states[sample.t0].y - e.y);
      const bool included = std::find(sample.agent_ids.begin(), sample.agent_ids.end(), a.id) != sample.agent_ids.end();
      if (sample.num_agents() < cfg.max_agents) EXPECT_EQ(included, d <= cfg.radius);
      if (included) EXPECT_LE(d, cfg.radius);
      ++checked;
    }
  }
  EXPECT_GT(checked, 100u);
}

TEST(EgoTransform, NearestFirstAndCapped) {
  Scene s;
  s.agents.push_back(straight_track(0, AgentType::kVehicle, 0, 0, 0, 0, 0, 21));
  for (int i = 1; i <= 40; ++i) {
    s.agents.push_back(straight_track(i, AgentType::kPedestrian, 0.4 * (41 - i), 1, 0, 0, 0, 21));
  }
  PreprocessConfig cfg;
  const auto sample = ego_transform(s, 0, 10, cfg);
  ASSERT_TRUE(sample.has_value());
  EXPECT_EQ(sample->num_agents(), cfg.max_agents);
  EXPECT_EQ(sample->agent_ids[1], 40);
  EXPECT_EQ(sample->agent_ids[2], 39);
}

TEST(EgoTransform, InvalidEgoRejectedAndWindowChecked) {
  Scene s = small_scene();
  s.agents[0].valid[12] = false;
  EXPECT_FALSE(ego_transform(s, 0, 12, PreprocessConfig{}).has_value());
  EXPECT_THROW(ego_transform(s, 0, 5, PreprocessConfig{}), ContractError);
  EXPECT_THROW(ego_transform(s, 0, 20, PreprocessConfig{}), ContractError);
  EXPECT_THROW(ego_transform(s, 99, 12, PreprocessConfig{}), ContractError);
}

TEST(EgoTransform, ShortHistoryIsMasked) {
  Scene s = small_scene();
  for (std::size_t t = 0; t < 8; ++t) s.agents[1].valid[t] = false;
  const auto sample = ego_transform(s, 0, 12, PreprocessConfig{});
  ASSERT_TRUE(sample.has_value());
  const auto it = std::find(sample->agent_ids.begin(), sample->agent_ids.end(), 1);
  ASSERT_NE(it, sample->agent_ids.end());
  const std::size_t i = static_cast<std::size_t>(it - sample->agent_ids.begin());
  for (std::size_t k = 0; k < 10; ++k) {
    const std::size_t t = 3 + k;
    EXPECT_EQ(sample->agent_valid[i * 10 + k], t >= 8 ? 1.0 : 0.0);
  }
}

TEST(EgoTransform, PolylineOneHotAndMembership) {
  const auto sample = ego_transform(small_scene(), 0, 12, PreprocessConfig{});
  ASSERT_TRUE(sample.has_value());
  EXPECT_EQ(sample->num_soft(), 1u);
  EXPECT_EQ(sample->num_hard(), 1u);
  for (std::size_t k = 0; k < kPolylinePoints; ++k) {
    const double* row = sample->hard_polys.data() + k * kMapFeatures;
    EXPECT_EQ(row[2 + static_cast<int>(PolylineType::kObstacle)], 1.0);
    EXPECT_EQ(row[2] + row[3] + row[4] + row[5], 1.0);
  }
  const EgoSample none = with_polylines(*sample, {}, {});
  EXPECT_EQ(none.num_soft(), 0u);
  EXPECT_EQ(none.num_hard(), 0u);
}

TEST(Synth, DeterministicPerSeed) {
  const auto a = synth_generate(small_synth(), 1);
  const auto b = synth_generate(small_synth(), 1);
  const auto c = synth_generate(small_synth(), 2);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
}

TEST(Synth, FeasibilityInvariants) {
  SynthConfig cfg = small_synth();
  cfg.num_scenes = 40;
  const auto scenes = synth_generate(cfg, 7);
  std::size_t vehicles = 0, pedestrians = 0;
  for (const Scene& s : scenes) {
    EXPECT_EQ(s.num_steps(), cfg.num_steps);
    for (const AgentTrack& a : s.agents) {
      (a.type == AgentType::kVehicle ? vehicles : pedestrians)++;
      for (std::size_t t = 0; t < a.states.size(); ++t) {
        if (!a.valid[t]) continue;
        const AgentState& st = a.states[t];
        EXPECT_GE(st.x, 0.0);
        EXPECT_LE(st.x, cfg.lot_width());
        EXPECT_GE(st.y, 0.0);
        EXPECT_LE(st.y, cfg.lot_height());
        EXPECT_GT(st.h, -kPi);
        EXPECT_LE(st.h, kPi);
        if (a.type == AgentType::kVehicle) {
          EXPECT_LE(std::hypot(st.ax, st.ay), kMaxAccel) << "agent " << a.id << " step " << t;
        }
        if (t > 0 && a.valid[t - 1]) {
          const double sp = std::hypot(st.x - a.states[t - 1].x, st.y - a.states[t - 1].y) / s.dt;
          if (a.type == AgentType::kPedestrian) EXPECT_LE(sp, 2.0);
        }
      }
    }
    for (const auto& pl : s.map.soft) {
      EXPECT_EQ(pl.points.size(), kPolylinePoints);
      EXPECT_NE(pl.type, static_cast<int>(PolylineType::kObstacle));
    }
    for (const auto& pl : s.map.hard) {
      EXPECT_EQ(pl.points.size(), kPolylinePoints);
      EXPECT_EQ(pl.type, static_cast<int>(PolylineType::kObstacle));
    }
  }
  EXPECT_GT(vehicles, 100u);
  EXPECT_GT(pedestrians, 30u);
}

TEST(Synth, SecondDifferenceAccelerationBound) {
  const auto scenes = synth_generate(small_synth(), 9);
  for (const Scene& s : scenes) {
    for (const AgentTrack& a : s.agents) {
      if (a.type != AgentType::kVehicle) continue;
      for (std::size_t t = 2; t < a.states.size(); ++t) {
        if (!a.valid[t] || !a.valid[t - 1] || !a.valid[t - 2]) continue;
        const double ax = (a.states[t].x - 2 * a.states[t - 1].x + a.states[t - 2].x) / (s.dt * s.dt);
        const double ay = (a.states[t].y - 2 * a.states[t - 1].y + a.states[t - 2].y) / (s.dt * s.dt);
        EXPECT_LE(std::hypot(ax, ay), kMaxAccel);
      }
    }
  }
}

TEST(Synth, ContainsReversingVehicles) {
  SynthConfig cfg = small_synth();
  cfg.num_scenes = 30;
  std::size_t reversing = 0;
  for (const Scene& s : synth_generate(cfg, 3)) {
    for (const AgentTrack& a : s.agents) {
      if (a.type != AgentType::kVehicle) continue;
      for (std::size_t t = 0; t < a.states.size(); ++t) {
        if (a.valid[t] && a.states[t].v < -0.5) ++reversing;
      }
    }
  }
  EXPECT_GT(reversing, 20u);
}

TEST(Synth, NoPedestriansWhenNoneConfigured) {
  SynthConfig cfg = small_synth();
  cfg.min_pedestrians = cfg.max_pedestrians = 0;
  for (const Scene& s : synth_generate(cfg, 1)) {
    for (const AgentTrack& a : s.agents) EXPECT_EQ(a.type, AgentType::kVehicle);
  }
}

TEST(Synth, TooFewSpotsIsConfigError) {
  SynthConfig cfg = small_synth();
  cfg.aisles = 1;
  cfg.spots_per_row = 4;
  cfg.min_vehicles = 9;
  cfg.max_vehicles = 9;
  EXPECT_THROW(synth_generate(cfg, 1), ConfigError);
}

TEST(Samples, EveryWindowFitsAndEgoFirst) {
  const auto scenes = synth_generate(small_synth(), 11);
  const auto samples = make_samples(scenes, PreprocessConfig{}, SamplingConfig{});
  EXPECT_GT(samples.size(), 50u);
  for (const auto& s : samples) {
    EXPECT_EQ(s.agent_ids[0], s.ego_id);
    EXPECT_EQ(s.agent_types[0], AgentType::kVehicle);
    EXPECT_LE(s.num_agents(), 32u);
    EXPECT_EQ(s.agent_valid[9], 1.0);
    EXPECT_TRUE(s.agent_features.all_finite());
  }
}

TEST(SceneIo, FormatDouble) {
  EXPECT_EQ(format_double(1.0), "1.0");
  EXPECT_EQ(format_double(-0.0), "-0.0");
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
  EXPECT_EQ(format_double(1e300), "1.0000000000000001e+300");
}

TEST(SceneIo, RoundTripGeneratedScenes) {
  const auto scenes = synth_generate(small_synth(), 1);
  const std::string path = temp_path("roundtrip.jsonl");
  save_scenes(scenes, path);
  EXPECT_EQ(load_scenes(path), scenes);
  std::ifstream a(path);
  std::stringstream first;
  first << a.rdbuf();
  save_scenes(load_scenes(path), path);
  std::ifstream b(path);
  std::stringstream second;
  second << b.rdbuf();
  EXPECT_EQ(first.str(), second.str());
  std::remove(path.c_str());
}

TEST(SceneIo, RoundTripIsBitExact) {
  Scene s = small_scene();
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> d(-1e6, 1e6);
  for (auto& a : s.agents) {
    for (auto& st : a.states) {
      st.x = d(rng) / 3.0;
      st.ay = -0.0;
      st.v = 5e-324;
    }
  }
  const Scene back = parse_scene(serialize_scene(s));
  ASSERT_EQ(back, s);
  EXPECT_TRUE(std::signbit(back.agents[0].states[0].ay));
}

TEST(SceneIo, EmptyListWritesHeaderOnly) {
  const std::string path = temp_path("empty.jsonl");
  save_scenes({}, path);
  std::ifstream in(path);
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  EXPECT_EQ(content, "{\"format\":\"parkdiff.scenes\",\"version\":1}\n");
  EXPECT_TRUE(load_scenes(path).empty());
  std::remove(path.c_str());
}

TEST(SceneIo, TruncatedFileReportsLine) {
  const auto scenes = synth_generate(small_synth(), 1);
  const std::string path = temp_path("truncated.jsonl");
  save_scenes(scenes, path);
  std::ifstream in(path);
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  const std::size_t third_line = content.find('\n', content.find('\n', content.find('\n') + 1) + 1);
  std::ofstream(path, std::ios::trunc) << content.substr(0, third_line + 200);
  try {
    load_scenes(path);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 4u);
  }
  std::remove(path.c_str());
}

TEST(SceneIo, MalformedInputsAreDiagnosed) {
  EXPECT_THROW(parse_scene("{\"dt\":0.4,\"agents\":[{\"id\":1,\"type\":\"cyclist\",\"states\":[],\"valid\":[]}],"
                           "\"map\":{\"soft\":[],\"soft_types\":[],\"hard\":[],\"hard_types\":[]}}",
                           2),
               ParseError);
  EXPECT_THROW(parse_scene("{\"dt\":0.4}", 2), ParseError);
  EXPECT_THROW(parse_scene("[1,2", 2), ParseError);
  EXPECT_THROW(parse_scene("{\"dt\":0.4,\"agents\":[{\"id\":1,\"type\":\"vehicle\",\"states\":[[1,2,3]],"
                           "\"valid\":[true]}],\"map\":{\"soft\":[],\"soft_types\":[],\"hard\":[],\"hard_types\":[]}}"),
               ParseError);
  const std::string path = temp_path("bad_header.jsonl");
  std::ofstream(path) << "{\"format\":\"other\"}\n";
  EXPECT_THROW(load_scenes(path), ParseError);
  std::ofstream(path, std::ios::trunc) << "";
  EXPECT_THROW(load_scenes(path), ParseError);
  std::ofstream(path, std::ios::trunc) << "{\"format\":\"parkdiff.scenes\",\"version\":\"x\"}\n";
  EXPECT_THROW(load_scenes(path), ParseError);
  std::remove(path.c_str());
  EXPECT_THROW(load_scenes(temp_path("does_not_exist.jsonl")), IoError);
}

TEST(SceneIo, UnknownTypeMessageNamesLine) {
  try {
    parse_scene("{\"dt\":0.4,\"agents\":[{\"id\":1,\"type\":\"bus\",\"states\":[],\"valid\":[]}],"
                "\"map\":{\"soft\":[],\"soft_types\":[],\"hard\":[],\"hard_types\":[]}}",
                7);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 7u);
    EXPECT_NE(std::string(e.what()).find("bus"), std::string::npos);
  }
}

}  // namespace
}  // namespace parkdiff
