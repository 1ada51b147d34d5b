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
#include <string>
#include <vector>

namespace parkdiff {

inline constexpr double kPi = 3.14159265358979323846;

enum class AgentType { kVehicle = 0, kPedestrian = 1 };

std::string to_string(AgentType type);

// Map polyline classes. Soft polylines use the first three, hard ones the last.
enum class PolylineType { kLaneEdge = 0, kSpotBoundary = 1, kCrosswalk = 2, kObstacle = 3 };
inline constexpr std::size_t kPolylineTypes = 4;
inline constexpr std::size_t kPolylinePoints = 10;

using Vec2 = std::array<double, 2>;

struct AgentState {
  double x = 0.0;   // m
  double y = 0.0;   // m
  double h = 0.0;   // rad, (-pi, pi]
  double v = 0.0;   // m/s, signed (negative while reversing)
  double ax = 0.0;  // m/s^2
  double ay = 0.0;  // m/s^2

  bool operator==(const AgentState&) const = default;
};

struct AgentTrack {
  int id = 0;
  AgentType type = AgentType::kVehicle;
  std::vector<AgentState> states;  // one per timestamp
  std::vector<bool> valid;         // same length as states

  bool operator==(const AgentTrack&) const = default;
};

struct Polyline {
  std::vector<Vec2> points;  // exactly kPolylinePoints after resampling
  int type = 0;

  bool operator==(const Polyline&) const = default;
};

struct SceneMap {
  std::vector<Polyline> soft;  // lane edges, spot boundaries, crosswalks
  std::vector<Polyline> hard;  // parked-vehicle footprints, walls

  bool operator==(const SceneMap&) const = default;
};

struct Scene {
  double dt = 0.4;
  std::vector<AgentTrack> agents;
  SceneMap map;

  std::size_t num_steps() const;
  bool operator==(const Scene&) const = default;
};

// Wraps an angle to (-pi, pi]; -pi maps to +pi.
double wrap_angle(double a);

// Resamples a polyline to `n` points uniformly spaced by arc length.
std::vector<Vec2> resample_polyline(const std::vector<Vec2>& points, std::size_t n = kPolylinePoints);

}  // namespace parkdiff
