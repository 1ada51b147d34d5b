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

#include "parkdiff/scene.hpp"

#include <algorithm>
#include <cmath>

#include "parkdiff/error.hpp"

namespace parkdiff {

std::string to_string(AgentType type) {
  return type == AgentType::kVehicle ? "vehicle" : "pedestrian";
}

std::size_t Scene::num_steps() const {
  std::size_t n = 0;
  for (const auto& a : agents) n = std::max(n, a.states.size());
  return n;
}

double wrap_angle(double a) {
  double r = std::fmod(a + kPi, 2.0 * kPi);
  if (r < 0.0) r += 2.0 * kPi;
  r -= kPi;
  return r <= -kPi ? kPi : r;
}

std::vector<Vec2> resample_polyline(const std::vector<Vec2>& points, std::size_t n) {
  if (points.empty()) throw ContractError("resample_polyline: empty polyline");
  if (n < 2 || points.size() == 1) return std::vector<Vec2>(n, points.front());
  std::vector<double> cum(points.size(), 0.0);
  for (std::size_t i = 1; i < points.size(); ++i) {
    cum[i] = cum[i - 1] + std::hypot(points[i][0] - points[i - 1][0], points[i][1] - points[i - 1][1]);
  }
  const double total = cum.back();
  std::vector<Vec2> out(n);
  std::size_t seg = 1;
  for (std::size_t k = 0; k < n; ++k) {
    const double s = total * static_cast<double>(k) / static_cast<double>(n - 1);
    while (seg + 1 < points.size() && cum[seg] < s) ++seg;
    const double len = cum[seg] - cum[seg - 1];
    const double f = len > 0.0 ? std::clamp((s - cum[seg - 1]) / len, 0.0, 1.0) : 0.0;
    out[k] = {points[seg - 1][0] + f * (points[seg][0] - points[seg - 1][0]),
              points[seg - 1][1] + f * (points[seg][1] - points[seg - 1][1])};
  }
  out.back() = points.back();
  return out;
}

}  // namespace parkdiff
