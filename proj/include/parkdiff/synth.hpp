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
#include <vector>

#include "parkdiff/kinematics.hpp"
#include "parkdiff/scene.hpp"

namespace parkdiff {

// Parking lot made of `aisles` horizontal driving aisles, each flanked by one
// row of perpendicular spots on either side. Drivable end zones of width
// `end_margin` connect the aisles to the lot edges.
struct SynthConfig {
  std::size_t num_scenes = 256;
  std::size_t num_steps = 50;
  double dt = 0.4;

  std::size_t aisles = 2;
  std::size_t spots_per_row = 12;
  double spot_width = 2.6;
  double spot_depth = 5.0;
  double lane_width = 6.0;
  double end_margin = 8.0;
  double parked_fraction = 0.6;  // of spots not claimed by moving vehicles

  std::size_t min_vehicles = 4;
  std::size_t max_vehicles = 10;
  std::size_t min_pedestrians = 1;
  std::size_t max_pedestrians = 6;

  double turn_radius = 3.0;
  double max_long_accel = 2.0;
  double max_turn_speed = 2.0;
  double min_cruise_speed = 3.0;
  double max_cruise_speed = 5.0;
  double min_ped_speed = 0.8;
  double max_ped_speed = 1.6;

  double lot_width() const { return 2.0 * end_margin + static_cast<double>(spots_per_row) * spot_width; }
  double lot_height() const { return static_cast<double>(aisles) * (2.0 * spot_depth + lane_width); }
  std::size_t num_spots() const { return 2 * aisles * spots_per_row; }

  // Throws ConfigError on infeasible or out-of-range settings.
  void validate() const;
};

std::vector<Scene> synth_generate(const SynthConfig& config, std::uint64_t seed);

// Speeds above this never occur in generated pedestrian tracks.
inline constexpr double kSynthPedSpeedCap = 1.8;

}  // namespace parkdiff
