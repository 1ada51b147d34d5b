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

#include "parkdiff/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>

#include "parkdiff/error.hpp"
#include "parkdiff/preprocess.hpp"

namespace parkdiff {

void SynthConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("synth: ") + what);
  };
  require(num_steps >= 2, "num_steps must be at least 2");
  require(dt > 0.0, "dt must be positive");
  require(aisles >= 1, "aisles must be at least 1");
  require(spots_per_row >= 4, "spots_per_row must be at least 4");
  require(spot_width > 0.0 && spot_depth > 0.0, "spot dimensions must be positive");
  require(lane_width >= 4.0, "lane_width must be at least 4 m");
  require(end_margin >= turn_radius + 1.0, "end_margin must exceed turn_radius + 1 m");
  require(parked_fraction >= 0.0 && parked_fraction <= 1.0, "parked_fraction must lie in [0, 1]");
  require(min_vehicles <= max_vehicles, "min_vehicles exceeds max_vehicles");
  require(min_pedestrians <= max_pedestrians, "min_pedestrians exceeds max_pedestrians");
  require(turn_radius > 0.0 && turn_radius < lane_width, "turn_radius must lie in (0, lane_width)");
  require(max_long_accel > 0.0 && max_long_accel + max_turn_speed * max_turn_speed / turn_radius < kMaxAccel,
          "longitudinal plus turning acceleration must stay below the adhesion limit");
  require(max_turn_speed > 0.0, "max_turn_speed must be positive");
  require(min_cruise_speed > 0.0 && min_cruise_speed <= max_cruise_speed, "cruise speed range invalid");
  require(min_ped_speed > 0.0 && min_ped_speed <= max_ped_speed && max_ped_speed < kSynthPedSpeedCap,
          "pedestrian speed range invalid");
  if (num_spots() < max_vehicles) {
    throw ConfigError("synth: lot has " + std::to_string(num_spots()) + " spots but up to " +
                      std::to_string(max_vehicles) + " vehicles were requested");
  }
}

namespace {

struct Pose {
  double x = 0.0, y = 0.0, h = 0.0;
};

class Path {
 public:
  Path(double x, double y, double h) : end_{x, y, h} {}

  Path& straight(double length) {
    if (length > 1e-9) push(length, 0.0);
    return *this;
  }
  Path& turn(double radius, double sweep) {
    if (std::abs(sweep) > 1e-12) push(radius * std::abs(sweep), (sweep > 0.0 ? 1.0 : -1.0) / radius);
    return *this;
  }

  double length() const { return length_; }
  Pose end() const { return end_; }

  Pose at(double s) const {
    if (segs_.empty()) return end_;
    s = std::clamp(s, 0.0, length_);
    for (const Seg& g : segs_) {
      if (s <= g.length || &g == &segs_.back()) return g.at(std::min(s, g.length));
      s -= g.length;
    }
    return end_;
  }
  bool on_arc(double s) const {
    for (const Seg& g : segs_) {
      if (s <= g.length) return g.kappa != 0.0;
      s -= g.length;
    }
    return false;
  }

 private:
  struct Seg {
    Pose start;
    double length, kappa;
    Pose at(double s) const {
      if (kappa == 0.0) return {start.x + s * std::cos(start.h), start.y + s * std::sin(start.h), start.h};
      const double h = start.h + kappa * s;
      return {start.x + (std::sin(h) - std::sin(start.h)) / kappa,
              start.y + (std::cos(start.h) - std::cos(h)) / kappa, h};
    }
  };
  void push(double length, double kappa) {
    Seg g{end_, length, kappa};
    end_ = g.at(length);
    segs_.push_back(g);
    length_ += length;
  }

  std::vector<Seg> segs_;
  Pose end_;
  double length_ = 0.0;
};

// A path traversed with a speed profile bounded by the longitudinal
// acceleration limit and the turning speed limit. The profile is solved on a
// fine arc-length grid with constant acceleration inside each cell.
class Move {
 public:
  Move(Path path, int gear, double v_in, double v_out, double v_max, const SynthConfig& cfg)
      : path_(std::move(path)), gear_(gear) {
    const double L = path_.length();
    const std::size_t n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(L / 0.05)));
    ds_ = L / static_cast<double>(n);
    const double a = cfg.max_long_accel;
    std::vector<double> lim(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
      lim[i] = path_.on_arc(ds_ * static_cast<double>(i)) ? std::min(v_max, cfg.max_turn_speed) : v_max;
    }
    v_.assign(n + 1, 0.0);
    v_[0] = std::min(v_in, lim[0]);
    for (std::size_t i = 0; i < n; ++i) {
      v_[i + 1] = std::min(lim[i + 1], std::sqrt(v_[i] * v_[i] + 2.0 * a * ds_));
    }
    v_[n] = std::min(v_[n], v_out);
    for (std::size_t i = n; i-- > 0;) {
      v_[i] = std::min(v_[i], std::sqrt(v_[i + 1] * v_[i + 1] + 2.0 * a * ds_));
    }
    t_.assign(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double vs = v_[i] + v_[i + 1];
      t_[i + 1] = t_[i] + (vs > 1e-12 ? 2.0 * ds_ / vs : 0.0);
    }
  }

  double duration() const { return t_.back(); }
  double start_speed() const { return v_.front(); }
  double end_speed() const { return v_.back(); }
  Pose end_pose() const { return vehicle_pose(path_.end()); }

  Pose pose(double tau) const {
    if (tau <= 0.0) return vehicle_pose(path_.at(0.0));
    if (tau >= t_.back()) return end_pose();
    const auto it = std::upper_bound(t_.begin(), t_.end(), tau);
    const std::size_t i = static_cast<std::size_t>(it - t_.begin()) - 1;
    const double acc = (v_[i + 1] * v_[i + 1] - v_[i] * v_[i]) / (2.0 * ds_);
    const double dt = tau - t_[i];
    const double s = ds_ * static_cast<double>(i) + v_[i] * dt + 0.5 * acc * dt * dt;
    return vehicle_pose(path_.at(s));
  }

 private:
  Pose vehicle_pose(Pose p) const {
    if (gear_ < 0) p.h += kPi;
    p.h = wrap_angle(p.h);
    return p;
  }

  Path path_;
  int gear_;
  double ds_ = 0.0;
  std::vector<double> v_, t_;
};

struct Piece {
  double start;
  double duration;
  std::optional<Move> move;
  Pose hold;
};

class VehiclePlan {
 public:
  bool valid_before = false;
  bool valid_after = false;

  void set_start(Pose p) { start_ = p; last_ = p; }
  void add(Move m) {
    const double d = m.duration();
    const Pose e = m.end_pose();
    pieces_.push_back({cursor_, d, std::move(m), {}});
    cursor_ += d;
    last_ = e;
  }
  void dwell(double d) {
    pieces_.push_back({cursor_, d, std::nullopt, last_});
    cursor_ += d;
  }
  double end_speed() const {
    return pieces_.empty() || !pieces_.back().move ? 0.0 : pieces_.back().move->end_speed();
  }
  Pose last() const { return last_; }

  std::optional<Pose> at(double t) const {
    if (t < 0.0) return valid_before ? std::optional<Pose>(start_) : std::nullopt;
    if (t >= cursor_) return valid_after ? std::optional<Pose>(last_) : std::nullopt;
    for (const Piece& p : pieces_) {
      if (t < p.start + p.duration) return p.move ? p.move->pose(t - p.start) : p.hold;
    }
    return last_;
  }

 private:
  std::vector<Piece> pieces_;
  Pose start_, last_;
  double cursor_ = 0.0;
};

class Generator {
 public:
  Generator(const SynthConfig& cfg, std::uint64_t seed, std::size_t index)
      : cfg_(cfg) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index)};
    rng_.seed(seq);
  }

  Scene run();

 private:
  double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng_); }
  std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }
  bool coin(double p) { return uniform(0.0, 1.0) < p; }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(rng_); }

  double width() const { return cfg_.lot_width(); }
  double height() const { return cfg_.lot_height(); }
  double aisle_base(std::size_t aisle) const {
    return static_cast<double>(aisle) * (2.0 * cfg_.spot_depth + cfg_.lane_width);
  }
  double lane_y(std::size_t aisle, int dir) const {
    return aisle_base(aisle) + cfg_.spot_depth + 0.5 * cfg_.lane_width - dir * 0.2 * cfg_.lane_width;
  }
  double spot_x(std::size_t col) const {
    return cfg_.end_margin + (static_cast<double>(col) + 0.5) * cfg_.spot_width;
  }
  // Rows alternate below (-1) and above (+1) their aisle.
  static int row_side(std::size_t row) { return row % 2 == 0 ? -1 : 1; }
  double spot_y(std::size_t row) const {
    const double base = aisle_base(row / 2);
    return row_side(row) < 0 ? base + 0.5 * cfg_.spot_depth
                             : base + 1.5 * cfg_.spot_depth + cfg_.lane_width;
  }
  double entry_x(int dir) const { return dir > 0 ? 0.5 : width() - 0.5; }

  void lane_drive(VehiclePlan& plan, std::size_t aisle, int dir, double x_from, double x_to, double v_in,
                  double v_out, double v_max);
  VehiclePlan cruise(std::size_t aisle, int dir);
  VehiclePlan park_in(std::size_t row, std::size_t col, int dir, bool reverse);
  VehiclePlan park_out(std::size_t row, std::size_t col, int dir, bool nose_in);
  AgentTrack sample_vehicle(const VehiclePlan& plan, double t_offset, int id) const;
  AgentTrack pedestrian(int id);
  void build_map(const std::vector<bool>& parked, Scene& scene) const;

  const SynthConfig& cfg_;
  std::mt19937_64 rng_;
  std::vector<double> crosswalk_x_;
};

void Generator::lane_drive(VehiclePlan& plan, std::size_t aisle, int dir, double x_from, double x_to,
                           double v_in, double v_out, double v_max) {
  const double y = lane_y(aisle, dir);
  const double h = dir > 0 ? 0.0 : kPi;
  const double stop_x = crosswalk_x_[aisle] - dir * 2.5;
  const double to_stop = (stop_x - x_from) * dir;
  const double stop_dist = v_in * v_in / (2.0 * cfg_.max_long_accel) + 1.0;
  if (to_stop > stop_dist && (x_to - stop_x) * dir > 1.0) {
    plan.add(Move(Path(x_from, y, h).straight(to_stop), 1, v_in, 0.0, v_max, cfg_));
    plan.dwell(uniform(0.4, 2.0));
    x_from = stop_x;
    v_in = 0.0;
  }
  plan.add(Move(Path(x_from, y, h).straight((x_to - x_from) * dir), 1, v_in, v_out, v_max, cfg_));
}

VehiclePlan Generator::cruise(std::size_t aisle, int dir) {
  VehiclePlan plan;
  const double v = uniform(cfg_.min_cruise_speed, cfg_.max_cruise_speed);
  plan.set_start({entry_x(dir), lane_y(aisle, dir), dir > 0 ? 0.0 : kPi});
  lane_drive(plan, aisle, dir, entry_x(dir), entry_x(-dir), v, v, v);
  return plan;
}

VehiclePlan Generator::park_in(std::size_t row, std::size_t col, int dir, bool reverse) {
  VehiclePlan plan;
  const std::size_t aisle = row / 2;
  const int side = row_side(row);
  const double R = cfg_.turn_radius;
  const double v = uniform(cfg_.min_cruise_speed, cfg_.max_cruise_speed);
  const double xs = spot_x(col), ys = spot_y(row), yl = lane_y(aisle, dir);
  plan.set_start({entry_x(dir), yl, dir > 0 ? 0.0 : kPi});
  plan.valid_after = true;
  if (!reverse) {
    lane_drive(plan, aisle, dir, entry_x(dir), xs - dir * R, v, cfg_.max_turn_speed, v);
    const double h0 = dir > 0 ? 0.0 : kPi;
    const double sweep = wrap_angle(side * kPi / 2 - h0);
    Path p(xs - dir * R, yl, h0);
    p.turn(R, sweep).straight(std::abs(ys - yl) - R);
    plan.add(Move(std::move(p), 1, plan.end_speed(), 0.0, cfg_.max_turn_speed, cfg_));
  } else {
    lane_drive(plan, aisle, dir, entry_x(dir), xs + dir * R, v, 0.0, v);
    plan.dwell(uniform(0.8, 2.0));
    const double h0 = dir > 0 ? kPi : 0.0;
    const double sweep = wrap_angle(side * kPi / 2 - h0);
    Path p(xs + dir * R, yl, h0);
    p.turn(R, sweep).straight(std::abs(ys - yl) - R);
    plan.add(Move(std::move(p), -1, 0.0, 0.0, cfg_.max_turn_speed, cfg_));
  }
  return plan;
}

VehiclePlan Generator::park_out(std::size_t row, std::size_t col, int dir, bool nose_in) {
  VehiclePlan plan;
  const std::size_t aisle = row / 2;
  const int side = row_side(row);
  const double R = cfg_.turn_radius;
  const double v = uniform(cfg_.min_cruise_speed, cfg_.max_cruise_speed);
  const double xs = spot_x(col), ys = spot_y(row), yl = lane_y(aisle, dir);
  const double out_h = -side * kPi / 2;  // direction of travel out of the spot
  const double lane_h = dir > 0 ? 0.0 : kPi;
  plan.valid_before = true;
  plan.set_start({xs, ys, wrap_angle(nose_in ? out_h + kPi : out_h)});
  plan.dwell(uniform(0.0, 0.75 * cfg_.num_steps * cfg_.dt));
  Path p(xs, ys, out_h);
  if (nose_in) {
    p.straight(std::abs(ys - yl) - R).turn(R, wrap_angle(lane_h + kPi - out_h));
    plan.add(Move(std::move(p), -1, 0.0, 0.0, cfg_.max_turn_speed, cfg_));
    plan.dwell(uniform(0.4, 1.5));
    lane_drive(plan, aisle, dir, xs - dir * R, entry_x(-dir), 0.0, v, v);
  } else {
    p.straight(std::abs(ys - yl) - R).turn(R, wrap_angle(lane_h - out_h));
    plan.add(Move(std::move(p), 1, 0.0, cfg_.max_turn_speed, cfg_.max_turn_speed, cfg_));
    lane_drive(plan, aisle, dir, xs + dir * R, entry_x(-dir), plan.end_speed(), v, v);
  }
  return plan;
}

AgentTrack Generator::sample_vehicle(const VehiclePlan& plan, double t_offset, int id) const {
  AgentTrack tr;
  tr.id = id;
  tr.type = AgentType::kVehicle;
  tr.states.resize(cfg_.num_steps);
  tr.valid.assign(cfg_.num_steps, false);
  for (std::size_t k = 0; k < cfg_.num_steps; ++k) {
    if (auto p = plan.at(static_cast<double>(k) * cfg_.dt - t_offset)) {
      tr.states[k].x = p->x;
      tr.states[k].y = p->y;
      tr.states[k].h = p->h;
      tr.valid[k] = true;
    }
  }
  fill_track_kinematics(tr, cfg_.dt);
  return tr;
}

AgentTrack Generator::pedestrian(int id) {
  const double W = width(), H = height(), margin = 0.3;
  const std::size_t rows = 2 * cfg_.aisles;
  auto random_point = [&](std::size_t row) -> Vec2 {
    const double y0 = spot_y(row) - 0.5 * cfg_.spot_depth;
    return {uniform(cfg_.end_margin, W - cfg_.end_margin), uniform(y0 + 0.5, y0 + cfg_.spot_depth - 0.5)};
  };
  std::size_t row = index(rows);
  Vec2 p = random_point(row);
  auto next_goal = [&]() {
    std::size_t r = index(rows - 1);
    if (r >= row) ++r;
    row = r;
    return random_point(r);
  };
  Vec2 goal = next_goal();
  const double speed = uniform(cfg_.min_ped_speed, cfg_.max_ped_speed);
  const double theta = 2.0, sigma = 0.25;
  double wait = 0.0;
  Vec2 v{0.0, 0.0};
  {
    const double dx = goal[0] - p[0], dy = goal[1] - p[1], n = std::hypot(dx, dy);
    const double s = speed * uniform(0.5, 1.0);
    v = {s * dx / n, s * dy / n};
  }
  double heading = std::atan2(v[1], v[0]);

  AgentTrack tr;
  tr.id = id;
  tr.type = AgentType::kPedestrian;
  tr.states.resize(cfg_.num_steps);
  tr.valid.assign(cfg_.num_steps, true);
  const double dt = cfg_.dt, sq = std::sqrt(dt);
  for (std::size_t k = 0; k < cfg_.num_steps; ++k) {
    tr.states[k].x = p[0];
    tr.states[k].y = p[1];
    tr.states[k].h = wrap_angle(heading);

    Vec2 desired{0.0, 0.0};
    const double dx = goal[0] - p[0], dy = goal[1] - p[1], dist = std::hypot(dx, dy);
    if (wait > 0.0) {
      wait -= dt;
      if (wait <= 0.0) goal = next_goal();
    } else if (dist < 0.8) {
      wait = uniform(1.0, 4.0);
    } else {
      const double s = std::min(speed, dist);
      desired = {s * dx / dist, s * dy / dist};
    }
    for (int c = 0; c < 2; ++c) v[c] += theta * dt * (desired[c] - v[c]) + sigma * sq * normal();
    const double sp = std::hypot(v[0], v[1]);
    if (sp > kSynthPedSpeedCap) {
      v[0] *= kSynthPedSpeedCap / sp;
      v[1] *= kSynthPedSpeedCap / sp;
    }
    const Vec2 q{p[0] + v[0] * dt, p[1] + v[1] * dt};
    p = {std::clamp(q[0], margin, W - margin), std::clamp(q[1], margin, H - margin)};
    if (p[0] != q[0]) v[0] = 0.0;
    if (p[1] != q[1]) v[1] = 0.0;
    if (std::hypot(v[0], v[1]) > 0.1) heading = std::atan2(v[1], v[0]);
  }
  fill_track_kinematics(tr, dt);
  return tr;
}

void Generator::build_map(const std::vector<bool>& parked, Scene& scene) const {
  const double W = width(), H = height();
  auto add = [](std::vector<Polyline>& out, std::vector<Vec2> pts, PolylineType type) {
    out.push_back({resample_polyline(pts), static_cast<int>(type)});
  };
  for (std::size_t a = 0; a < cfg_.aisles; ++a) {
    const double y0 = aisle_base(a) + cfg_.spot_depth, y1 = y0 + cfg_.lane_width;
    add(scene.map.soft, {{0.0, y0}, {W, y0}}, PolylineType::kLaneEdge);
    add(scene.map.soft, {{0.0, y1}, {W, y1}}, PolylineType::kLaneEdge);
  }
  for (std::size_t r = 0; r < 2 * cfg_.aisles; ++r) {
    const double y0 = spot_y(r) - 0.5 * cfg_.spot_depth, y1 = y0 + cfg_.spot_depth;
    for (std::size_t j = 0; j <= cfg_.spots_per_row; ++j) {
      const double x = cfg_.end_margin + static_cast<double>(j) * cfg_.spot_width;
      add(scene.map.soft, {{x, y0}, {x, y1}}, PolylineType::kSpotBoundary);
    }
  }
  for (std::size_t a = 0; a < cfg_.aisles; ++a) {
    const double y0 = aisle_base(a) + cfg_.spot_depth;
    add(scene.map.soft, {{crosswalk_x_[a], y0}, {crosswalk_x_[a], y0 + cfg_.lane_width}},
        PolylineType::kCrosswalk);
  }
  add(scene.map.hard, {{0.0, 0.0}, {W, 0.0}}, PolylineType::kObstacle);
  add(scene.map.hard, {{0.0, H}, {W, H}}, PolylineType::kObstacle);
  const double hw = 0.95, hd = 2.3;
  for (std::size_t r = 0; r < 2 * cfg_.aisles; ++r) {
    for (std::size_t c = 0; c < cfg_.spots_per_row; ++c) {
      if (!parked[r * cfg_.spots_per_row + c]) continue;
      const double x = spot_x(c), y = spot_y(r);
      add(scene.map.hard, {{x - hw, y - hd}, {x + hw, y - hd}, {x + hw, y + hd}, {x - hw, y + hd}, {x - hw, y - hd}},
          PolylineType::kObstacle);
    }
  }
}

Scene Generator::run() {
  Scene scene;
  scene.dt = cfg_.dt;
  crosswalk_x_.clear();
  for (std::size_t a = 0; a < cfg_.aisles; ++a) {
    const std::size_t j = 2 + index(cfg_.spots_per_row - 3);
    crosswalk_x_.push_back(cfg_.end_margin + static_cast<double>(j) * cfg_.spot_width);
  }

  const std::size_t n_veh = cfg_.min_vehicles + index(cfg_.max_vehicles - cfg_.min_vehicles + 1);
  const std::size_t n_ped = cfg_.min_pedestrians + index(cfg_.max_pedestrians - cfg_.min_pedestrians + 1);
  std::vector<std::size_t> free_spots(cfg_.num_spots());
  for (std::size_t i = 0; i < free_spots.size(); ++i) free_spots[i] = i;
  std::shuffle(free_spots.begin(), free_spots.end(), rng_);
  std::vector<bool> claimed(cfg_.num_spots(), false);

  const double horizon = static_cast<double>(cfg_.num_steps) * cfg_.dt;
  int next_id = 0;
  for (std::size_t i = 0; i < n_veh; ++i) {
    const int dir = coin(0.5) ? 1 : -1;
    const double u = uniform(0.0, 1.0);
    double t_offset = uniform(-0.4 * horizon, 0.7 * horizon);
    VehiclePlan plan;
    if (u < 0.3) {
      plan = cruise(index(cfg_.aisles), dir);
    } else {
      const std::size_t spot = free_spots.back();
      free_spots.pop_back();
      claimed[spot] = true;
      const std::size_t row = spot / cfg_.spots_per_row, col = spot % cfg_.spots_per_row;
      if (u < 0.6) {
        plan = park_in(row, col, dir, false);
      } else if (u < 0.75) {
        plan = park_in(row, col, dir, true);
      } else {
        plan = park_out(row, col, dir, coin(0.6));
        t_offset = 0.0;
      }
    }
    AgentTrack tr = sample_vehicle(plan, t_offset, next_id);
    if (std::count(tr.valid.begin(), tr.valid.end(), true) >= 2) {
      scene.agents.push_back(std::move(tr));
      ++next_id;
    }
  }
  for (std::size_t i = 0; i < n_ped; ++i) scene.agents.push_back(pedestrian(next_id++));

  std::vector<bool> parked(cfg_.num_spots(), false);
  for (std::size_t s = 0; s < parked.size(); ++s) parked[s] = !claimed[s] && coin(cfg_.parked_fraction);
  build_map(parked, scene);
  return scene;
}

}  // namespace

std::vector<Scene> synth_generate(const SynthConfig& config, std::uint64_t seed) {
  config.validate();
  std::vector<Scene> scenes;
  scenes.reserve(config.num_scenes);
  for (std::size_t i = 0; i < config.num_scenes; ++i) scenes.push_back(Generator(config, seed, i).run());
  return scenes;
}

}  // namespace parkdiff
