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

#include "parkdiff/evaluation.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <thread>

#include "parkdiff/error.hpp"

namespace parkdiff {

namespace {

std::size_t valid_count(const Tensor& valid) {
  std::size_t n = 0;
  for (double v : valid.values()) n += v != 0.0 ? 1 : 0;
  return n;
}

double point_error(const Tensor& cand, std::size_t k, std::size_t t, std::size_t T, const Tensor& gt) {
  const double* c = cand.data() + (k * T + t) * 2;
  const double* y = gt.data() + t * 2;
  return std::hypot(c[0] - y[0], c[1] - y[1]);
}

void check_shapes(const Tensor& candidates, const Tensor& gt, const Tensor& valid, const char* who) {
  if (candidates.rank() != 3 || candidates.dim(2) != 2 || gt.shape() != Shape{candidates.dim(1), 2} ||
      valid.size() != candidates.dim(1)) {
    throw DimensionError(std::string(who) + ": expected candidates [K, T, 2], gt [T, 2], valid [T]; got " +
                         shape_string(candidates.shape()) + ", " + shape_string(gt.shape()) + ", " +
                         shape_string(valid.shape()));
  }
}

std::optional<std::size_t> final_step(const Tensor& valid) {
  for (std::size_t t = valid.size(); t-- > 0;) {
    if (valid[t] != 0.0) return t;
  }
  return std::nullopt;
}

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

Tensor slice_rows(const Tensor& t, std::size_t index) {
  Shape inner(t.shape().begin() + 1, t.shape().end());
  const std::size_t w = shape_size(inner);
  return Tensor(inner, std::vector<double>(t.data() + index * w, t.data() + (index + 1) * w));
}

}  // namespace

std::uint64_t sample_key(const EgoSample& sample, std::uint64_t seed) {
  std::uint64_t h = splitmix(seed);
  h = splitmix(h ^ static_cast<std::uint64_t>(sample.scene_index));
  h = splitmix(h ^ static_cast<std::uint64_t>(static_cast<std::uint32_t>(sample.ego_id)));
  return splitmix(h ^ static_cast<std::uint64_t>(sample.t0));
}

// ---- per-agent metrics -----------------------------------------------------------

std::optional<double> min_ade(const Tensor& candidates, const Tensor& gt, const Tensor& valid) {
  check_shapes(candidates, gt, valid, "min_ade");
  const std::size_t K = candidates.dim(0), T = candidates.dim(1), n = valid_count(valid);
  if (n == 0 || K == 0) return std::nullopt;
  double best = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    double s = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      if (valid[t] != 0.0) s += point_error(candidates, k, t, T, gt);
    }
    s /= static_cast<double>(n);
    if (k == 0 || s < best) best = s;
  }
  return best;
}

std::optional<FdeResult> min_fde(const Tensor& candidates, const Tensor& gt, const Tensor& valid) {
  check_shapes(candidates, gt, valid, "min_fde");
  const std::size_t K = candidates.dim(0), T = candidates.dim(1);
  const auto t = final_step(valid);
  if (!t || K == 0) return std::nullopt;
  FdeResult r;
  r.last_valid = *t + 1 != T;
  for (std::size_t k = 0; k < K; ++k) {
    const double e = point_error(candidates, k, *t, T, gt);
    if (k == 0 || e < r.value) {
      r.value = e;
      r.best = k;
    }
  }
  return r;
}

std::optional<double> candidate_fde(const Tensor& candidates, std::size_t k, const Tensor& gt, const Tensor& valid) {
  check_shapes(candidates, gt, valid, "candidate_fde");
  if (k >= candidates.dim(0)) throw ContractError("candidate_fde: candidate index out of range");
  const auto t = final_step(valid);
  if (!t) return std::nullopt;
  return point_error(candidates, k, *t, candidates.dim(1), gt);
}

std::optional<double> miss_rate(const std::vector<double>& fde, double threshold) {
  if (fde.empty()) return std::nullopt;
  std::size_t misses = 0;
  for (double e : fde) misses += e > threshold ? 1 : 0;
  return 100.0 * static_cast<double>(misses) / static_cast<double>(fde.size());
}

// ---- tables ----------------------------------------------------------------------

namespace {

struct AgentRecord {
  AgentType type;
  double ade, fde;
  bool miss;
};

std::vector<AgentRecord> score_sample(const EgoSample& s, const CandidateSet& c, const EvalConfig& config) {
  const std::size_t N = s.num_agents(), T = s.future_steps();
  if (c.trajectories.rank() != 4 || c.trajectories.dim(0) != N || c.trajectories.dim(2) != T) {
    throw DimensionError("evaluate: predictor returned " + shape_string(c.trajectories.shape()) + " for " +
                         std::to_string(N) + " agents");
  }
  const std::size_t K = c.trajectories.dim(1);
  std::vector<AgentRecord> out;
  for (std::size_t a = 0; a < N; ++a) {
    const Tensor cand = slice_rows(c.trajectories, a);
    const Tensor gt = slice_rows(s.gt_future, a);
    const Tensor valid = slice_rows(s.future_valid, a);
    const auto ade = min_ade(cand, gt, valid);
    if (!ade) continue;
    const auto fde = min_fde(cand, gt, valid);
    double miss_fde = fde->value;
    if (config.miss_rate_mode == MissRateMode::kMostProbable && K > 1) {
      std::size_t top = 0;
      for (std::size_t k = 1; k < K; ++k) {
        if (c.probabilities[a * K + k] > c.probabilities[a * K + top]) top = k;
      }
      miss_fde = *candidate_fde(cand, top, gt, valid);
    }
    out.push_back({s.agent_types[a], *ade, fde->value, miss_fde > config.miss_threshold});
  }
  return out;
}

// Sorted summation keeps aggregates independent of sample order.
double ordered_sum(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

ClassMetrics aggregate(const std::vector<const AgentRecord*>& rs) {
  ClassMetrics m;
  m.count = rs.size();
  if (rs.empty()) return m;
  std::vector<double> ade, fde;
  std::size_t misses = 0;
  for (const AgentRecord* r : rs) {
    ade.push_back(r->ade);
    fde.push_back(r->fde);
    misses += r->miss ? 1 : 0;
  }
  m.min_ade = ordered_sum(ade) / static_cast<double>(rs.size());
  m.min_fde = ordered_sum(fde) / static_cast<double>(rs.size());
  m.miss_rate = 100.0 * static_cast<double>(misses) / static_cast<double>(rs.size());
  return m;
}

}  // namespace

Predictor model_predictor(const Model& model, std::uint64_t seed) {
  return [&model, seed](const EgoSample& s) { return predict(model, make_batch(s), sample_key(s, seed)); };
}

Predictor oracle_predictor() {
  return [](const EgoSample& s) {
    const std::size_t N = s.num_agents(), T = s.future_steps();
    CandidateSet c;
    c.trajectories = s.gt_future.reshaped(Shape{N, 1, T, 2});
    c.probabilities = Tensor(Shape{N, 1}, 1.0);
    c.fallback.assign(N, false);
    return c;
  };
}

MetricsTable evaluate(const std::vector<EgoSample>& data, const Predictor& predictor, const EvalConfig& config) {
  std::vector<std::vector<AgentRecord>> per_sample(data.size());
  const std::size_t workers = std::max<std::size_t>(1, std::min(config.threads, data.size()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < data.size(); ++i) per_sample[i] = score_sample(data[i], predictor(data[i]), config);
  } else {
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < data.size(); i += workers) {
            per_sample[i] = score_sample(data[i], predictor(data[i]), config);
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  std::vector<const AgentRecord*> veh, ped, all;
  for (const auto& rs : per_sample) {
    for (const AgentRecord& r : rs) {
      (r.type == AgentType::kVehicle ? veh : ped).push_back(&r);
      all.push_back(&r);
    }
  }
  return {aggregate(veh), aggregate(ped), aggregate(all)};
}

// ---- EKF baseline ----------------------------------------------------------------

namespace {

using Vec5 = Eigen::Matrix<double, 5, 1>;
using Mat5 = Eigen::Matrix<double, 5, 5>;

// CTRV state (x, y, v, psi, omega).
Vec5 ctrv_step(const Vec5& s, double dt, Mat5* jacobian) {
  const double v = s(2), psi = s(3), w = s(4);
  Vec5 n = s;
  Mat5 F = Mat5::Identity();
  const double c = std::cos(psi), sn = std::sin(psi);
  if (std::abs(w) > 1e-6) {
    const double psi2 = psi + w * dt, c2 = std::cos(psi2), s2 = std::sin(psi2);
    n(0) += v / w * (s2 - sn);
    n(1) += v / w * (c - c2);
    F(0, 2) = (s2 - sn) / w;
    F(0, 3) = v / w * (c2 - c);
    F(0, 4) = v * dt * c2 / w - v / (w * w) * (s2 - sn);
    F(1, 2) = (c - c2) / w;
    F(1, 3) = v / w * (s2 - sn);
    F(1, 4) = v * dt * s2 / w - v / (w * w) * (c - c2);
  } else {
    n(0) += v * c * dt;
    n(1) += v * sn * dt;
    F(0, 2) = c * dt;
    F(0, 3) = -v * sn * dt;
    F(0, 4) = -0.5 * v * sn * dt * dt;
    F(1, 2) = sn * dt;
    F(1, 3) = v * c * dt;
    F(1, 4) = 0.5 * v * c * dt * dt;
  }
  n(3) = psi + w * dt;
  F(3, 4) = dt;
  if (jacobian != nullptr) *jacobian = F;
  return n;
}

Mat5 ctrv_noise(const Vec5& s, double dt, const EkfConfig& cfg) {
  Eigen::Matrix<double, 5, 2> G = Eigen::Matrix<double, 5, 2>::Zero();
  G(0, 0) = 0.5 * dt * dt * std::cos(s(3));
  G(1, 0) = 0.5 * dt * dt * std::sin(s(3));
  G(2, 0) = dt;
  G(3, 1) = 0.5 * dt * dt;
  G(4, 1) = dt;
  Eigen::Matrix2d q = Eigen::Matrix2d::Zero();
  q(0, 0) = cfg.vehicle_accel_noise * cfg.vehicle_accel_noise;
  q(1, 1) = cfg.vehicle_yaw_accel_noise * cfg.vehicle_yaw_accel_noise;
  return G * q * G.transpose();
}

Tensor predict_ctrv(const Tensor& history, const Tensor& valid, std::size_t first, std::size_t T_f,
                    const EkfConfig& cfg) {
  const std::size_t T_p = valid.size();
  const double* f0 = history.data() + first * kAgentFeatures;
  Vec5 s;
  s << f0[0], f0[1], f0[3], f0[2], 0.0;
  Mat5 P = Mat5::Zero();
  P.diagonal() << cfg.position_noise * cfg.position_noise, cfg.position_noise * cfg.position_noise, 1.0,
      cfg.heading_noise * cfg.heading_noise, 0.25;
  Eigen::Matrix<double, 3, 5> H = Eigen::Matrix<double, 3, 5>::Zero();
  H(0, 0) = H(1, 1) = H(2, 3) = 1.0;
  Eigen::Matrix3d R = Eigen::Matrix3d::Zero();
  R.diagonal() << cfg.position_noise * cfg.position_noise, cfg.position_noise * cfg.position_noise,
      cfg.heading_noise * cfg.heading_noise;
  for (std::size_t t = first + 1; t < T_p; ++t) {
    Mat5 F;
    const Mat5 Q = ctrv_noise(s, cfg.dt, cfg);
    s = ctrv_step(s, cfg.dt, &F);
    P = F * P * F.transpose() + Q;
    if (valid[t] == 0.0) continue;
    const double* f = history.data() + t * kAgentFeatures;
    Eigen::Vector3d innov(f[0] - s(0), f[1] - s(1), wrap_angle(f[2] - s(3)));
    const Eigen::Matrix3d S = H * P * H.transpose() + R;
    const Eigen::Matrix<double, 5, 3> K = P * H.transpose() * S.inverse();
    s += K * innov;
    s(3) = wrap_angle(s(3));
    P = (Mat5::Identity() - K * H) * P;
  }
  Tensor out(Shape{T_f, 2});
  for (std::size_t t = 0; t < T_f; ++t) {
    s = ctrv_step(s, cfg.dt, nullptr);
    out[2 * t] = s(0);
    out[2 * t + 1] = s(1);
  }
  return out;
}

Tensor predict_cv(const Tensor& history, const Tensor& valid, std::size_t first, std::size_t T_f,
                  const EkfConfig& cfg) {
  const std::size_t T_p = valid.size();
  const double dt = cfg.dt;
  const double* f0 = history.data() + first * kAgentFeatures;
  Eigen::Vector4d s(f0[0], f0[1], f0[3] * std::cos(f0[2]), f0[3] * std::sin(f0[2]));
  Eigen::Matrix4d P = Eigen::Matrix4d::Zero();
  P.diagonal() << cfg.position_noise * cfg.position_noise, cfg.position_noise * cfg.position_noise, 1.0, 1.0;
  Eigen::Matrix4d F = Eigen::Matrix4d::Identity();
  F(0, 2) = F(1, 3) = dt;
  const double q = cfg.pedestrian_accel_noise * cfg.pedestrian_accel_noise;
  Eigen::Matrix4d Q = Eigen::Matrix4d::Zero();
  const double t4 = dt * dt * dt * dt / 4.0, t3 = dt * dt * dt / 2.0, t2 = dt * dt;
  Q(0, 0) = Q(1, 1) = t4 * q;
  Q(0, 2) = Q(2, 0) = Q(1, 3) = Q(3, 1) = t3 * q;
  Q(2, 2) = Q(3, 3) = t2 * q;
  Eigen::Matrix<double, 2, 4> H = Eigen::Matrix<double, 2, 4>::Zero();
  H(0, 0) = H(1, 1) = 1.0;
  const Eigen::Matrix2d R = Eigen::Matrix2d::Identity() * cfg.position_noise * cfg.position_noise;
  for (std::size_t t = first + 1; t < T_p; ++t) {
    s = F * s;
    P = F * P * F.transpose() + Q;
    if (valid[t] == 0.0) continue;
    const double* f = history.data() + t * kAgentFeatures;
    const Eigen::Vector2d innov(f[0] - s(0), f[1] - s(1));
    const Eigen::Matrix2d S = H * P * H.transpose() + R;
    const Eigen::Matrix<double, 4, 2> K = P * H.transpose() * S.inverse();
    s += K * innov;
    P = (Eigen::Matrix4d::Identity() - K * H) * P;
  }
  Tensor out(Shape{T_f, 2});
  for (std::size_t t = 0; t < T_f; ++t) {
    s = F * s;
    out[2 * t] = s(0);
    out[2 * t + 1] = s(1);
  }
  return out;
}

}  // namespace

EkfPrediction ekf_predict(const Tensor& history, const Tensor& valid, AgentType type, std::size_t future_steps,
                          const EkfConfig& config) {
  if (history.rank() != 2 || history.dim(1) != kAgentFeatures || valid.size() != history.dim(0)) {
    throw DimensionError("ekf_predict: expected history [T_p, 12] and valid [T_p], got " +
                         shape_string(history.shape()) + " and " + shape_string(valid.shape()));
  }
  const std::size_t T_p = valid.size();
  std::size_t first = T_p, last = T_p;
  for (std::size_t t = 0; t < T_p; ++t) {
    if (valid[t] == 0.0) continue;
    if (first == T_p) first = t;
    last = t;
  }
  EkfPrediction out;
  if (valid_count(valid) < 2) {
    out.held = true;
    out.trajectory = Tensor(Shape{future_steps, 2});
    if (last < T_p) {
      for (std::size_t t = 0; t < future_steps; ++t) {
        out.trajectory[2 * t] = history[last * kAgentFeatures];
        out.trajectory[2 * t + 1] = history[last * kAgentFeatures + 1];
      }
    }
    return out;
  }
  out.trajectory = type == AgentType::kVehicle ? predict_ctrv(history, valid, first, future_steps, config)
                                               : predict_cv(history, valid, first, future_steps, config);
  return out;
}

Predictor ekf_predictor(const EkfConfig& config) {
  return [config](const EgoSample& s) {
    const std::size_t N = s.num_agents(), T = s.future_steps();
    CandidateSet c;
    c.trajectories = Tensor(Shape{N, 1, T, 2});
    c.probabilities = Tensor(Shape{N, 1}, 1.0);
    c.fallback.assign(N, false);
    for (std::size_t a = 0; a < N; ++a) {
      const EkfPrediction p =
          ekf_predict(slice_rows(s.agent_features, a), slice_rows(s.agent_valid, a), s.agent_types[a], T, config);
      std::copy_n(p.trajectory.data(), T * 2, c.trajectories.data() + a * T * 2);
      c.fallback[a] = p.held;
    }
    return c;
  };
}

// ---- ablations -------------------------------------------------------------------

EgoSample mask_polylines(const EgoSample& sample, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw ConfigError("mask fraction must be in [0, 1]");
  const std::size_t S = sample.num_soft(), H = sample.num_hard(), n = S + H;
  const auto drop = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  if (drop == 0) return sample;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(sample_key(sample, seed));
  for (std::size_t i = n; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(order[i - 1], order[pick(rng)]);
  }
  std::vector<bool> removed(n, false);
  for (std::size_t i = 0; i < drop; ++i) removed[order[i]] = true;
  std::vector<std::size_t> keep_soft, keep_hard;
  for (std::size_t i = 0; i < S; ++i) {
    if (!removed[i]) keep_soft.push_back(i);
  }
  for (std::size_t i = 0; i < H; ++i) {
    if (!removed[S + i]) keep_hard.push_back(i);
  }
  return with_polylines(sample, keep_soft, keep_hard);
}

MetricsTable ablate_mask(const std::vector<EgoSample>& data, const Predictor& predictor, double fraction,
                         std::uint64_t seed, const EvalConfig& config) {
  if (fraction == 0.0) return evaluate(data, predictor, config);
  return evaluate(
      data, [&](const EgoSample& s) { return predictor(mask_polylines(s, fraction, seed)); }, config);
}

std::string agent_bucket_label(std::size_t agents) {
  if (agents == 0) throw ContractError("agent_bucket_label: a sample has at least one agent");
  static const char* labels[] = {"1-4", "5-9", "10-14", "15-19", "20-24"};
  if (agents < 5) return labels[0];
  if (agents >= 25) return ">=25";
  return labels[agents / 5];
}

std::vector<AgentBucket> bucket_by_agents(const std::vector<EgoSample>& data) {
  std::vector<AgentBucket> out;
  for (const char* l : {"1-4", "5-9", "10-14", "15-19", "20-24", ">=25"}) out.push_back({l, {}, 0.0});
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::string label = agent_bucket_label(data[i].num_agents());
    for (auto& b : out) {
      if (b.label == label) b.samples.push_back(i);
    }
  }
  for (auto& b : out) {
    b.ratio = data.empty() ? 0.0 : 100.0 * static_cast<double>(b.samples.size()) / static_cast<double>(data.size());
  }
  return out;
}

// ---- outputs ---------------------------------------------------------------------

std::string report_csv(const std::vector<ReportTable>& tables, const std::string& config_hash) {
  bool with_setting = false;
  for (const auto& t : tables) with_setting = with_setting || !t.setting.empty();
  std::string out = with_setting ? "class,metric,value,count,config_hash,setting\n" : "class,metric,value,count,config_hash\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return std::string(buf);
  };
  for (const auto& t : tables) {
    const std::pair<const char*, const ClassMetrics*> classes[] = {
        {"Vehicle", &t.table.vehicle}, {"Pedestrian", &t.table.pedestrian}, {"All", &t.table.all}};
    for (const auto& [name, m] : classes) {
      const std::string count = std::to_string(m->count);
      const std::string tail = "," + count + "," + config_hash + (with_setting ? "," + t.setting : "") + "\n";
      out += std::string(name) + ",minADE," + (m->count ? num(m->min_ade) : "") + tail;
      out += std::string(name) + ",minFDE," + (m->count ? num(m->min_fde) : "") + tail;
      out += std::string(name) + ",MR," + (m->miss_rate ? num(*m->miss_rate) : "") + tail;
    }
  }
  return out;
}

void emit_report(const std::vector<ReportTable>& tables, const std::string& config_hash, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write report " + path);
  f << report_csv(tables, config_hash);
  if (!f) throw IoError("failed writing report " + path);
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string path_element(const std::vector<std::pair<double, double>>& pts, const std::string& style) {
  std::string d;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    d += (i == 0 ? "M" : " L") + fmt(pts[i].first) + " " + fmt(-pts[i].second);
  }
  return "<path d=\"" + d + "\" " + style + "/>\n";
}

}  // namespace

std::string plot_svg(const EgoSample& sample, const CandidateSet& candidates) {
  const std::size_t N = sample.num_agents(), T_p = sample.history_steps(), T_f = sample.future_steps();
  if (candidates.trajectories.rank() != 4 || candidates.trajectories.dim(0) != N ||
      candidates.trajectories.dim(2) != T_f) {
    throw DimensionError("plot: candidates do not match the sample");
  }
  const std::size_t K = candidates.trajectories.dim(1);
  const double half = 30.0;
  std::string svg = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"720\" height=\"720\" viewBox=\"" + fmt(-half) + " " +
         fmt(-half) + " " + fmt(2 * half) + " " + fmt(2 * half) + "\">\n";
  svg += "<rect x=\"" + fmt(-half) + "\" y=\"" + fmt(-half) + "\" width=\"" + fmt(2 * half) + "\" height=\"" +
         fmt(2 * half) + "\" fill=\"white\"/>\n";
  auto polylines = [&](const Tensor& polys, const char* style) {
    const std::size_t n = polys.rank() == 3 ? polys.dim(0) : 0;
    for (std::size_t i = 0; i < n; ++i) {
      std::string pts;
      for (std::size_t k = 0; k < kPolylinePoints; ++k) {
        const double* p = polys.data() + (i * kPolylinePoints + k) * kMapFeatures;
        pts += (k ? " " : "") + fmt(p[0]) + "," + fmt(-p[1]);
      }
      svg += "<polyline points=\"" + pts + "\" " + style + "/>\n";
    }
  };
  svg += "<g id=\"map\">\n";
  polylines(sample.soft_polys, "fill=\"none\" stroke=\"#bbbbbb\" stroke-width=\"0.1\" stroke-dasharray=\"0.4 0.3\"");
  polylines(sample.hard_polys, "fill=\"none\" stroke=\"#333333\" stroke-width=\"0.15\"");
  svg += "</g>\n<g id=\"agents\">\n";
  for (std::size_t a = 0; a < N; ++a) {
    std::vector<std::pair<double, double>> past, gt;
    for (std::size_t t = 0; t < T_p; ++t) {
      if (sample.agent_valid[a * T_p + t] == 0.0) continue;
      const double* f = sample.agent_features.data() + (a * T_p + t) * kAgentFeatures;
      past.emplace_back(f[0], f[1]);
    }
    for (std::size_t t = 0; t < T_f; ++t) {
      if (sample.future_valid[a * T_f + t] == 0.0) continue;
      gt.emplace_back(sample.gt_future[(a * T_f + t) * 2], sample.gt_future[(a * T_f + t) * 2 + 1]);
    }
    svg += path_element(past, "class=\"past\" fill=\"none\" stroke=\"#555555\" stroke-width=\"0.2\"");
    svg += path_element(gt, "class=\"gt\" fill=\"none\" stroke=\"#2ca02c\" stroke-width=\"0.2\"");
    for (std::size_t k = 0; k < K; ++k) {
      std::vector<std::pair<double, double>> pred;
      for (std::size_t t = 0; t < T_f; ++t) {
        const double* p = candidates.trajectories.data() + ((a * K + k) * T_f + t) * 2;
        pred.emplace_back(p[0], p[1]);
      }
      const double prob = candidates.probabilities.size() == N * K ? candidates.probabilities[a * K + k] : 1.0;
      svg += path_element(pred, "class=\"pred\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"0.15\" stroke-opacity=\"" +
                                    fmt(0.25 + 0.75 * prob) + "\"");
    }
  }
  svg += "</g>\n<g id=\"legend\" font-size=\"1.6\" font-family=\"sans-serif\">\n";
  const std::pair<const char*, const char*> entries[] = {
      {"past", "#555555"}, {"ground truth", "#2ca02c"}, {"predicted", "#1f77b4"}};
  double y = -half + 2.0;
  for (const auto& [label, color] : entries) {
    svg += "<line x1=\"" + fmt(-half + 1.0) + "\" y1=\"" + fmt(y) + "\" x2=\"" + fmt(-half + 4.0) + "\" y2=\"" +
           fmt(y) + "\" stroke=\"" + color + "\" stroke-width=\"0.3\"/>\n";
    svg += "<text x=\"" + fmt(-half + 5.0) + "\" y=\"" + fmt(y + 0.5) + "\">" + label + "</text>\n";
    y += 2.2;
  }
  svg += "</g>\n</svg>\n";
  return svg;
}

void emit_plot(const EgoSample& sample, const CandidateSet& candidates, const std::string& path) {
  const std::string svg = plot_svg(sample, candidates);
  std::ofstream f(path);
  if (!f) throw IoError("cannot write plot " + path);
  f << svg;
  if (!f) throw IoError("failed writing plot " + path);
}

}  // namespace parkdiff
