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
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "parkdiff/model.hpp"

namespace parkdiff {

// ---- per-agent metrics -----------------------------------------------------------

// candidates [K, T_f, 2], gt [T_f, 2], valid [T_f]. Both return nullopt when
// no future step is valid (the agent is excluded).
std::optional<double> min_ade(const Tensor& candidates, const Tensor& gt, const Tensor& valid);

struct FdeResult {
  double value = 0.0;
  std::size_t best = 0;     // candidate index attaining the minimum
  bool last_valid = false;  // final step was masked; the last valid step was used
};
std::optional<FdeResult> min_fde(const Tensor& candidates, const Tensor& gt, const Tensor& valid);

// Final-step error of one candidate at the step min_fde would use.
std::optional<double> candidate_fde(const Tensor& candidates, std::size_t k, const Tensor& gt, const Tensor& valid);

// Percentage of entries strictly above the threshold; nullopt for an empty list.
std::optional<double> miss_rate(const std::vector<double>& fde, double threshold = 2.0);

// ---- tables ----------------------------------------------------------------------

enum class MissRateMode { kBestOfK, kMostProbable };

struct EvalConfig {
  double miss_threshold = 2.0;  // m
  MissRateMode miss_rate_mode = MissRateMode::kBestOfK;
  std::size_t threads = 1;
};

struct ClassMetrics {
  double min_ade = 0.0;  // m
  double min_fde = 0.0;  // m
  std::optional<double> miss_rate;  // %
  std::size_t count = 0;            // agents
};

struct MetricsTable {
  ClassMetrics vehicle, pedestrian, all;
};

// Maps one sample (and its index in the dataset) to candidates for all of
// its agents: trajectories [N, K, T_f, 2], probabilities [N, K].
using Predictor = std::function<CandidateSet(const EgoSample&)>;

// Seeds each sample's reverse-diffusion noise from (seed, scene, ego, t0), so
// predictions do not depend on dataset order.
Predictor model_predictor(const Model& model, std::uint64_t seed);
// Returns the ground truth as a single candidate.
Predictor oracle_predictor();

// Pooled over every agent with at least one valid future step. Samples are
// processed by up to config.threads workers; the reduction is ordered, so the
// result does not depend on the thread count or on the dataset order.
MetricsTable evaluate(const std::vector<EgoSample>& data, const Predictor& predictor, const EvalConfig& config = {});

// ---- EKF baseline ----------------------------------------------------------------

struct EkfConfig {
  double vehicle_accel_noise = 0.5;     // m/s^2, CTRV longitudinal
  double vehicle_yaw_accel_noise = 0.3; // rad/s^2, CTRV yaw
  double pedestrian_accel_noise = 0.8;  // m/s^2, CV
  double position_noise = 0.05;         // m, measurement std
  double heading_noise = 0.05;          // rad, measurement std (vehicles)
  double dt = 0.4;
};

struct EkfPrediction {
  Tensor trajectory;     // [T_f, 2]
  bool held = false;     // fewer than two valid history steps: position held
};

// history [T_p, 12] in the sample's feature layout, valid [T_p]. Vehicles use
// a constant-turn-rate-and-velocity filter, pedestrians constant velocity.
EkfPrediction ekf_predict(const Tensor& history, const Tensor& valid, AgentType type, std::size_t future_steps,
                          const EkfConfig& config = {});

// K = 1 candidate per agent with probability 1; held agents are flagged.
Predictor ekf_predictor(const EkfConfig& config = {});

// ---- ablations -------------------------------------------------------------------

// Removes round(fraction * (soft + hard)) polylines, chosen uniformly per
// sample from (seed, scene, ego, t0).
EgoSample mask_polylines(const EgoSample& sample, double fraction, std::uint64_t seed);

MetricsTable ablate_mask(const std::vector<EgoSample>& data, const Predictor& predictor, double fraction,
                         std::uint64_t seed, const EvalConfig& config = {});

inline constexpr double kMaskFractions[] = {0.0, 0.25, 0.5, 0.75, 1.0};

struct AgentBucket {
  std::string label;                 // "1-4", ..., ">=25"
  std::vector<std::size_t> samples;  // indices into the dataset
  double ratio = 0.0;                // % of samples
};

// Buckets 1-4, 5-9, 10-14, 15-19, 20-24 and >=25 agents per sample (ego
// included), always in this order.
std::vector<AgentBucket> bucket_by_agents(const std::vector<EgoSample>& data);
std::string agent_bucket_label(std::size_t agents);

// ---- outputs ---------------------------------------------------------------------

struct ReportTable {
  std::string setting;  // empty for a plain evaluation, else e.g. "mask=25%"
  MetricsTable table;
};

// CSV with columns class, metric, value, count, config_hash, plus a trailing
// setting column when any table carries one. Missing values are empty.
void emit_report(const std::vector<ReportTable>& tables, const std::string& config_hash, const std::string& path);
std::string report_csv(const std::vector<ReportTable>& tables, const std::string& config_hash);

// SVG overlay of one sample in its ego frame: map polylines, then per agent
// one past path, one ground-truth path and K predicted paths.
void emit_plot(const EgoSample& sample, const CandidateSet& candidates, const std::string& path);
std::string plot_svg(const EgoSample& sample, const CandidateSet& candidates);

// Deterministic 64-bit identity of a sample, used to derive per-sample seeds.
std::uint64_t sample_key(const EgoSample& sample, std::uint64_t seed);

}  // namespace parkdiff
