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
#include <random>
#include <regex>
#include <sstream>

#include "parkdiff/error.hpp"
#include "parkdiff/evaluation.hpp"
#include "parkdiff/synth.hpp"

namespace parkdiff {
namespace {

// Straightforward reimplementations used as oracles.
double brute_ade(const std::vector<std::vector<std::array<double, 2>>>& c, const std::vector<std::array<double, 2>>& y,
                 const std::vector<bool>& valid) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& cand : c) {
    double s = 0.0;
    int n = 0;
    for (std::size_t t = 0; t < y.size(); ++t) {
      if (!valid[t]) continue;
      s += std::sqrt((cand[t][0] - y[t][0]) * (cand[t][0] - y[t][0]) + (cand[t][1] - y[t][1]) * (cand[t][1] - y[t][1]));
      ++n;
    }
    best = std::min(best, s / n);
  }
  return best;
}

double brute_fde(const std::vector<std::vector<std::array<double, 2>>>& c, const std::vector<std::array<double, 2>>& y,
                 const std::vector<bool>& valid) {
  std::size_t last = 0;
  for (std::size_t t = 0; t < y.size(); ++t) {
    if (valid[t]) last = t;
  }
  double best = std::numeric_limits<double>::infinity();
  for (const auto& cand : c) {
    const double dx = cand[last][0] - y[last][0], dy = cand[last][1] - y[last][1];
    best = std::min(best, std::sqrt(dx * dx + dy * dy));
  }
  return best;
}

struct RandomSet {
  Tensor cand, gt, valid;
  std::vector<std::vector<std::array<double, 2>>> c;
  std::vector<std::array<double, 2>> y;
  std::vector<bool> v;
};

RandomSet random_set(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> kd(1, 8), td(1, 12);
  std::normal_distribution<double> n(0.0, 3.0);
  std::bernoulli_distribution keep(0.8);
  RandomSet r;
  const std::size_t K = kd(rng), T = td(rng);
  r.cand = Tensor(Shape{K, T, 2});
  r.gt = Tensor(Shape{T, 2});
  r.valid = Tensor(Shape{T});
  r.c.assign(K, std::vector<std::array<double, 2>>(T));
  r.y.resize(T);
  r.v.resize(T);
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t t = 0; t < T; ++t) {
      for (int d = 0; d < 2; ++d) r.c[k][t][d] = r.cand[(k * T + t) * 2 + d] = n(rng);
    }
  }
  bool any = false;
  for (std::size_t t = 0; t < T; ++t) {
    for (int d = 0; d < 2; ++d) r.y[t][d] = r.gt[t * 2 + d] = n(rng);
    r.v[t] = keep(rng);
    r.valid[t] = r.v[t] ? 1.0 : 0.0;
    any = any || r.v[t];
  }
  if (!any) {
    r.v[0] = true;
    r.valid[0] = 1.0;
  }
  return r;
}

TEST(Metrics, AgreeWithBruteForceOnRandomSets) {
  std::mt19937_64 rng(11);
  std::vector<double> fdes;
  for (int i = 0; i < 1000; ++i) {
    const RandomSet r = random_set(rng);
    EXPECT_NEAR(*min_ade(r.cand, r.gt, r.valid), brute_ade(r.c, r.y, r.v), 1e-12);
    const double fde = brute_fde(r.c, r.y, r.v);
    EXPECT_NEAR(min_fde(r.cand, r.gt, r.valid)->value, fde, 1e-12);
    fdes.push_back(fde);
  }
  std::size_t misses = 0;
  for (double f : fdes) misses += f > 2.0;
  EXPECT_NEAR(*miss_rate(fdes), 100.0 * static_cast<double>(misses) / 1000.0, 1e-12);
}

TEST(Metrics, HandExample) {
  // Candidate 0 is 1 m off at every step, candidate 1 is exact except 3 m at the end.
  const Tensor gt = Tensor(Shape{2, 2}, {0.0, 0.0, 1.0, 0.0});
  const Tensor cand = Tensor(Shape{2, 2, 2}, {0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 1.0, 3.0});
  const Tensor valid = Tensor(Shape{2}, 1.0);
  EXPECT_DOUBLE_EQ(*min_ade(cand, gt, valid), 1.0);
  const auto fde = min_fde(cand, gt, valid);
  EXPECT_DOUBLE_EQ(fde->value, 1.0);
  EXPECT_EQ(fde->best, 0u);
  EXPECT_FALSE(fde->last_valid);
  EXPECT_DOUBLE_EQ(*candidate_fde(cand, 1, gt, valid), 3.0);
}

TEST(Metrics, MissRateIsStrict) {
  EXPECT_DOUBLE_EQ(*miss_rate({1.0, 2.5, 2.0, 3.0}), 50.0);
  EXPECT_DOUBLE_EQ(*miss_rate({2.0}), 0.0);
  EXPECT_FALSE(miss_rate({}).has_value());
}

TEST(Metrics, MaskedFinalStepUsesLastValid) {
  const Tensor gt = Tensor(Shape{3, 2}, {0.0, 0.0, 1.0, 0.0, 2.0, 0.0});
  const Tensor cand = Tensor(Shape{1, 3, 2}, {0.0, 0.0, 1.0, 0.5, 9.0, 9.0});
  const Tensor valid = Tensor(Shape{3}, {1.0, 1.0, 0.0});
  const auto fde = min_fde(cand, gt, valid);
  EXPECT_TRUE(fde->last_valid);
  EXPECT_DOUBLE_EQ(fde->value, 0.5);
  EXPECT_DOUBLE_EQ(*min_ade(cand, gt, valid), 0.25);
}

TEST(Metrics, NoValidStepExcludes) {
  const Tensor gt(Shape{3, 2}), cand(Shape{2, 3, 2}), valid(Shape{3});
  EXPECT_FALSE(min_ade(cand, gt, valid).has_value());
  EXPECT_FALSE(min_fde(cand, gt, valid).has_value());
}

TEST(Metrics, ShapeMismatchIsDimensionError) {
  EXPECT_THROW(min_ade(Tensor(Shape{2, 3, 2}), Tensor(Shape{4, 2}), Tensor(Shape{4})), DimensionError);
  EXPECT_THROW(min_fde(Tensor(Shape{2, 3}), Tensor(Shape{3, 2}), Tensor(Shape{3})), DimensionError);
}

TEST(Metrics, NonIncreasingInK) {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 200; ++i) {
    const RandomSet r = random_set(rng);
    const std::size_t K = r.cand.dim(0), T = r.cand.dim(1);
    double prev_ade = std::numeric_limits<double>::infinity(), prev_fde = prev_ade;
    for (std::size_t k = 1; k <= K; ++k) {
      const Tensor prefix(Shape{k, T, 2}, std::vector<double>(r.cand.data(), r.cand.data() + k * T * 2));
      const double ade = *min_ade(prefix, r.gt, r.valid), fde = min_fde(prefix, r.gt, r.valid)->value;
      EXPECT_LE(ade, prev_ade);
      EXPECT_LE(fde, prev_fde);
      prev_ade = ade;
      prev_fde = fde;
    }
  }
}

std::vector<EgoSample> small_dataset(std::size_t scenes, std::uint64_t seed) {
  SynthConfig sc;
  sc.num_scenes = scenes;
  return make_samples(synth_generate(sc, seed), PreprocessConfig{}, SamplingConfig{});
}

TEST(Evaluate, OracleScoresZero) {
  const auto data = small_dataset(3, 5);
  ASSERT_FALSE(data.empty());
  const MetricsTable m = evaluate(data, oracle_predictor());
  for (const ClassMetrics* c : {&m.vehicle, &m.pedestrian, &m.all}) {
    EXPECT_GT(c->count, 0u);
    EXPECT_EQ(c->min_ade, 0.0);
    EXPECT_EQ(c->min_fde, 0.0);
    EXPECT_EQ(*c->miss_rate, 0.0);
  }
  EXPECT_EQ(m.all.count, m.vehicle.count + m.pedestrian.count);
}

void expect_same(const MetricsTable& a, const MetricsTable& b) {
  const std::pair<const ClassMetrics*, const ClassMetrics*> pairs[] = {
      {&a.vehicle, &b.vehicle}, {&a.pedestrian, &b.pedestrian}, {&a.all, &b.all}};
  for (const auto& [x, y] : pairs) {
    EXPECT_EQ(x->count, y->count);
    EXPECT_EQ(x->min_ade, y->min_ade);
    EXPECT_EQ(x->min_fde, y->min_fde);
    EXPECT_EQ(x->miss_rate, y->miss_rate);
  }
}

TEST(Evaluate, IndependentOfOrderAndThreads) {
  auto data = small_dataset(4, 6);
  const Predictor ekf = ekf_predictor();
  const MetricsTable base = evaluate(data, ekf);
  std::mt19937_64 rng(3);
  std::shuffle(data.begin(), data.end(), rng);
  expect_same(base, evaluate(data, ekf));
  EvalConfig threaded;
  threaded.threads = 3;
  expect_same(base, evaluate(data, ekf, threaded));
}

TEST(Evaluate, ModelPredictorIsOrderInvariant) {
  ModelConfig cfg;
  cfg.d = 16;
  cfg.heads = 2;
  cfg.transformer_layers = 1;
  cfg.K = 2;
  const Model model = init_model(cfg, 4);
  auto data = small_dataset(1, 7);
  data.resize(std::min<std::size_t>(data.size(), 4));
  const MetricsTable base = evaluate(data, model_predictor(model, 9));
  std::reverse(data.begin(), data.end());
  EvalConfig threaded;
  threaded.threads = 2;
  expect_same(base, evaluate(data, model_predictor(model, 9), threaded));
}

TEST(Evaluate, PredictorExceptionPropagates) {
  const auto data = small_dataset(1, 8);
  EvalConfig threaded;
  threaded.threads = 2;
  const Predictor broken = [](const EgoSample&) -> CandidateSet { throw NumericError("boom"); };
  EXPECT_THROW(evaluate(data, broken, threaded), NumericError);
  const Predictor wrong = [](const EgoSample&) {
    CandidateSet c;
    c.trajectories = Tensor(Shape{1, 1, 1, 2});
    return c;
  };
  EXPECT_THROW(evaluate(data, wrong), DimensionError);
}

TEST(Evaluate, MostProbableMissRateUsesTopCandidate) {
  EgoSample s;
  s.agent_ids = {0};
  s.agent_types = {AgentType::kVehicle};
  s.agent_features = Tensor(Shape{1, 2, kAgentFeatures});
  s.gt_future = Tensor(Shape{1, 1, 2});
  s.future_valid = Tensor(Shape{1, 1}, 1.0);
  const Predictor p = [](const EgoSample&) {
    CandidateSet c;
    c.trajectories = Tensor(Shape{1, 2, 1, 2}, {0.0, 0.5, 0.0, 3.0});
    c.probabilities = Tensor(Shape{1, 2}, {0.2, 0.8});
    c.fallback = {false};
    return c;
  };
  EXPECT_EQ(*evaluate({s}, p).all.miss_rate, 0.0);
  EvalConfig top;
  top.miss_rate_mode = MissRateMode::kMostProbable;
  EXPECT_EQ(*evaluate({s}, p, top).all.miss_rate, 100.0);
}

// ---- EKF ----

Tensor vehicle_history(const std::vector<std::array<double, 3>>& poses, double dt) {
  Tensor h(Shape{poses.size(), kAgentFeatures});
  for (std::size_t t = 0; t < poses.size(); ++t) {
    h[t * kAgentFeatures] = poses[t][0];
    h[t * kAgentFeatures + 1] = poses[t][1];
    h[t * kAgentFeatures + 2] = poses[t][2];
    if (t > 0) {
      h[t * kAgentFeatures + 3] =
          std::hypot(poses[t][0] - poses[t - 1][0], poses[t][1] - poses[t - 1][1]) / dt;
    }
  }
  if (poses.size() > 1) h[3] = h[kAgentFeatures + 3];
  return h;
}

TEST(Ekf, StraightLineContinues) {
  std::vector<std::array<double, 3>> poses;
  for (int t = 0; t < 10; ++t) poses.push_back({2.0 * 0.4 * t, 0.0, 0.0});
  const EkfPrediction p =
      ekf_predict(vehicle_history(poses, 0.4), Tensor(Shape{10}, 1.0), AgentType::kVehicle, 10);
  EXPECT_FALSE(p.held);
  for (std::size_t t = 0; t < 10; ++t) {
    EXPECT_NEAR(p.trajectory[2 * t], 2.0 * 0.4 * (9.0 + t + 1), 1e-6);
    EXPECT_NEAR(p.trajectory[2 * t + 1], 0.0, 1e-9);
  }
}

TEST(Ekf, StationaryStays) {
  std::vector<std::array<double, 3>> poses(10, {3.0, -1.0, 0.7});
  for (AgentType type : {AgentType::kVehicle, AgentType::kPedestrian}) {
    const EkfPrediction p = ekf_predict(vehicle_history(poses, 0.4), Tensor(Shape{10}, 1.0), type, 10);
    for (std::size_t t = 0; t < 10; ++t) {
      EXPECT_NEAR(p.trajectory[2 * t], 3.0, 1e-9);
      EXPECT_NEAR(p.trajectory[2 * t + 1], -1.0, 1e-9);
    }
  }
}

TEST(Ekf, CircularArcKeepsRadius) {
  const double r = 8.0, v = 3.0, w = v / r, dt = 0.4;
  std::vector<std::array<double, 3>> poses;
  for (int t = 0; t < 10; ++t) {
    const double a = w * dt * t;
    poses.push_back({r * std::sin(a), r - r * std::cos(a), a});
  }
  const EkfPrediction p = ekf_predict(vehicle_history(poses, dt), Tensor(Shape{10}, 1.0), AgentType::kVehicle, 10);
  for (std::size_t t = 0; t < 10; ++t) {
    const double radius = std::hypot(p.trajectory[2 * t], p.trajectory[2 * t + 1] - r);
    EXPECT_NEAR(radius, r, 0.05 * r) << "step " << t;
  }
}

TEST(Ekf, PedestrianConstantVelocity) {
  Tensor h(Shape{6, kAgentFeatures});
  for (std::size_t t = 0; t < 6; ++t) {
    h[t * kAgentFeatures] = 1.0 + 0.4 * t;
    h[t * kAgentFeatures + 1] = -0.2 * t;
  }
  const EkfPrediction p = ekf_predict(h, Tensor(Shape{6}, 1.0), AgentType::kPedestrian, 4);
  for (std::size_t t = 0; t < 4; ++t) {
    EXPECT_NEAR(p.trajectory[2 * t], 1.0 + 0.4 * (6.0 + t), 1e-3);
    EXPECT_NEAR(p.trajectory[2 * t + 1], -0.2 * (6.0 + t), 1e-3);
  }
}

TEST(Ekf, SingleValidStepHoldsPosition) {
  Tensor h(Shape{4, kAgentFeatures});
  h[2 * kAgentFeatures] = 5.0;
  h[2 * kAgentFeatures + 1] = 6.0;
  const EkfPrediction p = ekf_predict(h, Tensor(Shape{4}, {0.0, 0.0, 1.0, 0.0}), AgentType::kVehicle, 3);
  EXPECT_TRUE(p.held);
  for (std::size_t t = 0; t < 3; ++t) {
    EXPECT_EQ(p.trajectory[2 * t], 5.0);
    EXPECT_EQ(p.trajectory[2 * t + 1], 6.0);
  }
  EXPECT_THROW(ekf_predict(h, Tensor(Shape{3}), AgentType::kVehicle, 3), DimensionError);
}

TEST(Ekf, BeatsHoldingStillOnSyntheticData) {
  const auto data = small_dataset(4, 9);
  const Predictor hold = [](const EgoSample& s) {
    const std::size_t N = s.num_agents(), T = s.future_steps();
    CandidateSet c;
    c.trajectories = Tensor(Shape{N, 1, T, 2});
    for (std::size_t a = 0; a < N; ++a) {
      for (std::size_t t = 0; t < T; ++t) {
        c.trajectories[(a * T + t) * 2] = s.anchor_pos[a * 2];
        c.trajectories[(a * T + t) * 2 + 1] = s.anchor_pos[a * 2 + 1];
      }
    }
    c.probabilities = Tensor(Shape{N, 1}, 1.0);
    c.fallback.assign(N, false);
    return c;
  };
  EXPECT_LT(evaluate(data, ekf_predictor()).all.min_ade, evaluate(data, hold).all.min_ade);
}

// ---- ablations ----

TEST(Ablation, MaskCountsAndDeterminism) {
  const auto data = small_dataset(1, 10);
  const EgoSample& s = data.front();
  const std::size_t n = s.num_soft() + s.num_hard();
  for (double f : kMaskFractions) {
    const EgoSample m = mask_polylines(s, f, 3);
    EXPECT_EQ(m.num_soft() + m.num_hard(), n - static_cast<std::size_t>(std::llround(f * n)));
    const EgoSample again = mask_polylines(s, f, 3);
    EXPECT_EQ(m.soft_polys, again.soft_polys);
    EXPECT_EQ(m.hard_polys, again.hard_polys);
  }
  EXPECT_THROW(mask_polylines(s, 1.5, 3), ConfigError);
}

TEST(Ablation, ZeroMaskEqualsPlainEvaluation) {
  const auto data = small_dataset(2, 11);
  expect_same(ablate_mask(data, ekf_predictor(), 0.0, 1), evaluate(data, ekf_predictor()));
}

TEST(Ablation, BucketsPartitionTheDataset) {
  EXPECT_EQ(agent_bucket_label(1), "1-4");
  EXPECT_EQ(agent_bucket_label(4), "1-4");
  EXPECT_EQ(agent_bucket_label(5), "5-9");
  EXPECT_EQ(agent_bucket_label(24), "20-24");
  EXPECT_EQ(agent_bucket_label(25), ">=25");
  EXPECT_THROW(agent_bucket_label(0), ContractError);
  const auto data = small_dataset(3, 12);
  const auto buckets = bucket_by_agents(data);
  ASSERT_EQ(buckets.size(), 6u);
  std::size_t total = 0;
  double ratio = 0.0;
  for (const auto& b : buckets) {
    total += b.samples.size();
    ratio += b.ratio;
    for (std::size_t i : b.samples) EXPECT_EQ(agent_bucket_label(data[i].num_agents()), b.label);
  }
  EXPECT_EQ(total, data.size());
  EXPECT_NEAR(ratio, 100.0, 1e-9);
}

// ---- outputs ----

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

TEST(Report, CsvRoundTrip) {
  MetricsTable m;
  m.vehicle = {0.125, 0.5, 25.0, 8};
  m.pedestrian = {0.0, 0.0, std::nullopt, 0};
  m.all = {0.125, 0.5, 25.0, 8};
  const auto rows = parse_csv(report_csv({{"", m}}, "abc123"));
  ASSERT_EQ(rows.size(), 10u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"class", "metric", "value", "count", "config_hash"}));
  EXPECT_EQ(rows[1], (std::vector<std::string>{"Vehicle", "minADE", "0.125", "8", "abc123"}));
  EXPECT_EQ(rows[3], (std::vector<std::string>{"Vehicle", "MR", "25", "8", "abc123"}));
  EXPECT_EQ(rows[6], (std::vector<std::string>{"Pedestrian", "MR", "", "0", "abc123"}));
  EXPECT_DOUBLE_EQ(std::stod(rows[8][2]), 0.5);

  const auto ablation = parse_csv(report_csv({{"mask=0%", m}, {"mask=25%", m}}, "h"));
  ASSERT_EQ(ablation.size(), 19u);
  EXPECT_EQ(ablation[0].back(), "setting");
  EXPECT_EQ(ablation[18].back(), "mask=25%");
}

TEST(Report, UnwritablePathIsIoError) {
  EXPECT_THROW(emit_report({}, "h", "/nonexistent-dir/report.csv"), IoError);
}

TEST(Plot, PathCountMatchesAgentsAndCandidates) {
  const auto data = small_dataset(1, 13);
  const EgoSample& s = data.front();
  const Predictor two = [](const EgoSample& x) {
    CandidateSet c;
    const std::size_t N = x.num_agents(), T = x.future_steps();
    c.trajectories = Tensor(Shape{N, 2, T, 2});
    c.probabilities = Tensor(Shape{N, 2}, 0.5);
    c.fallback.assign(N, false);
    return c;
  };
  const std::string svg = plot_svg(s, two(s));
  const std::regex path("<path ");
  const auto paths = std::distance(std::sregex_iterator(svg.begin(), svg.end(), path), std::sregex_iterator());
  EXPECT_EQ(static_cast<std::size_t>(paths), s.num_agents() * 4);
  const std::regex poly("<polyline ");
  const auto polys = std::distance(std::sregex_iterator(svg.begin(), svg.end(), poly), std::sregex_iterator());
  EXPECT_EQ(static_cast<std::size_t>(polys), s.num_soft() + s.num_hard());
  EXPECT_NE(svg.find("ground truth"), std::string::npos);
  EXPECT_THROW(plot_svg(s, CandidateSet{}), DimensionError);
}

}  // namespace
}  // namespace parkdiff
