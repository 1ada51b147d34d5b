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

#include "parkdiff/error.hpp"
#include "parkdiff/grad_check.hpp"
#include "test_util.hpp"

namespace parkdiff {
namespace {

using testing::max_abs_diff;
using testing::permute_agents;
using testing::random_batch;
using testing::tiny_config;

ParameterSet encoder_params(const ModelConfig& cfg, std::uint64_t seed) {
  ParameterSet ps;
  std::mt19937_64 rng(seed);
  init_encoders(ps, cfg, rng);
  return ps;
}

// Replaces the zero-initialized modulation output layer with random weights.
void randomize_modulation(ParameterSet& ps, std::mt19937_64& rng) {
  for (const char* name : {"type.mlp.l2.W", "type.mlp.l2.b"}) {
    Tensor& t = ps.get_mut(name);
    t = normal_tensor(t.shape(), 0.3, rng);
  }
}

Tensor row(const Tensor& t, std::size_t r) {
  const std::size_t w = t.cols();
  return Tensor(Shape{w}, std::vector<double>(t.data() + r * w, t.data() + (r + 1) * w));
}

TEST(AgentEncode, IdenticalHistoriesGiveIdenticalEmbeddings) {
  const ModelConfig cfg = tiny_config();
  std::mt19937_64 rng(1);
  Batch b = random_batch(cfg, 3, 2, 2, rng);
  const std::size_t w = b.features.size() / 3;
  std::copy_n(b.features.data(), w, b.features.data() + 2 * w);
  const ParameterSet ps = encoder_params(cfg, 2);
  Graph g;
  const Tensor e = agent_encode(Scope(g, ps), cfg, g.constant(b.features), b.history_valid).value();
  EXPECT_EQ(e.shape(), (Shape{3, 2 * cfg.d}));
  // Equal up to GEMM blocking round-off, which depends on the row position.
  EXPECT_LE(max_abs_diff(row(e, 0), row(e, 2)), 1e-12);
  EXPECT_GT(max_abs_diff(row(e, 0), row(e, 1)), 0.0);
}

TEST(AgentEncode, PermutingAgentsPermutesAllOutputs) {
  const ModelConfig cfg = tiny_config();
  std::mt19937_64 rng(3);
  ParameterSet ps = encoder_params(cfg, 4);
  randomize_modulation(ps, rng);
  const Batch b = random_batch(cfg, 5, 3, 2, rng);
  const std::vector<std::size_t> perm{3, 0, 4, 1, 2};
  const Batch p = permute_agents(b, perm);
  Graph g1, g2;
  const Encoding e1 = encode(Scope(g1, ps), cfg, b);
  const Encoding e2 = encode(Scope(g2, ps), cfg, p);
  for (std::size_t i = 0; i < perm.size(); ++i) {
    EXPECT_LE(max_abs_diff(row(e2.e_a.value(), i), row(e1.e_a.value(), perm[i])), 1e-12);
    EXPECT_LE(max_abs_diff(row(e2.f_c.value(), i), row(e1.f_c.value(), perm[i])), 1e-12);
    EXPECT_LE(max_abs_diff(row(e2.context.value(), i), row(e1.context.value(), perm[i])), 1e-12);
  }
}

TEST(AgentEncode, MaskedTrailingStepsMatchTruncatedSequence) {
  const ModelConfig cfg = tiny_config();
  const ParameterSet ps = encoder_params(cfg, 5);
  const std::size_t T = cfg.history_steps, keep = T - 3;
  Tensor full(Shape{1, T, kAgentFeatures});
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t f = 0; f < kAgentFeatures; ++f) full[t * kAgentFeatures + f] = 0.5 + 0.1 * static_cast<double>(f);
  }
  Tensor valid(Shape{1, T}, 1.0);
  for (std::size_t t = keep; t < T; ++t) valid[t] = 0.0;
  Tensor cut(Shape{1, keep, kAgentFeatures},
             std::vector<double>(full.data(), full.data() + keep * kAgentFeatures));
  Graph g;
  const Scope s(g, ps);
  const Tensor a = agent_encode(s, cfg, g.constant(full), valid).value();
  const Tensor b = agent_encode(s, cfg, g.constant(cut), Tensor(Shape{1, keep}, 1.0)).value();
  EXPECT_LE(max_abs_diff(a, b), 1e-9);
}

TEST(AgentEncode, NoValidStepsGivesZeroRow) {
  const ModelConfig cfg = tiny_config();
  std::mt19937_64 rng(6);
  Batch b = random_batch(cfg, 2, 1, 1, rng);
  for (std::size_t t = 0; t < cfg.history_steps; ++t) b.history_valid[cfg.history_steps + t] = 0.0;
  const ParameterSet ps = encoder_params(cfg, 7);
  Graph g;
  const Tensor e = agent_encode(Scope(g, ps), cfg, g.constant(b.features), b.history_valid).value();
  const Tensor masked = row(e, 1);
  for (double v : masked.values()) EXPECT_EQ(v, 0.0);
}

TEST(PolylineEncoders, IdenticalPolylinesAndSeparateBranches) {
  const ModelConfig cfg = tiny_config();
  std::mt19937_64 rng(8);
  Batch b = random_batch(cfg, 1, 3, 0, rng);
  const std::size_t w = b.soft.cols();
  std::copy_n(b.soft.data(), w, b.soft.data() + 2 * w);
  const ParameterSet ps = encoder_params(cfg, 9);
  Graph g;
  const Scope s(g, ps);
  const Tensor soft = encode_polylines(s, "soft", g.constant(b.soft)).value();
  const Tensor hard = encode_polylines(s, "hard", g.constant(b.soft)).value();
  EXPECT_EQ(soft.shape(), (Shape{3, cfg.d}));
  EXPECT_EQ(max_abs_diff(row(soft, 0), row(soft, 2)), 0.0);
  EXPECT_GT(max_abs_diff(soft, hard), 1e-3);
  EXPECT_THROW(encode_polylines(s, "other", g.constant(b.soft)), ContractError);
}

TEST(PolylineEncoders, GradientCheckBothBranches) {
  const ModelConfig cfg = tiny_config();
  std::mt19937_64 rng(10);
  const Batch b = random_batch(cfg, 1, 3, 0, rng);
  const ParameterSet ps = encoder_params(cfg, 11);
  const auto rep = grad_check_params(
      [&](const Scope& s) {
        Var x = s.graph().constant(b.soft);
        return ops::add(encode_polylines(s, "soft", x), encode_polylines(s, "hard", x));
      },
      ps, {"map.soft.l1.W", "map.soft.l1.b", "map.soft.l2.W", "map.hard.l1.W", "map.hard.l2.W", "map.hard.l2.b"},
      {.step = 1e-5, .tolerance = 1e-5, .max_entries = 40});
  EXPECT_TRUE(rep.passed) << rep.max_rel_error << " at " << rep.worst_entry;
}

TEST(FuseSoft, SinglePolylineReturnsItsEmbedding) {
  Graph g;
  Var q = g.constant(Tensor::matrix({{1.0, -2.0}, {0.3, 0.7}}));
  Var f = g.constant(Tensor::matrix({{4.0, 5.0}}));
  const Tensor out = fuse_soft(q, f, {{0, 1}, {0, 1}}).value();
  EXPECT_EQ(out, Tensor::matrix({{4.0, 5.0}, {4.0, 5.0}}));
}

TEST(FuseSoft, OrthogonalQueryAveragesUniformly) {
  Graph g;
  Var q = g.constant(Tensor::matrix({{0.0, 0.0, 3.0}}));
  Var f = g.constant(Tensor::matrix({{1.0, 2.0, 0.0}, {-3.0, 4.0, 0.0}, {5.0, 0.0, 0.0}}));
  const Tensor out = fuse_soft(q, f, {{0, 3}}).value();
  EXPECT_NEAR(out[0], 1.0, 1e-15);
  EXPECT_NEAR(out[1], 2.0, 1e-15);
  EXPECT_NEAR(out[2], 0.0, 1e-15);
}

TEST(FuseSoft, HandSizedTwoPolylines) {
  // d = 1, q = 2, keys (1, -1): logits (2, -2), weights e^2/(e^2+e^-2) = 0.98201...
  const auto w = ops::segment_attention_weights(Tensor::matrix({{2.0}}), Tensor::matrix({{1.0}, {-1.0}}), {{0, 2}});
  ASSERT_EQ(w.size(), 1u);
  EXPECT_NEAR(w[0][0], 0.9820, 5e-5);
  EXPECT_NEAR(w[0][1], 0.0180, 5e-5);
  Graph g;
  const Tensor out =
      fuse_soft(g.constant(Tensor::matrix({{2.0}})), g.constant(Tensor::matrix({{1.0}, {-1.0}})), {{0, 2}}).value();
  EXPECT_NEAR(out[0], std::tanh(2.0), 1e-15);
}

TEST(FuseSoft, EmptyRangePassesQueryThrough) {
  Graph g;
  Var q = g.constant(Tensor::matrix({{1.0, 2.0}, {3.0, 4.0}}));
  Var f = g.constant(Tensor::matrix({{9.0, 9.0}}));
  const Tensor out = fuse_soft(q, f, {{0, 0}, {0, 1}}).value();
  EXPECT_EQ(out, Tensor::matrix({{1.0, 2.0}, {9.0, 9.0}}));
}

TEST(FuseHard, EmptyAndZeroEmbeddingsAreIdentity) {
  Graph g;
  const Tensor e = Tensor::matrix({{1.0, -2.0}, {0.5, 0.25}});
  Var q = g.constant(e);
  EXPECT_EQ(fuse_hard(q, g.constant(Tensor::matrix({{7.0, 7.0}})), {{0, 0}, {0, 0}}).value(), e);
  EXPECT_EQ(fuse_hard(q, g.constant(Tensor(Shape{3, 2})), {{0, 3}, {0, 3}}).value(), e);
}

TEST(FuseHard, ResidualIsConvexCombinationOfHardEmbeddings) {
  std::mt19937_64 rng(12);
  const Tensor e = normal_tensor(Shape{4, 5}, 1.0, rng);
  const Tensor f = normal_tensor(Shape{6, 5}, 2.0, rng);
  const std::vector<ops::Range> ranges{{0, 6}, {1, 4}, {2, 3}, {0, 2}};
  Graph g;
  const Tensor out = fuse_hard(g.constant(e), g.constant(f), ranges).value();
  double max_row = 0.0;
  for (std::size_t j = 0; j < 6; ++j) {
    double s = 0.0;
    for (std::size_t c = 0; c < 5; ++c) s += f.at(j, c) * f.at(j, c);
    max_row = std::max(max_row, std::sqrt(s));
  }
  for (std::size_t i = 0; i < 4; ++i) {
    // Brute-force softmax over the agent's range.
    std::vector<double> logits;
    for (std::size_t j = ranges[i].first; j < ranges[i].second; ++j) {
      double dot = 0.0;
      for (std::size_t c = 0; c < 5; ++c) dot += e.at(i, c) * f.at(j, c);
      logits.push_back(dot / std::sqrt(5.0));
    }
    double mx = logits[0], z = 0.0, wsum = 0.0;
    for (double l : logits) mx = std::max(mx, l);
    for (double l : logits) z += std::exp(l - mx);
    double norm2 = 0.0;
    for (std::size_t c = 0; c < 5; ++c) {
      double expect = 0.0;
      for (std::size_t j = ranges[i].first; j < ranges[i].second; ++j) {
        expect += std::exp(logits[j - ranges[i].first] - mx) / z * f.at(j, c);
      }
      const double resid = out.at(i, c) - e.at(i, c);
      EXPECT_NEAR(resid, expect, 1e-12);
      norm2 += resid * resid;
    }
    for (double l : logits) {
      const double w = std::exp(l - mx) / z;
      EXPECT_GT(w, 0.0);
      wsum += w;
    }
    EXPECT_NEAR(wsum, 1.0, 1e-12);
    EXPECT_LE(std::sqrt(norm2), max_row + 1e-12);
  }
}

TEST(MapFusion, PolylinePermutationInvariance) {
  const ModelConfig cfg = tiny_config();
  std::mt19937_64 rng(13);
  const ParameterSet ps = encoder_params(cfg, 14);
  const Batch b = random_batch(cfg, 3, 5, 4, rng);
  Batch p = b;
  const std::size_t w = b.soft.cols();
  const std::vector<std::size_t> sp{4, 2, 0, 1, 3}, hp{3, 1, 2, 0};
  for (std::size_t i = 0; i < sp.size(); ++i) std::copy_n(b.soft.data() + sp[i] * w, w, p.soft.data() + i * w);
  for (std::size_t i = 0; i < hp.size(); ++i) std::copy_n(b.hard.data() + hp[i] * w, w, p.hard.data() + i * w);
  Graph g1, g2;
  const Encoding e1 = encode(Scope(g1, ps), cfg, b);
  const Encoding e2 = encode(Scope(g2, ps), cfg, p);
  EXPECT_LE(max_abs_diff(e1.e_soft.value(), e2.e_soft.value()), 1e-12);
  EXPECT_LE(max_abs_diff(e1.e_map.value(), e2.e_map.value()), 1e-12);
}

TEST(MapFusion, AttentionWeightsFormSimplex) {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor q = normal_tensor(Shape{3, 4}, 2.0, rng);
    const Tensor k = normal_tensor(Shape{5, 4}, 2.0, rng);
    const auto w = ops::segment_attention_weights(q, k, {{0, 5}, {2, 5}, {4, 5}});
    for (const auto& r : w) {
      double s = 0.0;
      for (double v : r) {
        EXPECT_GT(v, 0.0);
        s += v;
      }
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
}

TEST(TypeModulate, IdentityAtInit) {
  const ModelConfig cfg = tiny_config();
  std::mt19937_64 rng(16);
  const ParameterSet ps = encoder_params(cfg, 17);
  const Tensor e = normal_tensor(Shape{4, cfg.d}, 1.0, rng);
  Graph g;
  const Tensor f = type_modulate(Scope(g, ps), cfg, g.constant(e),
                                 {AgentType::kVehicle, AgentType::kPedestrian, AgentType::kPedestrian,
                                  AgentType::kVehicle})
                       .value();
  EXPECT_EQ(f, e);
}

TEST(TypeModulate, ForcedGammaOneDoubles) {
  const ModelConfig cfg = tiny_config();
  std::mt19937_64 rng(18);
  ParameterSet ps = encoder_params(cfg, 19);
  Tensor& bias = ps.get_mut("type.mlp.l2.b");
  for (std::size_t i = 0; i < cfg.d; ++i) bias[i] = 1.0;
  const Tensor e = normal_tensor(Shape{2, cfg.d}, 1.0, rng);
  Graph g;
  const Tensor f =
      type_modulate(Scope(g, ps), cfg, g.constant(e), {AgentType::kVehicle, AgentType::kPedestrian}).value();
  for (std::size_t i = 0; i < e.size(); ++i) EXPECT_DOUBLE_EQ(f[i], 2.0 * e[i]);
}

TEST(TypeModulate, OneGradientStepSeparatesTypes) {
  const ModelConfig cfg = tiny_config();
  std::mt19937_64 rng(20);
  ParameterSet ps = encoder_params(cfg, 21);
  const Tensor e(Shape{2, cfg.d}, 0.5);
  const std::vector<AgentType> types{AgentType::kVehicle, AgentType::kPedestrian};
  const Tensor r = normal_tensor(Shape{2, cfg.d}, 1.0, rng);
  {
    Graph g;
    Var loss = ops::sum(ops::mul_const(type_modulate(Scope(g, ps), cfg, g.constant(e), types), r));
    g.backward(loss);
    for (const auto& [name, grad] : g.param_grads()) {
      Tensor& p = ps.get_mut(name);
      for (std::size_t i = 0; i < p.size(); ++i) p[i] -= 0.1 * grad[i];
    }
  }
  Graph g;
  const Tensor f = type_modulate(Scope(g, ps), cfg, g.constant(e), types).value();
  EXPECT_GT(max_abs_diff(row(f, 0), row(f, 1)), 1e-6);
}

TEST(TypeModulate, UnknownTypeIsContractError) {
  const ModelConfig cfg = tiny_config();
  const ParameterSet ps = encoder_params(cfg, 22);
  Graph g;
  EXPECT_THROW(type_modulate(Scope(g, ps), cfg, g.constant(Tensor(Shape{1, cfg.d})), {static_cast<AgentType>(7)}),
               ContractError);
}

TEST(BuildContext, WidthIsThreeDAndMaskedRowsAreZero) {
  const ModelConfig cfg;  // d = 64
  std::mt19937_64 rng(23);
  const ParameterSet ps = encoder_params(cfg, 24);
  Batch b = random_batch(cfg, 3, 2, 2, rng);
  b.agent_valid[1] = 0.0;
  for (std::size_t t = 0; t < cfg.history_steps; ++t) b.history_valid[cfg.history_steps + t] = 0.0;
  Graph g;
  const Tensor c = encode(Scope(g, ps), cfg, b).context.value();
  EXPECT_EQ(c.shape(), (Shape{3, 192}));
  const Tensor masked = row(c, 1);
  for (double v : masked.values()) EXPECT_EQ(v, 0.0);
  EXPECT_GT(max_abs_diff(row(c, 0), Tensor(Shape{192})), 0.0);
}

TEST(BuildContext, SensitiveToHistoryMapAndType) {
  const ModelConfig cfg = tiny_config();
  std::mt19937_64 rng(25);
  ParameterSet ps = encoder_params(cfg, 26);
  randomize_modulation(ps, rng);
  const Batch base = random_batch(cfg, 2, 3, 3, rng);
  auto context = [&](const Batch& b) {
    Graph g;
    return row(encode(Scope(g, ps), cfg, b).context.value(), 0);
  };
  const Tensor c0 = context(base);
  Batch history = base;
  history.features[5] += 0.5;
  Batch map = base;
  map.soft[7] += 0.5;
  Batch hard = base;
  hard.hard[3] += 0.5;
  Batch type = base;
  type.types[0] = AgentType::kPedestrian;
  EXPECT_GT(max_abs_diff(context(history), c0), 1e-9);
  EXPECT_GT(max_abs_diff(context(map), c0), 1e-9);
  EXPECT_GT(max_abs_diff(context(hard), c0), 1e-9);
  EXPECT_GT(max_abs_diff(context(type), c0), 1e-9);
}

TEST(EncodersEndToEnd, GradientCheck) {
  const ModelConfig cfg = tiny_config();
  std::mt19937_64 rng(27);
  ParameterSet ps = encoder_params(cfg, 28);
  randomize_modulation(ps, rng);
  const Batch b = random_batch(cfg, 3, 3, 2, rng);
  std::vector<std::string> names;
  for (const auto& [name, value] : ps) names.push_back(name);
  const auto rep = grad_check_params([&](const Scope& s) { return encode(s, cfg, b).context; }, ps, names,
                                     {.step = 1e-5, .tolerance = 1e-4, .max_entries = 6});
  EXPECT_TRUE(rep.passed) << rep.max_rel_error << " at " << rep.worst_entry;
  EXPECT_GT(rep.entries_checked, 50u);
}

TEST(Encode, MapToggleSkipsFusion) {
  ModelConfig cfg = tiny_config();
  cfg.use_map = false;
  std::mt19937_64 rng(29);
  const ParameterSet ps = encoder_params(cfg, 30);
  const Batch b = random_batch(cfg, 2, 3, 3, rng);
  Graph g;
  const Encoding e = encode(Scope(g, ps), cfg, b);
  EXPECT_EQ(e.e_map.value(), e.query.value());
}

}  // namespace
}  // namespace parkdiff
