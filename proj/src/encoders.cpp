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

#include "parkdiff/encoders.hpp"

#include <cmath>

#include "parkdiff/error.hpp"

namespace parkdiff {

namespace {

constexpr double kPositionScale = 10.0;
constexpr std::array<double, kAgentFeatures> kFeatureScale = {
    kPositionScale, kPositionScale, kPi, 5.0, 2.0, 2.0, kPositionScale, kPositionScale, kPi, 5.0, 2.0, 2.0};

std::size_t poly_width() { return kPolylinePoints * kMapFeatures; }

void append_polys(const Tensor& src, std::vector<double>& dst) {
  dst.insert(dst.end(), src.values().begin(), src.values().end());
}

}  // namespace

Batch make_batch(const std::vector<const EgoSample*>& samples) {
  if (samples.empty()) throw ContractError("make_batch: no samples");
  const std::size_t Tp = samples.front()->history_steps(), Tf = samples.front()->future_steps();
  Batch b;
  std::size_t A = 0, S = 0, H = 0;
  for (const EgoSample* s : samples) {
    if (s->history_steps() != Tp || s->future_steps() != Tf) {
      throw DimensionError("make_batch: samples disagree on history or future length");
    }
    A += s->num_agents();
    S += s->num_soft();
    H += s->num_hard();
  }
  b.num_agents = A;
  std::vector<double> feat, hv, gt, fv, ap, av, soft, hard;
  feat.reserve(A * Tp * kAgentFeatures);
  std::size_t soft_at = 0, hard_at = 0;
  for (const EgoSample* s : samples) {
    b.sample_begin.push_back(b.types.size());
    append_polys(s->agent_features, feat);
    append_polys(s->agent_valid, hv);
    append_polys(s->gt_future, gt);
    append_polys(s->future_valid, fv);
    append_polys(s->anchor_pos, ap);
    append_polys(s->anchor_vel, av);
    if (s->num_soft()) append_polys(s->soft_polys, soft);
    if (s->num_hard()) append_polys(s->hard_polys, hard);
    for (std::size_t i = 0; i < s->num_agents(); ++i) {
      b.types.push_back(s->agent_types[i]);
      bool any = false;
      for (std::size_t t = 0; t < Tp; ++t) any = any || s->agent_valid[i * Tp + t] != 0.0;
      b.agent_valid.push_back(any ? 1.0 : 0.0);
      b.soft_ranges.emplace_back(soft_at, soft_at + s->num_soft());
      b.hard_ranges.emplace_back(hard_at, hard_at + s->num_hard());
    }
    soft_at += s->num_soft();
    hard_at += s->num_hard();
  }
  b.sample_begin.push_back(A);
  b.features = Tensor(Shape{A, Tp, kAgentFeatures}, std::move(feat));
  b.history_valid = Tensor(Shape{A, Tp}, std::move(hv));
  b.gt_future = Tensor(Shape{A, Tf, 2}, std::move(gt));
  b.future_valid = Tensor(Shape{A, Tf}, std::move(fv));
  b.anchor_pos = Tensor(Shape{A, 2}, std::move(ap));
  b.anchor_vel = Tensor(Shape{A, 2}, std::move(av));
  b.soft = Tensor(Shape{S, poly_width()}, std::move(soft));
  b.hard = Tensor(Shape{H, poly_width()}, std::move(hard));
  return b;
}

Batch make_batch(const EgoSample& sample) { return make_batch(std::vector<const EgoSample*>{&sample}); }

void init_encoders(ParameterSet& ps, const ModelConfig& cfg, std::mt19937_64& rng) {
  const std::size_t d = cfg.d;
  init_dense(ps, "enc.in", kAgentFeatures, d, rng);
  ps.add("enc.pos", normal_tensor(Shape{cfg.history_steps, d}, 0.02, rng));
  for (std::size_t l = 0; l < cfg.transformer_layers; ++l) {
    init_transformer_layer(ps, "enc.tf" + std::to_string(l), d, rng);
  }
  {
    const double limit = std::sqrt(6.0 / static_cast<double>(3 * kAgentFeatures + d));
    std::uniform_real_distribution<double> u(-limit, limit);
    Tensor k(Shape{3, kAgentFeatures, d});
    for (double& v : k.values()) v = u(rng);
    ps.add("enc.conv.kernel", std::move(k));
  }
  init_gru(ps, "enc.gru", d, d, rng);
  init_mlp2(ps, "map.soft", poly_width(), d, d, rng);
  init_mlp2(ps, "map.hard", poly_width(), d, d, rng);
  init_dense(ps, "fuse.proj", 2 * d, d, rng);
  ps.add("type.table", normal_tensor(Shape{2, cfg.d_type}, 1.0, rng));
  init_mlp2(ps, "type.mlp", cfg.d_type, d, 2 * d, rng, Init::kZero);
}

Var agent_encode(const Scope& s, const ModelConfig& cfg, Var x, const Tensor& valid) {
  const Tensor& X = x.value();
  if (X.rank() != 3 || X.dim(2) != kAgentFeatures) {
    throw DimensionError("agent_encode: expected [A, T, 12], got " + shape_string(X.shape()));
  }
  const std::size_t A = X.dim(0), T = X.dim(1), d = cfg.d;
  if (valid.shape() != Shape{A, T}) throw DimensionError("agent_encode: valid mask must be [A, T]");
  if (T == 0 || T > cfg.history_steps) throw DimensionError("agent_encode: history length out of range");
  Graph& g = s.graph();

  Tensor mask(X.shape());
  std::vector<std::uint8_t> key_valid(A * T);
  Tensor pool_w(Shape{A, T});
  std::vector<double> row_valid(A, 0.0);
  for (std::size_t a = 0; a < A; ++a) {
    double count = 0.0;
    for (std::size_t t = 0; t < T; ++t) count += valid[a * T + t] != 0.0 ? 1.0 : 0.0;
    row_valid[a] = count > 0.0 ? 1.0 : 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      const bool v = valid[a * T + t] != 0.0;
      key_valid[a * T + t] = v ? 1 : 0;
      pool_w[a * T + t] = v ? 1.0 / count : 0.0;
      for (std::size_t f = 0; f < kAgentFeatures; ++f) {
        mask[(a * T + t) * kAgentFeatures + f] = v ? 1.0 / kFeatureScale[f] : 0.0;
      }
    }
  }
  Var xm = ops::mul_const(x, mask);

  std::vector<std::size_t> pos_rows(A * T);
  for (std::size_t i = 0; i < A * T; ++i) pos_rows[i] = i % T;
  Var h0 = ops::add(dense(s, "enc.in", ops::reshape(xm, Shape{A * T, kAgentFeatures})),
                    ops::gather_rows(s.p("enc.pos"), pos_rows));
  Var h = h0;
  for (std::size_t l = 0; l < cfg.transformer_layers; ++l) {
    h = transformer_layer(s, "enc.tf" + std::to_string(l), h, A, T, cfg.heads, key_valid);
  }
  Var pooled = ops::weighted_time_sum(ops::reshape(ops::add(h, h0), Shape{A, T, d}), pool_w);

  Var conv = ops::gelu(ops::conv1d(xm, s.p("enc.conv.kernel")));
  Var state = gru_forward(s, "enc.gru", conv, g.constant(Tensor(Shape{A, d})), valid);

  return ops::scale_rows(ops::concat({pooled, state}), row_valid);
}

Var encode_polylines(const Scope& s, const std::string& branch, Var polys) {
  const Tensor& P = polys.value();
  if (P.rank() != 2 || P.dim(1) != poly_width()) {
    throw DimensionError("encode_polylines: expected [n, " + std::to_string(poly_width()) + "], got " +
                         shape_string(P.shape()));
  }
  if (branch != "soft" && branch != "hard") throw ContractError("encode_polylines: unknown branch " + branch);
  Tensor scale(P.shape(), 1.0);
  for (std::size_t r = 0; r < P.dim(0); ++r) {
    for (std::size_t k = 0; k < kPolylinePoints; ++k) {
      scale[r * poly_width() + k * kMapFeatures] = 1.0 / kPositionScale;
      scale[r * poly_width() + k * kMapFeatures + 1] = 1.0 / kPositionScale;
    }
  }
  return mlp2(s, "map." + branch, ops::mul_const(polys, scale));
}

Var fuse_soft(Var q, Var f_soft, const std::vector<ops::Range>& ranges) {
  if (ranges.size() != q.value().rows()) throw DimensionError("fuse_soft: one range per agent required");
  std::vector<double> empty(ranges.size());
  bool any_empty = false, all_empty = true;
  for (std::size_t i = 0; i < ranges.size(); ++i) {
    empty[i] = ranges[i].first == ranges[i].second ? 1.0 : 0.0;
    any_empty = any_empty || empty[i] != 0.0;
    all_empty = all_empty && empty[i] != 0.0;
  }
  if (all_empty) return q;
  Var att = ops::segment_attention(q, f_soft, f_soft, ranges);
  return any_empty ? ops::add(att, ops::scale_rows(q, empty)) : att;
}

Var fuse_hard(Var e_soft, Var f_hard, const std::vector<ops::Range>& ranges) {
  if (ranges.size() != e_soft.value().rows()) throw DimensionError("fuse_hard: one range per agent required");
  bool all_empty = true;
  for (const auto& r : ranges) all_empty = all_empty && r.first == r.second;
  if (all_empty) return e_soft;
  return ops::add(e_soft, ops::segment_attention(e_soft, f_hard, f_hard, ranges));
}

Var type_modulate(const Scope& s, const ModelConfig& cfg, Var e_map, const std::vector<AgentType>& types) {
  if (types.size() != e_map.value().rows()) throw DimensionError("type_modulate: one type per agent required");
  std::vector<std::size_t> idx(types.size());
  for (std::size_t i = 0; i < types.size(); ++i) {
    const int t = static_cast<int>(types[i]);
    if (t < 0 || t > 1) throw ContractError("type_modulate: unknown agent type code " + std::to_string(t));
    idx[i] = static_cast<std::size_t>(t);
  }
  Var gb = mlp2(s, "type.mlp", ops::gather_rows(s.p("type.table"), idx));
  Var gamma = ops::slice_cols(gb, 0, cfg.d);
  Var beta = ops::slice_cols(gb, cfg.d, cfg.d);
  return ops::add(ops::add(e_map, ops::mul(e_map, gamma)), beta);
}

Var build_context(Var f_c, Var e_a, const std::vector<double>& agent_valid) {
  return ops::scale_rows(ops::concat({f_c, e_a}), agent_valid);
}

Encoding encode(const Scope& s, const ModelConfig& cfg, const Batch& batch) {
  Graph& g = s.graph();
  Encoding enc;
  enc.e_a = agent_encode(s, cfg, g.constant(batch.features), batch.history_valid);
  enc.query = dense(s, "fuse.proj", enc.e_a);
  if (cfg.use_map) {
    Var f_soft = batch.soft.dim(0) ? encode_polylines(s, "soft", g.constant(batch.soft)) : Var();
    Var f_hard = batch.hard.dim(0) ? encode_polylines(s, "hard", g.constant(batch.hard)) : Var();
    enc.e_soft = f_soft.valid() ? fuse_soft(enc.query, f_soft, batch.soft_ranges) : enc.query;
    enc.e_map = f_hard.valid() ? fuse_hard(enc.e_soft, f_hard, batch.hard_ranges) : enc.e_soft;
  } else {
    enc.e_soft = enc.query;
    enc.e_map = enc.query;
  }
  enc.f_c = cfg.use_type ? type_modulate(s, cfg, enc.e_map, batch.types) : enc.e_map;
  enc.context = build_context(enc.f_c, enc.e_a, batch.agent_valid);
  return enc;
}

}  // namespace parkdiff
