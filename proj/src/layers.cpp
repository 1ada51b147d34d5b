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

#include "parkdiff/layers.hpp"

#include <cmath>

#include "parkdiff/error.hpp"

namespace parkdiff {

void init_dense(ParameterSet& ps, const std::string& name, std::size_t in, std::size_t out,
                std::mt19937_64& rng, Init init) {
  ps.add(name + ".W", init == Init::kZero ? Tensor(Shape{in, out}) : glorot_uniform(in, out, rng));
  ps.add(name + ".b", Tensor(Shape{out}));
}

void init_mlp2(ParameterSet& ps, const std::string& name, std::size_t in, std::size_t hidden,
               std::size_t out, std::mt19937_64& rng, Init last) {
  init_dense(ps, name + ".l1", in, hidden, rng);
  init_dense(ps, name + ".l2", hidden, out, rng, last);
}

void init_layer_norm(ParameterSet& ps, const std::string& name, std::size_t width) {
  ps.add(name + ".gain", Tensor(Shape{width}, 1.0));
  ps.add(name + ".bias", Tensor(Shape{width}));
}

void init_gru(ParameterSet& ps, const std::string& name, std::size_t in, std::size_t hidden,
              std::mt19937_64& rng) {
  for (const char* gate : {"z", "r", "h"}) {
    ps.add(name + ".W" + gate, glorot_uniform(in + hidden, hidden, rng));
    ps.add(name + ".b" + gate, Tensor(Shape{hidden}));
  }
}

void init_transformer_layer(ParameterSet& ps, const std::string& name, std::size_t width,
                            std::mt19937_64& rng) {
  for (const char* proj : {"q", "k", "v", "o"}) init_dense(ps, name + "." + proj, width, width, rng);
  init_layer_norm(ps, name + ".ln1", width);
  init_mlp2(ps, name + ".ff", width, 4 * width, width, rng);
  init_layer_norm(ps, name + ".ln2", width);
}

Var dense(const Scope& s, const std::string& name, Var x) {
  return ops::linear(x, s.p(name + ".W"), s.p(name + ".b"));
}

Var mlp2(const Scope& s, const std::string& name, Var x) {
  return dense(s, name + ".l2", ops::gelu(dense(s, name + ".l1", x)));
}

Var gru_forward(const Scope& s, const std::string& name, Var x_seq, Var h0,
                const Tensor& step_valid) {
  const bool batched = x_seq.value().rank() == 3;
  if (!batched && x_seq.value().rank() != 2) {
    throw DimensionError("gru_forward: expected [T,in] or [B,T,in], got " +
                         shape_string(x_seq.shape()));
  }
  Var x = batched ? x_seq : ops::reshape(x_seq, Shape{1, x_seq.value().dim(0), x_seq.value().dim(1)});
  const std::size_t B = x.value().dim(0), T = x.value().dim(1);
  if (T == 0) throw ContractError("gru_forward: empty sequence");
  Var h = h0.value().rank() == 1 ? ops::reshape(h0, Shape{1, h0.value().dim(0)}) : h0;
  if (h.value().dim(0) != B) throw DimensionError("gru_forward: h0 batch mismatch");
  if (!step_valid.empty() && step_valid.size() != B * T) {
    throw DimensionError("gru_forward: step mask must be [B,T]");
  }
  const Var Wz = s.p(name + ".Wz"), bz = s.p(name + ".bz");
  const Var Wr = s.p(name + ".Wr"), br = s.p(name + ".br");
  const Var Wh = s.p(name + ".Wh"), bh = s.p(name + ".bh");
  const std::size_t hidden = h.value().dim(1);
  for (std::size_t t = 0; t < T; ++t) {
    Var xt = ops::time_slice(x, t);
    Var xh = ops::concat({xt, h});
    Var z = ops::sigmoid(ops::linear(xh, Wz, bz));
    Var r = ops::sigmoid(ops::linear(xh, Wr, br));
    Var cand = ops::tanh(ops::linear(ops::concat({xt, ops::mul(r, h)}), Wh, bh));
    Var update = ops::mul(z, ops::sub(cand, h));
    if (!step_valid.empty()) {
      std::vector<double> m(B);
      bool all = true;
      for (std::size_t b = 0; b < B; ++b) {
        m[b] = step_valid[b * T + t] != 0.0 ? 1.0 : 0.0;
        all = all && m[b] == 1.0;
      }
      if (!all) update = ops::scale_rows(update, m);
    }
    h = ops::add(h, update);
  }
  return batched ? h : ops::reshape(h, Shape{hidden});
}

Var transformer_layer(const Scope& s, const std::string& name, Var x, std::size_t batches,
                      std::size_t steps, std::size_t heads,
                      const std::vector<std::uint8_t>& key_valid) {
  Var q = dense(s, name + ".q", x);
  Var k = dense(s, name + ".k", x);
  Var v = dense(s, name + ".v", x);
  Var att = ops::multihead_self_attention(q, k, v, batches, steps, heads, key_valid);
  Var x1 = ops::layer_norm(ops::add(x, dense(s, name + ".o", att)), s.p(name + ".ln1.gain"),
                           s.p(name + ".ln1.bias"));
  Var ff = mlp2(s, name + ".ff", x1);
  return ops::layer_norm(ops::add(x1, ff), s.p(name + ".ln2.gain"), s.p(name + ".ln2.bias"));
}

Tensor sinusoidal_embedding(std::size_t step, std::size_t dim) {
  if (dim % 2 != 0) throw ConfigError("sinusoidal_embedding: dim must be even");
  Tensor e(Shape{dim});
  const std::size_t half = dim / 2;
  for (std::size_t i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) / static_cast<double>(half));
    const double a = static_cast<double>(step) * freq;
    e[i] = std::sin(a);
    e[half + i] = std::cos(a);
  }
  return e;
}

}  // namespace parkdiff
