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

#include <random>
#include <string>

#include "parkdiff/ops.hpp"

namespace parkdiff {

// A Graph plus the parameter set its layers read from, with a name prefix.
// Layers are free functions of (Scope, name, inputs) so the same weights can
// be bound into any number of graphs.
class Scope {
 public:
  Scope(Graph& g, const ParameterSet& params, std::string prefix = "")
      : g_(&g), params_(&params), prefix_(std::move(prefix)) {}

  Var p(const std::string& name) const { return g_->param(*params_, prefix_ + name); }
  Scope sub(const std::string& name) const { return Scope(*g_, *params_, prefix_ + name + "."); }
  Graph& graph() const { return *g_; }
  const ParameterSet& params() const { return *params_; }
  const std::string& prefix() const { return prefix_; }

 private:
  Graph* g_;
  const ParameterSet* params_;
  std::string prefix_;
};

// ---- parameter initialization -------------------------------------------------

enum class Init { kGlorot, kZero };

void init_dense(ParameterSet& ps, const std::string& name, std::size_t in, std::size_t out,
                std::mt19937_64& rng, Init init = Init::kGlorot);
void init_mlp2(ParameterSet& ps, const std::string& name, std::size_t in, std::size_t hidden,
               std::size_t out, std::mt19937_64& rng, Init last = Init::kGlorot);
void init_layer_norm(ParameterSet& ps, const std::string& name, std::size_t width);
void init_gru(ParameterSet& ps, const std::string& name, std::size_t in, std::size_t hidden,
              std::mt19937_64& rng);
void init_transformer_layer(ParameterSet& ps, const std::string& name, std::size_t width,
                            std::mt19937_64& rng);

// ---- layers ---------------------------------------------------------------------

Var dense(const Scope& s, const std::string& name, Var x);

// dense -> GELU -> dense
Var mlp2(const Scope& s, const std::string& name, Var x);

// GRU over x [T,in] (returns [h]) or [B,T,in] (returns [B,h]).
//   z  = sigmoid(Wz [x, h] + bz)
//   r  = sigmoid(Wr [x, h] + br)
//   h~ = tanh(Wh [x, r*h] + bh)
//   h' = (1 - z) * h + z * h~
// Steps where step_valid[b,t] == 0 leave h unchanged; pass an empty tensor
// to treat every step as valid.
Var gru_forward(const Scope& s, const std::string& name, Var x_seq, Var h0,
                const Tensor& step_valid = Tensor());

// Post-norm transformer encoder layer with multi-head self-attention and a
// GELU feed-forward block of 4x width. x is [batches*steps, D].
Var transformer_layer(const Scope& s, const std::string& name, Var x, std::size_t batches,
                      std::size_t steps, std::size_t heads,
                      const std::vector<std::uint8_t>& key_valid);

// Sinusoidal embedding of an integer step, width `dim` (even).
Tensor sinusoidal_embedding(std::size_t step, std::size_t dim);

}  // namespace parkdiff
