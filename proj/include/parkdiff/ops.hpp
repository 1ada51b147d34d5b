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
#include <utility>
#include <vector>

#include "parkdiff/graph.hpp"

// Differentiable operations on Graph nodes. Every op validates shapes up
// front (DimensionError) and records a backward closure that accumulates
// gradients into its inputs. Tensors of rank > 2 are treated as
// [rows, last-dim] wherever an op works row-wise.
namespace parkdiff::ops {

using Range = std::pair<std::size_t, std::size_t>;  // half-open [first, second)

// ---- dense algebra ------------------------------------------------------------

Var matmul(Var a, Var b);                  // [m,k] x [k,n] -> [m,n]
Var linear(Var x, Var weight, Var bias);   // [...,in] x [in,out] + [out] -> [...,out]
Var linear(Var x, Var weight);

// ---- elementwise ----------------------------------------------------------------

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var square(Var a);
Var scale(Var a, double c);
Var add_scalar(Var a, double c);
Var mul_const(Var a, const Tensor& c);   // c has a's shape, no gradient
Var add_const(Var a, const Tensor& c);
Var scale_rows(Var a, const std::vector<double>& row_scale);

Var tanh(Var a);
Var sigmoid(Var a);
Var gelu(Var a);  // exact erf form

// ---- reductions / normalization -----------------------------------------------

Var sum(Var a);
Var mean(Var a);
Var softmax(Var x, int axis = -1);  // subtract-max stabilized
Var log_softmax(Var x);             // last axis
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);

// ---- structural -------------------------------------------------------------------

Var reshape(Var a, Shape shape);
Var concat(const std::vector<Var>& parts);  // along the last axis
Var concat_rows(const std::vector<Var>& parts);  // [n_i, C] stacked -> [sum n_i, C]
Var slice_cols(Var a, std::size_t start, std::size_t len);
Var gather_rows(Var a, const std::vector<std::size_t>& rows);
Var time_slice(Var x, std::size_t t);                 // [B,T,C] -> [B,C]
Var weighted_time_sum(Var x, const Tensor& weights);  // [B,T,C], w [B,T] -> [B,C]

// ---- sequence / attention -------------------------------------------------------

// Same-length 1-D convolution with zero padding. x is [T,c_in] or
// [B,T,c_in]; kernel is [k,c_in,c_out] with k odd.
Var conv1d(Var x, Var kernel);

// softmax(Q K^T / sqrt(d)) V over all keys. Throws ContractError on n = 0.
Var scaled_dot_attention(Var q, Var k, Var v);

// Row i of q attends to key rows ranges[i]. Rows with an empty range get a
// zero output row.
Var segment_attention(Var q, Var k, Var v, const std::vector<Range>& ranges);

// Forward-only attention weights for segment_attention, one vector per row.
std::vector<std::vector<double>> segment_attention_weights(
    const Tensor& q, const Tensor& k, const std::vector<Range>& ranges);

// Multi-head self-attention over `batches` sequences of length `steps`
// packed as [batches*steps, D]. Keys with key_valid == 0 are excluded.
Var multihead_self_attention(Var q, Var k, Var v, std::size_t batches, std::size_t steps,
                             std::size_t heads, const std::vector<std::uint8_t>& key_valid);

// ---- kinematics helper --------------------------------------------------------------

// Radial projection of each row onto the ball of radius max_norm.
Var clamp_norm_rows(Var u, double max_norm);

}  // namespace parkdiff::ops
