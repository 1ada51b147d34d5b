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
#include <string>
#include <vector>

#include "parkdiff/layers.hpp"

namespace parkdiff {

struct GradCheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t entries_checked = 0;
  std::string worst_entry;  // "input 2 [17]" or "param enc.W [3]"
  bool passed = false;
};

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-6;
  // Relative error is |a - n| / max(|a|, |n|, floor); the floor keeps
  // entries whose true gradient is ~0 from reporting pure round-off.
  double floor = 1e-3;
  std::uint64_t seed = 1234;      // seeds the random output projection
  std::size_t max_entries = 0;    // per tensor; 0 checks every entry
};

// Compares analytic gradients of L = <r, op(inputs)> (r a fixed random
// projection) with central finite differences on every input entry.
using InputOp = std::function<Var(Graph&, const std::vector<Var>&)>;
GradCheckReport grad_check(const InputOp& op, const std::vector<Tensor>& inputs,
                           const GradCheckOptions& opts = {});

// Same, perturbing named parameters of `params` instead of explicit inputs.
using ParamOp = std::function<Var(const Scope&)>;
GradCheckReport grad_check_params(const ParamOp& op, ParameterSet params,
                                  const std::vector<std::string>& names,
                                  const GradCheckOptions& opts = {});

}  // namespace parkdiff
