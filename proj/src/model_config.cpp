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

#include "parkdiff/model_config.hpp"

#include "parkdiff/error.hpp"

namespace parkdiff {

void ModelConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("model." + what);
  };
  require(d >= 4 && d % 2 == 0, "d must be an even number >= 4");
  require(heads >= 1 && d % heads == 0, "heads must divide d");
  require(transformer_layers >= 1, "transformer_layers must be >= 1");
  require(d_type >= 1, "d_type must be >= 1");
  require(K >= 1, "K must be >= 1");
  require(history_steps >= 2, "history_steps must be >= 2");
  require(future_steps >= 1, "future_steps must be >= 1");
  require(dt > 0.0, "dt must be positive");
  require(diffusion_steps >= 1, "diffusion_steps must be >= 1");
  require(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0,
          "beta range must satisfy 0 < beta_start <= beta_end < 1");
  require(tau >= 1 && tau <= diffusion_steps, "tau must be in [1, diffusion_steps]");
  require(step_embedding >= 2 && step_embedding % 2 == 0, "step_embedding must be even");
  require(v_ped_max > 0.0, "v_ped_max must be positive");
  require(ped_hidden >= 1, "ped_hidden must be >= 1");
  require(initializer_input == "fc" || initializer_input == "context",
          "initializer_input must be \"fc\" or \"context\"");
}

}  // namespace parkdiff
