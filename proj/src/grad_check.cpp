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

#include "parkdiff/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace parkdiff {
namespace {

Var project(Var y, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Tensor r = normal_tensor(y.shape(), 1.0, rng);
  return ops::sum(ops::mul_const(y, r));
}

std::vector<std::size_t> entries_to_check(std::size_t n, std::size_t max_entries,
                                          std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  if (max_entries == 0 || max_entries >= n) return idx;
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(max_entries);
  std::sort(idx.begin(), idx.end());
  return idx;
}

void record(GradCheckReport& rep, double analytic, double numeric, const GradCheckOptions& opts,
            const std::string& label) {
  const double abs_err = std::abs(analytic - numeric);
  const double rel = abs_err / std::max({std::abs(analytic), std::abs(numeric), opts.floor});
  rep.max_abs_error = std::max(rep.max_abs_error, abs_err);
  if (rel > rep.max_rel_error || rep.entries_checked == 0) {
    rep.max_rel_error = rel;
    rep.worst_entry = label;
  }
  ++rep.entries_checked;
}

}  // namespace

GradCheckReport grad_check(const InputOp& op, const std::vector<Tensor>& inputs,
                           const GradCheckOptions& opts) {
  auto eval = [&](const std::vector<Tensor>& xs, std::vector<Tensor>* grads) {
    Graph g;
    std::vector<Var> vars;
    for (const Tensor& x : xs) vars.push_back(g.leaf(x, true));
    Var loss = project(op(g, vars), opts.seed);
    if (grads) {
      g.backward(loss);
      for (const Var& v : vars) grads->push_back(g.grad(v));
    }
    return loss.value().item();
  };

  std::vector<Tensor> analytic;
  eval(inputs, &analytic);

  GradCheckReport rep;
  std::mt19937_64 pick(opts.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<Tensor> xs = inputs;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (std::size_t e : entries_to_check(xs[i].size(), opts.max_entries, pick)) {
      const double orig = xs[i][e];
      xs[i][e] = orig + opts.step;
      const double up = eval(xs, nullptr);
      xs[i][e] = orig - opts.step;
      const double down = eval(xs, nullptr);
      xs[i][e] = orig;
      const double numeric = (up - down) / (2.0 * opts.step);
      record(rep, analytic[i][e], numeric, opts,
             "input " + std::to_string(i) + " [" + std::to_string(e) + "]");
    }
  }
  rep.passed = rep.max_rel_error < opts.tolerance;
  return rep;
}

GradCheckReport grad_check_params(const ParamOp& op, ParameterSet params,
                                  const std::vector<std::string>& names,
                                  const GradCheckOptions& opts) {
  auto eval = [&](GradMap* grads) {
    Graph g;
    Scope s(g, params);
    Var loss = project(op(s), opts.seed);
    if (grads) {
      g.backward(loss);
      *grads = g.param_grads();
    }
    return loss.value().item();
  };

  GradMap analytic;
  eval(&analytic);

  GradCheckReport rep;
  std::mt19937_64 pick(opts.seed ^ 0x9e3779b97f4a7c15ULL);
  for (const std::string& name : names) {
    Tensor& p = params.get_mut(name);
    auto it = analytic.find(name);
    const Tensor zero(p.shape());
    const Tensor& a = it == analytic.end() ? zero : it->second;
    for (std::size_t e : entries_to_check(p.size(), opts.max_entries, pick)) {
      const double orig = p[e];
      p[e] = orig + opts.step;
      const double up = eval(nullptr);
      p[e] = orig - opts.step;
      const double down = eval(nullptr);
      p[e] = orig;
      record(rep, a[e], (up - down) / (2.0 * opts.step), opts,
             "param " + name + " [" + std::to_string(e) + "]");
    }
  }
  rep.passed = rep.max_rel_error < opts.tolerance;
  return rep;
}

}  // namespace parkdiff
