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

#include "parkdiff/graph.hpp"

#include <cmath>

#include "parkdiff/error.hpp"

namespace parkdiff {

// ---- ParameterSet -----------------------------------------------------------

void ParameterSet::add(const std::string& name, Tensor value) {
  if (!params_.emplace(name, std::move(value)).second) {
    throw ContractError("duplicate parameter name: " + name);
  }
}

const Tensor& ParameterSet::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ContractError("unknown parameter: " + name);
  return it->second;
}

Tensor& ParameterSet::get_mut(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ContractError("unknown parameter: " + name);
  return it->second;
}

std::vector<std::string> ParameterSet::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& [name, _] : params_) out.push_back(name);
  return out;
}

std::size_t ParameterSet::total_elements() const {
  std::size_t n = 0;
  for (const auto& [_, t] : params_) n += t.size();
  return n;
}

Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Tensor t(Shape{fan_in, fan_out});
  for (double& v : t.values()) v = dist(rng);
  return t;
}

Tensor normal_tensor(Shape shape, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = dist(rng);
  return t;
}

// ---- Var / Graph --------------------------------------------------------------

const Tensor& Var::value() const {
  if (!g_) throw ContractError("use of an unbound Var");
  return g_->value(id_);
}

bool Var::requires_grad() const { return g_ && g_->requires_grad(id_); }

Var Graph::push(Tensor value, bool requires_grad, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Graph::constant(Tensor value) { return push(std::move(value), false, nullptr); }

Var Graph::leaf(Tensor value, bool requires_grad) {
  return push(std::move(value), requires_grad, nullptr);
}

bool Graph::is_frozen(const std::string& name) const {
  for (const auto& prefix : frozen_) {
    if (name.compare(0, prefix.size(), prefix) == 0) return true;
  }
  return false;
}

Var Graph::param(const ParameterSet& params, const std::string& name) {
  auto it = bound_.find(name);
  if (it != bound_.end()) return Var(this, it->second);
  Var v = push(params.get(name), !is_frozen(name), nullptr);
  bound_.emplace(name, v.id());
  return v;
}

Var Graph::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
  return record(std::move(value), std::vector<Var>(inputs), std::move(backward));
}

Var Graph::record(Tensor value, const std::vector<Var>& inputs, BackwardFn backward) {
  if (!value.all_finite()) {
    throw NumericError("non-finite value produced by op with output shape " +
                       shape_string(value.shape()));
  }
  bool rg = false;
  for (const Var& in : inputs) {
    if (in.graph() != this) throw ContractError("op mixes Vars from different graphs");
    rg = rg || nodes_[in.id()].requires_grad;
  }
  return push(std::move(value), rg, std::move(backward));
}

Tensor& Graph::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad = Tensor(n.value.shape(), 0.0);
    n.has_grad = true;
  }
  return n.grad;
}

void Graph::accumulate(std::size_t id, const Tensor& g) {
  if (!nodes_[id].requires_grad) return;
  Tensor& buf = grad_buffer(id);
  if (buf.size() != g.size()) {
    throw DimensionError("gradient shape " + shape_string(g.shape()) +
                         " does not match value shape " + shape_string(buf.shape()));
  }
  double* d = buf.data();
  const double* s = g.data();
  for (std::size_t i = 0; i < buf.size(); ++i) d[i] += s[i];
}

void Graph::backward(Var loss) {
  if (loss.graph() != this) throw ContractError("loss belongs to another graph");
  if (loss.value().size() != 1) {
    throw ContractError("backward requires a scalar loss, got shape " +
                        shape_string(loss.shape()));
  }
  for (Node& n : nodes_) {
    n.has_grad = false;
    n.grad = Tensor();
  }
  if (!nodes_[loss.id()].requires_grad) return;
  grad_buffer(loss.id())[0] = 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad || !n.backward) continue;
    n.backward(*this, n.grad);
  }
}

Tensor Graph::grad(Var v) const {
  const Node& n = nodes_[v.id()];
  if (!n.has_grad) return Tensor(n.value.shape(), 0.0);
  return n.grad;
}

GradMap Graph::param_grads() const {
  GradMap out;
  for (const auto& [name, id] : bound_) {
    if (!nodes_[id].requires_grad) continue;
    out.emplace(name, grad(Var(const_cast<Graph*>(this), id)));
  }
  return out;
}

}  // namespace parkdiff
