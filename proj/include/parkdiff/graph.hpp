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

#include <deque>
#include <functional>
#include <initializer_list>
#include <map>
#include <set>
#include <string>

#include "parkdiff/params.hpp"
#include "parkdiff/tensor.hpp"

namespace parkdiff {

class Graph;

// Handle to a node recorded on a Graph. Cheap to copy; valid as long as the
// owning Graph is alive.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t id() const { return id_; }
  Graph* graph() const { return g_; }
  bool requires_grad() const;
  bool valid() const { return g_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* g, std::size_t id) : g_(g), id_(id) {}

  Graph* g_ = nullptr;
  std::size_t id_ = 0;
};

// Called once during backward with the node's accumulated output gradient.
// Implementations add into the gradients of their inputs through
// Graph::accumulate / Graph::grad_buffer.
using BackwardFn = std::function<void(Graph&, const Tensor& out_grad)>;

// Reverse-mode tape. Nodes are appended in evaluation order, which is a
// topological order, so backward is a single reverse sweep.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  Var leaf(Tensor value, bool requires_grad = true);

  // Binds a named parameter as a leaf. Binding the same name twice returns
  // the same node, so each parameter collects exactly one gradient.
  Var param(const ParameterSet& params, const std::string& name);

  // Parameters whose names start with any of these prefixes are bound as
  // constants (no gradient is computed for them).
  void freeze_prefix(const std::string& prefix) { frozen_.insert(prefix); }
  bool is_frozen(const std::string& name) const;

  // Appends an op result. The node requires grad iff some input does; the
  // backward closure is dropped otherwise.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);
  Var record(Tensor value, const std::vector<Var>& inputs, BackwardFn backward);

  void backward(Var loss);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  // Gradient of a node after backward (zeros if nothing reached it).
  Tensor grad(Var v) const;

  // Lazily zero-initialized gradient buffer of node `id`.
  Tensor& grad_buffer(std::size_t id);
  void accumulate(std::size_t id, const Tensor& g);

  // Gradients of every bound, trainable parameter (zeros when unreachable).
  GradMap param_grads() const;

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    BackwardFn backward;
  };

  Var push(Tensor value, bool requires_grad, BackwardFn backward);

  std::deque<Node> nodes_;
  std::map<std::string, std::size_t> bound_;
  std::set<std::string> frozen_;
};

}  // namespace parkdiff
