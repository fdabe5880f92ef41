// Copyright 2026 The SketchComm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sketchcomm/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

namespace sketchcomm {

namespace {
thread_local bool grad_enabled = true;
}  // namespace

int64_t NumElements(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

std::string ShapeToString(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ", ";
    out << shape[i];
  }
  out << ']';
  return out.str();
}

std::span<float> TensorImpl::grad_buffer() {
  if (grad.empty()) grad.assign(data.size(), 0.0f);
  return grad;
}

Tensor Tensor::Zeros(Shape shape, bool requires_grad) {
  return Full(std::move(shape), 0.0f, requires_grad);
}

Tensor Tensor::Full(Shape shape, float value, bool requires_grad) {
  for (int64_t d : shape) {
    if (d < 0) throw ShapeError("tensor: negative dimension in " + ShapeToString(shape));
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->data.assign(static_cast<size_t>(NumElements(shape)), value);
  impl->shape = std::move(shape);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::FromData(Shape shape, std::vector<float> data, bool requires_grad) {
  for (int64_t d : shape) {
    if (d < 0) throw ShapeError("tensor: negative dimension in " + ShapeToString(shape));
  }
  if (NumElements(shape) != static_cast<int64_t>(data.size())) {
    throw ShapeError("tensor: shape " + ShapeToString(shape) + " does not match " +
                     std::to_string(data.size()) + " values");
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::Scalar(float value, bool requires_grad) {
  return FromData({1}, {value}, requires_grad);
}

int64_t Tensor::dim(int axis) const {
  const int r = rank();
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= r) {
    throw ShapeError("dim: axis out of range for " + ShapeToString(shape()));
  }
  return impl_->shape[static_cast<size_t>(axis)];
}

float Tensor::item() const {
  if (numel() != 1) throw ShapeError("item: tensor of shape " + ShapeToString(shape()) + " is not a scalar");
  return impl_->data[0];
}

void Tensor::zero_grad() {
  if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0f);
}

Tensor Tensor::detach() const {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = impl_->shape;
  impl->data = impl_->data;
  return Tensor(std::move(impl));
}

Tensor Tensor::clone() const {
  Tensor copy = detach();
  copy.set_requires_grad(requires_grad());
  return copy;
}

std::vector<TensorImpl*> TopologicalOrder(const Tensor& root) {
  std::vector<TensorImpl*> order;
  std::unordered_set<TensorImpl*> visited;
  // Iterative post-order DFS; deep graphs would overflow a recursive walk.
  std::vector<std::pair<TensorImpl*, size_t>> stack;
  stack.emplace_back(root.impl().get(), 0);
  visited.insert(root.impl().get());
  while (!stack.empty()) {
    auto& [impl, next] = stack.back();
    const size_t fan_in = impl->node ? impl->node->inputs.size() : 0;
    if (next < fan_in) {
      TensorImpl* child = impl->node->inputs[next++].get();
      if (visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(impl);
      stack.pop_back();
    }
  }
  return order;
}

void Tensor::backward() const {
  if (numel() != 1) {
    throw ShapeError("backward: loss must be scalar, got shape " + ShapeToString(shape()));
  }
  if (!requires_grad()) return;
  const std::vector<TensorImpl*> order = TopologicalOrder(*this);
  impl_->grad_buffer()[0] += 1.0f;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorImpl* t = *it;
    if (t->node && !t->grad.empty()) t->node->backward(*t);
  }
  // Interior gradients are scratch space; only leaves keep theirs.
  for (TensorImpl* t : order) {
    if (t->node) std::vector<float>().swap(t->grad);
  }
}

bool GradEnabled() { return grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(grad_enabled) { grad_enabled = false; }
NoGradGuard::~NoGradGuard() { grad_enabled = previous_; }

Tensor MakeResult(std::string op, Shape shape, std::vector<float> data,
                  std::vector<Tensor> inputs,
                  std::function<void(TensorImpl& out)> backward) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  if (grad_enabled) {
    bool any = false;
    for (const Tensor& in : inputs) any = any || in.requires_grad();
    if (any) {
      impl->requires_grad = true;
      auto node = std::make_shared<Node>();
      node->op = std::move(op);
      node->inputs.reserve(inputs.size());
      for (const Tensor& in : inputs) node->inputs.push_back(in.impl());
      node->backward = std::move(backward);
      impl->node = std::move(node);
    }
  }
  return Tensor(std::move(impl));
}

}  // namespace sketchcomm
