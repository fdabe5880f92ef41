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

// Differentiable tensor operations. Every function records itself on the
// graph when recording is enabled and an input requires a gradient.

#ifndef SKETCHCOMM_OPS_HPP_
#define SKETCHCOMM_OPS_HPP_

#include <vector>

#include "sketchcomm/tensor.hpp"

namespace sketchcomm::ops {

// Elementwise binary ops broadcast with numpy rules.
Tensor Add(const Tensor& a, const Tensor& b);
Tensor Sub(const Tensor& a, const Tensor& b);
Tensor Mul(const Tensor& a, const Tensor& b);

Tensor AddScalar(const Tensor& a, float s);
Tensor Scale(const Tensor& a, float s);

Tensor Relu(const Tensor& x);
Tensor Tanh(const Tensor& x);
Tensor Exp(const Tensor& x);
Tensor Square(const Tensor& x);

// [m,k] x [k,n] -> [m,n]
Tensor MatMul(const Tensor& a, const Tensor& b);
Tensor Transpose(const Tensor& a);  // rank 2 only

// input [N,C,H,W], weight [O,C,kh,kw], bias [O] or undefined.
Tensor Conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              int stride, int padding);
// Non-overlapping max pool with a square window; trailing rows/cols dropped.
Tensor MaxPool2d(const Tensor& input, int window);

Tensor Sum(const Tensor& x);  // all elements -> [1]
Tensor Sum(const Tensor& x, const std::vector<int>& axes, bool keepdim);
Tensor Mean(const Tensor& x);
Tensor Mean(const Tensor& x, const std::vector<int>& axes, bool keepdim);
// Product over one axis. Gradient uses leave-one-out products, so exact
// zeros among the factors are handled without division.
Tensor Prod(const Tensor& x, int axis);

// Divides each vector along axis 1 by sqrt(|v|^2 + eps).
inline constexpr float kChannelNormEps = 1e-10f;
Tensor NormalizeChannels(const Tensor& x);

Tensor BroadcastTo(const Tensor& x, const Shape& shape);
Tensor Reshape(const Tensor& x, const Shape& shape);
Tensor Concat(const std::vector<Tensor>& parts, int axis);
// Rows of x along axis 0, in the given order (repeats allowed).
Tensor IndexSelect(const Tensor& x, const std::vector<int>& rows);

// Broadcast result shape of two operands; throws ShapeError naming `op`.
Shape BroadcastShape(const Shape& a, const Shape& b, const char* op);

}  // namespace sketchcomm::ops

#endif  // SKETCHCOMM_OPS_HPP_
