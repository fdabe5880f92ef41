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

#include "sketchcomm/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace sketchcomm::ops {

namespace {

using MatR = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;

using ImplPtr = std::shared_ptr<TensorImpl>;

[[noreturn]] void Mismatch(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + ShapeToString(a) +
                   " and " + ShapeToString(b));
}

// For every flat index of `big`, the flat offset of the element of `small`
// it maps to under right-aligned broadcasting.
std::vector<int64_t> BroadcastIndex(const Shape& big, const Shape& small) {
  const size_t rank = big.size();
  std::vector<int64_t> strides(rank, 0);
  int64_t stride = 1;
  for (size_t k = 0; k < small.size(); ++k) {
    const size_t si = small.size() - 1 - k;
    const size_t bi = rank - 1 - k;
    strides[bi] = small[si] == 1 ? 0 : stride;
    stride *= small[si];
  }
  const int64_t total = NumElements(big);
  std::vector<int64_t> index(static_cast<size_t>(total));
  std::vector<int64_t> counter(rank, 0);
  int64_t offset = 0;
  for (int64_t i = 0; i < total; ++i) {
    index[static_cast<size_t>(i)] = offset;
    for (size_t d = rank; d-- > 0;) {
      ++counter[d];
      offset += strides[d];
      if (counter[d] < big[d]) break;
      offset -= strides[d] * counter[d];
      counter[d] = 0;
    }
  }
  return index;
}

int NormalizeAxis(int axis, int rank, const char* op) {
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) +
                     " out of range for rank " + std::to_string(rank));
  }
  return axis;
}

template <typename Forward, typename GradA, typename GradB>
Tensor Binary(const char* name, const Tensor& a, const Tensor& b, Forward f,
              GradA da, GradB db) {
  const Shape out_shape = BroadcastShape(a.shape(), b.shape(), name);
  const int64_t n = NumElements(out_shape);
  const bool same_a = a.shape() == out_shape;
  const bool same_b = b.shape() == out_shape;
  auto ia = same_a ? std::vector<int64_t>{} : BroadcastIndex(out_shape, a.shape());
  auto ib = same_b ? std::vector<int64_t>{} : BroadcastIndex(out_shape, b.shape());
  std::vector<float> out(static_cast<size_t>(n));
  const float* pa = a.data().data();
  const float* pb = b.data().data();
  for (int64_t i = 0; i < n; ++i) {
    const float va = pa[same_a ? i : ia[static_cast<size_t>(i)]];
    const float vb = pb[same_b ? i : ib[static_cast<size_t>(i)]];
    out[static_cast<size_t>(i)] = f(va, vb);
  }
  ImplPtr ai = a.impl(), bi = b.impl();
  return MakeResult(
      name, out_shape, std::move(out), {a, b},
      [ai, bi, ia = std::move(ia), ib = std::move(ib), same_a, same_b, da, db,
       n](TensorImpl& o) {
        const float* g = o.grad.data();
        const float* pa = ai->data.data();
        const float* pb = bi->data.data();
        float* ga = ai->requires_grad ? ai->grad_buffer().data() : nullptr;
        float* gb = bi->requires_grad ? bi->grad_buffer().data() : nullptr;
        for (int64_t i = 0; i < n; ++i) {
          const int64_t xa = same_a ? i : ia[static_cast<size_t>(i)];
          const int64_t xb = same_b ? i : ib[static_cast<size_t>(i)];
          if (ga) ga[xa] += da(g[i], pa[xa], pb[xb]);
          if (gb) gb[xb] += db(g[i], pa[xa], pb[xb]);
        }
      });
}

template <typename Forward, typename Backward>
Tensor Unary(const char* name, const Tensor& x, Forward f, Backward df) {
  std::vector<float> out(x.data().begin(), x.data().end());
  for (float& v : out) v = f(v);
  ImplPtr xi = x.impl();
  return MakeResult(name, x.shape(), std::move(out), {x}, [xi, df](TensorImpl& o) {
    if (!xi->requires_grad) return;
    float* gx = xi->grad_buffer().data();
    const size_t n = o.data.size();
    for (size_t i = 0; i < n; ++i) gx[i] += df(o.grad[i], xi->data[i], o.data[i]);
  });
}

}  // namespace

Shape BroadcastShape(const Shape& a, const Shape& b, const char* op) {
  const size_t rank = std::max(a.size(), b.size());
  Shape out(rank);
  for (size_t k = 0; k < rank; ++k) {
    const int64_t da = k < a.size() ? a[a.size() - 1 - k] : 1;
    const int64_t db = k < b.size() ? b[b.size() - 1 - k] : 1;
    if (da != db && da != 1 && db != 1) Mismatch(op, a, b);
    out[rank - 1 - k] = std::max(da, db);
  }
  return out;
}

Tensor Add(const Tensor& a, const Tensor& b) {
  return Binary(
      "add", a, b, [](float x, float y) { return x + y; },
      [](float g, float, float) { return g; }, [](float g, float, float) { return g; });
}

Tensor Sub(const Tensor& a, const Tensor& b) {
  return Binary(
      "sub", a, b, [](float x, float y) { return x - y; },
      [](float g, float, float) { return g; }, [](float g, float, float) { return -g; });
}

Tensor Mul(const Tensor& a, const Tensor& b) {
  return Binary(
      "mul", a, b, [](float x, float y) { return x * y; },
      [](float g, float, float y) { return g * y; },
      [](float g, float x, float) { return g * x; });
}

Tensor AddScalar(const Tensor& a, float s) {
  return Unary(
      "add_scalar", a, [s](float v) { return v + s; },
      [](float g, float, float) { return g; });
}

Tensor Scale(const Tensor& a, float s) {
  return Unary(
      "scale", a, [s](float v) { return v * s; },
      [s](float g, float, float) { return g * s; });
}

Tensor Relu(const Tensor& x) {
  return Unary(
      "relu", x, [](float v) { return v <= 0.0f ? 0.0f : v; },
      [](float g, float in, float) { return in > 0.0f ? g : 0.0f; });
}

Tensor Tanh(const Tensor& x) {
  return Unary(
      "tanh", x, [](float v) { return std::tanh(v); },
      [](float g, float, float y) { return g * (1.0f - y * y); });
}

Tensor Exp(const Tensor& x) {
  return Unary(
      "exp", x, [](float v) { return std::exp(v); },
      [](float g, float, float y) { return g * y; });
}

Tensor Square(const Tensor& x) {
  return Unary(
      "square", x, [](float v) { return v * v; },
      [](float g, float in, float) { return 2.0f * in * g; });
}

Tensor MatMul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    Mismatch("matmul", a.shape(), b.shape());
  }
  const int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<float> out(static_cast<size_t>(m * n));
  MapR(out.data(), m, n).noalias() = CMapR(a.data().data(), m, k) * CMapR(b.data().data(), k, n);
  ImplPtr ai = a.impl(), bi = b.impl();
  return MakeResult("matmul", {m, n}, std::move(out), {a, b},
                    [ai, bi, m, k, n](TensorImpl& o) {
                      CMapR g(o.grad.data(), m, n);
                      if (ai->requires_grad) {
                        MapR(ai->grad_buffer().data(), m, k).noalias() +=
                            g * CMapR(bi->data.data(), k, n).transpose();
                      }
                      if (bi->requires_grad) {
                        MapR(bi->grad_buffer().data(), k, n).noalias() +=
                            CMapR(ai->data.data(), m, k).transpose() * g;
                      }
                    });
}

Tensor Transpose(const Tensor& a) {
  if (a.rank() != 2) throw ShapeError("transpose: expected rank 2, got " + ShapeToString(a.shape()));
  const int64_t m = a.dim(0), n = a.dim(1);
  std::vector<float> out(static_cast<size_t>(m * n));
  MapR(out.data(), n, m) = CMapR(a.data().data(), m, n).transpose();
  ImplPtr ai = a.impl();
  return MakeResult("transpose", {n, m}, std::move(out), {a}, [ai, m, n](TensorImpl& o) {
    if (!ai->requires_grad) return;
    MapR(ai->grad_buffer().data(), m, n) += CMapR(o.grad.data(), n, m).transpose();
  });
}

namespace {

struct ConvGeometry {
  int64_t n, c, h, w, o, kh, kw, ho, wo;
  int stride, pad;
  int64_t rows() const { return c * kh * kw; }
  int64_t cols() const { return n * ho * wo; }
};

// Output columns [lo, hi) of row `oy` whose input column ox*stride-pad+j is
// inside the image.
void ValidRange(const ConvGeometry& g, int64_t j, int64_t& lo, int64_t& hi) {
  lo = 0;
  while (lo < g.wo && lo * g.stride - g.pad + j < 0) ++lo;
  hi = g.wo;
  while (hi > lo && (hi - 1) * g.stride - g.pad + j >= g.w) --hi;
}

void Im2Col(const ConvGeometry& g, const float* x, float* col) {
  const int64_t plane = g.ho * g.wo;
  for (int64_t c = 0; c < g.c; ++c) {
    for (int64_t i = 0; i < g.kh; ++i) {
      for (int64_t j = 0; j < g.kw; ++j) {
        int64_t lo, hi;
        ValidRange(g, j, lo, hi);
        float* row = col + ((c * g.kh + i) * g.kw + j) * g.cols();
        for (int64_t b = 0; b < g.n; ++b) {
          const float* src = x + (b * g.c + c) * g.h * g.w;
          float* dst = row + b * plane;
          for (int64_t oy = 0; oy < g.ho; ++oy) {
            float* d = dst + oy * g.wo;
            const int64_t y = oy * g.stride - g.pad + i;
            if (y < 0 || y >= g.h) {
              std::fill(d, d + g.wo, 0.0f);
              continue;
            }
            std::fill(d, d + lo, 0.0f);
            std::fill(d + hi, d + g.wo, 0.0f);
            const float* s = src + y * g.w - g.pad + j;
            if (g.stride == 1) {
              std::copy(s + lo, s + hi, d + lo);
            } else {
              for (int64_t ox = lo; ox < hi; ++ox) d[ox] = s[ox * g.stride];
            }
          }
        }
      }
    }
  }
}

void Col2Im(const ConvGeometry& g, const float* col, float* x) {
  const int64_t plane = g.ho * g.wo;
  for (int64_t c = 0; c < g.c; ++c) {
    for (int64_t i = 0; i < g.kh; ++i) {
      for (int64_t j = 0; j < g.kw; ++j) {
        int64_t lo, hi;
        ValidRange(g, j, lo, hi);
        const float* row = col + ((c * g.kh + i) * g.kw + j) * g.cols();
        for (int64_t b = 0; b < g.n; ++b) {
          float* dst = x + (b * g.c + c) * g.h * g.w;
          const float* src = row + b * plane;
          for (int64_t oy = 0; oy < g.ho; ++oy) {
            const int64_t y = oy * g.stride - g.pad + i;
            if (y < 0 || y >= g.h) continue;
            float* d = dst + y * g.w - g.pad + j;
            const float* s = src + oy * g.wo;
            for (int64_t ox = lo; ox < hi; ++ox) d[ox * g.stride] += s[ox];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor Conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride,
              int padding) {
  if (input.rank() != 4 || weight.rank() != 4 || input.dim(1) != weight.dim(1)) {
    Mismatch("conv2d", input.shape(), weight.shape());
  }
  if (stride < 1 || padding < 0) throw ShapeError("conv2d: invalid stride/padding");
  ConvGeometry g{};
  g.n = input.dim(0);
  g.c = input.dim(1);
  g.h = input.dim(2);
  g.w = input.dim(3);
  g.o = weight.dim(0);
  g.kh = weight.dim(2);
  g.kw = weight.dim(3);
  g.stride = stride;
  g.pad = padding;
  g.ho = (g.h + 2 * padding - g.kh) / stride + 1;
  g.wo = (g.w + 2 * padding - g.kw) / stride + 1;
  if (g.h + 2 * padding < g.kh || g.w + 2 * padding < g.kw || g.ho <= 0 || g.wo <= 0) {
    Mismatch("conv2d", input.shape(), weight.shape());
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != g.o)) {
    Mismatch("conv2d(bias)", weight.shape(), bias.shape());
  }
  const int64_t plane = g.ho * g.wo;
  std::vector<float> col(static_cast<size_t>(g.rows() * g.cols()));
  Im2Col(g, input.data().data(), col.data());
  MatR prod = CMapR(weight.data().data(), g.o, g.rows()) * CMapR(col.data(), g.rows(), g.cols());
  std::vector<float> out(static_cast<size_t>(g.n * g.o * plane));
  for (int64_t b = 0; b < g.n; ++b) {
    for (int64_t o = 0; o < g.o; ++o) {
      const float bo = bias.defined() ? bias.data()[static_cast<size_t>(o)] : 0.0f;
      const float* src = prod.data() + o * g.cols() + b * plane;
      float* dst = out.data() + (b * g.o + o) * plane;
      for (int64_t p = 0; p < plane; ++p) dst[p] = src[p] + bo;
    }
  }
  std::vector<Tensor> inputs{input, weight};
  if (bias.defined()) inputs.push_back(bias);
  ImplPtr xi = input.impl(), wi = weight.impl();
  ImplPtr bi = bias.defined() ? bias.impl() : nullptr;
  return MakeResult(
      "conv2d", {g.n, g.o, g.ho, g.wo}, std::move(out), std::move(inputs),
      [xi, wi, bi, g, plane](TensorImpl& o) {
        MatR gout(g.o, g.cols());
        for (int64_t b = 0; b < g.n; ++b) {
          for (int64_t oc = 0; oc < g.o; ++oc) {
            const float* src = o.grad.data() + (b * g.o + oc) * plane;
            std::copy(src, src + plane, gout.data() + oc * g.cols() + b * plane);
          }
        }
        if (bi && bi->requires_grad) {
          float* gb = bi->grad_buffer().data();
          for (int64_t oc = 0; oc < g.o; ++oc) gb[oc] += gout.row(oc).sum();
        }
        if (wi->requires_grad) {
          std::vector<float> col(static_cast<size_t>(g.rows() * g.cols()));
          Im2Col(g, xi->data.data(), col.data());
          MapR(wi->grad_buffer().data(), g.o, g.rows()).noalias() +=
              gout * CMapR(col.data(), g.rows(), g.cols()).transpose();
        }
        if (xi->requires_grad) {
          MatR gcol = CMapR(wi->data.data(), g.o, g.rows()).transpose() * gout;
          Col2Im(g, gcol.data(), xi->grad_buffer().data());
        }
      });
}

Tensor MaxPool2d(const Tensor& input, int window) {
  if (input.rank() != 4 || window < 1 || input.dim(2) < window || input.dim(3) < window) {
    throw ShapeError("max_pool2d: cannot pool " + ShapeToString(input.shape()) +
                     " with window " + std::to_string(window));
  }
  const int64_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const int64_t ho = h / window, wo = w / window;
  std::vector<float> out(static_cast<size_t>(n * c * ho * wo));
  std::vector<int64_t> argmax(out.size());
  const float* x = input.data().data();
  for (int64_t plane = 0; plane < n * c; ++plane) {
    const float* src = x + plane * h * w;
    for (int64_t oy = 0; oy < ho; ++oy) {
      for (int64_t ox = 0; ox < wo; ++ox) {
        float best = -std::numeric_limits<float>::infinity();
        int64_t best_at = 0;
        for (int64_t i = 0; i < window; ++i) {
          for (int64_t j = 0; j < window; ++j) {
            const int64_t at = (oy * window + i) * w + ox * window + j;
            if (src[at] > best) {
              best = src[at];
              best_at = at;
            }
          }
        }
        const size_t k = static_cast<size_t>((plane * ho + oy) * wo + ox);
        out[k] = best;
        argmax[k] = plane * h * w + best_at;
      }
    }
  }
  ImplPtr xi = input.impl();
  return MakeResult("max_pool2d", {n, c, ho, wo}, std::move(out), {input},
                    [xi, argmax = std::move(argmax)](TensorImpl& o) {
                      if (!xi->requires_grad) return;
                      float* gx = xi->grad_buffer().data();
                      for (size_t k = 0; k < argmax.size(); ++k) gx[argmax[k]] += o.grad[k];
                    });
}

Tensor Sum(const Tensor& x) {
  float total = 0.0f;
  for (float v : x.data()) total += v;
  ImplPtr xi = x.impl();
  return MakeResult("sum", {1}, {total}, {x}, [xi](TensorImpl& o) {
    if (!xi->requires_grad) return;
    const float g = o.grad[0];
    for (float& v : xi->grad_buffer()) v += g;
  });
}

Tensor Sum(const Tensor& x, const std::vector<int>& axes, bool keepdim) {
  Shape keep = x.shape();
  std::vector<bool> reduced(keep.size(), false);
  for (int a : axes) {
    const int axis = NormalizeAxis(a, x.rank(), "sum");
    reduced[static_cast<size_t>(axis)] = true;
    keep[static_cast<size_t>(axis)] = 1;
  }
  Shape out_shape;
  for (size_t d = 0; d < keep.size(); ++d) {
    if (keepdim || !reduced[d]) out_shape.push_back(keep[d]);
  }
  if (out_shape.empty()) out_shape.push_back(1);
  auto index = BroadcastIndex(x.shape(), keep);
  std::vector<float> out(static_cast<size_t>(NumElements(keep)), 0.0f);
  const float* px = x.data().data();
  for (size_t i = 0; i < index.size(); ++i) out[static_cast<size_t>(index[i])] += px[i];
  ImplPtr xi = x.impl();
  return MakeResult("sum_axes", out_shape, std::move(out), {x},
                    [xi, index = std::move(index)](TensorImpl& o) {
                      if (!xi->requires_grad) return;
                      float* gx = xi->grad_buffer().data();
                      for (size_t i = 0; i < index.size(); ++i) gx[i] += o.grad[static_cast<size_t>(index[i])];
                    });
}

Tensor Mean(const Tensor& x) { return Scale(Sum(x), 1.0f / static_cast<float>(x.numel())); }

Tensor Mean(const Tensor& x, const std::vector<int>& axes, bool keepdim) {
  int64_t count = 1;
  for (int a : axes) count *= x.dim(NormalizeAxis(a, x.rank(), "mean"));
  return Scale(Sum(x, axes, keepdim), 1.0f / static_cast<float>(count));
}

Tensor Prod(const Tensor& x, int axis) {
  axis = NormalizeAxis(axis, x.rank(), "prod");
  int64_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= x.dim(d);
  for (int d = axis + 1; d < x.rank(); ++d) inner *= x.dim(d);
  const int64_t len = x.dim(axis);
  Shape out_shape;
  for (int d = 0; d < x.rank(); ++d) {
    if (d != axis) out_shape.push_back(x.dim(d));
  }
  if (out_shape.empty()) out_shape.push_back(1);
  std::vector<float> out(static_cast<size_t>(outer * inner), 1.0f);
  const float* px = x.data().data();
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t k = 0; k < len; ++k) {
      const float* row = px + (o * len + k) * inner;
      float* dst = out.data() + o * inner;
      for (int64_t i = 0; i < inner; ++i) dst[i] *= row[i];
    }
  }
  ImplPtr xi = x.impl();
  return MakeResult("prod", out_shape, std::move(out), {x},
                    [xi, outer, inner, len](TensorImpl& o) {
                      if (!xi->requires_grad) return;
                      float* gx = xi->grad_buffer().data();
                      const float* px = xi->data.data();
                      // prefix[k] holds the product of factors before k.
                      std::vector<float> prefix(static_cast<size_t>(len * inner));
                      std::vector<float> suffix(static_cast<size_t>(inner));
                      for (int64_t b = 0; b < outer; ++b) {
                        const float* base = px + b * len * inner;
                        std::fill(prefix.begin(), prefix.begin() + inner, 1.0f);
                        for (int64_t k = 1; k < len; ++k) {
                          for (int64_t i = 0; i < inner; ++i) {
                            prefix[static_cast<size_t>(k * inner + i)] =
                                prefix[static_cast<size_t>((k - 1) * inner + i)] * base[(k - 1) * inner + i];
                          }
                        }
                        std::fill(suffix.begin(), suffix.end(), 1.0f);
                        const float* g = o.grad.data() + b * inner;
                        for (int64_t k = len; k-- > 0;) {
                          for (int64_t i = 0; i < inner; ++i) {
                            gx[(b * len + k) * inner + i] +=
                                g[i] * prefix[static_cast<size_t>(k * inner + i)] * suffix[static_cast<size_t>(i)];
                            suffix[static_cast<size_t>(i)] *= base[k * inner + i];
                          }
                        }
                      }
                    });
}

Tensor NormalizeChannels(const Tensor& x) {
  if (x.rank() < 2) throw ShapeError("normalize_channels: need rank >= 2, got " + ShapeToString(x.shape()));
  const int64_t outer = x.dim(0), c = x.dim(1);
  const int64_t inner = x.numel() / (outer * c);
  std::vector<float> out(x.data().begin(), x.data().end());
  for (int64_t b = 0; b < outer; ++b) {
    for (int64_t i = 0; i < inner; ++i) {
      float sq = 0.0f;
      for (int64_t k = 0; k < c; ++k) {
        const float v = out[static_cast<size_t>((b * c + k) * inner + i)];
        sq += v * v;
      }
      const float inv = 1.0f / std::sqrt(sq + kChannelNormEps);
      for (int64_t k = 0; k < c; ++k) out[static_cast<size_t>((b * c + k) * inner + i)] *= inv;
    }
  }
  ImplPtr xi = x.impl();
  return MakeResult("normalize_channels", x.shape(), std::move(out), {x},
                    [xi, outer, c, inner](TensorImpl& o) {
                      if (!xi->requires_grad) return;
                      float* gx = xi->grad_buffer().data();
                      // d(v/r) = (g r^2 - v (v.g)) / r^3, accumulated in double.
                      for (int64_t b = 0; b < outer; ++b) {
                        for (int64_t i = 0; i < inner; ++i) {
                          double sq = 0.0, dot = 0.0;
                          for (int64_t k = 0; k < c; ++k) {
                            const size_t at = static_cast<size_t>((b * c + k) * inner + i);
                            const double v = xi->data[at];
                            sq += v * v;
                            dot += v * o.grad[at];
                          }
                          const double r2 = sq + static_cast<double>(kChannelNormEps);
                          const double inv3 = 1.0 / (r2 * std::sqrt(r2));
                          for (int64_t k = 0; k < c; ++k) {
                            const size_t at = static_cast<size_t>((b * c + k) * inner + i);
                            gx[at] += static_cast<float>((o.grad[at] * r2 - xi->data[at] * dot) * inv3);
                          }
                        }
                      }
                    });
}

Tensor BroadcastTo(const Tensor& x, const Shape& shape) {
  if (BroadcastShape(x.shape(), shape, "broadcast_to") != shape) {
    Mismatch("broadcast_to", x.shape(), shape);
  }
  auto index = BroadcastIndex(shape, x.shape());
  std::vector<float> out(index.size());
  const float* px = x.data().data();
  for (size_t i = 0; i < index.size(); ++i) out[i] = px[index[i]];
  ImplPtr xi = x.impl();
  return MakeResult("broadcast_to", shape, std::move(out), {x},
                    [xi, index = std::move(index)](TensorImpl& o) {
                      if (!xi->requires_grad) return;
                      float* gx = xi->grad_buffer().data();
                      for (size_t i = 0; i < index.size(); ++i) gx[index[i]] += o.grad[i];
                    });
}

Tensor Reshape(const Tensor& x, const Shape& shape) {
  if (NumElements(shape) != x.numel()) Mismatch("reshape", x.shape(), shape);
  for (int64_t d : shape) {
    if (d < 0) Mismatch("reshape", x.shape(), shape);
  }
  std::vector<float> out(x.data().begin(), x.data().end());
  ImplPtr xi = x.impl();
  return MakeResult("reshape", shape, std::move(out), {x}, [xi](TensorImpl& o) {
    if (!xi->requires_grad) return;
    float* gx = xi->grad_buffer().data();
    for (size_t i = 0; i < o.grad.size(); ++i) gx[i] += o.grad[i];
  });
}

Tensor Concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const int rank = parts[0].rank();
  axis = NormalizeAxis(axis, rank, "concat");
  Shape out_shape = parts[0].shape();
  out_shape[static_cast<size_t>(axis)] = 0;
  for (const Tensor& p : parts) {
    Shape probe = p.shape();
    if (p.rank() != rank) Mismatch("concat", parts[0].shape(), p.shape());
    probe[static_cast<size_t>(axis)] = 0;
    Shape ref = parts[0].shape();
    ref[static_cast<size_t>(axis)] = 0;
    if (probe != ref) Mismatch("concat", parts[0].shape(), p.shape());
    out_shape[static_cast<size_t>(axis)] += p.dim(axis);
  }
  int64_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= out_shape[static_cast<size_t>(d)];
  for (int d = axis + 1; d < rank; ++d) inner *= out_shape[static_cast<size_t>(d)];
  const int64_t out_row = out_shape[static_cast<size_t>(axis)] * inner;
  std::vector<float> out(static_cast<size_t>(NumElements(out_shape)));
  std::vector<int64_t> offsets;
  std::vector<ImplPtr> impls;
  int64_t offset = 0;
  for (const Tensor& p : parts) {
    const int64_t row = p.dim(axis) * inner;
    for (int64_t o = 0; o < outer; ++o) {
      std::copy(p.data().begin() + o * row, p.data().begin() + (o + 1) * row,
                out.begin() + o * out_row + offset);
    }
    offsets.push_back(offset);
    impls.push_back(p.impl());
    offset += row;
  }
  return MakeResult("concat", out_shape, std::move(out), parts,
                    [impls, offsets, outer, inner, out_row, axis](TensorImpl& o) {
                      for (size_t k = 0; k < impls.size(); ++k) {
                        if (!impls[k]->requires_grad) continue;
                        const int64_t row = impls[k]->shape[static_cast<size_t>(axis)] * inner;
                        float* g = impls[k]->grad_buffer().data();
                        for (int64_t b = 0; b < outer; ++b) {
                          const float* src = o.grad.data() + b * out_row + offsets[k];
                          for (int64_t i = 0; i < row; ++i) g[b * row + i] += src[i];
                        }
                      }
                    });
}

Tensor IndexSelect(const Tensor& x, const std::vector<int>& rows) {
  if (x.rank() < 1) throw ShapeError("index_select: rank-0 input");
  const int64_t count = x.dim(0);
  const int64_t row = count == 0 ? 0 : x.numel() / count;
  Shape out_shape = x.shape();
  out_shape[0] = static_cast<int64_t>(rows.size());
  std::vector<float> out(rows.size() * static_cast<size_t>(row));
  for (size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] < 0 || rows[k] >= count) {
      throw ShapeError("index_select: row " + std::to_string(rows[k]) + " out of range for " +
                       ShapeToString(x.shape()));
    }
    std::copy(x.data().begin() + rows[k] * row, x.data().begin() + (rows[k] + 1) * row,
              out.begin() + static_cast<int64_t>(k) * row);
  }
  ImplPtr xi = x.impl();
  return MakeResult("index_select", out_shape, std::move(out), {x}, [xi, rows, row](TensorImpl& o) {
    if (!xi->requires_grad) return;
    float* gx = xi->grad_buffer().data();
    for (size_t k = 0; k < rows.size(); ++k) {
      const float* src = o.grad.data() + static_cast<int64_t>(k) * row;
      float* dst = gx + rows[k] * row;
      for (int64_t i = 0; i < row; ++i) dst[i] += src[i];
    }
  });
}

}  // namespace sketchcomm::ops
