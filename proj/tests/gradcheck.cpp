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

#include "gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "sketchcomm/losses.hpp"
#include "sketchcomm/ops.hpp"
#include "sketchcomm/raster.hpp"
#include "sketchcomm/rng.hpp"
#include "sketchcomm/tensor.hpp"

namespace sketchcomm::testing {

namespace {

using Vec = std::vector<double>;

struct Arg {
  Shape shape;
  std::vector<float> values;
  bool differentiable = true;
};

struct Case {
  std::vector<Arg> args;
  std::function<Tensor(const std::vector<Tensor>&)> op;
  std::function<Vec(const std::vector<Vec>&)> ref;
  std::string label;
};

int64_t Count(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

std::string Str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

int RandInt(Rng& rng, int lo, int hi) { return lo + static_cast<int>(rng.UniformInt(static_cast<uint64_t>(hi - lo + 1))); }

std::vector<float> RandValues(Rng& rng, int64_t n, float lo, float hi) {
  std::vector<float> v(static_cast<size_t>(n));
  for (float& x : v) x = rng.Uniform(lo, hi);
  return v;
}

// Values in +-[lo, hi] so that kinks at zero are never within reach.
std::vector<float> AwayFromZero(Rng& rng, int64_t n, float lo, float hi) {
  std::vector<float> v(static_cast<size_t>(n));
  for (float& x : v) x = rng.Uniform(lo, hi) * (rng.UniformInt(2) ? 1.0f : -1.0f);
  return v;
}

Shape RandShape(Rng& rng, int min_rank, int max_rank, int max_dim) {
  Shape s(static_cast<size_t>(RandInt(rng, min_rank, max_rank)));
  for (auto& d : s) d = RandInt(rng, 1, max_dim);
  return s;
}

std::vector<int64_t> Strides(const Shape& s) {
  std::vector<int64_t> st(s.size(), 1);
  for (int i = static_cast<int>(s.size()) - 2; i >= 0; --i) st[static_cast<size_t>(i)] = st[static_cast<size_t>(i) + 1] * s[static_cast<size_t>(i) + 1];
  return st;
}

std::vector<int64_t> Unravel(int64_t flat, const Shape& s) {
  std::vector<int64_t> idx(s.size());
  for (int i = static_cast<int>(s.size()) - 1; i >= 0; --i) {
    idx[static_cast<size_t>(i)] = flat % s[static_cast<size_t>(i)];
    flat /= s[static_cast<size_t>(i)];
  }
  return idx;
}

// Flat offset into an operand of shape `in` for an output multi-index,
// aligning trailing dimensions and pinning size-1 dimensions to 0.
int64_t BroadcastOffset(const std::vector<int64_t>& out_idx, const Shape& in) {
  const auto st = Strides(in);
  const size_t lead = out_idx.size() - in.size();
  int64_t off = 0;
  for (size_t k = 0; k < in.size(); ++k) {
    if (in[k] != 1) off += out_idx[lead + k] * st[k];
  }
  return off;
}

Shape BroadcastPair(const Shape& a, const Shape& b) {
  Shape out(std::max(a.size(), b.size()));
  for (size_t k = 0; k < out.size(); ++k) {
    const int64_t da = k + a.size() >= out.size() ? a[k + a.size() - out.size()] : 1;
    const int64_t db = k + b.size() >= out.size() ? b[k + b.size() - out.size()] : 1;
    out[k] = std::max(da, db);
  }
  return out;
}

// Random operand shape that broadcasts to `out`.
Shape Shrink(Rng& rng, const Shape& out) {
  const size_t rank = static_cast<size_t>(RandInt(rng, 0, static_cast<int>(out.size())));
  Shape s(out.end() - static_cast<int64_t>(rank), out.end());
  for (auto& d : s) {
    if (rng.UniformInt(3) == 0) d = 1;
  }
  if (s.empty()) s = {1};
  return s;
}

Case Elementwise(Rng& rng, const std::string& name) {
  const Shape out = RandShape(rng, 1, 4, 3);
  Shape a = Shrink(rng, out), b = Shrink(rng, out);
  if (rng.UniformInt(2)) a = out;
  const Shape full = BroadcastPair(a, b);
  Case c;
  c.label = name + " " + Str(a) + "," + Str(b);
  c.args = {{a, RandValues(rng, Count(a), -2, 2)}, {b, RandValues(rng, Count(b), -2, 2)}};
  c.op = [name](const std::vector<Tensor>& in) {
    if (name == "add") return ops::Add(in[0], in[1]);
    if (name == "sub") return ops::Sub(in[0], in[1]);
    return ops::Mul(in[0], in[1]);
  };
  c.ref = [name, a, b, full](const std::vector<Vec>& in) {
    Vec y(static_cast<size_t>(Count(full)));
    for (int64_t k = 0; k < Count(full); ++k) {
      const auto idx = Unravel(k, full);
      const double x0 = in[0][static_cast<size_t>(BroadcastOffset(idx, a))];
      const double x1 = in[1][static_cast<size_t>(BroadcastOffset(idx, b))];
      y[static_cast<size_t>(k)] = name == "add" ? x0 + x1 : name == "sub" ? x0 - x1 : x0 * x1;
    }
    return y;
  };
  return c;
}

Case Unary(Rng& rng, const std::string& name) {
  const Shape s = RandShape(rng, 1, 4, 4);
  Case c;
  c.label = name + " " + Str(s);
  const float scalar = rng.Uniform(-2, 2);
  std::vector<float> v = name == "relu" ? AwayFromZero(rng, Count(s), 0.05f, 1.5f) : RandValues(rng, Count(s), -2, 2);
  c.args = {{s, v}};
  c.op = [name, scalar](const std::vector<Tensor>& in) {
    if (name == "relu") return ops::Relu(in[0]);
    if (name == "tanh") return ops::Tanh(in[0]);
    if (name == "exp") return ops::Exp(in[0]);
    if (name == "square") return ops::Square(in[0]);
    if (name == "add_scalar") return ops::AddScalar(in[0], scalar);
    return ops::Scale(in[0], scalar);
  };
  c.ref = [name, scalar](const std::vector<Vec>& in) {
    Vec y = in[0];
    for (double& x : y) {
      if (name == "relu") {
        x = x > 0 ? x : 0;
      } else if (name == "tanh") {
        x = std::tanh(x);
      } else if (name == "exp") {
        x = std::exp(x);
      } else if (name == "square") {
        x = x * x;
      } else if (name == "add_scalar") {
        x = x + scalar;
      } else {
        x = x * scalar;
      }
    }
    return y;
  };
  return c;
}

Case MatMulCase(Rng& rng) {
  const int m = RandInt(rng, 1, 5), k = RandInt(rng, 1, 5), n = RandInt(rng, 1, 5);
  Case c;
  c.label = "matmul " + std::to_string(m) + "x" + std::to_string(k) + "x" + std::to_string(n);
  c.args = {{{m, k}, RandValues(rng, m * k, -1, 1)}, {{k, n}, RandValues(rng, k * n, -1, 1)}};
  c.op = [](const std::vector<Tensor>& in) { return ops::MatMul(in[0], in[1]); };
  c.ref = [m, k, n](const std::vector<Vec>& in) {
    Vec y(static_cast<size_t>(m * n), 0.0);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j)
        for (int t = 0; t < k; ++t) y[static_cast<size_t>(i * n + j)] += in[0][static_cast<size_t>(i * k + t)] * in[1][static_cast<size_t>(t * n + j)];
    return y;
  };
  return c;
}

Case TransposeCase(Rng& rng) {
  const int m = RandInt(rng, 1, 5), n = RandInt(rng, 1, 5);
  Case c;
  c.label = "transpose";
  c.args = {{{m, n}, RandValues(rng, m * n, -1, 1)}};
  c.op = [](const std::vector<Tensor>& in) { return ops::Transpose(in[0]); };
  c.ref = [m, n](const std::vector<Vec>& in) {
    Vec y(static_cast<size_t>(m * n));
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) y[static_cast<size_t>(j * m + i)] = in[0][static_cast<size_t>(i * n + j)];
    return y;
  };
  return c;
}

Case ConvCase(Rng& rng) {
  const int n = RandInt(rng, 1, 2), ch = RandInt(rng, 1, 3), o = RandInt(rng, 1, 3);
  const int kh = RandInt(rng, 1, 3), kw = RandInt(rng, 1, 3);
  const int stride = RandInt(rng, 1, 2), pad = RandInt(rng, 0, 1);
  const int h = RandInt(rng, std::max(1, kh - 2 * pad), 6), w = RandInt(rng, std::max(1, kw - 2 * pad), 6);
  const bool with_bias = rng.UniformInt(2) == 1;
  const int ho = (h + 2 * pad - kh) / stride + 1, wo = (w + 2 * pad - kw) / stride + 1;
  Case c;
  c.label = "conv2d n" + std::to_string(n) + " c" + std::to_string(ch) + " " + std::to_string(h) + "x" +
            std::to_string(w) + " o" + std::to_string(o) + " k" + std::to_string(kh) + "x" + std::to_string(kw) +
            " s" + std::to_string(stride) + " p" + std::to_string(pad);
  c.args = {{{n, ch, h, w}, RandValues(rng, n * ch * h * w, -1, 1)},
            {{o, ch, kh, kw}, RandValues(rng, o * ch * kh * kw, -1, 1)}};
  if (with_bias) c.args.push_back({{o}, RandValues(rng, o, -1, 1)});
  c.op = [stride, pad, with_bias](const std::vector<Tensor>& in) {
    return ops::Conv2d(in[0], in[1], with_bias ? in[2] : Tensor(), stride, pad);
  };
  c.ref = [=](const std::vector<Vec>& in) {
    Vec y(static_cast<size_t>(n * o * ho * wo), 0.0);
    for (int b = 0; b < n; ++b)
      for (int oc = 0; oc < o; ++oc)
        for (int oy = 0; oy < ho; ++oy)
          for (int ox = 0; ox < wo; ++ox) {
            double acc = with_bias ? in[2][static_cast<size_t>(oc)] : 0.0;
            for (int ic = 0; ic < ch; ++ic)
              for (int i = 0; i < kh; ++i)
                for (int j = 0; j < kw; ++j) {
                  const int y0 = oy * stride - pad + i, x0 = ox * stride - pad + j;
                  if (y0 < 0 || y0 >= h || x0 < 0 || x0 >= w) continue;
                  acc += in[0][static_cast<size_t>(((b * ch + ic) * h + y0) * w + x0)] *
                         in[1][static_cast<size_t>(((oc * ch + ic) * kh + i) * kw + j)];
                }
            y[static_cast<size_t>(((b * o + oc) * ho + oy) * wo + ox)] = acc;
          }
    return y;
  };
  return c;
}

Case MaxPoolCase(Rng& rng) {
  const int n = RandInt(rng, 1, 2), ch = RandInt(rng, 1, 3), win = RandInt(rng, 1, 3);
  const int h = RandInt(rng, win, 7), w = RandInt(rng, win, 7);
  const int ho = h / win, wo = w / win;
  // Distinct values on a 0.01 grid keep every window's maximum unique.
  std::vector<float> v(static_cast<size_t>(n * ch * h * w));
  std::vector<int> perm = rng.Permutation(static_cast<int>(v.size()));
  for (size_t k = 0; k < v.size(); ++k) v[k] = 0.01f * static_cast<float>(perm[k]) - 1.0f;
  Case c;
  c.label = "max_pool2d " + std::to_string(h) + "x" + std::to_string(w) + " w" + std::to_string(win);
  c.args = {{{n, ch, h, w}, v}};
  c.op = [win](const std::vector<Tensor>& in) { return ops::MaxPool2d(in[0], win); };
  c.ref = [=](const std::vector<Vec>& in) {
    Vec y(static_cast<size_t>(n * ch * ho * wo));
    for (int p = 0; p < n * ch; ++p)
      for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox) {
          double best = -1e300;
          for (int i = 0; i < win; ++i)
            for (int j = 0; j < win; ++j)
              best = std::max(best, in[0][static_cast<size_t>((p * h + oy * win + i) * w + ox * win + j)]);
          y[static_cast<size_t>((p * ho + oy) * wo + ox)] = best;
        }
    return y;
  };
  return c;
}

Case ReduceCase(Rng& rng, const std::string& name) {
  const Shape s = RandShape(rng, 1, 4, 4);
  const int rank = static_cast<int>(s.size());
  std::vector<int> axes;
  const bool all = rng.UniformInt(4) == 0;
  if (!all) {
    for (int a = 0; a < rank; ++a) {
      if (rng.UniformInt(2)) axes.push_back(a);
    }
    if (axes.empty()) axes.push_back(RandInt(rng, 0, rank - 1));
  }
  const bool keepdim = rng.UniformInt(2) == 1;
  Case c;
  c.label = name + " " + Str(s) + (all ? " all" : " axes");
  c.args = {{s, RandValues(rng, Count(s), -2, 2)}};
  const bool mean = name == "mean";
  c.op = [=](const std::vector<Tensor>& in) {
    if (all) return mean ? ops::Mean(in[0]) : ops::Sum(in[0]);
    return mean ? ops::Mean(in[0], axes, keepdim) : ops::Sum(in[0], axes, keepdim);
  };
  c.ref = [=](const std::vector<Vec>& in) {
    std::vector<bool> reduced(s.size(), all);
    for (int a : axes) reduced[static_cast<size_t>(a)] = true;
    Shape kept;
    int64_t count = 1;
    for (size_t k = 0; k < s.size(); ++k) {
      kept.push_back(reduced[k] ? 1 : s[k]);
      if (reduced[k]) count *= s[k];
    }
    Vec y(static_cast<size_t>(Count(kept)), 0.0);
    const auto st = Strides(kept);
    for (int64_t f = 0; f < Count(s); ++f) {
      const auto idx = Unravel(f, s);
      int64_t off = 0;
      for (size_t k = 0; k < s.size(); ++k) off += (reduced[k] ? 0 : idx[k]) * st[k];
      y[static_cast<size_t>(off)] += in[0][static_cast<size_t>(f)];
    }
    if (mean) {
      for (double& v : y) v /= static_cast<double>(count);
    }
    return y;
  };
  return c;
}

Case ProdCase(Rng& rng) {
  const Shape s = RandShape(rng, 1, 3, 4);
  const int axis = RandInt(rng, 0, static_cast<int>(s.size()) - 1);
  std::vector<float> v = AwayFromZero(rng, Count(s), 0.5f, 1.5f);
  // Exact zeros exercise the leave-one-out path.
  if (rng.UniformInt(3) == 0) v[rng.UniformInt(v.size())] = 0.0f;
  if (rng.UniformInt(5) == 0) v[rng.UniformInt(v.size())] = 0.0f;
  Case c;
  c.label = "prod " + Str(s) + " axis " + std::to_string(axis);
  c.args = {{s, v}};
  c.op = [axis](const std::vector<Tensor>& in) { return ops::Prod(in[0], axis); };
  c.ref = [s, axis](const std::vector<Vec>& in) {
    Shape out;
    for (size_t k = 0; k < s.size(); ++k) {
      if (static_cast<int>(k) != axis) out.push_back(s[k]);
    }
    if (out.empty()) out = {1};
    Vec y(static_cast<size_t>(Count(out)), 1.0);
    for (int64_t f = 0; f < Count(s); ++f) {
      auto idx = Unravel(f, s);
      idx.erase(idx.begin() + axis);
      int64_t off = 0;
      const auto st = Strides(out);
      for (size_t k = 0; k < idx.size(); ++k) off += idx[k] * st[k];
      y[static_cast<size_t>(off)] *= in[0][static_cast<size_t>(f)];
    }
    return y;
  };
  return c;
}

Vec RefNormalize(const Vec& x, const Shape& s) {
  const int64_t n = s[0], ch = s[1], rest = Count(s) / (n * ch);
  Vec y(x.size());
  for (int64_t b = 0; b < n; ++b)
    for (int64_t p = 0; p < rest; ++p) {
      double sq = 0.0;
      for (int64_t c = 0; c < ch; ++c) sq += x[static_cast<size_t>((b * ch + c) * rest + p)] * x[static_cast<size_t>((b * ch + c) * rest + p)];
      const double inv = 1.0 / std::sqrt(sq + static_cast<double>(ops::kChannelNormEps));
      for (int64_t c = 0; c < ch; ++c) y[static_cast<size_t>((b * ch + c) * rest + p)] = x[static_cast<size_t>((b * ch + c) * rest + p)] * inv;
    }
  return y;
}

Case NormalizeCase(Rng& rng) {
  const Shape s{RandInt(rng, 1, 2), RandInt(rng, 1, 4), RandInt(rng, 1, 3), RandInt(rng, 1, 3)};
  const float scale = rng.UniformInt(4) == 0 ? 1e-2f : 1.0f;
  Case c;
  c.label = "normalize_channels " + Str(s);
  c.args = {{s, RandValues(rng, Count(s), -scale, scale)}};
  c.op = [](const std::vector<Tensor>& in) { return ops::NormalizeChannels(in[0]); };
  c.ref = [s](const std::vector<Vec>& in) { return RefNormalize(in[0], s); };
  return c;
}

Case BroadcastToCase(Rng& rng) {
  const Shape out = RandShape(rng, 1, 4, 3);
  const Shape in = Shrink(rng, out);
  Case c;
  c.label = "broadcast_to " + Str(in) + "->" + Str(out);
  c.args = {{in, RandValues(rng, Count(in), -1, 1)}};
  c.op = [out](const std::vector<Tensor>& x) { return ops::BroadcastTo(x[0], out); };
  c.ref = [in, out](const std::vector<Vec>& x) {
    Vec y(static_cast<size_t>(Count(out)));
    for (int64_t k = 0; k < Count(out); ++k) y[static_cast<size_t>(k)] = x[0][static_cast<size_t>(BroadcastOffset(Unravel(k, out), in))];
    return y;
  };
  return c;
}

Case ReshapeCase(Rng& rng) {
  const Shape s = RandShape(rng, 1, 4, 3);
  Shape t{Count(s)};
  if (Count(s) % 2 == 0 && rng.UniformInt(2)) t = {2, Count(s) / 2};
  Case c;
  c.label = "reshape " + Str(s) + "->" + Str(t);
  c.args = {{s, RandValues(rng, Count(s), -1, 1)}};
  c.op = [t](const std::vector<Tensor>& in) { return ops::Reshape(in[0], t); };
  c.ref = [](const std::vector<Vec>& in) { return in[0]; };
  return c;
}

Case ConcatCase(Rng& rng) {
  const Shape base = RandShape(rng, 1, 3, 3);
  const int axis = RandInt(rng, 0, static_cast<int>(base.size()) - 1);
  const int parts = RandInt(rng, 1, 3);
  Case c;
  c.label = "concat " + std::to_string(parts) + " parts axis " + std::to_string(axis);
  std::vector<Shape> shapes;
  for (int p = 0; p < parts; ++p) {
    Shape s = base;
    s[static_cast<size_t>(axis)] = RandInt(rng, 1, 3);
    shapes.push_back(s);
    c.args.push_back({s, RandValues(rng, Count(s), -1, 1)});
  }
  c.op = [axis](const std::vector<Tensor>& in) { return ops::Concat(in, axis); };
  c.ref = [shapes, axis](const std::vector<Vec>& in) {
    int64_t outer = 1;
    for (int k = 0; k < axis; ++k) outer *= shapes[0][static_cast<size_t>(k)];
    Vec y;
    for (int64_t o = 0; o < outer; ++o) {
      for (size_t p = 0; p < shapes.size(); ++p) {
        const int64_t chunk = Count(shapes[p]) / outer;
        y.insert(y.end(), in[p].begin() + o * chunk, in[p].begin() + (o + 1) * chunk);
      }
    }
    return y;
  };
  return c;
}

Case IndexSelectCase(Rng& rng) {
  const int rows = RandInt(rng, 1, 5), cols = RandInt(rng, 1, 4), picks = RandInt(rng, 1, 7);
  std::vector<int> idx;
  for (int k = 0; k < picks; ++k) idx.push_back(static_cast<int>(rng.UniformInt(static_cast<uint64_t>(rows))));
  Case c;
  c.label = "index_select";
  c.args = {{{rows, cols}, RandValues(rng, rows * cols, -1, 1)}};
  c.op = [idx](const std::vector<Tensor>& in) { return ops::IndexSelect(in[0], idx); };
  c.ref = [idx, cols](const std::vector<Vec>& in) {
    Vec y;
    for (int r : idx) y.insert(y.end(), in[0].begin() + r * cols, in[0].begin() + (r + 1) * cols);
    return y;
  };
  return c;
}

Case MultiMarginCase(Rng& rng) {
  const int b = RandInt(rng, 1, 3), p = RandInt(rng, 2, 5);
  std::vector<int> targets;
  for (int i = 0; i < b; ++i) targets.push_back(static_cast<int>(rng.UniformInt(static_cast<uint64_t>(p))));
  std::vector<float> v;
  for (;;) {
    v = RandValues(rng, b * p, -1.5f, 1.5f);
    bool clear = true;
    for (int i = 0; i < b; ++i)
      for (int j = 0; j < p; ++j) {
        const float m = 1.0f - v[static_cast<size_t>(i * p + targets[static_cast<size_t>(i)])] + v[static_cast<size_t>(i * p + j)];
        if (j != targets[static_cast<size_t>(i)] && std::fabs(m) < 1e-2f) clear = false;
      }
    if (clear) break;
  }
  Case c;
  c.label = "multi_margin";
  c.args = {{{b, p}, v}};
  c.op = [targets](const std::vector<Tensor>& in) { return MultiMargin(in[0], targets); };
  c.ref = [b, p, targets](const std::vector<Vec>& in) {
    Vec y(static_cast<size_t>(b), 0.0);
    for (int i = 0; i < b; ++i) {
      const double xy = in[0][static_cast<size_t>(i * p + targets[static_cast<size_t>(i)])];
      for (int j = 0; j < p; ++j) {
        if (j == targets[static_cast<size_t>(i)]) continue;
        y[static_cast<size_t>(i)] += std::max(0.0, 1.0 - xy + in[0][static_cast<size_t>(i * p + j)]);
      }
    }
    return y;
  };
  return c;
}

double RefSegmentDist2(double sx, double sy, double ex, double ey, double px, double py) {
  const double vx = ex - sx, vy = ey - sy;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0 ? ((px - sx) * vx + (py - sy) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = px - (sx + t * vx), dy = py - (sy + t * vy);
  return dx * dx + dy * dy;
}

Case RasterCase(Rng& rng, Primitive primitive) {
  const int b = RandInt(rng, 1, 2), n = RandInt(rng, 1, 3);
  RasterConfig cfg;
  cfg.width = RandInt(rng, 6, 14);
  cfg.height = RandInt(rng, 6, 14);
  const float sigmas[] = {5e-4f, 5e-3f, 2e-2f, 8e-2f};
  cfg.sigma2 = sigmas[rng.UniformInt(4)];
  const int arity = PrimitiveArity(primitive);
  Case c;
  c.label = std::string("rasterize ") + std::string(PrimitiveName(primitive)) + " n" + std::to_string(n) + " " +
            std::to_string(cfg.width) + "x" + std::to_string(cfg.height);
  c.args = {{{b, n * arity}, RandValues(rng, b * n * arity, -1, 1)}};
  c.op = [primitive, cfg](const std::vector<Tensor>& in) { return RasterizeBatch(in[0], primitive, cfg); };
  c.ref = [=](const std::vector<Vec>& in) {
    Vec y(static_cast<size_t>(b * cfg.width * cfg.height));
    for (int bi = 0; bi < b; ++bi)
      for (int r = 0; r < cfg.height; ++r)
        for (int col = 0; col < cfg.width; ++col) {
          const double px = -1.0 + (2.0 * col + 1.0) / cfg.width, py = -1.0 + (2.0 * r + 1.0) / cfg.height;
          double s = 1.0;
          for (int k = 0; k < n; ++k) {
            const double* q = in[0].data() + (bi * n + k) * arity;
            const double d2 = primitive == Primitive::kLine
                                  ? RefSegmentDist2(q[0], q[1], q[2], q[3], px, py)
                                  : (px - q[0]) * (px - q[0]) + (py - q[1]) * (py - q[1]);
            s *= 1.0 - std::exp(-d2 / static_cast<double>(cfg.sigma2));
          }
          y[static_cast<size_t>((bi * cfg.height + r) * cfg.width + col)] = s;
        }
    return y;
  };
  return c;
}

Case PerceptualCase(Rng& rng) {
  const int layers = RandInt(rng, 1, 3), n = RandInt(rng, 1, 2);
  std::vector<Shape> shapes;
  std::vector<float> weights;
  Case c;
  c.label = "perceptual " + std::to_string(layers) + " layers";
  for (int l = 0; l < layers; ++l) {
    Shape s{n, RandInt(rng, 1, 4), RandInt(rng, 1, 3), RandInt(rng, 1, 3)};
    shapes.push_back(s);
    weights.push_back(rng.Uniform(0, 2));
  }
  for (const auto& s : shapes) c.args.push_back({s, RandValues(rng, Count(s), -1, 1)});
  for (const auto& s : shapes) c.args.push_back({s, RandValues(rng, Count(s), -1, 1)});
  c.op = [layers, weights](const std::vector<Tensor>& in) {
    std::vector<Tensor> a(in.begin(), in.begin() + layers), b(in.begin() + layers, in.end());
    return Perceptual(a, b, weights);
  };
  c.ref = [=](const std::vector<Vec>& in) {
    Vec y(static_cast<size_t>(n), 0.0);
    for (int l = 0; l < layers; ++l) {
      const Shape& s = shapes[static_cast<size_t>(l)];
      const Vec a = RefNormalize(in[static_cast<size_t>(l)], s), b = RefNormalize(in[static_cast<size_t>(l + layers)], s);
      const int64_t per = Count(s) / n;
      for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int64_t k = 0; k < per; ++k) {
          const double d = a[static_cast<size_t>(i * per + k)] - b[static_cast<size_t>(i * per + k)];
          acc += d * d;
        }
        y[static_cast<size_t>(i)] += weights[static_cast<size_t>(l)] / static_cast<double>(s[2] * s[3]) * acc;
      }
    }
    return y;
  };
  return c;
}

double Excess(double a, double n) {
  return std::fabs(a - n) / std::max(kGradRelTol * std::max(std::fabs(a), std::fabs(n)), kGradAbsFloor);
}

void RunCase(const Case& c, Rng& rng, GradReport& report) {
  std::vector<Tensor> inputs;
  std::vector<Vec> base;
  for (const auto& a : c.args) {
    inputs.push_back(Tensor::FromData(a.shape, a.values, a.differentiable));
    base.emplace_back(a.values.begin(), a.values.end());
  }
  Tensor out = c.op(inputs);
  const std::vector<float> r = RandValues(rng, out.numel(), -1, 1);
  Tensor loss = ops::Sum(ops::Mul(out, Tensor::FromData(out.shape(), r)));
  loss.backward();

  auto objective = [&](const std::vector<Vec>& in) {
    const Vec y = c.ref(in);
    double s = 0.0;
    for (size_t k = 0; k < y.size(); ++k) s += static_cast<double>(r[k]) * y[k];
    return s;
  };
  bool failed = false;
  auto fail = [&](const std::string& why) {
    if (!failed && report.first_failure.empty()) report.first_failure = c.label + ": " + why;
    failed = true;
  };

  const Vec ref_out = c.ref(base);
  if (static_cast<int64_t>(ref_out.size()) != out.numel()) {
    fail("reference has " + std::to_string(ref_out.size()) + " outputs, op has " + std::to_string(out.numel()));
  } else {
    for (size_t k = 0; k < ref_out.size(); ++k) {
      if (std::fabs(ref_out[k] - out.data()[k]) > 1e-4 * std::max(1.0, std::fabs(ref_out[k]))) {
        fail("forward mismatch at " + std::to_string(k));
        break;
      }
    }
  }

  for (size_t i = 0; i < c.args.size(); ++i) {
    if (!c.args[i].differentiable) continue;
    for (size_t e = 0; e < base[i].size(); ++e) {
      const double x = base[i][e];
      const double h = 1e-6 * std::max(1.0, std::fabs(x));
      std::vector<Vec> plus = base, minus = base;
      plus[i][e] = x + h;
      minus[i][e] = x - h;
      const double numeric = (objective(plus) - objective(minus)) / (2 * h);
      const double analytic = inputs[i].has_grad() ? inputs[i].grad()[e] : 0.0;
      ++report.entries;
      const double ex = Excess(analytic, numeric);
      report.worst_excess = std::max(report.worst_excess, ex);
      if (!GradClose(analytic, numeric)) {
        std::ostringstream os;
        os << "input " << i << " entry " << e << ": analytic " << analytic << " numeric " << numeric;
        fail(os.str());
      }
    }
  }
  ++report.configs;
  report.failures += failed;
}

}  // namespace

bool GradClose(double analytic, double numeric) {
  return std::fabs(analytic - numeric) <= std::max(kGradRelTol * std::max(std::fabs(analytic), std::fabs(numeric)), kGradAbsFloor);
}

std::vector<GradReport> RunGradientSuite(int configs_per_op, uint64_t seed) {
  using Maker = std::function<Case(Rng&)>;
  const std::vector<std::pair<std::string, Maker>> makers = {
      {"add", [](Rng& r) { return Elementwise(r, "add"); }},
      {"sub", [](Rng& r) { return Elementwise(r, "sub"); }},
      {"mul", [](Rng& r) { return Elementwise(r, "mul"); }},
      {"add_scalar", [](Rng& r) { return Unary(r, "add_scalar"); }},
      {"scale", [](Rng& r) { return Unary(r, "scale"); }},
      {"relu", [](Rng& r) { return Unary(r, "relu"); }},
      {"tanh", [](Rng& r) { return Unary(r, "tanh"); }},
      {"exp", [](Rng& r) { return Unary(r, "exp"); }},
      {"square", [](Rng& r) { return Unary(r, "square"); }},
      {"matmul", MatMulCase},
      {"transpose", TransposeCase},
      {"conv2d", ConvCase},
      {"max_pool2d", MaxPoolCase},
      {"sum", [](Rng& r) { return ReduceCase(r, "sum"); }},
      {"mean", [](Rng& r) { return ReduceCase(r, "mean"); }},
      {"prod", ProdCase},
      {"normalize_channels", NormalizeCase},
      {"broadcast_to", BroadcastToCase},
      {"reshape", ReshapeCase},
      {"concat", ConcatCase},
      {"index_select", IndexSelectCase},
      {"multi_margin", MultiMarginCase},
      {"perceptual", PerceptualCase},
      {"rasterize_lines", [](Rng& r) { return RasterCase(r, Primitive::kLine); }},
      {"rasterize_points", [](Rng& r) { return RasterCase(r, Primitive::kPoint); }},
  };
  std::vector<GradReport> reports;
  for (size_t m = 0; m < makers.size(); ++m) {
    GradReport report;
    report.op = makers[m].first;
    Rng rng(seed, 1000 + m);
    for (int k = 0; k < configs_per_op; ++k) RunCase(makers[m].second(rng), rng, report);
    reports.push_back(report);
  }
  return reports;
}

}  // namespace sketchcomm::testing
