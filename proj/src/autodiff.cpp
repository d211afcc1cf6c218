// Copyright 2026 The evpose Authors
// SPDX-License-Identifier: Apache-2.0

#include "evpose/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "evpose/error.hpp"
#include "evpose/rng.hpp"

namespace evpose::ad {

// grad_in[i] is null when input i does not need a gradient; otherwise it is a
// zero-initialised or partially accumulated buffer to add into.
using BackwardFn = std::function<void(const Node& self, std::span<const double> grad_out,
                                      std::span<std::vector<double>* const> grad_in)>;

struct Node {
  Shape shape;
  std::vector<double> value;
  const char* kind = "constant";
  bool requires_grad = false;
  bool parameter = false;
  std::vector<std::shared_ptr<Node>> inputs;
  BackwardFn backward;
};

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

// --- Tensor ---------------------------------------------------------------

namespace {

std::shared_ptr<Node> make_leaf(Shape shape, std::vector<double> data, bool parameter) {
  if (shape_size(shape) != data.size()) {
    throw ShapeError("tensor: shape " + shape_string(shape) + " needs " +
                     std::to_string(shape_size(shape)) + " values, got " +
                     std::to_string(data.size()));
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(data);
  node->parameter = parameter;
  node->requires_grad = parameter;
  node->kind = parameter ? "parameter" : "constant";
  return node;
}

const Node& checked(const std::shared_ptr<Node>& n) {
  if (!n) throw ShapeError("tensor: use of an empty tensor");
  return *n;
}

}  // namespace

Tensor Tensor::constant(Shape shape, std::vector<double> data) {
  return Tensor(make_leaf(std::move(shape), std::move(data), false));
}

Tensor Tensor::constant(Shape shape, double fill) {
  const std::size_t n = shape_size(shape);
  return constant(std::move(shape), std::vector<double>(n, fill));
}

Tensor Tensor::parameter(Shape shape, std::vector<double> data) {
  return Tensor(make_leaf(std::move(shape), std::move(data), true));
}

const Shape& Tensor::shape() const { return checked(node_).shape; }
std::size_t Tensor::size() const { return checked(node_).value.size(); }
std::span<const double> Tensor::data() const { return checked(node_).value; }
bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
bool Tensor::is_parameter() const { return node_ && node_->parameter; }
const char* Tensor::kind() const { return checked(node_).kind; }

double Tensor::item() const {
  const Node& n = checked(node_);
  if (n.value.size() != 1) {
    throw ShapeError("item: tensor of shape " + shape_string(n.shape) + " is not a scalar");
  }
  return n.value[0];
}

std::span<double> Tensor::mutable_data() {
  checked(node_);
  return node_->value;
}

// --- Gradients / backward -------------------------------------------------

const std::vector<double>* Gradients::find(const Tensor& param) const {
  auto it = grads_.find(param.node());
  return it == grads_.end() ? nullptr : &it->second;
}

std::vector<double> Gradients::of(const Tensor& param) const {
  if (const auto* g = find(param)) return *g;
  return std::vector<double>(param.size(), 0.0);
}

Gradients backward(const Tensor& output) {
  const Node& root = checked(output.shared_node());
  if (root.value.size() != 1 || root.shape.size() > 1) {
    throw ShapeError("backward: output must have shape [] or [1], got " +
                     shape_string(root.shape));
  }
  Gradients result;
  if (!root.requires_grad) return result;

  // Iterative post-order DFS over the part of the graph that needs gradients.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  Node* root_ptr = output.shared_node().get();
  stack.emplace_back(root_ptr, 0);
  seen.insert(root_ptr);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  std::unordered_map<Node*, std::vector<double>> grads;
  grads[root_ptr] = {1.0};
  std::vector<std::vector<double>*> grad_in;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    auto found = grads.find(node);
    if (found == grads.end()) continue;
    if (node->parameter) {
      result.grads_[node] = std::move(found->second);
      continue;
    }
    if (!node->backward) continue;
    grad_in.assign(node->inputs.size(), nullptr);
    for (std::size_t i = 0; i < node->inputs.size(); ++i) {
      Node* in = node->inputs[i].get();
      if (!in->requires_grad) continue;
      auto& buf = grads[in];
      if (buf.empty()) buf.assign(in->value.size(), 0.0);
      grad_in[i] = &buf;
    }
    // The map may have rehashed; look the output gradient up again.
    const std::vector<double> gout = std::move(grads[node]);
    grads.erase(node);
    node->backward(*node, gout, grad_in);
  }
  return result;
}

// --- ops ------------------------------------------------------------------

namespace {

[[noreturn]] void shape_fail(const char* kind, const std::string& detail) {
  throw ShapeError(std::string(kind) + ": " + detail);
}

[[noreturn]] void shape_fail(const char* kind, const Shape& a, const Shape& b) {
  shape_fail(kind, "incompatible shapes " + shape_string(a) + " and " + shape_string(b));
}

// Inputs and the backward closure are kept only when some input needs a
// gradient, so inference builds no graph.
Tensor make_result(const char* kind, Shape shape, std::vector<double> value,
                   std::span<const Tensor> inputs, BackwardFn fn) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->kind = kind;
  for (const Tensor& t : inputs) node->requires_grad |= t.requires_grad();
  if (node->requires_grad) {
    node->inputs.reserve(inputs.size());
    for (const Tensor& t : inputs) node->inputs.push_back(t.shared_node());
    node->backward = std::move(fn);
  }
  return Tensor(std::move(node));
}

Tensor make_result(const char* kind, Shape shape, std::vector<double> value,
                   std::initializer_list<Tensor> inputs, BackwardFn fn) {
  return make_result(kind, std::move(shape), std::move(value),
                     std::span<const Tensor>(inputs.begin(), inputs.size()), std::move(fn));
}

const std::vector<double>& in_value(const Node& self, std::size_t i) {
  return self.inputs[i]->value;
}

template <typename F, typename DF>
Tensor unary(const char* kind, const Tensor& x, F f, DF df) {
  const auto xs = x.data();
  std::vector<double> y(xs.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = f(xs[i]);
  return make_result(kind, x.shape(), std::move(y), {x},
                     [df](const Node& self, std::span<const double> g,
                          std::span<std::vector<double>* const> gin) {
                       auto& gx = *gin[0];
                       const auto& xv = in_value(self, 0);
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         gx[i] += g[i] * df(xv[i], self.value[i]);
                       }
                     });
}

void require_same(const char* kind, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_fail(kind, a.shape(), b.shape());
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same("add", a, b);
  std::vector<double> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] + b[i];
  return make_result("add", a.shape(), std::move(y), {a, b},
                     [](const Node&, std::span<const double> g,
                        std::span<std::vector<double>* const> gin) {
                       for (auto* gi : gin) {
                         if (!gi) continue;
                         for (std::size_t i = 0; i < g.size(); ++i) (*gi)[i] += g[i];
                       }
                     });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same("sub", a, b);
  std::vector<double> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] - b[i];
  return make_result("sub", a.shape(), std::move(y), {a, b},
                     [](const Node&, std::span<const double> g,
                        std::span<std::vector<double>* const> gin) {
                       if (gin[0]) {
                         for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i];
                       }
                       if (gin[1]) {
                         for (std::size_t i = 0; i < g.size(); ++i) (*gin[1])[i] -= g[i];
                       }
                     });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same("mul", a, b);
  std::vector<double> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] * b[i];
  return make_result("mul", a.shape(), std::move(y), {a, b},
                     [](const Node& self, std::span<const double> g,
                        std::span<std::vector<double>* const> gin) {
                       const auto& av = in_value(self, 0);
                       const auto& bv = in_value(self, 1);
                       if (gin[0]) {
                         for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i] * bv[i];
                       }
                       if (gin[1]) {
                         for (std::size_t i = 0; i < g.size(); ++i) (*gin[1])[i] += g[i] * av[i];
                       }
                     });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0]) {
    shape_fail("matmul", a.shape(), b.shape());
  }
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  const double* av = a.data().data();
  const double* bv = b.data().data();
  std::vector<double> y(m * n, 0.0);
  if (n == 1) {
    for (std::size_t i = 0; i < m; ++i) {
      const double* arow = av + i * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * bv[p];
      y[i] = acc;
    }
  } else {
    for (std::size_t i = 0; i < m; ++i) {
      double* yrow = &y[i * n];
      for (std::size_t p = 0; p < k; ++p) {
        const double aip = av[i * k + p];
        const double* brow = bv + p * n;
        for (std::size_t j = 0; j < n; ++j) yrow[j] += aip * brow[j];
      }
    }
  }
  return make_result(
      "matmul", {m, n}, std::move(y), {a, b},
      [m, k, n](const Node& self, std::span<const double> g,
                std::span<std::vector<double>* const> gin) {
        const double* av = in_value(self, 0).data();
        const double* bv = in_value(self, 1).data();
        if (gin[0]) {  // dA = G B^T
          double* ga = gin[0]->data();
          for (std::size_t i = 0; i < m; ++i) {
            double* garow = ga + i * k;
            for (std::size_t j = 0; j < n; ++j) {
              const double gij = g[i * n + j];
              if (n == 1) {
                for (std::size_t p = 0; p < k; ++p) garow[p] += gij * bv[p];
              } else {
                for (std::size_t p = 0; p < k; ++p) garow[p] += gij * bv[p * n + j];
              }
            }
          }
        }
        if (gin[1]) {  // dB = A^T G
          double* gb = gin[1]->data();
          for (std::size_t i = 0; i < m; ++i) {
            const double* arow = av + i * k;
            if (n == 1) {
              const double gi = g[i];
              for (std::size_t p = 0; p < k; ++p) gb[p] += arow[p] * gi;
            } else {
              for (std::size_t p = 0; p < k; ++p) {
                const double aip = arow[p];
                for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += aip * g[i * n + j];
              }
            }
          }
        }
      });
}

namespace {

// y[j] += a * x[j * stride] for j < n.
inline void axpy(double* __restrict y, const double* __restrict x, double a, std::size_t n,
                 std::size_t stride) {
  if (stride == 1) {
    for (std::size_t j = 0; j < n; ++j) y[j] += a * x[j];
  } else {
    for (std::size_t j = 0; j < n; ++j) y[j] += a * x[j * stride];
  }
}

// sum of g[j] * x[j * stride] for j < n.
inline double dot(const double* __restrict g, const double* __restrict x, std::size_t n,
                  std::size_t stride) {
  double acc[4] = {0.0, 0.0, 0.0, 0.0};
  std::size_t j = 0;
  if (stride == 1) {
    for (; j + 4 <= n; j += 4) {
      for (std::size_t l = 0; l < 4; ++l) acc[l] += g[j + l] * x[j + l];
    }
  }
  for (; j < n; ++j) acc[0] += g[j] * x[j * stride];
  return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

// Geometry of a zero-padded convolution. For kernel tap (ki, kj) the output
// rows/cols that read from inside the input form a contiguous range.
struct ConvGeom {
  std::size_t C, H, W, O, K, stride, pad, Ho, Wo;

  // Output index range [lo, hi) whose input coordinate o*stride + k - pad
  // lies in [0, extent).
  std::pair<std::size_t, std::size_t> valid(std::size_t k, std::size_t extent,
                                            std::size_t out_extent) const {
    std::size_t lo = 0;
    if (k < pad) lo = (pad - k + stride - 1) / stride;
    // Largest o with o*stride + k - pad <= extent - 1.
    const std::ptrdiff_t top = static_cast<std::ptrdiff_t>(extent + pad) - 1 -
                               static_cast<std::ptrdiff_t>(k);
    if (top < 0) return {0, 0};
    const std::size_t hi = std::min(out_extent, static_cast<std::size_t>(top) / stride + 1);
    return {lo, std::max(lo, hi)};
  }

  // Calls fn(out_row_ptr_offset, in_row_offset, j_lo, j_hi, kj) for each
  // valid (o, c, ki, kj, i) combination; fn runs the inner column loop.
  template <typename Fn>
  void for_each_row(Fn&& fn) const {
    for (std::size_t o = 0; o < O; ++o) {
      for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t ki = 0; ki < K; ++ki) {
          const auto [i_lo, i_hi] = valid(ki, H, Ho);
          for (std::size_t kj = 0; kj < K; ++kj) {
            const auto [j_lo, j_hi] = valid(kj, W, Wo);
            const std::size_t widx = ((o * C + c) * K + ki) * K + kj;
            for (std::size_t i = i_lo; i < i_hi; ++i) {
              const std::size_t row = i * stride + ki - pad;
              // Input column for output j is j*stride + kj - pad; pass the
              // offset of output column 0 so callers index with j*stride.
              fn(widx, (o * Ho + i) * Wo, (c * H + row) * W + kj - pad, j_lo, j_hi);
            }
          }
        }
      }
    }
  }
};

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride,
              std::size_t padding) {
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  if (xs.size() != 3 || ws.size() != 4 || ws[1] != xs[0] || ws[2] != ws[3]) {
    shape_fail("conv2d", xs, ws);
  }
  if (b.shape() != Shape{ws[0]}) shape_fail("conv2d", ws, b.shape());
  if (stride == 0) shape_fail("conv2d", "stride must be positive");
  const std::size_t K = ws[2];
  if (xs[1] + 2 * padding < K || xs[2] + 2 * padding < K) {
    shape_fail("conv2d", "kernel " + std::to_string(K) + " larger than padded input " +
                             shape_string(xs));
  }
  const ConvGeom geo{xs[0],   xs[1],
                     xs[2],   ws[0],
                     K,       stride,
                     padding, (xs[1] + 2 * padding - K) / stride + 1,
                     (xs[2] + 2 * padding - K) / stride + 1};

  const double* xv = x.data().data();
  const double* wv = w.data().data();
  const auto bv = b.data();
  const std::size_t plane = geo.Ho * geo.Wo;
  std::vector<double> y(geo.O * plane);
  for (std::size_t o = 0; o < geo.O; ++o) {
    std::fill(y.begin() + static_cast<std::ptrdiff_t>(o * plane),
              y.begin() + static_cast<std::ptrdiff_t>((o + 1) * plane), bv[o]);
  }
  // `in` may wrap below zero by up to pad; unsigned arithmetic brings
  // in + j*stride back into range for every j in the valid column range.
  geo.for_each_row([&](std::size_t widx, std::size_t out, std::size_t in, std::size_t j_lo,
                       std::size_t j_hi) {
    if (j_hi > j_lo) {
      axpy(y.data() + out + j_lo, xv + (in + j_lo * stride), wv[widx], j_hi - j_lo, stride);
    }
  });

  return make_result(
      "conv2d", {geo.O, geo.Ho, geo.Wo}, std::move(y), {x, w, b},
      [geo](const Node& self, std::span<const double> g,
            std::span<std::vector<double>* const> gin) {
        const double* xv = in_value(self, 0).data();
        const double* wv = in_value(self, 1).data();
        const double* gv = g.data();
        const std::size_t s = geo.stride;
        if (gin[0]) {
          double* gx = gin[0]->data();
          geo.for_each_row([&](std::size_t widx, std::size_t out, std::size_t in,
                               std::size_t j_lo, std::size_t j_hi) {
            if (j_hi <= j_lo) return;
            const double wk = wv[widx];
            double* gxr = gx + (in + j_lo * s);
            const double* gr = gv + out + j_lo;
            const std::size_t n = j_hi - j_lo;
            if (s == 1) {
              for (std::size_t j = 0; j < n; ++j) gxr[j] += gr[j] * wk;
            } else {
              for (std::size_t j = 0; j < n; ++j) gxr[j * s] += gr[j] * wk;
            }
          });
        }
        if (gin[1]) {
          double* gw = gin[1]->data();
          geo.for_each_row([&](std::size_t widx, std::size_t out, std::size_t in,
                               std::size_t j_lo, std::size_t j_hi) {
            if (j_hi > j_lo) gw[widx] += dot(gv + out + j_lo, xv + (in + j_lo * s), j_hi - j_lo, s);
          });
        }
        if (gin[2]) {
          auto& gb = *gin[2];
          const std::size_t plane = geo.Ho * geo.Wo;
          for (std::size_t o = 0; o < geo.O; ++o) {
            double acc = 0.0;
            for (std::size_t p = 0; p < plane; ++p) acc += gv[o * plane + p];
            gb[o] += acc;
          }
        }
      });
}

Tensor maxpool2d(const Tensor& x, std::size_t window) {
  const Shape& xs = x.shape();
  if (xs.size() != 3 || window == 0 || xs[1] < window || xs[2] < window) {
    shape_fail("maxpool2d", "window " + std::to_string(window) + " on input " + shape_string(xs));
  }
  const std::size_t C = xs[0], H = xs[1], W = xs[2];
  const std::size_t Ho = H / window, Wo = W / window;
  const auto xv = x.data();
  std::vector<double> y(C * Ho * Wo);
  std::vector<std::size_t> argmax(y.size());
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t i = 0; i < Ho; ++i) {
      for (std::size_t j = 0; j < Wo; ++j) {
        std::size_t best = (c * H + i * window) * W + j * window;
        for (std::size_t di = 0; di < window; ++di) {
          for (std::size_t dj = 0; dj < window; ++dj) {
            const std::size_t idx = (c * H + i * window + di) * W + j * window + dj;
            if (xv[idx] > xv[best]) best = idx;
          }
        }
        const std::size_t out = (c * Ho + i) * Wo + j;
        y[out] = xv[best];
        argmax[out] = best;
      }
    }
  }
  return make_result("maxpool2d", {C, Ho, Wo}, std::move(y), {x},
                     [argmax = std::move(argmax)](const Node&, std::span<const double> g,
                                                  std::span<std::vector<double>* const> gin) {
                       auto& gx = *gin[0];
                       for (std::size_t i = 0; i < g.size(); ++i) gx[argmax[i]] += g[i];
                     });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      "sigmoid", x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
  return unary(
      "tanh", x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& x) {
  return unary(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_size(shape) != x.size()) shape_fail("reshape", x.shape(), shape);
  std::vector<double> y(x.data().begin(), x.data().end());
  return make_result("reshape", std::move(shape), std::move(y), {x},
                     [](const Node&, std::span<const double> g,
                        std::span<std::vector<double>* const> gin) {
                       auto& gx = *gin[0];
                       for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                     });
}

Tensor concat(std::span<const Tensor> parts) {
  if (parts.empty()) shape_fail("concat", "no inputs");
  Shape shape = parts[0].shape();
  if (shape.empty()) shape_fail("concat", "scalar inputs have no leading axis");
  const Shape trailing(shape.begin() + 1, shape.end());
  std::size_t rows = 0;
  std::vector<std::size_t> offsets;
  std::vector<double> y;
  for (const Tensor& p : parts) {
    const Shape& s = p.shape();
    if (s.empty() || Shape(s.begin() + 1, s.end()) != trailing) shape_fail("concat", shape, s);
    rows += s[0];
    offsets.push_back(y.size());
    y.insert(y.end(), p.data().begin(), p.data().end());
  }
  shape[0] = rows;
  return make_result("concat", std::move(shape), std::move(y), parts,
                     [offsets = std::move(offsets)](const Node& self, std::span<const double> g,
                                                    std::span<std::vector<double>* const> gin) {
                       for (std::size_t k = 0; k < gin.size(); ++k) {
                         if (!gin[k]) continue;
                         auto& gp = *gin[k];
                         const std::size_t n = self.inputs[k]->value.size();
                         for (std::size_t i = 0; i < n; ++i) gp[i] += g[offsets[k] + i];
                       }
                     });
}

Tensor slice(const Tensor& x, std::size_t begin, std::size_t end) {
  const Shape& xs = x.shape();
  if (xs.empty() || begin >= end || end > xs[0]) {
    shape_fail("slice", "rows [" + std::to_string(begin) + ", " + std::to_string(end) +
                            ") of " + shape_string(xs));
  }
  const std::size_t stride = x.size() / xs[0];
  Shape shape = xs;
  shape[0] = end - begin;
  const auto xv = x.data();
  std::vector<double> y(xv.begin() + static_cast<std::ptrdiff_t>(begin * stride),
                        xv.begin() + static_cast<std::ptrdiff_t>(end * stride));
  const std::size_t offset = begin * stride;
  return make_result("slice", std::move(shape), std::move(y), {x},
                     [offset](const Node&, std::span<const double> g,
                              std::span<std::vector<double>* const> gin) {
                       auto& gx = *gin[0];
                       for (std::size_t i = 0; i < g.size(); ++i) gx[offset + i] += g[i];
                     });
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  return make_result("sum", {}, {acc}, {x},
                     [](const Node&, std::span<const double> g,
                        std::span<std::vector<double>* const> gin) {
                       for (double& v : *gin[0]) v += g[0];
                     });
}

Tensor mean(const Tensor& x) {
  if (x.size() == 0) shape_fail("mean", "empty tensor");
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  const double n = static_cast<double>(x.size());
  return make_result("mean", {}, {acc / n}, {x},
                     [n](const Node&, std::span<const double> g,
                         std::span<std::vector<double>* const> gin) {
                       for (double& v : *gin[0]) v += g[0] / n;
                     });
}

Tensor l2norm(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v * v;
  const double norm = std::sqrt(acc);
  return make_result("l2norm", {}, {norm}, {x},
                     [](const Node& self, std::span<const double> g,
                        std::span<std::vector<double>* const> gin) {
                       const double norm = self.value[0];
                       if (norm == 0.0) return;
                       auto& gx = *gin[0];
                       const auto& xv = in_value(self, 0);
                       for (std::size_t i = 0; i < xv.size(); ++i) gx[i] += g[0] * xv[i] / norm;
                     });
}

Tensor dropout(const Tensor& x, double rate, bool training, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0)) shape_fail("dropout", "rate must lie in [0, 1)");
  if (!training || rate == 0.0) return x;
  Rng rng(seed);
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.size());
  for (double& m : mask) m = rng.uniform() < rate ? 0.0 : keep_scale;
  const auto xv = x.data();
  std::vector<double> y(xv.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = xv[i] * mask[i];
  return make_result("dropout", x.shape(), std::move(y), {x},
                     [mask = std::move(mask)](const Node&, std::span<const double> g,
                                              std::span<std::vector<double>* const> gin) {
                       auto& gx = *gin[0];
                       for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * mask[i];
                     });
}

// --- verification and optimisation ----------------------------------------

GradCheckResult grad_check(const std::function<Tensor()>& f, std::span<Tensor> params,
                           double eps) {
  const Gradients grads = backward(f());
  GradCheckResult result;
  for (std::size_t p = 0; p < params.size(); ++p) {
    const std::vector<double> analytic = grads.of(params[p]);
    auto values = params[p].mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + eps;
      const double up = f().item();
      values[i] = saved - eps;
      const double down = f().item();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[i];
      const double err = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      ++result.coordinates;
      if (err > result.max_relative_error || result.coordinates == 1) {
        result.max_relative_error = err;
        result.worst_param = p;
        result.worst_index = i;
        result.analytic = a;
        result.numeric = numeric;
      }
    }
  }
  return result;
}

OptState make_opt_state(std::span<const Tensor> params, double lr, double momentum,
                        double weight_decay) {
  OptState state;
  state.lr = lr;
  state.momentum = momentum;
  state.weight_decay = weight_decay;
  state.velocity.reserve(params.size());
  for (const Tensor& p : params) state.velocity.emplace_back(p.size(), 0.0);
  return state;
}

void sgd_step(std::span<Tensor> params, const Gradients& grads, OptState& state) {
  if (state.velocity.size() != params.size()) {
    throw ShapeError("sgd_step: optimizer holds " + std::to_string(state.velocity.size()) +
                     " velocity buffers for " + std::to_string(params.size()) + " parameters");
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (state.velocity[p].size() != params[p].size()) {
      throw ShapeError("sgd_step: velocity " + std::to_string(p) + " does not match parameter " +
                       shape_string(params[p].shape()));
    }
    if (const auto* g = grads.find(params[p])) {
      if (g->size() != params[p].size()) throw ShapeError("sgd_step: gradient size mismatch");
      for (double v : *g) {
        if (!std::isfinite(v)) {
          throw NumericError("sgd_step: non-finite gradient for parameter " + std::to_string(p));
        }
      }
    }
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    const auto* g = grads.find(params[p]);
    auto theta = params[p].mutable_data();
    auto& v = state.velocity[p];
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double gi = (g ? (*g)[i] : 0.0) + state.weight_decay * theta[i];
      v[i] = state.momentum * v[i] + gi;
      theta[i] -= state.lr * v[i];
    }
  }
}

}  // namespace evpose::ad
