// Copyright 2026 The evpose Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace evpose::ad {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

struct Node;

/// Dense row-major array of doubles, optionally carrying the record of the
/// operation that produced it. Copies share the underlying node.
class Tensor {
 public:
  Tensor() = default;

  /// Constant: does not take part in differentiation.
  static Tensor constant(Shape shape, std::vector<double> data);
  static Tensor constant(Shape shape, double fill);
  static Tensor scalar(double v) { return constant({}, {v}); }

  /// Trainable leaf. Its gradient is reported by backward().
  static Tensor parameter(Shape shape, std::vector<double> data);

  bool valid() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t size() const;
  std::span<const double> data() const;
  double item() const;
  double operator[](std::size_t i) const { return data()[i]; }
  bool requires_grad() const;
  bool is_parameter() const;
  const char* kind() const;

  /// In-place access for optimizers and finite-difference probes. Only
  /// meaningful on parameters; graphs built from the old value must not be
  /// differentiated afterwards.
  std::span<double> mutable_data();

  const Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& shared_node() const { return node_; }

  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<Node> node_;
};

/// Gradient buffers for the parameters reachable from a backward() root.
class Gradients {
 public:
  /// nullptr when `param` was not reached, which means a zero gradient.
  const std::vector<double>* find(const Tensor& param) const;
  /// Copy of the gradient, zeros when unreached.
  std::vector<double> of(const Tensor& param) const;

 private:
  friend Gradients backward(const Tensor& output);
  std::unordered_map<const Node*, std::vector<double>> grads_;
};

/// Reverse-mode sweep from a scalar (shape [] or [1]). Throws ShapeError for
/// any other shape.
Gradients backward(const Tensor& output);

// Op catalogue. All raise ShapeError naming the op and the offending shapes.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  ///< elementwise
Tensor matmul(const Tensor& a, const Tensor& b);  ///< [m,k] x [k,n]

/// x: [C,H,W], w: [O,C,K,K], b: [O] -> [O,Ho,Wo] with zero padding.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride,
              std::size_t padding);
/// Non-overlapping max pooling over window x window; trailing rows/cols that
/// do not fill a window are dropped. Ties route the gradient to the first max.
Tensor maxpool2d(const Tensor& x, std::size_t window);

Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);

Tensor reshape(const Tensor& x, Shape shape);
/// Concatenation along the leading axis; trailing extents must agree.
Tensor concat(std::span<const Tensor> parts);
/// Rows [begin, end) of the leading axis.
Tensor slice(const Tensor& x, std::size_t begin, std::size_t end);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// Euclidean norm of all elements. Gradient at the origin is zero.
Tensor l2norm(const Tensor& x);

/// Inverted dropout: in training mode each element is zeroed with
/// probability `rate` and survivors are scaled by 1/(1-rate). The mask is a
/// function of (shape, rate, seed). Identity when `training` is false.
Tensor dropout(const Tensor& x, double rate, bool training, std::uint64_t seed);

/// Maximum over coordinates of |a-n| / max(1e-8, |a|+|n|), where a is the
/// backward() gradient and n the central difference (f(x+eps)-f(x-eps))/(2 eps).
struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coordinates = 0;
};

GradCheckResult grad_check(const std::function<Tensor()>& f, std::span<Tensor> params,
                           double eps);

struct OptState {
  std::vector<std::vector<double>> velocity;
  double lr = 1e-5;
  double momentum = 0.9;
  double weight_decay = 1e-6;
};

/// Zero velocities shaped like `params`.
OptState make_opt_state(std::span<const Tensor> params, double lr, double momentum,
                        double weight_decay);

/// Classical momentum with weight decay folded into the gradient:
///   g' = g + wd * theta;  v = mu * v + g';  theta -= lr * v.
/// Throws NumericError, leaving everything untouched, if any gradient is
/// non-finite.
void sgd_step(std::span<Tensor> params, const Gradients& grads, OptState& state);

}  // namespace evpose::ad
