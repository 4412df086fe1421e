// Copyright 2026 The sslcalib Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SSLCALIB_TENSOR_HPP_
#define SSLCALIB_TENSOR_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sslcalib {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised whenever a forward or backward pass produces NaN or Inf.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

struct TensorNode {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until a gradient is accumulated
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<TensorNode>> parents;
  // Propagates this node's grad into its parents' grads.
  std::function<void(TensorNode&)> backward_fn;

  bool is_leaf() const { return parents.empty(); }
  std::vector<double>& ensure_grad();
};

}  // namespace detail

// Dense row-major tensor of rank 1 or 2 with reverse-mode differentiation.
// Copies share storage (handle semantics); use clone() for a deep copy.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor vector(std::vector<double> values, bool requires_grad = false);
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> values, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;
  // Leading (batch) dimension; 1 for rank-1 tensors.
  std::size_t rows() const;
  // Trailing dimension.
  std::size_t cols() const;

  std::span<const double> data() const;
  // Mutable view for in-place updates of leaves (parameters, buffers).
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t r, std::size_t c) const;
  double operator[](std::size_t i) const { return data()[i]; }

  bool requires_grad() const;
  void set_requires_grad(bool value);
  bool has_grad() const;
  std::span<const double> grad() const;
  void clear_grad();

  const char* op_name() const;
  bool is_leaf() const;

  // New leaf holding a copy of the values, outside any graph.
  Tensor detach() const;
  // Deep copy of values and the requires_grad flag; no graph, no grad.
  Tensor clone() const;

  const std::shared_ptr<detail::TensorNode>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::TensorNode> node)
      : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::TensorNode> node_;
};

// Disables graph recording on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// ---- forward ops ---------------------------------------------------------
// Elementwise binary ops accept equal shapes, or a rank-1 / 1xC right operand
// broadcast across the rows of a RxC left operand.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
// Row-wise over the trailing dimension.
Tensor softmax(const Tensor& x);
Tensor log_softmax(const Tensor& x);
// Reductions over every element; result has shape {1}.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
// Concatenates rank-2 tensors with equal row counts along columns.
Tensor concat(std::span<const Tensor> parts);
Tensor concat(std::initializer_list<Tensor> parts);

// Inverted dropout: each element is zeroed with probability `rate` and the
// survivors are scaled by 1/(1-rate). The mask is a pure function of `seed`.
Tensor dropout(const Tensor& x, double rate, std::uint64_t seed);

// Mean over rows of -sum_c target[r,c] * log_softmax(logits)[r,c].
// `targets` is treated as a constant.
Tensor soft_cross_entropy(const Tensor& logits, const Tensor& targets);

// ---- differentiation and optimisation ------------------------------------

// Accumulates d(loss)/d(leaf) into every reachable leaf that requires grad.
void backward(const Tensor& loss);

// param <- param - lr * grad, then clears the grad.
void sgd_step(std::span<Tensor> params, double lr);

}  // namespace sslcalib

#endif  // SSLCALIB_TENSOR_HPP_
