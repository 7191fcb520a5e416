// Copyright 2026 The voxtrace Authors.
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

// A small dense tensor with tape-free reverse-mode differentiation.
//
// Every op allocates a result node that keeps shared ownership of its inputs
// and a closure that pushes the result's gradient into them. backward() on a
// scalar topologically sorts the reachable nodes, runs each closure once in
// reverse order and then releases the interior of the graph; leaf gradients
// accumulate until zero_grad().
//
// Tensor<float> is the default for training; Tensor<double> exists so that
// finite-difference gradient checks have enough precision.

#ifndef VOXTRACE_TENSOR_H_
#define VOXTRACE_TENSOR_H_

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace voxtrace::ag {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;
  bool requires_grad = false;
  bool is_leaf = true;
  bool consumed = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  std::span<T> grad_buffer() {
    if (grad.empty()) grad.assign(value.size(), T(0));
    return grad;
  }
};

template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, T value, bool requires_grad = false);
  static Tensor from_values(Shape shape, std::vector<T> values,
                           bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t numel() const { return node_->value.size(); }

  std::span<const T> values() const { return node_->value; }
  // Leaf tensors only; interior values belong to the graph.
  std::span<T> mutable_values();
  T item() const;
  T at(std::size_t r, std::size_t c) const;

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  // Empty span when no gradient has reached this tensor.
  std::span<const T> grad() const { return node_->grad; }
  void zero_grad() { node_->grad.clear(); }

  // Throws NotScalar unless numel() == 1, GraphError if the graph was already
  // consumed by an earlier call or nothing in it requires a gradient.
  void backward();

  Node<T>* node() const { return node_.get(); }
  const std::shared_ptr<Node<T>>& node_ptr() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

bool grad_enabled();

// Disables graph recording in the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// 2-D [n,k] x [k,m].
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
// Same shape, or b is a row vector ([n] or [1,n]) broadcast over a's rows.
template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
// Elementwise, same shape.
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& a, T factor);
template <typename T> Tensor<T> add_scalar(const Tensor<T>& a, T offset);
// Along the last dimension; all other dimensions must agree.
template <typename T> Tensor<T> concat(const std::vector<Tensor<T>>& parts);
// Columns [begin, end) of the last dimension.
template <typename T> Tensor<T> slice(const Tensor<T>& a, std::size_t begin, std::size_t end);
template <typename T> Tensor<T> reshape(const Tensor<T>& a, Shape shape);
template <typename T> Tensor<T> transpose(const Tensor<T>& a);
template <typename T> Tensor<T> sigmoid(const Tensor<T>& a);
// Exact (erf) form.
template <typename T> Tensor<T> gelu(const Tensor<T>& a);
template <typename T> Tensor<T> log(const Tensor<T>& a);
template <typename T> Tensor<T> exp(const Tensor<T>& a);
template <typename T> Tensor<T> clamp(const Tensor<T>& a, T lo, T hi);
template <typename T> Tensor<T> softmax(const Tensor<T>& a, std::size_t axis);
// Keeps the reduced axis with extent 1.
template <typename T> Tensor<T> logsumexp(const Tensor<T>& a, std::size_t axis);
template <typename T> Tensor<T> sum(const Tensor<T>& a);
template <typename T> Tensor<T> sum(const Tensor<T>& a, std::size_t axis);
template <typename T> Tensor<T> mean(const Tensor<T>& a);
template <typename T> Tensor<T> mean(const Tensor<T>& a, std::size_t axis);
// Normalizes over the last dimension, then applies gamma * x_hat + beta.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma,
                     const Tensor<T>& beta, T eps = T(1e-5));

#define VOXTRACE_DECLARE_TENSOR_OPS(T)                                              \
  extern template class Tensor<T>;                                                  \
  extern template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);             \
  extern template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                \
  extern template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                \
  extern template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                \
  extern template Tensor<T> scale(const Tensor<T>&, T);                             \
  extern template Tensor<T> add_scalar(const Tensor<T>&, T);                        \
  extern template Tensor<T> concat(const std::vector<Tensor<T>>&);                  \
  extern template Tensor<T> slice(const Tensor<T>&, std::size_t, std::size_t);      \
  extern template Tensor<T> reshape(const Tensor<T>&, Shape);                       \
  extern template Tensor<T> transpose(const Tensor<T>&);                            \
  extern template Tensor<T> sigmoid(const Tensor<T>&);                              \
  extern template Tensor<T> gelu(const Tensor<T>&);                                 \
  extern template Tensor<T> log(const Tensor<T>&);                                  \
  extern template Tensor<T> exp(const Tensor<T>&);                                  \
  extern template Tensor<T> clamp(const Tensor<T>&, T, T);                          \
  extern template Tensor<T> softmax(const Tensor<T>&, std::size_t);                 \
  extern template Tensor<T> logsumexp(const Tensor<T>&, std::size_t);               \
  extern template Tensor<T> sum(const Tensor<T>&);                                  \
  extern template Tensor<T> sum(const Tensor<T>&, std::size_t);                     \
  extern template Tensor<T> mean(const Tensor<T>&);                                 \
  extern template Tensor<T> mean(const Tensor<T>&, std::size_t);                    \
  extern template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&,          \
                                       const Tensor<T>&, T)

VOXTRACE_DECLARE_TENSOR_OPS(float);
VOXTRACE_DECLARE_TENSOR_OPS(double);

#undef VOXTRACE_DECLARE_TENSOR_OPS

}  // namespace voxtrace::ag

#endif  // VOXTRACE_TENSOR_H_
