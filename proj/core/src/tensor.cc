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

#include "voxtrace/tensor.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_set>

#include "voxtrace/errors.h"

namespace voxtrace::ag {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

namespace {

thread_local bool g_grad_enabled = true;

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + to_string(a) +
                   " and " + to_string(b));
}

[[noreturn]] void shape_error(const char* op, const Shape& a, const std::string& why) {
  throw ShapeError(std::string(op) + ": shape " + to_string(a) + " " + why);
}

template <typename T>
std::shared_ptr<Node<T>> new_node(Shape shape, std::vector<T> value) {
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  return node;
}

// Wraps a freshly computed value as an interior node. The backward closure is
// only kept when gradients are being recorded and some input needs one.
template <typename T, typename Fn>
Tensor<T> make_result(Shape shape, std::vector<T> value,
                      const std::vector<const Tensor<T>*>& inputs, Fn&& fn) {
  auto node = new_node<T>(std::move(shape), std::move(value));
  node->is_leaf = false;
  if (g_grad_enabled) {
    bool any = false;
    for (const auto* in : inputs) any = any || in->requires_grad();
    if (any) {
      node->requires_grad = true;
      for (const auto* in : inputs) node->parents.push_back(in->node_ptr());
      node->backward_fn = std::forward<Fn>(fn);
    }
  }
  return Tensor<T>(std::move(node));
}

// Splits a shape around `axis` into (outer, extent, inner) strides.
struct AxisSplit {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) shape_error(op, shape, "has no axis " + std::to_string(axis));
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

std::size_t last_dim(const Shape& shape) { return shape.empty() ? 1 : shape.back(); }

template <typename T>
bool is_row_vector_for(const Tensor<T>& a, const Tensor<T>& b) {
  const std::size_t cols = last_dim(a.shape());
  if (b.numel() != cols || a.rank() == 0) return false;
  return (b.rank() == 1) || (b.rank() == 2 && b.dim(0) == 1);
}

}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), T(0), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
  const std::size_t n = ag::numel(shape);
  auto node = new_node<T>(std::move(shape), std::vector<T>(n, value));
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

template <typename T>
Tensor<T> Tensor<T>::from_values(Shape shape, std::vector<T> values, bool requires_grad) {
  if (ag::numel(shape) != values.size()) {
    throw ShapeError("from_values: shape " + to_string(shape) + " needs " +
                     std::to_string(ag::numel(shape)) + " values, got " +
                     std::to_string(values.size()));
  }
  auto node = new_node<T>(std::move(shape), std::move(values));
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return from_values({}, {value}, requires_grad);
}

template <typename T>
std::span<T> Tensor<T>::mutable_values() {
  if (!node_->is_leaf) throw GraphError("cannot mutate the value of an interior node");
  return node_->value;
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) throw NotScalar("item() on tensor of shape " + to_string(shape()));
  return node_->value[0];
}

template <typename T>
T Tensor<T>::at(std::size_t r, std::size_t c) const {
  if (rank() != 2) throw ShapeError("at(r, c) needs a 2-D tensor, got " + to_string(shape()));
  return node_->value.at(r * dim(1) + c);
}

template <typename T>
void Tensor<T>::backward() {
  if (numel() != 1) {
    throw NotScalar("backward() needs a scalar loss, got shape " + to_string(shape()));
  }
  if (node_->consumed) {
    throw GraphError("backward() already ran on this graph; rebuild it first");
  }
  if (!node_->requires_grad) {
    throw GraphError("loss does not depend on any tensor that requires a gradient");
  }

  // Owning references keep interior nodes alive while their parents are released.
  std::vector<std::shared_ptr<Node<T>>> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<std::shared_ptr<Node<T>>, std::size_t>> stack{{node_, 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      const auto& parent = node->parents[next++];
      if (parent->requires_grad && seen.insert(parent.get()).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(std::move(node));
      stack.pop_back();
    }
  }

  node_->grad_buffer()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* node = it->get();
    if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
    if (!node->is_leaf) {
      node->backward_fn = nullptr;
      node->parents.clear();
      node->grad.clear();
      node->grad.shrink_to_fit();
      node->consumed = true;
    }
  }
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    shape_error("matmul", a.shape(), b.shape());
  }
  const std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
  std::vector<T> out(n * m, T(0));
  const T* av = a.values().data();
  const T* bv = b.values().data();
  for (std::size_t i = 0; i < n; ++i) {
    T* row = out.data() + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const T s = av[i * k + p];
      const T* brow = bv + p * m;
      for (std::size_t j = 0; j < m; ++j) row[j] += s * brow[j];
    }
  }
  Node<T>* pa = a.node();
  Node<T>* pb = b.node();
  return make_result<T>({n, m}, std::move(out), {&a, &b}, [pa, pb, n, k, m](Node<T>& self) {
    const T* g = self.grad.data();
    if (pa->requires_grad) {
      T* ga = pa->grad_buffer().data();
      const T* bv = pb->value.data();
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          T acc = T(0);
          const T* grow = g + i * m;
          const T* brow = bv + p * m;
          for (std::size_t j = 0; j < m; ++j) acc += grow[j] * brow[j];
          ga[i * k + p] += acc;
        }
      }
    }
    if (pb->requires_grad) {
      T* gb = pb->grad_buffer().data();
      const T* av = pa->value.data();
      for (std::size_t i = 0; i < n; ++i) {
        const T* grow = g + i * m;
        for (std::size_t p = 0; p < k; ++p) {
          const T s = av[i * k + p];
          T* gbrow = gb + p * m;
          for (std::size_t j = 0; j < m; ++j) gbrow[j] += s * grow[j];
        }
      }
    }
  });
}

namespace {

template <typename T>
Tensor<T> add_or_sub(const Tensor<T>& a, const Tensor<T>& b, T sign, const char* op) {
  if (a.shape() == b.shape()) {
    std::vector<T> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + sign * b.values()[i];
    Node<T>* pa = a.node();
    Node<T>* pb = b.node();
    return make_result<T>(a.shape(), std::move(out), {&a, &b}, [pa, pb, sign](Node<T>& self) {
      if (pa->requires_grad) {
        auto ga = pa->grad_buffer();
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i];
      }
      if (pb->requires_grad) {
        auto gb = pb->grad_buffer();
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += sign * self.grad[i];
      }
    });
  }
  if (!is_row_vector_for(a, b)) shape_error(op, a.shape(), b.shape());
  const std::size_t cols = last_dim(a.shape());
  const std::size_t rows = a.numel() / cols;
  std::vector<T> out(a.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      out[r * cols + c] = a.values()[r * cols + c] + sign * b.values()[c];
    }
  }
  Node<T>* pa = a.node();
  Node<T>* pb = b.node();
  return make_result<T>(a.shape(), std::move(out), {&a, &b},
                        [pa, pb, sign, rows, cols](Node<T>& self) {
                          if (pa->requires_grad) {
                            auto ga = pa->grad_buffer();
                            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i];
                          }
                          if (pb->requires_grad) {
                            auto gb = pb->grad_buffer();
                            for (std::size_t r = 0; r < rows; ++r) {
                              for (std::size_t c = 0; c < cols; ++c) {
                                gb[c] += sign * self.grad[r * cols + c];
                              }
                            }
                          }
                        });
}

// Shared scaffolding for elementwise unary maps: forward value f(x), and a
// local derivative expressed through (x, y).
template <typename T, typename Fwd, typename Deriv>
Tensor<T> unary(const Tensor<T>& a, Fwd fwd, Deriv deriv) {
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(a.values()[i]);
  Node<T>* pa = a.node();
  return make_result<T>(a.shape(), std::move(out), {&a}, [pa, deriv](Node<T>& self) {
    auto ga = pa->grad_buffer();
    for (std::size_t i = 0; i < ga.size(); ++i) {
      ga[i] += self.grad[i] * deriv(pa->value[i], self.value[i]);
    }
  });
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return add_or_sub(a, b, T(1), "add");
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return add_or_sub(a, b, T(-1), "sub");
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) shape_error("mul", a.shape(), b.shape());
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * b.values()[i];
  Node<T>* pa = a.node();
  Node<T>* pb = b.node();
  return make_result<T>(a.shape(), std::move(out), {&a, &b}, [pa, pb](Node<T>& self) {
    if (pa->requires_grad) {
      auto ga = pa->grad_buffer();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i] * pb->value[i];
    }
    if (pb->requires_grad) {
      auto gb = pb->grad_buffer();
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += self.grad[i] * pa->value[i];
    }
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  return unary(a, [factor](T x) { return x * factor; },
               [factor](T, T) { return factor; });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T offset) {
  return unary(a, [offset](T x) { return x + offset; }, [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = parts.front().shape();
  if (first.empty()) shape_error("concat", first, "is a scalar");
  const std::size_t rows = parts.front().numel() / first.back();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != first.size() ||
        !std::equal(s.begin(), s.end() - 1, first.begin(), first.end() - 1)) {
      shape_error("concat", first, s);
    }
    widths.push_back(s.back());
    total += s.back();
  }
  std::vector<T> out(rows * total);
  std::size_t offset = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto v = parts[i].values();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(v.data() + r * widths[i], widths[i], out.data() + r * total + offset);
    }
    offset += widths[i];
  }
  Shape shape = first;
  shape.back() = total;
  std::vector<const Tensor<T>*> inputs;
  std::vector<Node<T>*> nodes;
  for (const auto& p : parts) {
    inputs.push_back(&p);
    nodes.push_back(p.node());
  }
  return make_result<T>(std::move(shape), std::move(out), inputs,
                        [nodes, widths, rows, total](Node<T>& self) {
                          std::size_t off = 0;
                          for (std::size_t i = 0; i < nodes.size(); ++i) {
                            if (nodes[i]->requires_grad) {
                              auto g = nodes[i]->grad_buffer();
                              for (std::size_t r = 0; r < rows; ++r) {
                                for (std::size_t c = 0; c < widths[i]; ++c) {
                                  g[r * widths[i] + c] += self.grad[r * total + off + c];
                                }
                              }
                            }
                            off += widths[i];
                          }
                        });
}

template <typename T>
Tensor<T> slice(const Tensor<T>& a, std::size_t begin, std::size_t end) {
  const Shape& s = a.shape();
  if (s.empty() || begin >= end || end > s.back()) {
    shape_error("slice", s,
                "cannot take columns [" + std::to_string(begin) + ", " + std::to_string(end) + ")");
  }
  const std::size_t cols = s.back();
  const std::size_t rows = a.numel() / cols;
  const std::size_t width = end - begin;
  std::vector<T> out(rows * width);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(a.values().data() + r * cols + begin, width, out.data() + r * width);
  }
  Shape shape = s;
  shape.back() = width;
  Node<T>* pa = a.node();
  return make_result<T>(std::move(shape), std::move(out), {&a},
                        [pa, rows, cols, begin, width](Node<T>& self) {
                          auto g = pa->grad_buffer();
                          for (std::size_t r = 0; r < rows; ++r) {
                            for (std::size_t c = 0; c < width; ++c) {
                              g[r * cols + begin + c] += self.grad[r * width + c];
                            }
                          }
                        });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  if (ag::numel(shape) != a.numel()) shape_error("reshape", a.shape(), shape);
  std::vector<T> out(a.values().begin(), a.values().end());
  Node<T>* pa = a.node();
  return make_result<T>(std::move(shape), std::move(out), {&a}, [pa](Node<T>& self) {
    auto g = pa->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  if (a.rank() != 2) shape_error("transpose", a.shape(), "is not 2-D");
  const std::size_t n = a.dim(0), m = a.dim(1);
  std::vector<T> out(n * m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) out[j * n + i] = a.values()[i * m + j];
  }
  Node<T>* pa = a.node();
  return make_result<T>({m, n}, std::move(out), {&a}, [pa, n, m](Node<T>& self) {
    auto g = pa->grad_buffer();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) g[i * m + j] += self.grad[j * n + i];
    }
  });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  return unary(
      a,
      [](T x) {
        if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
        const T e = std::exp(x);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& a) {
  constexpr T kInvSqrt2 = T(1) / std::numbers::sqrt2_v<T>;
  constexpr T kInvSqrt2Pi = std::numbers::inv_sqrtpi_v<T> * kInvSqrt2;
  return unary(
      a, [](T x) { return T(0.5) * x * (T(1) + std::erf(x * kInvSqrt2)); },
      [](T x, T) {
        const T cdf = T(0.5) * (T(1) + std::erf(x * kInvSqrt2));
        const T pdf = kInvSqrt2Pi * std::exp(T(-0.5) * x * x);
        return cdf + x * pdf;
      });
}

template <typename T>
Tensor<T> log(const Tensor<T>& a) {
  return unary(a, [](T x) { return std::log(x); }, [](T x, T) { return T(1) / x; });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& a) {
  return unary(a, [](T x) { return std::exp(x); }, [](T, T y) { return y; });
}

template <typename T>
Tensor<T> clamp(const Tensor<T>& a, T lo, T hi) {
  return unary(
      a, [lo, hi](T x) { return std::clamp(x, lo, hi); },
      [lo, hi](T x, T) { return (x >= lo && x <= hi) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& a, std::size_t axis) {
  const AxisSplit s = split_axis(a.shape(), axis, "softmax");
  std::vector<T> out(a.numel());
  const T* x = a.values().data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.extent * s.inner + in;
      T mx = x[base];
      for (std::size_t k = 1; k < s.extent; ++k) mx = std::max(mx, x[base + k * s.inner]);
      T total = T(0);
      for (std::size_t k = 0; k < s.extent; ++k) {
        const T e = std::exp(x[base + k * s.inner] - mx);
        out[base + k * s.inner] = e;
        total += e;
      }
      for (std::size_t k = 0; k < s.extent; ++k) out[base + k * s.inner] /= total;
    }
  }
  Node<T>* pa = a.node();
  return make_result<T>(a.shape(), std::move(out), {&a}, [pa, s](Node<T>& self) {
    auto g = pa->grad_buffer();
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t in = 0; in < s.inner; ++in) {
        const std::size_t base = o * s.extent * s.inner + in;
        T dot = T(0);
        for (std::size_t k = 0; k < s.extent; ++k) {
          const std::size_t i = base + k * s.inner;
          dot += self.grad[i] * self.value[i];
        }
        for (std::size_t k = 0; k < s.extent; ++k) {
          const std::size_t i = base + k * s.inner;
          g[i] += self.value[i] * (self.grad[i] - dot);
        }
      }
    }
  });
}

template <typename T>
Tensor<T> logsumexp(const Tensor<T>& a, std::size_t axis) {
  const AxisSplit s = split_axis(a.shape(), axis, "logsumexp");
  std::vector<T> out(s.outer * s.inner);
  const T* x = a.values().data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.extent * s.inner + in;
      T mx = x[base];
      for (std::size_t k = 1; k < s.extent; ++k) mx = std::max(mx, x[base + k * s.inner]);
      T total = T(0);
      for (std::size_t k = 0; k < s.extent; ++k) total += std::exp(x[base + k * s.inner] - mx);
      out[o * s.inner + in] = mx + std::log(total);
    }
  }
  Shape shape = a.shape();
  shape[axis] = 1;
  Node<T>* pa = a.node();
  return make_result<T>(std::move(shape), std::move(out), {&a}, [pa, s](Node<T>& self) {
    auto g = pa->grad_buffer();
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t in = 0; in < s.inner; ++in) {
        const std::size_t base = o * s.extent * s.inner + in;
        const T lse = self.value[o * s.inner + in];
        const T go = self.grad[o * s.inner + in];
        for (std::size_t k = 0; k < s.extent; ++k) {
          const std::size_t i = base + k * s.inner;
          g[i] += go * std::exp(pa->value[i] - lse);
        }
      }
    }
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  T total = T(0);
  for (T v : a.values()) total += v;
  Node<T>* pa = a.node();
  return make_result<T>({}, {total}, {&a}, [pa](Node<T>& self) {
    auto g = pa->grad_buffer();
    for (auto& gi : g) gi += self.grad[0];
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a, std::size_t axis) {
  const AxisSplit s = split_axis(a.shape(), axis, "sum");
  std::vector<T> out(s.outer * s.inner, T(0));
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t k = 0; k < s.extent; ++k) {
      for (std::size_t in = 0; in < s.inner; ++in) {
        out[o * s.inner + in] += a.values()[(o * s.extent + k) * s.inner + in];
      }
    }
  }
  Shape shape = a.shape();
  shape[axis] = 1;
  Node<T>* pa = a.node();
  return make_result<T>(std::move(shape), std::move(out), {&a}, [pa, s](Node<T>& self) {
    auto g = pa->grad_buffer();
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t k = 0; k < s.extent; ++k) {
        for (std::size_t in = 0; in < s.inner; ++in) {
          g[(o * s.extent + k) * s.inner + in] += self.grad[o * s.inner + in];
        }
      }
    }
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  return scale(sum(a), T(1) / static_cast<T>(a.numel()));
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a, std::size_t axis) {
  const AxisSplit s = split_axis(a.shape(), axis, "mean");
  return scale(sum(a, axis), T(1) / static_cast<T>(s.extent));
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     T eps) {
  if (x.rank() == 0) shape_error("layer_norm", x.shape(), "is a scalar");
  const std::size_t d = x.shape().back();
  if (gamma.numel() != d) shape_error("layer_norm", x.shape(), gamma.shape());
  if (beta.numel() != d) shape_error("layer_norm", x.shape(), beta.shape());
  const std::size_t rows = x.numel() / d;

  std::vector<T> out(x.numel());
  std::vector<T> x_hat(x.numel());
  std::vector<T> inv_std(rows);
  const T* xv = x.values().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = xv + r * d;
    T mu = T(0);
    for (std::size_t c = 0; c < d; ++c) mu += row[c];
    mu /= static_cast<T>(d);
    T var = T(0);
    for (std::size_t c = 0; c < d; ++c) var += (row[c] - mu) * (row[c] - mu);
    var /= static_cast<T>(d);
    const T is = T(1) / std::sqrt(var + eps);
    inv_std[r] = is;
    for (std::size_t c = 0; c < d; ++c) {
      const T h = (row[c] - mu) * is;
      x_hat[r * d + c] = h;
      out[r * d + c] = gamma.values()[c] * h + beta.values()[c];
    }
  }

  Node<T>* px = x.node();
  Node<T>* pg = gamma.node();
  Node<T>* pb = beta.node();
  return make_result<T>(
      x.shape(), std::move(out), {&x, &gamma, &beta},
      [px, pg, pb, rows, d, x_hat = std::move(x_hat), inv_std = std::move(inv_std)](
          Node<T>& self) {
        const T* g = self.grad.data();
        if (pg->requires_grad) {
          auto gg = pg->grad_buffer();
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < d; ++c) gg[c] += g[r * d + c] * x_hat[r * d + c];
          }
        }
        if (pb->requires_grad) {
          auto gb = pb->grad_buffer();
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < d; ++c) gb[c] += g[r * d + c];
          }
        }
        if (px->requires_grad) {
          auto gx = px->grad_buffer();
          const T inv_d = T(1) / static_cast<T>(d);
          for (std::size_t r = 0; r < rows; ++r) {
            T mean_dh = T(0);
            T mean_dh_h = T(0);
            for (std::size_t c = 0; c < d; ++c) {
              const T dh = g[r * d + c] * pg->value[c];
              mean_dh += dh;
              mean_dh_h += dh * x_hat[r * d + c];
            }
            mean_dh *= inv_d;
            mean_dh_h *= inv_d;
            for (std::size_t c = 0; c < d; ++c) {
              const T dh = g[r * d + c] * pg->value[c];
              gx[r * d + c] += inv_std[r] * (dh - mean_dh - x_hat[r * d + c] * mean_dh_h);
            }
          }
        }
      });
}

#define VOXTRACE_INSTANTIATE_TENSOR_OPS(T)                                         \
  template class Tensor<T>;                                                        \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                   \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                      \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                      \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                      \
  template Tensor<T> scale(const Tensor<T>&, T);                                   \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                              \
  template Tensor<T> concat(const std::vector<Tensor<T>>&);                        \
  template Tensor<T> slice(const Tensor<T>&, std::size_t, std::size_t);            \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                             \
  template Tensor<T> transpose(const Tensor<T>&);                                  \
  template Tensor<T> sigmoid(const Tensor<T>&);                                    \
  template Tensor<T> gelu(const Tensor<T>&);                                       \
  template Tensor<T> log(const Tensor<T>&);                                        \
  template Tensor<T> exp(const Tensor<T>&);                                        \
  template Tensor<T> clamp(const Tensor<T>&, T, T);                                \
  template Tensor<T> softmax(const Tensor<T>&, std::size_t);                       \
  template Tensor<T> logsumexp(const Tensor<T>&, std::size_t);                     \
  template Tensor<T> sum(const Tensor<T>&);                                        \
  template Tensor<T> sum(const Tensor<T>&, std::size_t);                           \
  template Tensor<T> mean(const Tensor<T>&);                                       \
  template Tensor<T> mean(const Tensor<T>&, std::size_t);                          \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T)

VOXTRACE_INSTANTIATE_TENSOR_OPS(float);
VOXTRACE_INSTANTIATE_TENSOR_OPS(double);

}  // namespace voxtrace::ag
