// Copyright 2026 The figmtl Authors
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

#pragma once

// Reverse-mode automatic differentiation over dense row-major float64 arrays.
//
// A Tensor is a cheap handle onto a graph node. Operations record their
// parents and a backward rule when at least one input requires a gradient and
// gradient recording is enabled on the calling thread. backward() runs the
// rules in reverse topological order, visiting each node once; gradients
// accumulate additively across fan-out.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "figmtl/errors.hpp"
#include "figmtl/rng.hpp"

namespace figmtl::ad {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until a gradient reaches the node
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  std::vector<double>& ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

namespace detail {
inline thread_local bool grad_enabled = true;
}

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_enabled) { detail::grad_enabled = false; }
  ~NoGradGuard() { detail::grad_enabled = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

inline bool grad_enabled() { return detail::grad_enabled; }

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false) {
    if (numel(shape) != values.size()) {
      throw DimensionError("tensor data length " + std::to_string(values.size()) +
                           " does not match shape " + shape_str(shape));
    }
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
  }
  static Tensor zeros(Shape shape, bool requires_grad = false) {
    const auto n = numel(shape);
    return from(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
  }
  static Tensor full(Shape shape, double v, bool requires_grad = false) {
    const auto n = numel(shape);
    return from(std::move(shape), std::vector<double>(n, v), requires_grad);
  }
  static Tensor scalar(double v, bool requires_grad = false) {
    return from({1, 1}, {v}, requires_grad);
  }
  /// Row vector [1 x n].
  static Tensor row(std::vector<double> values, bool requires_grad = false) {
    const auto n = values.size();
    return from({1, n}, std::move(values), requires_grad);
  }
  static Tensor matrix(std::size_t r, std::size_t c, std::vector<double> values,
                       bool requires_grad = false) {
    return from({r, c}, std::move(values), requires_grad);
  }

  bool defined() const { return static_cast<bool>(node_); }
  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& node_ptr() const { return node_; }

  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->value.size(); }
  /// Rows of a rank-2 tensor; rank-1 tensors count as one row.
  std::size_t rows() const { return rank() == 2 ? shape()[0] : 1; }
  std::size_t cols() const { return rank() == 0 ? 1 : shape().back(); }

  std::span<const double> data() const { return node_->value; }
  std::span<double> mutable_data() { return node_->value; }
  std::vector<double> to_vector() const { return node_->value; }
  double operator[](std::size_t i) const { return node_->value[i]; }
  double at(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }
  double item() const {
    if (size() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
    return node_->value[0];
  }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool v) { node_->requires_grad = v; }
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const double> grad() const { return node_->grad; }
  void zero_grad() { node_->grad.clear(); }

  /// Fresh leaf holding a copy of the values.
  Tensor clone(bool requires_grad) const {
    return from(shape(), node_->value, requires_grad);
  }
  Tensor clone() const { return clone(requires_grad()); }

  void backward() const;

 private:
  std::shared_ptr<Node> node_;
};

/// Builds an operation result. The backward rule receives the result node and
/// must add into parents' gradients (use Node::ensure_grad()).
inline Tensor make_result(Shape shape, std::vector<double> values,
                          std::vector<Tensor> parents, std::function<void(Node&)> backward,
                          const char* op) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->op = op;
  bool needs = false;
  if (detail::grad_enabled) {
    for (const auto& p : parents) needs = needs || p.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(p.node_ptr());
    node->backward_fn = std::move(backward);
  }
  return Tensor(std::move(node));
}

inline void Tensor::backward() const {
  if (size() != 1) {
    throw ContractError("backward() requires a scalar, got shape " + shape_str(shape()));
  }
  // Iterative post-order DFS yields a topological order over the recorded graph.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  node_->grad.assign(1, 1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
  }
}

// ---------------------------------------------------------------------------
// shape helpers

namespace detail {

inline void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got shape " +
                         shape_str(t.shape()));
  }
}

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
  }
}

inline void require_finite(std::span<const double> v, const char* op) {
  for (double x : v) {
    if (!std::isfinite(x)) throw NumericError(std::string(op) + ": non-finite input");
  }
}

// Elementwise unary op with derivative expressed in terms of input and output.
template <typename F, typename D>
Tensor unary(const Tensor& a, F f, D dfdx, const char* op) {
  std::vector<double> out(a.size());
  const auto in = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  auto pa = a.node_ptr();
  return make_result(
      a.shape(), std::move(out), {a},
      [pa, dfdx](Node& self) {
        auto& g = pa->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) {
          g[i] += self.grad[i] * dfdx(pa->value[i], self.value[i]);
        }
      },
      op);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// linear algebra

/// C[r x c] = A[r x k] * B[k x c]
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  detail::require_rank2(a, "matmul");
  detail::require_rank2(b, "matmul");
  const std::size_t r = a.shape()[0], k = a.shape()[1], c = b.shape()[1];
  if (b.shape()[0] != k) {
    throw DimensionError("matmul: inner dimensions disagree, " + shape_str(a.shape()) +
                         " x " + shape_str(b.shape()));
  }
  std::vector<double> out(r * c, 0.0);
  const double* A = a.data().data();
  const double* B = b.data().data();
  for (std::size_t i = 0; i < r; ++i) {
    double* crow = out.data() + i * c;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      const double* brow = B + p * c;
      for (std::size_t j = 0; j < c; ++j) crow[j] += av * brow[j];
    }
  }
  auto pa = a.node_ptr();
  auto pb = b.node_ptr();
  return make_result(
      {r, c}, std::move(out), {a, b},
      [pa, pb, r, k, c](Node& self) {
        const double* G = self.grad.data();
        if (pa->requires_grad) {
          // dA = dC * B^T
          auto& ga = pa->ensure_grad();
          const double* Bv = pb->value.data();
          for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t p = 0; p < k; ++p) {
              double s = 0.0;
              const double* brow = Bv + p * c;
              const double* grow = G + i * c;
              for (std::size_t j = 0; j < c; ++j) s += grow[j] * brow[j];
              ga[i * k + p] += s;
            }
          }
        }
        if (pb->requires_grad) {
          // dB = A^T * dC
          auto& gb = pb->ensure_grad();
          const double* Av = pa->value.data();
          for (std::size_t i = 0; i < r; ++i) {
            const double* grow = G + i * c;
            for (std::size_t p = 0; p < k; ++p) {
              const double av = Av[i * k + p];
              double* gbrow = gb.data() + p * c;
              for (std::size_t j = 0; j < c; ++j) gbrow[j] += av * grow[j];
            }
          }
        }
      },
      "matmul");
}

inline Tensor transpose(const Tensor& a) {
  detail::require_rank2(a, "transpose");
  const std::size_t r = a.shape()[0], c = a.shape()[1];
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = a.data()[i * c + j];
  auto pa = a.node_ptr();
  return make_result(
      {c, r}, std::move(out), {a},
      [pa, r, c](Node& self) {
        auto& g = pa->ensure_grad();
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[j * r + i];
      },
      "transpose");
}

// ---------------------------------------------------------------------------
// elementwise

inline Tensor add(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  auto pa = a.node_ptr();
  auto pb = b.node_ptr();
  return make_result(
      a.shape(), std::move(out), {a, b},
      [pa, pb](Node& self) {
        for (Node* p : {pa.get(), pb.get()}) {
          if (!p->requires_grad) continue;
          auto& g = p->ensure_grad();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
      },
      "add");
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  auto pa = a.node_ptr();
  auto pb = b.node_ptr();
  return make_result(
      a.shape(), std::move(out), {a, b},
      [pa, pb](Node& self) {
        if (pa->requires_grad) {
          auto& g = pa->ensure_grad();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
        if (pb->requires_grad) {
          auto& g = pb->ensure_grad();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
        }
      },
      "sub");
}

/// Hadamard product.
inline Tensor mul(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  auto pa = a.node_ptr();
  auto pb = b.node_ptr();
  return make_result(
      a.shape(), std::move(out), {a, b},
      [pa, pb](Node& self) {
        if (pa->requires_grad) {
          auto& g = pa->ensure_grad();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb->value[i];
        }
        if (pb->requires_grad) {
          auto& g = pb->ensure_grad();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa->value[i];
        }
      },
      "mul");
}

inline Tensor scale(const Tensor& a, double s) {
  return detail::unary(
      a, [s](double x) { return s * x; }, [s](double, double) { return s; }, "scale");
}

inline Tensor add_scalar(const Tensor& a, double s) {
  return detail::unary(
      a, [s](double x) { return x + s; }, [](double, double) { return 1.0; }, "add_scalar");
}

inline Tensor neg(const Tensor& a) { return scale(a, -1.0); }

/// x[r x c] + b broadcast over rows; b is [1 x c] or [c].
inline Tensor add_row_bias(const Tensor& x, const Tensor& b) {
  detail::require_rank2(x, "add_row_bias");
  const std::size_t r = x.shape()[0], c = x.shape()[1];
  if (b.size() != c || b.rows() != 1) {
    throw DimensionError("add_row_bias: bias " + shape_str(b.shape()) +
                         " does not match matrix " + shape_str(x.shape()));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] += b.data()[j];
  auto px = x.node_ptr();
  auto pb = b.node_ptr();
  return make_result(
      x.shape(), std::move(out), {x, b},
      [px, pb, r, c](Node& self) {
        if (px->requires_grad) {
          auto& g = px->ensure_grad();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
        if (pb->requires_grad) {
          auto& g = pb->ensure_grad();
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) g[j] += self.grad[i * c + j];
        }
      },
      "add_row_bias");
}

inline Tensor sigmoid(const Tensor& a) {
  return detail::unary(
      a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); }, "sigmoid");
}

inline Tensor tanh(const Tensor& a) {
  return detail::unary(
      a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; }, "tanh");
}

inline Tensor exp(const Tensor& a) {
  return detail::unary(
      a, [](double x) { return std::exp(x); }, [](double, double y) { return y; }, "exp");
}

inline Tensor log(const Tensor& a) {
  for (double x : a.data()) {
    if (!(x > 0.0)) throw NumericError("log: non-positive input");
  }
  return detail::unary(
      a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; },
      "log");
}

/// ln(1 + e^x), computed without overflow.
inline double softplus(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline Tensor softplus(const Tensor& a) {
  return detail::unary(
      a, [](double x) { return softplus(x); },
      [](double x, double) {
        return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
      },
      "softplus");
}

/// Clamp into [lo, hi]; the gradient is zero where the bound is active.
inline Tensor clamp(const Tensor& a, double lo, double hi) {
  return detail::unary(
      a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x < lo || x > hi) ? 0.0 : 1.0; }, "clamp");
}

/// GELU, tanh approximation.
inline Tensor gelu(const Tensor& a) {
  constexpr double k = 0.7978845608028654;  // sqrt(2/pi)
  constexpr double c = 0.044715;
  return detail::unary(
      a,
      [](double x) { return 0.5 * x * (1.0 + std::tanh(k * (x + c * x * x * x))); },
      [](double x, double) {
        const double u = k * (x + c * x * x * x);
        const double t = std::tanh(u);
        return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * k * (1.0 + 3.0 * c * x * x);
      },
      "gelu");
}

// ---------------------------------------------------------------------------
// reductions and normalizations

inline Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double x : a.data()) s += x;
  auto pa = a.node_ptr();
  return make_result(
      {1, 1}, {s}, {a},
      [pa](Node& self) {
        auto& g = pa->ensure_grad();
        for (double& v : g) v += self.grad[0];
      },
      "sum");
}

inline Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw ContractError("mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

/// Softmax along one axis, stabilized by subtracting the slice maximum.
/// Rank-1 tensors use axis 0; rank-2 tensors accept 0, 1 or -1.
inline Tensor softmax(const Tensor& x, int axis = -1) {
  detail::require_finite(x.data(), "softmax");
  std::size_t outer, len, stride;
  if (x.rank() == 1) {
    if (axis != 0 && axis != -1) throw ContractError("softmax: invalid axis");
    outer = 1, len = x.size(), stride = 1;
  } else if (x.rank() == 2) {
    const int ax = axis < 0 ? axis + 2 : axis;
    if (ax == 1) {
      outer = x.shape()[0], len = x.shape()[1], stride = 1;
    } else if (ax == 0) {
      outer = x.shape()[1], len = x.shape()[0], stride = x.shape()[1];
    } else {
      throw ContractError("softmax: invalid axis " + std::to_string(axis));
    }
  } else {
    throw DimensionError("softmax: unsupported shape " + shape_str(x.shape()));
  }
  // slice s covers indices base(s) + t*stride for t < len
  auto base = [len, stride](std::size_t s) { return stride == 1 ? s * len : s; };
  std::vector<double> out(x.size());
  const auto in = x.data();
  for (std::size_t s = 0; s < outer; ++s) {
    const std::size_t b = base(s);
    double m = -INFINITY;
    for (std::size_t t = 0; t < len; ++t) m = std::max(m, in[b + t * stride]);
    double z = 0.0;
    for (std::size_t t = 0; t < len; ++t) {
      const double e = std::exp(in[b + t * stride] - m);
      out[b + t * stride] = e;
      z += e;
    }
    for (std::size_t t = 0; t < len; ++t) out[b + t * stride] /= z;
  }
  auto px = x.node_ptr();
  return make_result(
      x.shape(), std::move(out), {x},
      [px, outer, len, stride, base](Node& self) {
        auto& g = px->ensure_grad();
        for (std::size_t s = 0; s < outer; ++s) {
          const std::size_t b = base(s);
          double dot = 0.0;
          for (std::size_t t = 0; t < len; ++t) {
            const std::size_t i = b + t * stride;
            dot += self.grad[i] * self.value[i];
          }
          for (std::size_t t = 0; t < len; ++t) {
            const std::size_t i = b + t * stride;
            g[i] += self.value[i] * (self.grad[i] - dot);
          }
        }
      },
      "softmax");
}

/// Row-wise layer normalization with learned scale and shift ([c] or [1 x c]).
inline Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                         double eps = 1e-5) {
  detail::require_rank2(x, "layer_norm");
  const std::size_t r = x.shape()[0], c = x.shape()[1];
  if (gamma.size() != c || beta.size() != c) {
    throw DimensionError("layer_norm: scale/shift " + shape_str(gamma.shape()) + "/" +
                         shape_str(beta.shape()) + " vs input " + shape_str(x.shape()));
  }
  std::vector<double> out(r * c);
  auto xhat = std::make_shared<std::vector<double>>(r * c);
  auto inv_std = std::make_shared<std::vector<double>>(r);
  const auto in = x.data();
  for (std::size_t i = 0; i < r; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < c; ++j) mu += in[i * c + j];
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double d = in[i * c + j] - mu;
      var += d * d;
    }
    var /= static_cast<double>(c);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[i] = is;
    for (std::size_t j = 0; j < c; ++j) {
      const double h = (in[i * c + j] - mu) * is;
      (*xhat)[i * c + j] = h;
      out[i * c + j] = gamma.data()[j] * h + beta.data()[j];
    }
  }
  auto px = x.node_ptr();
  auto pg = gamma.node_ptr();
  auto pb = beta.node_ptr();
  return make_result(
      x.shape(), std::move(out), {x, gamma, beta},
      [px, pg, pb, xhat, inv_std, r, c](Node& self) {
        const auto& G = self.grad;
        if (pg->requires_grad) {
          auto& gg = pg->ensure_grad();
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) gg[j] += G[i * c + j] * (*xhat)[i * c + j];
        }
        if (pb->requires_grad) {
          auto& gb = pb->ensure_grad();
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) gb[j] += G[i * c + j];
        }
        if (px->requires_grad) {
          auto& gx = px->ensure_grad();
          const double n = static_cast<double>(c);
          for (std::size_t i = 0; i < r; ++i) {
            double m1 = 0.0, m2 = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
              const double dh = G[i * c + j] * pg->value[j];
              m1 += dh;
              m2 += dh * (*xhat)[i * c + j];
            }
            m1 /= n;
            m2 /= n;
            for (std::size_t j = 0; j < c; ++j) {
              const double dh = G[i * c + j] * pg->value[j];
              gx[i * c + j] += (*inv_std)[i] * (dh - m1 - (*xhat)[i * c + j] * m2);
            }
          }
        }
      },
      "layer_norm");
}

// ---------------------------------------------------------------------------
// indexing

/// Gathers rows of an embedding table [V x d] for the given ids -> [n x d].
inline Tensor embedding(const Tensor& table, std::span<const std::size_t> ids) {
  detail::require_rank2(table, "embedding");
  const std::size_t v = table.shape()[0], d = table.shape()[1];
  std::vector<double> out(ids.size() * d);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= v) {
      throw VocabularyError("token id " + std::to_string(ids[i]) +
                            " is outside the vocabulary of size " + std::to_string(v));
    }
    std::copy_n(table.data().begin() + ids[i] * d, d, out.begin() + i * d);
  }
  auto pt = table.node_ptr();
  std::vector<std::size_t> idx(ids.begin(), ids.end());
  return make_result(
      {ids.size(), d}, std::move(out), {table},
      [pt, idx = std::move(idx), d](Node& self) {
        auto& g = pt->ensure_grad();
        for (std::size_t i = 0; i < idx.size(); ++i)
          for (std::size_t j = 0; j < d; ++j) g[idx[i] * d + j] += self.grad[i * d + j];
      },
      "embedding");
}

inline Tensor select_rows(const Tensor& x, std::span<const std::size_t> rows) {
  detail::require_rank2(x, "select_rows");
  for (auto r : rows) {
    if (r >= x.shape()[0]) throw DimensionError("select_rows: row index out of range");
  }
  return embedding(x, rows);
}

/// Column j of a matrix as [r x 1].
inline Tensor column(const Tensor& x, std::size_t j) {
  detail::require_rank2(x, "column");
  const std::size_t r = x.shape()[0], c = x.shape()[1];
  if (j >= c) throw DimensionError("column: index out of range for " + shape_str(x.shape()));
  std::vector<double> out(r);
  for (std::size_t i = 0; i < r; ++i) out[i] = x.data()[i * c + j];
  auto px = x.node_ptr();
  return make_result(
      {r, 1}, std::move(out), {x},
      [px, r, c, j](Node& self) {
        auto& g = px->ensure_grad();
        for (std::size_t i = 0; i < r; ++i) g[i * c + j] += self.grad[i];
      },
      "column");
}

/// Stacks matrices with equal column counts vertically.
inline Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("concat_rows: no inputs");
  const std::size_t c = parts[0].cols();
  std::size_t r = 0;
  for (const auto& p : parts) {
    if (p.cols() != c) throw DimensionError("concat_rows: column counts differ");
    r += p.rows();
  }
  std::vector<double> out;
  out.reserve(r * c);
  std::vector<std::shared_ptr<Node>> nodes;
  for (const auto& p : parts) {
    out.insert(out.end(), p.data().begin(), p.data().end());
    nodes.push_back(p.node_ptr());
  }
  return make_result(
      {r, c}, std::move(out), std::vector<Tensor>(parts.begin(), parts.end()),
      [nodes](Node& self) {
        std::size_t off = 0;
        for (const auto& p : nodes) {
          if (p->requires_grad) {
            auto& g = p->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[off + i];
          }
          off += p->value.size();
        }
      },
      "concat_rows");
}

// ---------------------------------------------------------------------------
// stochastic

/// Inverted dropout; identity when rate is 0.
inline Tensor dropout(const Tensor& x, double rate, Rng& rng) {
  if (rate <= 0.0) return x;
  const double keep = 1.0 - rate;
  std::vector<double> mask(x.size());
  for (auto& m : mask) m = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
  return mul(x, Tensor::from(x.shape(), std::move(mask)));
}

// ---------------------------------------------------------------------------
// attention

/// A contiguous block of rows forming one sequence in a packed batch. Keys at
/// positions >= valid are masked out; rows past `valid` are padding queries.
struct Segment {
  std::size_t offset = 0;
  std::size_t length = 0;
  std::size_t valid = 0;
};

/// Attention probabilities for one packed batch: probs[segment][head] is a
/// length x length row-major matrix.
using AttentionProbs = std::vector<std::vector<std::vector<double>>>;

/// Scaled dot-product multi-head attention over packed sequences.
/// q, k, v are [N x d]; heads split d into equal column blocks. Returns the
/// concatenated per-head outputs [N x d]. Masked keys get probability exactly 0.
inline Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                   std::span<const Segment> segments, std::size_t heads,
                                   AttentionProbs* record = nullptr) {
  detail::require_rank2(q, "attention");
  detail::require_same_shape(q, k, "attention");
  detail::require_same_shape(q, v, "attention");
  const std::size_t n = q.shape()[0], d = q.shape()[1];
  if (heads == 0 || d % heads != 0) {
    throw ContractError("attention: model width " + std::to_string(d) +
                        " is not divisible by head count " + std::to_string(heads));
  }
  const std::size_t dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  for (const auto& s : segments) {
    if (s.offset + s.length > n || s.valid == 0 || s.valid > s.length) {
      throw ContractError("attention: invalid segment");
    }
  }
  const double* Q = q.data().data();
  const double* K = k.data().data();
  const double* V = v.data().data();
  std::vector<double> out(n * d, 0.0);
  auto probs = std::make_shared<AttentionProbs>(segments.size());
  std::vector<double> scores;
  for (std::size_t si = 0; si < segments.size(); ++si) {
    const auto& s = segments[si];
    const std::size_t L = s.length;
    (*probs)[si].resize(heads);
    for (std::size_t h = 0; h < heads; ++h) {
      auto& P = (*probs)[si][h];
      P.assign(L * L, 0.0);
      const std::size_t col = h * dh;
      for (std::size_t i = 0; i < L; ++i) {
        const double* qi = Q + (s.offset + i) * d + col;
        double m = -INFINITY;
        scores.assign(s.valid, 0.0);
        for (std::size_t j = 0; j < s.valid; ++j) {
          const double* kj = K + (s.offset + j) * d + col;
          double dot = 0.0;
          for (std::size_t t = 0; t < dh; ++t) dot += qi[t] * kj[t];
          scores[j] = dot * scale;
          m = std::max(m, scores[j]);
        }
        if (!std::isfinite(m)) throw NumericError("attention: non-finite scores");
        double z = 0.0;
        for (std::size_t j = 0; j < s.valid; ++j) {
          scores[j] = std::exp(scores[j] - m);
          z += scores[j];
        }
        double* oi = out.data() + (s.offset + i) * d + col;
        for (std::size_t j = 0; j < s.valid; ++j) {
          const double p = scores[j] / z;
          P[i * L + j] = p;
          const double* vj = V + (s.offset + j) * d + col;
          for (std::size_t t = 0; t < dh; ++t) oi[t] += p * vj[t];
        }
      }
    }
  }
  if (record) *record = *probs;
  auto pq = q.node_ptr();
  auto pk = k.node_ptr();
  auto pv = v.node_ptr();
  std::vector<Segment> segs(segments.begin(), segments.end());
  return make_result(
      {n, d}, std::move(out), {q, k, v},
      [pq, pk, pv, probs, segs = std::move(segs), heads, dh, d, scale](Node& self) {
        auto& gq = pq->ensure_grad();
        auto& gk = pk->ensure_grad();
        auto& gv = pv->ensure_grad();
        const double* G = self.grad.data();
        const double* Q = pq->value.data();
        const double* K = pk->value.data();
        const double* V = pv->value.data();
        std::vector<double> dp;
        for (std::size_t si = 0; si < segs.size(); ++si) {
          const auto& s = segs[si];
          const std::size_t L = s.length;
          for (std::size_t h = 0; h < heads; ++h) {
            const auto& P = (*probs)[si][h];
            const std::size_t col = h * dh;
            for (std::size_t i = 0; i < L; ++i) {
              const double* gi = G + (s.offset + i) * d + col;
              dp.assign(s.valid, 0.0);
              double rowdot = 0.0;
              for (std::size_t j = 0; j < s.valid; ++j) {
                const double p = P[i * L + j];
                const double* vj = V + (s.offset + j) * d + col;
                double* gvj = gv.data() + (s.offset + j) * d + col;
                double acc = 0.0;
                for (std::size_t t = 0; t < dh; ++t) {
                  acc += gi[t] * vj[t];
                  gvj[t] += p * gi[t];
                }
                dp[j] = acc;
                rowdot += acc * p;
              }
              const double* qi = Q + (s.offset + i) * d + col;
              double* gqi = gq.data() + (s.offset + i) * d + col;
              for (std::size_t j = 0; j < s.valid; ++j) {
                const double ds = P[i * L + j] * (dp[j] - rowdot) * scale;
                if (ds == 0.0) continue;
                const double* kj = K + (s.offset + j) * d + col;
                double* gkj = gk.data() + (s.offset + j) * d + col;
                for (std::size_t t = 0; t < dh; ++t) {
                  gqi[t] += ds * kj[t];
                  gkj[t] += ds * qi[t];
                }
              }
            }
          }
        }
      },
      "attention");
}

// ---------------------------------------------------------------------------
// gradient checking

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates_checked = 0;
};

struct GradCheckOptions {
  /// Denominator floor: error is |a - n| / max(|a|, |n|, floor).
  double floor = 1e-6;
  /// Check at most this many coordinates (0 = all), sampled with `seed`.
  std::size_t max_coordinates = 0;
  std::uint64_t seed = 0;
};

inline double relative_error(double analytic, double numeric, double floor) {
  const double diff = std::abs(analytic - numeric);
  if (diff == 0.0) return 0.0;
  return diff / std::max({std::abs(analytic), std::abs(numeric), floor});
}

namespace detail {
inline std::vector<std::size_t> pick_coordinates(std::size_t n, const GradCheckOptions& o,
                                                 Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (o.max_coordinates != 0 && o.max_coordinates < n) {
    rng.shuffle(std::span(idx));
    idx.resize(o.max_coordinates);
    std::sort(idx.begin(), idx.end());
  }
  return idx;
}

inline void check_eps(double eps) {
  if (!(eps >= 1e-6 && eps <= 1e-4)) {
    throw ContractError("grad_check: eps must lie in [1e-6, 1e-4]");
  }
}
}  // namespace detail

/// Compares the analytic gradient of a scalar function at x with central
/// finite differences (f(x+eps) - f(x-eps)) / (2 eps), coordinate by coordinate.
inline GradCheckResult grad_check(const std::function<Tensor(const Tensor&)>& f,
                                  const Tensor& x, double eps = 1e-6,
                                  GradCheckOptions opts = {}) {
  detail::check_eps(eps);
  Tensor probe = x.clone(true);
  Tensor y = f(probe);
  if (y.size() != 1) {
    throw ContractError("grad_check: function must be scalar-valued, got shape " +
                        shape_str(y.shape()));
  }
  if (y.requires_grad()) y.backward();
  std::vector<double> analytic(probe.size(), 0.0);
  if (probe.has_grad()) analytic.assign(probe.grad().begin(), probe.grad().end());

  NoGradGuard no_grad;
  Rng rng(opts.seed);
  GradCheckResult res;
  Tensor shifted = x.clone(false);
  for (std::size_t i : detail::pick_coordinates(x.size(), opts, rng)) {
    const double orig = shifted.data()[i];
    shifted.mutable_data()[i] = orig + eps;
    const double fp = f(shifted).item();
    shifted.mutable_data()[i] = orig - eps;
    const double fm = f(shifted).item();
    shifted.mutable_data()[i] = orig;
    const double numeric = (fp - fm) / (2.0 * eps);
    const double err = relative_error(analytic[i], numeric, opts.floor);
    ++res.coordinates_checked;
    if (err > res.max_rel_error) {
      res.max_rel_error = err;
      res.worst_index = i;
      res.worst_analytic = analytic[i];
      res.worst_numeric = numeric;
    }
  }
  return res;
}

/// Gradient check of a scalar loss with respect to a set of leaf tensors that
/// the loss closure reads (e.g. model parameters). Perturbs values in place and
/// restores them afterwards. Each tensor contributes up to
/// opts.max_coordinates sampled coordinates.
inline GradCheckResult grad_check_parameters(const std::function<Tensor()>& loss_fn,
                                             std::span<Tensor> params, double eps = 1e-6,
                                             GradCheckOptions opts = {}) {
  detail::check_eps(eps);
  for (auto& p : params) {
    p.set_requires_grad(true);
    p.zero_grad();
  }
  Tensor loss = loss_fn();
  if (loss.size() != 1) throw ContractError("grad_check: loss must be scalar-valued");
  loss.backward();
  NoGradGuard no_grad;
  Rng rng(opts.seed);
  GradCheckResult res;
  std::size_t base = 0;
  for (auto& p : params) {
    std::vector<double> analytic(p.size(), 0.0);
    if (p.has_grad()) analytic.assign(p.grad().begin(), p.grad().end());
    for (std::size_t i : detail::pick_coordinates(p.size(), opts, rng)) {
      const double orig = p.data()[i];
      p.mutable_data()[i] = orig + eps;
      const double fp = loss_fn().item();
      p.mutable_data()[i] = orig - eps;
      const double fm = loss_fn().item();
      p.mutable_data()[i] = orig;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double err = relative_error(analytic[i], numeric, opts.floor);
      ++res.coordinates_checked;
      if (err > res.max_rel_error) {
        res.max_rel_error = err;
        res.worst_index = base + i;
        res.worst_analytic = analytic[i];
        res.worst_numeric = numeric;
      }
    }
    base += p.size();
    p.zero_grad();
  }
  return res;
}

}  // namespace figmtl::ad
