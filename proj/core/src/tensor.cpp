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

#include "sslcalib/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "sslcalib/rng.hpp"

namespace sslcalib {
namespace {

using detail::TensorNode;
using NodePtr = std::shared_ptr<TensorNode>;

thread_local bool g_grad_enabled = true;

[[noreturn]] void shape_fail(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " +
                   shape_to_string(a) + " and " + shape_to_string(b));
}

void check_finite(const char* op, std::span<const double> values,
                  const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string(op) + ": non-finite value in " + what);
    }
  }
}

// Builds the output node and wires it into the graph if recording is on.
Tensor make_result(const char* op, Shape shape, std::vector<double> data,
                   std::vector<NodePtr> parents,
                   std::function<void(TensorNode&)> backward_fn) {
  check_finite(op, data, "forward output");
  auto node = std::make_shared<TensorNode>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->op = op;
  bool track = false;
  if (g_grad_enabled) {
    for (const auto& p : parents) track = track || p->requires_grad;
  }
  if (track) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

const NodePtr& need(const Tensor& t, const char* op) {
  if (!t.defined()) throw std::invalid_argument(std::string(op) + ": undefined tensor");
  return t.node();
}

std::size_t rows_of(const Shape& s) { return s.size() == 2 ? s[0] : 1; }
std::size_t cols_of(const Shape& s) { return s.empty() ? 1 : s.back(); }

enum class Broadcast { kSame, kRows };

Broadcast broadcast_kind(const char* op, const Shape& a, const Shape& b) {
  if (a == b) return Broadcast::kSame;
  const bool b_row = (b.size() == 1) || (b.size() == 2 && b[0] == 1);
  if (a.size() == 2 && b_row && cols_of(b) == a[1]) return Broadcast::kRows;
  shape_fail(op, a, b);
}

// C[n x m] += A[n x k] * B[k x m]
void gemm_nn(const double* a, const double* b, double* c, std::size_t n,
             std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    double* crow = c + i * m;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + p * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[n x k] += A[n x m] * B[k x m]^T
void gemm_nt(const double* a, const double* b, double* c, std::size_t n,
             std::size_t m, std::size_t k) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = a + i * m;
    double* crow = c + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double* brow = b + p * m;
      double acc = 0.0;
      for (std::size_t j = 0; j < m; ++j) acc += arow[j] * brow[j];
      crow[p] += acc;
    }
  }
}

// C[k x m] += A[n x k]^T * B[n x m]
void gemm_tn(const double* a, const double* b, double* c, std::size_t n,
             std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = a + i * k;
    const double* brow = b + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      double* crow = c + p * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename Fwd, typename Bwd>
Tensor unary(const char* op, const Tensor& x, Fwd fwd, Bwd dfdx) {
  const NodePtr& xn = need(x, op);
  std::vector<double> out(xn->data.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(xn->data[i]);
  return make_result(op, xn->shape, std::move(out), {xn},
                     [xn, dfdx](TensorNode& self) {
                       if (!xn->requires_grad) return;
                       auto& g = xn->ensure_grad();
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         g[i] += self.grad[i] * dfdx(xn->data[i], self.data[i]);
                       }
                     });
}

}  // namespace

std::vector<double>& detail::TensorNode::ensure_grad() {
  if (grad.empty()) grad.assign(data.size(), 0.0);
  return grad;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

// ---- Tensor ----------------------------------------------------------------

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad) {
  if (shape.empty() || shape.size() > 2) {
    throw ShapeError("Tensor: rank must be 1 or 2, got " + shape_to_string(shape));
  }
  for (auto d : shape) {
    if (d == 0) throw ShapeError("Tensor: dimensions must be positive, got " + shape_to_string(shape));
  }
  if (shape_numel(shape) != data.size()) {
    throw ShapeError("Tensor: shape " + shape_to_string(shape) + " needs " +
                     std::to_string(shape_numel(shape)) + " values, got " +
                     std::to_string(data.size()));
  }
  check_finite("Tensor", data, "initial data");
  node_ = std::make_shared<TensorNode>();
  node_->shape = std::move(shape);
  node_->data = std::move(data);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor({1}, {value}, requires_grad);
}

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values), requires_grad);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::vector<double> values, bool requires_grad) {
  return Tensor({rows, cols}, std::move(values), requires_grad);
}

const Shape& Tensor::shape() const { return need(*this, "shape")->shape; }
std::size_t Tensor::numel() const { return need(*this, "numel")->data.size(); }
std::size_t Tensor::rows() const { return rows_of(shape()); }
std::size_t Tensor::cols() const { return cols_of(shape()); }

std::span<const double> Tensor::data() const { return need(*this, "data")->data; }
std::span<double> Tensor::mutable_data() { return need(*this, "mutable_data")->data; }

double Tensor::item() const {
  const auto& n = need(*this, "item");
  if (n->data.size() != 1) {
    throw ShapeError("item: tensor of shape " + shape_to_string(n->shape) + " is not a scalar");
  }
  return n->data[0];
}

double Tensor::at(std::size_t r, std::size_t c) const {
  const auto& n = need(*this, "at");
  const std::size_t cols = cols_of(n->shape);
  if (r >= rows_of(n->shape) || c >= cols) throw std::out_of_range("Tensor::at");
  return n->data[r * cols + c];
}

bool Tensor::requires_grad() const { return need(*this, "requires_grad")->requires_grad; }
void Tensor::set_requires_grad(bool value) {
  need(*this, "set_requires_grad")->requires_grad = value;
}
bool Tensor::has_grad() const { return !need(*this, "has_grad")->grad.empty(); }
std::span<const double> Tensor::grad() const { return need(*this, "grad")->grad; }
void Tensor::clear_grad() { need(*this, "clear_grad")->grad.clear(); }
const char* Tensor::op_name() const { return need(*this, "op_name")->op; }
bool Tensor::is_leaf() const { return need(*this, "is_leaf")->is_leaf(); }

Tensor Tensor::detach() const {
  const auto& n = need(*this, "detach");
  return Tensor(n->shape, n->data, false);
}

Tensor Tensor::clone() const {
  const auto& n = need(*this, "clone");
  return Tensor(n->shape, n->data, n->requires_grad);
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

// ---- ops -------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  const NodePtr& an = need(a, "matmul");
  const NodePtr& bn = need(b, "matmul");
  if (an->shape.size() != 2 || bn->shape.size() != 2 || an->shape[1] != bn->shape[0]) {
    shape_fail("matmul", an->shape, bn->shape);
  }
  const std::size_t n = an->shape[0], k = an->shape[1], m = bn->shape[1];
  std::vector<double> out(n * m, 0.0);
  gemm_nn(an->data.data(), bn->data.data(), out.data(), n, k, m);
  return make_result("matmul", {n, m}, std::move(out), {an, bn},
                     [an, bn, n, k, m](TensorNode& self) {
                       if (an->requires_grad) {
                         gemm_nt(self.grad.data(), bn->data.data(),
                                 an->ensure_grad().data(), n, m, k);
                       }
                       if (bn->requires_grad) {
                         gemm_tn(an->data.data(), self.grad.data(),
                                 bn->ensure_grad().data(), n, k, m);
                       }
                     });
}

namespace {

template <typename F, typename DA, typename DB>
Tensor binary(const char* op, const Tensor& a, const Tensor& b, F f, DA dfda,
              DB dfdb) {
  const NodePtr& an = need(a, op);
  const NodePtr& bn = need(b, op);
  const Broadcast kind = broadcast_kind(op, an->shape, bn->shape);
  const std::size_t n = an->data.size();
  const std::size_t bcols = bn->data.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double bv = kind == Broadcast::kSame ? bn->data[i] : bn->data[i % bcols];
    out[i] = f(an->data[i], bv);
  }
  return make_result(op, an->shape, std::move(out), {an, bn},
                     [an, bn, kind, n, bcols, dfda, dfdb](TensorNode& self) {
                       auto bval = [&](std::size_t i) {
                         return kind == Broadcast::kSame ? bn->data[i] : bn->data[i % bcols];
                       };
                       if (an->requires_grad) {
                         auto& g = an->ensure_grad();
                         for (std::size_t i = 0; i < n; ++i) {
                           g[i] += self.grad[i] * dfda(an->data[i], bval(i));
                         }
                       }
                       if (bn->requires_grad) {
                         auto& g = bn->ensure_grad();
                         for (std::size_t i = 0; i < n; ++i) {
                           const std::size_t j = kind == Broadcast::kSame ? i : i % bcols;
                           g[j] += self.grad[i] * dfdb(an->data[i], bval(i));
                         }
                       }
                     });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary("add", a, b, [](double x, double y) { return x + y; },
                [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary("sub", a, b, [](double x, double y) { return x - y; },
                [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary("mul", a, b, [](double x, double y) { return x * y; },
                [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor scale(const Tensor& a, double factor) {
  return unary("scale", a, [factor](double x) { return x * factor; },
               [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double value) {
  return unary("add_scalar", a, [value](double x) { return x + value; },
               [](double, double) { return 1.0; });
}

Tensor relu(const Tensor& x) {
  return unary("relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
               [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary("sigmoid", x,
               [](double v) {
                 if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
                 const double e = std::exp(v);
                 return e / (1.0 + e);
               },
               [](double, double y) { return y * (1.0 - y); });
}

Tensor exp(const Tensor& x) {
  return unary("exp", x, [](double v) { return std::exp(v); },
               [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  const NodePtr& xn = need(x, "log");
  for (double v : xn->data) {
    if (!(v > 0.0)) throw NumericError("log: argument must be positive");
  }
  return unary("log", x, [](double v) { return std::log(v); },
               [](double v, double) { return 1.0 / v; });
}

Tensor softmax(const Tensor& x) {
  const NodePtr& xn = need(x, "softmax");
  const std::size_t r = rows_of(xn->shape), c = cols_of(xn->shape);
  std::vector<double> out(xn->data.size());
  for (std::size_t i = 0; i < r; ++i) {
    const double* in = xn->data.data() + i * c;
    double* o = out.data() + i * c;
    const double mx = *std::max_element(in, in + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += (o[j] = std::exp(in[j] - mx));
    for (std::size_t j = 0; j < c; ++j) o[j] /= z;
  }
  return make_result("softmax", xn->shape, std::move(out), {xn},
                     [xn, r, c](TensorNode& self) {
                       auto& g = xn->ensure_grad();
                       for (std::size_t i = 0; i < r; ++i) {
                         const double* y = self.data.data() + i * c;
                         const double* gy = self.grad.data() + i * c;
                         double dot = 0.0;
                         for (std::size_t j = 0; j < c; ++j) dot += gy[j] * y[j];
                         for (std::size_t j = 0; j < c; ++j) g[i * c + j] += y[j] * (gy[j] - dot);
                       }
                     });
}

Tensor log_softmax(const Tensor& x) {
  const NodePtr& xn = need(x, "log_softmax");
  const std::size_t r = rows_of(xn->shape), c = cols_of(xn->shape);
  std::vector<double> out(xn->data.size());
  for (std::size_t i = 0; i < r; ++i) {
    const double* in = xn->data.data() + i * c;
    double* o = out.data() + i * c;
    const double mx = *std::max_element(in, in + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(in[j] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < c; ++j) o[j] = in[j] - lse;
  }
  return make_result("log_softmax", xn->shape, std::move(out), {xn},
                     [xn, r, c](TensorNode& self) {
                       auto& g = xn->ensure_grad();
                       for (std::size_t i = 0; i < r; ++i) {
                         const double* ly = self.data.data() + i * c;
                         const double* gy = self.grad.data() + i * c;
                         double total = 0.0;
                         for (std::size_t j = 0; j < c; ++j) total += gy[j];
                         for (std::size_t j = 0; j < c; ++j) {
                           g[i * c + j] += gy[j] - std::exp(ly[j]) * total;
                         }
                       }
                     });
}

Tensor sum(const Tensor& x) {
  const NodePtr& xn = need(x, "sum");
  double s = 0.0;
  for (double v : xn->data) s += v;
  return make_result("sum", {1}, {s}, {xn}, [xn](TensorNode& self) {
    auto& g = xn->ensure_grad();
    for (double& v : g) v += self.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  const NodePtr& xn = need(x, "mean");
  const double n = static_cast<double>(xn->data.size());
  double s = 0.0;
  for (double v : xn->data) s += v;
  return make_result("mean", {1}, {s / n}, {xn}, [xn, n](TensorNode& self) {
    auto& g = xn->ensure_grad();
    for (double& v : g) v += self.grad[0] / n;
  });
}

Tensor concat(std::span<const Tensor> parts) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  std::vector<NodePtr> nodes;
  std::vector<std::size_t> widths;
  const std::size_t r = need(parts.front(), "concat")->shape.size() == 2
                            ? parts.front().shape()[0]
                            : 0;
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    const NodePtr& n = need(p, "concat");
    if (n->shape.size() != 2 || n->shape[0] != r) {
      shape_fail("concat", parts.front().shape(), n->shape);
    }
    nodes.push_back(n);
    widths.push_back(n->shape[1]);
    total += n->shape[1];
  }
  std::vector<double> out(r * total);
  for (std::size_t i = 0; i < r; ++i) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      std::copy_n(nodes[k]->data.data() + i * widths[k], widths[k],
                  out.data() + i * total + off);
      off += widths[k];
    }
  }
  auto parents = nodes;
  return make_result("concat", {r, total}, std::move(out), std::move(parents),
                     [nodes, widths, r, total](TensorNode& self) {
                       std::size_t off = 0;
                       for (std::size_t k = 0; k < nodes.size(); ++k) {
                         if (nodes[k]->requires_grad) {
                           auto& g = nodes[k]->ensure_grad();
                           for (std::size_t i = 0; i < r; ++i) {
                             for (std::size_t j = 0; j < widths[k]; ++j) {
                               g[i * widths[k] + j] += self.grad[i * total + off + j];
                             }
                           }
                         }
                         off += widths[k];
                       }
                     });
}

Tensor concat(std::initializer_list<Tensor> parts) {
  return concat(std::span<const Tensor>(parts.begin(), parts.size()));
}

Tensor dropout(const Tensor& x, double rate, std::uint64_t seed) {
  const NodePtr& xn = need(x, "dropout");
  if (!(rate >= 0.0) || !(rate < 1.0)) {
    throw std::invalid_argument("dropout: rate must lie in [0, 1), got " + std::to_string(rate));
  }
  std::vector<double> mask(xn->data.size(), 1.0);
  if (rate > 0.0) {
    Rng rng(seed);
    const double keep_scale = 1.0 / (1.0 - rate);
    for (double& m : mask) m = rng.bernoulli(rate) ? 0.0 : keep_scale;
  }
  std::vector<double> out(xn->data.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xn->data[i] * mask[i];
  return make_result("dropout", xn->shape, std::move(out), {xn},
                     [xn, mask = std::move(mask)](TensorNode& self) {
                       auto& g = xn->ensure_grad();
                       for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * mask[i];
                     });
}

Tensor soft_cross_entropy(const Tensor& logits, const Tensor& targets) {
  const NodePtr& ln = need(logits, "soft_cross_entropy");
  const NodePtr& tn = need(targets, "soft_cross_entropy");
  if (ln->shape.size() != 2 || ln->shape != tn->shape) {
    shape_fail("soft_cross_entropy", ln->shape, tn->shape);
  }
  const std::size_t r = ln->shape[0], c = ln->shape[1];
  std::vector<double> probs(r * c);
  double loss = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    const double* in = ln->data.data() + i * c;
    const double* t = tn->data.data() + i * c;
    const double mx = *std::max_element(in, in + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(in[j] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < c; ++j) {
      probs[i * c + j] = std::exp(in[j] - lse);
      if (t[j] != 0.0) loss -= t[j] * (in[j] - lse);
    }
  }
  loss /= static_cast<double>(r);
  return make_result("soft_cross_entropy", {1}, {loss}, {ln},
                     [ln, tn, probs = std::move(probs), r, c](TensorNode& self) {
                       auto& g = ln->ensure_grad();
                       const double s = self.grad[0] / static_cast<double>(r);
                       for (std::size_t i = 0; i < r; ++i) {
                         double tsum = 0.0;
                         for (std::size_t j = 0; j < c; ++j) tsum += tn->data[i * c + j];
                         for (std::size_t j = 0; j < c; ++j) {
                           g[i * c + j] += s * (tsum * probs[i * c + j] - tn->data[i * c + j]);
                         }
                       }
                     });
}

// ---- backward / sgd ----------------------------------------------------------

void backward(const Tensor& loss) {
  const NodePtr& root = need(loss, "backward");
  if (root->data.size() != 1) {
    throw ShapeError("backward: loss must be a scalar, got shape " + shape_to_string(root->shape));
  }
  if (!root->requires_grad) return;

  // Iterative post-order DFS gives a deterministic topological order.
  std::vector<TensorNode*> order;
  std::unordered_set<TensorNode*> visited;
  std::vector<std::pair<TensorNode*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      TensorNode* p = node->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (TensorNode* n : order) {
    if (!n->is_leaf()) n->grad.assign(n->data.size(), 0.0);
  }
  root->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorNode* n = *it;
    if (n->is_leaf()) continue;
    n->backward_fn(*n);
    check_finite(n->op, n->grad, "gradient");
  }
  for (TensorNode* n : order) {
    if (n->is_leaf()) {
      check_finite("backward", n->grad, "leaf gradient");
    } else {
      n->grad.clear();
      n->grad.shrink_to_fit();
    }
  }
}

void sgd_step(std::span<Tensor> params, double lr) {
  if (!(lr >= 0.0) || !std::isfinite(lr)) {
    throw std::invalid_argument("sgd_step: learning rate must be finite and non-negative");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].has_grad()) {
      throw std::invalid_argument("sgd_step: parameter " + std::to_string(i) + " " +
                                  shape_to_string(params[i].shape()) + " has no gradient");
    }
  }
  for (Tensor& p : params) {
    auto data = p.mutable_data();
    auto grad = p.grad();
    for (std::size_t i = 0; i < data.size(); ++i) data[i] -= lr * grad[i];
    check_finite("sgd_step", data, "updated parameter");
    p.clear_grad();
  }
}

}  // namespace sslcalib
