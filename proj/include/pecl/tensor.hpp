#ifndef PECL_TENSOR_HPP
#define PECL_TENSOR_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "pecl/error.hpp"

namespace pecl {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << ']';
  return os.str();
}

// Global autograd switch. The whole library is single-threaded by contract.
inline bool& grad_mode() {
  static bool on = true;
  return on;
}

struct NoGradGuard {
  bool prev;
  NoGradGuard() : prev(grad_mode()) { grad_mode() = false; }
  NoGradGuard(const NoGradGuard&) = delete;
  ~NoGradGuard() { grad_mode() = prev; }
};

template <typename T>
struct TensorNode {
  Shape shape;
  std::vector<T> data;
  // Empty until the first accumulation; stays empty forever on frozen leaves.
  std::vector<T> grad;
  bool requires_grad = false;
  // Inputs in argument order. Backward accumulates in one fixed traversal
  // order, which makes gradients bit-reproducible run to run.
  std::vector<std::shared_ptr<TensorNode<T>>> parents;
  std::function<void(TensorNode<T>&)> backprop;  // null on leaves

  std::vector<T>& ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), T(0));
    return grad;
  }

  ~TensorNode() {
    // Release the parent chain iteratively; training graphs run thousands of
    // nodes deep and recursive shared_ptr teardown would blow the stack.
    std::vector<std::shared_ptr<TensorNode>> work;
    for (auto& p : parents) work.push_back(std::move(p));
    parents.clear();
    while (!work.empty()) {
      std::shared_ptr<TensorNode> n = std::move(work.back());
      work.pop_back();
      if (n && n.use_count() == 1) {
        for (auto& p : n->parents) work.push_back(std::move(p));
        n->parents.clear();
      }
    }
  }
};

template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorNode<T>> n) : node_(std::move(n)) {}

  static Tensor zeros(Shape shape) {
    return full(std::move(shape), T(0));
  }

  static Tensor full(Shape shape, T v) {
    auto n = std::make_shared<TensorNode<T>>();
    n->data.assign(shape_numel(shape), v);
    n->shape = std::move(shape);
    return Tensor(std::move(n));
  }

  static Tensor from(Shape shape, std::vector<T> data) {
    if (shape_numel(shape) != data.size()) {
      throw ShapeError("tensor: shape " + shape_str(shape) + " wants " +
                       std::to_string(shape_numel(shape)) + " values, got " +
                       std::to_string(data.size()));
    }
    auto n = std::make_shared<TensorNode<T>>();
    n->shape = std::move(shape);
    n->data = std::move(data);
    return Tensor(std::move(n));
  }

  static Tensor scalar(T v) { return from({1, 1}, {v}); }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t size() const { return node_->data.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::vector<T>& data() { return node_->data; }
  const std::vector<T>& data() const { return node_->data; }
  const std::vector<T>& grad() const { return node_->grad; }
  bool requires_grad() const { return node_->requires_grad; }

  void set_requires_grad(bool b) {
    if (node_->backprop) {
      throw ValueError("set_requires_grad: only leaf tensors may be toggled");
    }
    node_->requires_grad = b;
  }

  T item() const {
    if (node_->data.size() != 1) {
      throw ShapeError("item: tensor " + shape_str(node_->shape) +
                       " is not a single element");
    }
    return node_->data[0];
  }

  T at(std::size_t i, std::size_t j) const {
    const Shape& s = node_->shape;
    if (s.size() != 2 || i >= s[0] || j >= s[1]) {
      throw ShapeError("at: index out of range for " + shape_str(s));
    }
    return node_->data[i * s[1] + j];
  }

  T& at(std::size_t i, std::size_t j) {
    const Shape& s = node_->shape;
    if (s.size() != 2 || i >= s[0] || j >= s[1]) {
      throw ShapeError("at: index out of range for " + shape_str(s));
    }
    return node_->data[i * s[1] + j];
  }

  void zero_grad() { node_->grad.clear(); }

  void backward() const;

  TensorNode<T>* node() const { return node_.get(); }
  const std::shared_ptr<TensorNode<T>>& handle() const { return node_; }

 private:
  std::shared_ptr<TensorNode<T>> node_;
};

// Builds an op node. Records the graph edge + backward closure only while
// grad mode is on and some input needs gradients; exposed so tests can
// construct ops with deliberately wrong backward passes.
template <typename T, typename F>
Tensor<T> make_op(Shape shape, std::vector<T> data,
                  std::vector<Tensor<T>> inputs, F&& backward_fn) {
  auto n = std::make_shared<TensorNode<T>>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  bool req = false;
  if (grad_mode()) {
    for (const auto& in : inputs) req = req || in.requires_grad();
  }
  if (req) {
    n->requires_grad = true;
    n->parents.reserve(inputs.size());
    for (auto& in : inputs) n->parents.push_back(in.handle());
    n->backprop = std::forward<F>(backward_fn);
  }
  return Tensor<T>(std::move(n));
}

template <typename T>
void Tensor<T>::backward() const {
  TensorNode<T>* root = node_.get();
  if (root->data.size() != 1) {
    throw ShapeError("backward: root must be a single element, got " +
                     shape_str(root->shape));
  }
  if (!root->requires_grad) return;

  // Postorder DFS over requires-grad parents; reversed it is a topological
  // order with every consumer before its producers.
  std::vector<TensorNode<T>*> order;
  std::unordered_set<TensorNode<T>*> seen;
  std::vector<std::pair<TensorNode<T>*, std::size_t>> stack;
  stack.push_back({root, 0});
  seen.insert(root);
  while (!stack.empty()) {
    auto& fr = stack.back();
    if (fr.second < fr.first->parents.size()) {
      TensorNode<T>* p = fr.first->parents[fr.second++].get();
      if (p && p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(fr.first);
      stack.pop_back();
    }
  }

  // Fresh intermediate grads every call; leaf grads persist so repeated
  // backward accumulates (two calls double a leaf gradient).
  for (TensorNode<T>* n : order) {
    if (n->backprop) n->grad.assign(n->data.size(), T(0));
  }
  root->ensure_grad()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backprop) (*it)->backprop(**it);
  }
}

// ---------------------------------------------------------------------------
// Ops
// ---------------------------------------------------------------------------

template <typename T>
inline void check_rank2(const Tensor<T>& x, const char* op) {
  if (x.shape().size() != 2) {
    throw ShapeError(std::string(op) + ": expected rank-2 tensor, got " +
                     shape_str(x.shape()));
  }
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  check_rank2(a, "matmul");
  check_rank2(b, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeError("matmul: inner dimensions disagree, " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  std::vector<T> out(m * n, T(0));
  {
    const T* A = a.data().data();
    const T* B = b.data().data();
    T* C = out.data();
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t p = 0; p < k; ++p) {
        const T aip = A[i * k + p];
        const T* br = B + p * n;
        T* cr = C + i * n;
        for (std::size_t j = 0; j < n; ++j) cr[j] += aip * br[j];
      }
    }
  }
  return make_op<T>(
      {m, n}, std::move(out), {a, b},
      [an = a.node(), bn = b.node(), m, k, n](TensorNode<T>& self) {
        const T* g = self.grad.data();
        const T* A = an->data.data();
        const T* B = bn->data.data();
        if (an->requires_grad) {
          T* ga = an->ensure_grad().data();
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t p = 0; p < k; ++p) {
              const T* gr = g + i * n;
              const T* br = B + p * n;
              T s = 0;
              for (std::size_t j = 0; j < n; ++j) s += gr[j] * br[j];
              ga[i * k + p] += s;
            }
          }
        }
        if (bn->requires_grad) {
          T* gb = bn->ensure_grad().data();
          for (std::size_t i = 0; i < m; ++i) {
            const T* gr = g + i * n;
            const T* ar = A + i * k;
            for (std::size_t p = 0; p < k; ++p) {
              const T aip = ar[p];
              T* gbr = gb + p * n;
              for (std::size_t j = 0; j < n; ++j) gbr[j] += aip * gr[j];
            }
          }
        }
      });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("add: shape mismatch, " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return make_op<T>(a.shape(), std::move(out), {a, b},
                    [an = a.node(), bn = b.node()](TensorNode<T>& self) {
                      const std::vector<T>& g = self.grad;
                      if (an->requires_grad) {
                        auto& ga = an->ensure_grad();
                        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                      }
                      if (bn->requires_grad) {
                        auto& gb = bn->ensure_grad();
                        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
                      }
                    });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("sub: shape mismatch, " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  return make_op<T>(a.shape(), std::move(out), {a, b},
                    [an = a.node(), bn = b.node()](TensorNode<T>& self) {
                      const std::vector<T>& g = self.grad;
                      if (an->requires_grad) {
                        auto& ga = an->ensure_grad();
                        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                      }
                      if (bn->requires_grad) {
                        auto& gb = bn->ensure_grad();
                        for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
                      }
                    });
}

// x: [m x n], bias broadcast over rows; bias may be [n] or [1 x n].
template <typename T>
Tensor<T> add_rows(const Tensor<T>& x, const Tensor<T>& b) {
  check_rank2(x, "add_rows");
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (b.size() != n) {
    throw ShapeError("add_rows: bias " + shape_str(b.shape()) +
                     " does not match row width of " + shape_str(x.shape()));
  }
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      out[i * n + j] = x.data()[i * n + j] + b.data()[j];
  return make_op<T>(x.shape(), std::move(out), {x, b},
                    [xn = x.node(), bn = b.node(), m, n](TensorNode<T>& self) {
                      const std::vector<T>& g = self.grad;
                      if (xn->requires_grad) {
                        auto& gx = xn->ensure_grad();
                        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                      }
                      if (bn->requires_grad) {
                        auto& gb = bn->ensure_grad();
                        for (std::size_t i = 0; i < m; ++i)
                          for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
                      }
                    });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("mul: shape mismatch, " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return make_op<T>(a.shape(), std::move(out), {a, b},
                    [an = a.node(), bn = b.node()](TensorNode<T>& self) {
                      const std::vector<T>& g = self.grad;
                      if (an->requires_grad) {
                        auto& ga = an->ensure_grad();
                        for (std::size_t i = 0; i < g.size(); ++i)
                          ga[i] += g[i] * bn->data[i];
                      }
                      if (bn->requires_grad) {
                        auto& gb = bn->ensure_grad();
                        for (std::size_t i = 0; i < g.size(); ++i)
                          gb[i] += g[i] * an->data[i];
                      }
                    });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T c) {
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * x.data()[i];
  return make_op<T>(x.shape(), std::move(out), {x},
                    [xn = x.node(), c](TensorNode<T>& self) {
                      if (!xn->requires_grad) return;
                      auto& gx = xn->ensure_grad();
                      for (std::size_t i = 0; i < self.grad.size(); ++i)
                        gx[i] += c * self.grad[i];
                    });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = x.data()[i] > T(0) ? x.data()[i] : T(0);
  return make_op<T>(x.shape(), std::move(out), {x},
                    [xn = x.node()](TensorNode<T>& self) {
                      if (!xn->requires_grad) return;
                      auto& gx = xn->ensure_grad();
                      for (std::size_t i = 0; i < self.grad.size(); ++i)
                        if (xn->data[i] > T(0)) gx[i] += self.grad[i];
                    });
}

// Exact erf form, not the tanh approximation.
template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  constexpr double kInvSqrt2 = 0.7071067811865475244;
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = static_cast<double>(x.data()[i]);
    out[i] = static_cast<T>(0.5 * v * (1.0 + std::erf(v * kInvSqrt2)));
  }
  return make_op<T>(x.shape(), std::move(out), {x},
                    [xn = x.node()](TensorNode<T>& self) {
                      if (!xn->requires_grad) return;
                      constexpr double kInvSqrt2Pi = 0.3989422804014326779;
                      auto& gx = xn->ensure_grad();
                      for (std::size_t i = 0; i < self.grad.size(); ++i) {
                        const double v = static_cast<double>(xn->data[i]);
                        const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
                        const double pdf = std::exp(-0.5 * v * v) * kInvSqrt2Pi;
                        gx[i] += self.grad[i] * static_cast<T>(cdf + v * pdf);
                      }
                    });
}

template <typename T>
inline T sigmoid_scalar(T v) {
  if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
  const T e = std::exp(v);
  return e / (T(1) + e);
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigmoid_scalar(x.data()[i]);
  return make_op<T>(x.shape(), std::move(out), {x},
                    [xn = x.node()](TensorNode<T>& self) {
                      if (!xn->requires_grad) return;
                      auto& gx = xn->ensure_grad();
                      for (std::size_t i = 0; i < self.grad.size(); ++i) {
                        const T y = self.data[i];
                        gx[i] += self.grad[i] * y * (T(1) - y);
                      }
                    });
}

// Softmax along `axis` of a rank-2 tensor, max-subtracted per slice.
template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis) {
  check_rank2(x, "softmax");
  if (axis > 1) throw ShapeError("softmax: axis must be 0 or 1");
  const std::size_t m = x.dim(0), n = x.dim(1);
  std::vector<T> out(x.size());
  const std::size_t slices = axis == 1 ? m : n;
  const std::size_t len = axis == 1 ? n : m;
  const std::size_t step = axis == 1 ? 1 : n;
  auto base = [&](std::size_t s) { return axis == 1 ? s * n : s; };
  for (std::size_t s = 0; s < slices; ++s) {
    const std::size_t b = base(s);
    T mx = x.data()[b];
    for (std::size_t t = 1; t < len; ++t)
      mx = std::max(mx, x.data()[b + t * step]);
    T sum = 0;
    for (std::size_t t = 0; t < len; ++t) {
      const T e = std::exp(x.data()[b + t * step] - mx);
      out[b + t * step] = e;
      sum += e;
    }
    for (std::size_t t = 0; t < len; ++t) out[b + t * step] /= sum;
  }
  return make_op<T>(
      x.shape(), std::move(out), {x},
      [xn = x.node(), m, n, axis](TensorNode<T>& self) {
        if (!xn->requires_grad) return;
        auto& gx = xn->ensure_grad();
        const std::size_t slices = axis == 1 ? m : n;
        const std::size_t len = axis == 1 ? n : m;
        const std::size_t step = axis == 1 ? 1 : n;
        for (std::size_t s = 0; s < slices; ++s) {
          const std::size_t b = axis == 1 ? s * n : s;
          T dot = 0;
          for (std::size_t t = 0; t < len; ++t)
            dot += self.grad[b + t * step] * self.data[b + t * step];
          for (std::size_t t = 0; t < len; ++t) {
            const std::size_t ix = b + t * step;
            gx[ix] += self.data[ix] * (self.grad[ix] - dot);
          }
        }
      });
}

// Row-wise layer norm with affine; gamma/beta have numel n. Population
// variance, epsilon inside the square root.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma,
                     const Tensor<T>& beta, T eps) {
  check_rank2(x, "layer_norm");
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (gamma.size() != n || beta.size() != n) {
    throw ShapeError("layer_norm: affine params " + shape_str(gamma.shape()) +
                     "/" + shape_str(beta.shape()) + " do not match row width of " +
                     shape_str(x.shape()));
  }
  std::vector<T> out(x.size());
  std::vector<T> xhat(x.size());
  std::vector<T> inv(m);
  for (std::size_t i = 0; i < m; ++i) {
    const T* row = x.data().data() + i * n;
    T mean = 0;
    for (std::size_t j = 0; j < n; ++j) mean += row[j];
    mean /= static_cast<T>(n);
    T var = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const T d = row[j] - mean;
      var += d * d;
    }
    var /= static_cast<T>(n);
    const T iv = T(1) / std::sqrt(var + eps);
    inv[i] = iv;
    for (std::size_t j = 0; j < n; ++j) {
      const T h = (row[j] - mean) * iv;
      xhat[i * n + j] = h;
      out[i * n + j] = h * gamma.data()[j] + beta.data()[j];
    }
  }
  return make_op<T>(
      x.shape(), std::move(out), {x, gamma, beta},
      [xn = x.node(), gn = gamma.node(), bn = beta.node(), m, n,
       xhat = std::move(xhat), inv = std::move(inv)](TensorNode<T>& self) {
        const std::vector<T>& g = self.grad;
        if (bn->requires_grad) {
          auto& gb = bn->ensure_grad();
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
        }
        if (gn->requires_grad) {
          auto& gg = gn->ensure_grad();
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j)
              gg[j] += g[i * n + j] * xhat[i * n + j];
        }
        if (xn->requires_grad) {
          auto& gx = xn->ensure_grad();
          for (std::size_t i = 0; i < m; ++i) {
            T m1 = 0, m2 = 0;
            for (std::size_t j = 0; j < n; ++j) {
              const T dh = g[i * n + j] * gn->data[j];
              m1 += dh;
              m2 += dh * xhat[i * n + j];
            }
            m1 /= static_cast<T>(n);
            m2 /= static_cast<T>(n);
            for (std::size_t j = 0; j < n; ++j) {
              const T dh = g[i * n + j] * gn->data[j];
              gx[i * n + j] += inv[i] * (dh - m1 - xhat[i * n + j] * m2);
            }
          }
        }
      });
}

// x: [C_in x L_in], w: [C_out x C_in x k], b: numel C_out.
// Cross-correlation with zero padding.
template <typename T>
Tensor<T> conv1d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b,
                 std::size_t stride, std::size_t padding) {
  check_rank2(x, "conv1d");
  if (w.shape().size() != 3) {
    throw ShapeError("conv1d: weight must be rank-3 [C_out x C_in x k], got " +
                     shape_str(w.shape()));
  }
  const std::size_t cin = x.dim(0), lin = x.dim(1);
  const std::size_t cout = w.dim(0), k = w.dim(2);
  if (w.dim(1) != cin) {
    throw ShapeError("conv1d: input channels disagree, " + shape_str(x.shape()) +
                     " vs weight " + shape_str(w.shape()));
  }
  if (b.size() != cout) {
    throw ShapeError("conv1d: bias " + shape_str(b.shape()) +
                     " does not match C_out of " + shape_str(w.shape()));
  }
  if (stride == 0) throw ValueError("conv1d: stride must be positive");
  if (lin + 2 * padding < k) {
    throw ShapeError("conv1d: input length " + std::to_string(lin) +
                     " (+2*" + std::to_string(padding) +
                     " pad) shorter than kernel " + std::to_string(k));
  }
  const std::size_t lout = (lin + 2 * padding - k) / stride + 1;
  std::vector<T> out(cout * lout);
  {
    const T* X = x.data().data();
    const T* W = w.data().data();
    for (std::size_t co = 0; co < cout; ++co) {
      for (std::size_t o = 0; o < lout; ++o) {
        T acc = b.data()[co];
        const std::ptrdiff_t start =
            static_cast<std::ptrdiff_t>(o * stride) -
            static_cast<std::ptrdiff_t>(padding);
        for (std::size_t ci = 0; ci < cin; ++ci) {
          const T* wr = W + (co * cin + ci) * k;
          const T* xr = X + ci * lin;
          for (std::size_t j = 0; j < k; ++j) {
            const std::ptrdiff_t ix = start + static_cast<std::ptrdiff_t>(j);
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(lin))
              acc += wr[j] * xr[ix];
          }
        }
        out[co * lout + o] = acc;
      }
    }
  }
  return make_op<T>(
      {cout, lout}, std::move(out), {x, w, b},
      [xn = x.node(), wn = w.node(), bn = b.node(), cin, lin, cout, k, lout,
       stride, padding](TensorNode<T>& self) {
        const T* g = self.grad.data();
        T* gx = xn->requires_grad ? xn->ensure_grad().data() : nullptr;
        T* gw = wn->requires_grad ? wn->ensure_grad().data() : nullptr;
        T* gb = bn->requires_grad ? bn->ensure_grad().data() : nullptr;
        for (std::size_t co = 0; co < cout; ++co) {
          for (std::size_t o = 0; o < lout; ++o) {
            const T go = g[co * lout + o];
            if (gb) gb[co] += go;
            if (!gx && !gw) continue;
            const std::ptrdiff_t start =
                static_cast<std::ptrdiff_t>(o * stride) -
                static_cast<std::ptrdiff_t>(padding);
            for (std::size_t ci = 0; ci < cin; ++ci) {
              for (std::size_t j = 0; j < k; ++j) {
                const std::ptrdiff_t ix = start + static_cast<std::ptrdiff_t>(j);
                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(lin)) continue;
                if (gw)
                  gw[(co * cin + ci) * k + j] += go * xn->data[ci * lin + ix];
                if (gx)
                  gx[ci * lin + ix] += go * wn->data[(co * cin + ci) * k + j];
              }
            }
          }
        }
      });
}

// out axis i takes input axis perm[i].
template <typename T>
Tensor<T> permute(const Tensor<T>& x, const std::vector<std::size_t>& perm) {
  const Shape& is = x.shape();
  const std::size_t r = is.size();
  {
    std::vector<bool> hit(r, false);
    if (perm.size() != r) {
      throw ShapeError("permute: axes list has " + std::to_string(perm.size()) +
                       " entries for rank " + std::to_string(r));
    }
    for (std::size_t a : perm) {
      if (a >= r || hit[a]) throw ShapeError("permute: invalid axis permutation");
      hit[a] = true;
    }
  }
  Shape os(r);
  for (std::size_t i = 0; i < r; ++i) os[i] = is[perm[i]];
  std::vector<std::size_t> istride(r, 1);
  for (std::size_t i = r; i-- > 1;) istride[i - 1] = istride[i] * is[i];
  // Precompute, for each output linear index, the input linear index.
  const std::size_t total = shape_numel(is);
  std::vector<std::size_t> map(total);
  {
    std::vector<std::size_t> idx(r, 0);
    for (std::size_t lin = 0; lin < total; ++lin) {
      std::size_t off = 0;
      for (std::size_t d = 0; d < r; ++d) off += idx[d] * istride[perm[d]];
      map[lin] = off;
      for (std::size_t d = r; d-- > 0;) {
        if (++idx[d] < os[d]) break;
        idx[d] = 0;
      }
    }
  }
  std::vector<T> out(total);
  for (std::size_t i = 0; i < total; ++i) out[i] = x.data()[map[i]];
  return make_op<T>(std::move(os), std::move(out), {x},
                    [xn = x.node(), map = std::move(map)](TensorNode<T>& self) {
                      if (!xn->requires_grad) return;
                      auto& gx = xn->ensure_grad();
                      for (std::size_t i = 0; i < self.grad.size(); ++i)
                        gx[map[i]] += self.grad[i];
                    });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& x) {
  check_rank2(x, "transpose");
  return permute(x, {1, 0});
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (shape_numel(shape) != x.size()) {
    throw ShapeError("reshape: " + shape_str(x.shape()) + " cannot view as " +
                     shape_str(shape));
  }
  std::vector<T> out = x.data();
  return make_op<T>(std::move(shape), std::move(out), {x},
                    [xn = x.node()](TensorNode<T>& self) {
                      if (!xn->requires_grad) return;
                      auto& gx = xn->ensure_grad();
                      for (std::size_t i = 0; i < self.grad.size(); ++i)
                        gx[i] += self.grad[i];
                    });
}

// Concatenate rank-2 tensors along axis 0 or 1.
template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& xs, std::size_t axis) {
  if (xs.empty()) throw ShapeError("concat: no inputs");
  if (axis > 1) throw ShapeError("concat: axis must be 0 or 1");
  for (const auto& x : xs) check_rank2(x, "concat");
  const std::size_t other = axis == 0 ? 1 : 0;
  const std::size_t fixed = xs[0].dim(other);
  std::size_t total = 0;
  for (const auto& x : xs) {
    if (x.dim(other) != fixed) {
      throw ShapeError("concat: mismatched shapes " + shape_str(xs[0].shape()) +
                       " vs " + shape_str(x.shape()));
    }
    total += x.dim(axis);
  }
  Shape os = axis == 0 ? Shape{total, fixed} : Shape{fixed, total};
  std::vector<T> out(shape_numel(os));
  if (axis == 0) {
    std::size_t row = 0;
    for (const auto& x : xs) {
      std::copy(x.data().begin(), x.data().end(), out.begin() + row * fixed);
      row += x.dim(0);
    }
  } else {
    std::size_t col = 0;
    for (const auto& x : xs) {
      const std::size_t w = x.dim(1);
      for (std::size_t i = 0; i < fixed; ++i)
        std::copy(x.data().begin() + i * w, x.data().begin() + (i + 1) * w,
                  out.begin() + i * total + col);
      col += w;
    }
  }
  std::vector<TensorNode<T>*> nodes;
  std::vector<std::size_t> widths;
  for (const auto& x : xs) {
    nodes.push_back(x.node());
    widths.push_back(x.dim(axis));
  }
  return make_op<T>(
      std::move(os), std::move(out), xs,
      [nodes = std::move(nodes), widths = std::move(widths), axis,
       fixed](TensorNode<T>& self) {
        const std::size_t total = self.shape[axis];
        std::size_t offset = 0;
        for (std::size_t t = 0; t < nodes.size(); ++t) {
          TensorNode<T>* xn = nodes[t];
          const std::size_t w = widths[t];
          if (xn->requires_grad) {
            auto& gx = xn->ensure_grad();
            if (axis == 0) {
              for (std::size_t i = 0; i < w * fixed; ++i)
                gx[i] += self.grad[offset * fixed + i];
            } else {
              for (std::size_t i = 0; i < fixed; ++i)
                for (std::size_t j = 0; j < w; ++j)
                  gx[i * w + j] += self.grad[i * total + offset + j];
            }
          }
          offset += w;
        }
      });
}

template <typename T>
Tensor<T> slice_cols(const Tensor<T>& x, std::size_t start, std::size_t len) {
  check_rank2(x, "slice_cols");
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (start + len > n) {
    throw ShapeError("slice_cols: [" + std::to_string(start) + ", " +
                     std::to_string(start + len) + ") out of range for " +
                     shape_str(x.shape()));
  }
  std::vector<T> out(m * len);
  for (std::size_t i = 0; i < m; ++i)
    std::copy(x.data().begin() + i * n + start,
              x.data().begin() + i * n + start + len, out.begin() + i * len);
  return make_op<T>({m, len}, std::move(out), {x},
                    [xn = x.node(), m, n, start, len](TensorNode<T>& self) {
                      if (!xn->requires_grad) return;
                      auto& gx = xn->ensure_grad();
                      for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t j = 0; j < len; ++j)
                          gx[i * n + start + j] += self.grad[i * len + j];
                    });
}

// Mean along one axis of a rank-2 tensor; the reduced axis keeps size 1.
template <typename T>
Tensor<T> mean_axis(const Tensor<T>& x, std::size_t axis) {
  check_rank2(x, "mean_axis");
  if (axis > 1) throw ShapeError("mean_axis: axis must be 0 or 1");
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (axis == 0) {
    std::vector<T> out(n, T(0));
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) out[j] += x.data()[i * n + j];
    for (std::size_t j = 0; j < n; ++j) out[j] /= static_cast<T>(m);
    return make_op<T>({1, n}, std::move(out), {x},
                      [xn = x.node(), m, n](TensorNode<T>& self) {
                        if (!xn->requires_grad) return;
                        auto& gx = xn->ensure_grad();
                        for (std::size_t j = 0; j < n; ++j) {
                          const T gj = self.grad[j] / static_cast<T>(m);
                          for (std::size_t i = 0; i < m; ++i) gx[i * n + j] += gj;
                        }
                      });
  }
  std::vector<T> out(m, T(0));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i] += x.data()[i * n + j];
    out[i] /= static_cast<T>(n);
  }
  return make_op<T>({m, 1}, std::move(out), {x},
                    [xn = x.node(), m, n](TensorNode<T>& self) {
                      if (!xn->requires_grad) return;
                      auto& gx = xn->ensure_grad();
                      for (std::size_t i = 0; i < m; ++i) {
                        const T gi = self.grad[i] / static_cast<T>(n);
                        for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += gi;
                      }
                    });
}

template <typename T>
Tensor<T> sum_all(const Tensor<T>& x) {
  T s = 0;
  for (T v : x.data()) s += v;
  return make_op<T>({1, 1}, std::vector<T>{s}, {x},
                    [xn = x.node()](TensorNode<T>& self) {
                      if (!xn->requires_grad) return;
                      auto& gx = xn->ensure_grad();
                      const T g = self.grad[0];
                      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
                    });
}

// Binary cross entropy on logits, summed (not averaged) over all elements.
// Stable form: max(s,0) - s*y + log1p(exp(-|s|)). Targets must be exactly
// 0 or 1 and are treated as constants.
template <typename T>
Tensor<T> bce_with_logits(const Tensor<T>& s, const Tensor<T>& y) {
  if (s.shape() != y.shape()) {
    throw ShapeError("bce_with_logits: logits " + shape_str(s.shape()) +
                     " vs targets " + shape_str(y.shape()));
  }
  T acc = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const T yi = y.data()[i];
    if (yi != T(0) && yi != T(1)) {
      throw ValueError("bce_with_logits: target at index " + std::to_string(i) +
                       " is not 0 or 1");
    }
    const T si = s.data()[i];
    acc += std::max(si, T(0)) - si * yi + std::log1p(std::exp(-std::abs(si)));
  }
  return make_op<T>({1, 1}, std::vector<T>{acc}, {s, y},
                    [sn = s.node(), yn = y.node()](TensorNode<T>& self) {
                      if (!sn->requires_grad) return;
                      auto& gs = sn->ensure_grad();
                      const T g = self.grad[0];
                      for (std::size_t i = 0; i < gs.size(); ++i)
                        gs[i] += g * (sigmoid_scalar(sn->data[i]) - yn->data[i]);
                    });
}

template <typename T>
bool all_finite(const Tensor<T>& x) {
  for (T v : x.data())
    if (!std::isfinite(static_cast<double>(v))) return false;
  return true;
}

}  // namespace pecl

#endif  // PECL_TENSOR_HPP
