/*
 * Copyright 2026 The pathnas Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Reverse-mode differentiation over row-batched tensors. Every primitive
// records a node on the tape; backward() replays the nodes in reverse
// creation order, which is a reverse topological order.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pathnas/common.hpp"
#include "pathnas/tensor.hpp"

namespace pathnas {

/// Handle to a tape node.
struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
};

/// Gradient of one stored parameter. `touched` marks rows that received a
/// gradient contribution; an empty mask means every row.
template <class T>
struct ParamGrad {
  Tensor<T> grad;
  std::vector<std::uint8_t> touched;

  bool row_touched(std::size_t r) const { return touched.empty() || touched[r]; }
};

/// Indexed like the owning ParameterStore; unset entries had no path to the
/// loss.
template <class T>
using Gradients = std::vector<std::optional<ParamGrad<T>>>;

template <class T>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // -- leaves ---------------------------------------------------------------

  Var constant(Tensor<T> value) { return push(std::move(value), "constant", false); }

  /// Differentiable leaf owned by the tape (used by tests and gradient checks).
  Var input(Tensor<T> value) { return push(std::move(value), "input", true); }

  /// Leaf that borrows a stored parameter. The referenced tensor must outlive
  /// the tape and stay unmodified until backward() has run. Repeated calls
  /// for the same slot return the same node.
  Var parameter(const Tensor<T>& value, std::size_t slot, bool trainable = true) {
    if (slot >= param_nodes_.size()) param_nodes_.resize(slot + 1, kNone);
    if (param_nodes_[slot] != kNone) return {param_nodes_[slot]};
    Node n;
    n.ref = &value;
    n.requires_grad = trainable;
    n.op = "parameter";
    n.slot = static_cast<int>(slot);
    if (trainable) n.touched.assign(value.rows(), 0);
    nodes_.push_back(std::move(n));
    param_nodes_[slot] = nodes_.size() - 1;
    return {nodes_.size() - 1};
  }

  Var zeros(std::size_t rows, std::size_t cols) {
    return constant(Tensor<T>(rows, cols));
  }

  // -- access ---------------------------------------------------------------

  const Tensor<T>& value(Var v) const { return node(v).val(); }
  bool requires_grad(Var v) const { return node(v).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Gradient w.r.t. a node after backward(); zeros if none flowed.
  Tensor<T> grad(Var v) const {
    const Node& n = node(v);
    if (n.grad.empty()) return Tensor<T>(n.val().rows(), n.val().cols());
    return n.grad;
  }

  // -- primitives -----------------------------------------------------------

  Var add(Var a, Var b) {
    same_shape(a, b, "add");
    const auto& x = value(a);
    const auto& y = value(b);
    Tensor<T> out(x.rows(), x.cols());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
    Var o = push(std::move(out), "add", any_grad(a, b));
    on_backward(o, [this, a, b, o] {
      const auto& g = grad_ref(o);
      accumulate(a, g);
      accumulate(b, g);
    });
    return o;
  }

  Var mul(Var a, Var b) {
    same_shape(a, b, "elementwise_mul");
    const auto& x = value(a);
    const auto& y = value(b);
    Tensor<T> out(x.rows(), x.cols());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
    Var o = push(std::move(out), "elementwise_mul", any_grad(a, b));
    on_backward(o, [this, a, b, o] {
      const auto& g = grad_ref(o);
      if (wants(a)) {
        auto& ga = grad_mut(a);
        const auto& y = value(b);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
      }
      if (wants(b)) {
        auto& gb = grad_mut(b);
        const auto& x = value(a);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * x[i];
      }
    });
    return o;
  }

  /// Row-wise pairing of the halves: for i < d/2,
  ///   o_i = a_i b_i - a_{i+d/2} b_{i+d/2},
  /// and for i >= d/2,
  ///   o_i = a_{i-d/2} b_i - a_i b_{i-d/2}.
  Var hermitian(Var a, Var b) {
    same_shape(a, b, "hermitian_product");
    const auto& x = value(a);
    const auto& y = value(b);
    const std::size_t d = x.cols();
    if (d % 2 != 0) throw ShapeError("hermitian_product needs an even dimension");
    const std::size_t h = d / 2;
    Tensor<T> out(x.rows(), d);
    for (std::size_t r = 0; r < x.rows(); ++r) {
      const T* xa = x.row_ptr(r);
      const T* yb = y.row_ptr(r);
      T* o = out.row_ptr(r);
      for (std::size_t i = 0; i < h; ++i) {
        o[i] = xa[i] * yb[i] - xa[i + h] * yb[i + h];
        o[i + h] = xa[i] * yb[i + h] - xa[i + h] * yb[i];
      }
    }
    Var o = push(std::move(out), "hermitian_product", any_grad(a, b));
    on_backward(o, [this, a, b, o, h] {
      const auto& g = grad_ref(o);
      const auto& x = value(a);
      const auto& y = value(b);
      const bool ga_on = wants(a), gb_on = wants(b);
      Tensor<T>* ga = ga_on ? &grad_mut(a) : nullptr;
      Tensor<T>* gb = gb_on ? &grad_mut(b) : nullptr;
      for (std::size_t r = 0; r < x.rows(); ++r) {
        const T* xa = x.row_ptr(r);
        const T* yb = y.row_ptr(r);
        const T* go = g.row_ptr(r);
        for (std::size_t i = 0; i < h; ++i) {
          const T g1 = go[i], g2 = go[i + h];
          if (ga) {
            T* p = ga->row_ptr(r);
            p[i] += g1 * yb[i] + g2 * yb[i + h];
            p[i + h] += -g1 * yb[i + h] - g2 * yb[i];
          }
          if (gb) {
            T* p = gb->row_ptr(r);
            p[i] += g1 * xa[i] - g2 * xa[i + h];
            p[i + h] += -g1 * xa[i + h] + g2 * xa[i];
          }
        }
      }
    });
    return o;
  }

  Var sigmoid(Var a) {
    const auto& x = value(a);
    Tensor<T> out(x.rows(), x.cols());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = logistic(x[i]);
    Var o = push(std::move(out), "sigmoid", requires_grad(a));
    on_backward(o, [this, a, o] {
      const auto& g = grad_ref(o);
      const auto& y = value(o);
      auto& ga = grad_mut(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (T(1) - y[i]);
    });
    return o;
  }

  Var tanh(Var a) {
    const auto& x = value(a);
    Tensor<T> out(x.rows(), x.cols());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(x[i]);
    Var o = push(std::move(out), "tanh", requires_grad(a));
    on_backward(o, [this, a, o] {
      const auto& g = grad_ref(o);
      const auto& y = value(o);
      auto& ga = grad_mut(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (T(1) - y[i] * y[i]);
    });
    return o;
  }

  Var identity(Var a) { return a; }

  Var scale(Var a, T c) {
    const auto& x = value(a);
    Tensor<T> out(x.rows(), x.cols());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * x[i];
    Var o = push(std::move(out), "scale", requires_grad(a));
    on_backward(o, [this, a, o, c] {
      const auto& g = grad_ref(o);
      auto& ga = grad_mut(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
    });
    return o;
  }

  /// out[b, i] = sum_j W[i, j] x[b, j], i.e. W applied to every row of x.
  Var matmul(Var x, Var w) {
    const auto& X = value(x);
    const auto& W = value(w);
    if (W.rows() != W.cols() || W.cols() != X.cols())
      throw ShapeError("matmul: " + shape_string(X) + " by " + shape_string(W));
    Tensor<T> out(X.rows(), X.cols());
    view(out).noalias() = view(X) * view(W).transpose();
    Var o = push(std::move(out), "matmul", any_grad(x, w));
    on_backward(o, [this, x, w, o] {
      const auto& g = grad_ref(o);
      if (wants(x)) view(grad_mut(x)).noalias() += view(g) * view(value(w));
      if (wants(w)) {
        view(grad_mut(w)).noalias() += view(g).transpose() * view(value(x));
        mark_all(w);
      }
    });
    return o;
  }

  /// Gated mix g * a + (1 - g) * b with g = sigmoid(Wa a + Wb b).
  Var gated(Var a, Var b, Var wa, Var wb) {
    same_shape(a, b, "gated_combine");
    Var za = matmul(a, wa);
    Var zb = matmul(b, wb);
    Var g = sigmoid(add(za, zb));
    const auto& x = value(a);
    const auto& y = value(b);
    const auto& gv = value(g);
    Tensor<T> out(x.rows(), x.cols());
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = gv[i] * x[i] + (T(1) - gv[i]) * y[i];
    Var o = push(std::move(out), "gated_combine",
                 requires_grad(a) || requires_grad(b) || requires_grad(g));
    on_backward(o, [this, a, b, g, o] {
      const auto& go = grad_ref(o);
      const auto& x = value(a);
      const auto& y = value(b);
      const auto& gv = value(g);
      if (wants(a)) {
        auto& ga = grad_mut(a);
        for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * gv[i];
      }
      if (wants(b)) {
        auto& gb = grad_mut(b);
        for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i] * (T(1) - gv[i]);
      }
      if (wants(g)) {
        auto& gg = grad_mut(g);
        for (std::size_t i = 0; i < go.size(); ++i) gg[i] += go[i] * (x[i] - y[i]);
      }
    });
    return o;
  }

  /// Multiplies by a fixed mask (inverted dropout when the mask holds
  /// 0 or 1/(1-p)).
  Var apply_mask(Var a, const Tensor<T>& mask) {
    const auto& x = value(a);
    if (mask.shape() != x.shape()) throw ShapeError("dropout mask shape");
    Tensor<T> out(x.rows(), x.cols());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * mask[i];
    Var o = push(std::move(out), "dropout", requires_grad(a));
    on_backward(o, [this, a, o, mask] {
      const auto& g = grad_ref(o);
      auto& ga = grad_mut(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * mask[i];
    });
    return o;
  }

  Var dropout(Var a, double p, Rng& rng) {
    if (p <= 0.0) return a;
    const auto& x = value(a);
    Tensor<T> mask(x.rows(), x.cols());
    const T keep = static_cast<T>(1.0 / (1.0 - p));
    for (std::size_t i = 0; i < mask.size(); ++i)
      mask[i] = uniform01(rng) < p ? T(0) : keep;
    return apply_mask(a, mask);
  }

  /// Gathers rows `ids` of `table`.
  Var lookup(Var table, std::span<const std::uint32_t> ids) {
    const auto& E = value(table);
    Tensor<T> out(ids.size(), E.cols());
    for (std::size_t b = 0; b < ids.size(); ++b) {
      if (ids[b] >= E.rows()) throw ShapeError("embedding_lookup: id out of range");
      std::copy_n(E.row_ptr(ids[b]), E.cols(), out.row_ptr(b));
    }
    std::vector<std::uint32_t> idx(ids.begin(), ids.end());
    Var o = push(std::move(out), "embedding_lookup", requires_grad(table));
    on_backward(o, [this, table, o, idx = std::move(idx)] {
      const auto& g = grad_ref(o);
      auto& gt = grad_mut(table);
      Node& tn = nodes_[table.id];
      for (std::size_t b = 0; b < idx.size(); ++b) {
        const T* gr = g.row_ptr(b);
        T* dst = gt.row_ptr(idx[b]);
        for (std::size_t k = 0; k < g.cols(); ++k) dst[k] += gr[k];
        if (!tn.touched.empty()) tn.touched[idx[b]] = 1;
      }
    });
    return o;
  }

  /// logits[b, n] = v_b . E_n
  Var dot_scores(Var v, Var table) {
    const auto& V = value(v);
    const auto& E = value(table);
    if (V.cols() != E.cols())
      throw ShapeError("dot_scores: " + shape_string(V) + " vs " + shape_string(E));
    Tensor<T> out(V.rows(), E.rows());
    view(out).noalias() = view(V) * view(E).transpose();
    Var o = push(std::move(out), "dot_scores", any_grad(v, table));
    on_backward(o, [this, v, table, o] {
      const auto& g = grad_ref(o);
      if (wants(v)) view(grad_mut(v)).noalias() += view(g) * view(value(table));
      if (wants(table)) {
        view(grad_mut(table)).noalias() += view(g).transpose() * view(value(v));
        mark_all(table);
      }
    });
    return o;
  }

  /// sum_b w_b * (-z_{b,t_b} + log sum_j exp z_{b,j}), computed with the row
  /// maximum subtracted. Rows with zero weight contribute nothing.
  Var softmax_xent(Var logits, std::span<const std::uint32_t> targets,
                   std::span<const T> weights) {
    const auto& Z = value(logits);
    if (targets.size() != Z.rows() || weights.size() != Z.rows())
      throw ShapeError("softmax_cross_entropy: targets/weights per row");
    Tensor<T> probs(Z.rows(), Z.cols());
    T loss = 0;
    for (std::size_t b = 0; b < Z.rows(); ++b) {
      if (targets[b] >= Z.cols()) throw ShapeError("softmax_cross_entropy: target");
      const T* z = Z.row_ptr(b);
      T mx = *std::max_element(z, z + Z.cols());
      T s = 0;
      T* p = probs.row_ptr(b);
      for (std::size_t j = 0; j < Z.cols(); ++j) {
        p[j] = std::exp(z[j] - mx);
        s += p[j];
      }
      for (std::size_t j = 0; j < Z.cols(); ++j) p[j] /= s;
      if (weights[b] != T(0)) loss += weights[b] * (std::log(s) + mx - z[targets[b]]);
    }
    std::vector<std::uint32_t> tg(targets.begin(), targets.end());
    std::vector<T> wt(weights.begin(), weights.end());
    Var o = push(Tensor<T>::scalar(loss), "softmax_cross_entropy", requires_grad(logits));
    on_backward(o, [this, logits, o, probs = std::move(probs), tg = std::move(tg),
                    wt = std::move(wt)] {
      const T go = grad_ref(o)[0];
      auto& gz = grad_mut(logits);
      for (std::size_t b = 0; b < probs.rows(); ++b) {
        const T w = wt[b] * go;
        if (w == T(0)) continue;
        const T* p = probs.row_ptr(b);
        T* g = gz.row_ptr(b);
        for (std::size_t j = 0; j < probs.cols(); ++j) g[j] += w * p[j];
        g[tg[b]] -= w;
      }
    });
    return o;
  }

  Var sum(Var a) {
    const auto& x = value(a);
    T s = 0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i];
    Var o = push(Tensor<T>::scalar(s), "sum", requires_grad(a));
    on_backward(o, [this, a, o] {
      const T g = grad_ref(o)[0];
      auto& ga = grad_mut(a);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
    });
    return o;
  }

  Var dot(Var a, Var b) { return sum(mul(a, b)); }

  // -- differentiation ------------------------------------------------------

  /// Back-propagates from a 1x1 node. Gradients accumulate additively where a
  /// node feeds several consumers.
  void backward(Var loss) {
    if (value(loss).size() != 1) throw ShapeError("backward: loss is not a scalar");
    if (!node(loss).requires_grad) return;
    grad_mut(loss)[0] += T(1);
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.backward && n.requires_grad && !n.grad.empty()) n.backward();
    }
  }

  /// Moves the gradients of borrowed parameters out, indexed by slot.
  Gradients<T> take_param_grads(std::size_t num_slots) {
    Gradients<T> out(num_slots);
    for (std::size_t s = 0; s < param_nodes_.size() && s < num_slots; ++s) {
      if (param_nodes_[s] == kNone) continue;
      Node& n = nodes_[param_nodes_[s]];
      if (!n.requires_grad || n.grad.empty()) continue;
      ParamGrad<T> pg;
      pg.grad = std::move(n.grad);
      pg.touched = std::move(n.touched);
      if (std::all_of(pg.touched.begin(), pg.touched.end(),
                      [](std::uint8_t t) { return t != 0; }))
        pg.touched.clear();
      out[s] = std::move(pg);
    }
    return out;
  }

 private:
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

  struct Node {
    Tensor<T> owned;
    const Tensor<T>* ref = nullptr;
    Tensor<T> grad;
    bool requires_grad = false;
    int slot = -1;
    std::vector<std::uint8_t> touched;
    std::function<void()> backward;
    const char* op = "";

    const Tensor<T>& val() const { return ref ? *ref : owned; }
  };

  static T logistic(T x) {
    if (x >= 0) return T(1) / (T(1) + std::exp(-x));
    const T e = std::exp(x);
    return e / (T(1) + e);
  }

  const Node& node(Var v) const {
    if (v.id >= nodes_.size()) throw Error("invalid tape variable");
    return nodes_[v.id];
  }

  Var push(Tensor<T> value, const char* op, bool requires_grad) {
    if (!value.all_finite())
      throw NumericFault(std::string("non-finite value produced by ") + op);
    Node n;
    n.owned = std::move(value);
    n.requires_grad = requires_grad;
    n.op = op;
    nodes_.push_back(std::move(n));
    return {nodes_.size() - 1};
  }

  template <class F>
  void on_backward(Var o, F&& f) {
    if (nodes_[o.id].requires_grad) nodes_[o.id].backward = std::forward<F>(f);
  }

  bool any_grad(Var a, Var b) const { return requires_grad(a) || requires_grad(b); }
  bool wants(Var v) const { return nodes_[v.id].requires_grad; }

  void same_shape(Var a, Var b, const char* op) const {
    if (value(a).shape() != value(b).shape())
      throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(value(a)) +
                       " vs " + shape_string(value(b)));
  }

  const Tensor<T>& grad_ref(Var v) const { return nodes_[v.id].grad; }

  Tensor<T>& grad_mut(Var v) {
    Node& n = nodes_[v.id];
    if (n.grad.empty()) n.grad = Tensor<T>(n.val().rows(), n.val().cols());
    return n.grad;
  }

  void accumulate(Var v, const Tensor<T>& g) {
    if (!wants(v)) return;
    auto& dst = grad_mut(v);
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
    mark_all(v);
  }

  void mark_all(Var v) {
    Node& n = nodes_[v.id];
    std::fill(n.touched.begin(), n.touched.end(), std::uint8_t{1});
  }

  std::vector<Node> nodes_;
  std::vector<std::size_t> param_nodes_;
};

}  // namespace pathnas
