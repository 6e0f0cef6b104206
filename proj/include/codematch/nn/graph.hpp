// Copyright 2026 The codematch Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "codematch/nn/param_store.hpp"
#include "codematch/nn/tensor.hpp"
#include "codematch/util/error.hpp"

namespace codematch::nn {

// Graph-local handle to a node.
struct Var {
  int id = -1;
};

// How similarity ops treat zero-norm vectors.
enum class NormGuard {
  kStrict,   // throw ShapeError
  kEpsilon,  // add 1e-12 to every norm
};

inline constexpr double kNormEpsilon = 1e-12;
inline constexpr double kAttentionEpsilon = 1e-12;

// Weights of one LSTM direction: W_ih [4H x E], W_hh [4H x H], b [1 x 4H],
// gate blocks ordered input, forget, cell, output.
struct LstmWeights {
  Var w_ih, w_hh, b;
};

// Tape-based reverse-mode graph. Parameters are read in place from a
// ParamStore; their gradients accumulate into an external store, so several
// graphs can contribute to one minibatch gradient. A graph built without a
// gradient store records no backward closures.
template <typename T>
class Graph {
 public:
  using Matrix = typename Tensor<T>::Matrix;
  using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;

  Graph(const ParamStore<T>& params, ParamStore<T>* grads, NormGuard guard = NormGuard::kStrict)
      : params_(params), grads_(grads), guard_(guard) {
#ifndef NDEBUG
    check_finite_ = true;
#endif
  }
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const { return grads_ != nullptr; }
  void set_check_finite(bool on) { check_finite_ = on; }
  std::size_t num_nodes() const { return nodes_.size(); }

  // Discrete choices made by non-smooth ops (argmax indices, hinge
  // activity), in evaluation order. Two evaluations with equal selections
  // lie in the same smooth piece.
  const std::vector<int>& selections() const { return selections_; }

  const Tensor<T>& value(Var v) const {
    const Node& n = node(v);
    return n.view ? *n.view : n.value;
  }

  Var constant(Tensor<T> t) { return push(std::move(t), {}, nullptr); }

  Var param(const std::string& name) {
    if (auto it = param_ids_.find(name); it != param_ids_.end()) return Var{it->second};
    Node n;
    n.view = &params_.at(name);
    if (grads_) {
      n.ext_grad = &grads_->at(name);
      if (!n.ext_grad->same_shape(*n.view)) throw ShapeError("gradient shape mismatch for '" + name + "'");
      n.needs_grad = true;
    }
    nodes_.push_back(std::move(n));
    const int id = static_cast<int>(nodes_.size()) - 1;
    param_ids_.emplace(name, id);
    return Var{id};
  }

  void backward(Var loss) {
    if (!recording()) throw ValidationError("backward() on a graph built without a gradient store");
    const Tensor<T>& l = value(loss);
    if (l.size() != 1) throw ShapeError("backward() needs a scalar loss, got " + shape_str(l));
    if (!node(loss).needs_grad) return;
    grad(loss).data[0] += T(1);
    for (int id = loss.id; id >= 0; --id) {
      Node& n = nodes_[id];
      if (n.backward && n.needs_grad && has_grad(n)) n.backward();
    }
  }

  // --- ops ---------------------------------------------------------------------

  // Row gather from a [V x E] table; gradient rows scatter back.
  Var embed(Var table, std::span<const int> ids) {
    const Tensor<T>& tab = value(table);
    const int len = static_cast<int>(ids.size());
    Tensor<T> out(len, tab.cols);
    for (int t = 0; t < len; ++t) {
      if (ids[t] < 0 || ids[t] >= tab.rows) {
        throw ShapeError("token id " + std::to_string(ids[t]) + " outside table of " + std::to_string(tab.rows) + " rows");
      }
      std::copy_n(&tab.data[static_cast<std::size_t>(ids[t]) * tab.cols], tab.cols, &out.data[static_cast<std::size_t>(t) * tab.cols]);
    }
    std::vector<int> idv(ids.begin(), ids.end());
    return op(std::move(out), {table}, [this, table, idv](int self) {
      const Tensor<T>& g = grad_of(self);
      Tensor<T>& gt = grad(table);
      for (std::size_t t = 0; t < idv.size(); ++t) {
        gt.mat().row(idv[t]) += g.mat().row(static_cast<Eigen::Index>(t));
      }
    });
  }

  // One LSTM direction over all rows of `x`; output rows stay in input order.
  Var lstm(Var x, const LstmWeights& w, bool reverse) {
    const Tensor<T>& X = value(x);
    const Tensor<T>& Wih = value(w.w_ih);
    const Tensor<T>& Whh = value(w.w_hh);
    const Tensor<T>& B = value(w.b);
    const int len = X.rows;
    const int h = Whh.cols;
    if (len < 1) throw ShapeError("lstm over an empty sequence");
    if (Wih.rows != 4 * h || Wih.cols != X.cols || Whh.rows != 4 * h || B.rows != 1 || B.cols != 4 * h) {
      throw ShapeError("lstm weights " + shape_str(Wih) + shape_str(Whh) + shape_str(B) + " do not fit input " +
                       shape_str(X));
    }
    auto cache = std::make_shared<LstmCache>();
    Matrix pre = X.mat() * Wih.mat().transpose();
    pre.rowwise() += B.mat().row(0);
    cache->gates = Matrix(len, 4 * h);
    cache->c = Matrix(len, h);
    cache->tc = Matrix(len, h);
    Tensor<T> out(len, h);
    RowVec h_prev = RowVec::Zero(h);
    RowVec c_prev = RowVec::Zero(h);
    for (int s = 0; s < len; ++s) {
      const int t = reverse ? len - 1 - s : s;
      RowVec a = pre.row(t) + h_prev * Whh.mat().transpose();
      auto gates = cache->gates.row(t);
      for (int k = 0; k < 4 * h; ++k) {
        gates(k) = (k >= 2 * h && k < 3 * h) ? std::tanh(a(k)) : sigmoid(a(k));
      }
      for (int k = 0; k < h; ++k) {
        const T c = gates(h + k) * c_prev(k) + gates(k) * gates(2 * h + k);
        const T tc = std::tanh(c);
        cache->c(t, k) = c;
        cache->tc(t, k) = tc;
        out(t, k) = gates(3 * h + k) * tc;
      }
      h_prev = out.mat().row(t);
      c_prev = cache->c.row(t);
    }
    const LstmWeights wc = w;
    return op(std::move(out), {x, w.w_ih, w.w_hh, w.b}, [this, x, wc, reverse, cache, len, h](int self) {
      const Matrix dh_out = grad_of(self).mat();
      const Matrix& hs = value_of(self).mat();
      const Tensor<T>& Whh = value(wc.w_hh);
      Matrix d_pre(len, 4 * h);
      Matrix h_prev_rows = Matrix::Zero(len, h);
      RowVec dh_next = RowVec::Zero(h);
      RowVec dc_next = RowVec::Zero(h);
      for (int s = len - 1; s >= 0; --s) {
        const int t = reverse ? len - 1 - s : s;
        const int tp = reverse ? t + 1 : t - 1;
        const auto gates = cache->gates.row(t);
        if (s > 0) h_prev_rows.row(t) = hs.row(tp);
        for (int k = 0; k < h; ++k) {
          const T i = gates(k), f = gates(h + k), g = gates(2 * h + k), o = gates(3 * h + k);
          const T tc = cache->tc(t, k);
          const T c_prev = s > 0 ? cache->c(tp, k) : T(0);
          const T dh = dh_out(t, k) + dh_next(k);
          const T d_o = dh * tc;
          const T dc = dh * o * (T(1) - tc * tc) + dc_next(k);
          d_pre(t, k) = dc * g * i * (T(1) - i);
          d_pre(t, h + k) = dc * c_prev * f * (T(1) - f);
          d_pre(t, 2 * h + k) = dc * i * (T(1) - g * g);
          d_pre(t, 3 * h + k) = d_o * o * (T(1) - o);
          dc_next(k) = dc * f;
        }
        dh_next = d_pre.row(t) * Whh.mat();
      }
      if (needs(wc.w_hh)) grad(wc.w_hh).mat() += d_pre.transpose() * h_prev_rows;
      if (needs(wc.w_ih)) grad(wc.w_ih).mat() += d_pre.transpose() * value(x).mat();
      if (needs(wc.b)) grad(wc.b).mat() += d_pre.colwise().sum();
      if (needs(x)) grad(x).mat() += d_pre * value(wc.w_ih).mat();
    });
  }

  struct BiLstmOut {
    Var seq;        // [L x 2H], row t = [fwd_t ; bwd_t]
    Var fwd_final;  // [1 x H], forward state after the last position
    Var bwd_final;  // [1 x H], backward state after the first position
  };

  BiLstmOut bilstm(Var x, const LstmWeights& fwd, const LstmWeights& bwd) {
    const Var f = lstm(x, fwd, false);
    const Var b = lstm(x, bwd, true);
    const int len = value(f).rows;
    return {concat_cols({f, b}), slice_rows(f, len - 1, 1), slice_rows(b, 0, 1)};
  }

  // Per-column maximum over rows; ties go to the first row.
  Var maxpool_rows(Var x) {
    const Tensor<T>& X = value(x);
    if (X.rows < 1) throw ShapeError("maxpool over an empty sequence");
    Tensor<T> out(1, X.cols);
    std::vector<int> arg(X.cols, 0);
    for (int c = 0; c < X.cols; ++c) {
      T best = X(0, c);
      for (int r = 1; r < X.rows; ++r) {
        if (X(r, c) > best) {
          best = X(r, c);
          arg[c] = r;
        }
      }
      out(0, c) = best;
    }
    selections_.insert(selections_.end(), arg.begin(), arg.end());
    return op(std::move(out), {x}, [this, x, arg](int self) {
      const Tensor<T>& g = grad_of(self);
      Tensor<T>& gx = grad(x);
      for (std::size_t c = 0; c < arg.size(); ++c) gx(arg[c], static_cast<int>(c)) += g(0, static_cast<int>(c));
    });
  }

  Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeError("concat of nothing");
    const int rows = value(parts[0]).rows;
    int cols = 0;
    for (Var p : parts) {
      if (value(p).rows != rows) throw ShapeError("concat_cols row mismatch");
      cols += value(p).cols;
    }
    Tensor<T> out(rows, cols);
    int c0 = 0;
    for (Var p : parts) {
      out.mat().middleCols(c0, value(p).cols) = value(p).mat();
      c0 += value(p).cols;
    }
    return op(std::move(out), parts, [this, parts](int self) {
      int off = 0;
      for (Var p : parts) {
        const int w = value(p).cols;
        if (needs(p)) grad(p).mat() += grad_of(self).mat().middleCols(off, w);
        off += w;
      }
    });
  }

  Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeError("concat of nothing");
    const int cols = value(parts[0]).cols;
    int rows = 0;
    for (Var p : parts) {
      if (value(p).cols != cols) throw ShapeError("concat_rows column mismatch");
      rows += value(p).rows;
    }
    Tensor<T> out(rows, cols);
    int r0 = 0;
    for (Var p : parts) {
      out.mat().middleRows(r0, value(p).rows) = value(p).mat();
      r0 += value(p).rows;
    }
    return op(std::move(out), parts, [this, parts](int self) {
      int off = 0;
      for (Var p : parts) {
        const int n = value(p).rows;
        if (needs(p)) grad(p).mat() += grad_of(self).mat().middleRows(off, n);
        off += n;
      }
    });
  }

  Var slice_rows(Var x, int r0, int n) {
    const Tensor<T>& X = value(x);
    if (r0 < 0 || n < 0 || r0 + n > X.rows) throw ShapeError("slice_rows out of range");
    Tensor<T> out = Tensor<T>::from_matrix(X.mat().middleRows(r0, n));
    return op(std::move(out), {x}, [this, x, r0, n](int self) {
      grad(x).mat().middleRows(r0, n) += grad_of(self).mat();
    });
  }

  Var slice_cols(Var x, int c0, int n) {
    const Tensor<T>& X = value(x);
    if (c0 < 0 || n < 0 || c0 + n > X.cols) throw ShapeError("slice_cols out of range");
    Tensor<T> out = Tensor<T>::from_matrix(X.mat().middleCols(c0, n));
    return op(std::move(out), {x}, [this, x, c0, n](int self) {
      grad(x).mat().middleCols(c0, n) += grad_of(self).mat();
    });
  }

  // x [N x in] * W^T [in x out] + b [1 x out].
  Var linear(Var x, Var w, Var b) {
    const Tensor<T>& X = value(x);
    const Tensor<T>& W = value(w);
    const Tensor<T>& B = value(b);
    if (W.cols != X.cols || B.rows != 1 || B.cols != W.rows) {
      throw ShapeError("linear " + shape_str(X) + " x " + shape_str(W) + " + " + shape_str(B));
    }
    Matrix y = X.mat() * W.mat().transpose();
    y.rowwise() += B.mat().row(0);
    return op(Tensor<T>::from_matrix(y), {x, w, b}, [this, x, w, b](int self) {
      const auto g = grad_of(self).mat();
      if (needs(x)) grad(x).mat() += g * value(w).mat();
      if (needs(w)) grad(w).mat() += g.transpose() * value(x).mat();
      if (needs(b)) grad(b).mat() += g.colwise().sum();
    });
  }

  Var repeat_row(Var v, int n) {
    const Tensor<T>& V = value(v);
    if (V.rows != 1 || n < 1) throw ShapeError("repeat_row needs a [1 x D] row and n >= 1");
    Tensor<T> out(n, V.cols);
    out.mat().rowwise() = V.mat().row(0);
    return op(std::move(out), {v}, [this, v](int self) { grad(v).mat() += grad_of(self).mat().colwise().sum(); });
  }

  // Rows of x picked by index (duplicates allowed).
  Var gather_rows(Var x, std::vector<int> idx) {
    const Tensor<T>& X = value(x);
    Tensor<T> out(static_cast<int>(idx.size()), X.cols);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] < 0 || idx[i] >= X.rows) throw ShapeError("gather_rows index out of range");
      out.mat().row(static_cast<Eigen::Index>(i)) = X.mat().row(idx[i]);
    }
    return op(std::move(out), {x}, [this, x, idx](int self) {
      for (std::size_t i = 0; i < idx.size(); ++i) {
        grad(x).mat().row(idx[i]) += grad_of(self).mat().row(static_cast<Eigen::Index>(i));
      }
    });
  }

  // First column index of each row's maximum; recorded as a selection.
  std::vector<int> argmax_rows(Var x) {
    const Tensor<T>& X = value(x);
    std::vector<int> arg(X.rows, 0);
    for (int r = 0; r < X.rows; ++r) {
      for (int c = 1; c < X.cols; ++c) {
        if (X(r, c) > X(r, arg[r])) arg[r] = c;
      }
    }
    selections_.insert(selections_.end(), arg.begin(), arg.end());
    return arg;
  }

  // a.b / (|a| |b|) over two equal-shape tensors, as a [1 x 1] scalar.
  Var cosine(Var a, Var b) {
    const Tensor<T>& A = value(a);
    const Tensor<T>& B = value(b);
    if (!A.same_shape(B)) throw ShapeError("cosine shape mismatch " + shape_str(A) + " vs " + shape_str(B));
    const auto pc = cos_parts(A.data.data(), B.data.data(), A.size());
    return op(Tensor<T>::scalar(pc.cos), {a, b}, [this, a, b, pc](int self) {
      const T g = grad_of(self).data[0];
      const auto n = value(a).size();
      cos_backward(pc, value(a).data.data(), value(b).data.data(), n, g, needs(a) ? grad(a).data.data() : nullptr,
                   needs(b) ? grad(b).data.data() : nullptr);
    });
  }

  // 1 - |a/|a| - b/|b||^2, computed from the normalized difference.
  Var l2sim(Var a, Var b) {
    const Tensor<T>& A = value(a);
    const Tensor<T>& B = value(b);
    if (!A.same_shape(B)) throw ShapeError("l2sim shape mismatch " + shape_str(A) + " vs " + shape_str(B));
    const T na = norm_or_throw(A.data.data(), A.size());
    const T nb = norm_or_throw(B.data.data(), B.size());
    const T ga = guarded(na), gb = guarded(nb);
    T d2 = 0;
    for (std::size_t i = 0; i < A.size(); ++i) {
      const T diff = A.data[i] / ga - B.data[i] / gb;
      d2 += diff * diff;
    }
    return op(Tensor<T>::scalar(T(1) - d2), {a, b}, [this, a, b, na, nb, ga, gb](int self) {
      const T g = grad_of(self).data[0];
      const Tensor<T>& A = value(a);
      const Tensor<T>& B = value(b);
      const std::size_t n = A.size();
      std::vector<T> u(n);
      for (std::size_t i = 0; i < n; ++i) u[i] = T(-2) * g * (A.data[i] / ga - B.data[i] / gb);
      // d(x/(|x|+e))/dx applied to v: v/gx - x (x.v) / (gx^2 |x|).
      auto apply = [n](const T* x, T nx, T gx, const std::vector<T>& v, T sign, T* out) {
        T xv = 0;
        for (std::size_t i = 0; i < n; ++i) xv += x[i] * v[i];
        const T coef = nx > 0 ? xv / (gx * gx * nx) : T(0);
        for (std::size_t i = 0; i < n; ++i) out[i] += sign * (v[i] / gx - x[i] * coef);
      };
      if (needs(a)) apply(A.data.data(), na, ga, u, T(1), grad(a).data.data());
      if (needs(b)) apply(B.data.data(), nb, gb, u, T(-1), grad(b).data.data());
    });
  }

  // Pairwise cosines: out[i][j] = cos(A_i, B_j).
  Var cosine_matrix(Var a, Var b) {
    const Tensor<T>& A = value(a);
    const Tensor<T>& B = value(b);
    if (A.cols != B.cols) throw ShapeError("cosine_matrix width mismatch");
    const std::size_t d = A.cols;
    Tensor<T> out(A.rows, B.rows);
    auto parts = std::make_shared<std::vector<CosParts>>(static_cast<std::size_t>(A.rows) * B.rows);
    for (int i = 0; i < A.rows; ++i) {
      for (int j = 0; j < B.rows; ++j) {
        auto& pc = (*parts)[static_cast<std::size_t>(i) * B.rows + j];
        pc = cos_parts(&A.data[i * d], &B.data[j * d], d);
        out(i, j) = pc.cos;
      }
    }
    return op(std::move(out), {a, b}, [this, a, b, parts, d](int self) {
      const Tensor<T>& A = value(a);
      const Tensor<T>& B = value(b);
      const Tensor<T>& g = grad_of(self);
      T* ga = needs(a) ? grad(a).data.data() : nullptr;
      T* gb = needs(b) ? grad(b).data.data() : nullptr;
      for (int i = 0; i < A.rows; ++i) {
        for (int j = 0; j < B.rows; ++j) {
          cos_backward((*parts)[static_cast<std::size_t>(i) * B.rows + j], &A.data[i * d], &B.data[j * d], d, g(i, j),
                       ga ? ga + i * d : nullptr, gb ? gb + j * d : nullptr);
        }
      }
    });
  }

  // Row i = sum_j w[i][j] q_j / (sum_j w[i][j] + 1e-12). Weights are used
  // raw: negative cosines are not clamped.
  Var attentive_mean(Var w, Var q) {
    const Tensor<T>& W = value(w);
    const Tensor<T>& Q = value(q);
    if (W.cols != Q.rows) throw ShapeError("attentive_mean " + shape_str(W) + " vs " + shape_str(Q));
    Matrix num = W.mat() * Q.mat();
    RowVec denom(W.rows);
    for (int i = 0; i < W.rows; ++i) denom(i) = W.mat().row(i).sum() + T(kAttentionEpsilon);
    Tensor<T> out(W.rows, Q.cols);
    for (int i = 0; i < W.rows; ++i) out.mat().row(i) = num.row(i) / denom(i);
    return op(std::move(out), {w, q}, [this, w, q, denom](int self) {
      const auto g = grad_of(self).mat();
      const auto out = value_of(self).mat();
      Matrix dnum = g;
      for (int i = 0; i < dnum.rows(); ++i) dnum.row(i) /= denom(i);
      if (needs(q)) grad(q).mat() += value(w).mat().transpose() * dnum;
      if (needs(w)) {
        // d/dw_ij of num_i/s_i = q_j/s_i - out_i/s_i.
        Matrix dw = dnum * value(q).mat().transpose();
        for (int i = 0; i < dw.rows(); ++i) dw.row(i).array() -= dnum.row(i).dot(out.row(i));
        grad(w).mat() += dw;
      }
    });
  }

  // Multi-perspective cosine: out[i][k] = cos(W_k o A_i, W_k o B_i) for
  // A, B [N x D] and perspective weights W [l x D].
  Var mp_cosine(Var a, Var b, Var w) {
    const Tensor<T>& A = value(a);
    const Tensor<T>& B = value(b);
    const Tensor<T>& W = value(w);
    if (!A.same_shape(B) || W.cols != A.cols) {
      throw ShapeError("mp_cosine " + shape_str(A) + " " + shape_str(B) + " " + shape_str(W));
    }
    const int n = A.rows, l = W.rows, d = A.cols;
    Tensor<T> out(n, l);
    auto parts = std::make_shared<std::vector<CosParts>>(static_cast<std::size_t>(n) * l);
    std::vector<T> x(d), y(d);
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < l; ++k) {
        for (int e = 0; e < d; ++e) {
          x[e] = W(k, e) * A(i, e);
          y[e] = W(k, e) * B(i, e);
        }
        auto& pc = (*parts)[static_cast<std::size_t>(i) * l + k];
        pc = cos_parts(x.data(), y.data(), d);
        out(i, k) = pc.cos;
      }
    }
    return op(std::move(out), {a, b, w}, [this, a, b, w, parts](int self) {
      const Tensor<T>& A = value(a);
      const Tensor<T>& B = value(b);
      const Tensor<T>& W = value(w);
      const Tensor<T>& g = grad_of(self);
      const int n = A.rows, l = W.rows, d = A.cols;
      std::vector<T> x(d), y(d), dx(d), dy(d);
      for (int i = 0; i < n; ++i) {
        for (int k = 0; k < l; ++k) {
          for (int e = 0; e < d; ++e) {
            x[e] = W(k, e) * A(i, e);
            y[e] = W(k, e) * B(i, e);
          }
          std::fill(dx.begin(), dx.end(), T(0));
          std::fill(dy.begin(), dy.end(), T(0));
          cos_backward((*parts)[static_cast<std::size_t>(i) * l + k], x.data(), y.data(), d, g(i, k), dx.data(), dy.data());
          for (int e = 0; e < d; ++e) {
            if (needs(a)) grad(a)(i, e) += W(k, e) * dx[e];
            if (needs(b)) grad(b)(i, e) += W(k, e) * dy[e];
            if (needs(w)) grad(w)(k, e) += A(i, e) * dx[e] + B(i, e) * dy[e];
          }
        }
      }
    });
  }

  // max(0, margin - s_pos + s_neg) for scalar similarities.
  Var triplet_hinge(Var s_pos, Var s_neg, T margin) {
    const T z = margin - value(s_pos).item() + value(s_neg).item();
    const bool active = z > T(0);
    selections_.push_back(active ? 1 : 0);
    // A NaN z propagates.
    return op(Tensor<T>::scalar(active || std::isnan(z) ? z : T(0)), {s_pos, s_neg}, [this, s_pos, s_neg, active](int self) {
      if (!active) return;
      const T g = grad_of(self).data[0];
      if (needs(s_pos)) grad(s_pos).data[0] -= g;
      if (needs(s_neg)) grad(s_neg).data[0] += g;
    });
  }

  // Sum of scalars.
  Var add_scalars(const std::vector<Var>& xs) {
    T s = 0;
    for (Var x : xs) s += value(x).item();
    return op(Tensor<T>::scalar(s), xs, [this, xs](int self) {
      const T g = grad_of(self).data[0];
      for (Var x : xs) {
        if (needs(x)) grad(x).data[0] += g;
      }
    });
  }

  // sum(x o weights), with `weights` a constant of x's shape. Reduces any
  // tensor to a scalar for gradient checks.
  Var weighted_sum(Var x, const Tensor<T>& weights) {
    if (!value(x).same_shape(weights)) throw ShapeError("weighted_sum shape mismatch");
    T s = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) s += value(x).data[i] * weights.data[i];
    return op(Tensor<T>::scalar(s), {x}, [this, x, weights](int self) {
      const T g = grad_of(self).data[0];
      Tensor<T>& gx = grad(x);
      for (std::size_t i = 0; i < weights.size(); ++i) gx.data[i] += g * weights.data[i];
    });
  }

 private:
  struct Node {
    Tensor<T> value;
    const Tensor<T>* view = nullptr;
    Tensor<T> own_grad;
    Tensor<T>* ext_grad = nullptr;
    bool needs_grad = false;
    std::function<void()> backward;
  };

  struct LstmCache {
    Matrix gates;  // activated i, f, g, o
    Matrix c;
    Matrix tc;
  };

  struct CosParts {
    T dot = 0, na = 0, nb = 0, ga = 0, gb = 0, cos = 0;
  };

  static T sigmoid(T x) { return T(1) / (T(1) + std::exp(-x)); }

  const Node& node(Var v) const {
    if (v.id < 0 || v.id >= static_cast<int>(nodes_.size())) throw ShapeError("invalid graph handle");
    return nodes_[v.id];
  }

  bool has_grad(const Node& n) const { return n.ext_grad != nullptr || !n.own_grad.empty() || n.value.empty(); }
  bool needs(Var v) const { return nodes_[v.id].needs_grad; }

  Tensor<T>& grad(Var v) {
    Node& n = nodes_[v.id];
    if (n.ext_grad) return *n.ext_grad;
    if (n.own_grad.empty() && !n.value.empty()) n.own_grad = Tensor<T>(n.value.rows, n.value.cols);
    return n.own_grad;
  }
  Tensor<T>& grad_of(int id) { return grad(Var{id}); }
  const Tensor<T>& value_of(int id) const { return value(Var{id}); }

  T norm_or_throw(const T* x, std::size_t n) const {
    T s = 0;
    for (std::size_t i = 0; i < n; ++i) s += x[i] * x[i];
    const T nrm = std::sqrt(s);
    if (guard_ == NormGuard::kStrict && nrm == T(0)) throw ShapeError("similarity of a zero-norm vector");
    return nrm;
  }
  T guarded(T nrm) const { return guard_ == NormGuard::kEpsilon ? nrm + T(kNormEpsilon) : nrm; }

  CosParts cos_parts(const T* a, const T* b, std::size_t n) const {
    CosParts p;
    for (std::size_t i = 0; i < n; ++i) p.dot += a[i] * b[i];
    p.na = norm_or_throw(a, n);
    p.nb = norm_or_throw(b, n);
    p.ga = guarded(p.na);
    p.gb = guarded(p.nb);
    p.cos = p.dot / (p.ga * p.gb);
    return p;
  }

  // Accumulates g * dcos/da and g * dcos/db (null outputs are skipped).
  static void cos_backward(const CosParts& p, const T* a, const T* b, std::size_t n, T g, T* da, T* db) {
    const T inv = T(1) / (p.ga * p.gb);
    const T ca = p.na > 0 ? p.dot / (p.ga * p.ga * p.gb * p.na) : T(0);
    const T cb = p.nb > 0 ? p.dot / (p.ga * p.gb * p.gb * p.nb) : T(0);
    for (std::size_t i = 0; i < n; ++i) {
      if (da) da[i] += g * (b[i] * inv - a[i] * ca);
      if (db) db[i] += g * (a[i] * inv - b[i] * cb);
    }
  }

  Var push(Tensor<T> value, const std::vector<Var>& inputs, std::function<void(int)> backward) {
    if (check_finite_ && !value.all_finite()) {
      throw NumericError("non-finite value produced by graph op " + std::to_string(nodes_.size()));
    }
    Node n;
    n.value = std::move(value);
    if (recording() && backward) {
      for (Var in : inputs) n.needs_grad |= nodes_.at(in.id).needs_grad;
    }
    const int id = static_cast<int>(nodes_.size());
    if (n.needs_grad) n.backward = [backward = std::move(backward), id] { backward(id); };
    nodes_.push_back(std::move(n));
    return Var{id};
  }

  Var op(Tensor<T> value, const std::vector<Var>& inputs, std::function<void(int)> backward) {
    return push(std::move(value), inputs, std::move(backward));
  }

  const ParamStore<T>& params_;
  ParamStore<T>* grads_;
  NormGuard guard_;
  bool check_finite_ = false;
  std::deque<Node> nodes_;
  std::unordered_map<std::string, int> param_ids_;
  std::vector<int> selections_;
};

}  // namespace codematch::nn
