// Copyright (c) 2026 The VoxTracer Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef VOXTRACER_AUTODIFF_HPP_
#define VOXTRACER_AUTODIFF_HPP_

#include <deque>
#include <functional>
#include <unordered_map>
#include <vector>

#include "voxtracer/tensor.hpp"

namespace vox {

// Reverse-mode tape. Nodes are created in topological order; backward() runs
// the recorded closures in reverse. Parameters are bound by Tensor address,
// which must stay stable for the life of the tape (model parameter stores
// use std::deque for that reason).
class Tape;

struct Var {
  Tape* tape = nullptr;
  int id = -1;
  const Tensor& val() const;
  int rows() const { return val().rows(); }
  int cols() const { return val().cols(); }
};

using GradMap = std::unordered_map<const Tensor*, Tensor>;

class Tape {
 public:
  struct Node {
    Tensor value;
    Tensor grad;  // allocated lazily
    std::function<void()> back;
    const Tensor* param = nullptr;
    bool requires_grad = false;
    bool grad_ready = false;
  };

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

  bool grad_enabled() const { return grad_enabled_; }

  Var leaf(Tensor v);
  // Leaf bound to an external model parameter; value is copied, gradient is
  // reported against the parameter's address via accumulate_param_grads.
  Var param(const Tensor& p);

  Var make(Tensor value, std::vector<int> parents, std::function<void()> back);

  const Tensor& value(int id) const { return nodes_[id].value; }
  Tensor& grad(int id);
  bool needs_grad(int id) const { return nodes_[id].requires_grad; }

  // Seeds d(loss)/d(loss) = 1 and sweeps the tape. loss must be 1x1.
  void backward(Var loss);

  // Adds each bound parameter's accumulated gradient into `out`.
  void accumulate_param_grads(GradMap& out) const;

  std::size_t node_count() const { return nodes_.size(); }

 private:
  std::deque<Node> nodes_;
  bool grad_enabled_;
};

namespace ad {

// elementwise / scalar
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double c);
Var add_const(Var a, double c);
Var tanh_v(Var a);
Var sigmoid_v(Var a);
Var exp_v(Var a);
Var clamp_v(Var a, double lo, double hi);

// linear algebra
Var matmul(Var a, Var b);
// y = x * w^T + broadcast(b); x [B,F], w [O,F], b [1,O] (b may be empty Var{}).
Var linear(Var x, Var w, Var b);
// 1-D convolution over [C,T] with kernel layout w [Cout, Cin*K], odd K,
// zero "same" padding, optional dilation. b is [Cout,1] or empty.
Var conv1d(Var x, Var w, Var b, int kernel, int dilation);
// log|det W| for square W.
Var logdet_mat(Var w);

// shape ops
Var transpose(Var x);
Var reshape(Var x, int rows, int cols);
Var slice_rows(Var x, int r0, int r1);
Var slice_cols(Var x, int c0, int c1);
Var concat_rows(Var a, Var b);
Var broadcast_col(Var d, int cols);  // [n,1] -> [n,cols]
Var repeat_cols(Var x, int k);       // nearest-neighbor upsample along cols
Var avgpool_cols(Var x, int k);
Var tile_mean(Var x, int period);    // [C,K*P] -> [C,P], mean over the K tiles

// reductions / losses
Var sum_all(Var x);
Var mean_all(Var x);
Var sum_squares(Var x);
Var l1_diff(Var a, Var b);
Var l2_sq_diff(Var a, Var b);
Var rows_l2_normalize(Var x);
Var rows_dot(Var a, Var b);  // [n,m],[n,m] -> [n,1]
Var instance_norm_rows(Var x, double eps = 1e-5);
// Sum over rows of -log softmax(logits_row)[label].
Var cross_entropy_rows(Var logits, const std::vector<int>& labels);
Var affine_scalar(Var x, Var w, Var b);  // w,b are [1,1] parameters

}  // namespace ad

// Plain (non-tape) helpers shared with inference paths.
Tensor mat_inverse(const Tensor& w);
double mat_logabsdet(const Tensor& w);

}  // namespace vox

#endif  // VOXTRACER_AUTODIFF_HPP_
