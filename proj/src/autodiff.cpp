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

#include "voxtracer/autodiff.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "voxtracer/errors.hpp"

namespace vox {

namespace {

using EMat = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using CEMat = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

EMat emap(Tensor& t) { return EMat(t.data(), t.rows(), t.cols()); }
CEMat emap(const Tensor& t) { return CEMat(t.data(), t.rows(), t.cols()); }

}  // namespace

const Tensor& Var::val() const { return tape->value(id); }

Var Tape::leaf(Tensor v) {
  nodes_.push_back(Node{std::move(v), Tensor(), nullptr, nullptr, false, false});
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::param(const Tensor& p) {
  nodes_.push_back(Node{Tensor(p), Tensor(), nullptr, &p, grad_enabled_, false});
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::make(Tensor value, std::vector<int> parents, std::function<void()> back) {
  bool req = false;
  if (grad_enabled_) {
    for (int pid : parents) req = req || nodes_[pid].requires_grad;
  }
  Node n;
  n.value = std::move(value);
  n.requires_grad = req;
  if (req) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Tensor& Tape::grad(int id) {
  Node& n = nodes_[id];
  if (!n.grad_ready) {
    n.grad = Tensor::zeros(n.value.rows(), n.value.cols());
    n.grad_ready = true;
  }
  return n.grad;
}

void Tape::backward(Var loss) {
  if (!grad_enabled_) throw RuntimeError("tape: backward on a grad-disabled tape");
  if (loss.val().size() != 1) throw RuntimeError("tape: loss must be a scalar");
  grad(loss.id)[0] = 1.0;
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.requires_grad && n.grad_ready && n.back) n.back();
  }
}

void Tape::accumulate_param_grads(GradMap& out) const {
  for (const Node& n : nodes_) {
    if (n.param != nullptr && n.grad_ready) {
      auto it = out.find(n.param);
      if (it == out.end()) {
        out.emplace(n.param, n.grad);
      } else {
        EMat g = emap(it->second);
        g += emap(n.grad);
      }
    }
  }
}

namespace ad {

namespace {

void check_same_shape(Var a, Var b, const char* op) {
  if (!a.val().same_shape(b.val())) throw RuntimeError(std::string(op) + ": shape mismatch");
}

}  // namespace

Var add(Var a, Var b) {
  check_same_shape(a, b, "add");
  Tensor y = a.val();
  emap(y) += emap(b.val());
  Tape* t = a.tape;
  int ai = a.id, bi = b.id;
  return t->make(std::move(y), {ai, bi}, [t, ai, bi, yi = static_cast<int>(t->node_count())]() {
    const Tensor& g = t->grad(yi);
    if (t->needs_grad(ai)) emap(t->grad(ai)) += emap(g);
    if (t->needs_grad(bi)) emap(t->grad(bi)) += emap(g);
  });
}

Var sub(Var a, Var b) {
  check_same_shape(a, b, "sub");
  Tensor y = a.val();
  emap(y) -= emap(b.val());
  Tape* t = a.tape;
  int ai = a.id, bi = b.id;
  return t->make(std::move(y), {ai, bi}, [t, ai, bi, yi = static_cast<int>(t->node_count())]() {
    const Tensor& g = t->grad(yi);
    if (t->needs_grad(ai)) emap(t->grad(ai)) += emap(g);
    if (t->needs_grad(bi)) emap(t->grad(bi)) -= emap(g);
  });
}

Var mul(Var a, Var b) {
  check_same_shape(a, b, "mul");
  Tensor y = a.val();
  emap(y).array() *= emap(b.val()).array();
  Tape* t = a.tape;
  int ai = a.id, bi = b.id;
  return t->make(std::move(y), {ai, bi}, [t, ai, bi, yi = static_cast<int>(t->node_count())]() {
    const Tensor& g = t->grad(yi);
    if (t->needs_grad(ai)) emap(t->grad(ai)).array() += emap(g).array() * emap(t->value(bi)).array();
    if (t->needs_grad(bi)) emap(t->grad(bi)).array() += emap(g).array() * emap(t->value(ai)).array();
  });
}

Var scale(Var a, double c) {
  Tensor y = a.val();
  emap(y) *= c;
  Tape* t = a.tape;
  int ai = a.id;
  return t->make(std::move(y), {ai}, [t, ai, c, yi = static_cast<int>(t->node_count())]() {
    if (t->needs_grad(ai)) emap(t->grad(ai)) += c * emap(t->grad(yi));
  });
}

Var add_const(Var a, double c) {
  Tensor y = a.val();
  emap(y).array() += c;
  Tape* t = a.tape;
  int ai = a.id;
  return t->make(std::move(y), {ai}, [t, ai, yi = static_cast<int>(t->node_count())]() {
    if (t->needs_grad(ai)) emap(t->grad(ai)) += emap(t->grad(yi));
  });
}

Var tanh_v(Var a) {
  Tensor y = a.val();
  emap(y) = emap(y).array().tanh();
  Tape* t = a.tape;
  int ai = a.id;
  return t->make(std::move(y), {ai}, [t, ai, yi = static_cast<int>(t->node_count())]() {
    if (!t->needs_grad(ai)) return;
    auto yv = emap(t->value(yi));
    emap(t->grad(ai)).array() += emap(t->grad(yi)).array() * (1.0 - yv.array().square());
  });
}

Var sigmoid_v(Var a) {
  Tensor y = a.val();
  emap(y) = 1.0 / (1.0 + (-emap(y).array()).exp());
  Tape* t = a.tape;
  int ai = a.id;
  return t->make(std::move(y), {ai}, [t, ai, yi = static_cast<int>(t->node_count())]() {
    if (!t->needs_grad(ai)) return;
    auto yv = emap(t->value(yi));
    emap(t->grad(ai)).array() += emap(t->grad(yi)).array() * yv.array() * (1.0 - yv.array());
  });
}

Var exp_v(Var a) {
  Tensor y = a.val();
  emap(y) = emap(y).array().exp();
  Tape* t = a.tape;
  int ai = a.id;
  return t->make(std::move(y), {ai}, [t, ai, yi = static_cast<int>(t->node_count())]() {
    if (!t->needs_grad(ai)) return;
    emap(t->grad(ai)).array() += emap(t->grad(yi)).array() * emap(t->value(yi)).array();
  });
}

Var clamp_v(Var a, double lo, double hi) {
  Tensor y = a.val();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::min(hi, std::max(lo, y[i]));
  Tape* t = a.tape;
  int ai = a.id;
  return t->make(std::move(y), {ai}, [t, ai, lo, hi, yi = static_cast<int>(t->node_count())]() {
    if (!t->needs_grad(ai)) return;
    const Tensor& x = t->value(ai);
    const Tensor& g = t->grad(yi);
    Tensor& ga = t->grad(ai);
    for (std::size_t i = 0; i < x.size(); ++i)
      if (x[i] > lo && x[i] < hi) ga[i] += g[i];
  });
}

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) throw RuntimeError("matmul: inner dimension mismatch");
  Tensor y = Tensor::uninit(a.rows(), b.cols());
  emap(y).noalias() = emap(a.val()) * emap(b.val());
  Tape* t = a.tape;
  int ai = a.id, bi = b.id;
  return t->make(std::move(y), {ai, bi}, [t, ai, bi, yi = static_cast<int>(t->node_count())]() {
    const Tensor& g = t->grad(yi);
    if (t->needs_grad(ai)) emap(t->grad(ai)).noalias() += emap(g) * emap(t->value(bi)).transpose();
    if (t->needs_grad(bi)) emap(t->grad(bi)).noalias() += emap(t->value(ai)).transpose() * emap(g);
  });
}

Var linear(Var x, Var w, Var b) {
  if (x.cols() != w.cols()) throw RuntimeError("linear: feature dimension mismatch");
  Tensor y = Tensor::uninit(x.rows(), w.rows());
  emap(y).noalias() = emap(x.val()) * emap(w.val()).transpose();
  const bool has_bias = b.tape != nullptr;
  if (has_bias) emap(y).rowwise() += emap(b.val()).row(0);
  Tape* t = x.tape;
  int xi = x.id, wi = w.id, bi = has_bias ? b.id : -1;
  std::vector<int> parents = {xi, wi};
  if (has_bias) parents.push_back(bi);
  return t->make(std::move(y), parents, [t, xi, wi, bi, yi = static_cast<int>(t->node_count())]() {
    const Tensor& g = t->grad(yi);
    if (t->needs_grad(xi)) emap(t->grad(xi)).noalias() += emap(g) * emap(t->value(wi));
    if (t->needs_grad(wi)) emap(t->grad(wi)).noalias() += emap(g).transpose() * emap(t->value(xi));
    if (bi >= 0 && t->needs_grad(bi)) emap(t->grad(bi)).row(0) += emap(g).colwise().sum();
  });
}

namespace {

// col(ci*K + k, t) = x(ci, t + (k - K/2) * dilation), zero outside.
Tensor im2col(const Tensor& x, int kernel, int dilation) {
  const int c_in = x.rows(), T = x.cols();
  const int half = kernel / 2;
  Tensor col = Tensor::zeros(c_in * kernel, T);
  for (int ci = 0; ci < c_in; ++ci) {
    for (int k = 0; k < kernel; ++k) {
      const int off = (k - half) * dilation;
      const int t0 = std::max(0, -off);
      const int t1 = std::min(T, T - off);
      double* dst = col.data() + static_cast<std::size_t>(ci * kernel + k) * T;
      const double* src = x.data() + static_cast<std::size_t>(ci) * T + off;
      for (int t = t0; t < t1; ++t) dst[t] = src[t];
    }
  }
  return col;
}

void col2im_add(const Tensor& col, int kernel, int dilation, Tensor& gx) {
  const int c_in = gx.rows(), T = gx.cols();
  const int half = kernel / 2;
  for (int ci = 0; ci < c_in; ++ci) {
    for (int k = 0; k < kernel; ++k) {
      const int off = (k - half) * dilation;
      const int t0 = std::max(0, -off);
      const int t1 = std::min(T, T - off);
      const double* src = col.data() + static_cast<std::size_t>(ci * kernel + k) * T;
      double* dst = gx.data() + static_cast<std::size_t>(ci) * T + off;
      for (int t = t0; t < t1; ++t) dst[t] += src[t];
    }
  }
}

}  // namespace

Var conv1d(Var x, Var w, Var b, int kernel, int dilation) {
  if (kernel % 2 == 0) throw RuntimeError("conv1d: kernel must be odd");
  if (w.cols() != x.rows() * kernel) throw RuntimeError("conv1d: kernel layout mismatch");
  Tape* t = x.tape;
  const int T = x.cols();
  Tensor col = im2col(x.val(), kernel, dilation);
  Tensor y = Tensor::uninit(w.rows(), T);
  emap(y).noalias() = emap(w.val()) * emap(col);
  const bool has_bias = b.tape != nullptr;
  if (has_bias) emap(y).colwise() += emap(b.val()).col(0);
  int xi = x.id, wi = w.id, bi = has_bias ? b.id : -1;
  std::vector<int> parents = {xi, wi};
  if (has_bias) parents.push_back(bi);
  // col is captured for the weight gradient; shared_ptr keeps the closure copyable.
  auto col_keep = std::make_shared<Tensor>(std::move(col));
  return t->make(std::move(y), parents,
                 [t, xi, wi, bi, kernel, dilation, col_keep, yi = static_cast<int>(t->node_count())]() {
                   const Tensor& g = t->grad(yi);
                   if (t->needs_grad(wi)) emap(t->grad(wi)).noalias() += emap(g) * emap(*col_keep).transpose();
                   if (bi >= 0 && t->needs_grad(bi)) emap(t->grad(bi)).col(0) += emap(g).rowwise().sum();
                   if (t->needs_grad(xi)) {
                     Tensor gcol = Tensor::uninit(col_keep->rows(), col_keep->cols());
                     emap(gcol).noalias() = emap(t->value(wi)).transpose() * emap(g);
                     col2im_add(gcol, kernel, dilation, t->grad(xi));
                   }
                 });
}

Var logdet_mat(Var w) {
  if (w.rows() != w.cols()) throw RuntimeError("logdet: square matrix required");
  Eigen::MatrixXd m = emap(w.val());
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(m);
  double ld = 0.0;
  for (int i = 0; i < m.rows(); ++i) ld += std::log(std::abs(lu.matrixLU()(i, i)));
  if (!std::isfinite(ld)) throw RuntimeError("logdet: singular matrix");
  Tape* t = w.tape;
  int wi = w.id;
  return t->make(Tensor::scalar(ld), {wi}, [t, wi, yi = static_cast<int>(t->node_count())]() {
    if (!t->needs_grad(wi)) return;
    Eigen::MatrixXd m2 = emap(t->value(wi));
    Eigen::MatrixXd winv_t = m2.inverse().transpose();
    const double g = t->grad(yi)[0];
    for (int r = 0; r < m2.rows(); ++r)
      for (int c = 0; c < m2.cols(); ++c) t->grad(wi)(r, c) += g * winv_t(r, c);
  });
}

Var transpose(Var x) {
  Tensor y = Tensor::uninit(x.cols(), x.rows());
  emap(y) = emap(x.val()).transpose();
  Tape* t = x.tape;
  int xi = x.id;
  return t->make(std::move(y), {xi}, [t, xi, yi = static_cast<int>(t->node_count())]() {
    if (t->needs_grad(xi)) emap(t->grad(xi)) += emap(t->grad(yi)).transpose();
  });
}

Var reshape(Var x, int rows, int cols) {
  if (static_cast<std::size_t>(rows) * cols != x.val().size()) throw RuntimeError("reshape: size mismatch");
  Tensor y = Tensor::uninit(rows, cols);
  std::copy(x.val().data(), x.val().data() + x.val().size(), y.data());
  Tape* t = x.tape;
  int xi = x.id;
  return t->make(std::move(y), {xi}, [t, xi, yi = static_cast<int>(t->node_count())]() {
    if (!t->needs_grad(xi)) return;
    const Tensor& g = t->grad(yi);
    Tensor& gx = t->grad(xi);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

Var slice_rows(Var x, int r0, int r1) {
  if (r0 < 0 || r1 > x.rows() || r0 >= r1) throw RuntimeError("slice_rows: bad range");
  Tensor y = Tensor::uninit(r1 - r0, x.cols());
  emap(y) = emap(x.val()).middleRows(r0, r1 - r0);
  Tape* t = x.tape;
  int xi = x.id;
  return t->make(std::move(y), {xi}, [t, xi, r0, r1, yi = static_cast<int>(t->node_count())]() {
    if (t->needs_grad(xi)) emap(t->grad(xi)).middleRows(r0, r1 - r0) += emap(t->grad(yi));
  });
}

Var slice_cols(Var x, int c0, int c1) {
  if (c0 < 0 || c1 > x.cols() || c0 >= c1) throw RuntimeError("slice_cols: bad range");
  Tensor y = Tensor::uninit(x.rows(), c1 - c0);
  emap(y) = emap(x.val()).middleCols(c0, c1 - c0);
  Tape* t = x.tape;
  int xi = x.id;
  return t->make(std::move(y), {xi}, [t, xi, c0, c1, yi = static_cast<int>(t->node_count())]() {
    if (t->needs_grad(xi)) emap(t->grad(xi)).middleCols(c0, c1 - c0) += emap(t->grad(yi));
  });
}

Var concat_rows(Var a, Var b) {
  if (a.cols() != b.cols()) throw RuntimeError("concat_rows: column mismatch");
  Tensor y = Tensor::uninit(a.rows() + b.rows(), a.cols());
  emap(y).topRows(a.rows()) = emap(a.val());
  emap(y).bottomRows(b.rows()) = emap(b.val());
  Tape* t = a.tape;
  int ai = a.id, bi = b.id, ar = a.rows(), br = b.rows();
  return t->make(std::move(y), {ai, bi}, [t, ai, bi, ar, br, yi = static_cast<int>(t->node_count())]() {
    const Tensor& g = t->grad(yi);
    if (t->needs_grad(ai)) emap(t->grad(ai)) += emap(g).topRows(ar);
    if (t->needs_grad(bi)) emap(t->grad(bi)) += emap(g).bottomRows(br);
  });
}

Var broadcast_col(Var d, int cols) {
  if (d.cols() != 1) throw RuntimeError("broadcast_col: expects [n,1]");
  Tensor y = Tensor::uninit(d.rows(), cols);
  emap(y) = emap(d.val()).col(0).replicate(1, cols);
  Tape* t = d.tape;
  int di = d.id;
  return t->make(std::move(y), {di}, [t, di, yi = static_cast<int>(t->node_count())]() {
    if (t->needs_grad(di)) emap(t->grad(di)).col(0) += emap(t->grad(yi)).rowwise().sum();
  });
}

Var repeat_cols(Var x, int k) {
  Tensor y = Tensor::uninit(x.rows(), x.cols() * k);
  for (int r = 0; r < x.rows(); ++r)
    for (int c = 0; c < x.cols(); ++c)
      for (int j = 0; j < k; ++j) y(r, c * k + j) = x.val()(r, c);
  Tape* t = x.tape;
  int xi = x.id;
  return t->make(std::move(y), {xi}, [t, xi, k, yi = static_cast<int>(t->node_count())]() {
    if (!t->needs_grad(xi)) return;
    const Tensor& g = t->grad(yi);
    Tensor& gx = t->grad(xi);
    for (int r = 0; r < gx.rows(); ++r)
      for (int c = 0; c < gx.cols(); ++c)
        for (int j = 0; j < k; ++j) gx(r, c) += g(r, c * k + j);
  });
}

Var avgpool_cols(Var x, int k) {
  if (x.cols() % k != 0) throw RuntimeError("avgpool_cols: length not divisible");
  Tensor y = Tensor::zeros(x.rows(), x.cols() / k);
  for (int r = 0; r < x.rows(); ++r)
    for (int c = 0; c < x.cols(); ++c) y(r, c / k) += x.val()(r, c) / k;
  Tape* t = x.tape;
  int xi = x.id;
  return t->make(std::move(y), {xi}, [t, xi, k, yi = static_cast<int>(t->node_count())]() {
    if (!t->needs_grad(xi)) return;
    const Tensor& g = t->grad(yi);
    Tensor& gx = t->grad(xi);
    for (int r = 0; r < gx.rows(); ++r)
      for (int c = 0; c < gx.cols(); ++c) gx(r, c) += g(r, c / k) / k;
  });
}

Var tile_mean(Var x, int period) {
  if (x.cols() % period != 0) throw RuntimeError("tile_mean: length not divisible by period");
  const int reps = x.cols() / period;
  Tensor y = Tensor::zeros(x.rows(), period);
  for (int r = 0; r < x.rows(); ++r)
    for (int c = 0; c < x.cols(); ++c) y(r, c % period) += x.val()(r, c) / reps;
  Tape* t = x.tape;
  int xi = x.id;
  return t->make(std::move(y), {xi}, [t, xi, period, reps, yi = static_cast<int>(t->node_count())]() {
    if (!t->needs_grad(xi)) return;
    const Tensor& g = t->grad(yi);
    Tensor& gx = t->grad(xi);
    for (int r = 0; r < gx.rows(); ++r)
      for (int c = 0; c < gx.cols(); ++c) gx(r, c) += g(r, c % period) / reps;
  });
}

Var sum_all(Var x) {
  Tape* t = x.tape;
  int xi = x.id;
  return t->make(Tensor::scalar(emap(x.val()).sum()), {xi}, [t, xi, yi = static_cast<int>(t->node_count())]() {
    if (t->needs_grad(xi)) emap(t->grad(xi)).array() += t->grad(yi)[0];
  });
}

Var mean_all(Var x) { return scale(sum_all(x), 1.0 / static_cast<double>(x.val().size())); }

Var sum_squares(Var x) {
  Tape* t = x.tape;
  int xi = x.id;
  return t->make(Tensor::scalar(emap(x.val()).array().square().sum()), {xi},
                 [t, xi, yi = static_cast<int>(t->node_count())]() {
                   if (t->needs_grad(xi)) emap(t->grad(xi)) += 2.0 * t->grad(yi)[0] * emap(t->value(xi));
                 });
}

Var l1_diff(Var a, Var b) {
  check_same_shape(a, b, "l1_diff");
  Tape* t = a.tape;
  int ai = a.id, bi = b.id;
  double s = (emap(a.val()) - emap(b.val())).array().abs().sum();
  return t->make(Tensor::scalar(s), {ai, bi}, [t, ai, bi, yi = static_cast<int>(t->node_count())]() {
    const double g = t->grad(yi)[0];
    const Tensor& av = t->value(ai);
    const Tensor& bv = t->value(bi);
    for (std::size_t i = 0; i < av.size(); ++i) {
      const double sgn = av[i] > bv[i] ? 1.0 : (av[i] < bv[i] ? -1.0 : 0.0);
      if (t->needs_grad(ai)) t->grad(ai)[i] += g * sgn;
      if (t->needs_grad(bi)) t->grad(bi)[i] -= g * sgn;
    }
  });
}

Var l2_sq_diff(Var a, Var b) {
  check_same_shape(a, b, "l2_sq_diff");
  Tape* t = a.tape;
  int ai = a.id, bi = b.id;
  double s = (emap(a.val()) - emap(b.val())).array().square().sum();
  return t->make(Tensor::scalar(s), {ai, bi}, [t, ai, bi, yi = static_cast<int>(t->node_count())]() {
    const double g = t->grad(yi)[0];
    auto av = emap(t->value(ai));
    auto bv = emap(t->value(bi));
    if (t->needs_grad(ai)) emap(t->grad(ai)) += 2.0 * g * (av - bv);
    if (t->needs_grad(bi)) emap(t->grad(bi)) -= 2.0 * g * (av - bv);
  });
}

Var rows_l2_normalize(Var x) {
  constexpr double kEps = 1e-12;
  Tensor y = x.val();
  std::vector<double> norms(y.rows());
  for (int r = 0; r < y.rows(); ++r) {
    double n2 = 0.0;
    for (int c = 0; c < y.cols(); ++c) n2 += y(r, c) * y(r, c);
    norms[r] = std::max(std::sqrt(n2), kEps);
    for (int c = 0; c < y.cols(); ++c) y(r, c) /= norms[r];
  }
  Tape* t = x.tape;
  int xi = x.id;
  auto norms_keep = std::make_shared<std::vector<double>>(std::move(norms));
  return t->make(std::move(y), {xi}, [t, xi, norms_keep, yi = static_cast<int>(t->node_count())]() {
    if (!t->needs_grad(xi)) return;
    const Tensor& yv = t->value(yi);
    const Tensor& g = t->grad(yi);
    Tensor& gx = t->grad(xi);
    for (int r = 0; r < yv.rows(); ++r) {
      double dot = 0.0;
      for (int c = 0; c < yv.cols(); ++c) dot += g(r, c) * yv(r, c);
      const double inv = 1.0 / (*norms_keep)[r];
      for (int c = 0; c < yv.cols(); ++c) gx(r, c) += (g(r, c) - dot * yv(r, c)) * inv;
    }
  });
}

Var rows_dot(Var a, Var b) {
  check_same_shape(a, b, "rows_dot");
  Tensor y = Tensor::uninit(a.rows(), 1);
  for (int r = 0; r < a.rows(); ++r) {
    double s = 0.0;
    for (int c = 0; c < a.cols(); ++c) s += a.val()(r, c) * b.val()(r, c);
    y(r, 0) = s;
  }
  Tape* t = a.tape;
  int ai = a.id, bi = b.id;
  return t->make(std::move(y), {ai, bi}, [t, ai, bi, yi = static_cast<int>(t->node_count())]() {
    const Tensor& g = t->grad(yi);
    const Tensor& av = t->value(ai);
    const Tensor& bv = t->value(bi);
    for (int r = 0; r < av.rows(); ++r) {
      for (int c = 0; c < av.cols(); ++c) {
        if (t->needs_grad(ai)) t->grad(ai)(r, c) += g(r, 0) * bv(r, c);
        if (t->needs_grad(bi)) t->grad(bi)(r, c) += g(r, 0) * av(r, c);
      }
    }
  });
}

Var instance_norm_rows(Var x, double eps) {
  const int R = x.rows(), C = x.cols();
  Tensor y = Tensor::uninit(R, C);
  std::vector<double> inv_std(R);
  for (int r = 0; r < R; ++r) {
    double mu = 0.0;
    for (int c = 0; c < C; ++c) mu += x.val()(r, c);
    mu /= C;
    double var = 0.0;
    for (int c = 0; c < C; ++c) var += (x.val()(r, c) - mu) * (x.val()(r, c) - mu);
    var /= C;
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (int c = 0; c < C; ++c) y(r, c) = (x.val()(r, c) - mu) * inv_std[r];
  }
  Tape* t = x.tape;
  int xi = x.id;
  auto keep = std::make_shared<std::vector<double>>(std::move(inv_std));
  return t->make(std::move(y), {xi}, [t, xi, keep, yi = static_cast<int>(t->node_count())]() {
    if (!t->needs_grad(xi)) return;
    const Tensor& yv = t->value(yi);
    const Tensor& g = t->grad(yi);
    Tensor& gx = t->grad(xi);
    const int C2 = yv.cols();
    for (int r = 0; r < yv.rows(); ++r) {
      double gm = 0.0, gym = 0.0;
      for (int c = 0; c < C2; ++c) {
        gm += g(r, c);
        gym += g(r, c) * yv(r, c);
      }
      gm /= C2;
      gym /= C2;
      for (int c = 0; c < C2; ++c) gx(r, c) += (*keep)[r] * (g(r, c) - gm - yv(r, c) * gym);
    }
  });
}

Var cross_entropy_rows(Var logits, const std::vector<int>& labels) {
  const int R = logits.rows(), C = logits.cols();
  if (static_cast<int>(labels.size()) != R) throw RuntimeError("cross_entropy_rows: label count mismatch");
  Tensor softmax = Tensor::uninit(R, C);
  double loss = 0.0;
  for (int r = 0; r < R; ++r) {
    double mx = logits.val()(r, 0);
    for (int c = 1; c < C; ++c) mx = std::max(mx, logits.val()(r, c));
    double z = 0.0;
    for (int c = 0; c < C; ++c) z += std::exp(logits.val()(r, c) - mx);
    for (int c = 0; c < C; ++c) softmax(r, c) = std::exp(logits.val()(r, c) - mx) / z;
    loss -= logits.val()(r, labels[r]) - mx - std::log(z);
  }
  Tape* t = logits.tape;
  int li = logits.id;
  auto sm = std::make_shared<Tensor>(std::move(softmax));
  auto lab = std::make_shared<std::vector<int>>(labels);
  return t->make(Tensor::scalar(loss), {li}, [t, li, sm, lab, yi = static_cast<int>(t->node_count())]() {
    if (!t->needs_grad(li)) return;
    const double g = t->grad(yi)[0];
    Tensor& gl = t->grad(li);
    for (int r = 0; r < sm->rows(); ++r) {
      for (int c = 0; c < sm->cols(); ++c) gl(r, c) += g * (*sm)(r, c);
      gl(r, (*lab)[r]) -= g;
    }
  });
}

Var affine_scalar(Var x, Var w, Var b) {
  if (w.val().size() != 1 || b.val().size() != 1) throw RuntimeError("affine_scalar: w,b must be scalars");
  Tensor y = x.val();
  emap(y) = emap(y) * w.val()[0];
  emap(y).array() += b.val()[0];
  Tape* t = x.tape;
  int xi = x.id, wi = w.id, bi = b.id;
  return t->make(std::move(y), {xi, wi, bi}, [t, xi, wi, bi, yi = static_cast<int>(t->node_count())]() {
    const Tensor& g = t->grad(yi);
    if (t->needs_grad(xi)) emap(t->grad(xi)) += t->value(wi)[0] * emap(g);
    if (t->needs_grad(wi)) t->grad(wi)[0] += (emap(g).array() * emap(t->value(xi)).array()).sum();
    if (t->needs_grad(bi)) t->grad(bi)[0] += emap(g).sum();
  });
}

}  // namespace ad

Tensor mat_inverse(const Tensor& w) {
  if (w.rows() != w.cols()) throw RuntimeError("mat_inverse: square matrix required");
  Eigen::MatrixXd m = emap(w);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
  if (!lu.isInvertible()) throw RuntimeError("mat_inverse: singular matrix");
  Eigen::MatrixXd inv = lu.inverse();
  Tensor out = Tensor::uninit(w.rows(), w.cols());
  for (int r = 0; r < w.rows(); ++r)
    for (int c = 0; c < w.cols(); ++c) out(r, c) = inv(r, c);
  return out;
}

double mat_logabsdet(const Tensor& w) {
  if (w.rows() != w.cols()) throw RuntimeError("logabsdet: square matrix required");
  Eigen::MatrixXd m = emap(w);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(m);
  double ld = 0.0;
  for (int i = 0; i < m.rows(); ++i) ld += std::log(std::abs(lu.matrixLU()(i, i)));
  return ld;
}

}  // namespace vox
