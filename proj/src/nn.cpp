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

#include "voxtracer/nn.hpp"

#include <cmath>

#include "voxtracer/errors.hpp"

namespace vox {

Tensor* ParamStore::add(const std::string& name, Tensor init) {
  if (find(name) != nullptr) throw RuntimeError("param store: duplicate name " + name);
  values_.push_back(std::move(init));
  names_.push_back(name);
  return &values_.back();
}

Tensor* ParamStore::find(const std::string& name) {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return &values_[i];
  return nullptr;
}

const Tensor* ParamStore::find(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return &values_[i];
  return nullptr;
}

std::vector<Tensor*> ParamStore::all() {
  std::vector<Tensor*> out;
  out.reserve(values_.size());
  for (auto& v : values_) out.push_back(&v);
  return out;
}

Conv1dLayer Conv1dLayer::create(ParamStore& ps, const std::string& prefix, int in_ch, int out_ch, int kernel,
                                int dilation, Rng& rng, bool zero_init) {
  Conv1dLayer l;
  l.in_ch = in_ch;
  l.out_ch = out_ch;
  l.kernel = kernel;
  l.dilation = dilation;
  const double std = zero_init ? 0.0 : 1.0 / std::sqrt(static_cast<double>(in_ch * kernel));
  l.w = ps.add(prefix + ".w", zero_init ? Tensor::zeros(out_ch, in_ch * kernel) : Tensor::randn(out_ch, in_ch * kernel, rng, std));
  l.b = ps.add(prefix + ".b", Tensor::zeros(out_ch, 1));
  return l;
}

Var Conv1dLayer::apply(Tape& t, Var x) const {
  return ad::conv1d(x, t.param(*w), t.param(*b), kernel, dilation);
}

DenseLayer DenseLayer::create(ParamStore& ps, const std::string& prefix, int in, int out, Rng& rng) {
  DenseLayer l;
  l.w = ps.add(prefix + ".w", Tensor::randn(out, in, rng, 1.0 / std::sqrt(static_cast<double>(in))));
  l.b = ps.add(prefix + ".b", Tensor::zeros(1, out));
  return l;
}

Var DenseLayer::apply(Tape& t, Var x) const { return ad::linear(x, t.param(*w), t.param(*b)); }

WaveNet WaveNet::create(ParamStore& ps, const std::string& prefix, int in_ch, int out_ch, int channels,
                        int n_layers, int cond_ch, Rng& rng, bool zero_out) {
  WaveNet n;
  n.channels = channels;
  n.n_layers = n_layers;
  n.cond_ch = cond_ch;
  n.in_conv = Conv1dLayer::create(ps, prefix + ".in", in_ch, channels, 1, 1, rng);
  for (int l = 0; l < n_layers; ++l) {
    const std::string lp = prefix + ".l" + std::to_string(l);
    n.dil.push_back(Conv1dLayer::create(ps, lp + ".dil", channels, 2 * channels, 3, 1 << l, rng));
    if (cond_ch > 0) n.cond.push_back(Conv1dLayer::create(ps, lp + ".cond", cond_ch, 2 * channels, 1, 1, rng));
    n.res.push_back(Conv1dLayer::create(ps, lp + ".res", channels, channels, 1, 1, rng));
    n.skip.push_back(Conv1dLayer::create(ps, lp + ".skip", channels, channels, 1, 1, rng));
  }
  n.out_conv = Conv1dLayer::create(ps, prefix + ".out", channels, out_ch, 1, 1, rng, zero_out);
  return n;
}

Var WaveNet::apply(Tape& t, Var x, Var cond_in) const {
  Var h = in_conv.apply(t, x);
  Var skip_sum{};
  for (int l = 0; l < n_layers; ++l) {
    Var u = dil[l].apply(t, h);
    if (cond_ch > 0) {
      if (cond_in.tape == nullptr) throw RuntimeError("wavenet: conditioning input missing");
      u = ad::add(u, cond[l].apply(t, cond_in));
    }
    Var a = ad::tanh_v(ad::slice_rows(u, 0, channels));
    Var g = ad::sigmoid_v(ad::slice_rows(u, channels, 2 * channels));
    Var gated = ad::mul(a, g);
    h = ad::add(h, res[l].apply(t, gated));
    Var s = skip[l].apply(t, gated);
    skip_sum = (skip_sum.tape == nullptr) ? s : ad::add(skip_sum, s);
  }
  return out_conv.apply(t, skip_sum);
}

LstmLayer LstmLayer::create(ParamStore& ps, const std::string& prefix, int input, int hidden, Rng& rng) {
  LstmLayer l;
  l.hidden = hidden;
  l.w_ih = ps.add(prefix + ".w_ih", Tensor::randn(4 * hidden, input, rng, 1.0 / std::sqrt(static_cast<double>(input))));
  l.w_hh = ps.add(prefix + ".w_hh", Tensor::randn(4 * hidden, hidden, rng, 1.0 / std::sqrt(static_cast<double>(hidden))));
  Tensor bias = Tensor::zeros(1, 4 * hidden);
  for (int i = hidden; i < 2 * hidden; ++i) bias(0, i) = 1.0;  // forget-gate bias
  l.b = ps.add(prefix + ".b", std::move(bias));
  return l;
}

std::vector<Var> LstmLayer::apply_seq(Tape& t, const std::vector<Var>& steps) const {
  if (steps.empty()) throw RuntimeError("lstm: empty sequence");
  const int B = steps[0].rows();
  const int H = hidden;
  Var w_ih_v = t.param(*w_ih);
  Var w_hh_v = t.param(*w_hh);
  Var b_v = t.param(*b);
  Var h = t.leaf(Tensor::zeros(B, H));
  Var c = t.leaf(Tensor::zeros(B, H));
  std::vector<Var> out;
  out.reserve(steps.size());
  for (const Var& x : steps) {
    Var gates = ad::add(ad::linear(x, w_ih_v, b_v), ad::linear(h, w_hh_v, Var{}));
    Var i_g = ad::sigmoid_v(ad::slice_cols(gates, 0, H));
    Var f_g = ad::sigmoid_v(ad::slice_cols(gates, H, 2 * H));
    Var g_g = ad::tanh_v(ad::slice_cols(gates, 2 * H, 3 * H));
    Var o_g = ad::sigmoid_v(ad::slice_cols(gates, 3 * H, 4 * H));
    c = ad::add(ad::mul(f_g, c), ad::mul(i_g, g_g));
    h = ad::mul(o_g, ad::tanh_v(c));
    out.push_back(h);
  }
  return out;
}

Adam::Adam(std::vector<Tensor*> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (Tensor* p : params_) {
    m_.push_back(Tensor::zeros(p->rows(), p->cols()));
    v_.push_back(Tensor::zeros(p->rows(), p->cols()));
  }
}

void Adam::step(const GradMap& grads) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto it = grads.find(params_[i]);
    if (it == grads.end()) continue;
    const Tensor& g = it->second;
    Tensor& p = *params_[i];
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

}  // namespace vox
