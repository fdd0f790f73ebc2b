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

#ifndef VOXTRACER_NN_HPP_
#define VOXTRACER_NN_HPP_

#include <deque>
#include <string>
#include <vector>

#include "voxtracer/autodiff.hpp"
#include "voxtracer/tensor.hpp"
#include "voxtracer/util.hpp"

namespace vox {

// Named parameter tensors with stable addresses (deque: no reallocation).
class ParamStore {
 public:
  Tensor* add(const std::string& name, Tensor init);
  Tensor* find(const std::string& name);
  const Tensor* find(const std::string& name) const;

  std::size_t size() const { return values_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  Tensor& value(std::size_t i) { return values_[i]; }
  const Tensor& value(std::size_t i) const { return values_[i]; }

  std::vector<Tensor*> all();

 private:
  std::deque<Tensor> values_;
  std::vector<std::string> names_;
};

struct Conv1dLayer {
  Tensor* w = nullptr;  // [out, in*kernel]
  Tensor* b = nullptr;  // [out, 1]
  int in_ch = 0, out_ch = 0, kernel = 1, dilation = 1;

  static Conv1dLayer create(ParamStore& ps, const std::string& prefix, int in_ch, int out_ch, int kernel,
                            int dilation, Rng& rng, bool zero_init = false);
  Var apply(Tape& t, Var x) const;
};

struct DenseLayer {
  Tensor* w = nullptr;  // [out, in]
  Tensor* b = nullptr;  // [1, out]

  static DenseLayer create(ParamStore& ps, const std::string& prefix, int in, int out, Rng& rng);
  Var apply(Tape& t, Var x) const;  // x [B, in] -> [B, out]
};

// Non-causal dilated-conv stack with gated activations, residual and skip
// connections, optional per-layer conditioning input, and a final 1x1
// projection. Dilation of layer l is 2^l.
struct WaveNet {
  int channels = 0, n_layers = 0, kernel = 3, cond_ch = 0;
  Conv1dLayer in_conv;
  std::vector<Conv1dLayer> dil;
  std::vector<Conv1dLayer> cond;
  std::vector<Conv1dLayer> res;
  std::vector<Conv1dLayer> skip;
  Conv1dLayer out_conv;

  static WaveNet create(ParamStore& ps, const std::string& prefix, int in_ch, int out_ch, int channels,
                        int n_layers, int cond_ch, Rng& rng, bool zero_out);
  // cond, when present, must already be [cond_ch, T].
  Var apply(Tape& t, Var x, Var cond_in = Var{}) const;
};

// One LSTM layer; state starts at zero. Weights follow the i,f,g,o gate order.
struct LstmLayer {
  Tensor* w_ih = nullptr;  // [4H, F]
  Tensor* w_hh = nullptr;  // [4H, H]
  Tensor* b = nullptr;     // [1, 4H]
  int hidden = 0;

  static LstmLayer create(ParamStore& ps, const std::string& prefix, int input, int hidden, Rng& rng);
  // steps: one [B, F] Var per frame. Returns all hidden states [B, H].
  std::vector<Var> apply_seq(Tape& t, const std::vector<Var>& steps) const;
};

class Adam {
 public:
  Adam(std::vector<Tensor*> params, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void step(const GradMap& grads);
  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }

 private:
  std::vector<Tensor*> params_;
  std::vector<Tensor> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
};

}  // namespace vox

#endif  // VOXTRACER_NN_HPP_
