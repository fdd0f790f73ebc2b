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

#ifndef VOXTRACER_TENSOR_HPP_
#define VOXTRACER_TENSOR_HPP_

#include <cstddef>
#include <initializer_list>
#include <memory>
#include <vector>

#include "voxtracer/errors.hpp"
#include "voxtracer/util.hpp"

namespace vox {

namespace detail {
// Allocator whose default-construct is a no-op, so vectors of doubles can be
// sized without the memset. Large activation buffers are written over fully
// right after allocation.
template <typename T>
struct UninitAlloc : std::allocator<T> {
  template <typename U>
  struct rebind {
    using other = UninitAlloc<U>;
  };
  template <typename U, typename... Args>
  void construct(U* p, Args&&... args) {
    if constexpr (sizeof...(Args) > 0) ::new (static_cast<void*>(p)) U(std::forward<Args>(args)...);
  }
};
}  // namespace detail

using Buf = std::vector<double, detail::UninitAlloc<double>>;

// Dense row-major tensor of doubles, rank 1 or 2 in practice.
class Tensor {
 public:
  Tensor() = default;

  static Tensor uninit(int rows, int cols) {
    Tensor t;
    t.rows_ = rows;
    t.cols_ = cols;
    t.data_.resize(static_cast<std::size_t>(rows) * cols);
    return t;
  }

  static Tensor zeros(int rows, int cols) {
    Tensor t = uninit(rows, cols);
    std::fill(t.data_.begin(), t.data_.end(), 0.0);
    return t;
  }

  static Tensor full(int rows, int cols, double v) {
    Tensor t = uninit(rows, cols);
    std::fill(t.data_.begin(), t.data_.end(), v);
    return t;
  }

  static Tensor randn(int rows, int cols, Rng& rng, double stddev = 1.0) {
    Tensor t = uninit(rows, cols);
    for (auto& x : t.data_) x = stddev * rng.gaussian();
    return t;
  }

  static Tensor scalar(double v) { return full(1, 1, v); }

  static Tensor from_vector(const std::vector<double>& v, int rows, int cols) {
    if (static_cast<std::size_t>(rows) * cols != v.size()) throw RuntimeError("tensor: size mismatch in from_vector");
    Tensor t = uninit(rows, cols);
    std::copy(v.begin(), v.end(), t.data_.begin());
    return t;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  double operator()(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  bool same_shape(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  std::vector<double> to_vector() const { return std::vector<double>(data_.begin(), data_.end()); }

 private:
  int rows_ = 0;
  int cols_ = 0;
  Buf data_;
};

}  // namespace vox

#endif  // VOXTRACER_TENSOR_HPP_
