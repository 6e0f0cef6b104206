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

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "codematch/util/error.hpp"

namespace codematch::nn {

// Dense row-major tensor of rank <= 2. Vectors are 1 x D rows, scalars 1 x 1.
template <typename T>
struct Tensor {
  using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  int rows = 0;
  int cols = 0;
  std::vector<T> data;

  Tensor() = default;
  Tensor(int r, int c, T fill = T(0)) : rows(r), cols(c) {
    if (r < 0 || c < 0) throw ShapeError("negative tensor dimension");
    data.assign(static_cast<std::size_t>(r) * c, fill);
  }

  static Tensor from(int r, int c, std::vector<T> values) {
    Tensor t(r, c);
    if (values.size() != t.data.size()) {
      throw ShapeError("tensor data length " + std::to_string(values.size()) + " != " + std::to_string(t.data.size()));
    }
    t.data = std::move(values);
    return t;
  }
  static Tensor row(std::vector<T> values) {
    const int n = static_cast<int>(values.size());
    return from(1, n, std::move(values));
  }
  static Tensor scalar(T v) { return from(1, 1, {v}); }
  static Tensor from_matrix(const Matrix& m) {
    Tensor t(static_cast<int>(m.rows()), static_cast<int>(m.cols()));
    mat_of(t) = m;
    return t;
  }

  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }
  std::vector<int> shape() const { return {rows, cols}; }
  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }

  T& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  T operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  T item() const {
    if (size() != 1) throw ShapeError("item() on a non-scalar tensor");
    return data[0];
  }

  Eigen::Map<Matrix> mat() { return mat_of(*this); }
  Eigen::Map<const Matrix> mat() const { return {data.data(), rows, cols}; }

  bool all_finite() const {
    for (T v : data) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(rows, cols);
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }

  bool operator==(const Tensor&) const = default;

 private:
  static Eigen::Map<Matrix> mat_of(Tensor& t) { return {t.data.data(), t.rows, t.cols}; }
};

inline std::string shape_str(int r, int c) { return "[" + std::to_string(r) + "x" + std::to_string(c) + "]"; }

template <typename T>
std::string shape_str(const Tensor<T>& t) {
  return shape_str(t.rows, t.cols);
}

}  // namespace codematch::nn
