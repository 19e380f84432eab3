// Copyright 2026 Orthros Authors
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

#ifndef ORTHROS_TENSOR_H_
#define ORTHROS_TENSOR_H_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "orthros/common.h"

namespace orthros {

// Dense row-major tensor of float or double. Rank is the length of `shape`;
// a scalar is represented as shape {1}.
template <typename S>
struct Tensor {
  std::vector<int> shape;
  std::vector<S> data;

  Tensor() = default;
  Tensor(int r, int c) : shape{r, c}, data(static_cast<size_t>(r) * c, S(0)) {
    check(r > 0 && c > 0, "tensor: dimensions must be positive");
  }
  explicit Tensor(std::vector<int> dims) : shape(std::move(dims)) {
    int64_t n = 1;
    for (int d : shape) {
      check(d > 0, "tensor: dimensions must be positive");
      n *= d;
    }
    data.assign(static_cast<size_t>(n), S(0));
  }

  static Tensor scalar(S v) {
    Tensor t(std::vector<int>{1});
    t.data[0] = v;
    return t;
  }

  int rank() const { return static_cast<int>(shape.size()); }
  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int rows() const {
    check(rank() >= 1, "tensor: rows() on rank-0");
    return shape[0];
  }
  int cols() const {
    check(rank() == 2, "tensor: cols() needs rank 2");
    return shape[1];
  }

  S& at(int i, int j) {
    return data[static_cast<size_t>(i) * shape[1] + j];
  }
  S at(int i, int j) const {
    return data[static_cast<size_t>(i) * shape[1] + j];
  }
  S& operator[](int64_t i) { return data[static_cast<size_t>(i)]; }
  S operator[](int64_t i) const { return data[static_cast<size_t>(i)]; }

  void fill(S v) { std::fill(data.begin(), data.end(), v); }
  void zero() { fill(S(0)); }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

// Trainable weight with its gradient accumulator. Names are slash-free
// dotted paths, unique within a model.
template <typename S>
struct Parameter {
  std::string name;
  Tensor<S> value;
  Tensor<S> grad;

  Parameter() = default;
  Parameter(std::string n, Tensor<S> v)
      : name(std::move(n)), value(std::move(v)), grad(value.shape) {}

  void zero_grad() { grad.zero(); }
};

template <typename S>
bool all_finite(const Tensor<S>& t) {
  for (S v : t.data) {
    if (!std::isfinite(static_cast<double>(v))) return false;
  }
  return true;
}

// Numerically stable softmax along `axis`; slices are independent.
template <typename S>
Tensor<S> softmax(const Tensor<S>& x, int axis) {
  check(axis >= 0 && axis < x.rank(), "softmax: axis out of range");
  check(all_finite(x), "softmax: non-finite input");
  int64_t outer = 1, inner = 1;
  for (int a = 0; a < axis; ++a) outer *= x.shape[a];
  for (int a = axis + 1; a < x.rank(); ++a) inner *= x.shape[a];
  int n = x.shape[axis];
  Tensor<S> y(x.shape);
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t in = 0; in < inner; ++in) {
      const int64_t base = o * n * inner + in;
      double m = -std::numeric_limits<double>::infinity();
      for (int i = 0; i < n; ++i)
        m = std::max(m, static_cast<double>(x[base + i * inner]));
      double z = 0.0;
      for (int i = 0; i < n; ++i)
        z += std::exp(static_cast<double>(x[base + i * inner]) - m);
      for (int i = 0; i < n; ++i)
        y[base + i * inner] = static_cast<S>(
            std::exp(static_cast<double>(x[base + i * inner]) - m) / z);
    }
  }
  return y;
}

template <typename S>
Tensor<S> log_softmax(const Tensor<S>& x, int axis) {
  check(axis >= 0 && axis < x.rank(), "log_softmax: axis out of range");
  check(all_finite(x), "log_softmax: non-finite input");
  int64_t outer = 1, inner = 1;
  for (int a = 0; a < axis; ++a) outer *= x.shape[a];
  for (int a = axis + 1; a < x.rank(); ++a) inner *= x.shape[a];
  int n = x.shape[axis];
  Tensor<S> y(x.shape);
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t in = 0; in < inner; ++in) {
      const int64_t base = o * n * inner + in;
      double m = -std::numeric_limits<double>::infinity();
      for (int i = 0; i < n; ++i)
        m = std::max(m, static_cast<double>(x[base + i * inner]));
      double z = 0.0;
      for (int i = 0; i < n; ++i)
        z += std::exp(static_cast<double>(x[base + i * inner]) - m);
      const double lse = m + std::log(z);
      for (int i = 0; i < n; ++i)
        y[base + i * inner] =
            static_cast<S>(static_cast<double>(x[base + i * inner]) - lse);
    }
  }
  return y;
}

// Index of the largest entry in row i; ties resolve to the lowest index.
template <typename S>
int argmax_row(const Tensor<S>& x, int i) {
  check(x.rank() == 2, "argmax_row: rank-2 input required");
  int best = 0;
  for (int j = 1; j < x.cols(); ++j) {
    if (x.at(i, j) > x.at(i, best)) best = j;
  }
  return best;
}

}  // namespace orthros

#endif  // ORTHROS_TENSOR_H_
