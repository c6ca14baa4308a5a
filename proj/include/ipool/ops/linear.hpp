/* Copyright (c) 2026 The ipool Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License. */

#pragma once

#include <cstddef>
#include <vector>

#include "ipool/ops/conv.hpp"
#include "ipool/tensor.hpp"

namespace ipool {

/// Fully connected layer; weight is (out_dim, in_dim) row-major.
template <typename T>
struct BasicLinearParams {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  std::vector<T> weight;
  std::vector<T> bias;

  BasicLinearParams() = default;
  BasicLinearParams(std::size_t in, std::size_t out)
      : in_dim(in), out_dim(out), weight(in * out, T(0)), bias(out, T(0)) {}

  BasicLinearParams zeros_like() const {
    return BasicLinearParams(in_dim, out_dim);
  }

  void validate() const {
    IPOOL_CHECK_SHAPE(weight.size() == in_dim * out_dim,
                      "linear weight length != in_dim*out_dim");
    IPOOL_CHECK_SHAPE(bias.size() == out_dim, "linear bias length != out_dim");
  }

  template <typename U>
  BasicLinearParams<U> cast() const {
    BasicLinearParams<U> r(in_dim, out_dim);
    r.weight.assign(weight.begin(), weight.end());
    r.bias.assign(bias.begin(), bias.end());
    return r;
  }

  friend bool operator==(const BasicLinearParams&,
                         const BasicLinearParams&) = default;
};

using LinearParams = BasicLinearParams<float>;
using LinearParams64 = BasicLinearParams<double>;

template <typename T>
struct LinearGrads {
  BasicTensor<T> dx;
  BasicLinearParams<T> dp;
};

/// y = W x + b per sample; x is flattened over (c, h, w). Output is
/// (n, out_dim, 1, 1).
template <typename T>
BasicTensor<T> linear_forward(const BasicTensor<T>& x,
                              const BasicLinearParams<T>& p) {
  p.validate();
  IPOOL_CHECK_SHAPE(x.shape().sample() == p.in_dim,
                    "linear input has " + std::to_string(x.shape().sample()) +
                        " features, expected " + std::to_string(p.in_dim));
  BasicTensor<T> y(Shape{x.n(), p.out_dim, 1, 1});
  for (std::size_t n = 0; n < x.n(); ++n) {
    const T* xs = x.sample(n);
    T* ys = y.sample(n);
    for (std::size_t o = 0; o < p.out_dim; ++o)
      ys[o] = p.bias[o] + detail::dot(p.weight.data() + o * p.in_dim, xs, p.in_dim);
  }
  return y;
}

/// dW = dy x^T, dx = W^T dy, db = dy (summed over the batch).
template <typename T>
LinearGrads<T> linear_backward(const BasicTensor<T>& x,
                               const BasicLinearParams<T>& p,
                               const BasicTensor<T>& dy) {
  p.validate();
  IPOOL_CHECK_SHAPE(x.shape().sample() == p.in_dim,
                    "linear backward: input dim mismatch");
  IPOOL_CHECK_SHAPE(dy.n() == x.n() && dy.shape().sample() == p.out_dim,
                    "linear backward: dy dims mismatch");
  LinearGrads<T> g{BasicTensor<T>(x.shape()), p.zeros_like()};
  for (std::size_t n = 0; n < x.n(); ++n) {
    const T* xs = x.sample(n);
    const T* ds = dy.sample(n);
    T* dxs = g.dx.sample(n);
    for (std::size_t o = 0; o < p.out_dim; ++o) {
      const T d = ds[o];
      g.dp.bias[o] += d;
      T* dw = g.dp.weight.data() + o * p.in_dim;
      const T* w = p.weight.data() + o * p.in_dim;
      for (std::size_t i = 0; i < p.in_dim; ++i) {
        dw[i] += d * xs[i];
        dxs[i] += w[i] * d;
      }
    }
  }
  return g;
}

}  // namespace ipool
