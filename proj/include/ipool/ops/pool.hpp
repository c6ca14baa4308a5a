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

#include "ipool/tensor.hpp"

namespace ipool {

/// Pooled values plus, for every output element, the flat index of the input
/// element that won its window.
template <typename T>
struct BasicMaxPoolResult {
  BasicTensor<T> y;
  std::vector<std::size_t> argmax;
  Shape input_shape;
};

using MaxPoolResult = BasicMaxPoolResult<float>;

template <typename T>
BasicMaxPoolResult<T> maxpool2d_forward(const BasicTensor<T>& x,
                                        std::size_t window,
                                        std::size_t stride) {
  IPOOL_CHECK_SHAPE(window >= 1 && stride >= 1,
                    "maxpool window and stride must be >= 1");
  IPOOL_CHECK_SHAPE(x.h() >= window && x.w() >= window,
                    "maxpool window " + std::to_string(window) +
                        " exceeds spatial dims " + x.shape().str());
  const Shape os{x.n(), x.c(), (x.h() - window) / stride + 1,
                 (x.w() - window) / stride + 1};
  BasicMaxPoolResult<T> r{BasicTensor<T>(os),
                          std::vector<std::size_t>(os.count()), x.shape()};
  std::size_t out = 0;
  for (std::size_t n = 0; n < os.n; ++n) {
    for (std::size_t c = 0; c < os.c; ++c) {
      const std::size_t base = (n * x.c() + c) * x.h() * x.w();
      for (std::size_t i = 0; i < os.h; ++i) {
        for (std::size_t j = 0; j < os.w; ++j, ++out) {
          std::size_t best = base + (i * stride) * x.w() + j * stride;
          T bv = x[best];
          for (std::size_t u = 0; u < window; ++u) {
            const std::size_t row = base + (i * stride + u) * x.w() + j * stride;
            for (std::size_t v = 0; v < window; ++v) {
              // strict > keeps the first row-major occurrence on ties
              if (x[row + v] > bv) {
                bv = x[row + v];
                best = row + v;
              }
            }
          }
          r.y[out] = bv;
          r.argmax[out] = best;
        }
      }
    }
  }
  return r;
}

/// Routes dy to the recorded argmax positions; zeros elsewhere.
template <typename T>
BasicTensor<T> maxpool2d_backward(const std::vector<std::size_t>& argmax,
                                  const BasicTensor<T>& dy,
                                  const Shape& input_shape) {
  IPOOL_CHECK_SHAPE(argmax.size() == dy.size(),
                    "maxpool backward: argmax does not match dy dims");
  BasicTensor<T> dx(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) {
    IPOOL_CHECK_SHAPE(argmax[i] < dx.size(),
                      "maxpool backward: argmax index out of input range");
    dx[argmax[i]] += dy[i];
  }
  return dx;
}

}  // namespace ipool
