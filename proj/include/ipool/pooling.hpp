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

// Size adapters that map a square H x H feature map of any admissible size
// onto a fixed h x h grid.
//
// Iterative pooling applies one shared 3x3, stride-2, pad-1 convolution
// log2(H / h) times; every step halves the spatial size. The same kernel
// serves every input size and every step, so its gradient is the sum of the
// per-step gradients. Steps are purely affine (no activation in between).
//
// Adaptive max pooling is the single-shot baseline: one max-pool with
// window = stride = H / h, which keeps one value per window and discards
// (H^2 - h^2) * C values in total.

#include <bit>
#include <cstdint>
#include <vector>

#include "ipool/error.hpp"
#include "ipool/ops/conv.hpp"
#include "ipool/ops/pool.hpp"
#include "ipool/rng.hpp"
#include "ipool/tensor.hpp"

namespace ipool {

inline bool is_power_of_two(std::size_t v) { return std::has_single_bit(v); }

/// Number of halvings that take H down to h, i.e. log2(H / h).
inline std::size_t num_iterations(std::size_t H, std::size_t h) {
  if (!is_power_of_two(H) || !is_power_of_two(h))
    throw DomainError("iterative pooling needs power-of-two sizes, got H=" +
                      std::to_string(H) + " h=" + std::to_string(h));
  if (H < h)
    throw DomainError("input size " + std::to_string(H) +
                      " is smaller than target " + std::to_string(h));
  return static_cast<std::size_t>(std::countr_zero(H) - std::countr_zero(h));
}

template <typename T>
struct BasicIterPoolParams {
  std::size_t channels = 0;
  BasicConvParams<T> kernel;  // the single shared kernel
  std::size_t target_h = 4;

  BasicIterPoolParams() = default;
  BasicIterPoolParams(std::size_t c, std::size_t target)
      : channels(c), kernel(c, c, 3, 2, 1), target_h(target) {
    validate();
  }

  void validate() const {
    if (!is_power_of_two(target_h))
      throw DomainError("iterative pooling target size must be a power of two");
    IPOOL_CHECK_SHAPE(kernel.in_ch == channels && kernel.out_ch == channels,
                      "shared kernel must map C channels to C channels");
    IPOOL_CHECK_SHAPE(kernel.kernel == 3 && kernel.stride == 2 && kernel.pad == 1,
                      "shared kernel must be 3x3, stride 2, pad 1");
    kernel.validate();
  }

  template <typename U>
  BasicIterPoolParams<U> cast() const {
    BasicIterPoolParams<U> r;
    r.channels = channels;
    r.kernel = kernel.template cast<U>();
    r.target_h = target_h;
    return r;
  }
};

using IterPoolParams = BasicIterPoolParams<float>;
using IterPoolParams64 = BasicIterPoolParams<double>;

/// Per-channel binomial low-pass [1 2 1]^T [1 2 1] / 16 plus uniform noise
/// in [-noise, noise]; the initial operator is close to blur-and-subsample
/// and keeps the mean of a constant map at every step.
template <typename T = float>
BasicIterPoolParams<T> make_iter_pool_params(std::size_t channels,
                                             std::size_t target_h,
                                             std::uint64_t seed,
                                             double noise = 0.01) {
  BasicIterPoolParams<T> p(channels, target_h);
  Rng rng(seed);
  for (auto& w : p.kernel.weight) w = static_cast<T>(rng.uniform(-noise, noise));
  constexpr int tap[3] = {1, 2, 1};
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j)
        p.kernel.weight[((c * channels + c) * 3 + i) * 3 + j] += T(tap[i] * tap[j]) / T(16);
  return p;
}

/// Forward output plus the input of every step, kept for the backward pass.
template <typename T>
struct BasicIterPoolTrace {
  BasicTensor<T> y;
  std::vector<BasicTensor<T>> step_inputs;

  std::size_t steps() const { return step_inputs.size(); }
};

using IterPoolTrace = BasicIterPoolTrace<float>;

template <typename T>
BasicIterPoolTrace<T> iterative_pool_forward(const BasicTensor<T>& x,
                                             const BasicIterPoolParams<T>& p) {
  p.validate();
  IPOOL_CHECK_SHAPE(x.h() == x.w(), "iterative pooling needs a square input, got " +
                                        x.shape().str());
  IPOOL_CHECK_SHAPE(x.c() == p.channels,
                    "iterative pooling channel mismatch: input " +
                        std::to_string(x.c()) + " vs kernel " +
                        std::to_string(p.channels));
  const std::size_t steps = num_iterations(x.h(), p.target_h);
  BasicIterPoolTrace<T> tr;
  tr.step_inputs.reserve(steps);
  BasicTensor<T> cur = x;
  for (std::size_t t = 0; t < steps; ++t) {
    BasicTensor<T> next = conv2d_forward(cur, p.kernel);
    tr.step_inputs.push_back(std::move(cur));
    cur = std::move(next);
  }
  tr.y = std::move(cur);
  return tr;
}

template <typename T>
struct BasicIterPoolGrads {
  BasicTensor<T> dx;
  BasicConvParams<T> dkernel;
};

/// Backprop through the unrolled chain; dkernel sums the per-step gradients.
template <typename T>
BasicIterPoolGrads<T> iterative_pool_backward(const BasicIterPoolTrace<T>& tr,
                                              const BasicIterPoolParams<T>& p,
                                              const BasicTensor<T>& dy) {
  p.validate();
  IPOOL_CHECK_SHAPE(dy.shape() == tr.y.shape(),
                    "iterative pooling backward: dy " + dy.shape().str() +
                        " does not match saved output " + tr.y.shape().str());
  BasicIterPoolGrads<T> g{dy, p.kernel.zeros_like()};
  for (std::size_t t = tr.steps(); t-- > 0;) {
    const auto& in = tr.step_inputs[t];
    IPOOL_CHECK_SHAPE(in.c() == p.channels &&
                          conv2d_output_shape(in.shape(), p.kernel) == g.dx.shape(),
                      "iterative pooling backward: stale intermediates");
    ConvGrads<T> step = conv2d_backward(in, p.kernel, g.dx);
    for (std::size_t i = 0; i < step.dp.weight.size(); ++i)
      g.dkernel.weight[i] += step.dp.weight[i];
    for (std::size_t i = 0; i < step.dp.bias.size(); ++i)
      g.dkernel.bias[i] += step.dp.bias[i];
    g.dx = std::move(step.dx);
  }
  return g;
}

/// Max-pool a square H x H map to h x h with window = stride = H / h.
template <typename T>
BasicMaxPoolResult<T> adaptive_max_pool(const BasicTensor<T>& x, std::size_t h) {
  IPOOL_CHECK_SHAPE(x.h() == x.w(), "adaptive max pool needs a square input");
  if (h == 0 || x.h() % h != 0)
    throw DomainError("adaptive max pool: " + std::to_string(x.h()) +
                      " is not divisible by " + std::to_string(h));
  const std::size_t window = x.h() / h;
  return maxpool2d_forward(x, window, window);
}

/// (H^2 - h^2) * C: inputs that no max-pool window retains.
inline std::uint64_t discarded_point_count(std::uint64_t H, std::uint64_t h,
                                           std::uint64_t C) {
  if (h > H)
    throw DomainError("discarded_point_count: h=" + std::to_string(h) +
                      " exceeds H=" + std::to_string(H));
  return (H * H - h * h) * C;
}

}  // namespace ipool
