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

// Finite-difference verification of every hand-derived gradient, run in
// double precision. Each case turns a tensor-valued op into a scalar by
// contracting its output with fixed random weights.

#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "ipool/gradcheck.hpp"
#include "ipool/ops/activation.hpp"
#include "ipool/ops/conv.hpp"
#include "ipool/ops/linear.hpp"
#include "ipool/ops/loss.hpp"
#include "ipool/ops/pool.hpp"
#include "ipool/pooling.hpp"
#include "ipool/rng.hpp"

namespace ipool {

struct GradCheckCase {
  std::string name;
  double max_rel_err = 0.0;
  std::size_t coords = 0;
};

struct GradCheckOptions {
  double eps = 1e-5;
  double tolerance = 1e-5;
  std::uint64_t seed = 7;
};

namespace detail {

inline std::vector<double> random_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

inline double weighted_sum(std::span<const double> y, const std::vector<double>& r) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * r[i];
  return s;
}

inline Tensor64 tensor_from(Shape s, std::span<const double> v) {
  return Tensor64(s, std::vector<double>(v.begin(), v.end()));
}

/// Checks d<r, op(x)>/dx for an op with no parameters of its own.
template <typename Fwd, typename Bwd>
GradCheckCase check_input_grad(std::string name, const Tensor64& x, Fwd fwd,
                               Bwd bwd, const GradCheckOptions& o, Rng& rng,
                               std::span<const bool> skip = {}) {
  const Tensor64 y = fwd(x);
  const auto r = random_vec(y.size(), rng);
  const Tensor64 dx = bwd(x, tensor_from(y.shape(), r));
  auto f = [&](std::span<const double> v) {
    return weighted_sum(fwd(tensor_from(x.shape(), v)).data(), r);
  };
  return {std::move(name), grad_check(f, x.data(), dx.data(), o.eps, skip), x.size()};
}

}  // namespace detail

inline std::vector<GradCheckCase> conv_grad_cases(const GradCheckOptions& o) {
  std::vector<GradCheckCase> out;
  Rng rng(derive_seed(o.seed, {1}));
  struct Geo { std::size_t n, c, hw, oc, k, s, p; const char* tag; };
  for (const Geo g : {Geo{1, 2, 8, 3, 3, 1, 1, "1x2x8x8 k3 s1 p1"},
                      Geo{2, 3, 8, 4, 3, 2, 1, "2x3x8x8 k3 s2 p1"},
                      Geo{1, 3, 5, 2, 1, 1, 0, "1x3x5x5 k1"}}) {
    Tensor64 x({g.n, g.c, g.hw, g.hw});
    for (auto& v : x.data()) v = rng.uniform(-1, 1);
    ConvParams64 p(g.c, g.oc, g.k, g.s, g.p);
    for (auto& v : p.weight) v = rng.uniform(-1, 1);
    for (auto& v : p.bias) v = rng.uniform(-1, 1);
    const Shape os = conv2d_output_shape(x.shape(), p);
    const auto r = detail::random_vec(os.count(), rng);
    const auto grads = conv2d_backward(x, p, detail::tensor_from(os, r));

    auto fx = [&](std::span<const double> v) {
      return detail::weighted_sum(
          conv2d_forward(detail::tensor_from(x.shape(), v), p).data(), r);
    };
    out.push_back({std::string("conv2d dx ") + g.tag,
                   grad_check(fx, x.data(), grads.dx.data(), o.eps), x.size()});
    auto fw = [&](std::span<const double> v) {
      ConvParams64 q = p;
      q.weight.assign(v.begin(), v.end());
      return detail::weighted_sum(conv2d_forward(x, q).data(), r);
    };
    out.push_back({std::string("conv2d dweight ") + g.tag,
                   grad_check(fw, p.weight, grads.dp.weight, o.eps), p.weight.size()});
    auto fb = [&](std::span<const double> v) {
      ConvParams64 q = p;
      q.bias.assign(v.begin(), v.end());
      return detail::weighted_sum(conv2d_forward(x, q).data(), r);
    };
    out.push_back({std::string("conv2d dbias ") + g.tag,
                   grad_check(fb, p.bias, grads.dp.bias, o.eps), p.bias.size()});
  }
  return out;
}

inline std::vector<GradCheckCase> linear_grad_cases(const GradCheckOptions& o) {
  Rng rng(derive_seed(o.seed, {2}));
  Tensor64 x({3, 2, 2, 2});
  for (auto& v : x.data()) v = rng.uniform(-1, 1);
  LinearParams64 p(8, 5);
  for (auto& v : p.weight) v = rng.uniform(-1, 1);
  for (auto& v : p.bias) v = rng.uniform(-1, 1);
  const auto r = detail::random_vec(3 * 5, rng);
  const auto g = linear_backward(x, p, detail::tensor_from({3, 5, 1, 1}, r));
  auto fx = [&](std::span<const double> v) {
    return detail::weighted_sum(
        linear_forward(detail::tensor_from(x.shape(), v), p).data(), r);
  };
  auto fw = [&](std::span<const double> v) {
    LinearParams64 q = p;
    q.weight.assign(v.begin(), v.end());
    return detail::weighted_sum(linear_forward(x, q).data(), r);
  };
  auto fb = [&](std::span<const double> v) {
    LinearParams64 q = p;
    q.bias.assign(v.begin(), v.end());
    return detail::weighted_sum(linear_forward(x, q).data(), r);
  };
  return {{"linear dx", grad_check(fx, x.data(), g.dx.data(), o.eps), x.size()},
          {"linear dweight", grad_check(fw, p.weight, g.dp.weight, o.eps), p.weight.size()},
          {"linear dbias", grad_check(fb, p.bias, g.dp.bias, o.eps), p.bias.size()}};
}

inline GradCheckCase relu_grad_case(const GradCheckOptions& o) {
  Rng rng(derive_seed(o.seed, {3}));
  Tensor64 x({2, 3, 4, 4});
  for (auto& v : x.data()) v = rng.uniform(-1, 1);
  // the kink is excluded from the comparison
  auto skip = std::make_unique<bool[]>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) skip[i] = std::abs(x[i]) < 1e-3;
  return detail::check_input_grad(
      "relu dx", x, [](const Tensor64& t) { return relu(t); },
      [](const Tensor64& t, const Tensor64& dy) { return relu_backward(t, dy); }, o,
      rng, std::span<const bool>(skip.get(), x.size()));
}

inline GradCheckCase softmax_xent_grad_case(const GradCheckOptions& o) {
  Rng rng(derive_seed(o.seed, {4}));
  Tensor64 logits({3, 5, 1, 1});
  for (auto& v : logits.data()) v = rng.uniform(-3, 3);
  const std::vector<std::size_t> labels = {0, 3, 4};
  const auto res = softmax_cross_entropy(logits, std::span<const std::size_t>(labels));
  auto f = [&](std::span<const double> v) {
    return softmax_cross_entropy(detail::tensor_from(logits.shape(), v),
                                 std::span<const std::size_t>(labels))
        .loss;
  };
  return {"softmax_xent dlogits", grad_check(f, logits.data(), res.dlogits.data(), o.eps),
          logits.size()};
}

inline std::vector<GradCheckCase> maxpool_grad_cases(const GradCheckOptions& o) {
  Rng rng(derive_seed(o.seed, {5}));
  std::vector<GradCheckCase> out;
  for (auto [window, stride] : {std::pair<std::size_t, std::size_t>{2, 2}, {3, 2}, {8, 8}}) {
    // distinct values spaced far beyond eps keep every argmax stable
    Tensor64 x({1, 2, 8, 8});
    std::vector<std::size_t> perm(x.size());
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm.begin(), perm.end());
    for (std::size_t i = 0; i < x.size(); ++i)
      x[i] = 0.01 * static_cast<double>(perm[i]) + rng.uniform(0.0, 0.001);
    out.push_back(detail::check_input_grad(
        "maxpool dx w" + std::to_string(window) + " s" + std::to_string(stride), x,
        [=](const Tensor64& t) { return maxpool2d_forward(t, window, stride).y; },
        [=](const Tensor64& t, const Tensor64& dy) {
          const auto r = maxpool2d_forward(t, window, stride);
          return maxpool2d_backward(r.argmax, dy, t.shape());
        },
        o, rng));
  }
  return out;
}

/// Iterative pooling with `steps` halvings down to a 2x2 target.
inline std::vector<GradCheckCase> iterative_pool_grad_cases(std::size_t steps,
                                                            const GradCheckOptions& o) {
  Rng rng(derive_seed(o.seed, {6, steps}));
  const std::size_t target = 2, c = 2;
  const std::size_t H = target << steps;
  IterPoolParams64 p(c, target);
  for (auto& v : p.kernel.weight) v = rng.uniform(-0.6, 0.6);
  for (auto& v : p.kernel.bias) v = rng.uniform(-0.5, 0.5);
  Tensor64 x({2, c, H, H});
  for (auto& v : x.data()) v = rng.uniform(-1, 1);
  const auto tr = iterative_pool_forward(x, p);
  const auto r = detail::random_vec(tr.y.size(), rng);
  const auto g = iterative_pool_backward(tr, p, detail::tensor_from(tr.y.shape(), r));
  const std::string tag = " k=" + std::to_string(steps);
  auto fx = [&](std::span<const double> v) {
    return detail::weighted_sum(
        iterative_pool_forward(detail::tensor_from(x.shape(), v), p).y.data(), r);
  };
  auto fw = [&](std::span<const double> v) {
    IterPoolParams64 q = p;
    q.kernel.weight.assign(v.begin(), v.end());
    return detail::weighted_sum(iterative_pool_forward(x, q).y.data(), r);
  };
  auto fb = [&](std::span<const double> v) {
    IterPoolParams64 q = p;
    q.kernel.bias.assign(v.begin(), v.end());
    return detail::weighted_sum(iterative_pool_forward(x, q).y.data(), r);
  };
  return {{"iterative_pool dx" + tag, grad_check(fx, x.data(), g.dx.data(), o.eps), x.size()},
          {"iterative_pool dkernel" + tag,
           grad_check(fw, p.kernel.weight, g.dkernel.weight, o.eps), p.kernel.weight.size()},
          {"iterative_pool dbias" + tag,
           grad_check(fb, p.kernel.bias, g.dkernel.bias, o.eps), p.kernel.bias.size()}};
}

/// Every layer's gradient check, in a fixed order.
inline std::vector<GradCheckCase> run_gradcheck_suite(const GradCheckOptions& o = {}) {
  std::vector<GradCheckCase> all;
  auto append = [&](std::vector<GradCheckCase> v) {
    for (auto& c : v) all.push_back(std::move(c));
  };
  append(conv_grad_cases(o));
  append(linear_grad_cases(o));
  all.push_back(relu_grad_case(o));
  all.push_back(softmax_xent_grad_case(o));
  append(maxpool_grad_cases(o));
  for (std::size_t k = 0; k <= 3; ++k) append(iterative_pool_grad_cases(k, o));
  return all;
}

}  // namespace ipool
