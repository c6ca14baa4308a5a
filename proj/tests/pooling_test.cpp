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

#include <numeric>
#include <set>

#include "gtest/gtest.h"
#include "ipool/gradcheck_suite.hpp"
#include "ipool/pooling.hpp"
#include "oracles.hpp"

using namespace ipool;

namespace {

/// k independent kernel copies, chained by hand with the plain conv ops.
/// Returns the per-copy kernel gradients and the input gradient.
struct Unrolled {
  std::vector<ConvParams64> copy_grads;
  Tensor64 dx;
};

Unrolled unrolled_backward(const Tensor64& x, const std::vector<ConvParams64>& copies,
                           const Tensor64& dy) {
  std::vector<Tensor64> acts = {x};
  for (const auto& k : copies) acts.push_back(conv2d_forward(acts.back(), k));
  Unrolled u;
  u.copy_grads.resize(copies.size());
  Tensor64 g = dy;
  for (std::size_t t = copies.size(); t-- > 0;) {
    auto step = conv2d_backward(acts[t], copies[t], g);
    u.copy_grads[t] = step.dp;
    g = step.dx;
  }
  u.dx = g;
  return u;
}

}  // namespace

TEST(NumIterations, Examples) {
  EXPECT_EQ(num_iterations(4, 4), 0u);
  EXPECT_EQ(num_iterations(16, 4), 2u);
  EXPECT_EQ(num_iterations(512, 4), 7u);
}

TEST(NumIterations, Errors) {
  EXPECT_THROW(num_iterations(300, 4), DomainError);
  EXPECT_THROW(num_iterations(16, 3), DomainError);
  EXPECT_THROW(num_iterations(2, 4), DomainError);
}

TEST(NumIterations, GrowsLogarithmically) {
  for (std::size_t h = 1; h <= 64; h *= 2)
    for (std::size_t H = h; H <= 1024; H *= 2) {
      EXPECT_EQ(num_iterations(2 * H, h), num_iterations(H, h) + 1);
      EXPECT_EQ(h << num_iterations(H, h), H);
    }
}

TEST(IterPoolParams, SingleSharedKernel) {
  auto p = make_iter_pool_params(8, 4, 1);
  EXPECT_EQ(p.kernel.weight.size(), 8u * 8 * 9);
  EXPECT_EQ(p.kernel.stride, 2u);
  EXPECT_EQ(p.kernel.pad, 1u);
  // binomial low-pass on the diagonal plus noise bounded by 0.01
  EXPECT_NEAR(p.kernel.weight[((3 * 8 + 3) * 3 + 1) * 3 + 1], 0.25, 0.01);
  EXPECT_NEAR(p.kernel.weight[((3 * 8 + 3) * 3 + 0) * 3 + 0], 0.0625, 0.01);
  EXPECT_NEAR(p.kernel.weight[((3 * 8 + 3) * 3 + 0) * 3 + 1], 0.125, 0.01);
  EXPECT_NEAR(p.kernel.weight[((3 * 8 + 4) * 3 + 1) * 3 + 1], 0.0, 0.01);
  double diag = 0;
  for (std::size_t t = 0; t < 9; ++t) diag += p.kernel.weight[(3 * 8 + 3) * 9 + t];
  EXPECT_NEAR(diag, 1.0, 0.09);
  EXPECT_THROW(IterPoolParams(4, 3), DomainError);
}

TEST(IterativePoolForward, IdentityWhenAlreadyAtTarget) {
  Rng rng(21);
  auto x = oracle::random_tensor<float>({2, 3, 4, 4}, rng);
  auto p = make_iter_pool_params(3, 4, 2);
  auto tr = iterative_pool_forward(x, p);
  EXPECT_EQ(tr.steps(), 0u);
  EXPECT_EQ(tr.y, x);
}

TEST(IterativePoolForward, DeltaKernelSubsamples) {
  Rng rng(22);
  auto x = oracle::random_tensor<float>({1, 2, 8, 8}, rng);
  IterPoolParams p(2, 4);
  for (std::size_t c = 0; c < 2; ++c) p.kernel.weight[((c * 2 + c) * 3 + 1) * 3 + 1] = 1.f;
  auto y = iterative_pool_forward(x, p).y;
  ASSERT_EQ(y.shape(), (Shape{1, 2, 4, 4}));
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(y.at(0, c, i, j), x.at(0, c, 2 * i, 2 * j));
}

TEST(IterativePoolForward, EqualsRepeatedConvolution) {
  Rng rng(23);
  auto x = oracle::random_tensor<float>({2, 3, 16, 16}, rng);
  IterPoolParams p(3, 4);
  oracle::fill_uniform(p.kernel.weight, rng);
  oracle::fill_uniform(p.kernel.bias, rng);
  auto expected = oracle::conv_direct(oracle::conv_direct(x, p.kernel), p.kernel);
  EXPECT_LE(oracle::max_abs_diff(iterative_pool_forward(x, p).y, expected), 1e-5);
}

TEST(IterativePoolForward, TwiceTargetIsOneConvolution) {
  Rng rng(24);
  for (std::size_t h : {1u, 2u, 4u, 8u}) {
    auto x = oracle::random_tensor<double>({1, 2, 2 * h, 2 * h}, rng);
    auto p = make_iter_pool_params<double>(2, h, 5, 0.3);
    EXPECT_EQ(iterative_pool_forward(x, p).y, conv2d_forward(x, p.kernel));
  }
}

TEST(IterativePoolForward, ShapeLawForAllPatchSizes) {
  Rng rng(25);
  auto p = make_iter_pool_params(2, 4, 3);
  for (std::size_t H = 4; H <= 512; H *= 2) {
    auto x = oracle::random_tensor<float>({1, 2, H, H}, rng);
    auto tr = iterative_pool_forward(x, p);
    EXPECT_EQ(tr.y.shape(), (Shape{1, 2, 4, 4})) << "H=" << H;
    EXPECT_EQ(tr.steps(), num_iterations(H, 4));
  }
}

TEST(IterativePoolForward, RejectsBadInputs) {
  auto p = make_iter_pool_params(2, 4, 3);
  EXPECT_THROW(iterative_pool_forward(Tensor({1, 2, 8, 16}), p), ShapeError);
  EXPECT_THROW(iterative_pool_forward(Tensor({1, 2, 12, 12}), p), DomainError);
  EXPECT_THROW(iterative_pool_forward(Tensor({1, 3, 8, 8}), p), ShapeError);
  EXPECT_THROW(iterative_pool_forward(Tensor({1, 2, 2, 2}), p), DomainError);
}

TEST(IterativePoolBackward, NoStepsPassesGradientThrough) {
  Rng rng(26);
  auto x = oracle::random_tensor<double>({1, 2, 4, 4}, rng);
  auto p = make_iter_pool_params<double>(2, 4, 1);
  auto tr = iterative_pool_forward(x, p);
  auto dy = oracle::random_tensor<double>(tr.y.shape(), rng);
  auto g = iterative_pool_backward(tr, p, dy);
  EXPECT_EQ(g.dx, dy);
  for (double v : g.dkernel.weight) EXPECT_EQ(v, 0.0);
  for (double v : g.dkernel.bias) EXPECT_EQ(v, 0.0);
}

TEST(IterativePoolBackward, SharedGradientEqualsSumOfUnrolledCopies) {
  Rng rng(27);
  for (std::size_t k = 1; k <= 4; ++k) {
    const std::size_t H = 2u << k;
    auto x = oracle::random_tensor<double>({2, 3, H, H}, rng);
    IterPoolParams64 p(3, 2);
    oracle::fill_uniform(p.kernel.weight, rng, -0.5, 0.5);
    oracle::fill_uniform(p.kernel.bias, rng);
    auto tr = iterative_pool_forward(x, p);
    auto dy = oracle::random_tensor<double>(tr.y.shape(), rng);
    auto g = iterative_pool_backward(tr, p, dy);

    auto u = unrolled_backward(x, std::vector<ConvParams64>(k, p.kernel), dy);
    ConvParams64 sum = p.kernel.zeros_like();
    for (const auto& cg : u.copy_grads) {
      for (std::size_t i = 0; i < sum.weight.size(); ++i) sum.weight[i] += cg.weight[i];
      for (std::size_t i = 0; i < sum.bias.size(); ++i) sum.bias[i] += cg.bias[i];
    }
    EXPECT_LE(oracle::max_abs_diff(g.dkernel.weight, sum.weight), 1e-12) << "k=" << k;
    EXPECT_LE(oracle::max_abs_diff(g.dkernel.bias, sum.bias), 1e-12) << "k=" << k;
    EXPECT_LE(oracle::max_abs_diff(g.dx, u.dx), 1e-12) << "k=" << k;
  }
}

TEST(IterativePoolBackward, FiniteDifferences) {
  for (std::size_t k = 0; k <= 3; ++k)
    for (const auto& c : iterative_pool_grad_cases(k, {}))
      EXPECT_LE(c.max_rel_err, 1e-5) << c.name;
}

TEST(IterativePoolBackward, StaleIntermediatesThrow) {
  Rng rng(28);
  auto p = make_iter_pool_params<double>(2, 2, 1);
  auto tr = iterative_pool_forward(oracle::random_tensor<double>({1, 2, 8, 8}, rng), p);
  EXPECT_THROW(iterative_pool_backward(tr, p, Tensor64({1, 2, 4, 4})), ShapeError);
  auto other = make_iter_pool_params<double>(3, 2, 1);
  auto foreign = iterative_pool_forward(oracle::random_tensor<double>({1, 3, 8, 8}, rng), other);
  EXPECT_THROW(iterative_pool_backward(foreign, p, Tensor64({1, 2, 2, 2})), ShapeError);
}

TEST(AdaptiveMaxPool, IdentityWhenSizesMatch) {
  Rng rng(29);
  auto x = oracle::random_tensor<float>({1, 2, 4, 4}, rng);
  EXPECT_EQ(adaptive_max_pool(x, 4).y, x);
}

TEST(AdaptiveMaxPool, RampKeepsBottomRight) {
  Tensor x({1, 1, 8, 8});
  std::iota(x.storage().begin(), x.storage().end(), 0.f);
  auto r = adaptive_max_pool(x, 4);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      EXPECT_EQ(r.y.at(0, 0, i, j), x.at(0, 0, 2 * i + 1, 2 * j + 1));
}

TEST(AdaptiveMaxPool, MatchesDirectScan) {
  Rng rng(30);
  auto x = oracle::random_tensor<float>({2, 3, 16, 16}, rng);
  EXPECT_EQ(adaptive_max_pool(x, 4).y, oracle::maxpool_direct(x, 4, 4));
}

TEST(AdaptiveMaxPool, RequiresDivisibility) {
  EXPECT_THROW(adaptive_max_pool(Tensor({1, 1, 10, 10}), 4), DomainError);
}

TEST(DiscardedPointCount, Examples) {
  EXPECT_EQ(discarded_point_count(4, 4, 128), 0u);
  EXPECT_EQ(discarded_point_count(16, 4, 128), 30720u);
  EXPECT_EQ(discarded_point_count(8, 4, 1), 48u);
  EXPECT_THROW(discarded_point_count(4, 8, 1), DomainError);
}

TEST(DiscardedPointCount, MatchesEmpiricalCount) {
  Rng rng(31);
  for (auto [H, h, C] : {std::tuple<std::size_t, std::size_t, std::size_t>{16, 4, 128},
                         {8, 4, 3}, {32, 2, 5}, {4, 4, 7}}) {
    Tensor x({1, C, H, H});
    std::vector<std::size_t> perm(x.size());
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm.begin(), perm.end());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<float>(perm[i]);
    auto r = adaptive_max_pool(x, h);
    std::set<std::size_t> kept(r.argmax.begin(), r.argmax.end());
    EXPECT_EQ(x.size() - kept.size(), discarded_point_count(H, h, C));
  }
}
