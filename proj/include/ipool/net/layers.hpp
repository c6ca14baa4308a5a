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

// Stateful layer wrappers over the pure ops. Each layer owns its parameters,
// accumulates gradients across backward calls until zero_grad, and caches
// what its backward pass needs from the most recent forward call.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ipool/net/spec.hpp"
#include "ipool/ops/activation.hpp"
#include "ipool/ops/conv.hpp"
#include "ipool/ops/linear.hpp"
#include "ipool/ops/pool.hpp"
#include "ipool/pooling.hpp"
#include "ipool/rng.hpp"

namespace ipool::net {

/// Non-owning view of one learnable array and its gradient.
struct Parameter {
  std::string name;
  std::vector<std::uint64_t> dims;
  std::vector<float>* value = nullptr;
  std::vector<float>* grad = nullptr;
};

using ParameterList = std::vector<Parameter>;

namespace detail {

inline void add_into(std::vector<float>& acc, const std::vector<float>& g) {
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
}

inline void add_into(Tensor& acc, const Tensor& g) {
  IPOOL_CHECK_SHAPE(acc.shape() == g.shape(), "gradient accumulation dims mismatch");
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
}

inline void he_normal(std::vector<float>& w, std::size_t fan_in, double scale, Rng& rng) {
  const double sd = scale * std::sqrt(2.0 / static_cast<double>(fan_in));
  for (auto& v : w) v = static_cast<float>(sd * rng.normal());
}

inline void zero(std::vector<float>& v) { std::fill(v.begin(), v.end(), 0.f); }

}  // namespace detail

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::size_t in, std::size_t out, std::size_t k, std::size_t stride, std::size_t pad)
      : params(in, out, k, stride, pad), grads(in, out, k, stride, pad) {}

  void init(Rng& rng, double scale = 1.0) {
    detail::he_normal(params.weight, params.in_ch * params.kernel * params.kernel, scale, rng);
    detail::zero(params.bias);
  }

  Tensor forward(const Tensor& x) {
    input_ = x;
    return conv2d_forward(x, params);
  }

  Tensor backward(const Tensor& dy) {
    auto g = conv2d_backward(input_, params, dy);
    detail::add_into(grads.weight, g.dp.weight);
    detail::add_into(grads.bias, g.dp.bias);
    return std::move(g.dx);
  }

  void zero_grad() {
    detail::zero(grads.weight);
    detail::zero(grads.bias);
  }

  void collect(const std::string& prefix, ParameterList& out) {
    const std::uint64_t k = params.kernel;
    out.push_back({prefix + ".weight", {params.out_ch, params.in_ch, k, k},
                   &params.weight, &grads.weight});
    out.push_back({prefix + ".bias", {params.out_ch}, &params.bias, &grads.bias});
  }

  ConvParams params;
  ConvParams grads;

 private:
  Tensor input_;
};

/// y = relu(shortcut(x) + conv2(relu(conv1(x)))), with a 1x1 projection as the
/// shortcut whenever the block changes width or stride.
class ResidualBlock {
 public:
  ResidualBlock(std::size_t in, std::size_t out, std::size_t stride)
      : conv1_(in, out, 3, stride, 1), conv2_(out, out, 3, 1, 1) {
    if (in != out || stride != 1) proj_.emplace(in, out, 1, stride, 0);
  }

  void init(Rng& rng, double residual_scale) {
    conv1_.init(rng);
    conv2_.init(rng, residual_scale);
    if (proj_) proj_->init(rng);
  }

  Tensor forward(const Tensor& x) {
    pre1_ = conv1_.forward(x);
    Tensor z = conv2_.forward(relu(pre1_));
    detail::add_into(z, proj_ ? proj_->forward(x) : x);
    pre_out_ = z;
    return relu(z);
  }

  Tensor backward(const Tensor& dy) {
    Tensor dz = relu_backward(pre_out_, dy);
    Tensor dx = conv1_.backward(relu_backward(pre1_, conv2_.backward(dz)));
    detail::add_into(dx, proj_ ? proj_->backward(dz) : dz);
    return dx;
  }

  void zero_grad() {
    conv1_.zero_grad();
    conv2_.zero_grad();
    if (proj_) proj_->zero_grad();
  }

  void collect(const std::string& prefix, ParameterList& out) {
    conv1_.collect(prefix + ".conv1", out);
    conv2_.collect(prefix + ".conv2", out);
    if (proj_) proj_->collect(prefix + ".proj", out);
  }

  Conv2d& conv1() { return conv1_; }
  Conv2d& conv2() { return conv2_; }
  Conv2d* projection() { return proj_ ? &*proj_ : nullptr; }

 private:
  Conv2d conv1_, conv2_;
  std::optional<Conv2d> proj_;
  Tensor pre1_, pre_out_;
};

/// A run of residual blocks; the first one carries the width change and the
/// stride-2 downsample.
class Stage {
 public:
  Stage(std::size_t in, const StageSpec& s) {
    for (std::size_t b = 0; b < s.blocks; ++b)
      blocks_.emplace_back(b == 0 ? in : s.out_channels, s.out_channels,
                           (b == 0 && s.downsample) ? 2 : 1);
  }

  void init(Rng& rng, double residual_scale) {
    for (auto& b : blocks_) b.init(rng, residual_scale);
  }

  Tensor forward(const Tensor& x) {
    Tensor h = x;
    for (auto& b : blocks_) h = b.forward(h);
    return h;
  }

  Tensor backward(const Tensor& dy) {
    Tensor g = dy;
    for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) g = it->backward(g);
    return g;
  }

  void zero_grad() {
    for (auto& b : blocks_) b.zero_grad();
  }

  void collect(const std::string& prefix, ParameterList& out) {
    for (std::size_t b = 0; b < blocks_.size(); ++b)
      blocks_[b].collect(prefix + ".block" + std::to_string(b), out);
  }

  std::vector<ResidualBlock>& blocks() { return blocks_; }

 private:
  std::vector<ResidualBlock> blocks_;
};

/// 3x3 conv + relu at full resolution.
class Stem {
 public:
  Stem(std::size_t in, std::size_t out) : conv_(in, out, 3, 1, 1) {}

  void init(Rng& rng) { conv_.init(rng); }

  Tensor forward(const Tensor& x) {
    pre_ = conv_.forward(x);
    return relu(pre_);
  }

  Tensor backward(const Tensor& dy) { return conv_.backward(relu_backward(pre_, dy)); }

  void zero_grad() { conv_.zero_grad(); }
  void collect(const std::string& prefix, ParameterList& out) {
    conv_.collect(prefix + ".conv", out);
  }
  Conv2d& conv() { return conv_; }

 private:
  Conv2d conv_;
  Tensor pre_;
};

/// Stem plus residual stages, without any pooling adapter or head.
class Backbone {
 public:
  Backbone(const BackboneSpec& spec, Rng& rng, double residual_scale)
      : stem_(spec.in_channels, spec.stem_channels()) {
    spec.validate();
    stem_.init(rng);
    std::size_t ch = spec.stem_channels();
    for (const auto& s : spec.stages) {
      stages_.emplace_back(ch, s);
      stages_.back().init(rng, residual_scale);
      ch = s.out_channels;
    }
  }

  /// Output of the stem followed by every stage's output.
  std::vector<Tensor> forward_all(const Tensor& x) {
    std::vector<Tensor> outs = {stem_.forward(x)};
    for (auto& s : stages_) outs.push_back(s.forward(outs.back()));
    return outs;
  }

  Stem& stem() { return stem_; }
  Stage& stage(std::size_t one_based) { return stages_.at(one_based - 1); }
  std::size_t stage_count() const { return stages_.size(); }

  void zero_grad() {
    stem_.zero_grad();
    for (auto& s : stages_) s.zero_grad();
  }

  void collect(ParameterList& out) {
    stem_.collect("stem", out);
    for (std::size_t s = 0; s < stages_.size(); ++s)
      stages_[s].collect("stage" + std::to_string(s + 1), out);
  }

 private:
  Stem stem_;
  std::vector<Stage> stages_;
};

inline Backbone build_backbone(const BackboneSpec& spec, std::uint64_t seed,
                               double residual_scale = 0.5) {
  Rng rng(seed);
  return Backbone(spec, rng, residual_scale);
}

/// The shared-kernel iterative pooling adapter.
class IterPoolAdapter {
 public:
  IterPoolAdapter(std::size_t channels, std::size_t target_h)
      : params(channels, target_h), grads(channels, channels, 3, 2, 1) {}

  void init(std::uint64_t seed) { params = make_iter_pool_params(params.channels, params.target_h, seed); }

  Tensor forward(const Tensor& x) {
    trace_ = iterative_pool_forward(x, params);
    return trace_.y;
  }

  Tensor backward(const Tensor& dy) {
    auto g = iterative_pool_backward(trace_, params, dy);
    detail::add_into(grads.weight, g.dkernel.weight);
    detail::add_into(grads.bias, g.dkernel.bias);
    return std::move(g.dx);
  }

  void zero_grad() {
    detail::zero(grads.weight);
    detail::zero(grads.bias);
  }

  void collect(const std::string& prefix, ParameterList& out) {
    const std::uint64_t c = params.channels;
    out.push_back({prefix + ".weight", {c, c, 3, 3}, &params.kernel.weight, &grads.weight});
    out.push_back({prefix + ".bias", {c}, &params.kernel.bias, &grads.bias});
  }

  std::size_t last_steps() const { return trace_.steps(); }

  IterPoolParams params;
  ConvParams grads;

 private:
  IterPoolTrace trace_;
};

/// Adaptive max pooling to a fixed grid, or to 1x1 when target is 1.
class MaxPoolAdapter {
 public:
  explicit MaxPoolAdapter(std::size_t target) : target_(target) {}

  Tensor forward(const Tensor& x) {
    result_ = adaptive_max_pool(x, target_);
    return result_.y;
  }

  Tensor backward(const Tensor& dy) {
    return maxpool2d_backward(result_.argmax, dy, result_.input_shape);
  }

 private:
  std::size_t target_;
  MaxPoolResult result_;
};

class Linear {
 public:
  Linear(std::size_t in, std::size_t out) : params(in, out), grads(in, out) {}

  void init(Rng& rng) {
    const double sd = 1.0 / std::sqrt(static_cast<double>(params.in_dim));
    for (auto& v : params.weight) v = static_cast<float>(sd * rng.normal());
    detail::zero(params.bias);
  }

  Tensor forward(const Tensor& x) {
    input_ = x;
    return linear_forward(x, params);
  }

  Tensor backward(const Tensor& dy) {
    auto g = linear_backward(input_, params, dy);
    detail::add_into(grads.weight, g.dp.weight);
    detail::add_into(grads.bias, g.dp.bias);
    return std::move(g.dx);
  }

  void zero_grad() {
    detail::zero(grads.weight);
    detail::zero(grads.bias);
  }

  void collect(const std::string& prefix, ParameterList& out) {
    out.push_back({prefix + ".weight", {params.out_dim, params.in_dim}, &params.weight,
                   &grads.weight});
    out.push_back({prefix + ".bias", {params.out_dim}, &params.bias, &grads.bias});
  }

  LinearParams params;
  LinearParams grads;

 private:
  Tensor input_;
};

}  // namespace ipool::net
