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

// The three architectures under comparison, over one residual backbone:
//
//   IPN  stem, stages 1..a, iterative pooling to target_h, remaining stages,
//        global max pool, classifier
//   MPN  same, with adaptive max pooling as the adapter
//   BN   stem and trunk stages shared by every size category; category c
//        leaves the trunk after its exit stage, runs its private tail
//        stages, global max pool to 1x1 and a private 1x1 conv to the common
//        head width, then the shared classifier

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ipool/net/layers.hpp"
#include "ipool/net/spec.hpp"

namespace ipool::net {

struct InitOptions {
  /// Scale on the He init of each residual branch's second conv. Zero makes
  /// every block start as relu(shortcut(x)).
  double residual_scale = 0.5;
};

class Network {
 public:
  Network(NetworkSpec spec, std::uint64_t seed, InitOptions init = {})
      : spec_(validated(std::move(spec))),
        rng_(derive_seed(seed, {0x6e6574})),
        backbone_(spec_.backbone, rng_, init.residual_scale) {
    Rng& rng = rng_;
    if (spec_.kind == NetKind::BN) {
      for (const auto& b : spec_.branches) {
        std::size_t bc = spec_.backbone.stages[b.exit_stage - 1].out_channels;
        Branch br{{}, MaxPoolAdapter(1), Conv2d(0, 0, 1, 1, 0)};
        for (const auto& t : b.tail_stages) {
          br.tail.emplace_back(bc, t);
          br.tail.back().init(rng, init.residual_scale);
          bc = t.out_channels;
        }
        br.head = Conv2d(bc, spec_.head_channels, 1, 1, 0);
        br.head.init(rng);
        branches_.push_back(std::move(br));
      }
      classifier_.emplace(spec_.head_channels, spec_.class_count);
    } else {
      const std::size_t ac = spec_.backbone.stages[spec_.adapter_after - 1].out_channels;
      if (spec_.kind == NetKind::IPN) {
        iter_.emplace(ac, spec_.target_h);
        iter_->init(derive_seed(seed, {0x6970}));
      } else {
        maxpool_.emplace(spec_.target_h);
      }
      classifier_.emplace(spec_.backbone.stages.back().out_channels, spec_.class_count);
    }
    classifier_->init(rng);
  }

  const NetworkSpec& spec() const { return spec_; }

  /// Logits (n, class_count, 1, 1). BN requires the batch's size category.
  Tensor forward(const Tensor& x, std::optional<SizeCategory> category = std::nullopt) {
    check_input(x, category);
    path_.clear();
    last_category_ = category;
    Tensor h = backbone_.stem().forward(x);
    path_.push_back("stem");
    if (spec_.kind == NetKind::BN) {
      const auto& bs = spec_.branches[static_cast<std::size_t>(*category)];
      for (std::size_t s = 0; s < bs.exit_stage; ++s) h = run_stage(s, h);
      auto& br = branches_[static_cast<std::size_t>(*category)];
      const std::string tag = to_string(*category);
      for (std::size_t t = 0; t < br.tail.size(); ++t) {
        h = br.tail[t].forward(h);
        path_.push_back("branch." + tag + ".stage" + std::to_string(t + 1));
      }
      h = br.pool.forward(h);
      path_.push_back("branch." + tag + ".pool");
      h = br.head.forward(h);
      path_.push_back("branch." + tag + ".head");
    } else {
      for (std::size_t s = 0; s < spec_.adapter_after; ++s) h = run_stage(s, h);
      h = iter_ ? iter_->forward(h) : maxpool_->forward(h);
      path_.push_back("adapter");
      for (std::size_t s = spec_.adapter_after; s < backbone_.stage_count(); ++s) h = run_stage(s, h);
      h = global_pool_.forward(h);
      path_.push_back("global_pool");
    }
    features_shape_ = h.shape();
    path_.push_back("classifier");
    has_forward_ = true;
    return classifier_->forward(h);
  }

  /// Accumulates parameter gradients along the last forward path; returns
  /// the gradient with respect to the input batch.
  Tensor backward(const Tensor& dlogits) {
    if (!has_forward_) throw Error("backward called before forward");
    Tensor g = classifier_->backward(dlogits).reshaped(features_shape_);
    if (spec_.kind == NetKind::BN) {
      const auto c = static_cast<std::size_t>(*last_category_);
      auto& br = branches_[c];
      g = br.pool.backward(br.head.backward(g));
      for (std::size_t t = br.tail.size(); t-- > 0;) g = br.tail[t].backward(g);
      for (std::size_t s = spec_.branches[c].exit_stage; s-- > 0;) g = backbone_.stage(s + 1).backward(g);
    } else {
      g = global_pool_.backward(g);
      for (std::size_t s = backbone_.stage_count(); s-- > spec_.adapter_after;) g = backbone_.stage(s + 1).backward(g);
      g = iter_ ? iter_->backward(g) : maxpool_->backward(g);
      for (std::size_t s = spec_.adapter_after; s-- > 0;) g = backbone_.stage(s + 1).backward(g);
    }
    return backbone_.stem().backward(g);
  }

  void zero_grad() {
    backbone_.zero_grad();
    if (iter_) iter_->zero_grad();
    for (auto& b : branches_) {
      for (auto& t : b.tail) t.zero_grad();
      b.head.zero_grad();
    }
    classifier_->zero_grad();
  }

  /// Every learnable array, in a fixed order with stable names.
  ParameterList parameters() {
    ParameterList out;
    backbone_.collect(out);
    if (iter_) iter_->collect("adapter", out);
    for (std::size_t b = 0; b < branches_.size(); ++b) {
      const std::string tag = std::string("branch.") + to_string(static_cast<SizeCategory>(b));
      for (std::size_t t = 0; t < branches_[b].tail.size(); ++t)
        branches_[b].tail[t].collect(tag + ".stage" + std::to_string(t + 1), out);
      branches_[b].head.collect(tag + ".head", out);
    }
    classifier_->collect("classifier", out);
    return out;
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    for (const auto& p : parameters()) n += p.value->size();
    return n;
  }

  /// Module names visited by the most recent forward call, in order.
  const std::vector<std::string>& last_path() const { return path_; }
  /// Shape of the tensor that entered the classifier on the last forward.
  const Shape& last_features_shape() const { return features_shape_; }

  Backbone& backbone() { return backbone_; }
  Stage& stage(std::size_t one_based) { return backbone_.stage(one_based); }
  IterPoolAdapter* iterative_pool() { return iter_ ? &*iter_ : nullptr; }
  Conv2d& branch_head(SizeCategory c) { return branches_.at(static_cast<std::size_t>(c)).head; }
  Linear& classifier() { return *classifier_; }

 private:
  struct Branch {
    std::vector<Stage> tail;
    MaxPoolAdapter pool;
    Conv2d head;
  };

  Tensor run_stage(std::size_t s, const Tensor& x) {
    path_.push_back("stage" + std::to_string(s + 1));
    return backbone_.stage(s + 1).forward(x);
  }

  void check_input(const Tensor& x, std::optional<SizeCategory> category) const {
    IPOOL_CHECK_SHAPE(x.c() == spec_.backbone.in_channels,
                      "network expects " + std::to_string(spec_.backbone.in_channels) +
                          " input channels, got " + std::to_string(x.c()));
    IPOOL_CHECK_SHAPE(x.h() == x.w() && x.n() > 0, "network input must be a non-empty square batch");
    if (spec_.kind == NetKind::BN) {
      if (!category) throw DomainError("BN forward needs a size category");
      const auto& b = spec_.branches[static_cast<std::size_t>(*category)];
      IPOOL_CHECK_SHAPE(x.h() == b.patch_size,
                        "category " + std::string(to_string(*category)) + " expects " +
                            std::to_string(b.patch_size) + "px patches, got " +
                            std::to_string(x.h()));
      return;
    }
    IPOOL_CHECK_SHAPE(is_power_of_two(x.h()),
                      "patch side " + std::to_string(x.h()) + " is not a power of two");
    std::size_t side = x.h();
    for (std::size_t s = 0; s < spec_.adapter_after; ++s)
      if (spec_.backbone.stages[s].downsample) side /= 2;
    IPOOL_CHECK_SHAPE(side >= spec_.target_h,
                      "patch side " + std::to_string(x.h()) + " is too small for target " +
                          std::to_string(spec_.target_h));
  }

  static NetworkSpec validated(NetworkSpec s) {
    s.validate();
    return s;
  }

  NetworkSpec spec_;
  Rng rng_;
  Backbone backbone_;
  std::optional<IterPoolAdapter> iter_;
  std::optional<MaxPoolAdapter> maxpool_;
  MaxPoolAdapter global_pool_{1};
  std::vector<Branch> branches_;
  std::optional<Linear> classifier_;

  std::vector<std::string> path_;
  std::optional<SizeCategory> last_category_;
  Shape features_shape_{};
  bool has_forward_ = false;
};

/// Build a seeded network from its spec.
inline Network build_network(const NetworkSpec& spec, std::uint64_t seed,
                             InitOptions init = {}) {
  return Network(spec, seed, init);
}

}  // namespace ipool::net
