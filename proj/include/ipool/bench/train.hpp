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

// Size-bucketed SGD training and evaluation.
//
// Samples are grouped into buckets of one patch side. Iteration t draws its
// batch from bucket t mod B; each bucket walks its own shuffled order and
// reshuffles when exhausted, so every bucket sees its samples equally often.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ipool/bench/metrics.hpp"
#include "ipool/config.hpp"
#include "ipool/data/dataset.hpp"
#include "ipool/net/checkpoint.hpp"
#include "ipool/net/network.hpp"
#include "ipool/net/routing.hpp"
#include "ipool/ops/loss.hpp"
#include "ipool/ops/sgd.hpp"

namespace ipool::bench {

struct TrainConfig {
  net::NetKind kind = net::NetKind::IPN;
  std::vector<std::size_t> widths = {16, 32, 64, 128};
  std::size_t target_h = 4;
  double residual_scale = 0.5;
  float lr = 0.01f;
  float momentum = 0.9f;
  /// Rescale the joint gradient to this L2 norm when it is larger; 0 = off.
  float clip_norm = 0.0f;
  std::size_t batch = 16;
  std::size_t iterations = 2000;
  std::size_t eval_every = 250;
  /// Held-out samples used for the convergence trace; 0 means all.
  std::size_t holdout = 0;
  std::uint64_t seed = 1;
  std::size_t routing_divisor = 8;

  net::Routing routing() const { return net::Routing::scaled(routing_divisor); }

  net::NetworkSpec network_spec() const {
    if (widths.size() != 4) throw DomainError("widths must list four stage widths");
    const auto bb = net::BackboneSpec::mini(widths[0], widths[1], widths[2], widths[3]);
    switch (kind) {
      case net::NetKind::IPN: return net::NetworkSpec::ipn(bb, target_h);
      case net::NetKind::MPN: return net::NetworkSpec::mpn(bb, target_h);
      case net::NetKind::BN: return net::NetworkSpec::bn(bb, routing().bn_patch);
    }
    throw DomainError("unknown network kind");
  }

  void validate() const {
    if (batch == 0) throw DomainError("batch size must be at least 1");
    if (!(lr >= 0) || !(momentum >= 0 && momentum < 1))
      throw DomainError("lr must be >= 0 and momentum in [0, 1)");
    if (!(clip_norm >= 0)) throw DomainError("clip_norm must be >= 0");
    network_spec().validate();
  }

  static TrainConfig from_config(const Config& c) {
    TrainConfig t;
    if (c.has("mode")) t.kind = net::parse_net_kind(c.get("mode", ""));
    t.widths = c.get_list<std::size_t>("widths", t.widths);
    t.target_h = c.get<std::size_t>("target_h", t.target_h);
    t.residual_scale = c.get<double>("residual_scale", t.residual_scale);
    t.lr = c.get<float>("lr", t.lr);
    t.momentum = c.get<float>("momentum", t.momentum);
    t.clip_norm = c.get<float>("clip_norm", t.clip_norm);
    t.batch = c.get<std::size_t>("batch", t.batch);
    t.iterations = c.get<std::size_t>("iterations", t.iterations);
    t.eval_every = c.get<std::size_t>("eval_every", t.eval_every);
    t.holdout = c.get<std::size_t>("holdout", t.holdout);
    t.seed = c.get<std::uint64_t>("seed", t.seed);
    t.routing_divisor = c.get<std::size_t>("routing_divisor", t.routing_divisor);
    t.validate();
    return t;
  }
};

/// Maps raw gray levels to network input.
inline void normalize_patch(Tensor& t) {
  for (auto& v : t.storage()) v = (v - 128.f) / 64.f;
}

struct Sample {
  Tensor patch;  // 1x1xPxP, normalized
  std::size_t label = 0;
  std::size_t base_size = 0;
};

inline std::vector<Sample> load_samples(const std::vector<data::ManifestEntry>& entries) {
  std::vector<Sample> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    Sample s{load_tensor(e.path), e.label, e.meta.base_size};
    IPOOL_CHECK_SHAPE(s.patch.n() == 1 && s.patch.c() == 1 && s.patch.h() == s.patch.w(),
                      "record " + e.path + " is not a 1x1xPxP patch");
    normalize_patch(s.patch);
    out.push_back(std::move(s));
  }
  return out;
}

inline std::vector<Sample> load_samples(const std::string& manifest) {
  return load_samples(data::read_manifest(manifest));
}

/// Samples sharing one patch side (and, for BN, one size category).
struct Bucket {
  std::size_t side = 0;
  std::optional<net::SizeCategory> category;
  std::vector<std::size_t> members;  // indices into the sample list
};

/// Groups samples into buckets, checking every patch against the network.
inline std::vector<Bucket> make_buckets(const std::vector<Sample>& samples,
                                        const net::NetworkSpec& spec, const net::Routing& routing) {
  std::map<std::size_t, Bucket> by_side;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    const std::size_t side = s.patch.h();
    auto [it, fresh] = by_side.try_emplace(side);
    Bucket& b = it->second;
    if (fresh) {
      b.side = side;
      if (spec.kind == net::NetKind::BN) {
        const auto cat = routing.category(s.base_size);
        if (spec.branches[static_cast<std::size_t>(cat)].patch_size != side)
          throw DomainError("patch side " + std::to_string(side) + " does not match the BN " +
                            std::string(net::to_string(cat)) + " branch");
        b.category = cat;
      } else if (!is_power_of_two(side)) {
        throw DomainError("patch side " + std::to_string(side) + " is not a power of two");
      }
    } else if (spec.kind == net::NetKind::BN && routing.category(s.base_size) != *b.category) {
      throw DomainError("one patch side is shared by two size categories");
    }
    b.members.push_back(i);
  }
  std::vector<Bucket> out;
  for (auto& [side, b] : by_side) out.push_back(std::move(b));
  return out;
}

inline Tensor gather(const std::vector<Sample>& samples, const std::vector<std::size_t>& idx,
                     std::size_t side) {
  Tensor x({idx.size(), 1, side, side});
  for (std::size_t i = 0; i < idx.size(); ++i)
    std::copy_n(samples[idx[i]].patch.data().data(), side * side, x.sample(i));
  return x;
}

inline std::size_t argmax_row(const Tensor& logits, std::size_t row) {
  const std::size_t k = logits.c();
  const float* p = logits.data().data() + row * k;
  return static_cast<std::size_t>(std::max_element(p, p + k) - p);
}

/// Argmax classification of every sample, evaluated in same-size batches.
inline Metrics evaluate(net::Network& net, const std::vector<Sample>& samples,
                        const net::Routing& routing, std::size_t batch = 64) {
  if (samples.empty()) throw DomainError("cannot evaluate on an empty set");
  Metrics m;
  m.method = net::display_name(net.spec().kind);
  for (const auto& b : make_buckets(samples, net.spec(), routing)) {
    for (std::size_t at = 0; at < b.members.size(); at += batch) {
      const std::vector<std::size_t> idx(
          b.members.begin() + static_cast<std::ptrdiff_t>(at),
          b.members.begin() + static_cast<std::ptrdiff_t>(std::min(at + batch, b.members.size())));
      const Tensor logits = net.forward(gather(samples, idx, b.side), b.category);
      for (std::size_t i = 0; i < idx.size(); ++i) m.add(samples[idx[i]].label, argmax_row(logits, i));
    }
  }
  m.finalize();
  return m;
}

/// Round-robin over buckets; each bucket walks its own shuffled order and
/// reshuffles once every member has been drawn.
class BucketScheduler {
 public:
  BucketScheduler(const std::vector<Bucket>& buckets, std::uint64_t seed) {
    for (const auto& b : buckets) {
      if (b.members.empty()) throw DomainError("empty bucket");
      order_.push_back(b.members);
      rng_.emplace_back(derive_seed(seed, {0x6f72646572, b.side}));
      rng_.back().shuffle(order_.back().begin(), order_.back().end());
    }
    cursor_.assign(buckets.size(), 0);
  }

  /// Fills `out` with the next batch and returns its bucket index.
  std::size_t next(std::size_t batch, std::vector<std::size_t>& out) {
    const std::size_t b = turn_++ % order_.size();
    auto& order = order_[b];
    out.clear();
    for (std::size_t k = 0; k < std::min(batch, order.size()); ++k) {
      if (cursor_[b] == order.size()) {
        rng_[b].shuffle(order.begin(), order.end());
        cursor_[b] = 0;
      }
      out.push_back(order[cursor_[b]++]);
    }
    return b;
  }

 private:
  std::vector<std::vector<std::size_t>> order_;
  std::vector<Rng> rng_;
  std::vector<std::size_t> cursor_;
  std::size_t turn_ = 0;
};

struct TrainResult {
  net::Network network;
  std::vector<TracePoint> trace;
  std::vector<float> losses;      // mean batch loss per iteration
  std::vector<float> grad_norms;  // joint gradient norm before clipping
};

struct Progress {
  std::size_t iteration = 0;
  float loss = 0.0f;
  float grad_norm = 0.0f;
};

/// Called after every iteration.
using ProgressFn = std::function<void(const Progress&)>;

inline TrainResult train(const TrainConfig& cfg, const std::vector<Sample>& train_set,
                         const std::vector<Sample>& holdout_set = {},
                         const ProgressFn& progress = {}) {
  cfg.validate();
  if (train_set.empty()) throw DomainError("training set is empty");
  const auto routing = cfg.routing();
  TrainResult r{net::Network(cfg.network_spec(), cfg.seed, {cfg.residual_scale}), {}, {}};
  net::Network& net = r.network;
  auto buckets = make_buckets(train_set, net.spec(), routing);

  std::vector<Sample> holdout;
  if (!holdout_set.empty()) {
    const std::size_t n = cfg.holdout ? std::min(cfg.holdout, holdout_set.size()) : holdout_set.size();
    for (std::size_t i = 0; i < n; ++i) holdout.push_back(holdout_set[i * holdout_set.size() / n]);
  }

  BucketScheduler schedule(buckets, cfg.seed);
  auto params = net.parameters();
  std::vector<std::vector<float>> velocity(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) velocity[i].assign(params[i].value->size(), 0.f);

  std::vector<std::size_t> labels, idx;
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const Bucket& bucket = buckets[schedule.next(cfg.batch, idx)];
    labels.clear();
    for (auto i : idx) labels.push_back(train_set[i].label);
    net.zero_grad();
    const Tensor logits = net.forward(gather(train_set, idx, bucket.side), bucket.category);
    const auto loss = softmax_cross_entropy(logits, std::span<const std::size_t>(labels));
    net.backward(loss.dlogits);
    double sq = 0;
    for (const auto& p : params)
      for (float g : *p.grad) sq += static_cast<double>(g) * g;
    const double norm = std::sqrt(sq);
    if (!std::isfinite(loss.loss) || !std::isfinite(norm))
      throw NonFiniteError("training diverged at iteration " + std::to_string(it + 1));
    if (cfg.clip_norm > 0 && norm > cfg.clip_norm) {
      const auto scale = static_cast<float>(cfg.clip_norm / norm);
      for (auto& p : params)
        for (float& g : *p.grad) g *= scale;
    }
    for (std::size_t p = 0; p < params.size(); ++p)
      sgd_step<float>(*params[p].value, *params[p].grad, velocity[p], cfg.lr, cfg.momentum);
    r.losses.push_back(loss.loss);
    r.grad_norms.push_back(static_cast<float>(norm));
    if (progress) progress({it + 1, loss.loss, static_cast<float>(norm)});
    if (!holdout.empty() && cfg.eval_every && ((it + 1) % cfg.eval_every == 0 || it + 1 == cfg.iterations))
      r.trace.push_back({it + 1, evaluate(net, holdout, routing).average});
  }
  return r;
}

}  // namespace ipool::bench
