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

#include <array>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ipool/error.hpp"
#include "ipool/pooling.hpp"

namespace ipool::net {

enum class NetKind { IPN, MPN, BN };

/// Coarse prior on the source image size: small, medium, large.
enum class SizeCategory { I = 0, II = 1, III = 2 };

inline constexpr std::size_t kCategoryCount = 3;

inline const char* to_string(NetKind k) {
  switch (k) {
    case NetKind::IPN: return "ipn";
    case NetKind::MPN: return "mpn";
    case NetKind::BN: return "bn";
  }
  return "?";
}

/// Upper-case method name for tables.
inline const char* display_name(NetKind k) {
  switch (k) {
    case NetKind::IPN: return "IPN";
    case NetKind::MPN: return "MPN";
    case NetKind::BN: return "BN";
  }
  return "?";
}

inline const char* to_string(SizeCategory c) {
  switch (c) {
    case SizeCategory::I: return "I";
    case SizeCategory::II: return "II";
    case SizeCategory::III: return "III";
  }
  return "?";
}

inline NetKind parse_net_kind(const std::string& s) {
  if (s == "ipn" || s == "IPN") return NetKind::IPN;
  if (s == "mpn" || s == "MPN") return NetKind::MPN;
  if (s == "bn" || s == "BN") return NetKind::BN;
  throw DomainError("unknown network kind '" + s + "' (expected ipn, mpn or bn)");
}

struct StageSpec {
  std::size_t out_channels = 0;
  std::size_t blocks = 1;
  bool downsample = false;
};

struct BackboneSpec {
  std::size_t in_channels = 1;
  std::vector<StageSpec> stages;

  /// Stem width equals the first stage's width.
  std::size_t stem_channels() const { return stages.empty() ? 0 : stages.front().out_channels; }

  void validate() const {
    if (stages.size() < 4)
      throw DomainError("backbone needs at least 4 stages, got " +
                        std::to_string(stages.size()));
    if (in_channels == 0) throw DomainError("backbone needs >= 1 input channel");
    for (std::size_t i = 0; i < stages.size(); ++i) {
      if (stages[i].out_channels == 0 || stages[i].blocks == 0)
        throw DomainError("stage " + std::to_string(i + 1) + " is empty");
      if (i > 0 && stages[i].out_channels < stages[i - 1].out_channels)
        throw DomainError("stage channel counts must be non-decreasing");
    }
  }

  /// Four one-block stages, downsampling at stages 2-4.
  static BackboneSpec mini(std::size_t c1 = 16, std::size_t c2 = 32,
                           std::size_t c3 = 64, std::size_t c4 = 128) {
    return BackboneSpec{1, {{c1, 1, false}, {c2, 1, true}, {c3, 1, true}, {c4, 1, true}}};
  }
};

/// One BN pathway: where it leaves the shared trunk, which patch side it
/// accepts, and any private stages before the 1x1 head.
struct BranchSpec {
  SizeCategory category = SizeCategory::I;
  std::size_t exit_stage = 2;  // 1-based; the trunk runs stages 1..exit_stage
  std::size_t patch_size = 0;
  std::vector<StageSpec> tail_stages;
};

struct NetworkSpec {
  NetKind kind = NetKind::IPN;
  BackboneSpec backbone = BackboneSpec::mini();
  std::size_t target_h = 4;
  std::size_t class_count = 5;
  std::size_t adapter_after = 2;  // IPN/MPN: adapter sits after this stage
  std::vector<BranchSpec> branches;  // BN only, indexed by category
  std::size_t head_channels = 0;     // BN: common width after the 1x1 convs

  void validate() const {
    backbone.validate();
    if (class_count < 2) throw DomainError("need at least two classes");
    if (kind == NetKind::BN) {
      if (branches.size() != kCategoryCount)
        throw DomainError("BN needs one branch per size category");
      if (head_channels == 0) throw DomainError("BN needs head_channels > 0");
      for (std::size_t i = 0; i < branches.size(); ++i) {
        const auto& b = branches[i];
        if (static_cast<std::size_t>(b.category) != i)
          throw DomainError("BN branches must be listed in category order");
        if (b.exit_stage < 1 || b.exit_stage > backbone.stages.size())
          throw DomainError("BN branch exit stage out of range");
        if (b.patch_size == 0) throw DomainError("BN branch patch size must be > 0");
        std::size_t prev = backbone.stages[b.exit_stage - 1].out_channels;
        for (const auto& t : b.tail_stages) {
          if (t.out_channels < prev || t.blocks == 0)
            throw DomainError("BN tail stages must be non-empty and non-narrowing");
          prev = t.out_channels;
        }
      }
    } else {
      if (!branches.empty()) throw DomainError("only BN networks take branches");
      if (adapter_after < 1 || adapter_after >= backbone.stages.size())
        throw DomainError("adapter must sit between two backbone stages");
      if (!is_power_of_two(target_h))
        throw DomainError("target_h must be a power of two");
    }
  }

  /// Canonical text form; its hash identifies checkpoints.
  std::string canonical() const {
    std::ostringstream os;
    os << "kind=" << to_string(kind) << ";in=" << backbone.in_channels << ";stages=";
    for (const auto& s : backbone.stages)
      os << s.out_channels << "x" << s.blocks << (s.downsample ? "d" : "") << ",";
    os << ";classes=" << class_count;
    if (kind == NetKind::BN) {
      os << ";head=" << head_channels << ";branches=";
      for (const auto& b : branches) {
        os << to_string(b.category) << "@" << b.exit_stage << "/" << b.patch_size << "[";
        for (const auto& t : b.tail_stages)
          os << t.out_channels << "x" << t.blocks << (t.downsample ? "d" : "") << ",";
        os << "]";
      }
    } else {
      os << ";target=" << target_h << ";after=" << adapter_after;
    }
    return os.str();
  }

  std::uint64_t hash() const {
    std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
    for (unsigned char ch : canonical()) {
      h ^= ch;
      h *= 0x100000001b3ull;
    }
    return h;
  }

  static NetworkSpec ipn(BackboneSpec bb = BackboneSpec::mini(), std::size_t target_h = 4,
                         std::size_t classes = 5) {
    NetworkSpec s;
    s.kind = NetKind::IPN;
    s.backbone = std::move(bb);
    s.target_h = target_h;
    s.class_count = classes;
    return s;
  }

  static NetworkSpec mpn(BackboneSpec bb = BackboneSpec::mini(), std::size_t target_h = 4,
                         std::size_t classes = 5) {
    NetworkSpec s = ipn(std::move(bb), target_h, classes);
    s.kind = NetKind::MPN;
    return s;
  }

  /// Category I leaves after stage 2, II after stage 3, III after stage 4;
  /// the common head width is the last stage's width.
  static NetworkSpec bn(BackboneSpec bb = BackboneSpec::mini(),
                        std::array<std::size_t, 3> patch_sizes = {64, 128, 256},
                        std::size_t classes = 5) {
    NetworkSpec s;
    s.kind = NetKind::BN;
    s.backbone = std::move(bb);
    s.class_count = classes;
    s.head_channels = s.backbone.stages.back().out_channels;
    const std::size_t last = s.backbone.stages.size();
    s.branches = {{SizeCategory::I, last - 2, patch_sizes[0], {}},
                  {SizeCategory::II, last - 1, patch_sizes[1], {}},
                  {SizeCategory::III, last, patch_sizes[2], {}}};
    return s;
  }
};

}  // namespace ipool::net
