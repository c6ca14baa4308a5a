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
#include <cstddef>
#include <string>

#include "ipool/error.hpp"
#include "ipool/net/spec.hpp"

namespace ipool::net {

/// Image-size thresholds and patch sides per size category.
///
///   d <  low            -> category I
///   low <= d <= high    -> category II   (both boundaries inclusive)
///   d >  high           -> category III
///
/// IPN patches are twice the BN patches in every category.
struct Routing {
  std::size_t low = 1024;
  std::size_t high = 2000;
  std::array<std::size_t, 3> bn_patch = {64, 128, 256};
  std::size_t min_dim = 64;

  /// Full-size thresholds.
  static Routing full_scale() { return Routing{}; }

  /// Thresholds and patches divided by `divisor`, for small synthetic images.
  static Routing scaled(std::size_t divisor) {
    Routing r;
    r.low = 1024 / divisor;
    r.high = 2000 / divisor;
    for (auto& p : r.bn_patch) p /= divisor;
    r.min_dim = r.bn_patch[0];
    return r;
  }

  SizeCategory category(std::size_t d) const {
    if (d < min_dim)
      throw DomainError("image dimension " + std::to_string(d) +
                        " is below the minimum patch size " + std::to_string(min_dim));
    if (d < low) return SizeCategory::I;
    if (d <= high) return SizeCategory::II;
    return SizeCategory::III;
  }

  std::size_t patch_size(std::size_t d, NetKind mode) const {
    const std::size_t bn = bn_patch[static_cast<std::size_t>(category(d))];
    return mode == NetKind::BN ? bn : 2 * bn;
  }
};

/// Patch side for an image whose smaller dimension is d.
inline std::size_t patch_size_for(std::size_t d, NetKind mode) {
  return Routing::full_scale().patch_size(d, mode);
}

inline SizeCategory category_for(std::size_t d) {
  return Routing::full_scale().category(d);
}

}  // namespace ipool::net
