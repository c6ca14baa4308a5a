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

#include <span>

#include "ipool/error.hpp"

namespace ipool {

/// Heavy-ball SGD: v <- momentum * v + grad; param <- param - lr * v.
template <typename T>
void sgd_step(std::span<T> params, std::span<const T> grads,
              std::span<T> velocity, T lr, T momentum) {
  IPOOL_CHECK_SHAPE(params.size() == grads.size() &&
                        params.size() == velocity.size(),
                    "sgd_step: params, grads and velocity differ in length");
  for (std::size_t i = 0; i < params.size(); ++i) {
    velocity[i] = momentum * velocity[i] + grads[i];
    params[i] -= lr * velocity[i];
  }
}

}  // namespace ipool
