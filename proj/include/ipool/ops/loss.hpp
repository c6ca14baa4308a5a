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

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "ipool/tensor.hpp"

namespace ipool {

template <typename T>
struct LossResult {
  T loss = T(0);           // mean over the batch
  BasicTensor<T> dlogits;  // d(mean loss)/d(logits)
};

/// Row-wise softmax with max subtraction.
template <typename T>
std::vector<T> softmax(std::span<const T> logits) {
  T m = logits.empty() ? T(0) : logits[0];
  for (T v : logits) m = v > m ? v : m;
  std::vector<T> p(logits.size());
  T z = T(0);
  for (std::size_t k = 0; k < logits.size(); ++k) {
    p[k] = std::exp(logits[k] - m);
    z += p[k];
  }
  for (T& v : p) v /= z;
  return p;
}

/// Mean of -log softmax(logits)[label] over the batch. For a single sample,
/// dlogits = softmax(logits) - onehot(label).
template <typename T>
LossResult<T> softmax_cross_entropy(const BasicTensor<T>& logits,
                                    std::span<const std::size_t> labels) {
  const std::size_t k = logits.shape().sample();
  IPOOL_CHECK_SHAPE(labels.size() == logits.n(),
                    "one label per logit row required");
  LossResult<T> r{T(0), BasicTensor<T>(logits.shape())};
  const T inv_n = T(1) / static_cast<T>(logits.n());
  for (std::size_t n = 0; n < logits.n(); ++n) {
    if (labels[n] >= k)
      throw DomainError("label " + std::to_string(labels[n]) +
                        " out of range for " + std::to_string(k) + " classes");
    std::span<const T> row(logits.sample(n), k);
    T m = row[0];
    for (T v : row) m = v > m ? v : m;
    T z = T(0);
    for (T v : row) z += std::exp(v - m);
    const T log_z = std::log(z);
    r.loss += (log_z - (row[labels[n]] - m)) * inv_n;
    T* d = r.dlogits.sample(n);
    for (std::size_t j = 0; j < k; ++j) {
      const T p = std::exp(row[j] - m - log_z);
      d[j] = (p - (j == labels[n] ? T(1) : T(0))) * inv_n;
    }
  }
  return r;
}

template <typename T>
LossResult<T> softmax_cross_entropy(const BasicTensor<T>& logits,
                                    std::size_t label) {
  const std::size_t labels[1] = {label};
  return softmax_cross_entropy(logits, std::span<const std::size_t>(labels));
}

}  // namespace ipool
