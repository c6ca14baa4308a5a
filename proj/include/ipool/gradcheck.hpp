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

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "ipool/error.hpp"

namespace ipool {

/// Scalar objective over a flat parameter vector, evaluated in double.
using ScalarFn = std::function<double(std::span<const double>)>;

/// Largest |a - n| / max(|a|, |n|, 1e-8) over all coordinates, where n is the
/// central difference (f(x + eps e_i) - f(x - eps e_i)) / (2 eps) and a the
/// supplied analytic gradient. Coordinates with skip[i] set are ignored.
inline double grad_check(const ScalarFn& f, std::span<const double> point,
                         std::span<const double> analytic, double eps = 1e-5,
                         std::span<const bool> skip = {}) {
  if (analytic.size() != point.size())
    throw ShapeError("grad_check: gradient and point differ in length");
  std::vector<double> x(point.begin(), point.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!skip.empty() && skip[i]) continue;
    const double x0 = x[i];
    x[i] = x0 + eps;
    const double fp = f(x);
    x[i] = x0 - eps;
    const double fm = f(x);
    x[i] = x0;
    const double numeric = (fp - fm) / (2.0 * eps);
    const double a = analytic[i];
    if (!std::isfinite(fp) || !std::isfinite(fm) || !std::isfinite(a))
      throw NonFiniteError("grad_check: non-finite value at coordinate " +
                           std::to_string(i));
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(a - numeric) / denom);
  }
  return worst;
}

}  // namespace ipool
