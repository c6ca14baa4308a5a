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
#include <numbers>
#include <vector>

#include "ipool/data/image.hpp"
#include "ipool/data/jpeg.hpp"
#include "ipool/error.hpp"

namespace ipool::data {

/// Keys cubic convolution kernel with a = -0.5.
inline double keys_cubic(double x) {
  const double a = -0.5;
  x = std::abs(x);
  if (x <= 1) return ((a + 2) * x - (a + 3)) * x * x + 1;
  if (x < 2) return ((a * x - 5 * a) * x + 8 * a) * x - 4 * a;
  return 0;
}

namespace detail {

struct Taps {
  std::vector<std::size_t> index;  // out * taps
  std::vector<double> weight;
  std::size_t taps = 0;
};

// Contributions along one axis, mapping output centers back to input
// coordinates as src = (dst + 0.5) / f - 0.5.
inline Taps resample_taps(std::size_t in, std::size_t out, double f) {
  const bool shrink = f < 1.0;
  const double width = shrink ? 4.0 / f : 4.0;
  Taps t;
  t.taps = static_cast<std::size_t>(std::ceil(width)) + 2;
  t.index.resize(out * t.taps);
  t.weight.resize(out * t.taps);
  for (std::size_t o = 0; o < out; ++o) {
    const double src = (static_cast<double>(o) + 0.5) / f - 0.5;
    const auto left = static_cast<std::ptrdiff_t>(std::floor(src - width / 2));
    double sum = 0;
    for (std::size_t k = 0; k < t.taps; ++k) {
      const std::ptrdiff_t j = left + static_cast<std::ptrdiff_t>(k);
      const double d = src - static_cast<double>(j);
      const double w = shrink ? f * keys_cubic(f * d) : keys_cubic(d);
      t.index[o * t.taps + k] = reflect(j, in);
      t.weight[o * t.taps + k] = w;
      sum += w;
    }
    for (std::size_t k = 0; k < t.taps; ++k) t.weight[o * t.taps + k] /= sum;
  }
  return t;
}

}  // namespace detail

/// Bicubic resize by `factor` with antialiasing on shrink; output sides are
/// round(side * factor). Borders extend by symmetric reflection.
inline Image resample(const Image& img, double factor) {
  if (!(factor > 0) || !std::isfinite(factor)) throw DomainError("resample factor must be > 0");
  const auto oh = static_cast<std::size_t>(std::lround(static_cast<double>(img.height) * factor));
  const auto ow = static_cast<std::size_t>(std::lround(static_cast<double>(img.width) * factor));
  if (oh < 8 || ow < 8) throw DomainError("resample output would be smaller than 8x8");
  const auto ty = detail::resample_taps(img.height, oh, factor);
  const auto tx = detail::resample_taps(img.width, ow, factor);

  std::vector<double> rows(img.height * ow);
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t o = 0; o < ow; ++o) {
      double s = 0;
      for (std::size_t k = 0; k < tx.taps; ++k)
        s += tx.weight[o * tx.taps + k] * img.at(y, tx.index[o * tx.taps + k]);
      rows[y * ow + o] = s;
    }
  Image out(oh, ow);
  for (std::size_t o = 0; o < oh; ++o)
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0;
      for (std::size_t k = 0; k < ty.taps; ++k)
        s += ty.weight[o * ty.taps + k] * rows[ty.index[o * ty.taps + k] * ow + x];
      out.at(o, x) = static_cast<float>(std::clamp(s, 0.0, 255.0));
    }
  return out;
}

/// Bilinear rotation about the image center; positive angles turn the
/// content counter-clockwise as displayed. Samples falling outside the image
/// take the nearest valid pixel.
inline Image rotate(const Image& img, double angle_deg) {
  if (std::abs(angle_deg) > 45) throw DomainError("rotation angle must be within 45 degrees");
  const double t = angle_deg * std::numbers::pi / 180.0;
  const double c = std::cos(t), s = std::sin(t);
  const double cy = (static_cast<double>(img.height) - 1) / 2;
  const double cx = (static_cast<double>(img.width) - 1) / 2;
  const double maxy = static_cast<double>(img.height - 1), maxx = static_cast<double>(img.width - 1);
  Image out(img.height, img.width);
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x) {
      const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
      const double sx = std::clamp(cx + c * dx - s * dy, 0.0, maxx);
      const double sy = std::clamp(cy + s * dx + c * dy, 0.0, maxy);
      const auto x0 = static_cast<std::size_t>(sx), y0 = static_cast<std::size_t>(sy);
      const std::size_t x1 = std::min(x0 + 1, img.width - 1), y1 = std::min(y0 + 1, img.height - 1);
      const double fx = sx - static_cast<double>(x0), fy = sy - static_cast<double>(y0);
      const double v = (img.at(y0, x0) * (1 - fx) + img.at(y0, x1) * fx) * (1 - fy) +
                       (img.at(y1, x0) * (1 - fx) + img.at(y1, x1) * fx) * fy;
      out.at(y, x) = static_cast<float>(v);
    }
  return out;
}

}  // namespace ipool::data
