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
#include <cstdint>
#include <string>
#include <vector>

#include "ipool/error.hpp"
#include "ipool/rng.hpp"
#include "ipool/tensor.hpp"

namespace ipool::data {

/// Single-channel image, row-major, gray levels nominally in [0, 255].
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> pixels;

  Image() = default;
  Image(std::size_t h, std::size_t w, float fill = 0.f)
      : height(h), width(w), pixels(h * w, fill) {}

  float& at(std::size_t y, std::size_t x) { return pixels[y * width + x]; }
  float at(std::size_t y, std::size_t x) const { return pixels[y * width + x]; }
  bool empty() const { return pixels.empty(); }
  bool operator==(const Image&) const = default;

  /// Square window of side p centered as in (dim - p) / 2.
  Image center_crop(std::size_t p) const {
    if (p > height || p > width)
      throw DiscardedRecord("crop " + std::to_string(p) + " exceeds image " +
                            std::to_string(height) + "x" + std::to_string(width));
    Image out(p, p);
    const std::size_t y0 = (height - p) / 2, x0 = (width - p) / 2;
    for (std::size_t y = 0; y < p; ++y)
      std::copy_n(&pixels[(y0 + y) * width + x0], p, &out.pixels[y * p]);
    return out;
  }

  Tensor to_tensor() const { return Tensor({1, 1, height, width}, pixels); }
};

inline double mean(const Image& img) {
  double s = 0;
  for (float v : img.pixels) s += v;
  return s / static_cast<double>(img.pixels.size());
}

inline double stddev(const Image& img) {
  const double m = mean(img);
  double s = 0;
  for (float v : img.pixels) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(img.pixels.size()));
}

namespace detail {

// Lattice noise with one value per `cell` pixels, bilinearly interpolated.
inline void add_smooth_field(std::vector<double>& acc, std::size_t size, std::size_t cell,
                             double amplitude, Rng& rng) {
  const std::size_t g = size / cell + 2;
  std::vector<double> lattice(g * g);
  for (auto& v : lattice) v = rng.normal();
  for (std::size_t y = 0; y < size; ++y) {
    const double fy = (static_cast<double>(y) + 0.5) / static_cast<double>(cell);
    const auto iy = static_cast<std::size_t>(fy);
    const double ty = fy - static_cast<double>(iy);
    for (std::size_t x = 0; x < size; ++x) {
      const double fx = (static_cast<double>(x) + 0.5) / static_cast<double>(cell);
      const auto ix = static_cast<std::size_t>(fx);
      const double tx = fx - static_cast<double>(ix);
      const double top = lattice[iy * g + ix] * (1 - tx) + lattice[iy * g + ix + 1] * tx;
      const double bot = lattice[(iy + 1) * g + ix] * (1 - tx) + lattice[(iy + 1) * g + ix + 1] * tx;
      acc[y * size + x] += amplitude * (top * (1 - ty) + bot * ty);
    }
  }
}

}  // namespace detail

/// Deterministic textured square image: smooth random fields at three
/// octaves, a mild linear gradient and a little per-pixel grain.
inline Image synth_base_image(std::size_t size, std::uint64_t seed) {
  if (size < 64) throw DomainError("base image size must be at least 64");
  Rng rng(derive_seed(seed, {0x62617365}));
  std::vector<double> acc(size * size, 0.0);
  const std::size_t cells[3] = {2, 6, 24};
  const double amps[3] = {14.0, 22.0, 34.0};
  for (int o = 0; o < 3; ++o) detail::add_smooth_field(acc, size, cells[o], amps[o], rng);
  const double gx = rng.uniform(-20, 20), gy = rng.uniform(-20, 20);
  const double level = rng.uniform(100, 156);
  const double inv = 1.0 / static_cast<double>(size - 1);
  Image img(size, size);
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x) {
      const double v = level + acc[y * size + x] + gx * (static_cast<double>(x) * inv - 0.5) +
                       gy * (static_cast<double>(y) * inv - 0.5) + 3.0 * rng.normal();
      img.at(y, x) = static_cast<float>(std::clamp(v, 0.0, 255.0));
    }
  return img;
}

}  // namespace ipool::data
