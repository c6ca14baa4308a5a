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

// Luminance-only JPEG model: 8x8 orthonormal DCT-II, IJG-scaled quantization
// and dequantization. No chroma and no entropy coding.

#include <array>
#include <cmath>
#include <numbers>

#include "ipool/data/image.hpp"
#include "ipool/error.hpp"

namespace ipool::data {

using Block8 = std::array<double, 64>;
using QuantTable = std::array<int, 64>;

/// Standard luminance table (ITU-T T.81, Annex K), row-major.
inline constexpr QuantTable kBaseLuminance = {
    16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
    14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
    18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};

namespace detail {

// basis[k][n] = c(k) cos((2n+1) k pi / 16)
inline const std::array<std::array<double, 8>, 8>& dct_basis() {
  static const auto table = [] {
    std::array<std::array<double, 8>, 8> b{};
    for (int k = 0; k < 8; ++k)
      for (int n = 0; n < 8; ++n)
        b[k][n] = (k == 0 ? std::sqrt(1.0 / 8) : std::sqrt(2.0 / 8)) *
                  std::cos((2 * n + 1) * k * std::numbers::pi / 16);
    return b;
  }();
  return table;
}

template <bool Inverse>
Block8 transform8(const Block8& in) {
  const auto& b = dct_basis();
  Block8 tmp{}, out{};
  // rows
  for (int r = 0; r < 8; ++r)
    for (int k = 0; k < 8; ++k) {
      double s = 0;
      for (int n = 0; n < 8; ++n) s += in[r * 8 + n] * (Inverse ? b[n][k] : b[k][n]);
      tmp[r * 8 + k] = s;
    }
  // columns
  for (int c = 0; c < 8; ++c)
    for (int k = 0; k < 8; ++k) {
      double s = 0;
      for (int n = 0; n < 8; ++n) s += tmp[n * 8 + c] * (Inverse ? b[n][k] : b[k][n]);
      out[k * 8 + c] = s;
    }
  return out;
}

inline std::size_t reflect(std::ptrdiff_t i, std::size_t n) {
  const auto m = static_cast<std::ptrdiff_t>(n);
  if (m == 1) return 0;
  const std::ptrdiff_t period = 2 * m;
  i %= period;
  if (i < 0) i += period;
  return static_cast<std::size_t>(i < m ? i : period - 1 - i);
}

}  // namespace detail

inline Block8 dct8(const Block8& x) { return detail::transform8<false>(x); }
inline Block8 idct8(const Block8& c) { return detail::transform8<true>(c); }

inline QuantTable quant_table(int qf) {
  if (qf < 1 || qf > 100) throw DomainError("quality factor must be in 1..100");
  const int scale = qf < 50 ? 5000 / qf : 200 - 2 * qf;
  QuantTable q{};
  for (int i = 0; i < 64; ++i) q[i] = std::clamp((kBaseLuminance[i] * scale + 50) / 100, 1, 255);
  return q;
}

/// Compress and decompress one image. Sides that are not multiples of 8 are
/// padded by symmetric reflection and cropped back afterwards.
inline Image jpeg_sim(const Image& img, int qf) {
  if (img.empty()) throw DomainError("jpeg_sim on an empty image");
  const QuantTable q = quant_table(qf);
  const std::size_t ph = (img.height + 7) / 8 * 8, pw = (img.width + 7) / 8 * 8;
  Image out(img.height, img.width);
  Block8 blk;
  for (std::size_t by = 0; by < ph; by += 8)
    for (std::size_t bx = 0; bx < pw; bx += 8) {
      for (std::size_t y = 0; y < 8; ++y)
        for (std::size_t x = 0; x < 8; ++x)
          blk[y * 8 + x] =
              img.at(detail::reflect(static_cast<std::ptrdiff_t>(by + y), img.height),
                     detail::reflect(static_cast<std::ptrdiff_t>(bx + x), img.width)) -
              128.0;
      Block8 c = dct8(blk);
      for (int i = 0; i < 64; ++i) c[i] = std::round(c[i] / q[i]) * q[i];
      const Block8 r = idct8(c);
      for (std::size_t y = 0; y < 8 && by + y < img.height; ++y)
        for (std::size_t x = 0; x < 8 && bx + x < img.width; ++x)
          out.at(by + y, bx + x) = static_cast<float>(std::clamp(r[y * 8 + x] + 128.0, 0.0, 255.0));
    }
  return out;
}

}  // namespace ipool::data
