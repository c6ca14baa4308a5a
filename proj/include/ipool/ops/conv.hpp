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
#include <cstddef>
#include <cstring>
#include <vector>

#include "ipool/tensor.hpp"

namespace ipool {

/// Weights of a square-kernel 2-D convolution. weight is laid out
/// (out_ch, in_ch, kernel, kernel).
template <typename T>
struct BasicConvParams {
  std::size_t in_ch = 0;
  std::size_t out_ch = 0;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t pad = 0;
  std::vector<T> weight;
  std::vector<T> bias;

  BasicConvParams() = default;
  BasicConvParams(std::size_t in, std::size_t out, std::size_t k,
                  std::size_t s, std::size_t p)
      : in_ch(in), out_ch(out), kernel(k), stride(s), pad(p),
        weight(in * out * k * k, T(0)), bias(out, T(0)) {}

  std::size_t weight_count() const { return out_ch * in_ch * kernel * kernel; }

  /// A zeroed parameter set with the same geometry; used for gradients.
  BasicConvParams zeros_like() const {
    return BasicConvParams(in_ch, out_ch, kernel, stride, pad);
  }

  void validate() const {
    IPOOL_CHECK_SHAPE(stride >= 1, "conv stride must be >= 1");
    IPOOL_CHECK_SHAPE(kernel >= 1, "conv kernel must be >= 1");
    IPOOL_CHECK_SHAPE(weight.size() == weight_count(),
                      "conv weight length does not match out*in*k*k");
    IPOOL_CHECK_SHAPE(bias.size() == out_ch, "conv bias length != out_ch");
  }

  template <typename U>
  BasicConvParams<U> cast() const {
    BasicConvParams<U> r(in_ch, out_ch, kernel, stride, pad);
    r.weight.assign(weight.begin(), weight.end());
    r.bias.assign(bias.begin(), bias.end());
    return r;
  }

  friend bool operator==(const BasicConvParams&,
                         const BasicConvParams&) = default;
};

using ConvParams = BasicConvParams<float>;
using ConvParams64 = BasicConvParams<double>;

template <typename T>
struct ConvGrads {
  BasicTensor<T> dx;
  BasicConvParams<T> dp;
};

namespace detail {

inline std::size_t conv_out_dim(std::size_t in, std::size_t k, std::size_t s,
                                std::size_t pad) {
  const long span = static_cast<long>(in + 2 * pad) - static_cast<long>(k);
  IPOOL_CHECK_SHAPE(span >= 0, "convolution output would be empty");
  return static_cast<std::size_t>(span) / s + 1;
}

// Output columns [j0, j1) whose input column j*s + v - pad lies inside [0, w).
inline void valid_cols(std::size_t w, std::size_t s, std::size_t v, std::size_t pad,
                       std::size_t ow, std::size_t& j0, std::size_t& j1) {
  j0 = v >= pad ? 0 : (pad - v + s - 1) / s;
  j1 = w + pad > v ? std::min(ow, (w + pad - v - 1) / s + 1) : 0;
  if (j1 < j0) j1 = j0;
}

/// Unfolds output rows [i0, i1) of one sample (c, h, w) into rows indexed by
/// (c, u, v) and columns indexed by output position within the range.
template <typename T>
void im2col(const T* x, std::size_t c, std::size_t h, std::size_t w,
            std::size_t k, std::size_t s, std::size_t pad, std::size_t ow,
            std::size_t i0, std::size_t i1, T* col) {
  const std::size_t npos = (i1 - i0) * ow;
  for (std::size_t ci = 0; ci < c; ++ci) {
    const T* plane = x + ci * h * w;
    for (std::size_t u = 0; u < k; ++u) {
      for (std::size_t v = 0; v < k; ++v) {
        T* row = col + ((ci * k + u) * k + v) * npos;
        std::size_t j0, j1;
        valid_cols(w, s, v, pad, ow, j0, j1);
        for (std::size_t i = i0; i < i1; ++i) {
          const long yy = static_cast<long>(i * s + u) - static_cast<long>(pad);
          T* dst = row + (i - i0) * ow;
          if (yy < 0 || yy >= static_cast<long>(h)) {
            std::fill(dst, dst + ow, T(0));
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(yy) * w;
          std::fill(dst, dst + j0, T(0));
          if (s == 1) {
            std::copy(src + (j0 + v - pad), src + (j1 + v - pad), dst + j0);
          } else {
            for (std::size_t j = j0; j < j1; ++j) dst[j] = src[j * s + v - pad];
          }
          std::fill(dst + j1, dst + ow, T(0));
        }
      }
    }
  }
}

/// Adjoint of im2col: adds the columns of output rows [i0, i1) back into x.
template <typename T>
void col2im(const T* col, std::size_t c, std::size_t h, std::size_t w,
            std::size_t k, std::size_t s, std::size_t pad, std::size_t ow,
            std::size_t i0, std::size_t i1, T* x) {
  const std::size_t npos = (i1 - i0) * ow;
  for (std::size_t ci = 0; ci < c; ++ci) {
    T* plane = x + ci * h * w;
    for (std::size_t u = 0; u < k; ++u) {
      for (std::size_t v = 0; v < k; ++v) {
        const T* row = col + ((ci * k + u) * k + v) * npos;
        std::size_t j0, j1;
        valid_cols(w, s, v, pad, ow, j0, j1);
        for (std::size_t i = i0; i < i1; ++i) {
          const long yy = static_cast<long>(i * s + u) - static_cast<long>(pad);
          if (yy < 0 || yy >= static_cast<long>(h)) continue;
          T* dst = plane + static_cast<std::size_t>(yy) * w;
          const T* src = row + (i - i0) * ow;
          for (std::size_t j = j0; j < j1; ++j) dst[j * s + v - pad] += src[j];
        }
      }
    }
  }
}

/// Output rows per im2col chunk, sized so one chunk of columns stays in cache.
inline std::size_t chunk_rows(std::size_t rows, std::size_t oh, std::size_t ow) {
  const std::size_t budget = 32768;  // elements
  return std::clamp<std::size_t>(budget / std::max<std::size_t>(1, rows * ow), 1, oh);
}

/// Fixed-order dot product with eight interleaved partial sums.
template <typename T>
T dot(const T* a, const T* b, std::size_t n) {
  T acc[8] = {};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    for (std::size_t l = 0; l < 8; ++l) acc[l] += a[i + l] * b[i + l];
  T tail = T(0);
  for (; i < n; ++i) tail += a[i] * b[i];
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) +
         ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail;
}

template <typename T>
struct Lanes {
  typedef T vec __attribute__((vector_size(64)));
  static constexpr std::size_t width = 64 / sizeof(T);
  static vec load(const T* p) {
    vec v;
    std::memcpy(&v, p, sizeof v);
    return v;
  }
  static void store(T* p, vec v) { std::memcpy(p, &v, sizeof v); }
};

/// C[i][j] += sum_k A(i,k) * B[k][j], with A(i,k) = A[i*a_row + k*a_col].
/// Every C entry accumulates its k terms in ascending order, so the
/// blocking never changes the result.
template <typename T>
void gemm_acc(std::size_t M, std::size_t N, std::size_t K, const T* A,
              std::size_t a_row, std::size_t a_col, const T* B,
              std::size_t ldb, T* C, std::size_t ldc) {
  using L = Lanes<T>;
  using V = typename L::vec;
  constexpr std::size_t W = L::width, MR = 8, NR = 2 * W;
  std::size_t j = 0;
  for (; j + NR <= N; j += NR) {
    std::size_t i = 0;
    for (; i + MR <= M; i += MR) {
      V acc[MR][2];
      for (std::size_t m = 0; m < MR; ++m) {
        acc[m][0] = L::load(C + (i + m) * ldc + j);
        acc[m][1] = L::load(C + (i + m) * ldc + j + W);
      }
      const T* a = A + i * a_row;
      for (std::size_t k = 0; k < K; ++k) {
        const V b0 = L::load(B + k * ldb + j), b1 = L::load(B + k * ldb + j + W);
        for (std::size_t m = 0; m < MR; ++m) {
          const T am = a[m * a_row + k * a_col];
          acc[m][0] += am * b0;
          acc[m][1] += am * b1;
        }
      }
      for (std::size_t m = 0; m < MR; ++m) {
        L::store(C + (i + m) * ldc + j, acc[m][0]);
        L::store(C + (i + m) * ldc + j + W, acc[m][1]);
      }
    }
    for (; i < M; ++i) {
      V acc0 = L::load(C + i * ldc + j), acc1 = L::load(C + i * ldc + j + W);
      for (std::size_t k = 0; k < K; ++k) {
        const T am = A[i * a_row + k * a_col];
        acc0 += am * L::load(B + k * ldb + j);
        acc1 += am * L::load(B + k * ldb + j + W);
      }
      L::store(C + i * ldc + j, acc0);
      L::store(C + i * ldc + j + W, acc1);
    }
  }
  for (; j + W <= N; j += W) {
    std::size_t i = 0;
    for (; i + MR <= M; i += MR) {
      V acc[MR];
      for (std::size_t m = 0; m < MR; ++m) acc[m] = L::load(C + (i + m) * ldc + j);
      const T* a = A + i * a_row;
      for (std::size_t k = 0; k < K; ++k) {
        const V b = L::load(B + k * ldb + j);
        for (std::size_t m = 0; m < MR; ++m) acc[m] += a[m * a_row + k * a_col] * b;
      }
      for (std::size_t m = 0; m < MR; ++m) L::store(C + (i + m) * ldc + j, acc[m]);
    }
    for (; i < M; ++i) {
      V acc = L::load(C + i * ldc + j);
      for (std::size_t k = 0; k < K; ++k) acc += A[i * a_row + k * a_col] * L::load(B + k * ldb + j);
      L::store(C + i * ldc + j, acc);
    }
  }
  for (; j < N; ++j)
    for (std::size_t i = 0; i < M; ++i) {
      T acc = C[i * ldc + j];
      for (std::size_t k = 0; k < K; ++k) acc += A[i * a_row + k * a_col] * B[k * ldb + j];
      C[i * ldc + j] = acc;
    }
}

template <typename T>
void transpose(const T* src, std::size_t rows, std::size_t cols, T* dst) {
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
}

/// C[i][j] += sum_k A[i*lda + k] * B[j*ldb + k], vectorized along k. Lane
/// partial sums are reduced in a fixed order.
template <typename T>
void gemm_nt_acc(std::size_t M, std::size_t N, std::size_t K, const T* A,
                 std::size_t lda, const T* B, std::size_t ldb, T* C,
                 std::size_t ldc) {
  using L = Lanes<T>;
  using V = typename L::vec;
  constexpr std::size_t W = L::width, MR = 4, NR = 4;
  const std::size_t kv = K / W * W;
  auto reduce = [](const V& v) {
    T lanes[W];
    std::memcpy(lanes, &v, sizeof v);
    T s = T(0);
    for (std::size_t l = 0; l < W; ++l) s += lanes[l];
    return s;
  };
  auto tail = [&](std::size_t i, std::size_t j) {
    T s = T(0);
    for (std::size_t k = kv; k < K; ++k) s += A[i * lda + k] * B[j * ldb + k];
    return s;
  };
  std::size_t i = 0;
  for (; i + MR <= M; i += MR) {
    std::size_t j = 0;
    for (; j + NR <= N; j += NR) {
      V acc[MR][NR] = {};
      for (std::size_t k = 0; k < kv; k += W) {
        V a[MR], b[NR];
        for (std::size_t m = 0; m < MR; ++m) a[m] = L::load(A + (i + m) * lda + k);
        for (std::size_t n = 0; n < NR; ++n) b[n] = L::load(B + (j + n) * ldb + k);
        for (std::size_t m = 0; m < MR; ++m)
          for (std::size_t n = 0; n < NR; ++n) acc[m][n] += a[m] * b[n];
      }
      for (std::size_t m = 0; m < MR; ++m)
        for (std::size_t n = 0; n < NR; ++n)
          C[(i + m) * ldc + j + n] += reduce(acc[m][n]) + tail(i + m, j + n);
    }
    for (; j < N; ++j)
      for (std::size_t m = 0; m < MR; ++m) {
        V acc = {};
        for (std::size_t k = 0; k < kv; k += W)
          acc += L::load(A + (i + m) * lda + k) * L::load(B + j * ldb + k);
        C[(i + m) * ldc + j] += reduce(acc) + tail(i + m, j);
      }
  }
  for (; i < M; ++i)
    for (std::size_t j = 0; j < N; ++j) {
      V acc = {};
      for (std::size_t k = 0; k < kv; k += W)
        acc += L::load(A + i * lda + k) * L::load(B + j * ldb + k);
      C[i * ldc + j] += reduce(acc) + tail(i, j);
    }
}

template <typename T>
bool is_pointwise(const BasicConvParams<T>& p) {
  return p.kernel == 1 && p.stride == 1 && p.pad == 0;
}

}  // namespace detail

/// Output dims of conv2d_forward for an input of the given shape.
template <typename T>
Shape conv2d_output_shape(const Shape& in, const BasicConvParams<T>& p) {
  return Shape{in.n, p.out_ch, detail::conv_out_dim(in.h, p.kernel, p.stride, p.pad),
               detail::conv_out_dim(in.w, p.kernel, p.stride, p.pad)};
}

/// y[n,o,i,j] = bias[o] + sum_{c,u,v} x[n,c,i*s+u-pad,j*s+v-pad] * w[o,c,u,v]
/// with zero padding.
template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& x,
                              const BasicConvParams<T>& p) {
  p.validate();
  IPOOL_CHECK_SHAPE(x.c() == p.in_ch,
                    "conv input has " + std::to_string(x.c()) +
                        " channels, kernel expects " + std::to_string(p.in_ch));
  const Shape os = conv2d_output_shape(x.shape(), p);
  BasicTensor<T> y(os);
  const std::size_t npos = os.h * os.w;
  const std::size_t rows = p.in_ch * p.kernel * p.kernel;
  const bool pointwise = detail::is_pointwise(p);
  const std::size_t step = pointwise ? os.h : detail::chunk_rows(rows, os.h, os.w);
  std::vector<T> col(pointwise ? 0 : rows * step * os.w);
  for (std::size_t n = 0; n < x.n(); ++n) {
    T* out = y.sample(n);
    for (std::size_t o = 0; o < p.out_ch; ++o)
      std::fill(out + o * npos, out + (o + 1) * npos, p.bias[o]);
    for (std::size_t i0 = 0; i0 < os.h; i0 += step) {
      const std::size_t i1 = std::min(os.h, i0 + step), len = (i1 - i0) * os.w;
      const T* cols = x.sample(n) + i0 * os.w;
      std::size_t ldb = npos;
      if (!pointwise) {
        detail::im2col(x.sample(n), x.c(), x.h(), x.w(), p.kernel, p.stride, p.pad, os.w, i0,
                       i1, col.data());
        cols = col.data();
        ldb = len;
      }
      detail::gemm_acc(p.out_ch, len, rows, p.weight.data(), rows, std::size_t{1}, cols, ldb,
                       out + i0 * os.w, npos);
    }
  }
  return y;
}

/// Exact gradients of conv2d_forward with respect to the input and params.
template <typename T>
ConvGrads<T> conv2d_backward(const BasicTensor<T>& x,
                             const BasicConvParams<T>& p,
                             const BasicTensor<T>& dy) {
  p.validate();
  IPOOL_CHECK_SHAPE(x.c() == p.in_ch, "conv backward channel mismatch");
  const Shape os = conv2d_output_shape(x.shape(), p);
  IPOOL_CHECK_SHAPE(dy.shape() == os, "conv backward: dy dims " +
                                          dy.shape().str() + " != output " +
                                          os.str());
  ConvGrads<T> g{BasicTensor<T>(x.shape()), p.zeros_like()};
  const std::size_t npos = os.h * os.w;
  const std::size_t rows = p.in_ch * p.kernel * p.kernel;
  const bool pointwise = detail::is_pointwise(p);
  const std::size_t step = pointwise ? os.h : detail::chunk_rows(rows, os.h, os.w);
  std::vector<T> col(pointwise ? 0 : rows * step * os.w);
  std::vector<T> dcol(rows * step * os.w);
  // Wide outputs: accumulate dW^T = col . dY^T so the output channels sit in
  // vector lanes. Narrow outputs: dot products along the positions instead.
  const bool wide = p.out_ch >= detail::Lanes<T>::width;
  std::vector<T> dyt(wide ? p.out_ch * npos : 0), dwt(wide ? rows * p.out_ch : 0, T(0));
  for (std::size_t n = 0; n < x.n(); ++n) {
    const T* dout = dy.sample(n);
    if (wide) detail::transpose(dout, p.out_ch, npos, dyt.data());
    for (std::size_t o = 0; o < p.out_ch; ++o) {
      T bsum = T(0);
      for (std::size_t q = 0; q < npos; ++q) bsum += dout[o * npos + q];
      g.dp.bias[o] += bsum;
    }
    for (std::size_t i0 = 0; i0 < os.h; i0 += step) {
      const std::size_t i1 = std::min(os.h, i0 + step), len = (i1 - i0) * os.w;
      const std::size_t q0 = i0 * os.w;
      const T* cols = x.sample(n) + q0;
      std::size_t ldc = npos;
      if (!pointwise) {
        detail::im2col(x.sample(n), x.c(), x.h(), x.w(), p.kernel, p.stride, p.pad, os.w, i0,
                       i1, col.data());
        cols = col.data();
        ldc = len;
      }
      if (wide)
        detail::gemm_acc(rows, p.out_ch, len, cols, ldc, std::size_t{1},
                         dyt.data() + q0 * p.out_ch, p.out_ch, dwt.data(), p.out_ch);
      else
        detail::gemm_nt_acc(p.out_ch, rows, len, dout + q0, npos, cols, ldc,
                            g.dp.weight.data(), rows);
      // dcol = W^T . dY
      std::fill_n(dcol.begin(), rows * len, T(0));
      detail::gemm_acc(rows, len, p.out_ch, p.weight.data(), std::size_t{1}, rows, dout + q0,
                       npos, dcol.data(), len);
      if (pointwise) {
        T* dx = g.dx.sample(n);
        for (std::size_t r = 0; r < rows; ++r)
          std::copy_n(dcol.data() + r * len, len, dx + r * npos + q0);
      } else {
        detail::col2im(dcol.data(), x.c(), x.h(), x.w(), p.kernel, p.stride, p.pad, os.w, i0,
                       i1, g.dx.sample(n));
      }
    }
  }
  if (wide)
    for (std::size_t o = 0; o < p.out_ch; ++o)
      for (std::size_t r = 0; r < rows; ++r) g.dp.weight[o * rows + r] = dwt[r * p.out_ch + o];
  return g;
}

}  // namespace ipool
