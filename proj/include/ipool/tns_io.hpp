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

// .tns layout (all integers little-endian):
//   "TNSR" | version u32 = 1 | dtype u8 (0 = f32) | ndims u8 |
//   dims u64[ndims] | payload f32[prod(dims)] row-major

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "ipool/error.hpp"
#include "ipool/tensor.hpp"

namespace ipool {

inline constexpr char kTnsMagic[4] = {'T', 'N', 'S', 'R'};
inline constexpr std::uint32_t kTnsVersion = 1;
inline constexpr std::uint8_t kTnsDtypeF32 = 0;

/// An n-dimensional float array as stored in a .tns stream.
struct TnsArray {
  std::vector<std::uint64_t> dims;
  std::vector<float> data;
};

namespace io {

template <typename U>
void put_le(std::ostream& os, U v) {
  unsigned char b[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i)
    b[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xffu);
  os.write(reinterpret_cast<const char*>(b), sizeof(U));
}

template <typename U>
U get_le(std::istream& is, const char* what) {
  unsigned char b[sizeof(U)];
  if (!is.read(reinterpret_cast<char*>(b), sizeof(U)))
    throw FormatError(std::string("truncated stream reading ") + what);
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i)
    v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return static_cast<U>(v);
}

}  // namespace io

inline void write_tns(std::ostream& os, std::span<const std::uint64_t> dims,
                      std::span<const float> data) {
  std::uint64_t count = 1;
  for (auto d : dims) count *= d;
  IPOOL_CHECK_SHAPE(count == data.size(), "write_tns: dims do not match data");
  if (dims.size() > 255) throw ShapeError("write_tns: too many dims");
  os.write(kTnsMagic, 4);
  io::put_le<std::uint32_t>(os, kTnsVersion);
  io::put_le<std::uint8_t>(os, kTnsDtypeF32);
  io::put_le<std::uint8_t>(os, static_cast<std::uint8_t>(dims.size()));
  for (auto d : dims) io::put_le<std::uint64_t>(os, d);
  for (float f : data) io::put_le<std::uint32_t>(os, std::bit_cast<std::uint32_t>(f));
}

inline TnsArray read_tns(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4)) throw FormatError("truncated stream reading magic");
  if (std::memcmp(magic, kTnsMagic, 4) != 0)
    throw FormatError("bad .tns magic");
  const auto version = io::get_le<std::uint32_t>(is, "version");
  if (version != kTnsVersion)
    throw FormatError("unsupported .tns version " + std::to_string(version));
  const auto dtype = io::get_le<std::uint8_t>(is, "dtype");
  if (dtype != kTnsDtypeF32)
    throw FormatError("unsupported .tns dtype " + std::to_string(dtype));
  const auto ndims = io::get_le<std::uint8_t>(is, "ndims");
  TnsArray a;
  std::uint64_t count = 1;
  for (std::uint8_t i = 0; i < ndims; ++i) {
    a.dims.push_back(io::get_le<std::uint64_t>(is, "dims"));
    count *= a.dims.back();
  }
  if (count > (std::uint64_t{1} << 34)) throw FormatError(".tns payload too large");
  a.data.resize(count);
  for (auto& f : a.data)
    f = std::bit_cast<float>(io::get_le<std::uint32_t>(is, "payload"));
  return a;
}

inline void write_tns(std::ostream& os, const Tensor& t) {
  const std::uint64_t dims[4] = {t.n(), t.c(), t.h(), t.w()};
  write_tns(os, dims, t.data());
}

/// Reads a .tns array as a 4-D tensor; lower-rank arrays are left-padded
/// with unit dims.
inline Tensor to_tensor(TnsArray a) {
  if (a.dims.size() > 4) throw ShapeError(".tns array has more than 4 dims");
  std::uint64_t d[4] = {1, 1, 1, 1};
  const std::size_t off = 4 - a.dims.size();
  for (std::size_t i = 0; i < a.dims.size(); ++i) d[off + i] = a.dims[i];
  return Tensor(Shape{d[0], d[1], d[2], d[3]}, std::move(a.data));
}

inline void save_tensor(const std::string& path, const Tensor& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path + " for writing");
  write_tns(os, t);
  if (!os) throw Error("failed writing " + path);
}

inline Tensor load_tensor(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open " + path);
  return to_tensor(read_tns(is));
}

}  // namespace ipool
