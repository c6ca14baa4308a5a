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

// .ckpt layout (integers little-endian):
//   "PNCK" | version u32 = 1 | spec hash u64 |
//   records until end of file, each: name length u16 | name bytes | .tns array

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "ipool/error.hpp"
#include "ipool/net/network.hpp"
#include "ipool/tns_io.hpp"

namespace ipool::net {

inline constexpr char kCkptMagic[4] = {'P', 'N', 'C', 'K'};
inline constexpr std::uint32_t kCkptVersion = 1;

inline void write_checkpoint(std::ostream& os, Network& net) {
  os.write(kCkptMagic, 4);
  io::put_le<std::uint32_t>(os, kCkptVersion);
  io::put_le<std::uint64_t>(os, net.spec().hash());
  for (const auto& p : net.parameters()) {
    io::put_le<std::uint16_t>(os, static_cast<std::uint16_t>(p.name.size()));
    os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    write_tns(os, p.dims, *p.value);
  }
}

inline void save_checkpoint(Network& net, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path + " for writing");
  write_checkpoint(os, net);
  if (!os) throw Error("failed writing " + path);
}

/// Restores parameters into a network freshly built from `spec`.
inline Network read_checkpoint(std::istream& is, const NetworkSpec& spec) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kCkptMagic, 4) != 0)
    throw CorruptCheckpoint("checkpoint magic is not PNCK");
  std::uint64_t hash = 0;
  try {
    const auto version = io::get_le<std::uint32_t>(is, "version");
    if (version != kCkptVersion)
      throw CorruptCheckpoint("unsupported checkpoint version " + std::to_string(version));
    hash = io::get_le<std::uint64_t>(is, "spec hash");
  } catch (const CorruptCheckpoint&) {
    throw;
  } catch (const FormatError& e) {
    throw CorruptCheckpoint(e.what());
  }
  if (hash != spec.hash())
    throw CheckpointMismatch("checkpoint was written for a different network (" +
                             spec.canonical() + " expected)");

  Network net(spec, 0);
  auto params = net.parameters();
  std::size_t loaded = 0;
  while (is.peek() != std::char_traits<char>::eof()) {
    if (loaded == params.size())
      throw CheckpointMismatch("checkpoint holds more parameters than the network");
    auto& p = params[loaded];
    try {
      const auto len = io::get_le<std::uint16_t>(is, "record name length");
      std::string name(len, '\0');
      if (!is.read(name.data(), len)) throw CorruptCheckpoint("truncated record name");
      TnsArray a = read_tns(is);
      if (name != p.name)
        throw CheckpointMismatch("expected parameter " + p.name + ", found " + name);
      if (a.dims != p.dims) throw CheckpointMismatch("shape mismatch for " + p.name);
      *p.value = std::move(a.data);
    } catch (const FormatError& e) {
      throw CorruptCheckpoint(std::string("corrupt checkpoint: ") + e.what());
    }
    ++loaded;
  }
  if (loaded != params.size())
    throw CorruptCheckpoint("checkpoint ends after " + std::to_string(loaded) + " of " +
                            std::to_string(params.size()) + " parameters");
  return net;
}

inline Network load_checkpoint(const std::string& path, const NetworkSpec& spec) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open " + path);
  return read_checkpoint(is, spec);
}

}  // namespace ipool::net
