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

// Synthetic double-compression dataset:
//
//   base image -> JPEG(qf1) -> resample(f) [-> rotate(theta)] -> JPEG(qf2)
//              -> center crop to the routed patch side
//
// Output directory layout:
//   <out>/train.jsonl, <out>/test.jsonl      one JSON object per record
//   <out>/train/r<k>.tns, <out>/test/r<k>.tns  1x1xPxP float patches
// Manifest paths are relative to the manifest's directory.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "ipool/config.hpp"
#include "ipool/data/geometry.hpp"
#include "ipool/data/image.hpp"
#include "ipool/data/jpeg.hpp"
#include "ipool/net/routing.hpp"
#include "ipool/rng.hpp"
#include "ipool/tns_io.hpp"
#include "json.hpp"

namespace ipool::data {

inline constexpr std::array<double, 5> kFactors = {0.6, 0.8, 1.0, 1.2, 1.4};
inline constexpr int kQf2 = 90;

/// Class index of a resampling factor; throws for anything off the list.
inline std::size_t factor_index(double f) {
  for (std::size_t i = 0; i < kFactors.size(); ++i)
    if (kFactors[i] == f) return i;
  throw DomainError("resampling factor " + std::to_string(f) + " is not one of the five classes");
}

struct DatasetConfig {
  std::vector<std::size_t> base_sizes = {64, 128, 256};
  std::vector<int> qf1_choices = {50, 60, 70, 80, 90, 100};
  int qf2 = kQf2;
  bool rotation = false;
  double rotation_max_deg = 20.0;
  std::size_t train_per_class = 10;
  std::size_t test_per_class = 2;
  std::uint64_t master_seed = 1;
  /// Divides the full-size routing thresholds and patch sides.
  std::size_t routing_divisor = 8;

  net::Routing routing() const { return net::Routing::scaled(routing_divisor); }

  void validate() const {
    if (base_sizes.empty()) throw DomainError("dataset needs at least one base size");
    for (auto s : base_sizes)
      if (s < 64) throw DomainError("base sizes must be at least 64");
    if (qf1_choices.empty()) throw DomainError("dataset needs at least one qf1 choice");
    for (int q : qf1_choices) quant_table(q);
    if (qf2 != kQf2) throw DomainError("the second compression is fixed at quality 90");
    if (rotation && !(rotation_max_deg > 0 && rotation_max_deg <= 45))
      throw DomainError("rotation range must be within (0, 45] degrees");
    if (train_per_class == 0) throw DomainError("train_per_class must be positive");
    if (routing_divisor == 0 || 1024 % routing_divisor != 0)
      throw DomainError("routing_divisor must divide 1024");
  }

  static DatasetConfig from_config(const Config& c) {
    DatasetConfig d;
    d.base_sizes = c.get_list<std::size_t>("base_sizes", d.base_sizes);
    d.qf1_choices = c.get_list<int>("qf1_choices", d.qf1_choices);
    d.qf2 = c.get<int>("qf2", d.qf2);
    d.rotation = c.get<bool>("rotation", d.rotation);
    d.rotation_max_deg = c.get<double>("rotation_max_deg", d.rotation_max_deg);
    d.train_per_class = c.get<std::size_t>("train_per_class", d.train_per_class);
    d.test_per_class = c.get<std::size_t>("test_per_class", d.test_per_class);
    d.master_seed = c.get<std::uint64_t>("seed", d.master_seed);
    d.routing_divisor = c.get<std::size_t>("routing_divisor", d.routing_divisor);
    d.validate();
    return d;
  }
};

struct RecordMeta {
  std::size_t base_size = 0;
  int qf1 = 0;
  double factor = 1.0;
  double rotation_deg = 0.0;
  std::uint64_t seed = 0;
  bool operator==(const RecordMeta&) const = default;
};

struct Record {
  Tensor patch;
  std::size_t label = 0;
  RecordMeta meta;

  /// 0 for clockwise, 1 for counter-clockwise; empty without rotation.
  std::optional<int> rotation_label() const {
    if (meta.rotation_deg == 0.0) return std::nullopt;
    return meta.rotation_deg > 0 ? 1 : 0;
  }
};

/// Full pipeline with an explicit patch side.
inline Record make_record_with_patch(const DatasetConfig& cfg, std::size_t base_size,
                                     double factor, std::uint64_t record_seed,
                                     std::size_t patch) {
  Record r;
  r.label = factor_index(factor);
  Rng rng(record_seed);
  r.meta.base_size = base_size;
  r.meta.factor = factor;
  r.meta.seed = record_seed;
  r.meta.qf1 = cfg.qf1_choices[rng.below(cfg.qf1_choices.size())];
  if (cfg.rotation) {
    double a = 0;
    while (a == 0.0) a = rng.uniform(-cfg.rotation_max_deg, cfg.rotation_max_deg);
    r.meta.rotation_deg = a;
  }
  const std::size_t resized = static_cast<std::size_t>(
      std::lround(static_cast<double>(base_size) * factor));
  if (patch > resized)
    throw DiscardedRecord("patch " + std::to_string(patch) + " does not fit the " +
                          std::to_string(resized) + "px resampled image");

  Image img = synth_base_image(base_size, derive_seed(record_seed, {1}));
  img = jpeg_sim(img, r.meta.qf1);
  if (factor != 1.0) img = resample(img, factor);
  if (cfg.rotation) img = rotate(img, r.meta.rotation_deg);
  img = jpeg_sim(img, cfg.qf2);
  r.patch = img.center_crop(patch).to_tensor();
  return r;
}

/// Patch side routed from the base size for the given network kind.
inline Record make_record(const DatasetConfig& cfg, std::size_t base_size, double factor,
                          std::uint64_t record_seed, net::NetKind mode) {
  return make_record_with_patch(cfg, base_size, factor, record_seed,
                                cfg.routing().patch_size(base_size, mode));
}

struct ManifestEntry {
  std::string path;  // as resolved against the manifest's directory
  std::size_t label = 0;
  RecordMeta meta;
};

enum class Split : std::uint64_t { Train = 0, Test = 1 };

/// Seed of one record. The key packs (split, size slot, factor, index), so
/// distinct records get distinct seeds and the two splits never share one.
inline std::uint64_t record_seed(std::uint64_t master, Split split, std::size_t size_slot,
                                 std::size_t factor_idx, std::size_t i) {
  const std::uint64_t key = (static_cast<std::uint64_t>(split) << 63) |
                            (static_cast<std::uint64_t>(size_slot) << 48) |
                            (static_cast<std::uint64_t>(factor_idx) << 40) |
                            static_cast<std::uint64_t>(i);
  return derive_seed(master, {key});
}

inline nlohmann::ordered_json manifest_line(const std::string& rel_path, const Record& r) {
  return nlohmann::ordered_json{{"path", rel_path},          {"label", r.label},
                                {"base_size", r.meta.base_size}, {"qf1", r.meta.qf1},
                                {"factor", r.meta.factor},   {"rotation_deg", r.meta.rotation_deg},
                                {"seed", r.meta.seed}};
}

inline std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open manifest " + path);
  const auto dir = std::filesystem::path(path).parent_path();
  std::vector<ManifestEntry> out;
  std::string line;
  for (std::size_t no = 1; std::getline(is, line); ++no) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ManifestEntry e;
      e.path = (dir / j.at("path").get<std::string>()).string();
      e.label = j.at("label").get<std::size_t>();
      e.meta.base_size = j.at("base_size").get<std::size_t>();
      e.meta.qf1 = j.at("qf1").get<int>();
      e.meta.factor = j.at("factor").get<double>();
      e.meta.rotation_deg = j.at("rotation_deg").get<double>();
      e.meta.seed = j.at("seed").get<std::uint64_t>();
      if (factor_index(e.meta.factor) != e.label)
        throw FormatError("label does not match factor");
      out.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw FormatError(path + ":" + std::to_string(no) + ": " + ex.what());
    } catch (const Error& ex) {
      throw FormatError(path + ":" + std::to_string(no) + ": " + ex.what());
    }
  }
  return out;
}

struct DatasetSummary {
  std::string train_manifest, test_manifest;
  std::size_t train_count = 0, test_count = 0;
};

/// Generates both splits under `out_dir`, overwriting earlier output.
inline DatasetSummary build_dataset(const DatasetConfig& cfg, net::NetKind mode,
                                    const std::string& out_dir) {
  cfg.validate();
  namespace fs = std::filesystem;
  const fs::path root(out_dir);
  DatasetSummary summary;
  for (Split split : {Split::Train, Split::Test}) {
    const std::string name = split == Split::Train ? "train" : "test";
    std::error_code ec;
    fs::create_directories(root / name, ec);
    if (ec) throw Error("cannot create " + (root / name).string() + ": " + ec.message());
    const fs::path manifest = root / (name + ".jsonl");
    std::ofstream ms(manifest, std::ios::binary | std::ios::trunc);
    if (!ms) throw Error("cannot write " + manifest.string());
    const std::size_t per_class = split == Split::Train ? cfg.train_per_class : cfg.test_per_class;
    std::size_t k = 0;
    for (std::size_t s = 0; s < cfg.base_sizes.size(); ++s)
      for (std::size_t f = 0; f < kFactors.size(); ++f)
        for (std::size_t i = 0; i < per_class; ++i, ++k) {
          const auto seed = record_seed(cfg.master_seed, split, s, f, i);
          const Record r = make_record(cfg, cfg.base_sizes[s], kFactors[f], seed, mode);
          char file[32];
          std::snprintf(file, sizeof file, "r%06zu.tns", k);
          const std::string rel = name + "/" + file;
          save_tensor((root / rel).string(), r.patch);
          ms << manifest_line(rel, r).dump() << '\n';
        }
    if (!ms) throw Error("failed writing " + manifest.string());
    (split == Split::Train ? summary.train_manifest : summary.test_manifest) = manifest.string();
    (split == Split::Train ? summary.train_count : summary.test_count) = k;
  }
  return summary;
}

}  // namespace ipool::data
