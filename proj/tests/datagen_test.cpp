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


#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "gtest/gtest.h"
#include "ipool/config.hpp"
#include "ipool/data/dataset.hpp"

using namespace ipool;
using namespace ipool::data;

namespace {

Block8 random_block(std::uint64_t seed) {
  Rng rng(seed);
  Block8 b;
  for (auto& v : b) v = rng.uniform(-128, 128);
  return b;
}

// Direct double-sum DCT-II, written independently of the separable version.
Block8 dct_direct(const Block8& x) {
  Block8 out{};
  for (int u = 0; u < 8; ++u)
    for (int v = 0; v < 8; ++v) {
      double s = 0;
      for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j)
          s += x[i * 8 + j] * std::cos((2 * i + 1) * u * std::numbers::pi / 16) *
               std::cos((2 * j + 1) * v * std::numbers::pi / 16);
      const double cu = u == 0 ? 1 / std::sqrt(2.0) : 1.0, cv = v == 0 ? 1 / std::sqrt(2.0) : 1.0;
      out[u * 8 + v] = 0.25 * cu * cv * s;
    }
  return out;
}

Image random_image(std::size_t h, std::size_t w, std::uint64_t seed) {
  Rng rng(seed);
  Image img(h, w);
  for (auto& p : img.pixels) p = static_cast<float>(rng.uniform(0, 255));
  return img;
}

double max_abs_diff(const Image& a, const Image& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a.pixels[i]) - b.pixels[i]));
  return m;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag)
      : path(std::filesystem::temp_directory_path() / ("ipool_" + tag)) {
    std::filesystem::remove_all(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST(SynthBase, Deterministic) {
  EXPECT_EQ(synth_base_image(64, 5), synth_base_image(64, 5));
  EXPECT_GT(max_abs_diff(synth_base_image(64, 5), synth_base_image(64, 6)), 0.0);
}

TEST(SynthBase, TexturedAndInRange) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Image img = synth_base_image(64, seed);
    EXPECT_GE(stddev(img), 5.0) << seed;
    for (float v : img.pixels) ASSERT_TRUE(v >= 0.f && v <= 255.f);
  }
  EXPECT_EQ(synth_base_image(256, 1).height, 256u);
  EXPECT_THROW(synth_base_image(32, 1), DomainError);
}

TEST(Dct, ConstantBlockHasOnlyDc) {
  Block8 b;
  b.fill(3.5);
  const Block8 c = dct8(b);
  EXPECT_NEAR(c[0], 8 * 3.5, 1e-12);
  for (int i = 1; i < 64; ++i) EXPECT_NEAR(c[i], 0.0, 1e-12);
}

TEST(Dct, MatchesDirectFormula) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Block8 x = random_block(s);
    const Block8 a = dct8(x), b = dct_direct(x);
    for (int i = 0; i < 64; ++i) EXPECT_NEAR(a[i], b[i], 1e-9);
  }
}

TEST(Dct, RoundTripAndParseval) {
  for (std::uint64_t s = 0; s < 100; ++s) {
    const Block8 x = random_block(100 + s);
    const Block8 c = dct8(x), y = idct8(c);
    double ex = 0, ec = 0;
    for (int i = 0; i < 64; ++i) {
      ASSERT_NEAR(y[i], x[i], 1e-10);
      ex += x[i] * x[i];
      ec += c[i] * c[i];
    }
    EXPECT_NEAR(ex, ec, 1e-8 * std::max(1.0, ex));
  }
}

TEST(QuantTable, Examples) {
  EXPECT_EQ(quant_table(50), kBaseLuminance);
  for (int v : quant_table(100)) EXPECT_EQ(v, 1);
  EXPECT_EQ(quant_table(90)[0], 3);  // base entry 16
  EXPECT_EQ(quant_table(1)[0], 255);
  EXPECT_THROW(quant_table(0), DomainError);
  EXPECT_THROW(quant_table(101), DomainError);
}

TEST(QuantTable, MonotoneInQuality) {
  for (int qf = 1; qf < 100; ++qf) {
    const auto lo = quant_table(qf), hi = quant_table(qf + 1);
    for (int i = 0; i < 64; ++i) ASSERT_LE(hi[i], lo[i]) << qf;
  }
}

TEST(JpegSim, QualityHundredIsNearLossless) {
  const Image img = random_image(64, 64, 1);
  const Image out = jpeg_sim(img, 100);
  for (std::size_t by = 0; by < 64; by += 8)
    for (std::size_t bx = 0; bx < 64; bx += 8) {
      double se = 0;
      for (std::size_t y = 0; y < 8; ++y)
        for (std::size_t x = 0; x < 8; ++x) {
          const double d = img.at(by + y, bx + x) - out.at(by + y, bx + x);
          se += d * d;
        }
      EXPECT_LE(std::sqrt(se / 64), 0.5);
    }
}

TEST(JpegSim, ConstantImageStaysConstant) {
  for (int qf : {10, 50, 75, 90}) {
    const Image out = jpeg_sim(Image(24, 16, 77.f), qf);
    for (float v : out.pixels) ASSERT_EQ(v, out.pixels[0]) << qf;
    EXPECT_NEAR(out.pixels[0], 77.f, quant_table(qf)[0] / 8.0);
  }
}

TEST(JpegSim, SecondPassChangesLess) {
  for (int qf : {50, 70, 90}) {
    const Image img = synth_base_image(64, 3);
    const Image once = jpeg_sim(img, qf), twice = jpeg_sim(once, qf);
    double first = 0, second = 0;
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
      first += std::pow(once.pixels[i] - img.pixels[i], 2);
      second += std::pow(twice.pixels[i] - once.pixels[i], 2);
    }
    EXPECT_LT(second, first) << qf;
  }
}

TEST(JpegSim, PadsNonMultipleOfEight) {
  const Image img = random_image(13, 21, 4);
  const Image out = jpeg_sim(img, 80);
  EXPECT_EQ(out.height, 13u);
  EXPECT_EQ(out.width, 21u);
  EXPECT_THROW(jpeg_sim(Image(), 80), DomainError);
}

TEST(Resample, UnitFactorIsIdentity) {
  const Image img = synth_base_image(64, 9);
  EXPECT_EQ(resample(img, 1.0), img);
}

TEST(Resample, OutputSize) {
  const Image img = random_image(64, 40, 2);
  for (double f : kFactors) {
    const Image out = resample(img, f);
    EXPECT_EQ(out.height, static_cast<std::size_t>(std::lround(64 * f)));
    EXPECT_EQ(out.width, static_cast<std::size_t>(std::lround(40 * f)));
  }
  EXPECT_THROW(resample(img, 0.1), DomainError);
  EXPECT_THROW(resample(img, 0.0), DomainError);
}

TEST(Resample, ConstantStaysConstant) {
  for (double f : {0.6, 0.8, 1.2, 1.4, 2.0, 0.37}) {
    const Image out = resample(Image(40, 40, 91.f), f);
    for (float v : out.pixels) ASSERT_NEAR(v, 91.f, 1e-4) << f;
  }
}

TEST(Resample, UpsampledImpulseMatchesKeysKernel) {
  // impulse far from the borders so reflection never reaches the support
  Image img(32, 32, 0.f);
  const double c = 15, amp = 100;
  img.at(15, 15) = static_cast<float>(amp);
  auto keys = [](double x) {  // Keys a = -0.5, piecewise form
    x = std::abs(x);
    if (x <= 1) return 1.5 * x * x * x - 2.5 * x * x + 1;
    if (x < 2) return -0.5 * x * x * x + 2.5 * x * x - 4 * x + 2;
    return 0.0;
  };
  const Image out = resample(img, 2.0);
  for (std::size_t y = 0; y < 64; ++y)
    for (std::size_t x = 0; x < 64; ++x) {
      const double sy = (y + 0.5) / 2 - 0.5, sx = (x + 0.5) / 2 - 0.5;
      const double expect = std::max(0.0, amp * keys(sy - c) * keys(sx - c));
      ASSERT_NEAR(out.at(y, x), expect, 1e-4) << y << "," << x;
    }
}

TEST(Rotate, ZeroAngleIsIdentity) {
  const Image img = random_image(30, 22, 5);
  EXPECT_EQ(rotate(img, 0.0), img);
}

TEST(Rotate, ConstantStaysConstant) {
  const Image out = rotate(Image(20, 20, 42.f), 17.0);
  for (float v : out.pixels) ASSERT_NEAR(v, 42.f, 1e-4);
}

TEST(Rotate, PositiveAngleTurnsCounterClockwise) {
  Image img(41, 41, 0.f);
  img.at(20, 30) = 200.f;  // right of center
  const Image out = rotate(img, 45.0);
  const double r = 10 / std::sqrt(2.0);
  const auto y = static_cast<std::size_t>(std::lround(20 - r));
  const auto x = static_cast<std::size_t>(std::lround(20 + r));
  EXPECT_GT(out.at(y, x), 50.f);
  EXPECT_EQ(out.at(20, 30), 0.f);
}

TEST(Rotate, ForwardBackwardIsClose) {
  // smooth content: bilinear loss is bounded by the second derivative
  Image img(64, 64);
  for (std::size_t y = 0; y < 64; ++y)
    for (std::size_t x = 0; x < 64; ++x)
      img.at(y, x) = static_cast<float>(128 + 60 * std::sin(x * 0.35) * std::cos(y * 0.23));
  for (double a : {5.0, -12.0, 20.0}) {
    const Image back = rotate(rotate(img, a), -a);
    double se = 0;
    std::size_t n = 0;
    for (std::size_t y = 16; y < 48; ++y)
      for (std::size_t x = 16; x < 48; ++x, ++n) se += std::pow(back.at(y, x) - img.at(y, x), 2);
    EXPECT_LE(std::sqrt(se / n), 2.0) << a;
  }
  EXPECT_THROW(rotate(img, 50), DomainError);
}

TEST(Record, UnitFactorReducesToDoubleJpeg) {
  DatasetConfig cfg;
  const Record r = make_record_with_patch(cfg, 64, 1.0, 77, 32);
  const Image base = synth_base_image(64, derive_seed(77, {1}));
  const Image expect = jpeg_sim(jpeg_sim(base, r.meta.qf1), 90).center_crop(32);
  EXPECT_EQ(r.patch, expect.to_tensor());
}

TEST(Record, DeterministicAndConsistent) {
  DatasetConfig cfg;
  cfg.rotation = true;
  const Record a = make_record(cfg, 128, 0.8, 123, net::NetKind::IPN);
  const Record b = make_record(cfg, 128, 0.8, 123, net::NetKind::IPN);
  EXPECT_EQ(a.patch, b.patch);
  EXPECT_EQ(a.meta, b.meta);
  EXPECT_EQ(a.label, 1u);
  EXPECT_EQ(a.patch.shape(), (Shape{1, 1, 32, 32}));
  EXPECT_NE(a.meta.rotation_deg, 0.0);
  EXPECT_LE(std::abs(a.meta.rotation_deg), 20.0);
  EXPECT_EQ(*a.rotation_label(), a.meta.rotation_deg > 0 ? 1 : 0);
  EXPECT_EQ(make_record(cfg, 256, 1.4, 1, net::NetKind::BN).patch.h(), 32u);
}

TEST(Record, DiscardWhenPatchExceedsResampledImage) {
  DatasetConfig cfg;
  EXPECT_NO_THROW(make_record_with_patch(cfg, 64, 0.6, 5, 32));  // round(38.4) = 38
  EXPECT_THROW(make_record_with_patch(cfg, 64, 0.6, 5, 64), DiscardedRecord);
  EXPECT_THROW(make_record(cfg, 64, 0.7, 5, net::NetKind::IPN), DomainError);
}

TEST(Record, QfDrawCoversChoices) {
  DatasetConfig cfg;
  std::set<int> seen;
  for (std::uint64_t s = 0; s < 200; ++s)
    seen.insert(make_record_with_patch(cfg, 64, 1.0, s, 8).meta.qf1);
  EXPECT_EQ(seen, (std::set<int>{50, 60, 70, 80, 90, 100}));
}

TEST(Dataset, CountsBalanceAndReproducibility) {
  TempDir a("ds_a"), b("ds_b");
  DatasetConfig cfg;
  cfg.train_per_class = 10;
  cfg.test_per_class = 2;
  cfg.master_seed = 42;
  const auto sa = build_dataset(cfg, net::NetKind::IPN, a.path.string());
  EXPECT_EQ(sa.train_count, 150u);
  EXPECT_EQ(sa.test_count, 30u);
  const auto train = read_manifest(sa.train_manifest);
  const auto test = read_manifest(sa.test_manifest);
  ASSERT_EQ(train.size(), 150u);
  ASSERT_EQ(test.size(), 30u);

  std::map<std::pair<std::size_t, std::size_t>, int> cells;
  std::map<std::size_t, int> classes;
  std::set<std::uint64_t> train_seeds, test_seeds;
  for (const auto& e : train) {
    ++cells[{e.meta.base_size, e.label}];
    ++classes[e.label];
    EXPECT_EQ(e.label, factor_index(e.meta.factor));
    train_seeds.insert(e.meta.seed);
    const Tensor t = load_tensor(e.path);
    EXPECT_EQ(t.h(), cfg.routing().patch_size(e.meta.base_size, net::NetKind::IPN));
  }
  for (const auto& [cell, n] : cells) EXPECT_EQ(n, 10);
  for (const auto& [cls, n] : classes) EXPECT_EQ(n, 30);
  EXPECT_EQ(train_seeds.size(), 150u);
  for (const auto& e : test) test_seeds.insert(e.meta.seed);
  for (auto s : test_seeds) EXPECT_EQ(train_seeds.count(s), 0u);

  const auto sb = build_dataset(cfg, net::NetKind::IPN, b.path.string());
  EXPECT_EQ(slurp(sa.train_manifest), slurp(sb.train_manifest));
  for (const auto& entry : std::filesystem::recursive_directory_iterator(a.path)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(entry.path(), a.path);
    EXPECT_EQ(slurp(entry.path()), slurp(b.path / rel)) << rel;
  }
}

TEST(Dataset, BnModeUsesHalfPatches) {
  TempDir d("ds_bn");
  DatasetConfig cfg;
  cfg.train_per_class = 1;
  cfg.test_per_class = 1;
  const auto s = build_dataset(cfg, net::NetKind::BN, d.path.string());
  for (const auto& e : read_manifest(s.train_manifest))
    EXPECT_EQ(load_tensor(e.path).h(), e.meta.base_size / 8);
}

TEST(Dataset, UnwritableDirectory) {
  TempDir d("ds_blocker");
  std::filesystem::create_directories(d.path);
  std::ofstream(d.path / "file") << "x";
  DatasetConfig cfg;
  EXPECT_THROW(build_dataset(cfg, net::NetKind::IPN, (d.path / "file" / "sub").string()), Error);
}

TEST(Manifest, RejectsBadLines) {
  TempDir d("manifest");
  std::filesystem::create_directories(d.path);
  const auto p = d.path / "m.jsonl";
  std::ofstream(p) << R"({"path":"a.tns","label":2,"base_size":64,"qf1":50,"factor":0.8,"rotation_deg":0,"seed":1})"
                   << "\n";
  EXPECT_THROW(read_manifest(p.string()), FormatError);
  std::ofstream(p) << "{not json\n";
  EXPECT_THROW(read_manifest(p.string()), FormatError);
}

TEST(DatasetConfig, FromConfigText) {
  const auto c = Config::parse_string(
      "# desk benchmark\nbase_sizes = 64, 128\ntrain_per_class = 7  # small\nrotation = on\nseed = 9\n");
  const auto d = DatasetConfig::from_config(c);
  EXPECT_EQ(d.base_sizes, (std::vector<std::size_t>{64, 128}));
  EXPECT_EQ(d.train_per_class, 7u);
  EXPECT_TRUE(d.rotation);
  EXPECT_EQ(d.master_seed, 9u);
  EXPECT_THROW(DatasetConfig::from_config(Config::parse_string("qf2 = 80")), DomainError);
  EXPECT_THROW(DatasetConfig::from_config(Config::parse_string("train_per_class = x")), FormatError);
  EXPECT_THROW(Config::parse_string("no equals sign"), FormatError);
}
