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
#include <map>
#include <sstream>

#include "gtest/gtest.h"
#include "ipool/bench/bench.hpp"
#include "ipool/bench/metrics.hpp"
#include "ipool/bench/train.hpp"

using namespace ipool;
using namespace ipool::bench;

namespace {

TrainConfig tiny_config(net::NetKind kind) {
  TrainConfig c;
  c.kind = kind;
  c.widths = {4, 8, 8, 8};
  c.batch = 4;
  c.iterations = 20;
  c.eval_every = 0;
  return c;
}

// Random patches whose routing is consistent with the desk-scale layout.
std::vector<Sample> random_samples(net::NetKind kind, std::size_t per_cell, std::uint64_t seed) {
  const auto routing = net::Routing::scaled(8);
  Rng rng(seed);
  std::vector<Sample> out;
  for (std::size_t base : {64u, 128u, 256u})
    for (std::size_t label = 0; label < kClasses; ++label)
      for (std::size_t i = 0; i < per_cell; ++i) {
        const std::size_t side = routing.patch_size(base, kind);
        Tensor t({1, 1, side, side});
        for (auto& v : t.storage()) v = static_cast<float>(rng.normal());
        out.push_back({std::move(t), label, base});
      }
  return out;
}

bool same_parameters(net::Network& a, net::Network& b) {
  auto pa = a.parameters(), pb = b.parameters();
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i)
    if (*pa[i].value != *pb[i].value) return false;
  return true;
}

}  // namespace

TEST(Train, ZeroLearningRateLeavesParametersUntouched) {
  for (auto kind : {net::NetKind::IPN, net::NetKind::MPN, net::NetKind::BN}) {
    TrainConfig cfg = tiny_config(kind);
    cfg.lr = 0.f;
    auto r = train(cfg, random_samples(kind, 1, 1));
    net::Network fresh(cfg.network_spec(), cfg.seed, {cfg.residual_scale});
    EXPECT_TRUE(same_parameters(r.network, fresh)) << net::to_string(kind);
  }
}

TEST(Train, ClippedStepIsBoundedByLrTimesClipNorm) {
  TrainConfig cfg = tiny_config(net::NetKind::MPN);
  cfg.iterations = 1;
  cfg.lr = 1.f;
  cfg.momentum = 0.f;
  cfg.clip_norm = 1e-3f;
  auto r = train(cfg, random_samples(cfg.kind, 1, 3));
  ASSERT_EQ(r.grad_norms.size(), 1u);
  EXPECT_GT(r.grad_norms[0], cfg.clip_norm);
  net::Network fresh(cfg.network_spec(), cfg.seed, {cfg.residual_scale});
  auto pa = r.network.parameters(), pb = fresh.parameters();
  double sq = 0;
  for (std::size_t i = 0; i < pa.size(); ++i)
    for (std::size_t j = 0; j < pa[i].value->size(); ++j) {
      const double d = double((*pa[i].value)[j]) - double((*pb[i].value)[j]);
      sq += d * d;
    }
  EXPECT_NEAR(std::sqrt(sq), 1e-3, 1e-5);
}

TEST(Train, GradientNormsMatchUnclippedRun) {
  TrainConfig cfg = tiny_config(net::NetKind::IPN);
  cfg.iterations = 1;
  const auto samples = random_samples(cfg.kind, 1, 4);
  const auto a = train(cfg, samples);
  cfg.clip_norm = 1e-6f;
  const auto b = train(cfg, samples);
  EXPECT_EQ(a.grad_norms, b.grad_norms);
}

TEST(Train, NonFiniteInputAborts) {
  TrainConfig cfg = tiny_config(net::NetKind::MPN);
  auto samples = random_samples(cfg.kind, 1, 5);
  for (auto& s : samples) s.patch.storage()[0] = std::nanf("");
  EXPECT_THROW(train(cfg, samples), NonFiniteError);
}

TEST(Train, MemorizesSingleSample) {
  for (auto kind : {net::NetKind::IPN, net::NetKind::MPN, net::NetKind::BN}) {
    TrainConfig cfg = tiny_config(kind);
    cfg.iterations = 200;
    auto samples = random_samples(kind, 1, 2);
    samples.resize(1);
    auto r = train(cfg, samples);
    EXPECT_LT(r.losses.back(), 0.05f) << net::to_string(kind);
  }
}

TEST(Train, DeterministicGivenSeed) {
  TrainConfig cfg = tiny_config(net::NetKind::IPN);
  cfg.eval_every = 5;
  const auto tr = random_samples(net::NetKind::IPN, 2, 3);
  const auto te = random_samples(net::NetKind::IPN, 1, 4);
  auto a = train(cfg, tr, te), b = train(cfg, tr, te);
  EXPECT_EQ(a.trace, b.trace);
  EXPECT_EQ(a.trace.size(), 4u);
  EXPECT_EQ(a.losses, b.losses);
  EXPECT_TRUE(same_parameters(a.network, b.network));
  cfg.seed = 2;
  auto c = train(cfg, tr, te);
  EXPECT_NE(a.losses, c.losses);
}

TEST(Train, RejectsIncompatiblePatches) {
  // IPN-sized patches routed to a BN network
  EXPECT_THROW(train(tiny_config(net::NetKind::BN), random_samples(net::NetKind::IPN, 1, 5)),
               DomainError);
  std::vector<Sample> odd = {{Tensor({1, 1, 24, 24}), 0, 64}};
  EXPECT_THROW(train(tiny_config(net::NetKind::IPN), odd), DomainError);
  EXPECT_THROW(train(tiny_config(net::NetKind::IPN), {}), DomainError);
  TrainConfig bad = tiny_config(net::NetKind::IPN);
  bad.batch = 0;
  EXPECT_THROW(bad.validate(), DomainError);
}

TEST(Scheduler, EveryCellEquallyOftenPerEpoch) {
  const auto samples = random_samples(net::NetKind::IPN, 4, 6);  // 20 per bucket
  const auto spec = tiny_config(net::NetKind::IPN).network_spec();
  const auto buckets = make_buckets(samples, spec, net::Routing::scaled(8));
  ASSERT_EQ(buckets.size(), 3u);
  BucketScheduler s(buckets, 9);
  std::map<std::size_t, int> draws;
  std::vector<std::size_t> idx;
  for (int it = 0; it < 3 * 5 * 3; ++it) {  // three epochs of batch 4 over 20 members
    const std::size_t b = s.next(4, idx);
    EXPECT_EQ(b, static_cast<std::size_t>(it % 3));
    for (auto i : idx) {
      EXPECT_EQ(samples[i].patch.h(), buckets[b].side);
      ++draws[i];
    }
  }
  ASSERT_EQ(draws.size(), samples.size());
  for (const auto& [i, n] : draws) EXPECT_EQ(n, 3);
}

TEST(Evaluate, UntrainedNetworkIsAtChance) {
  const auto te = random_samples(net::NetKind::IPN, 40, 7);  // 600 samples
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    TrainConfig cfg = tiny_config(net::NetKind::IPN);
    net::Network net(cfg.network_spec(), seed);
    const Metrics m = evaluate(net, te, cfg.routing());
    const double sigma = std::sqrt(0.2 * 0.8 / static_cast<double>(te.size()));
    EXPECT_NEAR(m.average, 0.2, 3 * sigma);
  }
}

TEST(Evaluate, ConfusionRowsMatchClassCounts) {
  const auto te = random_samples(net::NetKind::MPN, 3, 8);
  TrainConfig cfg = tiny_config(net::NetKind::MPN);
  net::Network net(cfg.network_spec(), 4);
  const Metrics m = evaluate(net, te, cfg.routing());
  double mean = 0;
  for (std::size_t c = 0; c < kClasses; ++c) {
    std::size_t row = 0;
    for (auto v : m.confusion[c]) row += v;
    EXPECT_EQ(row, m.class_counts[c]);
    EXPECT_EQ(m.class_counts[c], 9u);
    mean += m.per_class[c] / kClasses;
  }
  EXPECT_DOUBLE_EQ(m.average, mean);
  EXPECT_EQ(m.total(), te.size());
  EXPECT_THROW(evaluate(net, {}, cfg.routing()), DomainError);
}

TEST(Evaluate, MemorizedCheckpointScoresPerfectly) {
  auto tr = random_samples(net::NetKind::IPN, 1, 9);
  tr.resize(10);  // ten records, two per class, all from the smallest size
  TrainConfig cfg = tiny_config(net::NetKind::IPN);
  cfg.widths = {8, 8, 16, 16};
  cfg.iterations = 300;
  cfg.batch = 10;
  auto r = train(cfg, tr);
  const auto path = std::filesystem::temp_directory_path() / "ipool_bench_memo.ckpt";
  net::save_checkpoint(r.network, path.string());
  auto back = net::load_checkpoint(path.string(), cfg.network_spec());
  std::filesystem::remove(path);
  EXPECT_DOUBLE_EQ(evaluate(back, tr, cfg.routing()).average, 1.0);
}

TEST(Report, PerfectRowAndReferenceRows) {
  Metrics m;
  m.method = "IPN";
  for (std::size_t c = 0; c < kClasses; ++c) {
    m.add(c, c);
    m.add(c, c);
  }
  m.finalize();
  const std::string csv = render_csv({ReportRow::from(m)});
  EXPECT_EQ(csv, "method,f0.6,f0.8,f1.0,f1.2,f1.4,avg\nIPN,100.0,100.0,100.0,100.0,100.0,100.0\n");
  const auto refs = reference_rows();
  EXPECT_EQ(format_pct(refs[0].avg), "96.60");
  EXPECT_EQ(format_pct(refs[0].percent[1]), "97.10");
  for (const auto& r : refs) {
    double sum = 0;
    for (double p : r.percent) sum += p;
    EXPECT_NEAR(sum / kClasses, r.avg, 0.05) << r.method;
  }
}

TEST(Report, CsvMatchesTableText) {
  auto rows = reference_rows();
  const std::string table = render_table(rows), csv = render_csv(rows);
  std::istringstream is(csv);
  const auto parsed = parse_csv(is);
  ASSERT_EQ(parsed.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < kClasses; ++c) {
      EXPECT_NE(table.find(format_pct(parsed[i].percent[c])), std::string::npos);
      EXPECT_EQ(format_pct(parsed[i].percent[c]), format_pct(rows[i].percent[c]));
    }
    EXPECT_EQ(parsed[i].method, rows[i].method);
  }
  EXPECT_NE(table.find("Avg"), std::string::npos);
  EXPECT_NE(table.find("1.4"), std::string::npos);
}

TEST(Report, RejectsInconsistentRows) {
  ReportRow a{"IPN", {}, 0, std::array<std::size_t, kClasses>{2, 2, 2, 2, 2}};
  ReportRow b{"MPN", {}, 0, std::array<std::size_t, kClasses>{2, 2, 2, 2, 3}};
  EXPECT_THROW(render_csv({a, b}), DomainError);
  EXPECT_THROW(render_table({}), DomainError);
  std::istringstream bad("method,x\n");
  EXPECT_THROW(parse_csv(bad), FormatError);
}

TEST(Report, MeanOverSeeds) {
  Metrics a, b;
  for (std::size_t c = 0; c < kClasses; ++c) {
    a.add(c, c);
    b.add(c, (c + 1) % kClasses);
  }
  a.finalize();
  b.finalize();
  const Metrics m = mean_metrics({a, b}, "X");
  EXPECT_DOUBLE_EQ(m.average, 0.5);
  EXPECT_DOUBLE_EQ(m.per_class[3], 0.5);
  Metrics c = a;
  c.add(0, 0);
  c.finalize();
  EXPECT_THROW(mean_metrics({a, c}, "X"), DomainError);
}

TEST(Report, TraceCsv) {
  EXPECT_EQ(render_trace_csv({{100, 0.25}, {200, 0.5}}),
            "iteration,holdout_acc\n100,0.250000\n200,0.500000\n");
}

TEST(TrainConfigText, Parses) {
  const auto c = TrainConfig::from_config(Config::parse_string(
      "mode = bn\nwidths = 8, 16, 32, 64\nlr = 0.05\nbatch = 8\niterations = 10\n"));
  EXPECT_EQ(c.kind, net::NetKind::BN);
  EXPECT_EQ(c.widths, (std::vector<std::size_t>{8, 16, 32, 64}));
  EXPECT_FLOAT_EQ(c.lr, 0.05f);
  EXPECT_EQ(c.batch, 8u);
  EXPECT_THROW(TrainConfig::from_config(Config::parse_string("mode = cnn")), DomainError);
  EXPECT_THROW(TrainConfig::from_config(Config::parse_string("widths = 8, 16")), DomainError);
}

TEST(Bench, TinyPipelineEndToEnd) {
  const auto dir = std::filesystem::temp_directory_path() / "ipool_bench_tiny";
  std::filesystem::remove_all(dir);
  BenchOptions o;
  o.make_tiny();
  o.train.iterations = 6;
  o.seeds = {1};
  const auto r = run_bench(o, dir.string());
  ASSERT_EQ(r.rows.size(), 3u);
  EXPECT_EQ(r.runs.size(), 3u);
  EXPECT_TRUE(std::filesystem::exists(dir / "metrics.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "trace_ipn_s1.csv"));
  std::ifstream is(dir / "metrics.csv");
  const auto rows = parse_csv(is);
  EXPECT_EQ(rows[0].method, "IPN");
  EXPECT_EQ(rows[2].method, "BN");
  EXPECT_EQ(data::read_manifest((dir / "data_ipn" / "train.jsonl").string()).size() +
                data::read_manifest((dir / "data_ipn" / "test.jsonl").string()).size(),
            150u);
  std::filesystem::remove_all(dir);
}
