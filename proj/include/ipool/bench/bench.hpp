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

// End-to-end benchmark: generate both patch layouts of one dataset, train
// every method under several seeds, evaluate, and tabulate.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "ipool/bench/metrics.hpp"
#include "ipool/bench/train.hpp"
#include "ipool/config.hpp"
#include "ipool/data/dataset.hpp"

namespace ipool::bench {

struct BenchOptions {
  data::DatasetConfig data;
  TrainConfig train;
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  std::vector<net::NetKind> methods = {net::NetKind::IPN, net::NetKind::MPN, net::NetKind::BN};

  /// Desk-scale defaults: 500 train and 100 test records per class and
  /// size, a narrow backbone and a 5000-iteration schedule at lr 0.005 with
  /// the gradient norm clipped to 5.
  static BenchOptions desk() {
    BenchOptions o;
    o.data.train_per_class = 500;
    o.data.test_per_class = 100;
    o.train.widths = {8, 16, 32, 64};
    o.train.lr = 0.005f;
    o.train.clip_norm = 5.0f;
    o.train.iterations = 5000;
    o.train.eval_every = 500;
    return o;
  }

  /// Keys absent from the file keep their desk() values.
  static BenchOptions from_config(const Config& c) {
    BenchOptions o = desk();
    Config merged;
    merged.set("train_per_class", std::to_string(o.data.train_per_class));
    merged.set("test_per_class", std::to_string(o.data.test_per_class));
    merged.set("widths", "8,16,32,64");
    merged.set("lr", "0.005");
    merged.set("clip_norm", "5");
    merged.set("iterations", std::to_string(o.train.iterations));
    merged.set("eval_every", std::to_string(o.train.eval_every));
    for (const auto& [k, v] : c.entries()) merged.set(k, v);
    o.data = data::DatasetConfig::from_config(merged);
    o.train = TrainConfig::from_config(merged);
    o.seeds = c.get_list<std::uint64_t>("train_seeds", o.seeds);
    if (o.seeds.empty()) throw DomainError("train_seeds must not be empty");
    return o;
  }

  /// A 150-record smoke configuration: 8 train and 2 test records per
  /// class and size, a short schedule and a narrow network.
  void make_tiny() {
    data.train_per_class = 8;
    data.test_per_class = 2;
    train.iterations = 30;
    train.eval_every = 10;
    train.widths = {4, 8, 8, 8};
    seeds = {1, 2, 3};
  }
};

struct BenchResult {
  std::vector<Metrics> runs;       // one per (method, seed)
  std::vector<ReportRow> rows;     // seed-averaged, one per method
  double seconds = 0.0;
};

using LogFn = std::function<void(const std::string&)>;

inline BenchResult run_bench(const BenchOptions& o, const std::string& out_dir,
                             const LogFn& log = {}) {
  namespace fs = std::filesystem;
  const auto t0 = std::chrono::steady_clock::now();
  auto say = [&](const std::string& s) {
    if (log) log(s);
  };
  const fs::path root(out_dir);
  if (o.data.routing_divisor != o.train.routing_divisor)
    throw DomainError("dataset and training routing_divisor differ");

  // IPN and MPN share one patch layout; BN gets its own
  say("generating dataset");
  const auto wide = data::build_dataset(o.data, net::NetKind::IPN, (root / "data_ipn").string());
  const auto narrow = data::build_dataset(o.data, net::NetKind::BN, (root / "data_bn").string());
  const auto wide_train = load_samples(wide.train_manifest);
  const auto wide_test = load_samples(wide.test_manifest);
  const auto narrow_train = load_samples(narrow.train_manifest);
  const auto narrow_test = load_samples(narrow.test_manifest);

  BenchResult result;
  for (auto kind : o.methods) {
    const bool bn = kind == net::NetKind::BN;
    const auto& tr = bn ? narrow_train : wide_train;
    const auto& te = bn ? narrow_test : wide_test;
    std::vector<Metrics> per_seed;
    for (auto seed : o.seeds) {
      TrainConfig cfg = o.train;
      cfg.kind = kind;
      cfg.seed = seed;
      auto r = train(cfg, tr, te);
      Metrics m = evaluate(r.network, te, cfg.routing());
      m.trace = r.trace;
      const std::string tag = std::string(net::to_string(kind)) + "_s" + std::to_string(seed);
      std::ofstream(root / ("trace_" + tag + ".csv")) << render_trace_csv(m.trace);
      net::save_checkpoint(r.network, (root / (tag + ".ckpt")).string());
      say(tag + " avg " + format_pct(m.average * 100.0) + "%");
      per_seed.push_back(m);
      result.runs.push_back(std::move(m));
    }
    result.rows.push_back(ReportRow::from(mean_metrics(per_seed, net::display_name(kind))));
  }
  std::ofstream(root / "metrics.csv") << render_csv(result.rows);
  result.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

}  // namespace ipool::bench
