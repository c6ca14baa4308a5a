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


// ipool command-line front end.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "ipool/bench/bench.hpp"
#include "ipool/bench/metrics.hpp"
#include "ipool/bench/train.hpp"
#include "ipool/config.hpp"
#include "ipool/data/dataset.hpp"
#include "ipool/gradcheck_suite.hpp"
#include "ipool/net/checkpoint.hpp"

namespace {

using namespace ipool;
namespace fs = std::filesystem;

Config load_config(const std::string& path) { return path.empty() ? Config{} : Config::load(path); }

int cmd_gen(const std::string& config, const std::string& out, const std::string& mode,
            std::optional<std::uint64_t> seed) {
  auto dc = data::DatasetConfig::from_config(load_config(config));
  if (seed) dc.master_seed = *seed;
  const auto s = data::build_dataset(dc, net::parse_net_kind(mode), out);
  std::printf("wrote %zu train records to %s\nwrote %zu test records to %s\n", s.train_count,
              s.train_manifest.c_str(), s.test_count, s.test_manifest.c_str());
  return 0;
}

int cmd_train(const std::string& config, const std::string& train_manifest,
              const std::string& test_manifest, const std::string& mode,
              std::optional<std::uint64_t> seed, const std::string& out) {
  auto cfg = bench::TrainConfig::from_config(load_config(config));
  if (!mode.empty()) cfg.kind = net::parse_net_kind(mode);
  if (seed) cfg.seed = *seed;
  const auto tr = bench::load_samples(train_manifest);
  const auto te = test_manifest.empty() ? std::vector<bench::Sample>{}
                                        : bench::load_samples(test_manifest);
  const std::size_t every = std::max<std::size_t>(1, cfg.iterations / 20);
  double running = 0, peak = 0;
  auto r = bench::train(cfg, tr, te, [&](const bench::Progress& p) {
    running += p.loss;
    peak = std::max(peak, static_cast<double>(p.grad_norm));
    if (p.iteration % every == 0) {
      std::printf("iter %6zu  loss %.4f  max grad norm %.3g\n", p.iteration,
                  running / static_cast<double>(every), peak);
      std::fflush(stdout);
      running = peak = 0;
    }
  });
  fs::create_directories(out);
  net::save_checkpoint(r.network, (fs::path(out) / "model.ckpt").string());
  std::ofstream(fs::path(out) / "trace.csv") << bench::render_trace_csv(r.trace);
  for (const auto& t : r.trace)
    std::printf("holdout @%zu: %s%%\n", t.iteration, bench::format_pct(t.holdout_acc * 100).c_str());
  std::printf("checkpoint written to %s\n", (fs::path(out) / "model.ckpt").c_str());
  return 0;
}

int cmd_eval(const std::string& config, const std::string& mode, const std::string& checkpoint,
             const std::string& manifest, const std::string& out) {
  auto cfg = bench::TrainConfig::from_config(load_config(config));
  if (!mode.empty()) cfg.kind = net::parse_net_kind(mode);
  auto network = net::load_checkpoint(checkpoint, cfg.network_spec());
  const auto m = bench::evaluate(network, bench::load_samples(manifest), cfg.routing());
  const std::vector<bench::ReportRow> rows = {bench::ReportRow::from(m)};
  std::cout << bench::render_table(rows);
  std::printf("\nconfusion (rows: true factor, columns: predicted)\n");
  for (std::size_t t = 0; t < bench::kClasses; ++t) {
    std::printf("%5s", bench::kFactorLabels[t]);
    for (auto n : m.confusion[t]) std::printf(" %6zu", n);
    std::printf("\n");
  }
  if (!out.empty()) std::ofstream(out) << bench::render_csv(rows);
  return 0;
}

int cmd_gradcheck() {
  GradCheckOptions o;
  bool ok = true;
  for (const auto& c : run_gradcheck_suite(o)) {
    const bool pass = c.max_rel_err <= o.tolerance;
    ok = ok && pass;
    std::printf("%-4s %-40s max rel err %.3e over %zu coords\n", pass ? "ok" : "FAIL",
                c.name.c_str(), c.max_rel_err, c.coords);
  }
  std::printf(ok ? "all gradient checks passed\n" : "gradient check FAILED\n");
  return ok ? 0 : 1;
}

int cmd_report(const std::string& in, bool reference, const std::string& out) {
  fs::path p(in);
  if (fs::is_directory(p)) p /= "metrics.csv";
  std::ifstream is(p);
  if (!is) throw Error("cannot open " + p.string());
  auto rows = bench::parse_csv(is);
  if (reference)
    for (auto& r : bench::reference_rows()) rows.push_back(r);
  std::cout << bench::render_table(rows);
  if (!out.empty()) std::ofstream(out) << bench::render_csv(rows);
  return 0;
}

int cmd_bench(const std::string& config, const std::string& out, std::optional<std::uint64_t> seed,
              bool tiny) {
  auto o = bench::BenchOptions::from_config(load_config(config));
  if (tiny) o.make_tiny();
  if (seed) o.data.master_seed = *seed;
  const auto r = bench::run_bench(o, out, [](const std::string& s) {
    std::printf("%s\n", s.c_str());
    std::fflush(stdout);
  });
  std::vector<bench::ReportRow> rows = r.rows;
  for (auto& ref : bench::reference_rows()) rows.push_back(ref);
  std::cout << "\n" << bench::render_table(rows);
  std::printf("\nmetrics written to %s (%.0f s)\n", (fs::path(out) / "metrics.csv").c_str(),
              r.seconds);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Iterative pooling networks for resampling-factor classification"};
  app.require_subcommand(1);

  std::string config, out, mode, train_manifest, test_manifest, checkpoint, manifest, in;
  std::optional<std::uint64_t> seed;
  bool tiny = false, reference = false;

  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  gen->add_option("--config", config, "key = value configuration file");
  gen->add_option("--out", out, "output directory")->required();
  gen->add_option("--mode", mode = "ipn", "patch layout: ipn, mpn or bn");
  gen->add_option("--seed", seed, "master seed");

  auto* tr = app.add_subcommand("train", "train one network");
  tr->add_option("--config", config, "key = value configuration file");
  tr->add_option("--train", train_manifest, "training manifest")->required();
  tr->add_option("--test", test_manifest, "held-out manifest for the convergence trace");
  tr->add_option("--mode", mode, "network kind: ipn, mpn or bn");
  tr->add_option("--seed", seed, "initialization and shuffling seed");
  tr->add_option("--out", out, "output directory")->required();

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  ev->add_option("--config", config, "configuration used for training");
  ev->add_option("--mode", mode, "network kind: ipn, mpn or bn");
  ev->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  ev->add_option("--manifest", manifest, "test manifest")->required();
  ev->add_option("--out", out, "metrics CSV to write");

  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient suite");

  auto* rep = app.add_subcommand("report", "print a metrics table");
  rep->add_option("--in", in, "metrics CSV or bench output directory")->required();
  rep->add_flag("--reference", reference, "append the full-scale reference rows");
  rep->add_option("--out", out, "CSV to write");

  auto* be = app.add_subcommand("bench", "generate, train all methods, report");
  be->add_option("--config", config, "key = value configuration file");
  be->add_option("--out", out, "output directory")->required();
  be->add_option("--seed", seed, "dataset master seed");
  be->add_flag("--tiny", tiny, "150-record smoke run");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (gen->parsed()) return cmd_gen(config, out, mode, seed);
    if (tr->parsed()) return cmd_train(config, train_manifest, test_manifest, mode, seed, out);
    if (ev->parsed()) return cmd_eval(config, mode, checkpoint, manifest, out);
    if (gc->parsed()) return cmd_gradcheck();
    if (rep->parsed()) return cmd_report(in, reference, out);
    if (be->parsed()) return cmd_bench(config, out, seed, tiny);
  } catch (const ipool::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
