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

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ipool/error.hpp"

namespace ipool::bench {

inline constexpr std::size_t kClasses = 5;
inline constexpr std::array<const char*, kClasses> kFactorLabels = {"0.6", "0.8", "1", "1.2", "1.4"};

struct TracePoint {
  std::size_t iteration = 0;
  double holdout_acc = 0.0;
  bool operator==(const TracePoint&) const = default;
};

/// Classification outcome over a balanced test set. Accuracies are
/// fractions in [0, 1].
struct Metrics {
  std::string method;
  std::array<double, kClasses> per_class{};
  double average = 0.0;
  /// confusion[true][predicted]
  std::array<std::array<std::size_t, kClasses>, kClasses> confusion{};
  std::array<std::size_t, kClasses> class_counts{};
  std::vector<TracePoint> trace;

  void add(std::size_t truth, std::size_t predicted) {
    ++confusion.at(truth).at(predicted);
    ++class_counts[truth];
  }

  /// Recomputes per-class and average accuracy from the confusion matrix.
  void finalize() {
    double sum = 0;
    for (std::size_t c = 0; c < kClasses; ++c) {
      per_class[c] = class_counts[c] ? static_cast<double>(confusion[c][c]) /
                                           static_cast<double>(class_counts[c])
                                     : 0.0;
      sum += per_class[c];
    }
    average = sum / kClasses;
  }

  std::size_t total() const {
    std::size_t n = 0;
    for (auto c : class_counts) n += c;
    return n;
  }
};

/// Mean accuracies over several runs evaluated on the same test set.
/// Confusion counts are summed.
inline Metrics mean_metrics(const std::vector<Metrics>& runs, const std::string& method) {
  if (runs.empty()) throw DomainError("mean_metrics needs at least one run");
  Metrics m;
  m.method = method;
  m.class_counts = runs.front().class_counts;
  for (const auto& r : runs) {
    if (r.class_counts != m.class_counts)
      throw DomainError("runs were evaluated on test sets with different class counts");
    for (std::size_t c = 0; c < kClasses; ++c) {
      m.per_class[c] += r.per_class[c] / static_cast<double>(runs.size());
      for (std::size_t p = 0; p < kClasses; ++p) m.confusion[c][p] += r.confusion[c][p];
    }
    m.average += r.average / static_cast<double>(runs.size());
  }
  return m;
}

/// One row of the report: method name and percentages, with the sample
/// counts that produced them when known.
struct ReportRow {
  std::string method;
  std::array<double, kClasses> percent{};
  double avg = 0.0;
  std::optional<std::array<std::size_t, kClasses>> counts;

  static ReportRow from(const Metrics& m) {
    ReportRow r{m.method, {}, m.average * 100.0, m.class_counts};
    for (std::size_t c = 0; c < kClasses; ++c) r.percent[c] = m.per_class[c] * 100.0;
    return r;
  }
};

/// Full-scale reference accuracies, shown next to desk-scale results.
inline std::vector<ReportRow> reference_rows() {
  return {
      {"IPN (reference)", {98.6, 97.1, 98.4, 94.3, 94.8}, 96.6, std::nullopt},
      {"BN (reference)", {98.4, 99.0, 98.0, 98.8, 99.5}, 98.7, std::nullopt},
      {"MPN (reference)", {78.3, 48.0, 93.7, 52.3, 91.1}, 72.7, std::nullopt},
  };
}

/// Four significant digits; the table and the CSV share this text.
inline std::string format_pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%#.4g", v);
  return buf;
}

inline void check_rows(const std::vector<ReportRow>& rows) {
  if (rows.empty()) throw DomainError("report needs at least one row");
  const std::array<std::size_t, kClasses>* first = nullptr;
  for (const auto& r : rows) {
    if (!r.counts) continue;
    if (first && *first != *r.counts)
      throw DomainError("report rows come from test sets with different class counts");
    first = &*r.counts;
  }
}

inline std::string csv_header() { return "method,f0.6,f0.8,f1.0,f1.2,f1.4,avg"; }

inline std::string render_csv(const std::vector<ReportRow>& rows) {
  check_rows(rows);
  std::string out = csv_header() + "\n";
  for (const auto& r : rows) {
    out += r.method;
    for (double p : r.percent) out += "," + format_pct(p);
    out += "," + format_pct(r.avg) + "\n";
  }
  return out;
}

inline std::string render_table(const std::vector<ReportRow>& rows) {
  check_rows(rows);
  std::size_t name_w = 6;
  for (const auto& r : rows) name_w = std::max(name_w, r.method.size());
  auto cell = [](const std::string& s) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%8s", s.c_str());
    return std::string(buf);
  };
  std::string out = std::string(name_w, ' ') + "  Resampling factors" + "\n";
  out += "Method" + std::string(name_w - 6, ' ') + " ";
  for (const char* f : kFactorLabels) out += cell(f);
  out += cell("Avg") + "\n";
  out += std::string(name_w + 1 + 8 * (kClasses + 1), '-') + "\n";
  for (const auto& r : rows) {
    out += r.method + std::string(name_w - r.method.size(), ' ') + " ";
    for (double p : r.percent) out += cell(format_pct(p));
    out += cell(format_pct(r.avg)) + "\n";
  }
  return out;
}

/// Parses a metrics CSV written by render_csv.
inline std::vector<ReportRow> parse_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != csv_header())
    throw FormatError("metrics CSV must start with " + csv_header());
  std::vector<ReportRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> f;
    while (std::getline(ss, field, ',')) f.push_back(field);
    if (f.size() != kClasses + 2) throw FormatError("metrics CSV row has wrong arity: " + line);
    ReportRow r;
    r.method = f[0];
    try {
      for (std::size_t c = 0; c < kClasses; ++c) r.percent[c] = std::stod(f[c + 1]);
      r.avg = std::stod(f[kClasses + 1]);
    } catch (const std::exception&) {
      throw FormatError("metrics CSV row is not numeric: " + line);
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::string render_trace_csv(const std::vector<TracePoint>& trace) {
  std::string out = "iteration,holdout_acc\n";
  char buf[64];
  for (const auto& t : trace) {
    std::snprintf(buf, sizeof buf, "%zu,%.6f\n", t.iteration, t.holdout_acc);
    out += buf;
  }
  return out;
}

}  // namespace ipool::bench
