/*
 * Copyright 2026 The efmkit Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Micro-aggregated binary confusion counts, the derived segmentation metrics
// and the two-sample t-test used to compare runs.

#ifndef EFMKIT_METRICS_H_
#define EFMKIT_METRICS_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace efmkit {

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + fp + tn + fn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o);
  bool operator==(const ConfusionCounts&) const = default;
};

// Adds the tallies of predicted vs truth (positive class = 1) to counts.
ConfusionCounts Accumulate(ConfusionCounts counts,
                           std::span<const int> predicted,
                           std::span<const int> truth);

// Bit set of ratios whose denominator was zero (reported as 0).
enum DegenerateFlag : unsigned {
  kDegenerateSe = 1u << 0,
  kDegenerateSp = 1u << 1,
  kDegenerateF1 = 1u << 2,
  kDegeneratePpv = 1u << 3,
};

struct MetricReport {
  double se = 0.0;
  double sp = 0.0;
  double f1 = 0.0;
  double ppv = 0.0;
  double bacc = 0.0;  // Always (se + sp) / 2.
  unsigned degenerate = 0;
};

MetricReport Metrics(const ConfusionCounts& counts);

nlohmann::json ToJson(const MetricReport& report);
nlohmann::json ToJson(const ConfusionCounts& counts);

// Fixed column order used in reports.
inline constexpr const char* kMetricCsvHeader = "model,se,sp,bacc,f1,ppv";
std::string MetricCsvRow(const std::string& model, const MetricReport& report);

enum class TTestKind { kPooled, kWelch };

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  double df = 0.0;
  bool reject = false;
};

// Two-sided two-sample t-test. Throws kSampleSize when a sample has fewer
// than two values.
TTestResult TTest2(std::span<const double> a, std::span<const double> b,
                   double alpha = 0.05, TTestKind kind = TTestKind::kPooled);

// P(T <= t) for Student's t with df degrees of freedom.
double StudentTCdf(double t, double df);

}  // namespace efmkit

#endif  // EFMKIT_METRICS_H_
