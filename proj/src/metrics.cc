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

#include "efmkit/metrics.h"

#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "efmkit/error.h"

namespace efmkit {
namespace {

double Ratio(std::uint64_t num, std::uint64_t den, unsigned flag,
             unsigned& degenerate) {
  if (den == 0) {
    degenerate |= flag;
    return 0.0;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

struct Moments {
  double n;
  double mean;
  double var;  // Unbiased.
};

Moments SampleMoments(std::span<const double> v) {
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {n, mean, ss / (n - 1.0)};
}

}  // namespace

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) {
  tp += o.tp;
  fp += o.fp;
  tn += o.tn;
  fn += o.fn;
  return *this;
}

ConfusionCounts Accumulate(ConfusionCounts counts,
                           std::span<const int> predicted,
                           std::span<const int> truth) {
  if (predicted.size() != truth.size()) {
    throw Error(ErrorCode::kShape, "predicted has " +
                                       std::to_string(predicted.size()) +
                                       " labels, truth has " +
                                       std::to_string(truth.size()));
  }
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool p = predicted[i] != 0;
    const bool t = truth[i] != 0;
    if (p && t) {
      ++counts.tp;
    } else if (p) {
      ++counts.fp;
    } else if (t) {
      ++counts.fn;
    } else {
      ++counts.tn;
    }
  }
  return counts;
}

MetricReport Metrics(const ConfusionCounts& c) {
  MetricReport r;
  r.se = Ratio(c.tp, c.tp + c.fn, kDegenerateSe, r.degenerate);
  r.sp = Ratio(c.tn, c.tn + c.fp, kDegenerateSp, r.degenerate);
  r.f1 = Ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn, kDegenerateF1, r.degenerate);
  r.ppv = Ratio(c.tp, c.tp + c.fp, kDegeneratePpv, r.degenerate);
  r.bacc = (r.se + r.sp) / 2.0;
  return r;
}

nlohmann::json ToJson(const MetricReport& r) {
  nlohmann::json degenerate = nlohmann::json::array();
  if (r.degenerate & kDegenerateSe) degenerate.push_back("se");
  if (r.degenerate & kDegenerateSp) degenerate.push_back("sp");
  if (r.degenerate & kDegenerateF1) degenerate.push_back("f1");
  if (r.degenerate & kDegeneratePpv) degenerate.push_back("ppv");
  return {{"se", r.se},     {"sp", r.sp},   {"bacc", r.bacc},
          {"f1", r.f1},     {"ppv", r.ppv}, {"degenerate", degenerate}};
}

nlohmann::json ToJson(const ConfusionCounts& c) {
  return {{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}};
}

std::string MetricCsvRow(const std::string& model, const MetricReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f,%.6f,%.6f", r.se, r.sp,
                r.bacc, r.f1, r.ppv);
  return model + "," + buf;
}

double StudentTCdf(double t, double df) {
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  // P(|T| > |t|) = I_{df / (df + t^2)}(df / 2, 1 / 2).
  const double x = df / (df + t * t);
  const double tail = 0.5 * boost::math::ibeta(df / 2.0, 0.5, x);
  return t >= 0 ? 1.0 - tail : tail;
}

TTestResult TTest2(std::span<const double> a, std::span<const double> b,
                   double alpha, TTestKind kind) {
  if (a.size() < 2 || b.size() < 2) {
    throw Error(ErrorCode::kSampleSize,
                "each sample needs at least 2 values, got " +
                    std::to_string(a.size()) + " and " +
                    std::to_string(b.size()));
  }
  const Moments ma = SampleMoments(a);
  const Moments mb = SampleMoments(b);
  const double diff = ma.mean - mb.mean;
  TTestResult r;
  double se = 0.0;
  if (kind == TTestKind::kPooled) {
    r.df = ma.n + mb.n - 2.0;
    const double pooled =
        ((ma.n - 1.0) * ma.var + (mb.n - 1.0) * mb.var) / r.df;
    se = std::sqrt(pooled * (1.0 / ma.n + 1.0 / mb.n));
  } else {
    const double va = ma.var / ma.n;
    const double vb = mb.var / mb.n;
    se = std::sqrt(va + vb);
    const double denom = va * va / (ma.n - 1.0) + vb * vb / (mb.n - 1.0);
    r.df = denom > 0.0 ? (va + vb) * (va + vb) / denom : ma.n + mb.n - 2.0;
  }
  if (se == 0.0) {
    if (diff == 0.0) {
      r.t = 0.0;
      r.p = 1.0;
    } else {
      r.t = diff > 0 ? INFINITY : -INFINITY;
      r.p = 0.0;
    }
  } else {
    r.t = diff / se;
    r.p = 2.0 * StudentTCdf(-std::abs(r.t), r.df);
  }
  r.reject = r.p < alpha;
  return r;
}

}  // namespace efmkit
