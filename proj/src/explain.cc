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

#include "efmkit/explain.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "efmkit/error.h"

namespace efmkit {
namespace {

void CheckWidth(std::size_t expected, std::size_t got, const char* what) {
  if (expected != got) {
    throw Error(ErrorCode::kShape, std::string(what) + " has width " +
                                       std::to_string(got) + ", expected " +
                                       std::to_string(expected));
  }
}

void CheckBackground(const Background& background, std::size_t width) {
  if (background.rows.rows() < 1) {
    throw Error(ErrorCode::kNoData, "background needs at least one row");
  }
  CheckWidth(width, static_cast<std::size_t>(background.rows.cols()),
             "background");
  if (!background.feature_names.empty()) {
    CheckWidth(width, background.feature_names.size(), "feature name list");
  }
}

double LinearValue(const FeatureSpaceLinear& f, std::span<const double> x) {
  double s = f.bias;
  for (std::size_t j = 0; j < x.size(); ++j) s += f.weights[j] * x[j];
  return s;
}

}  // namespace

std::vector<std::string> ExplanationFeatureNames(
    const LinearModel& model, const std::vector<std::string>& input_names) {
  if (model.map_spec) return FeatureMap(*model.map_spec).FeatureNames(input_names);
  CheckWidth(model.width(), input_names.size(), "input name list");
  return input_names;
}

ShapleyExplanation ShapleyLinearMarginal(const FeatureSpaceLinear& f,
                                         std::span<const double> x,
                                         const Background& background) {
  const auto width = static_cast<std::size_t>(f.weights.size());
  CheckWidth(width, x.size(), "explained row");
  CheckBackground(background, width);
  const Vector mean = background.rows.colwise().mean().transpose();
  ShapleyExplanation e;
  e.feature_names = background.feature_names;
  e.contributions.resize(static_cast<Eigen::Index>(width));
  for (std::size_t j = 0; j < width; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    e.contributions[jj] = f.weights[jj] * (x[j] - mean[jj]);
  }
  // Mean of f over the background; f is linear so this is f(mean).
  e.a0 = f.weights.dot(mean) + f.bias;
  e.prediction = LinearValue(f, x);
  return e;
}

ShapleyExplanation ShapleyLinearMarginal(const LinearModel& model,
                                         std::span<const double> x,
                                         const Background& background) {
  return ShapleyLinearMarginal(EffectiveLinear(model), x, background);
}

ConditionalExplainer::ConditionalExplainer(FeatureSpaceLinear f,
                                           Background background,
                                           ConditionalConfig config)
    : f_(std::move(f)),
      background_(std::move(background)),
      config_(config),
      width_(static_cast<std::size_t>(f_.weights.size())) {
  CheckBackground(background_, width_);
  if (width_ > config_.max_exact_features || width_ > 30) {
    throw Error(ErrorCode::kCapacity,
                "exact coalition enumeration supports at most " +
                    std::to_string(config_.max_exact_features) +
                    " features, got " + std::to_string(width_) +
                    "; use the marginal explainer");
  }
  if (config_.neighbors < 1) {
    throw Error(ErrorCode::kParameter, "neighbors must be >= 1");
  }
  const Matrix& rows = background_.rows;
  const Eigen::Index m = rows.rows();
  inv_scale_.resize(static_cast<Eigen::Index>(width_));
  for (Eigen::Index j = 0; j < rows.cols(); ++j) {
    const double mean = rows.col(j).mean();
    const double sd =
        std::sqrt((rows.col(j).array() - mean).square().sum() / m);
    inv_scale_[j] = sd > 0.0 ? 1.0 / sd : 1.0;
  }

  // Per-coordinate squared standardized differences for the bandwidth pairs.
  const Eigen::Index sub =
      std::min<Eigen::Index>(m, static_cast<Eigen::Index>(config_.bandwidth_rows));
  std::vector<std::vector<double>> pair_sq;
  for (Eigen::Index a = 0; a < sub; ++a) {
    for (Eigen::Index b = a + 1; b < sub; ++b) {
      std::vector<double> sq(width_);
      for (std::size_t j = 0; j < width_; ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        const double diff = (rows(a, jj) - rows(b, jj)) * inv_scale_[jj];
        sq[j] = diff * diff;
      }
      pair_sq.push_back(std::move(sq));
    }
  }
  const std::uint32_t full = (1u << width_) - 1u;
  bandwidth_.assign(static_cast<std::size_t>(full) + 1, 1.0);
  std::vector<double> dist(pair_sq.size());
  for (std::uint32_t mask = 1; mask <= full; ++mask) {
    if (pair_sq.empty()) break;
    for (std::size_t p = 0; p < pair_sq.size(); ++p) {
      double s = 0.0;
      for (std::size_t j = 0; j < width_; ++j) {
        if (mask & (1u << j)) s += pair_sq[p][j];
      }
      dist[p] = std::sqrt(s);
    }
    auto mid = dist.begin() + static_cast<long>(dist.size() / 2);
    std::nth_element(dist.begin(), mid, dist.end());
    // Constant background on S: fall back to unit bandwidth in standardized
    // coordinates.
    bandwidth_[mask] = *mid > 0.0 ? *mid : 1.0;
  }
}

double ConditionalExplainer::CoalitionValue(std::span<const double> x,
                                            std::uint32_t mask) const {
  CheckWidth(width_, x.size(), "explained row");
  const std::uint32_t full = (1u << width_) - 1u;
  if (mask == full) return LinearValue(f_, x);
  const Matrix& rows = background_.rows;
  const auto m = static_cast<std::size_t>(rows.rows());

  // f(z_i) = sum_{j in S} w_j x_j + sum_{j not in S} w_j bg_ij + w0.
  double fixed = f_.bias;
  for (std::size_t j = 0; j < width_; ++j) {
    if (mask & (1u << j)) fixed += f_.weights[static_cast<Eigen::Index>(j)] * x[j];
  }
  auto value_of_row = [&](std::size_t i) {
    double s = fixed;
    for (std::size_t j = 0; j < width_; ++j) {
      if (!(mask & (1u << j))) {
        const auto jj = static_cast<Eigen::Index>(j);
        s += f_.weights[jj] * rows(static_cast<Eigen::Index>(i), jj);
      }
    }
    return s;
  };

  if (mask == 0) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += value_of_row(i);
    return s / static_cast<double>(m);
  }

  std::vector<std::pair<double, std::size_t>> cand(m);
  for (std::size_t i = 0; i < m; ++i) {
    double sq = 0.0;
    for (std::size_t j = 0; j < width_; ++j) {
      if (mask & (1u << j)) {
        const auto jj = static_cast<Eigen::Index>(j);
        const double diff =
            (rows(static_cast<Eigen::Index>(i), jj) - x[j]) * inv_scale_[jj];
        sq += diff * diff;
      }
    }
    cand[i] = {sq, i};
  }
  const std::size_t k = std::min(config_.neighbors, m);
  if (k < m) {
    std::partial_sort(cand.begin(), cand.begin() + static_cast<long>(k),
                      cand.end());
  }
  const double h = bandwidth_[mask];
  const double denom = 2.0 * h * h;
  double num = 0.0;
  double wsum = 0.0;
  for (std::size_t e = 0; e < k; ++e) {
    const double w = std::exp(-cand[e].first / denom);
    num += w * value_of_row(cand[e].second);
    wsum += w;
  }
  if (!(wsum > 0.0)) {
    // Every kernel weight underflowed: plain mean over the neighbors.
    num = 0.0;
    for (std::size_t e = 0; e < k; ++e) num += value_of_row(cand[e].second);
    return num / static_cast<double>(k);
  }
  return num / wsum;
}

ShapleyExplanation ConditionalExplainer::Explain(std::span<const double> x) const {
  CheckWidth(width_, x.size(), "explained row");
  const std::uint32_t count = 1u << width_;
  std::vector<double> v(count);
  ParallelFor(count, [&](std::size_t begin, std::size_t end) {
    for (std::size_t mask = begin; mask < end; ++mask) {
      v[mask] = CoalitionValue(x, static_cast<std::uint32_t>(mask));
    }
  }, 64);
  // weight[s] = s! (D - s - 1)! / D!
  std::vector<double> weight(width_);
  for (std::size_t s = 0; s < width_; ++s) {
    weight[s] = std::exp(std::lgamma(s + 1.0) + std::lgamma(width_ - s + 0.0) -
                         std::lgamma(width_ + 1.0));
  }
  ShapleyExplanation e;
  e.feature_names = background_.feature_names;
  e.contributions = Vector::Zero(static_cast<Eigen::Index>(width_));
  for (std::size_t j = 0; j < width_; ++j) {
    const std::uint32_t bit = 1u << j;
    double phi = 0.0;
    for (std::uint32_t mask = 0; mask < count; ++mask) {
      if (mask & bit) continue;
      phi += weight[static_cast<std::size_t>(std::popcount(mask))] *
             (v[mask | bit] - v[mask]);
    }
    e.contributions[static_cast<Eigen::Index>(j)] = phi;
  }
  e.a0 = v[0];
  e.prediction = v[count - 1];
  return e;
}

ShapleyExplanation ShapleyEmpiricalConditional(const LinearModel& model,
                                               std::span<const double> x,
                                               const Background& background,
                                               const ConditionalConfig& config) {
  return ConditionalExplainer(EffectiveLinear(model), background, config)
      .Explain(x);
}

double Efficiency(const ShapleyExplanation& explanation) {
  return explanation.contributions.sum();
}

Vector AverageContributions(const std::vector<ShapleyExplanation>& explanations) {
  if (explanations.empty()) {
    throw Error(ErrorCode::kNoData, "no explanations to average");
  }
  const Eigen::Index width = explanations.front().contributions.size();
  Vector sum = Vector::Zero(width);
  for (const auto& e : explanations) {
    if (e.contributions.size() != width) {
      throw Error(ErrorCode::kShape, "explanations differ in width");
    }
    sum += e.contributions;
  }
  return sum / static_cast<double>(explanations.size());
}

nlohmann::json ToJson(const ShapleyExplanation& e) {
  return {{"feature_names", e.feature_names},
          {"a0", e.a0},
          {"contributions", std::vector<double>(e.contributions.data(),
                                                e.contributions.data() +
                                                    e.contributions.size())},
          {"prediction", e.prediction},
          {"efficiency", Efficiency(e)}};
}

std::string ExplanationCsvHeader(const std::vector<std::string>& feature_names) {
  std::string header = "index,prediction,a0,efficiency";
  for (const auto& n : feature_names) header += "," + n;
  return header;
}

std::string ExplanationCsvRow(std::size_t index, const ShapleyExplanation& e) {
  char buf[64];
  std::string row = std::to_string(index);
  auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), ",%.17g", v);
    row += buf;
  };
  put(e.prediction);
  put(e.a0);
  put(Efficiency(e));
  for (Eigen::Index j = 0; j < e.contributions.size(); ++j) put(e.contributions[j]);
  return row;
}

}  // namespace efmkit
