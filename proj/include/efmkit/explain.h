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

// Shapley additive explanations of linear decision functions.
//
// Explanations live in the explanation space: the feature space of the model
// (the monomials of its feature map, or the raw inputs for an input-space
// model). The decision value is linear there, with the standardizer folded
// into the weights, so f(z) = <w, z> + w0 exactly.

#ifndef EFMKIT_EXPLAIN_H_
#define EFMKIT_EXPLAIN_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "efmkit/linear_model.h"
#include "efmkit/types.h"
#include "json.hpp"

namespace efmkit {

struct ShapleyExplanation {
  double a0 = 0.0;  // Baseline, the expected decision value.
  Vector contributions;
  double prediction = 0.0;  // f(x*).
  std::vector<std::string> feature_names;
};

struct Background {
  Matrix rows;  // M x D reference data in explanation space.
  std::vector<std::string> feature_names;
};

// Feature names of the explanation space of model.
std::vector<std::string> ExplanationFeatureNames(
    const LinearModel& model, const std::vector<std::string>& input_names);

// Exact Shapley values under feature independence:
// a0 = mean f over the background, a_j = w_j (x_j - mean_j).
ShapleyExplanation ShapleyLinearMarginal(const FeatureSpaceLinear& f,
                                         std::span<const double> x,
                                         const Background& background);
ShapleyExplanation ShapleyLinearMarginal(const LinearModel& model,
                                         std::span<const double> x,
                                         const Background& background);

struct ConditionalConfig {
  std::size_t neighbors = 100;
  std::size_t max_exact_features = 15;
  // Background rows used to estimate the per-coalition bandwidth.
  std::size_t bandwidth_rows = 128;
};

// Shapley values with coalition values estimated from a kernel-weighted
// empirical conditional distribution of the background.
//
// For coalition S, background rows are ranked by their standardized distance
// to x on the S features; the `neighbors` closest get Gaussian weights with a
// bandwidth equal to the median pairwise background distance on S. v(S) is
// the weighted mean of f over those rows with their S features replaced by
// x's. v(empty) is the plain background mean and v(all) is f(x). Shapley
// values then follow by exact enumeration of all 2^D coalitions.
class ConditionalExplainer {
 public:
  ConditionalExplainer(FeatureSpaceLinear f, Background background,
                       ConditionalConfig config = {});

  std::size_t width() const { return width_; }

  // v(S), S given as a bit mask over the features.
  double CoalitionValue(std::span<const double> x, std::uint32_t mask) const;

  ShapleyExplanation Explain(std::span<const double> x) const;

 private:
  FeatureSpaceLinear f_;
  Background background_;
  ConditionalConfig config_;
  std::size_t width_ = 0;
  Vector inv_scale_;            // 1 / background sd (1 for constant features).
  std::vector<double> bandwidth_;  // Indexed by coalition mask.
};

ShapleyExplanation ShapleyEmpiricalConditional(const LinearModel& model,
                                               std::span<const double> x,
                                               const Background& background,
                                               const ConditionalConfig& config = {});

// sum_j a_j, equal to f(x*) - a0.
double Efficiency(const ShapleyExplanation& explanation);

// Per-feature mean contribution over the explanations.
Vector AverageContributions(const std::vector<ShapleyExplanation>& explanations);

nlohmann::json ToJson(const ShapleyExplanation& explanation);

// Header "index,prediction,a0,efficiency,<feature names>".
std::string ExplanationCsvHeader(const std::vector<std::string>& feature_names);
std::string ExplanationCsvRow(std::size_t index,
                              const ShapleyExplanation& explanation);

}  // namespace efmkit

#endif  // EFMKIT_EXPLAIN_H_
