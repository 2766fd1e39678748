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

// Majority-vote ensembles with one linear model per training subset. Each
// member picks its feature map from a hyperparameter grid by balanced
// accuracy on its own subset.

#ifndef EFMKIT_ENSEMBLE_H_
#define EFMKIT_ENSEMBLE_H_

#include <optional>
#include <span>
#include <vector>

#include "efmkit/feature_map.h"
#include "efmkit/linear_model.h"
#include "efmkit/metrics.h"
#include "json.hpp"

namespace efmkit {

// Resolution of an exact vote tie.
enum class TieRule { kPositive, kNegative };

// Candidate feature maps; std::nullopt stands for the input space.
using HyperGrid = std::vector<std::optional<FeatureMapSpec>>;

HyperGrid PolynomialOffsetGrid(int d, int m, const std::vector<double>& offsets);
HyperGrid GaussianSigmaGrid(int d, int m, const std::vector<double>& sigmas);

// b in {1, ..., 7}.
std::vector<double> DefaultPolynomialOffsets();
// sigma in {4, 2 sqrt(2), 2, sqrt(2), 1, 1/sqrt(2), 1/2, sqrt(2)/4}.
std::vector<double> DefaultGaussianSigmas();

struct MemberSelection {
  LinearModel model;
  std::size_t grid_index = 0;
  double bacc = 0.0;
  std::vector<double> candidate_bacc;
  // The subset held a single class; the absent-class rate counted as 0.
  bool degenerate = false;
};

// Confusion counts of model over every batch of the stream.
ConfusionCounts EvaluateStream(const LinearModel& model,
                               const BatchStream& stream);

// Trains one model per candidate and keeps the one with the highest BACC on
// the subset; earlier candidates win ties.
MemberSelection SelectMember(const BatchStream& subset, Loss loss,
                             int input_dim, const HyperGrid& grid,
                             const TrainConfig& config);

struct Ensemble {
  std::vector<LinearModel> members;
  TieRule tie_rule = TieRule::kPositive;

  int input_dim() const;
  std::vector<std::optional<FeatureMapSpec>> member_specs() const;
  void Validate() const;
};

Ensemble TrainEnsemble(const std::vector<BatchStream>& subsets, Loss loss,
                       int input_dim, const HyperGrid& grid,
                       const TrainConfig& config,
                       TieRule tie_rule = TieRule::kPositive,
                       std::vector<MemberSelection>* selections = nullptr);

// Majority vote of member labels.
int Vote(const Ensemble& ensemble, std::span<const double> x);
std::vector<int> VoteBatch(const Ensemble& ensemble, const Matrix& input_rows);
// Resolves a vote given the number of positive votes out of total.
int ResolveVote(std::size_t positive, std::size_t total, TieRule tie_rule);

nlohmann::json ToJson(const Ensemble& ensemble);
Ensemble EnsembleFromJson(const nlohmann::json& j);

}  // namespace efmkit

#endif  // EFMKIT_ENSEMBLE_H_
