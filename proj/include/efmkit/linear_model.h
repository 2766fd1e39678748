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

// Incremental linear classifiers (logistic and hinge losses) in input space
// or in the space induced by an explicit feature map.
//
// A model sees three spaces:
//   input space     x in R^d, what callers pass to Decision()/Predict();
//   feature space   phi(x) in R^D (identity when no map is attached);
//   model space     the standardized feature-space vector the weights act on.
// PartialFit() consumes feature-space rows, TrainStreaming() consumes
// input-space batches and maps them on the fly.

#ifndef EFMKIT_LINEAR_MODEL_H_
#define EFMKIT_LINEAR_MODEL_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "efmkit/feature_map.h"
#include "efmkit/types.h"
#include "json.hpp"

namespace efmkit {

enum class Loss { kLogistic, kHinge };

enum class Solver {
  // Per-coordinate steps divided by the root of the accumulated squared
  // gradients.
  kScaleInvariant,
  // base_rate / sqrt(1 + t) for every coordinate.
  kPlainSgd,
};

struct Standardizer {
  Vector means;
  Vector scales;  // Strictly positive.

  std::size_t size() const { return static_cast<std::size_t>(means.size()); }
  void ApplyInPlace(std::span<double> row) const;
  void InvertInPlace(std::span<double> row) const;
  Matrix Apply(const Matrix& rows) const;
  Matrix Invert(const Matrix& rows) const;
};

// Streaming per-feature mean and standard deviation (Welford, divisor n).
class StandardizerAccumulator {
 public:
  void Add(const Matrix& rows);
  std::size_t count() const { return count_; }
  // Zero-variance features get scale 1. Throws kNoData before any row.
  Standardizer Finish() const;

 private:
  std::size_t count_ = 0;
  Vector mean_;
  Vector m2_;
};

Standardizer FitStandardizer(const std::vector<Matrix>& batches);

struct TrainConfig {
  int epochs = 1;
  std::size_t batch_rows = 10000;
  double base_rate = 0.1;
  double l2 = 0.0;
  std::uint64_t seed = 42;
  Solver solver = Solver::kScaleInvariant;
  // Visit rows of each batch in a seeded random order. When false rows are
  // visited in storage order.
  bool shuffle = true;
  // Fit a standardizer on the training stream before the first epoch.
  bool standardize = true;

  void Validate() const;
};

// Rows are in feature space when passed to PartialFit and in input space
// when produced by a BatchStream. Labels are 0 or 1 (1 = positive).
struct LabeledBatch {
  Matrix rows;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
};

// Replayable stream of batches: every call visits the whole stream once, in
// the same order.
using BatchVisitor = std::function<void(const LabeledBatch&)>;
using BatchStream = std::function<void(const BatchVisitor&)>;

BatchStream StreamFromBatches(std::vector<LabeledBatch> batches);

// Optimizer accumulators. Not serialized.
struct SolverState {
  Vector sq_grad;  // D weights followed by the bias.
  std::uint64_t steps = 0;
  std::uint64_t calls = 0;
};

struct LinearModel {
  Vector weights;
  double bias = 0.0;
  Loss loss = Loss::kLogistic;
  int input_dim = 0;
  std::optional<FeatureMapSpec> map_spec;
  std::optional<Standardizer> standardizer;
  std::uint64_t train_seed = 0;
  int train_epochs = 0;
  SolverState state;

  // Zero-initialized model for inputs of dimension input_dim.
  static LinearModel Create(Loss loss, int input_dim,
                            std::optional<FeatureMapSpec> map_spec =
                                std::nullopt);

  // D, the number of weights.
  std::size_t width() const { return static_cast<std::size_t>(weights.size()); }
  std::size_t num_parameters() const { return width() + 1; }
};

// Input rows (n x d) to feature-space rows (n x D).
Matrix MapRows(const LinearModel& model, const Matrix& rows);

// Feature-space rows to model space (standardized when a standardizer is set).
Matrix ToModelSpace(const LinearModel& model, const Matrix& feature_rows);

// One pass of per-row stochastic (sub)gradient updates over a feature-space
// batch. Empty batches leave the model untouched.
void PartialFit(LinearModel& model, const LabeledBatch& batch,
                const TrainConfig& config);

// Mean loss over a feature-space batch plus (l2 / 2) * ||w||^2.
double BatchLoss(const LinearModel& model, const LabeledBatch& batch,
                 double l2);
// Gradient of BatchLoss; D weight components followed by the bias.
Vector BatchGradient(const LinearModel& model, const LabeledBatch& batch,
                     double l2);

// f(x) = <w, standardize(phi(x))> + w0 for an input-space x.
double Decision(const LinearModel& model, std::span<const double> x);
Vector DecisionBatch(const LinearModel& model, const Matrix& input_rows);

struct Prediction {
  int label;     // 1 iff score > 0.
  double score;  // Decision value.
};

Prediction Predict(const LinearModel& model, std::span<const double> x);

double Sigmoid(double z);

// Weights and bias acting directly on feature-space vectors, i.e. with the
// standardizer folded in.
struct FeatureSpaceLinear {
  Vector weights;
  double bias = 0.0;
};
FeatureSpaceLinear EffectiveLinear(const LinearModel& model);

// Fits the standardizer on one pass of the stream (unless one is supplied or
// config.standardize is false), then runs config.epochs passes of PartialFit
// over mapped batches. Only one mapped batch is alive at a time.
LinearModel TrainStreaming(const BatchStream& source, Loss loss, int input_dim,
                           std::optional<FeatureMapSpec> map_spec,
                           const TrainConfig& config,
                           std::optional<Standardizer> standardizer =
                               std::nullopt);

nlohmann::json ToJson(const LinearModel& model);
LinearModel LinearModelFromJson(const nlohmann::json& j);

}  // namespace efmkit

#endif  // EFMKIT_LINEAR_MODEL_H_
