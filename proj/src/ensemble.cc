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

#include "efmkit/ensemble.h"

#include <cmath>
#include <string>

#include "efmkit/error.h"

namespace efmkit {

HyperGrid PolynomialOffsetGrid(int d, int m, const std::vector<double>& offsets) {
  HyperGrid grid;
  for (double b : offsets) grid.push_back(FeatureMapSpec::Polynomial(d, m, b));
  return grid;
}

HyperGrid GaussianSigmaGrid(int d, int m, const std::vector<double>& sigmas) {
  HyperGrid grid;
  for (double s : sigmas) grid.push_back(FeatureMapSpec::Gaussian(d, m, s));
  return grid;
}

std::vector<double> DefaultPolynomialOffsets() { return {1, 2, 3, 4, 5, 6, 7}; }

std::vector<double> DefaultGaussianSigmas() {
  const double r2 = std::sqrt(2.0);
  return {4.0, 2.0 * r2, 2.0, r2, 1.0, 1.0 / r2, 0.5, r2 / 4.0};
}

ConfusionCounts EvaluateStream(const LinearModel& model,
                               const BatchStream& stream) {
  ConfusionCounts counts;
  stream([&](const LabeledBatch& b) {
    const Vector scores = DecisionBatch(model, b.rows);
    std::vector<int> predicted(b.size());
    for (std::size_t i = 0; i < b.size(); ++i) {
      predicted[i] = scores[static_cast<Eigen::Index>(i)] > 0.0 ? 1 : 0;
    }
    counts = Accumulate(counts, predicted, b.labels);
  });
  return counts;
}

MemberSelection SelectMember(const BatchStream& subset, Loss loss,
                             int input_dim, const HyperGrid& grid,
                             const TrainConfig& config) {
  if (grid.empty()) throw Error(ErrorCode::kParameter, "empty hyperparameter grid");
  std::optional<MemberSelection> best;
  std::vector<double> baccs;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    LinearModel model =
        TrainStreaming(subset, loss, input_dim, grid[i], config);
    const ConfusionCounts counts = EvaluateStream(model, subset);
    const MetricReport report = Metrics(counts);
    baccs.push_back(report.bacc);
    const bool degenerate =
        (report.degenerate & (kDegenerateSe | kDegenerateSp)) != 0;
    if (!best || report.bacc > best->bacc) {
      best = MemberSelection{std::move(model), i, report.bacc, {}, degenerate};
    }
  }
  best->candidate_bacc = std::move(baccs);
  return std::move(*best);
}

int Ensemble::input_dim() const {
  return members.empty() ? 0 : members.front().input_dim;
}

std::vector<std::optional<FeatureMapSpec>> Ensemble::member_specs() const {
  std::vector<std::optional<FeatureMapSpec>> specs;
  for (const auto& m : members) specs.push_back(m.map_spec);
  return specs;
}

void Ensemble::Validate() const {
  if (members.empty()) throw Error(ErrorCode::kNoData, "ensemble has no members");
  for (const auto& m : members) {
    if (m.input_dim != members.front().input_dim) {
      throw Error(ErrorCode::kShape, "ensemble members disagree on input dim");
    }
  }
}

Ensemble TrainEnsemble(const std::vector<BatchStream>& subsets, Loss loss,
                       int input_dim, const HyperGrid& grid,
                       const TrainConfig& config, TieRule tie_rule,
                       std::vector<MemberSelection>* selections) {
  if (subsets.empty()) {
    throw Error(ErrorCode::kNoData, "no training subsets");
  }
  Ensemble ensemble;
  ensemble.tie_rule = tie_rule;
  for (const auto& subset : subsets) {
    MemberSelection sel = SelectMember(subset, loss, input_dim, grid, config);
    ensemble.members.push_back(sel.model);
    if (selections) selections->push_back(std::move(sel));
  }
  return ensemble;
}

int ResolveVote(std::size_t positive, std::size_t total, TieRule tie_rule) {
  const std::size_t negative = total - positive;
  if (positive > negative) return 1;
  if (negative > positive) return 0;
  return tie_rule == TieRule::kPositive ? 1 : 0;
}

int Vote(const Ensemble& ensemble, std::span<const double> x) {
  ensemble.Validate();
  std::size_t positive = 0;
  for (const auto& m : ensemble.members) positive += Predict(m, x).label;
  return ResolveVote(positive, ensemble.members.size(), ensemble.tie_rule);
}

std::vector<int> VoteBatch(const Ensemble& ensemble, const Matrix& input_rows) {
  ensemble.Validate();
  const auto n = static_cast<std::size_t>(input_rows.rows());
  std::vector<std::size_t> positive(n, 0);
  for (const auto& m : ensemble.members) {
    const Vector scores = DecisionBatch(m, input_rows);
    for (std::size_t i = 0; i < n; ++i) {
      positive[i] += scores[static_cast<Eigen::Index>(i)] > 0.0 ? 1 : 0;
    }
  }
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = ResolveVote(positive[i], ensemble.members.size(),
                            ensemble.tie_rule);
  }
  return labels;
}

nlohmann::json ToJson(const Ensemble& ensemble) {
  nlohmann::json members = nlohmann::json::array();
  for (const auto& m : ensemble.members) members.push_back(ToJson(m));
  return {{"tie_rule",
           ensemble.tie_rule == TieRule::kPositive ? "positive" : "negative"},
          {"members", members}};
}

Ensemble EnsembleFromJson(const nlohmann::json& j) {
  try {
    Ensemble e;
    const std::string rule = j.value("tie_rule", std::string("positive"));
    if (rule == "positive") {
      e.tie_rule = TieRule::kPositive;
    } else if (rule == "negative") {
      e.tie_rule = TieRule::kNegative;
    } else {
      throw Error(ErrorCode::kFormat, "unknown tie rule " + rule);
    }
    for (const auto& m : j.at("members")) {
      e.members.push_back(LinearModelFromJson(m));
    }
    e.Validate();
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::kFormat, std::string("bad ensemble json: ") + ex.what());
  }
}

}  // namespace efmkit
