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

#include "efmkit/linear_model.h"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <random>
#include <string>

#include "efmkit/error.h"

namespace efmkit {
namespace {

// d loss / d f for a label in {0, 1}.
double LossDerivative(Loss loss, int label, double f) {
  const double y = label == 1 ? 1.0 : -1.0;
  if (loss == Loss::kLogistic) return -y * Sigmoid(-y * f);
  return y * f < 1.0 ? -y : 0.0;
}

double LossValue(Loss loss, int label, double f) {
  const double y = label == 1 ? 1.0 : -1.0;
  const double margin = y * f;
  if (loss == Loss::kLogistic) {
    // log(1 + exp(-margin)) without overflow.
    return margin > 0 ? std::log1p(std::exp(-margin))
                      : -margin + std::log1p(std::exp(margin));
  }
  return std::max(0.0, 1.0 - margin);
}

void CheckBatch(const LinearModel& model, const LabeledBatch& batch) {
  if (static_cast<std::size_t>(batch.rows.rows()) != batch.labels.size()) {
    throw Error(ErrorCode::kShape,
                "batch has " + std::to_string(batch.rows.rows()) +
                    " rows but " + std::to_string(batch.labels.size()) +
                    " labels");
  }
  if (batch.size() > 0 &&
      static_cast<std::size_t>(batch.rows.cols()) != model.width()) {
    throw Error(ErrorCode::kShape, "batch width " +
                                       std::to_string(batch.rows.cols()) +
                                       " != model width " +
                                       std::to_string(model.width()));
  }
  for (std::size_t i = 0; i < batch.labels.size(); ++i) {
    if (batch.labels[i] != 0 && batch.labels[i] != 1) {
      throw Error(ErrorCode::kLabel, "label " +
                                         std::to_string(batch.labels[i]) +
                                         " at row " + std::to_string(i) +
                                         " is not 0/1");
    }
  }
}

std::vector<double> ToStdVector(const Vector& v) {
  return {v.data(), v.data() + v.size()};
}

Vector FromStdVector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

double Sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void Standardizer::ApplyInPlace(std::span<double> row) const {
  for (std::size_t j = 0; j < row.size(); ++j) {
    row[j] = (row[j] - means[j]) / scales[j];
  }
}

void Standardizer::InvertInPlace(std::span<double> row) const {
  for (std::size_t j = 0; j < row.size(); ++j) {
    row[j] = row[j] * scales[j] + means[j];
  }
}

Matrix Standardizer::Apply(const Matrix& rows) const {
  if (rows.rows() > 0 && static_cast<std::size_t>(rows.cols()) != size()) {
    throw Error(ErrorCode::kShape, "standardizer width mismatch");
  }
  Matrix out = rows;
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    ApplyInPlace({out.row(r).data(), size()});
  }
  return out;
}

Matrix Standardizer::Invert(const Matrix& rows) const {
  if (rows.rows() > 0 && static_cast<std::size_t>(rows.cols()) != size()) {
    throw Error(ErrorCode::kShape, "standardizer width mismatch");
  }
  Matrix out = rows;
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    InvertInPlace({out.row(r).data(), size()});
  }
  return out;
}

void StandardizerAccumulator::Add(const Matrix& rows) {
  if (rows.rows() == 0) return;
  if (count_ == 0) {
    mean_ = Vector::Zero(rows.cols());
    m2_ = Vector::Zero(rows.cols());
  } else if (rows.cols() != mean_.size()) {
    throw Error(ErrorCode::kShape, "inconsistent batch width for standardizer");
  }
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    ++count_;
    const double n = static_cast<double>(count_);
    for (Eigen::Index j = 0; j < rows.cols(); ++j) {
      const double v = rows(r, j);
      const double delta = v - mean_[j];
      mean_[j] += delta / n;
      m2_[j] += delta * (v - mean_[j]);
    }
  }
}

Standardizer StandardizerAccumulator::Finish() const {
  if (count_ == 0) {
    throw Error(ErrorCode::kNoData, "standardizer saw no rows");
  }
  Standardizer s;
  s.means = mean_;
  s.scales.resize(mean_.size());
  for (Eigen::Index j = 0; j < mean_.size(); ++j) {
    const double sd = std::sqrt(m2_[j] / static_cast<double>(count_));
    s.scales[j] = (sd > 0.0 && std::isfinite(sd)) ? sd : 1.0;
  }
  return s;
}

Standardizer FitStandardizer(const std::vector<Matrix>& batches) {
  StandardizerAccumulator acc;
  for (const auto& b : batches) acc.Add(b);
  return acc.Finish();
}

void TrainConfig::Validate() const {
  if (epochs < 0) throw Error(ErrorCode::kParameter, "epochs must be >= 0");
  if (batch_rows < 1) {
    throw Error(ErrorCode::kParameter, "batch_rows must be >= 1");
  }
  if (!(base_rate > 0.0)) {
    throw Error(ErrorCode::kParameter, "base_rate must be > 0");
  }
  if (!(l2 >= 0.0)) throw Error(ErrorCode::kParameter, "l2 must be >= 0");
}

BatchStream StreamFromBatches(std::vector<LabeledBatch> batches) {
  auto shared =
      std::make_shared<const std::vector<LabeledBatch>>(std::move(batches));
  return [shared](const BatchVisitor& visit) {
    for (const auto& b : *shared) visit(b);
  };
}

LinearModel LinearModel::Create(Loss loss, int input_dim,
                                std::optional<FeatureMapSpec> map_spec) {
  LinearModel model;
  model.loss = loss;
  std::size_t width = 0;
  if (map_spec) {
    map_spec->Validate();
    if (map_spec->d != input_dim) {
      throw Error(ErrorCode::kShape,
                  "map spec d=" + std::to_string(map_spec->d) +
                      " but input_dim=" + std::to_string(input_dim));
    }
    width = ExpansionDim(*map_spec);
  } else {
    if (input_dim < 1) {
      throw Error(ErrorCode::kInvalidDimension, "input_dim must be >= 1");
    }
    width = static_cast<std::size_t>(input_dim);
  }
  model.input_dim = input_dim;
  model.map_spec = map_spec;
  model.weights = Vector::Zero(static_cast<Eigen::Index>(width));
  return model;
}

Matrix MapRows(const LinearModel& model, const Matrix& rows) {
  if (rows.rows() > 0 && rows.cols() != model.input_dim) {
    throw Error(ErrorCode::kShape, "rows have " + std::to_string(rows.cols()) +
                                       " columns, model expects " +
                                       std::to_string(model.input_dim));
  }
  if (!model.map_spec) return rows;
  return FeatureMap(*model.map_spec).Transform(rows);
}

Matrix ToModelSpace(const LinearModel& model, const Matrix& feature_rows) {
  if (!model.standardizer) return feature_rows;
  return model.standardizer->Apply(feature_rows);
}

void PartialFit(LinearModel& model, const LabeledBatch& batch,
                const TrainConfig& config) {
  config.Validate();
  CheckBatch(model, batch);
  const std::size_t n = batch.size();
  if (n == 0) return;
  const Eigen::Index width = static_cast<Eigen::Index>(model.width());
  if (model.state.sq_grad.size() != width + 1) {
    model.state.sq_grad = Vector::Zero(width + 1);
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (config.shuffle) {
    std::mt19937_64 rng(config.seed + 0x9E3779B97F4A7C15ULL * model.state.calls);
    std::shuffle(order.begin(), order.end(), rng);
  }
  ++model.state.calls;

  Vector z(width);
  Vector grad(width + 1);
  constexpr double kTiny = 1e-12;
  for (std::size_t idx : order) {
    const auto r = static_cast<Eigen::Index>(idx);
    z = batch.rows.row(r).transpose();
    if (model.standardizer) {
      model.standardizer->ApplyInPlace({z.data(), model.width()});
    }
    const double f = model.weights.dot(z) + model.bias;
    const double g = LossDerivative(model.loss, batch.labels[idx], f);
    grad.head(width) = g * z + config.l2 * model.weights;
    grad[width] = g;

    if (config.solver == Solver::kPlainSgd) {
      const double rate =
          config.base_rate / std::sqrt(1.0 + static_cast<double>(model.state.steps));
      model.weights -= rate * grad.head(width);
      model.bias -= rate * grad[width];
    } else {
      auto& acc = model.state.sq_grad;
      for (Eigen::Index j = 0; j <= width; ++j) {
        const double gj = grad[j];
        if (gj == 0.0) continue;
        acc[j] += gj * gj;
        const double step = config.base_rate * gj / (std::sqrt(acc[j]) + kTiny);
        if (j < width) {
          model.weights[j] -= step;
        } else {
          model.bias -= step;
        }
      }
    }
    ++model.state.steps;
  }
}

double BatchLoss(const LinearModel& model, const LabeledBatch& batch,
                 double l2) {
  CheckBatch(model, batch);
  const Matrix z = ToModelSpace(model, batch.rows);
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double f =
        z.row(static_cast<Eigen::Index>(i)).dot(model.weights) + model.bias;
    total += LossValue(model.loss, batch.labels[i], f);
  }
  const double mean = batch.size() ? total / batch.size() : 0.0;
  return mean + 0.5 * l2 * model.weights.squaredNorm();
}

Vector BatchGradient(const LinearModel& model, const LabeledBatch& batch,
                     double l2) {
  CheckBatch(model, batch);
  const Eigen::Index width = static_cast<Eigen::Index>(model.width());
  const Matrix z = ToModelSpace(model, batch.rows);
  Vector grad = Vector::Zero(width + 1);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const double f = z.row(r).dot(model.weights) + model.bias;
    const double g = LossDerivative(model.loss, batch.labels[i], f);
    grad.head(width) += g * z.row(r).transpose();
    grad[width] += g;
  }
  if (batch.size()) grad /= static_cast<double>(batch.size());
  grad.head(width) += l2 * model.weights;
  return grad;
}

double Decision(const LinearModel& model, std::span<const double> x) {
  if (x.size() != static_cast<std::size_t>(model.input_dim)) {
    throw Error(ErrorCode::kShape, "input has length " +
                                       std::to_string(x.size()) +
                                       ", model expects " +
                                       std::to_string(model.input_dim));
  }
  Vector z = model.map_spec
                 ? FeatureMap(*model.map_spec).Apply(x)
                 : Vector(Eigen::Map<const Vector>(
                       x.data(), static_cast<Eigen::Index>(x.size())));
  if (model.standardizer) {
    model.standardizer->ApplyInPlace({z.data(), model.width()});
  }
  return model.weights.dot(z) + model.bias;
}

Vector DecisionBatch(const LinearModel& model, const Matrix& input_rows) {
  const Matrix z = ToModelSpace(model, MapRows(model, input_rows));
  Vector out(z.rows());
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    out[r] = z.row(r).dot(model.weights) + model.bias;
  }
  return out;
}

Prediction Predict(const LinearModel& model, std::span<const double> x) {
  const double score = Decision(model, x);
  return {score > 0.0 ? 1 : 0, score};
}

FeatureSpaceLinear EffectiveLinear(const LinearModel& model) {
  FeatureSpaceLinear out{model.weights, model.bias};
  if (model.standardizer) {
    const auto& s = *model.standardizer;
    out.weights = model.weights.cwiseQuotient(s.scales);
    out.bias = model.bias - out.weights.dot(s.means);
  }
  return out;
}

LinearModel TrainStreaming(const BatchStream& source, Loss loss, int input_dim,
                           std::optional<FeatureMapSpec> map_spec,
                           const TrainConfig& config,
                           std::optional<Standardizer> standardizer) {
  config.Validate();
  LinearModel model = LinearModel::Create(loss, input_dim, map_spec);
  model.train_seed = config.seed;
  model.train_epochs = config.epochs;
  std::optional<FeatureMap> map;
  if (map_spec) map.emplace(*map_spec);
  auto to_features = [&](const Matrix& rows) {
    if (rows.rows() > 0 && rows.cols() != input_dim) {
      throw Error(ErrorCode::kShape,
                  "batch has " + std::to_string(rows.cols()) +
                      " columns, expected " + std::to_string(input_dim));
    }
    return map ? map->Transform(rows) : rows;
  };

  std::size_t seen = 0;
  if (standardizer) {
    if (standardizer->size() != model.width()) {
      throw Error(ErrorCode::kShape, "supplied standardizer width mismatch");
    }
    model.standardizer = std::move(standardizer);
  } else if (config.standardize) {
    StandardizerAccumulator acc;
    source([&](const LabeledBatch& b) { acc.Add(to_features(b.rows)); });
    seen = acc.count();
    model.standardizer = acc.Finish();  // Throws kNoData on empty streams.
  }

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::size_t rows_this_epoch = 0;
    source([&](const LabeledBatch& b) {
      LabeledBatch mapped{to_features(b.rows), b.labels};
      rows_this_epoch += mapped.size();
      PartialFit(model, mapped, config);
    });
    seen = std::max(seen, rows_this_epoch);
  }
  if (seen == 0 && config.epochs > 0) {
    throw Error(ErrorCode::kNoData, "training stream produced no rows");
  }
  return model;
}

nlohmann::json ToJson(const LinearModel& model) {
  nlohmann::json j;
  j["loss"] = model.loss == Loss::kLogistic ? "logistic" : "hinge";
  j["input_dim"] = model.input_dim;
  j["map_spec"] =
      model.map_spec ? ToJson(*model.map_spec) : nlohmann::json(nullptr);
  j["weights"] = ToStdVector(model.weights);
  j["bias"] = model.bias;
  if (model.standardizer) {
    j["standardizer"] = {{"means", ToStdVector(model.standardizer->means)},
                         {"scales", ToStdVector(model.standardizer->scales)}};
  } else {
    j["standardizer"] = nullptr;
  }
  j["train_meta"] = {{"seed", model.train_seed},
                     {"epochs", model.train_epochs}};
  return j;
}

LinearModel LinearModelFromJson(const nlohmann::json& j) {
  try {
    const std::string loss = j.at("loss").get<std::string>();
    Loss kind;
    if (loss == "logistic") {
      kind = Loss::kLogistic;
    } else if (loss == "hinge") {
      kind = Loss::kHinge;
    } else {
      throw Error(ErrorCode::kFormat, "unknown loss " + loss);
    }
    std::optional<FeatureMapSpec> spec;
    if (j.contains("map_spec") && !j["map_spec"].is_null()) {
      spec = FeatureMapSpecFromJson(j["map_spec"]);
    }
    const int input_dim =
        j.contains("input_dim") ? j["input_dim"].get<int>() : (spec ? spec->d : 0);
    LinearModel model = LinearModel::Create(kind, input_dim, spec);
    const auto weights = j.at("weights").get<std::vector<double>>();
    if (weights.size() != model.width()) {
      throw Error(ErrorCode::kFormat,
                  "model has " + std::to_string(weights.size()) +
                      " weights, expected " + std::to_string(model.width()));
    }
    model.weights = FromStdVector(weights);
    model.bias = j.at("bias").get<double>();
    if (j.contains("standardizer") && !j["standardizer"].is_null()) {
      Standardizer s;
      s.means = FromStdVector(j["standardizer"].at("means").get<std::vector<double>>());
      s.scales =
          FromStdVector(j["standardizer"].at("scales").get<std::vector<double>>());
      if (s.size() != model.width() ||
          static_cast<std::size_t>(s.scales.size()) != model.width()) {
        throw Error(ErrorCode::kFormat, "standardizer width mismatch");
      }
      if ((s.scales.array() <= 0.0).any()) {
        throw Error(ErrorCode::kFormat, "standardizer scales must be > 0");
      }
      model.standardizer = std::move(s);
    }
    if (j.contains("train_meta")) {
      model.train_seed = j["train_meta"].value("seed", std::uint64_t{0});
      model.train_epochs = j["train_meta"].value("epochs", 0);
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("bad model json: ") + e.what());
  }
}

}  // namespace efmkit
