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

#include "efmkit/cli.h"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "efmkit/dataset.h"
#include "efmkit/ensemble.h"
#include "efmkit/error.h"
#include "efmkit/explain.h"
#include "efmkit/feature_map.h"
#include "efmkit/image_io.h"
#include "efmkit/linear_model.h"
#include "efmkit/metrics.h"
#include "efmkit/uspec.h"
#include "json.hpp"

namespace efmkit {
namespace {

using nlohmann::json;

bool IsCsv(const std::string& path) {
  std::string ext = std::filesystem::path(path).extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
  return ext == ".csv";
}

json ReadJsonFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kFormat, "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormat, path + ": " + e.what());
  }
}

std::string Fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Feature map flags shared by several subcommands.
struct MapOptions {
  std::string map = "none";
  int order = 2;
  double offset = 1.0;
  double sigma = 0.7071;
  std::string variant = "half";
  std::string spec_file;

  void Register(CLI::App* app) {
    app->add_option("--map", map, "Feature map: none, poly, gauss")
        ->check(CLI::IsMember({"none", "poly", "gauss"}));
    app->add_option("--order", order, "Map order m");
    app->add_option("--offset", offset, "Polynomial offset b");
    app->add_option("--sigma", sigma, "Gaussian sigma");
    app->add_option("--variant", variant, "Gaussian variant: half, full")
        ->check(CLI::IsMember({"half", "full"}));
    app->add_option("--map-spec", spec_file, "JSON feature map spec file");
  }

  std::optional<FeatureMapSpec> Build(int d) const {
    if (!spec_file.empty()) {
      FeatureMapSpec s = FeatureMapSpecFromJson(ReadJsonFile(spec_file));
      if (s.d != d) {
        throw Error(ErrorCode::kShape, "map spec d=" + std::to_string(s.d) +
                                           " but data has " +
                                           std::to_string(d) + " columns");
      }
      return s;
    }
    if (map == "poly") return FeatureMapSpec::Polynomial(d, order, offset);
    if (map == "gauss") {
      return FeatureMapSpec::Gaussian(
          d, order, sigma,
          variant == "full" ? GaussianVariant::kFull : GaussianVariant::kHalf);
    }
    return std::nullopt;
  }
};

// Rows read from a CSV table or an RGB raster.
struct InputData {
  Matrix rows;
  std::optional<std::vector<std::string>> header;
  std::size_t height = 0;
  std::size_t width = 0;
  bool is_image = false;
};

InputData LoadInput(const std::string& path, const std::string& prefilter) {
  InputData in;
  if (IsCsv(path)) {
    CsvTable t = ReadCsv(path);
    in.rows = std::move(t.values);
    in.header = std::move(t.header);
    return in;
  }
  PixelDataset img = LoadImage(path);
  if (prefilter == "median3") img = MedianPrefilter(img);
  in.rows = std::move(img.rows);
  in.height = img.height;
  in.width = img.width;
  in.is_image = true;
  return in;
}

std::vector<int> LoadLabels(const std::string& path) {
  if (IsCsv(path)) {
    CsvTable t = ReadCsv(path);
    Eigen::Index col = t.values.cols() - 1;
    if (t.header) {
      for (std::size_t i = 0; i < t.header->size(); ++i) {
        if ((*t.header)[i] == "label") col = static_cast<Eigen::Index>(i);
      }
    }
    if (col < 0) throw Error(ErrorCode::kFormat, path + " has no columns");
    std::vector<int> labels(static_cast<std::size_t>(t.values.rows()));
    for (Eigen::Index r = 0; r < t.values.rows(); ++r) {
      const double v = t.values(r, col);
      if (v != 0.0 && v != 1.0) {
        throw Error(ErrorCode::kLabel, path + ": non-binary label");
      }
      labels[static_cast<std::size_t>(r)] = static_cast<int>(v);
    }
    return labels;
  }
  return LoadMask(path).labels;
}

// Sequential model or ensemble loaded from JSON.
struct AnyModel {
  std::optional<LinearModel> single;
  std::optional<Ensemble> ensemble;

  int input_dim() const {
    return single ? single->input_dim : ensemble->input_dim();
  }

  // Labels and scores (decision value, or positive vote fraction).
  void Score(const Matrix& rows, std::vector<int>& labels, Vector& scores) const {
    const auto n = static_cast<std::size_t>(rows.rows());
    labels.assign(n, 0);
    if (single) {
      scores = DecisionBatch(*single, rows);
      for (std::size_t i = 0; i < n; ++i) {
        labels[i] = scores[static_cast<Eigen::Index>(i)] > 0.0 ? 1 : 0;
      }
      return;
    }
    scores = Vector::Zero(rows.rows());
    for (const auto& m : ensemble->members) {
      const Vector s = DecisionBatch(m, rows);
      scores += (s.array() > 0.0).cast<double>().matrix();
    }
    const auto total = ensemble->members.size();
    for (std::size_t i = 0; i < n; ++i) {
      const auto pos = static_cast<std::size_t>(scores[static_cast<Eigen::Index>(i)]);
      labels[i] = ResolveVote(pos, total, ensemble->tie_rule);
    }
    scores /= static_cast<double>(total);
  }
};

AnyModel LoadAnyModel(const std::string& path) {
  const json j = ReadJsonFile(path);
  AnyModel m;
  if (j.contains("members")) {
    m.ensemble = EnsembleFromJson(j);
  } else {
    m.single = LinearModelFromJson(j);
  }
  return m;
}

void CheckColumns(const Matrix& rows, int expected, const std::string& what) {
  if (rows.cols() != expected) {
    throw Error(ErrorCode::kShape, what + " has " + std::to_string(rows.cols()) +
                                       " columns, model expects " +
                                       std::to_string(expected));
  }
}

// ---------------------------------------------------------------- transform

struct TransformCmd {
  std::string input;
  std::string output;
  std::string prefilter = "none";
  MapOptions map;

  void Register(CLI::App* app) {
    app->add_option("--input", input, "CSV or image")->required();
    app->add_option("--output", output, "Mapped CSV")->required();
    app->add_option("--prefilter", prefilter)->check(CLI::IsMember({"none", "median3"}));
    map.Register(app);
  }

  int Run(std::ostream& out) {
    InputData in = LoadInput(input, prefilter);
    const int d = static_cast<int>(in.rows.cols());
    auto spec = map.Build(d);
    std::vector<std::string> in_names =
        in.header ? *in.header : DefaultInputNames(d);
    CsvTable table;
    if (spec) {
      const FeatureMap fm(*spec);
      table.values = fm.Transform(in.rows);
      table.header = fm.FeatureNames(in_names);
    } else {
      table.values = in.rows;
      table.header = in_names;
    }
    WriteCsv(output, table);
    out << "wrote " << table.values.rows() << "x" << table.values.cols()
        << " to " << output << "\n";
    return 0;
  }
};

// -------------------------------------------------------------------- synth

struct SynthCmd {
  std::string kind = "annulus";
  std::size_t n = 5000;
  double noise = 0.05;
  std::uint64_t seed = 42;
  std::string output;

  void Register(CLI::App* app) {
    app->add_option("--kind", kind, "blobs, annulus or xor");
    app->add_option("--n", n, "Number of rows");
    app->add_option("--noise", noise, "Gaussian jitter");
    app->add_option("--seed", seed);
    app->add_option("--output", output)->required();
  }

  int Run(std::ostream& out) {
    const LabeledBatch data = SynthGenerate(ParseSynthKind(kind), n, noise, seed);
    CsvTable table;
    table.header = std::vector<std::string>{"x1", "x2", "label"};
    table.values.resize(data.rows.rows(), 3);
    table.values.leftCols(2) = data.rows;
    for (std::size_t i = 0; i < data.size(); ++i) {
      table.values(static_cast<Eigen::Index>(i), 2) = data.labels[i];
    }
    WriteCsv(output, table);
    out << "wrote " << n << " " << kind << " rows to " << output << "\n";
    return 0;
  }
};

// -------------------------------------------------------------------- train

struct TrainCmd {
  std::vector<std::string> images;
  std::vector<std::string> masks;
  std::vector<std::string> csvs;
  std::string loss = "logistic";
  std::string solver = "scale-invariant";
  std::string prefilter = "none";
  std::string grid = "poly";
  std::string tie = "positive";
  std::string config_file;
  std::string output;
  std::size_t patch = 100;
  bool ensemble = false;
  bool no_standardize = false;
  TrainConfig cfg;
  MapOptions map;
  CLI::App* app = nullptr;

  void Register(CLI::App* a) {
    app = a;
    app->add_option("--image", images, "Training image(s)");
    app->add_option("--mask", masks, "Ground-truth mask per image");
    app->add_option("--csv", csvs, "Labeled CSV file(s); label column last or named 'label'");
    app->add_option("--loss", loss)->check(CLI::IsMember({"logistic", "hinge"}));
    app->add_option("--solver", solver)
        ->check(CLI::IsMember({"scale-invariant", "plain-sgd"}));
    app->add_option("--epochs", cfg.epochs);
    app->add_option("--rate", cfg.base_rate, "Base learning rate");
    app->add_option("--l2", cfg.l2);
    app->add_option("--seed", cfg.seed);
    app->add_option("--batch-rows", cfg.batch_rows, "CSV batch size");
    app->add_option("--patch", patch, "Image patch side");
    app->add_flag("--no-shuffle", [this](std::int64_t) { cfg.shuffle = false; });
    app->add_flag("--no-standardize", no_standardize);
    app->add_option("--prefilter", prefilter)->check(CLI::IsMember({"none", "median3"}));
    app->add_flag("--ensemble", ensemble, "One member per image/CSV, majority vote");
    app->add_option("--grid", grid, "Ensemble grid: poly, gauss, none")
        ->check(CLI::IsMember({"poly", "gauss", "none"}));
    app->add_option("--tie", tie)->check(CLI::IsMember({"positive", "negative"}));
    app->add_option("--config", config_file, "JSON run config");
    app->add_option("--output", output, "Model JSON")->required();
    map.Register(app);
  }

  bool Given(const char* name) const { return app->count(name) > 0; }

  void ApplyConfig() {
    if (config_file.empty()) return;
    const json j = ReadJsonFile(config_file);
    if (j.contains("seed") && !Given("--seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("prefilter") && !Given("--prefilter")) {
      prefilter = j["prefilter"].get<std::string>();
    }
    if (j.contains("map_spec") && !j["map_spec"].is_null() && !Given("--map") &&
        !Given("--map-spec")) {
      const FeatureMapSpec s = FeatureMapSpecFromJson(j["map_spec"]);
      map.map = s.kind == MapKind::kPolynomial ? "poly" : "gauss";
      map.order = s.m;
      map.offset = s.b;
      map.sigma = s.sigma;
      map.variant = s.variant == GaussianVariant::kFull ? "full" : "half";
    }
    if (j.contains("train")) {
      const json& t = j["train"];
      if (t.contains("epochs") && !Given("--epochs")) cfg.epochs = t["epochs"];
      if (t.contains("base_rate") && !Given("--rate")) cfg.base_rate = t["base_rate"];
      if (t.contains("l2") && !Given("--l2")) cfg.l2 = t["l2"];
      if (t.contains("batch_rows") && !Given("--batch-rows")) {
        cfg.batch_rows = t["batch_rows"];
      }
      if (t.contains("solver") && !Given("--solver")) solver = t["solver"];
      if (t.contains("loss") && !Given("--loss")) loss = t["loss"];
      if (t.contains("seed") && !Given("--seed")) cfg.seed = t["seed"];
    }
  }

  int Run(std::ostream& out, std::ostream& err) {
    ApplyConfig();
    cfg.solver = solver == "plain-sgd" ? Solver::kPlainSgd : Solver::kScaleInvariant;
    cfg.standardize = !no_standardize;
    const Loss loss_kind = loss == "hinge" ? Loss::kHinge : Loss::kLogistic;
    if (images.size() != masks.size()) {
      throw Error(ErrorCode::kUsage, "--image and --mask must be given in pairs");
    }
    if (images.empty() && csvs.empty()) {
      throw Error(ErrorCode::kUsage, "give --image/--mask pairs or --csv files");
    }
    std::vector<BatchStream> subsets;
    int d = 0;
    for (std::size_t i = 0; i < images.size(); ++i) {
      PixelDataset img = LoadImage(images[i]);
      if (prefilter == "median3") img = MedianPrefilter(img);
      subsets.push_back(PatchStream(img, LoadMask(masks[i]), patch));
      d = 3;
    }
    for (const auto& path : csvs) {
      const LabeledBatch data = LabeledFromTable(ReadCsv(path));
      if (d && d != data.rows.cols()) {
        throw Error(ErrorCode::kShape, "inputs differ in feature count");
      }
      d = static_cast<int>(data.rows.cols());
      subsets.push_back(ChunkStream(data, cfg.batch_rows));
    }
    const BatchStream all = ConcatStreams(subsets);

    json model_json;
    AnyModel trained;
    if (ensemble) {
      HyperGrid hyper;
      if (!map.spec_file.empty() || grid == "none") {
        hyper.push_back(map.Build(d));
      } else if (grid == "poly") {
        hyper = PolynomialOffsetGrid(d, map.order, DefaultPolynomialOffsets());
      } else {
        hyper = GaussianSigmaGrid(d, map.order, DefaultGaussianSigmas());
      }
      std::vector<MemberSelection> selections;
      Ensemble e = TrainEnsemble(subsets, loss_kind, d, hyper, cfg,
                                 tie == "negative" ? TieRule::kNegative
                                                   : TieRule::kPositive,
                                 &selections);
      for (std::size_t i = 0; i < selections.size(); ++i) {
        if (selections[i].degenerate) {
          err << "warning: subset " << i
              << " holds a single class; its BACC counts the absent class as 0\n";
        }
      }
      model_json = ToJson(e);
      trained.ensemble = std::move(e);
    } else {
      LinearModel m = TrainStreaming(all, loss_kind, d, map.Build(d), cfg);
      model_json = ToJson(m);
      trained.single = std::move(m);
    }

    ConfusionCounts counts;
    all([&](const LabeledBatch& b) {
      std::vector<int> labels;
      Vector scores;
      trained.Score(b.rows, labels, scores);
      counts = Accumulate(counts, labels, b.labels);
    });
    const MetricReport report = Metrics(counts);
    const double accuracy =
        counts.total() ? static_cast<double>(counts.tp + counts.tn) / counts.total()
                       : 0.0;
    model_json["train_meta"]["train_accuracy"] = accuracy;
    model_json["train_meta"]["train_bacc"] = report.bacc;
    WriteFileAtomic(output, model_json.dump(2) + "\n");
    out << "train_accuracy=" << Fmt(accuracy) << " train_bacc=" << Fmt(report.bacc)
        << "\n";
    return 0;
  }
};

// ------------------------------------------------------------------ predict

struct PredictCmd {
  std::string model;
  std::string input;
  std::string output_mask;
  std::string scores;
  std::string truth;
  std::string prefilter = "none";

  void Register(CLI::App* app) {
    app->add_option("--model", model)->required();
    app->add_option("--input,--image", input, "Image or CSV of inputs")->required();
    app->add_option("--output-mask", output_mask, "Predicted mask (image input)");
    app->add_option("--scores", scores, "CSV of index,label,score");
    app->add_option("--truth", truth, "Optional ground truth for a metric report");
    app->add_option("--prefilter", prefilter)->check(CLI::IsMember({"none", "median3"}));
  }

  int Run(std::ostream& out) {
    const AnyModel m = LoadAnyModel(model);
    InputData in = LoadInput(input, prefilter);
    if (!in.is_image && in.rows.cols() == m.input_dim() + 1 && in.header &&
        in.header->back() == "label") {
      in.rows.conservativeResize(Eigen::NoChange, m.input_dim());
    }
    CheckColumns(in.rows, m.input_dim(), input);
    std::vector<int> labels;
    Vector score;
    m.Score(in.rows, labels, score);
    if (!output_mask.empty()) {
      if (!in.is_image) {
        throw Error(ErrorCode::kUsage, "--output-mask needs an image input");
      }
      SaveMask(output_mask, Mask{labels, in.height, in.width});
    }
    if (!scores.empty()) {
      std::string text = "index,label,score\n";
      for (std::size_t i = 0; i < labels.size(); ++i) {
        text += std::to_string(i) + "," + std::to_string(labels[i]) + "," +
                Fmt(score[static_cast<Eigen::Index>(i)]) + "\n";
      }
      WriteFileAtomic(scores, text);
    }
    if (!truth.empty()) {
      const std::vector<int> t = LoadLabels(truth);
      const ConfusionCounts c = Accumulate({}, labels, t);
      const double accuracy =
          c.total() ? static_cast<double>(c.tp + c.tn) / c.total() : 0.0;
      out << "accuracy=" << Fmt(accuracy) << " bacc=" << Fmt(Metrics(c).bacc)
          << "\n";
    }
    std::size_t positive = 0;
    for (int l : labels) positive += l;
    out << "predicted " << labels.size() << " rows, " << positive
        << " positive\n";
    return 0;
  }
};

// ------------------------------------------------------------------ cluster

struct ClusterCmd {
  std::string input;
  std::string output;
  std::string truth;
  std::string anchor_method = "kmeans";
  std::string prefilter = "none";
  std::string config_file;
  std::size_t median_window = 0;
  UspecConfig cfg;
  MapOptions map;
  CLI::App* app = nullptr;

  void Register(CLI::App* a) {
    app = a;
    app->add_option("--input,--image", input, "Image or CSV of points")->required();
    app->add_option("--output", output, "Mask image or index,label CSV");
    app->add_option("--clusters", cfg.clusters, "c");
    app->add_option("--anchors", cfg.anchors, "p");
    app->add_option("--knn", cfg.knn, "k");
    app->add_option("--seed", cfg.seed);
    app->add_option("--anchor-method", anchor_method)
        ->check(CLI::IsMember({"kmeans", "random"}));
    app->add_option("--median-filter", median_window,
                    "Odd median postfilter window for image inputs (0 = off)");
    app->add_option("--truth", truth, "Reference mask: map clusters to classes and report metrics");
    app->add_option("--prefilter", prefilter)->check(CLI::IsMember({"none", "median3"}));
    app->add_option("--config", config_file, "JSON run config");
    map.Register(app);
  }

  bool Given(const char* name) const { return app->count(name) > 0; }

  void ApplyConfig() {
    if (config_file.empty()) return;
    const json j = ReadJsonFile(config_file);
    if (j.contains("seed") && !Given("--seed")) cfg.seed = j["seed"];
    if (j.contains("prefilter") && !Given("--prefilter")) prefilter = j["prefilter"];
    if (j.contains("cluster")) {
      const json& c = j["cluster"];
      if (c.contains("clusters") && !Given("--clusters")) cfg.clusters = c["clusters"];
      if (c.contains("anchors") && !Given("--anchors")) cfg.anchors = c["anchors"];
      if (c.contains("knn") && !Given("--knn")) cfg.knn = c["knn"];
    }
    if (j.contains("map_spec") && !j["map_spec"].is_null() && !Given("--map") &&
        !Given("--map-spec")) {
      const FeatureMapSpec s = FeatureMapSpecFromJson(j["map_spec"]);
      map.map = s.kind == MapKind::kPolynomial ? "poly" : "gauss";
      map.order = s.m;
      map.offset = s.b;
      map.sigma = s.sigma;
      map.variant = s.variant == GaussianVariant::kFull ? "full" : "half";
    }
  }

  int Run(std::ostream& out) {
    ApplyConfig();
    InputData in = LoadInput(input, prefilter);
    cfg.map_spec = map.Build(static_cast<int>(in.rows.cols()));
    cfg.anchor_method = anchor_method == "random" ? AnchorMethod::kUniformRandom
                                                  : AnchorMethod::kSubsampleKmeans;
    ClusterAssignment assignment = ClusterPixels(in.rows, cfg);
    std::vector<int> labels = assignment.labels;
    if (!truth.empty()) {
      labels = MapClustersToClasses(assignment, LoadLabels(truth));
    }
    if (median_window > 1) {
      if (!in.is_image) {
        throw Error(ErrorCode::kUsage, "--median-filter needs an image input");
      }
      labels = MedianFilter(labels, in.height, in.width, median_window);
    }
    if (!output.empty()) {
      if (IsCsv(output)) {
        std::string text = "index,label\n";
        for (std::size_t i = 0; i < labels.size(); ++i) {
          text += std::to_string(i) + "," + std::to_string(labels[i]) + "\n";
        }
        WriteFileAtomic(output, text);
      } else {
        if (!in.is_image) {
          throw Error(ErrorCode::kUsage, "mask output needs an image input");
        }
        SaveMask(output, Mask{labels, in.height, in.width});
      }
    }
    if (!truth.empty()) {
      const MetricReport r = Metrics(Accumulate({}, labels, LoadLabels(truth)));
      out << kMetricCsvHeader << "\n" << MetricCsvRow("uspec", r) << "\n";
    }
    out << "clustered " << labels.size() << " points into " << cfg.clusters
        << " clusters (p=" << cfg.anchors << ", k=" << cfg.knn << ")\n";
    return 0;
  }
};

// ------------------------------------------------------------------ explain

struct ExplainCmd {
  std::string model;
  std::string input;
  std::string background;
  std::string method = "marginal";
  std::string output;
  std::string json_out;
  std::size_t neighbors = 100;
  std::size_t max_rows = 0;
  std::size_t background_rows = 200;
  std::uint64_t seed = 42;

  void Register(CLI::App* app) {
    app->add_option("--model", model)->required();
    app->add_option("--input", input, "Image or CSV rows to explain")->required();
    app->add_option("--background", background,
                    "Image or CSV reference rows (defaults to the input)");
    app->add_option("--method", method)
        ->check(CLI::IsMember({"marginal", "conditional"}));
    app->add_option("--neighbors", neighbors);
    app->add_option("--max-rows", max_rows, "Explain at most this many rows (0 = all)");
    app->add_option("--background-rows", background_rows,
                    "Random subsample of the background (0 = all)");
    app->add_option("--seed", seed);
    app->add_option("--output", output, "Per-row explanation CSV");
    app->add_option("--json", json_out, "Explanation report JSON");
  }

  Matrix InputRows(const std::string& path, int d) {
    InputData in = LoadInput(path, "none");
    if (!in.is_image && in.rows.cols() == d + 1 && in.header &&
        in.header->back() == "label") {
      in.rows.conservativeResize(Eigen::NoChange, d);
    }
    CheckColumns(in.rows, d, path);
    return in.rows;
  }

  int Run(std::ostream& out) {
    const AnyModel any = LoadAnyModel(model);
    if (!any.single) {
      throw Error(ErrorCode::kUsage, "explain needs a single linear model");
    }
    const LinearModel& m = *any.single;
    Matrix rows = InputRows(input, m.input_dim);
    if (max_rows && static_cast<std::size_t>(rows.rows()) > max_rows) {
      rows.conservativeResize(static_cast<Eigen::Index>(max_rows), Eigen::NoChange);
    }
    Matrix bg = InputRows(background.empty() ? input : background, m.input_dim);
    if (background_rows && static_cast<std::size_t>(bg.rows()) > background_rows) {
      std::vector<Eigen::Index> idx(static_cast<std::size_t>(bg.rows()));
      std::iota(idx.begin(), idx.end(), Eigen::Index{0});
      std::mt19937_64 rng(seed);
      std::shuffle(idx.begin(), idx.end(), rng);
      Matrix sub(static_cast<Eigen::Index>(background_rows), bg.cols());
      for (std::size_t i = 0; i < background_rows; ++i) {
        sub.row(static_cast<Eigen::Index>(i)) = bg.row(idx[i]);
      }
      bg = std::move(sub);
    }
    const std::vector<std::string> names =
        ExplanationFeatureNames(m, DefaultInputNames(m.input_dim));
    Background background_set{MapRows(m, bg), names};
    const Matrix features = MapRows(m, rows);
    const FeatureSpaceLinear f = EffectiveLinear(m);

    std::vector<ShapleyExplanation> explanations;
    explanations.reserve(static_cast<std::size_t>(features.rows()));
    std::optional<ConditionalExplainer> conditional;
    if (method == "conditional") {
      ConditionalConfig cc;
      cc.neighbors = neighbors;
      conditional.emplace(f, background_set, cc);
    }
    for (Eigen::Index r = 0; r < features.rows(); ++r) {
      const std::span<const double> x(features.row(r).data(),
                                      static_cast<std::size_t>(features.cols()));
      explanations.push_back(conditional ? conditional->Explain(x)
                                         : ShapleyLinearMarginal(f, x, background_set));
    }
    if (!output.empty()) {
      std::string text = ExplanationCsvHeader(names) + "\n";
      for (std::size_t i = 0; i < explanations.size(); ++i) {
        text += ExplanationCsvRow(i, explanations[i]) + "\n";
      }
      WriteFileAtomic(output, text);
    }
    double mean_eff = 0.0;
    for (const auto& e : explanations) mean_eff += Efficiency(e);
    if (!explanations.empty()) mean_eff /= static_cast<double>(explanations.size());
    if (!json_out.empty()) {
      json report;
      report["feature_names"] = names;
      report["method"] = method;
      report["mean_efficiency"] = mean_eff;
      if (!explanations.empty()) {
        const Vector avg = AverageContributions(explanations);
        report["average_contributions"] =
            std::vector<double>(avg.data(), avg.data() + avg.size());
      }
      json list = json::array();
      for (const auto& e : explanations) list.push_back(ToJson(e));
      report["explanations"] = std::move(list);
      WriteFileAtomic(json_out, report.dump(2) + "\n");
    }
    out << "explained " << explanations.size() << " rows, mean_efficiency="
        << Fmt(mean_eff) << "\n";
    return 0;
  }
};

// --------------------------------------------------------------------- eval

struct EvalCmd {
  std::vector<std::string> preds;
  std::vector<std::string> truths;
  std::vector<std::string> compare;
  std::string name = "model";
  std::string output;
  std::string csv;
  bool append = false;
  bool welch = false;
  double alpha = 0.05;

  void Register(CLI::App* app) {
    app->add_option("--pred", preds, "Predicted mask(s) or label CSV(s)");
    app->add_option("--truth", truths, "Ground-truth mask(s), same order as --pred");
    app->add_option("--name", name, "Model name in the CSV row");
    app->add_option("--output", output, "JSON report");
    app->add_option("--csv", csv, "CSV report (model,se,sp,bacc,f1,ppv)");
    app->add_flag("--append", append, "Append the row to an existing --csv run file");
    app->add_option("--compare", compare,
                    "Two run files (CSV rows model,se,sp,bacc,f1,ppv) to t-test")
        ->expected(2);
    app->add_option("--alpha", alpha);
    app->add_flag("--welch", welch, "Welch instead of pooled variance");
  }

  int Run(std::ostream& out) {
    if (!compare.empty()) return Compare(out);
    if (preds.empty() || preds.size() != truths.size()) {
      throw Error(ErrorCode::kUsage, "give matching --pred and --truth lists");
    }
    ConfusionCounts pooled;
    json per_image = json::array();
    for (std::size_t i = 0; i < preds.size(); ++i) {
      const ConfusionCounts c = Accumulate({}, LoadLabels(preds[i]), LoadLabels(truths[i]));
      per_image.push_back({{"pred", preds[i]}, {"counts", ToJson(c)}});
      pooled += c;
    }
    const MetricReport r = Metrics(pooled);
    if (!output.empty()) {
      json j = ToJson(r);
      j["model"] = name;
      j["counts"] = ToJson(pooled);
      j["per_image"] = per_image;
      WriteFileAtomic(output, j.dump(2) + "\n");
    }
    const std::string row = MetricCsvRow(name, r);
    if (!csv.empty()) {
      if (append && std::filesystem::exists(csv)) {
        std::ofstream f(csv, std::ios::app);
        f << row << "\n";
      } else {
        WriteFileAtomic(csv, std::string(kMetricCsvHeader) + "\n" + row + "\n");
      }
    }
    out << kMetricCsvHeader << "\n" << row << "\n";
    return 0;
  }

  int Compare(std::ostream& out) {
    const CsvTable a = ReadRunFile(compare[0]);
    const CsvTable b = ReadRunFile(compare[1]);
    static const char* kNames[] = {"se", "sp", "bacc", "f1", "ppv"};
    out << "metric,mean_a,mean_b,t,p,reject\n";
    for (Eigen::Index c = 0; c < 5; ++c) {
      const Vector ca = a.values.col(c);
      const Vector cb = b.values.col(c);
      const TTestResult t = TTest2(AsSpan(ca), AsSpan(cb), alpha,
                                   welch ? TTestKind::kWelch : TTestKind::kPooled);
      out << kNames[c] << "," << Fmt(ca.mean()) << "," << Fmt(cb.mean()) << ","
          << Fmt(t.t) << "," << Fmt(t.p) << "," << (t.reject ? 1 : 0) << "\n";
    }
    return 0;
  }

  // Drops the leading model-name column of a run file.
  static CsvTable ReadRunFile(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kFormat, "cannot open " + path);
    std::string line;
    std::vector<std::array<double, 5>> rows;
    while (std::getline(in, line)) {
      if (line.empty() || line.rfind("model,", 0) == 0) continue;
      std::stringstream ss(line);
      std::string cell;
      std::getline(ss, cell, ',');
      std::array<double, 5> v{};
      for (auto& x : v) {
        if (!std::getline(ss, cell, ',')) {
          throw Error(ErrorCode::kFormat, path + ": short row");
        }
        try {
          x = std::stod(cell);
        } catch (const std::exception&) {
          throw Error(ErrorCode::kFormat, path + ": bad number " + cell);
        }
      }
      rows.push_back(v);
    }
    CsvTable t;
    t.values.resize(static_cast<Eigen::Index>(rows.size()), 5);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (Eigen::Index c = 0; c < 5; ++c) {
        t.values(static_cast<Eigen::Index>(r), c) = rows[r][static_cast<std::size_t>(c)];
      }
    }
    return t;
  }
};

// ------------------------------------------------------------- kernel-error

struct KernelErrorCmd {
  double sigma = 0.7071;
  std::vector<int> orders{2, 3, 4, 5};
  std::size_t pairs = 1000;
  int dim = 3;
  std::uint64_t seed = 42;
  std::string variant = "half";
  std::string output;

  void Register(CLI::App* app) {
    app->add_option("--sigma", sigma);
    app->add_option("--orders", orders, "Comma-separated orders")->delimiter(',');
    app->add_option("--pairs", pairs, "Number of sampled point pairs in [0,1]^d");
    app->add_option("--dim", dim, "Input dimension d");
    app->add_option("--seed", seed);
    app->add_option("--variant", variant)->check(CLI::IsMember({"half", "full"}));
    app->add_option("--output", output, "CSV path (stdout when omitted)");
  }

  int Run(std::ostream& out) {
    if (pairs < 1) throw Error(ErrorCode::kParameter, "--pairs must be >= 1");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Matrix xs(static_cast<Eigen::Index>(pairs), dim);
    Matrix ys(static_cast<Eigen::Index>(pairs), dim);
    for (Eigen::Index i = 0; i < xs.rows(); ++i) {
      for (int c = 0; c < dim; ++c) xs(i, c) = unit(rng);
      for (int c = 0; c < dim; ++c) ys(i, c) = unit(rng);
    }
    std::string text = "m,max_error,mean_error\n";
    for (int m : orders) {
      const FeatureMapSpec spec = FeatureMapSpec::Gaussian(
          dim, m, sigma,
          variant == "full" ? GaussianVariant::kFull : GaussianVariant::kHalf);
      const FeatureMap fm(spec);
      const Matrix px = fm.Transform(xs);
      const Matrix py = fm.Transform(ys);
      double max_err = 0.0;
      double sum = 0.0;
      for (Eigen::Index i = 0; i < xs.rows(); ++i) {
        const double k = KernelEval(spec, {xs.row(i).data(), static_cast<std::size_t>(dim)},
                                    {ys.row(i).data(), static_cast<std::size_t>(dim)});
        const double e = std::abs(k - px.row(i).dot(py.row(i)));
        max_err = std::max(max_err, e);
        sum += e;
      }
      text += std::to_string(m) + "," + Fmt(max_err) + "," +
              Fmt(sum / static_cast<double>(pairs)) + "\n";
    }
    if (output.empty()) {
      out << text;
    } else {
      WriteFileAtomic(output, text);
      out << "wrote " << output << "\n";
    }
    return 0;
  }
};

}  // namespace

int RunCli(int argc, const char* const* argv, std::ostream& out,
           std::ostream& err) {
  CLI::App app{"efmkit: explicit feature maps, linear models, clustering and "
               "explanations for low-dimensional data"};
  app.require_subcommand(1);

  TransformCmd transform;
  SynthCmd synth;
  TrainCmd train;
  PredictCmd predict;
  ClusterCmd cluster;
  ExplainCmd explain;
  EvalCmd eval;
  KernelErrorCmd kernel_error;

  auto* s_transform = app.add_subcommand("transform", "Map rows through a feature map");
  auto* s_train = app.add_subcommand("train", "Train a linear model or ensemble");
  auto* s_predict = app.add_subcommand("predict", "Apply a trained model");
  auto* s_cluster = app.add_subcommand("cluster", "Anchor-based spectral clustering");
  auto* s_explain = app.add_subcommand("explain", "Shapley explanations of a linear model");
  auto* s_eval = app.add_subcommand("eval", "Micro metrics and run comparisons");
  auto* s_kerr = app.add_subcommand("kernel-error",
                                    "Gaussian kernel approximation error by order");
  auto* s_synth = app.add_subcommand("synth", "Write a synthetic labeled CSV");
  transform.Register(s_transform);
  train.Register(s_train);
  predict.Register(s_predict);
  cluster.Register(s_cluster);
  explain.Register(s_explain);
  eval.Register(s_eval);
  kernel_error.Register(s_kerr);
  synth.Register(s_synth);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return 0;
    }
    err << "usage error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (s_transform->parsed()) return transform.Run(out);
    if (s_train->parsed()) return train.Run(out, err);
    if (s_predict->parsed()) return predict.Run(out);
    if (s_cluster->parsed()) return cluster.Run(out);
    if (s_explain->parsed()) return explain.Run(out);
    if (s_eval->parsed()) return eval.Run(out);
    if (s_kerr->parsed()) return kernel_error.Run(out);
    if (s_synth->parsed()) return synth.Run(out);
  } catch (const Error& e) {
    err << e.what() << "\n";
    return e.code() == ErrorCode::kUsage ? 2 : 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  err << "usage error: no subcommand\n";
  return 2;
}

int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("efmkit");
  for (const auto& a : args) argv.push_back(a.c_str());
  return RunCli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace efmkit
