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


#include <filesystem>
#include <fstream>
#include <random>
#include <regex>
#include <sstream>

#include "efmkit/cli.h"
#include "efmkit/dataset.h"
#include "efmkit/image_io.h"
#include "nlohmann/json.hpp"
#include "test_util.h"

namespace efmkit {
namespace {

using ::efmkit::testing::TempDir;

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult Cli(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = RunCli(args, out, err);
  return {code, out.str(), err.str()};
}

double Field(const std::string& text, const std::string& key) {
  const std::regex re(key + "=([-0-9.eE+]+)");
  std::smatch m;
  if (!std::regex_search(text, m, re)) {
    ADD_FAILURE() << "no " << key << " in: " << text;
    return -1;
  }
  return std::stod(m[1]);
}

std::string ReadFile(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// RGB image whose positive class is a ball in color space, so a quadratic
// map separates it and a linear model cannot. On an image this small the
// default rate converges slowly, so training uses a larger rate.
void WriteColorBall(const std::filesystem::path& dir, std::size_t h, std::size_t w,
                    std::uint64_t seed) {
  PixelDataset img;
  img.height = h;
  img.width = w;
  img.rows = ::efmkit::testing::UniformMatrix(static_cast<Eigen::Index>(h * w), 3, 0, 1, seed);
  Mask mask{std::vector<int>(h * w), h, w};
  for (Eigen::Index i = 0; i < img.rows.rows(); ++i) {
    const double r2 = (img.rows.row(i).array() - 0.5).square().sum();
    mask.labels[static_cast<std::size_t>(i)] = r2 < 0.12 ? 1 : 0;
  }
  SaveImage((dir / "img.png").string(), img, 16);
  SaveMask((dir / "mask.png").string(), mask);
}

TEST(CliTest, SynthTrainPredictRoundTrip) {
  const auto dir = TempDir();
  const auto data = (dir / "ann.csv").string();
  const auto model = (dir / "model.json").string();
  ASSERT_EQ(Cli({"synth", "--kind", "annulus", "--n", "2000", "--seed", "5", "--output", data}).code, 0);
  EXPECT_EQ(ReadFile(data).substr(0, 12), "x1,x2,label\n");
  const CliResult train = Cli({"train", "--csv", data, "--map", "poly", "--order", "2",
                               "--epochs", "2", "--output", model});
  ASSERT_EQ(train.code, 0) << train.err;
  const double train_acc = Field(train.out, "train_accuracy");
  EXPECT_GE(train_acc, 0.99);

  const CliResult pred = Cli({"predict", "--model", model, "--input", data, "--truth", data,
                              "--scores", (dir / "s1.csv").string()});
  ASSERT_EQ(pred.code, 0) << pred.err;
  EXPECT_GE(Field(pred.out, "accuracy"), train_acc);

  // Re-serializing the loaded model leaves predictions bit-identical.
  const auto j = nlohmann::json::parse(ReadFile(model));
  const auto model2 = (dir / "model2.json").string();
  std::ofstream(model2) << j.dump();
  ASSERT_EQ(Cli({"predict", "--model", model2, "--input", data, "--scores",
                 (dir / "s2.csv").string()}).code, 0);
  EXPECT_EQ(ReadFile(dir / "s1.csv"), ReadFile(dir / "s2.csv"));
}

TEST(CliTest, ImageTrainPredictClusterEval) {
  const auto dir = TempDir();
  WriteColorBall(dir, 150, 100, 11);
  const auto img = (dir / "img.png").string();
  const auto mask = (dir / "mask.png").string();
  const CliResult lin = Cli({"train", "--image", img, "--mask", mask, "--map", "none",
                             "--output", (dir / "lin.json").string()});
  ASSERT_EQ(lin.code, 0) << lin.err;
  const CliResult quad = Cli({"train", "--image", img, "--mask", mask, "--map", "poly",
                              "--epochs", "10", "--rate", "1", "--output", (dir / "quad.json").string()});
  ASSERT_EQ(quad.code, 0) << quad.err;
  EXPECT_GT(Field(quad.out, "train_bacc"), Field(lin.out, "train_bacc") + 0.1);
  EXPECT_GE(Field(quad.out, "train_bacc"), 0.95);

  const auto pred_mask = (dir / "pred.png").string();
  const CliResult pred = Cli({"predict", "--model", (dir / "quad.json").string(), "--image", img,
                              "--output-mask", pred_mask, "--truth", mask});
  ASSERT_EQ(pred.code, 0) << pred.err;
  EXPECT_GE(Field(pred.out, "accuracy"), Field(quad.out, "train_accuracy"));
  const Mask pm = LoadMask(pred_mask);
  EXPECT_EQ(pm.height, 150u);
  EXPECT_EQ(pm.width, 100u);

  const auto runs = (dir / "runs.csv").string();
  const CliResult ev = Cli({"eval", "--pred", pred_mask, "--truth", mask, "--name", "q",
                            "--csv", runs, "--output", (dir / "ev.json").string()});
  ASSERT_EQ(ev.code, 0) << ev.err;
  EXPECT_EQ(ReadFile(runs).substr(0, 23), "model,se,sp,bacc,f1,ppv");
  const auto report = nlohmann::json::parse(ReadFile(dir / "ev.json"));
  EXPECT_NEAR(report["bacc"].get<double>(), Field(pred.out, "bacc"), 1e-6);

  const auto cmask = (dir / "clusters.png").string();
  const CliResult cl = Cli({"cluster", "--image", img, "--clusters", "2", "--anchors", "75",
                            "--knn", "3", "--output", cmask});
  ASSERT_EQ(cl.code, 0) << cl.err;
  EXPECT_NE(cl.out.find("p=75, k=3"), std::string::npos);
  const Mask cm = LoadMask(cmask);
  EXPECT_EQ(cm.labels.size(), 15000u);
}

TEST(CliTest, EnsembleTrainAndConfig) {
  const auto dir = TempDir();
  std::vector<std::string> args = {"train", "--ensemble", "--grid", "poly", "--output",
                                   (dir / "ens.json").string()};
  for (int s = 0; s < 3; ++s) {
    const auto p = (dir / ("d" + std::to_string(s) + ".csv")).string();
    ASSERT_EQ(Cli({"synth", "--kind", "xor", "--n", "600", "--seed", std::to_string(s),
                   "--output", p}).code, 0);
    args.push_back("--csv");
    args.push_back(p);
  }
  const CliResult r = Cli(args);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(ReadFile(dir / "ens.json"));
  EXPECT_EQ(j["members"].size(), 3u);
  const CliResult p = Cli({"predict", "--model", (dir / "ens.json").string(), "--input",
                           (dir / "d0.csv").string(), "--truth", (dir / "d0.csv").string()});
  ASSERT_EQ(p.code, 0) << p.err;
  EXPECT_GE(Field(p.out, "accuracy"), 0.95);

  // Config values apply unless overridden by an explicit flag.
  const auto cfg = (dir / "cfg.json").string();
  std::ofstream(cfg) << R"({"seed": 9, "map_spec": {"kind": "polynomial", "m": 2, "b": 1, "d": 2},
                           "train": {"epochs": 2, "loss": "hinge"}})";
  ASSERT_EQ(Cli({"train", "--csv", (dir / "d0.csv").string(), "--config", cfg, "--epochs", "1",
                 "--output", (dir / "m.json").string()}).code, 0);
  const auto m = nlohmann::json::parse(ReadFile(dir / "m.json"));
  EXPECT_EQ(m["loss"], "hinge");
  EXPECT_EQ(m["train_meta"]["seed"], 9);
  EXPECT_EQ(m["train_meta"]["epochs"], 1);
  EXPECT_FALSE(m["map_spec"].is_null());
}

TEST(CliTest, KernelErrorDecreases) {
  const auto dir = TempDir();
  const auto out = (dir / "k.csv").string();
  ASSERT_EQ(Cli({"kernel-error", "--pairs", "200", "--output", out}).code, 0);
  const CsvTable t = ReadCsv(out);
  ASSERT_EQ(t.values.rows(), 4);
  for (Eigen::Index i = 1; i < 4; ++i) {
    EXPECT_LT(t.values(i, 1), t.values(i - 1, 1));
    EXPECT_LT(t.values(i, 2), t.values(i - 1, 2));
  }
}

TEST(CliTest, TransformAndExplain) {
  const auto dir = TempDir();
  const auto data = (dir / "b.csv").string();
  ASSERT_EQ(Cli({"synth", "--kind", "blobs", "--n", "200", "--output", data}).code, 0);
  std::ofstream(dir / "rgb.csv") << "R,G,B\n0.1,0.2,0.3\n0.4,0.5,0.6\n";
  const auto mapped = (dir / "m.csv").string();
  ASSERT_EQ(Cli({"transform", "--input", (dir / "rgb.csv").string(), "--output", mapped,
                 "--map", "poly", "--order", "2"}).code, 0);
  const CsvTable t = ReadCsv(mapped);
  ASSERT_TRUE(t.header.has_value());
  EXPECT_EQ(*t.header, (std::vector<std::string>{"ONE", "B", "G", "R", "B^2", "GB", "G^2",
                                                  "RB", "RG", "R^2"}));
  EXPECT_EQ(t.values.rows(), 2);

  const auto model = (dir / "model.json").string();
  ASSERT_EQ(Cli({"train", "--csv", data, "--map", "poly", "--output", model}).code, 0);
  for (const char* method : {"marginal", "conditional"}) {
    const auto json_out = (dir / (std::string(method) + ".json")).string();
    const CliResult e = Cli({"explain", "--model", model, "--input", data, "--background", data,
                             "--method", method, "--max-rows", "20", "--json", json_out,
                             "--output", (dir / "e.csv").string()});
    ASSERT_EQ(e.code, 0) << e.err;
    const auto j = nlohmann::json::parse(ReadFile(json_out));
    EXPECT_EQ(j["explanations"].size(), 20u);
    for (const auto& ex : j["explanations"]) {
      EXPECT_NEAR(ex["efficiency"].get<double>(),
                  ex["prediction"].get<double>() - ex["a0"].get<double>(), 1e-9);
    }
  }
}

TEST(CliTest, CompareRunFiles) {
  const auto dir = TempDir();
  std::ofstream(dir / "a.csv") << "model,se,sp,bacc,f1,ppv\n"
                               << "a,0.9,0.8,1,0.5,0.5\na,0.8,0.8,2,0.5,0.5\na,0.7,0.8,3,0.5,0.6\n"
                               << "a,0.8,0.8,4,0.5,0.5\na,0.9,0.8,5,0.5,0.5\n";
  std::ofstream(dir / "b.csv") << "model,se,sp,bacc,f1,ppv\n"
                               << "b,0.9,0.8,3,0.5,0.5\nb,0.8,0.8,4,0.5,0.5\nb,0.7,0.8,5,0.5,0.6\n"
                               << "b,0.8,0.8,6,0.5,0.5\nb,0.9,0.8,7,0.5,0.5\n";
  const CliResult r = Cli({"eval", "--compare", (dir / "a.csv").string(), (dir / "b.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.substr(0, 29), std::string("metric,mean_a,mean_b,t,p,reject").substr(0, 29));
  const std::regex bacc_re("bacc,3,5,-2,([0-9.]+),0");
  std::smatch m;
  ASSERT_TRUE(std::regex_search(r.out, m, bacc_re)) << r.out;
  EXPECT_NEAR(std::stod(m[1]), 0.0805162, 1e-6);
}

TEST(CliTest, ExitCodes) {
  const auto dir = TempDir();
  EXPECT_EQ(Cli({}).code, 2);
  EXPECT_EQ(Cli({"frobnicate"}).code, 2);
  EXPECT_EQ(Cli({"train", "--csv", "x.csv"}).code, 2);
  EXPECT_EQ(Cli({"synth", "--kind", "blobs", "--output", (dir / "o.csv").string(), "--n", "abc"}).code, 2);
  EXPECT_EQ(Cli({"--help"}).code, 0);
  EXPECT_EQ(Cli({"train", "--csv", (dir / "missing.csv").string(), "--output",
                 (dir / "m.json").string()}).code, 1);
  EXPECT_EQ(Cli({"synth", "--kind", "moons", "--output", (dir / "o.csv").string()}).code, 1);
  std::ofstream(dir / "bad.json") << "{not json";
  const CliResult r = Cli({"predict", "--model", (dir / "bad.json").string(), "--input",
                           (dir / "o.csv").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_FALSE(r.err.empty());
}

}  // namespace
}  // namespace efmkit
