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


#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "efmkit/dataset.h"
#include "efmkit/image_io.h"
#include "efmkit/linear_model.h"
#include "efmkit/metrics.h"
#include "test_util.h"

namespace efmkit {
namespace {

using ::efmkit::testing::TempDir;

Raster MakeRaster(std::size_t h, std::size_t w, std::size_t ch, int depth,
                  std::uint64_t seed) {
  Raster r{h, w, ch, depth, std::vector<std::uint16_t>(h * w * ch)};
  std::mt19937_64 rng(seed);
  for (auto& s : r.samples) s = static_cast<std::uint16_t>(rng() % (r.max_value() + 1));
  return r;
}

double Accuracy(const LinearModel& m, const LabeledBatch& d) {
  const Vector s = DecisionBatch(m, d.rows);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < d.size(); ++i) ok += (s[static_cast<Eigen::Index>(i)] > 0) == (d.labels[i] == 1);
  return static_cast<double>(ok) / static_cast<double>(d.size());
}

TEST(RasterTest, RoundTripAllFormats) {
  const auto dir = TempDir();
  for (const char* ext : {".png", ".ppm", ".pgm"}) {
    for (int depth : {8, 16}) {
      const std::size_t ch = std::string(ext) == ".pgm" ? 1 : 3;
      const Raster r = MakeRaster(7, 5, ch, depth, static_cast<std::uint64_t>(depth));
      const std::string path = (dir / (std::string("r") + std::to_string(depth) + ext)).string();
      WriteRaster(path, r);
      const Raster back = ReadRaster(path);
      EXPECT_EQ(back.height, 7u);
      EXPECT_EQ(back.width, 5u);
      EXPECT_EQ(back.channels, ch);
      EXPECT_EQ(back.bit_depth, depth);
      EXPECT_EQ(back.samples, r.samples) << path;
      EXPECT_FALSE(std::filesystem::exists(path + ".tmp"));
    }
  }
}

TEST(RasterTest, AsciiPnmAndOddMaxval) {
  const auto dir = TempDir();
  const auto p3 = (dir / "a.ppm").string();
  std::ofstream(p3) << "P3\n# comment\n2 1\n100\n100 50 0  0 0 100\n";
  const Raster r = ReadRaster(p3);
  EXPECT_EQ(r.width, 2u);
  EXPECT_EQ(r.channels, 3u);
  const PixelDataset img = LoadImage(p3);
  EXPECT_NEAR(img.rows(0, 0), 1.0, 1e-9);
  EXPECT_NEAR(img.rows(0, 1), 0.5, 1e-2);
  EXPECT_NEAR(img.rows(1, 2), 1.0, 1e-9);
  const auto bad = (dir / "bad.ppm").string();
  std::ofstream(bad) << "hello";
  EXPECT_EFMKIT_ERROR(ReadRaster(bad), ErrorCode::kFormat);
  EXPECT_EFMKIT_ERROR(ReadRaster((dir / "missing.png").string()), ErrorCode::kFormat);
}

TEST(LoadImageTest, WhiteImageAndSixteenBitMax) {
  const auto dir = TempDir();
  Raster white{2, 2, 3, 8, std::vector<std::uint16_t>(12, 255)};
  WriteRaster((dir / "w.png").string(), white);
  const PixelDataset img = LoadImage((dir / "w.png").string());
  ASSERT_EQ(img.rows.rows(), 4);
  EXPECT_TRUE(img.rows == Matrix::Ones(4, 3));
  Raster deep{1, 1, 3, 16, {65535, 0, 32768}};
  WriteRaster((dir / "d.png").string(), deep);
  const PixelDataset d = LoadImage((dir / "d.png").string());
  EXPECT_EQ(d.rows(0, 0), 1.0);
  EXPECT_EQ(d.rows(0, 1), 0.0);
  EXPECT_NEAR(d.rows(0, 2), 32768.0 / 65535.0, 1e-15);
}

TEST(LoadImageTest, RgbaDropsAlphaAndGrayIsRejected) {
  const auto dir = TempDir();
  Raster rgba{1, 2, 4, 8, {255, 0, 0, 7, 0, 255, 0, 255}};
  WriteRaster((dir / "a.png").string(), rgba);
  const PixelDataset img = LoadImage((dir / "a.png").string());
  EXPECT_EQ(img.rows.cols(), 3);
  EXPECT_EQ(img.rows(1, 1), 1.0);
  WriteRaster((dir / "g.png").string(), MakeRaster(2, 2, 1, 8, 1));
  EXPECT_EFMKIT_ERROR(LoadImage((dir / "g.png").string()), ErrorCode::kFormat);
}

TEST(LoadImageTest, SaveLoadWithinQuantization) {
  const auto dir = TempDir();
  PixelDataset img;
  img.height = 4;
  img.width = 6;
  img.rows = ::efmkit::testing::UniformMatrix(24, 3, 0, 1, 3);
  SaveImage((dir / "x.png").string(), img, 16);
  const PixelDataset back = LoadImage((dir / "x.png").string());
  EXPECT_LE((back.rows - img.rows).cwiseAbs().maxCoeff(), 0.5 / 65535 + 1e-12);
  EXPECT_GE(back.rows.minCoeff(), 0.0);
  EXPECT_LE(back.rows.maxCoeff(), 1.0);
}

TEST(MaskTest, LoadRules) {
  const auto dir = TempDir();
  WriteRaster((dir / "z.png").string(), Raster{2, 3, 1, 8, std::vector<std::uint16_t>(6, 0)});
  EXPECT_EQ(LoadMask((dir / "z.png").string()).labels, std::vector<int>(6, 0));
  WriteRaster((dir / "m.png").string(), Raster{2, 2, 1, 8, {0, 255, 255, 0}});
  const Mask m = LoadMask((dir / "m.png").string());
  EXPECT_EQ(m.labels, (std::vector<int>{0, 1, 1, 0}));
  EXPECT_EQ(m.height, 2u);
  WriteRaster((dir / "g.png").string(), Raster{1, 2, 1, 8, {0, 128}});
  EXPECT_EFMKIT_ERROR(LoadMask((dir / "g.png").string()), ErrorCode::kAmbiguousMask);
  WriteRaster((dir / "c.png").string(), MakeRaster(2, 2, 3, 8, 2));
  EXPECT_EFMKIT_ERROR(LoadMask((dir / "c.png").string()), ErrorCode::kFormat);
  SaveMask((dir / "s.png").string(), Mask{{1, 0, 0, 1, 1, 1}, 2, 3});
  EXPECT_EQ(LoadMask((dir / "s.png").string()).labels, (std::vector<int>{1, 0, 0, 1, 1, 1}));
}

TEST(MedianPrefilterTest, RemovesSpeckle) {
  PixelDataset img;
  img.height = 5;
  img.width = 5;
  img.rows = Matrix::Constant(25, 3, 0.25);
  img.rows.row(12).setConstant(1.0);
  const PixelDataset f = MedianPrefilter(img);
  EXPECT_TRUE(f.rows == Matrix::Constant(25, 3, 0.25));
}

TEST(PatchStreamTest, TilingRules) {
  auto count = [](std::size_t h, std::size_t w) {
    PixelDataset img;
    img.height = h;
    img.width = w;
    img.rows = Matrix::Zero(static_cast<Eigen::Index>(h * w), 3);
    for (Eigen::Index i = 0; i < img.rows.rows(); ++i) img.rows(i, 0) = static_cast<double>(i);
    Mask mask{std::vector<int>(h * w, 0), h, w};
    for (std::size_t i = 0; i < h * w; i += 3) mask.labels[i] = 1;
    std::vector<std::size_t> sizes;
    std::vector<double> ids;
    std::vector<int> labels;
    PatchStream(img, mask)([&](const LabeledBatch& b) {
      sizes.push_back(b.size());
      for (Eigen::Index r = 0; r < b.rows.rows(); ++r) {
        ids.push_back(b.rows(r, 0));
        labels.push_back(b.labels[static_cast<std::size_t>(r)]);
      }
    });
    // Every pixel appears once, with its own label.
    std::vector<double> sorted = ids;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) EXPECT_EQ(sorted[i], static_cast<double>(i));
    for (std::size_t i = 0; i < ids.size(); ++i) {
      EXPECT_EQ(labels[i], mask.labels[static_cast<std::size_t>(ids[i])]);
    }
    return std::make_pair(sizes, ids);
  };
  EXPECT_EQ(count(100, 100).first, std::vector<std::size_t>{10000});
  const auto tall = count(150, 100);
  EXPECT_EQ(tall.first, (std::vector<std::size_t>{10000, 5000}));
  // Row-major tiles stacked vertically reproduce the pixel order.
  for (std::size_t i = 0; i < tall.second.size(); ++i) EXPECT_EQ(tall.second[i], static_cast<double>(i));
  EXPECT_EQ(count(100, 250).first, (std::vector<std::size_t>{10000, 10000, 5000}));

  PixelDataset img;
  img.height = 2;
  img.width = 2;
  img.rows = Matrix::Zero(4, 3);
  EXPECT_EFMKIT_ERROR(PatchStream(img, Mask{std::vector<int>(6, 0), 2, 3}), ErrorCode::kShape);
  EXPECT_EFMKIT_ERROR(PatchStream(img, Mask{std::vector<int>(4, 0), 2, 2}, 0),
                      ErrorCode::kParameter);
}

TEST(SynthTest, DeterminismAndKinds) {
  for (const char* kind : {"blobs", "annulus", "xor"}) {
    const auto a = SynthGenerate(ParseSynthKind(kind), 400, 0.1, 7);
    const auto b = SynthGenerate(ParseSynthKind(kind), 400, 0.1, 7);
    EXPECT_TRUE(a.rows == b.rows);
    EXPECT_EQ(a.labels, b.labels);
    EXPECT_EQ(std::count(a.labels.begin(), a.labels.end(), 1), 200);
  }
  EXPECT_EFMKIT_ERROR(ParseSynthKind("moons"), ErrorCode::kParameter);
  EXPECT_EFMKIT_ERROR(SynthGenerate(SynthKind::kBlobs, 3, 0.1, 1), ErrorCode::kParameter);
}

TEST(SynthTest, SeparabilityByConstruction) {
  TrainConfig cfg;
  cfg.epochs = 3;
  const auto blobs = SynthGenerate(SynthKind::kBlobs, 2000, 0.05, 3);
  EXPECT_EQ(Accuracy(TrainStreaming(ChunkStream(blobs, 500), Loss::kLogistic, 2, std::nullopt, cfg),
                     blobs),
            1.0);
  const auto xr = SynthGenerate(SynthKind::kXor, 2000, 0.05, 3);
  EXPECT_LE(Accuracy(TrainStreaming(ChunkStream(xr, 500), Loss::kLogistic, 2, std::nullopt, cfg), xr),
            0.8);
  EXPECT_GE(Accuracy(TrainStreaming(ChunkStream(xr, 500), Loss::kLogistic, 2,
                                    FeatureMapSpec::Polynomial(2, 2, 1), cfg),
                     xr),
            0.99);
  const auto ann = SynthGenerate(SynthKind::kAnnulus, 2000, 0.0, 3);
  EXPECT_LE(Accuracy(TrainStreaming(ChunkStream(ann, 500), Loss::kLogistic, 2, std::nullopt, cfg), ann),
            0.7);
  EXPECT_GE(Accuracy(TrainStreaming(ChunkStream(ann, 500), Loss::kLogistic, 2,
                                    FeatureMapSpec::Polynomial(2, 2, 1), cfg),
                     ann),
            0.99);
}

TEST(CsvTest, RoundTripAndHeader) {
  const auto dir = TempDir();
  CsvTable t;
  t.header = std::vector<std::string>{"x1", "x2", "label"};
  t.values = ::efmkit::testing::UniformMatrix(20, 3, -1, 1, 4);
  for (Eigen::Index i = 0; i < 20; ++i) t.values(i, 2) = static_cast<double>(i % 2);
  const auto path = (dir / "t.csv").string();
  WriteCsv(path, t);
  const CsvTable back = ReadCsv(path);
  EXPECT_EQ(back.header, t.header);
  EXPECT_TRUE(back.values == t.values);
  const LabeledBatch lb = LabeledFromTable(back);
  EXPECT_EQ(lb.rows.cols(), 2);
  EXPECT_EQ(lb.labels[3], 1);

  std::ofstream(dir / "noheader.csv") << "1,2\n3,4\n";
  const CsvTable nh = ReadCsv((dir / "noheader.csv").string());
  EXPECT_FALSE(nh.header.has_value());
  EXPECT_EQ(nh.values.rows(), 2);
  std::ofstream(dir / "ragged.csv") << "1,2\n3\n";
  EXPECT_EFMKIT_ERROR(ReadCsv((dir / "ragged.csv").string()), ErrorCode::kShape);
  std::ofstream(dir / "label.csv") << "label,a\n2,1\n";
  EXPECT_EFMKIT_ERROR(LabeledFromTable(ReadCsv((dir / "label.csv").string())), ErrorCode::kLabel);
}

}  // namespace
}  // namespace efmkit
