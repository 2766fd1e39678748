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


#include "efmkit/uspec.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include "efmkit/dataset.h"
#include "test_util.h"

namespace efmkit {
namespace {

using ::efmkit::testing::UniformMatrix;

Matrix Blobs(const std::vector<std::pair<double, double>>& centers, int per_blob,
             double spread, std::uint64_t seed, std::vector<int>* truth) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, spread);
  Matrix out(static_cast<Eigen::Index>(centers.size()) * per_blob, 2);
  truth->clear();
  Eigen::Index r = 0;
  for (std::size_t c = 0; c < centers.size(); ++c) {
    for (int i = 0; i < per_blob; ++i, ++r) {
      out(r, 0) = centers[c].first + g(rng);
      out(r, 1) = centers[c].second + g(rng);
      truth->push_back(static_cast<int>(c));
    }
  }
  return out;
}

// Dense normalized spectral clustering on the full N x N Gaussian affinity,
// with the bandwidth set to the mean distance to the farthest point.
std::vector<int> DenseSpectralOracle(const Matrix& x, std::size_t c,
                                     std::uint64_t seed) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd dist(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) dist(i, j) = (x.row(i) - x.row(j)).norm();
  }
  const double h = dist.rowwise().maxCoeff().mean();
  const Eigen::MatrixXd w = (-dist.array().square() / (2 * h * h)).exp().matrix();
  const Eigen::VectorXd inv_sqrt_deg = w.rowwise().sum().cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd m = inv_sqrt_deg.asDiagonal() * w * inv_sqrt_deg.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  Matrix embed(n, static_cast<Eigen::Index>(c));
  for (std::size_t j = 0; j < c; ++j) {
    embed.col(static_cast<Eigen::Index>(j)) = eig.eigenvectors().col(n - 1 - static_cast<Eigen::Index>(j));
  }
  for (Eigen::Index i = 0; i < n; ++i) embed.row(i).normalize();
  return KMeans(embed, c, seed).labels;
}

TEST(KMeansTest, TrivialCases) {
  const Matrix x = UniformMatrix(20, 2, 0, 1, 1);
  const auto one = KMeans(x, 1, 3);
  EXPECT_EQ(one.labels, std::vector<int>(20, 0));
  Matrix two(2, 2);
  two << 0, 0, 5, 5;
  const auto t = KMeans(two, 2, 7);
  EXPECT_NE(t.labels[0], t.labels[1]);
  EXPECT_EFMKIT_ERROR(KMeans(two, 3, 1), ErrorCode::kParameter);
}

TEST(KMeansTest, ThreeBlobsAndDeterminism) {
  std::vector<int> truth;
  const Matrix x = Blobs({{0, 0}, {6, 0}, {0, 6}}, 100, 0.5, 4, &truth);
  const KMeansResult a = KMeansFit(x, 3, 11);
  EXPECT_DOUBLE_EQ(AdjustedRandIndex(a.assignment.labels, truth), 1.0);
  const KMeansResult b = KMeansFit(x, 3, 11);
  EXPECT_EQ(a.assignment.labels, b.assignment.labels);
  EXPECT_TRUE(a.centers == b.centers);
  for (int l : a.assignment.labels) EXPECT_LT(l, 3);
}

TEST(SelectAnchorsTest, AllPointsWhenPEqualsN) {
  const Matrix x = UniformMatrix(30, 3, 0, 1, 2);
  const AnchorSet s = SelectAnchors(x, 30, AnchorMethod::kUniformRandom, 5);
  ASSERT_EQ(s.size(), 30u);
  std::vector<bool> seen(30, false);
  for (Eigen::Index a = 0; a < 30; ++a) {
    for (Eigen::Index i = 0; i < 30; ++i) {
      if (s.anchors.row(a) == x.row(i)) seen[static_cast<std::size_t>(i)] = true;
    }
  }
  EXPECT_EQ(std::count(seen.begin(), seen.end(), true), 30);
  EXPECT_EFMKIT_ERROR(SelectAnchors(x, 31, AnchorMethod::kUniformRandom, 5),
                      ErrorCode::kParameter);
}

TEST(SelectAnchorsTest, KmeansAnchorsSplitSeparatedBlobs) {
  std::vector<int> truth;
  const Matrix x = Blobs({{0, 0}, {20, 20}}, 200, 0.5, 9, &truth);
  const AnchorSet s = SelectAnchors(x, 2, AnchorMethod::kSubsampleKmeans, 3);
  ASSERT_EQ(s.size(), 2u);
  const double within = 0.5 * 6;
  const double between = (s.anchors.row(0) - s.anchors.row(1)).norm();
  EXPECT_GT(between, 20.0);
  for (Eigen::Index a = 0; a < 2; ++a) {
    const double d0 = s.anchors.row(a).norm();
    const double d1 = (s.anchors.row(a) - Eigen::RowVector2d(20, 20)).norm();
    EXPECT_LT(std::min(d0, d1), within);
  }
  const AnchorSet again = SelectAnchors(x, 2, AnchorMethod::kSubsampleKmeans, 3);
  EXPECT_TRUE(again.anchors == s.anchors);
}

TEST(AffinityTest, HandExamples) {
  Matrix anchors(3, 1);
  anchors << 0, 1, 3;
  Matrix pts(2, 1);
  pts << 1, 2.9;
  const auto aff = BuildBipartiteAffinity(pts, anchors, 1);
  EXPECT_EQ(aff.per_row, 1u);
  EXPECT_EQ(aff.row_cols(0)[0], 1u);
  EXPECT_EQ(aff.row_values(0)[0], 1.0);  // Coincident point.
  EXPECT_EQ(aff.row_cols(1)[0], 2u);
  EXPECT_EFMKIT_ERROR(BuildBipartiteAffinity(pts, anchors, 4), ErrorCode::kParameter);
}

TEST(AffinityTest, IdenticalPointsTieByAnchorIndex) {
  const Matrix pts = Matrix::Constant(5, 2, 0.5);
  Matrix anchors(4, 2);
  anchors << 0, 0, 1, 1, 0, 1, 1, 0;  // All equidistant from (0.5, 0.5).
  const auto aff = BuildBipartiteAffinity(pts, anchors, 2);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(aff.row_cols(i)[0], 0u);
    EXPECT_EQ(aff.row_cols(i)[1], 1u);
    EXPECT_EQ(aff.row_values(i)[0], aff.row_values(0)[0]);
    EXPECT_EQ(aff.row_values(i)[1], aff.row_values(0)[0]);
  }
}

// Property: min(k, p) positive entries per row with a finite positive sum.
TEST(AffinityTest, SparsityProperty) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::Index n = 50 + static_cast<Eigen::Index>(rng() % 100);
    const std::size_t p = 1 + rng() % 20;
    const std::size_t k = 1 + rng() % p;
    const Matrix x = UniformMatrix(n, 3, 0, 1, rng());
    const AnchorSet a = SelectAnchors(x, p, AnchorMethod::kUniformRandom, rng());
    const auto aff = BuildBipartiteAffinity(x, a.anchors, k);
    EXPECT_EQ(aff.per_row, std::min(k, p));
    const Matrix dense = aff.ToDense();
    for (Eigen::Index i = 0; i < n; ++i) {
      EXPECT_EQ(static_cast<std::size_t>((dense.row(i).array() > 0).count()), std::min(k, p));
      const double s = dense.row(i).sum();
      EXPECT_TRUE(std::isfinite(s));
      EXPECT_GT(s, 0.0);
    }
  }
}

TEST(SpectralEmbedTest, SingularValuesBoundedByOne) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix x = UniformMatrix(200, 3, 0, 1, rng());
    const AnchorSet a = SelectAnchors(x, 20, AnchorMethod::kUniformRandom, rng());
    const Vector sv = NormalizedSingularValues(BuildBipartiteAffinity(x, a.anchors, 4));
    EXPECT_LE(sv.maxCoeff(), 1.0 + 1e-9);
    EXPECT_NEAR(sv[0], 1.0, 1e-9);
    for (Eigen::Index i = 1; i < sv.size(); ++i) EXPECT_LE(sv[i], sv[i - 1]);
  }
}

TEST(SpectralEmbedTest, BlockDiagonalIsConstantPerComponent) {
  // Points 0-3 only touch anchors 0-1, points 4-7 only anchors 2-3.
  SparseBipartiteAffinity aff;
  aff.num_points = 8;
  aff.num_anchors = 4;
  aff.k = aff.per_row = 2;
  const double vals[8][2] = {{1, .5}, {.3, .9}, {.7, .7}, {.2, .4},
                             {.6, .1}, {.9, .9}, {.5, .8}, {.3, .3}};
  for (std::uint32_t i = 0; i < 8; ++i) {
    const std::uint32_t base = i < 4 ? 0 : 2;
    aff.cols.insert(aff.cols.end(), {base, base + 1});
    aff.values.insert(aff.values.end(), {vals[i][0], vals[i][1]});
  }
  const Matrix e = SpectralEmbed(aff, 2);
  for (Eigen::Index i = 0; i < 8; ++i) {
    const Eigen::Index ref = i < 4 ? 0 : 4;
    EXPECT_LE((e.row(i) - e.row(ref)).norm(), 1e-9);
    EXPECT_NEAR(e.row(i).norm(), 1.0, 1e-12);
  }
  EXPECT_GT((e.row(0) - e.row(4)).norm(), 0.5);
}

TEST(SpectralEmbedTest, IsolatedRowIsAnError) {
  SparseBipartiteAffinity aff;
  aff.num_points = 3;
  aff.num_anchors = 2;
  aff.k = aff.per_row = 1;
  aff.cols = {0, 1, 1};
  aff.values = {1.0, 0.0, 0.5};
  try {
    SpectralEmbed(aff, 2);
    ADD_FAILURE() << "expected an isolated-point error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIsolatedPoint);
    EXPECT_NE(std::string(e.what()).find('1'), std::string::npos);
  }
}

// Property: the anchor pipeline with p = N and k = p reproduces dense
// normalized spectral clustering.
TEST(ClusterPixelsTest, DenseOracleEquivalence) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    std::vector<int> truth;
    const Matrix x = Blobs({{0, 0}, {1.5, 1.5}}, 150, 0.45, seed, &truth);
    UspecConfig cfg;
    cfg.clusters = 2;
    cfg.anchors = 300;
    cfg.knn = 300;
    cfg.anchor_method = AnchorMethod::kUniformRandom;
    cfg.seed = seed;
    const ClusterAssignment got = ClusterPixels(x, cfg);
    EXPECT_DOUBLE_EQ(AdjustedRandIndex(got.labels, DenseSpectralOracle(x, 2, seed)), 1.0)
        << "seed " << seed;
  }
}

TEST(ClusterPixelsTest, TwoBlobsRecovered) {
  std::vector<int> truth;
  const Matrix x = Blobs({{0, 0}, {4, 4}}, 500, 0.5, 5, &truth);
  const ClusterAssignment got = ClusterPixels(x, UspecConfig{});
  EXPECT_DOUBLE_EQ(AdjustedRandIndex(got.labels, truth), 1.0);
  EXPECT_EQ(got.c, 2);
}

// With a clean gap both spaces separate the annulus; the map pays off once
// noise closes the gap. Averaged over seeds at the default p and k.
TEST(ClusterPixelsTest, QuadraticMapHelpsOnNoisyAnnulus) {
  double plain = 0.0, mapped = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const LabeledBatch data = SynthGenerate(SynthKind::kAnnulus, 2000, 0.15, seed);
    UspecConfig cfg;
    cfg.seed = seed;
    plain += AdjustedRandIndex(ClusterPixels(data.rows, cfg).labels, data.labels);
    cfg.map_spec = FeatureMapSpec::Polynomial(2, 2, 1.0);
    mapped += AdjustedRandIndex(ClusterPixels(data.rows, cfg).labels, data.labels);
  }
  EXPECT_GT(mapped, plain);
}

// Property: with anchors fixed, permuting the points permutes the labels.
TEST(ClusterPixelsTest, PermutationInvarianceWithFixedAnchors) {
  std::vector<int> truth;
  const Matrix x = Blobs({{0, 0}, {3, 0}, {0, 3}}, 120, 0.4, 13, &truth);
  const AnchorSet anchors = SelectAnchors(x, 30, AnchorMethod::kSubsampleKmeans, 4);
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(x.rows()));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(21));
  Matrix px(x.rows(), 2);
  for (Eigen::Index i = 0; i < x.rows(); ++i) px.row(i) = x.row(perm[static_cast<std::size_t>(i)]);
  const auto a = KMeans(SpectralEmbed(BuildBipartiteAffinity(x, anchors.anchors, 3), 3), 3, 1);
  const auto b = KMeans(SpectralEmbed(BuildBipartiteAffinity(px, anchors.anchors, 3), 3), 3, 1);
  std::vector<int> a_perm(a.labels.size());
  for (std::size_t i = 0; i < a_perm.size(); ++i) a_perm[i] = a.labels[static_cast<std::size_t>(perm[i])];
  EXPECT_DOUBLE_EQ(AdjustedRandIndex(a_perm, b.labels), 1.0);
}

// Property: affinity construction cost per point does not double with N.
TEST(AffinityTest, RuntimeScaling) {
  const Matrix big = UniformMatrix(80000, 3, 0, 1, 3);
  const Matrix anchors = SelectAnchors(big, 75, AnchorMethod::kUniformRandom, 1).anchors;
  auto time_per_point = [&](Eigen::Index n) {
    const Matrix x = big.topRows(n);
    double best = 1e30;
    for (int rep = 0; rep < 3; ++rep) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto aff = BuildBipartiteAffinity(x, anchors, 3);
      const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      EXPECT_EQ(aff.num_points, static_cast<std::size_t>(n));
      best = std::min(best, s / static_cast<double>(n));
    }
    return best;
  };
  const double small = time_per_point(40000);
  const double large = time_per_point(80000);
  EXPECT_LT(large, 2.0 * small) << small << " vs " << large;
}

TEST(MedianFilterTest, Examples) {
  const std::vector<int> constant(20 * 15, 1);
  EXPECT_EQ(MedianFilter(constant, 20, 15), constant);
  std::vector<int> speck(20 * 20, 0);
  speck[10 * 20 + 7] = 1;
  EXPECT_EQ(MedianFilter(speck, 20, 20), std::vector<int>(400, 0));
  std::vector<int> random(12 * 9);
  std::mt19937_64 rng(2);
  for (int& v : random) v = static_cast<int>(rng() % 2);
  EXPECT_EQ(MedianFilter(random, 12, 9, 1), random);
  EXPECT_EFMKIT_ERROR(MedianFilter(random, 12, 9, 4), ErrorCode::kParameter);
  EXPECT_EFMKIT_ERROR(MedianFilter(random, 12, 10, 3), ErrorCode::kShape);
}

TEST(MedianFilterTest, SymmetricPaddingOracle) {
  std::mt19937_64 rng(3);
  const std::size_t h = 7, w = 5, win = 3;
  std::vector<int> in(h * w);
  for (int& v : in) v = static_cast<int>(rng() % 4);
  // Symmetric padding mirrors the edge cell itself: index -1 maps to 0.
  auto at = [&](long y, long x) {
    y = y < 0 ? -y - 1 : (y >= static_cast<long>(h) ? 2 * static_cast<long>(h) - y - 1 : y);
    x = x < 0 ? -x - 1 : (x >= static_cast<long>(w) ? 2 * static_cast<long>(w) - x - 1 : x);
    return in[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)];
  };
  const auto out = MedianFilter(in, h, w, win);
  for (long y = 0; y < static_cast<long>(h); ++y) {
    for (long x = 0; x < static_cast<long>(w); ++x) {
      std::vector<int> v;
      for (long dy = -1; dy <= 1; ++dy)
        for (long dx = -1; dx <= 1; ++dx) v.push_back(at(y + dy, x + dx));
      std::sort(v.begin(), v.end());
      EXPECT_EQ(out[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)], v[4]);
    }
  }
}

TEST(MapClustersTest, Examples) {
  const std::vector<int> ref{1, 1, 0, 0, 0, 0};
  EXPECT_EQ(MapClustersToClasses({{0, 0, 1, 1, 1, 1}, 2}, ref), ref);
  EXPECT_EQ(MapClustersToClasses({{1, 1, 0, 0, 0, 0}, 2}, ref), ref);
  // Two clusters inside the negative region both map to 0.
  EXPECT_EQ(MapClustersToClasses({{2, 2, 0, 0, 1, 1}, 3}, ref), ref);
  // Cluster 3 is empty; it maps to 1 and changes nothing.
  EXPECT_EQ(MapClustersToClasses({{2, 2, 0, 0, 1, 1}, 4}, ref), ref);
  // An even split goes to the positive class.
  EXPECT_EQ(MapClustersToClasses({{0, 0, 0, 0, 1, 1}, 2}, std::vector<int>{1, 1, 0, 0, 0, 0}),
            (std::vector<int>{1, 1, 1, 1, 0, 0}));
  EXPECT_EFMKIT_ERROR(MapClustersToClasses({{0, 1}, 2}, ref), ErrorCode::kShape);
}

TEST(AdjustedRandIndexTest, KnownValues) {
  const std::vector<int> a{0, 0, 1, 1, 2, 2};
  EXPECT_DOUBLE_EQ(AdjustedRandIndex(a, std::vector<int>{5, 5, 3, 3, 9, 9}), 1.0);
  // Hand value: contingency {{1,1},{1,1}} for labels 0011 vs 0101 -> ARI = -0.5.
  EXPECT_NEAR(AdjustedRandIndex(std::vector<int>{0, 0, 1, 1}, std::vector<int>{0, 1, 0, 1}),
              -0.5, 1e-12);
}

}  // namespace
}  // namespace efmkit
