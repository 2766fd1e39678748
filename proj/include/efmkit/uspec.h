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

// Anchor-based spectral clustering for large point sets.
//
// Pipeline: pick p anchors, connect every point to its k nearest anchors in a
// sparse N x p bipartite affinity B, embed the points with the top-c left
// singular vectors of the degree-normalized B (transfer cut), then run
// k-means on the row-normalized embedding.

#ifndef EFMKIT_USPEC_H_
#define EFMKIT_USPEC_H_

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "efmkit/feature_map.h"
#include "efmkit/types.h"

namespace efmkit {

enum class AnchorMethod { kUniformRandom, kSubsampleKmeans };

struct AnchorSet {
  Matrix anchors;  // p x d.
  std::uint64_t seed = 0;
  AnchorMethod method = AnchorMethod::kSubsampleKmeans;

  std::size_t size() const { return static_cast<std::size_t>(anchors.rows()); }
};

// Row-sparse N x p matrix, a fixed number of entries per row.
struct SparseBipartiteAffinity {
  std::size_t num_points = 0;
  std::size_t num_anchors = 0;
  std::size_t k = 0;              // Requested neighbors.
  std::size_t per_row = 0;        // min(k, p); entries stored per row.
  std::vector<std::uint32_t> cols;  // num_points * per_row anchor indices.
  std::vector<double> values;       // Matching affinities.
  double bandwidth = 0.0;

  std::span<const std::uint32_t> row_cols(std::size_t i) const {
    return {cols.data() + i * per_row, per_row};
  }
  std::span<const double> row_values(std::size_t i) const {
    return {values.data() + i * per_row, per_row};
  }
  Matrix ToDense() const;
};

struct ClusterAssignment {
  std::vector<int> labels;  // Each in [0, c).
  int c = 0;
};

struct KMeansOptions {
  int max_iterations = 100;
  double tolerance = 1e-6;  // Stop once no center moves farther than this.
  int restarts = 5;
};

struct KMeansResult {
  ClusterAssignment assignment;
  Matrix centers;
  double inertia = 0.0;  // Within-cluster sum of squares.
};

// k-means++ seeding and Lloyd iterations; the restart with the lowest
// inertia wins. Deterministic for a fixed seed.
KMeansResult KMeansFit(const Matrix& rows, std::size_t c, std::uint64_t seed,
                       const KMeansOptions& options = {});
ClusterAssignment KMeans(const Matrix& rows, std::size_t c, std::uint64_t seed);

AnchorSet SelectAnchors(const Matrix& points, std::size_t p,
                        AnchorMethod method, std::uint64_t seed);

// k nearest anchors per point by exact linear scan; distance ties go to the
// lower anchor index. Entries are exp(-dist^2 / (2 h^2)) with h the mean
// distance from a point to its k-th nearest anchor.
SparseBipartiteAffinity BuildBipartiteAffinity(const Matrix& points,
                                               const Matrix& anchors,
                                               std::size_t k);

// Singular values (descending) of D_r^-1/2 B D_c^-1/2.
Vector NormalizedSingularValues(const SparseBipartiteAffinity& affinity);

// N x c transfer-cut embedding with unit-length rows (zero rows stay zero).
// Throws kIsolatedPoint when a row carries no affinity mass.
Matrix SpectralEmbed(const SparseBipartiteAffinity& affinity, std::size_t c);

struct UspecConfig {
  std::size_t clusters = 2;
  std::size_t anchors = 75;
  std::size_t knn = 3;
  std::optional<FeatureMapSpec> map_spec;
  AnchorMethod anchor_method = AnchorMethod::kSubsampleKmeans;
  std::uint64_t seed = 42;
};

ClusterAssignment ClusterPixels(const Matrix& pixels, const UspecConfig& config);

// Median of each odd window x window neighborhood with symmetric border
// padding. labels is row-major height x width.
std::vector<int> MedianFilter(std::span<const int> labels, std::size_t height,
                              std::size_t width, std::size_t window = 9);

// Maps each cluster to the binary class it overlaps most in reference; ties
// and empty clusters go to 1.
std::vector<int> MapClustersToClasses(const ClusterAssignment& assignment,
                                      std::span<const int> reference);

double AdjustedRandIndex(std::span<const int> a, std::span<const int> b);

}  // namespace efmkit

#endif  // EFMKIT_USPEC_H_
