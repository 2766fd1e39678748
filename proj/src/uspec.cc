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
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <string>

#include "efmkit/error.h"

namespace efmkit {
namespace {

constexpr std::uint64_t kSeedStride = 0x9E3779B97F4A7C15ULL;

double SquaredDistance(const Matrix& a, Eigen::Index i, const Matrix& b,
                       Eigen::Index j) {
  return (a.row(i) - b.row(j)).squaredNorm();
}

// Index of the nearest center and its squared distance; ties go to the lower
// index.
std::pair<Eigen::Index, double> Nearest(const Matrix& rows, Eigen::Index i,
                                        const Matrix& centers) {
  Eigen::Index best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < centers.rows(); ++c) {
    const double d = SquaredDistance(rows, i, centers, c);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return {best, best_d};
}

Matrix SeedPlusPlus(const Matrix& rows, std::size_t c, std::mt19937_64& rng) {
  const Eigen::Index n = rows.rows();
  Matrix centers(static_cast<Eigen::Index>(c), rows.cols());
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  centers.row(0) = rows.row(pick(rng));
  std::vector<double> dist(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    dist[i] = SquaredDistance(rows, i, centers, 0);
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t k = 1; k < c; ++k) {
    const double total = std::accumulate(dist.begin(), dist.end(), 0.0);
    Eigen::Index chosen = 0;
    if (total > 0.0) {
      const double target = unit(rng) * total;
      double run = 0.0;
      chosen = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        run += dist[i];
        if (run > target && dist[i] > 0.0) {
          chosen = i;
          break;
        }
      }
    } else {
      chosen = pick(rng);
    }
    const auto kk = static_cast<Eigen::Index>(k);
    centers.row(kk) = rows.row(chosen);
    for (Eigen::Index i = 0; i < n; ++i) {
      dist[i] = std::min(dist[i], SquaredDistance(rows, i, centers, kk));
    }
  }
  return centers;
}

KMeansResult Lloyd(const Matrix& rows, Matrix centers,
                   const KMeansOptions& options) {
  const Eigen::Index n = rows.rows();
  const Eigen::Index c = centers.rows();
  std::vector<int> labels(static_cast<std::size_t>(n), 0);
  std::vector<double> dist(static_cast<std::size_t>(n), 0.0);
  auto assign = [&] {
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto [best, d] = Nearest(rows, i, centers);
      labels[i] = static_cast<int>(best);
      dist[i] = d;
    }
  };
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    assign();
    Matrix next = Matrix::Zero(c, rows.cols());
    std::vector<std::size_t> counts(static_cast<std::size_t>(c), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      next.row(labels[i]) += rows.row(i);
      ++counts[labels[i]];
    }
    std::vector<bool> taken(static_cast<std::size_t>(n), false);
    for (Eigen::Index k = 0; k < c; ++k) {
      if (counts[k] > 0) {
        next.row(k) /= static_cast<double>(counts[k]);
        continue;
      }
      // Empty cluster: move it onto the worst-served point.
      Eigen::Index far = 0;
      double far_d = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (!taken[i] && dist[i] > far_d) {
          far_d = dist[i];
          far = i;
        }
      }
      taken[far] = true;
      dist[far] = 0.0;
      next.row(k) = rows.row(far);
    }
    const double shift = (next - centers).rowwise().norm().maxCoeff();
    centers = std::move(next);
    if (shift < options.tolerance) break;
  }
  assign();
  KMeansResult result;
  result.assignment.labels = std::move(labels);
  result.assignment.c = static_cast<int>(c);
  result.centers = std::move(centers);
  result.inertia = std::accumulate(dist.begin(), dist.end(), 0.0);
  return result;
}

}  // namespace

Matrix SparseBipartiteAffinity::ToDense() const {
  Matrix dense = Matrix::Zero(static_cast<Eigen::Index>(num_points),
                              static_cast<Eigen::Index>(num_anchors));
  for (std::size_t i = 0; i < num_points; ++i) {
    const auto c = row_cols(i);
    const auto v = row_values(i);
    for (std::size_t e = 0; e < per_row; ++e) {
      dense(static_cast<Eigen::Index>(i), c[e]) = v[e];
    }
  }
  return dense;
}

KMeansResult KMeansFit(const Matrix& rows, std::size_t c, std::uint64_t seed,
                       const KMeansOptions& options) {
  if (c < 1) throw Error(ErrorCode::kParameter, "k-means needs c >= 1");
  if (static_cast<std::size_t>(rows.rows()) < c) {
    throw Error(ErrorCode::kParameter,
                "k-means needs at least c=" + std::to_string(c) +
                    " rows, got " + std::to_string(rows.rows()));
  }
  std::optional<KMeansResult> best;
  for (int r = 0; r < std::max(1, options.restarts); ++r) {
    std::mt19937_64 rng(seed + kSeedStride * static_cast<std::uint64_t>(r));
    KMeansResult trial = Lloyd(rows, SeedPlusPlus(rows, c, rng), options);
    if (!best || trial.inertia < best->inertia) best = std::move(trial);
  }
  return std::move(*best);
}

ClusterAssignment KMeans(const Matrix& rows, std::size_t c, std::uint64_t seed) {
  return KMeansFit(rows, c, seed).assignment;
}

AnchorSet SelectAnchors(const Matrix& points, std::size_t p,
                        AnchorMethod method, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (p < 1 || p > n) {
    throw Error(ErrorCode::kParameter, "need 1 <= p <= N, got p=" +
                                           std::to_string(p) +
                                           ", N=" + std::to_string(n));
  }
  std::mt19937_64 rng(seed);
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::shuffle(order.begin(), order.end(), rng);

  AnchorSet set;
  set.seed = seed;
  set.method = method;
  if (method == AnchorMethod::kUniformRandom) {
    set.anchors.resize(static_cast<Eigen::Index>(p), points.cols());
    for (std::size_t i = 0; i < p; ++i) {
      set.anchors.row(static_cast<Eigen::Index>(i)) = points.row(order[i]);
    }
    return set;
  }
  const std::size_t m = std::min(n, 20 * p);
  Matrix sample(static_cast<Eigen::Index>(m), points.cols());
  for (std::size_t i = 0; i < m; ++i) {
    sample.row(static_cast<Eigen::Index>(i)) = points.row(order[i]);
  }
  KMeansOptions options;
  options.restarts = 1;
  set.anchors = KMeansFit(sample, p, seed, options).centers;
  return set;
}

SparseBipartiteAffinity BuildBipartiteAffinity(const Matrix& points,
                                               const Matrix& anchors,
                                               std::size_t k) {
  const auto n = static_cast<std::size_t>(points.rows());
  const auto p = static_cast<std::size_t>(anchors.rows());
  if (k < 1 || k > p) {
    throw Error(ErrorCode::kParameter, "need 1 <= k <= p, got k=" +
                                           std::to_string(k) +
                                           ", p=" + std::to_string(p));
  }
  if (n > 0 && points.cols() != anchors.cols()) {
    throw Error(ErrorCode::kShape, "points and anchors differ in dimension");
  }
  SparseBipartiteAffinity aff;
  aff.num_points = n;
  aff.num_anchors = p;
  aff.k = k;
  aff.per_row = std::min(k, p);
  aff.cols.resize(n * aff.per_row);
  aff.values.resize(n * aff.per_row);  // Squared distances for now.

  std::vector<double> kth(n, 0.0);
  ParallelFor(n, [&](std::size_t begin, std::size_t end) {
    std::vector<std::pair<double, std::uint32_t>> cand(p);
    for (std::size_t i = begin; i < end; ++i) {
      for (std::size_t a = 0; a < p; ++a) {
        cand[a] = {SquaredDistance(points, static_cast<Eigen::Index>(i),
                                   anchors, static_cast<Eigen::Index>(a)),
                   static_cast<std::uint32_t>(a)};
      }
      std::partial_sort(cand.begin(), cand.begin() + aff.per_row, cand.end());
      for (std::size_t e = 0; e < aff.per_row; ++e) {
        aff.cols[i * aff.per_row + e] = cand[e].second;
        aff.values[i * aff.per_row + e] = cand[e].first;
      }
      kth[i] = std::sqrt(cand[aff.per_row - 1].first);
    }
  });
  aff.bandwidth =
      n ? std::accumulate(kth.begin(), kth.end(), 0.0) / static_cast<double>(n)
        : 0.0;
  const double denom = 2.0 * aff.bandwidth * aff.bandwidth;
  for (double& v : aff.values) {
    // Zero bandwidth means every selected anchor coincides with its point.
    v = denom > 0.0 ? std::exp(-v / denom) : 1.0;
  }
  return aff;
}

namespace {

struct NormalizedGram {
  Vector row_scale;  // D_r^-1/2
  Vector col_scale;  // D_c^-1/2 (0 for anchors nobody links to)
  Eigen::MatrixXd gram;  // Bn^T Bn, p x p
};

NormalizedGram BuildNormalizedGram(const SparseBipartiteAffinity& aff) {
  const std::size_t n = aff.num_points;
  const std::size_t p = aff.num_anchors;
  NormalizedGram g;
  g.row_scale = Vector::Zero(static_cast<Eigen::Index>(n));
  Vector col_deg = Vector::Zero(static_cast<Eigen::Index>(p));
  std::vector<std::size_t> isolated;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    const auto cols = aff.row_cols(i);
    const auto vals = aff.row_values(i);
    for (std::size_t e = 0; e < aff.per_row; ++e) {
      s += vals[e];
      col_deg[cols[e]] += vals[e];
    }
    if (!(s > 0.0)) {
      isolated.push_back(i);
    } else {
      g.row_scale[static_cast<Eigen::Index>(i)] = 1.0 / std::sqrt(s);
    }
  }
  if (!isolated.empty()) {
    std::string list;
    for (std::size_t j = 0; j < std::min<std::size_t>(isolated.size(), 20); ++j) {
      list += (j ? "," : "") + std::to_string(isolated[j]);
    }
    if (isolated.size() > 20) list += ",...";
    throw Error(ErrorCode::kIsolatedPoint,
                std::to_string(isolated.size()) +
                    " point(s) have zero affinity mass: " + list);
  }
  g.col_scale = Vector::Zero(static_cast<Eigen::Index>(p));
  for (Eigen::Index a = 0; a < col_deg.size(); ++a) {
    if (col_deg[a] > 0.0) g.col_scale[a] = 1.0 / std::sqrt(col_deg[a]);
  }
  g.gram = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p),
                                 static_cast<Eigen::Index>(p));
  std::vector<double> nv(aff.per_row);
  for (std::size_t i = 0; i < n; ++i) {
    const auto cols = aff.row_cols(i);
    const auto vals = aff.row_values(i);
    const double rs = g.row_scale[static_cast<Eigen::Index>(i)];
    for (std::size_t e = 0; e < aff.per_row; ++e) {
      nv[e] = rs * vals[e] * g.col_scale[cols[e]];
    }
    for (std::size_t e = 0; e < aff.per_row; ++e) {
      for (std::size_t f = 0; f < aff.per_row; ++f) {
        g.gram(cols[e], cols[f]) += nv[e] * nv[f];
      }
    }
  }
  return g;
}

}  // namespace

Vector NormalizedSingularValues(const SparseBipartiteAffinity& affinity) {
  const NormalizedGram g = BuildNormalizedGram(affinity);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g.gram);
  Vector ev = eig.eigenvalues().reverse();
  return ev.cwiseMax(0.0).cwiseSqrt();
}

Matrix SpectralEmbed(const SparseBipartiteAffinity& affinity, std::size_t c) {
  if (c < 1 || c > affinity.num_anchors) {
    throw Error(ErrorCode::kParameter, "need 1 <= c <= p for the embedding");
  }
  const NormalizedGram g = BuildNormalizedGram(affinity);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g.gram);
  const Eigen::Index p = g.gram.rows();
  const auto cc = static_cast<Eigen::Index>(c);
  // Eigenvalues come ascending; take the last c, largest first.
  Eigen::MatrixXd v(p, cc);
  Vector inv_sigma(cc);
  for (Eigen::Index j = 0; j < cc; ++j) {
    const Eigen::Index src = p - 1 - j;
    v.col(j) = eig.eigenvectors().col(src);
    const double lambda = eig.eigenvalues()[src];
    inv_sigma[j] = lambda > 1e-14 ? 1.0 / std::sqrt(lambda) : 0.0;
  }
  // U = Bn V Sigma^-1, one sparse row at a time.
  const auto n = affinity.num_points;
  Matrix embed = Matrix::Zero(static_cast<Eigen::Index>(n), cc);
  ParallelFor(n, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      const auto cols = affinity.row_cols(i);
      const auto vals = affinity.row_values(i);
      for (std::size_t e = 0; e < affinity.per_row; ++e) {
        const double w = g.row_scale[r] * vals[e] * g.col_scale[cols[e]];
        embed.row(r) += w * v.row(cols[e]);
      }
      embed.row(r) = embed.row(r).cwiseProduct(inv_sigma.transpose());
      const double norm = embed.row(r).norm();
      if (norm > 0.0) embed.row(r) /= norm;
    }
  });
  return embed;
}

ClusterAssignment ClusterPixels(const Matrix& pixels, const UspecConfig& config) {
  if (config.clusters < 1) {
    throw Error(ErrorCode::kParameter, "need at least one cluster");
  }
  if (config.anchors < config.clusters) {
    throw Error(ErrorCode::kParameter, "need anchors >= clusters");
  }
  const Matrix space = config.map_spec
                           ? FeatureMap(*config.map_spec).Transform(pixels)
                           : pixels;
  const AnchorSet anchors =
      SelectAnchors(space, config.anchors, config.anchor_method, config.seed);
  const SparseBipartiteAffinity aff =
      BuildBipartiteAffinity(space, anchors.anchors, config.knn);
  if (config.clusters == 1) {
    return {std::vector<int>(static_cast<std::size_t>(pixels.rows()), 0), 1};
  }
  const Matrix embed = SpectralEmbed(aff, config.clusters);
  return KMeans(embed, config.clusters, config.seed);
}

std::vector<int> MedianFilter(std::span<const int> labels, std::size_t height,
                              std::size_t width, std::size_t window) {
  if (window < 1 || window % 2 == 0) {
    throw Error(ErrorCode::kParameter,
                "median window must be odd and >= 1, got " +
                    std::to_string(window));
  }
  if (labels.size() != height * width) {
    throw Error(ErrorCode::kShape, "mask has " + std::to_string(labels.size()) +
                                       " cells, expected " +
                                       std::to_string(height * width));
  }
  if (window == 1 || labels.empty()) {
    return {labels.begin(), labels.end()};
  }
  // Symmetric padding: -1 -> 0, -2 -> 1, n -> n-1, ...
  auto reflect = [](long i, long n) {
    while (i < 0 || i >= n) {
      if (i < 0) i = -i - 1;
      if (i >= n) i = 2 * n - i - 1;
    }
    return i;
  };
  const long half = static_cast<long>(window / 2);
  const long h = static_cast<long>(height);
  const long w = static_cast<long>(width);
  std::vector<int> out(labels.size());
  ParallelFor(height, [&](std::size_t begin, std::size_t end) {
    std::vector<int> buf(window * window);
    for (long y = static_cast<long>(begin); y < static_cast<long>(end); ++y) {
      for (long x = 0; x < w; ++x) {
        std::size_t k = 0;
        for (long dy = -half; dy <= half; ++dy) {
          const long yy = reflect(y + dy, h);
          for (long dx = -half; dx <= half; ++dx) {
            buf[k++] = labels[yy * w + reflect(x + dx, w)];
          }
        }
        auto mid = buf.begin() + static_cast<long>(buf.size() / 2);
        std::nth_element(buf.begin(), mid, buf.end());
        out[y * w + x] = *mid;
      }
    }
  }, 16);
  return out;
}

std::vector<int> MapClustersToClasses(const ClusterAssignment& assignment,
                                      std::span<const int> reference) {
  if (assignment.labels.size() != reference.size()) {
    throw Error(ErrorCode::kShape,
                "assignment has " + std::to_string(assignment.labels.size()) +
                    " labels, reference has " +
                    std::to_string(reference.size()));
  }
  int c = assignment.c;
  for (int l : assignment.labels) c = std::max(c, l + 1);
  std::vector<std::size_t> ones(static_cast<std::size_t>(c), 0);
  std::vector<std::size_t> zeros(static_cast<std::size_t>(c), 0);
  for (std::size_t i = 0; i < reference.size(); ++i) {
    (reference[i] ? ones : zeros)[assignment.labels[i]]++;
  }
  std::vector<int> cluster_class(static_cast<std::size_t>(c));
  for (int k = 0; k < c; ++k) cluster_class[k] = ones[k] >= zeros[k] ? 1 : 0;
  std::vector<int> out(reference.size());
  for (std::size_t i = 0; i < reference.size(); ++i) {
    out[i] = cluster_class[assignment.labels[i]];
  }
  return out;
}

double AdjustedRandIndex(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kShape, "label vectors differ in length");
  }
  const double n = static_cast<double>(a.size());
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> ra;
  std::map<int, double> rb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1;
    ra[a[i]] += 1;
    rb[b[i]] += 1;
  }
  auto pairs = [](double x) { return x * (x - 1) / 2.0; };
  double index = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (const auto& [_, v] : joint) index += pairs(v);
  for (const auto& [_, v] : ra) sum_a += pairs(v);
  for (const auto& [_, v] : rb) sum_b += pairs(v);
  const double expected = n > 1 ? sum_a * sum_b / pairs(n) : 0.0;
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;  // Both trivial partitions.
  return (index - expected) / (max_index - expected);
}

}  // namespace efmkit
