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

// Explicit feature maps for the polynomial kernel (exact) and the Gaussian
// kernel (truncated series).
//
// Every map expands x in R^d into a vector indexed by multi-indices alpha,
// each component being coefficient(alpha) * x^alpha, possibly times a scalar
// prefactor depending on ||x||. Components are always laid out in graded
// lexicographic order: ascending total degree, then ascending lexicographic
// order of the exponent tuple. Serialized models depend on this order, do not
// change it.

#ifndef EFMKIT_FEATURE_MAP_H_
#define EFMKIT_FEATURE_MAP_H_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "efmkit/types.h"
#include "json.hpp"

namespace efmkit {

struct MultiIndex {
  std::vector<int> exponents;

  int degree() const;
  // log(alpha!) = sum_i log(alpha_i!).
  double log_factorial() const;

  bool operator==(const MultiIndex&) const = default;
};

enum class MapKind { kPolynomial, kGaussian };

// kHalf: exp(-||x-y||^2 / (2 sigma^2)). kFull: exp(-||x-y||^2 / sigma^2).
enum class GaussianVariant { kHalf, kFull };

struct FeatureMapSpec {
  MapKind kind = MapKind::kPolynomial;
  int d = 1;
  int m = 0;
  double b = 0.0;      // Polynomial only.
  double sigma = 1.0;  // Gaussian only.
  GaussianVariant variant = GaussianVariant::kHalf;

  static FeatureMapSpec Polynomial(int d, int m, double b);
  static FeatureMapSpec Gaussian(int d, int m, double sigma,
                                 GaussianVariant variant = GaussianVariant::kHalf);

  // Throws Error for d < 1, m < 0, b < 0 or sigma <= 0.
  void Validate() const;

  // Polynomial maps with b = 0 only carry the |alpha| = m monomials.
  bool exact_degree() const { return kind == MapKind::kPolynomial && b == 0.0; }

  bool operator==(const FeatureMapSpec&) const = default;
};

// All alpha in N_0^d with |alpha| = m (exact_degree) or |alpha| <= m, in
// graded lexicographic order.
std::vector<MultiIndex> EnumerateMultiIndices(int d, int m, bool exact_degree);

// Binomial coefficient C(n, k). Throws kCapacity when it does not fit in
// std::size_t.
std::size_t Binomial(std::size_t n, std::size_t k);

// Induced dimension D of the map.
std::size_t ExpansionDim(const FeatureMapSpec& spec);

// Precomputed map: multi-indices plus the per-component coefficients. Cheap
// to copy, immutable after construction and safe to share across threads.
class FeatureMap {
 public:
  explicit FeatureMap(const FeatureMapSpec& spec);

  const FeatureMapSpec& spec() const { return spec_; }
  std::size_t input_dim() const { return static_cast<std::size_t>(spec_.d); }
  std::size_t dim() const { return indices_.size(); }
  const std::vector<MultiIndex>& indices() const { return indices_; }
  const std::vector<double>& coefficients() const { return coefficients_; }

  // Writes the D components of phi(x) to out.
  void ApplyInto(std::span<const double> x, std::span<double> out) const;
  Vector Apply(std::span<const double> x) const;

  // Row n of the result is phi(row n of rows).
  Matrix Transform(const Matrix& rows) const;

  // Monomial names such as "ONE", "R", "RG", "R^2" built from the input
  // feature names. Single-character base names are concatenated, longer ones
  // are joined with '*'.
  std::vector<std::string> FeatureNames(
      const std::vector<std::string>& input_names) const;

 private:
  FeatureMapSpec spec_;
  std::vector<MultiIndex> indices_;
  std::vector<double> coefficients_;
};

Vector PolynomialEfm(std::span<const double> x, const FeatureMapSpec& spec);
Vector GaussianAefm(std::span<const double> x, const FeatureMapSpec& spec);

// Dispatches on spec.kind.
Vector ApplyFeatureMap(std::span<const double> x, const FeatureMapSpec& spec);

// Kernel value kappa(x, y) that the map reproduces (polynomial) or
// approximates (Gaussian).
double KernelEval(const FeatureMapSpec& spec, std::span<const double> x,
                  std::span<const double> y);

// |kappa(x, y) - <phi_m(x), phi_m(y)>| for a Gaussian spec.
double ApproximationError(const FeatureMapSpec& spec, std::span<const double> x,
                          std::span<const double> y);

Matrix TransformBatch(const Matrix& rows, const FeatureMapSpec& spec);

// Default input names: R, G, B for d = 3, otherwise x1 .. xd.
std::vector<std::string> DefaultInputNames(int d);

nlohmann::json ToJson(const FeatureMapSpec& spec);
FeatureMapSpec FeatureMapSpecFromJson(const nlohmann::json& j);

inline std::span<const double> AsSpan(const Vector& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

}  // namespace efmkit

#endif  // EFMKIT_FEATURE_MAP_H_
