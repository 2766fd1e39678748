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

#include "efmkit/feature_map.h"

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>

#include "efmkit/error.h"

namespace efmkit {
namespace {

// Largest n with n! representable in uint64_t.
constexpr int kMaxExactFactorial = 20;

std::uint64_t ExactFactorial(int n) {
  std::uint64_t f = 1;
  for (int i = 2; i <= n; ++i) f *= static_cast<std::uint64_t>(i);
  return f;
}

double LogFactorial(int n) {
  if (n <= kMaxExactFactorial) {
    return std::log(static_cast<double>(ExactFactorial(n)));
  }
  return std::lgamma(static_cast<double>(n) + 1.0);
}

void CheckSameLength(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw Error(ErrorCode::kShape, "vectors of length " +
                                       std::to_string(x.size()) + " and " +
                                       std::to_string(y.size()));
  }
}

void CheckInput(std::span<const double> x, const FeatureMapSpec& spec) {
  if (x.size() != static_cast<std::size_t>(spec.d)) {
    throw Error(ErrorCode::kShape, "input has length " +
                                       std::to_string(x.size()) +
                                       ", map expects d=" +
                                       std::to_string(spec.d));
  }
}

void EnumerateDegree(int d, int degree, std::vector<int>& prefix,
                     std::vector<MultiIndex>& out) {
  const int pos = static_cast<int>(prefix.size());
  if (pos == d - 1) {
    prefix.push_back(degree);
    out.push_back(MultiIndex{prefix});
    prefix.pop_back();
    return;
  }
  for (int a = 0; a <= degree; ++a) {
    prefix.push_back(a);
    EnumerateDegree(d, degree - a, prefix, out);
    prefix.pop_back();
  }
}

// sqrt of the squared coefficient for one multi-index.
double Coefficient(const FeatureMapSpec& spec, const MultiIndex& alpha) {
  const int k = alpha.degree();
  const int m = spec.m;
  if (spec.kind == MapKind::kPolynomial) {
    // m! / ((m - |alpha|)! alpha!) * b^(m - |alpha|)
    const double b_power =
        (m == k) ? 1.0 : std::pow(spec.b, static_cast<double>(m - k));
    if (m <= kMaxExactFactorial) {
      std::uint64_t denom = ExactFactorial(m - k);
      for (int a : alpha.exponents) denom *= ExactFactorial(a);
      const std::uint64_t multinomial = ExactFactorial(m) / denom;
      return std::sqrt(static_cast<double>(multinomial) * b_power);
    }
    const double log_sq = LogFactorial(m) - LogFactorial(m - k) -
                          alpha.log_factorial() +
                          (m == k ? 0.0 : (m - k) * std::log(spec.b));
    return std::exp(0.5 * log_sq);
  }
  // Gaussian: sigma^-|alpha| / sqrt(alpha!), times sqrt(2^|alpha|) for kFull.
  double log_sq = -2.0 * k * std::log(spec.sigma) - alpha.log_factorial();
  if (spec.variant == GaussianVariant::kFull) log_sq += k * std::log(2.0);
  if (m <= kMaxExactFactorial) {
    std::uint64_t fact = 1;
    for (int a : alpha.exponents) fact *= ExactFactorial(a);
    double c = 1.0 / (std::pow(spec.sigma, k) *
                      std::sqrt(static_cast<double>(fact)));
    if (spec.variant == GaussianVariant::kFull) {
      c *= std::sqrt(std::ldexp(1.0, k));
    }
    return c;
  }
  return std::exp(0.5 * log_sq);
}

}  // namespace

int MultiIndex::degree() const {
  return std::accumulate(exponents.begin(), exponents.end(), 0);
}

double MultiIndex::log_factorial() const {
  double s = 0.0;
  for (int a : exponents) s += LogFactorial(a);
  return s;
}

FeatureMapSpec FeatureMapSpec::Polynomial(int d, int m, double b) {
  FeatureMapSpec s;
  s.kind = MapKind::kPolynomial;
  s.d = d;
  s.m = m;
  s.b = b;
  s.Validate();
  return s;
}

FeatureMapSpec FeatureMapSpec::Gaussian(int d, int m, double sigma,
                                        GaussianVariant variant) {
  FeatureMapSpec s;
  s.kind = MapKind::kGaussian;
  s.d = d;
  s.m = m;
  s.sigma = sigma;
  s.variant = variant;
  s.Validate();
  return s;
}

void FeatureMapSpec::Validate() const {
  if (d < 1) {
    throw Error(ErrorCode::kInvalidDimension,
                "input dimension must be >= 1, got " + std::to_string(d));
  }
  if (m < 0) {
    throw Error(ErrorCode::kParameter,
                "order must be >= 0, got " + std::to_string(m));
  }
  if (kind == MapKind::kPolynomial && !(b >= 0.0)) {
    throw Error(ErrorCode::kInvalidOffset,
                "polynomial offset must be >= 0, got " + std::to_string(b));
  }
  if (kind == MapKind::kGaussian && !(sigma > 0.0)) {
    throw Error(ErrorCode::kParameter,
                "sigma must be > 0, got " + std::to_string(sigma));
  }
}

std::size_t Binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  // C(n, i) = C(n, i-1) * (n - k + i) / i stays integral at every step.
  unsigned __int128 result = 1;
  for (std::size_t i = 1; i <= k; ++i) {
    result = result * (n - k + i) / i;
    if (result > std::numeric_limits<std::size_t>::max()) {
      throw Error(ErrorCode::kCapacity, "C(" + std::to_string(n) + ", " +
                                            std::to_string(k) +
                                            ") overflows");
    }
  }
  return static_cast<std::size_t>(result);
}

std::vector<MultiIndex> EnumerateMultiIndices(int d, int m, bool exact_degree) {
  if (d < 1) {
    throw Error(ErrorCode::kInvalidDimension,
                "input dimension must be >= 1, got " + std::to_string(d));
  }
  if (m < 0) {
    throw Error(ErrorCode::kParameter,
                "order must be >= 0, got " + std::to_string(m));
  }
  const std::size_t count =
      exact_degree ? Binomial(d + m - 1, m) : Binomial(d + m, d);
  std::vector<MultiIndex> out;
  out.reserve(count);
  std::vector<int> prefix;
  prefix.reserve(d);
  for (int degree = exact_degree ? m : 0; degree <= m; ++degree) {
    EnumerateDegree(d, degree, prefix, out);
  }
  return out;
}

std::size_t ExpansionDim(const FeatureMapSpec& spec) {
  spec.Validate();
  const auto d = static_cast<std::size_t>(spec.d);
  const auto m = static_cast<std::size_t>(spec.m);
  if (spec.exact_degree()) return Binomial(d + m - 1, m);
  return Binomial(d + m, d);
}

FeatureMap::FeatureMap(const FeatureMapSpec& spec) : spec_(spec) {
  spec_.Validate();
  indices_ = EnumerateMultiIndices(spec_.d, spec_.m, spec_.exact_degree());
  coefficients_.reserve(indices_.size());
  for (const auto& alpha : indices_) {
    coefficients_.push_back(Coefficient(spec_, alpha));
  }
}

void FeatureMap::ApplyInto(std::span<const double> x,
                           std::span<double> out) const {
  CheckInput(x, spec_);
  if (out.size() != indices_.size()) {
    throw Error(ErrorCode::kShape, "output buffer has length " +
                                       std::to_string(out.size()) +
                                       ", map dimension is " +
                                       std::to_string(indices_.size()));
  }
  const int d = spec_.d;
  const int m = spec_.m;
  // powers[i * (m + 1) + e] = x_i^e
  thread_local std::vector<double> powers;
  powers.assign(static_cast<std::size_t>(d) * (m + 1), 1.0);
  for (int i = 0; i < d; ++i) {
    double* p = &powers[static_cast<std::size_t>(i) * (m + 1)];
    for (int e = 1; e <= m; ++e) p[e] = p[e - 1] * x[i];
  }
  double prefactor = 1.0;
  if (spec_.kind == MapKind::kGaussian) {
    double sq = 0.0;
    for (double v : x) sq += v * v;
    const double denom = spec_.variant == GaussianVariant::kHalf
                             ? 2.0 * spec_.sigma * spec_.sigma
                             : spec_.sigma * spec_.sigma;
    prefactor = std::exp(-sq / denom);
  }
  for (std::size_t j = 0; j < indices_.size(); ++j) {
    const auto& exps = indices_[j].exponents;
    double mono = 1.0;
    for (int i = 0; i < d; ++i) {
      mono *= powers[static_cast<std::size_t>(i) * (m + 1) + exps[i]];
    }
    out[j] = prefactor * coefficients_[j] * mono;
  }
}

Vector FeatureMap::Apply(std::span<const double> x) const {
  Vector out(static_cast<Eigen::Index>(dim()));
  ApplyInto(x, {out.data(), dim()});
  return out;
}

Matrix FeatureMap::Transform(const Matrix& rows) const {
  if (rows.rows() > 0 && rows.cols() != spec_.d) {
    throw Error(ErrorCode::kShape, "batch has " +
                                       std::to_string(rows.cols()) +
                                       " columns, map expects d=" +
                                       std::to_string(spec_.d));
  }
  Matrix out(rows.rows(), static_cast<Eigen::Index>(dim()));
  ParallelFor(static_cast<std::size_t>(rows.rows()),
              [&](std::size_t begin, std::size_t end) {
                for (std::size_t n = begin; n < end; ++n) {
                  const auto r = static_cast<Eigen::Index>(n);
                  ApplyInto({rows.row(r).data(), input_dim()},
                            {out.row(r).data(), dim()});
                }
              });
  return out;
}

std::vector<std::string> FeatureMap::FeatureNames(
    const std::vector<std::string>& input_names) const {
  if (input_names.size() != input_dim()) {
    throw Error(ErrorCode::kShape, "expected " + std::to_string(input_dim()) +
                                       " input names, got " +
                                       std::to_string(input_names.size()));
  }
  bool single_char = true;
  for (const auto& n : input_names) single_char &= n.size() == 1;
  std::vector<std::string> names;
  names.reserve(dim());
  for (const auto& alpha : indices_) {
    std::string name;
    for (std::size_t i = 0; i < input_names.size(); ++i) {
      const int e = alpha.exponents[i];
      if (e == 0) continue;
      if (!name.empty() && !single_char) name += '*';
      name += input_names[i];
      if (e > 1) name += "^" + std::to_string(e);
    }
    names.push_back(name.empty() ? "ONE" : name);
  }
  return names;
}

Vector PolynomialEfm(std::span<const double> x, const FeatureMapSpec& spec) {
  if (spec.kind != MapKind::kPolynomial) {
    throw Error(ErrorCode::kParameter, "spec is not polynomial");
  }
  return FeatureMap(spec).Apply(x);
}

Vector GaussianAefm(std::span<const double> x, const FeatureMapSpec& spec) {
  if (spec.kind != MapKind::kGaussian) {
    throw Error(ErrorCode::kParameter, "spec is not gaussian");
  }
  return FeatureMap(spec).Apply(x);
}

Vector ApplyFeatureMap(std::span<const double> x, const FeatureMapSpec& spec) {
  return FeatureMap(spec).Apply(x);
}

double KernelEval(const FeatureMapSpec& spec, std::span<const double> x,
                  std::span<const double> y) {
  CheckSameLength(x, y);
  if (spec.kind == MapKind::kPolynomial) {
    double dot = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) dot += x[i] * y[i];
    return std::pow(dot + spec.b, spec.m);
  }
  double sq = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double diff = x[i] - y[i];
    sq += diff * diff;
  }
  const double denom = spec.variant == GaussianVariant::kHalf
                           ? 2.0 * spec.sigma * spec.sigma
                           : spec.sigma * spec.sigma;
  return std::exp(-sq / denom);
}

double ApproximationError(const FeatureMapSpec& spec, std::span<const double> x,
                          std::span<const double> y) {
  if (spec.kind != MapKind::kGaussian) {
    throw Error(ErrorCode::kParameter,
                "approximation error is defined for gaussian maps only");
  }
  CheckSameLength(x, y);
  const FeatureMap map(spec);
  const Vector px = map.Apply(x);
  const Vector py = map.Apply(y);
  return std::abs(KernelEval(spec, x, y) - px.dot(py));
}

Matrix TransformBatch(const Matrix& rows, const FeatureMapSpec& spec) {
  return FeatureMap(spec).Transform(rows);
}

std::vector<std::string> DefaultInputNames(int d) {
  if (d == 3) return {"R", "G", "B"};
  std::vector<std::string> names;
  for (int i = 1; i <= d; ++i) names.push_back("x" + std::to_string(i));
  return names;
}

nlohmann::json ToJson(const FeatureMapSpec& spec) {
  nlohmann::json j;
  j["d"] = spec.d;
  j["m"] = spec.m;
  if (spec.kind == MapKind::kPolynomial) {
    j["kind"] = "polynomial";
    j["b"] = spec.b;
  } else {
    j["kind"] = "gaussian";
    j["sigma"] = spec.sigma;
    j["variant"] = spec.variant == GaussianVariant::kHalf ? "half" : "full";
  }
  return j;
}

FeatureMapSpec FeatureMapSpecFromJson(const nlohmann::json& j) {
  try {
    FeatureMapSpec s;
    const std::string kind = j.at("kind").get<std::string>();
    s.d = j.at("d").get<int>();
    s.m = j.at("m").get<int>();
    if (kind == "polynomial") {
      s.kind = MapKind::kPolynomial;
      s.b = j.value("b", 0.0);
    } else if (kind == "gaussian") {
      s.kind = MapKind::kGaussian;
      s.sigma = j.at("sigma").get<double>();
      const std::string variant = j.value("variant", std::string("half"));
      if (variant == "half") {
        s.variant = GaussianVariant::kHalf;
      } else if (variant == "full") {
        s.variant = GaussianVariant::kFull;
      } else {
        throw Error(ErrorCode::kFormat, "unknown gaussian variant " + variant);
      }
    } else {
      throw Error(ErrorCode::kFormat, "unknown feature map kind " + kind);
    }
    s.Validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat,
                std::string("bad feature map spec: ") + e.what());
  }
}

}  // namespace efmkit
