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

#ifndef EFMKIT_ERROR_H_
#define EFMKIT_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace efmkit {

// Error categories surfaced by the library. The CLI maps every category to
// exit code 1 except kUsage, which maps to 2.
enum class ErrorCode {
  kShape,
  kInvalidDimension,
  kInvalidOffset,
  kParameter,
  kCapacity,
  kNoData,
  kLabel,
  kFormat,
  kAmbiguousMask,
  kIsolatedPoint,
  kSampleSize,
  kUsage,
};

std::string_view ErrorCodeName(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kShape:
      return "shape error";
    case ErrorCode::kInvalidDimension:
      return "invalid dimension";
    case ErrorCode::kInvalidOffset:
      return "invalid offset";
    case ErrorCode::kParameter:
      return "parameter error";
    case ErrorCode::kCapacity:
      return "capacity error";
    case ErrorCode::kNoData:
      return "no data";
    case ErrorCode::kLabel:
      return "label error";
    case ErrorCode::kFormat:
      return "format error";
    case ErrorCode::kAmbiguousMask:
      return "ambiguous mask";
    case ErrorCode::kIsolatedPoint:
      return "isolated point";
    case ErrorCode::kSampleSize:
      return "sample size error";
    case ErrorCode::kUsage:
      return "usage error";
  }
  return "error";
}

}  // namespace efmkit

#endif  // EFMKIT_ERROR_H_
