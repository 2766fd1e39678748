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

#ifndef EFMKIT_TYPES_H_
#define EFMKIT_TYPES_H_

#include <Eigen/Dense>
#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace efmkit {

// Samples are stored one per row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                             Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowRef = Eigen::Ref<const Eigen::RowVectorXd>;

// Number of worker threads for data-parallel stages. Capped by the
// EFMKIT_THREADS environment variable when set.
inline int WorkerCount() {
  int n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("EFMKIT_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) n = std::min(n, cap);
  }
  return n;
}

// Runs fn(begin, end) over static contiguous chunks of [0, count). Each index
// is visited by exactly one chunk, so writes to disjoint outputs stay
// deterministic regardless of the thread count.
template <typename Fn>
void ParallelFor(std::size_t count, Fn&& fn, std::size_t min_chunk = 4096) {
  const std::size_t workers = static_cast<std::size_t>(WorkerCount());
  const std::size_t chunks =
      std::min(workers, std::max<std::size_t>(1, count / min_chunk));
  if (chunks <= 1) {
    fn(std::size_t{0}, count);
    return;
  }
  std::vector<std::thread> threads;
  threads.reserve(chunks);
  const std::size_t step = (count + chunks - 1) / chunks;
  for (std::size_t c = 0; c < chunks; ++c) {
    const std::size_t begin = c * step;
    const std::size_t end = std::min(count, begin + step);
    if (begin >= end) break;
    threads.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
  for (auto& t : threads) t.join();
}

}  // namespace efmkit

#endif  // EFMKIT_TYPES_H_
