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

// Patch streaming over images, synthetic labeled sets and CSV tables.

#ifndef EFMKIT_DATASET_H_
#define EFMKIT_DATASET_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "efmkit/image_io.h"
#include "efmkit/linear_model.h"
#include "efmkit/types.h"

namespace efmkit {

// Pixel indices of each side x side tile. Tiles are visited in row-major
// order, pixels inside a tile too; edge tiles are truncated.
std::vector<std::vector<std::size_t>> PatchIndices(std::size_t height,
                                                   std::size_t width,
                                                   std::size_t side);

// One LabeledBatch per tile, built lazily on every replay.
BatchStream PatchStream(const PixelDataset& image, const Mask& mask,
                        std::size_t side = 100);

// Consecutive chunks of at most batch_rows rows.
BatchStream ChunkStream(const LabeledBatch& data, std::size_t batch_rows);

// Concatenation of several streams.
BatchStream ConcatStreams(std::vector<BatchStream> streams);

enum class SynthKind { kBlobs, kAnnulus, kXor };

SynthKind ParseSynthKind(const std::string& name);

// 2-D labeled sets, n rows.
//   blobs:   two Gaussians around (-1,-1) -> 0 and (1,1) -> 1;
//   annulus: disk of radius 0.5 -> 1 inside a ring 0.8 <= r <= 1.2 -> 0;
//   xor:     four quadrant blobs, label 1 where the coordinate signs agree.
// noise is the standard deviation of the Gaussian jitter.
LabeledBatch SynthGenerate(SynthKind kind, std::size_t n, double noise,
                           std::uint64_t seed);

struct CsvTable {
  std::optional<std::vector<std::string>> header;
  Matrix values;
};

// Numeric CSV; a first line with any non-numeric cell is taken as the header.
CsvTable ReadCsv(const std::string& path);
void WriteCsv(const std::string& path, const CsvTable& table);

// Writes text to path via a temporary file and rename.
void WriteFileAtomic(const std::string& path, const std::string& contents);

// Splits the label column off a table. label_column < 0 selects the column
// named "label", else the last one.
LabeledBatch LabeledFromTable(const CsvTable& table, int label_column = -1);

}  // namespace efmkit

#endif  // EFMKIT_DATASET_H_
