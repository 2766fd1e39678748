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

// PNG and binary/ASCII PNM rasters, 8 or 16 bits per sample.

#ifndef EFMKIT_IMAGE_IO_H_
#define EFMKIT_IMAGE_IO_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "efmkit/types.h"

namespace efmkit {

struct Raster {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  int bit_depth = 8;                  // 8 or 16.
  std::vector<std::uint16_t> samples;  // Row-major, interleaved channels.

  std::uint32_t max_value() const { return (1u << bit_depth) - 1u; }
};

// Dispatches on the file signature (PNG, P2/P3/P5/P6). Palette and low-bit
// PNGs are expanded to 8 bits.
Raster ReadRaster(const std::string& path);

// Format chosen by extension: .png, .ppm/.pgm/.pnm. Written to a temporary
// file and renamed into place.
void WriteRaster(const std::string& path, const Raster& raster);

// RGB pixels scaled to [0, 1], one row per pixel in row-major order.
struct PixelDataset {
  Matrix rows;  // N x 3.
  std::size_t height = 0;
  std::size_t width = 0;
  std::string source;
};

// Accepts RGB and RGBA (alpha dropped) rasters.
PixelDataset LoadImage(const std::string& path);
void SaveImage(const std::string& path, const PixelDataset& image,
               int bit_depth = 8);

struct Mask {
  std::vector<int> labels;  // 1 = positive.
  std::size_t height = 0;
  std::size_t width = 0;
};

// Single-channel raster with values in {0, max}; anything in between is an
// ambiguous-mask error.
Mask LoadMask(const std::string& path);
// Writes labels as 0 / 255 (binary) or scaled ids (label * 255 / max_label).
void SaveMask(const std::string& path, const Mask& mask);

// 3 x 3 median of each channel with symmetric borders.
PixelDataset MedianPrefilter(const PixelDataset& image);

}  // namespace efmkit

#endif  // EFMKIT_IMAGE_IO_H_
