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

#include "efmkit/image_io.h"

#include <png.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>

#include "efmkit/error.h"

namespace efmkit {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::string Lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

Raster ReadPng(const std::string& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw Error(ErrorCode::kFormat, "cannot open " + path);
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::kFormat, "libpng init failed for " + path);
  }
  Raster raster;
  std::vector<png_bytep> row_ptrs;
  std::vector<png_byte> buffer;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::kFormat, "corrupt PNG " + path);
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_read_update_info(png, info);
  depth = png_get_bit_depth(png, info);
  raster.width = png_get_image_width(png, info);
  raster.height = png_get_image_height(png, info);
  raster.channels = png_get_channels(png, info);
  raster.bit_depth = depth;
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  buffer.resize(rowbytes * raster.height);
  row_ptrs.resize(raster.height);
  for (std::size_t y = 0; y < raster.height; ++y) {
    row_ptrs[y] = buffer.data() + y * rowbytes;
  }
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  const std::size_t count = raster.width * raster.height * raster.channels;
  raster.samples.resize(count);
  if (depth == 16) {
    for (std::size_t i = 0; i < count; ++i) {
      raster.samples[i] = static_cast<std::uint16_t>(
          (buffer[2 * i] << 8) | buffer[2 * i + 1]);  // Big endian.
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) raster.samples[i] = buffer[i];
  }
  return raster;
}

void WritePng(const std::string& path, const Raster& raster) {
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw Error(ErrorCode::kFormat, "cannot write " + path);
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::kFormat, "libpng init failed for " + path);
  }
  const std::size_t bytes = raster.bit_depth == 16 ? 2 : 1;
  const std::size_t rowbytes = raster.width * raster.channels * bytes;
  std::vector<png_byte> buffer(rowbytes * raster.height);
  for (std::size_t i = 0; i < raster.samples.size(); ++i) {
    if (bytes == 2) {
      buffer[2 * i] = static_cast<png_byte>(raster.samples[i] >> 8);
      buffer[2 * i + 1] = static_cast<png_byte>(raster.samples[i] & 0xFF);
    } else {
      buffer[i] = static_cast<png_byte>(raster.samples[i]);
    }
  }
  std::vector<png_bytep> rows(raster.height);
  for (std::size_t y = 0; y < raster.height; ++y) {
    rows[y] = buffer.data() + y * rowbytes;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::kFormat, "failed writing PNG " + path);
  }
  int color = PNG_COLOR_TYPE_GRAY;
  if (raster.channels == 2) color = PNG_COLOR_TYPE_GRAY_ALPHA;
  if (raster.channels == 3) color = PNG_COLOR_TYPE_RGB;
  if (raster.channels == 4) color = PNG_COLOR_TYPE_RGB_ALPHA;
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(raster.width),
               static_cast<png_uint_32>(raster.height), raster.bit_depth, color,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// Next whitespace-delimited token of a PNM header, skipping comments.
std::string PnmToken(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

Raster ReadPnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kFormat, "cannot open " + path);
  const std::string magic = PnmToken(in);
  Raster raster;
  bool binary = false;
  if (magic == "P5" || magic == "P2") {
    raster.channels = 1;
  } else if (magic == "P6" || magic == "P3") {
    raster.channels = 3;
  } else {
    throw Error(ErrorCode::kFormat, "unsupported PNM type in " + path);
  }
  binary = magic == "P5" || magic == "P6";
  try {
    raster.width = std::stoul(PnmToken(in));
    raster.height = std::stoul(PnmToken(in));
    const unsigned long maxval = std::stoul(PnmToken(in));
    if (maxval == 0 || maxval > 65535) throw std::out_of_range("maxval");
    // Other maxvals are rescaled onto the full 8/16-bit range.
    raster.bit_depth = maxval > 255 ? 16 : 8;
    const std::size_t count = raster.width * raster.height * raster.channels;
    raster.samples.resize(count);
    const double rescale =
        static_cast<double>(raster.max_value()) / static_cast<double>(maxval);
    for (std::size_t i = 0; i < count; ++i) {
      unsigned long v = 0;
      if (binary) {
        if (maxval > 255) {
          const int hi = in.get();
          const int lo = in.get();
          if (lo == EOF) throw std::out_of_range("truncated");
          v = static_cast<unsigned long>((hi << 8) | lo);
        } else {
          const int b = in.get();
          if (b == EOF) throw std::out_of_range("truncated");
          v = static_cast<unsigned long>(b);
        }
      } else {
        v = std::stoul(PnmToken(in));
      }
      raster.samples[i] =
          static_cast<std::uint16_t>(std::lround(static_cast<double>(v) * rescale));
    }
  } catch (const std::exception&) {
    throw Error(ErrorCode::kFormat, "malformed PNM " + path);
  }
  return raster;
}

void WritePnm(const std::string& path, const Raster& raster) {
  if (raster.channels != 1 && raster.channels != 3) {
    throw Error(ErrorCode::kFormat, "PNM supports 1 or 3 channels");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kFormat, "cannot write " + path);
  out << (raster.channels == 1 ? "P5" : "P6") << "\n"
      << raster.width << " " << raster.height << "\n"
      << raster.max_value() << "\n";
  for (std::uint16_t v : raster.samples) {
    if (raster.bit_depth == 16) out.put(static_cast<char>(v >> 8));
    out.put(static_cast<char>(v & 0xFF));
  }
  if (!out) throw Error(ErrorCode::kFormat, "failed writing " + path);
}

double SymmetricMedian3(const Matrix& rows, std::size_t h, std::size_t w,
                        long y, long x, Eigen::Index channel) {
  auto reflect = [](long i, long n) {
    if (i < 0) return -i - 1;
    if (i >= n) return 2 * n - i - 1;
    return i;
  };
  std::array<double, 9> v;
  std::size_t k = 0;
  for (long dy = -1; dy <= 1; ++dy) {
    for (long dx = -1; dx <= 1; ++dx) {
      const long yy = reflect(y + dy, static_cast<long>(h));
      const long xx = reflect(x + dx, static_cast<long>(w));
      v[k++] = rows(yy * static_cast<long>(w) + xx, channel);
    }
  }
  std::nth_element(v.begin(), v.begin() + 4, v.end());
  return v[4];
}

}  // namespace

Raster ReadRaster(const std::string& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw Error(ErrorCode::kFormat, "cannot open " + path);
  std::array<unsigned char, 8> sig{};
  probe.read(reinterpret_cast<char*>(sig.data()), sig.size());
  if (probe.gcount() >= 8 && png_sig_cmp(sig.data(), 0, 8) == 0) {
    return ReadPng(path);
  }
  if (probe.gcount() >= 2 && sig[0] == 'P') return ReadPnm(path);
  throw Error(ErrorCode::kFormat, "unrecognized raster format: " + path);
}

void WriteRaster(const std::string& path, const Raster& raster) {
  if (raster.samples.size() != raster.width * raster.height * raster.channels) {
    throw Error(ErrorCode::kShape, "raster sample count mismatch");
  }
  const std::string ext = Lower(std::filesystem::path(path).extension().string());
  const std::string tmp = path + ".tmp";
  if (ext == ".png") {
    WritePng(tmp, raster);
  } else if (ext == ".ppm" || ext == ".pgm" || ext == ".pnm") {
    WritePnm(tmp, raster);
  } else {
    throw Error(ErrorCode::kFormat, "unknown raster extension for " + path);
  }
  std::filesystem::rename(tmp, path);
}

PixelDataset LoadImage(const std::string& path) {
  const Raster r = ReadRaster(path);
  if (r.channels != 3 && r.channels != 4) {
    throw Error(ErrorCode::kFormat, path + " has " + std::to_string(r.channels) +
                                        " channel(s), expected RGB");
  }
  PixelDataset image;
  image.height = r.height;
  image.width = r.width;
  image.source = path;
  const std::size_t n = r.height * r.width;
  image.rows.resize(static_cast<Eigen::Index>(n), 3);
  const double scale = 1.0 / static_cast<double>(r.max_value());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      image.rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
          r.samples[i * r.channels + c] * scale;
    }
  }
  return image;
}

void SaveImage(const std::string& path, const PixelDataset& image,
               int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) {
    throw Error(ErrorCode::kParameter, "bit depth must be 8 or 16");
  }
  Raster r;
  r.height = image.height;
  r.width = image.width;
  r.channels = 3;
  r.bit_depth = bit_depth;
  const double maxv = static_cast<double>(r.max_value());
  r.samples.resize(r.height * r.width * 3);
  for (std::size_t i = 0; i < r.samples.size(); ++i) {
    const double v = image.rows(static_cast<Eigen::Index>(i / 3),
                                static_cast<Eigen::Index>(i % 3));
    r.samples[i] =
        static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * maxv));
  }
  WriteRaster(path, r);
}

Mask LoadMask(const std::string& path) {
  const Raster r = ReadRaster(path);
  if (r.channels != 1) {
    throw Error(ErrorCode::kFormat, path + " has " + std::to_string(r.channels) +
                                        " channels, masks must be single-channel");
  }
  Mask mask;
  mask.height = r.height;
  mask.width = r.width;
  mask.labels.resize(r.samples.size());
  const std::uint32_t maxv = r.max_value();
  for (std::size_t i = 0; i < r.samples.size(); ++i) {
    const std::uint32_t v = r.samples[i];
    if (v != 0 && v != maxv) {
      throw Error(ErrorCode::kAmbiguousMask,
                  path + ": value " + std::to_string(v) + " at pixel " +
                      std::to_string(i) + " is neither 0 nor " +
                      std::to_string(maxv));
    }
    mask.labels[i] = v == maxv ? 1 : 0;
  }
  return mask;
}

void SaveMask(const std::string& path, const Mask& mask) {
  if (mask.labels.size() != mask.height * mask.width) {
    throw Error(ErrorCode::kShape, "mask label count mismatch");
  }
  Raster r;
  r.height = mask.height;
  r.width = mask.width;
  r.channels = 1;
  r.bit_depth = 8;
  int max_label = 1;
  for (int l : mask.labels) max_label = std::max(max_label, l);
  r.samples.resize(mask.labels.size());
  for (std::size_t i = 0; i < mask.labels.size(); ++i) {
    r.samples[i] = static_cast<std::uint16_t>(
        std::max(0, mask.labels[i]) * 255 / max_label);
  }
  WriteRaster(path, r);
}

PixelDataset MedianPrefilter(const PixelDataset& image) {
  PixelDataset out = image;
  for (std::size_t y = 0; y < image.height; ++y) {
    for (std::size_t x = 0; x < image.width; ++x) {
      for (Eigen::Index c = 0; c < image.rows.cols(); ++c) {
        out.rows(static_cast<Eigen::Index>(y * image.width + x), c) =
            SymmetricMedian3(image.rows, image.height, image.width,
                             static_cast<long>(y), static_cast<long>(x), c);
      }
    }
  }
  return out;
}

}  // namespace efmkit
