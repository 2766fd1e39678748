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

#include "efmkit/dataset.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numbers>
#include <random>
#include <sstream>

#include "efmkit/error.h"

namespace efmkit {
namespace {

std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) {
      cell.pop_back();
    }
    std::size_t start = 0;
    while (start < cell.size() && cell[start] == ' ') ++start;
    cells.push_back(cell.substr(start));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

bool ParseDouble(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

}  // namespace

std::vector<std::vector<std::size_t>> PatchIndices(std::size_t height,
                                                   std::size_t width,
                                                   std::size_t side) {
  if (side < 1) throw Error(ErrorCode::kParameter, "patch side must be >= 1");
  std::vector<std::vector<std::size_t>> patches;
  for (std::size_t y0 = 0; y0 < height; y0 += side) {
    for (std::size_t x0 = 0; x0 < width; x0 += side) {
      std::vector<std::size_t> idx;
      const std::size_t y1 = std::min(height, y0 + side);
      const std::size_t x1 = std::min(width, x0 + side);
      idx.reserve((y1 - y0) * (x1 - x0));
      for (std::size_t y = y0; y < y1; ++y) {
        for (std::size_t x = x0; x < x1; ++x) idx.push_back(y * width + x);
      }
      patches.push_back(std::move(idx));
    }
  }
  return patches;
}

BatchStream PatchStream(const PixelDataset& image, const Mask& mask,
                        std::size_t side) {
  if (side < 1) throw Error(ErrorCode::kParameter, "patch side must be >= 1");
  if (image.height != mask.height || image.width != mask.width) {
    throw Error(ErrorCode::kShape,
                "image is " + std::to_string(image.height) + "x" +
                    std::to_string(image.width) + ", mask is " +
                    std::to_string(mask.height) + "x" +
                    std::to_string(mask.width));
  }
  auto img = std::make_shared<const PixelDataset>(image);
  auto msk = std::make_shared<const Mask>(mask);
  return [img, msk, side](const BatchVisitor& visit) {
    for (const auto& idx : PatchIndices(img->height, img->width, side)) {
      LabeledBatch batch;
      batch.rows.resize(static_cast<Eigen::Index>(idx.size()), img->rows.cols());
      batch.labels.resize(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) {
        batch.rows.row(static_cast<Eigen::Index>(i)) =
            img->rows.row(static_cast<Eigen::Index>(idx[i]));
        batch.labels[i] = msk->labels[idx[i]];
      }
      visit(batch);
    }
  };
}

BatchStream ChunkStream(const LabeledBatch& data, std::size_t batch_rows) {
  if (batch_rows < 1) throw Error(ErrorCode::kParameter, "batch_rows must be >= 1");
  auto shared = std::make_shared<const LabeledBatch>(data);
  return [shared, batch_rows](const BatchVisitor& visit) {
    const std::size_t n = shared->size();
    for (std::size_t start = 0; start < n; start += batch_rows) {
      const std::size_t len = std::min(batch_rows, n - start);
      LabeledBatch batch;
      batch.rows = shared->rows.middleRows(static_cast<Eigen::Index>(start),
                                           static_cast<Eigen::Index>(len));
      batch.labels.assign(shared->labels.begin() + static_cast<long>(start),
                          shared->labels.begin() + static_cast<long>(start + len));
      visit(batch);
    }
  };
}

BatchStream ConcatStreams(std::vector<BatchStream> streams) {
  return [streams = std::move(streams)](const BatchVisitor& visit) {
    for (const auto& s : streams) s(visit);
  };
}

SynthKind ParseSynthKind(const std::string& name) {
  if (name == "blobs") return SynthKind::kBlobs;
  if (name == "annulus") return SynthKind::kAnnulus;
  if (name == "xor") return SynthKind::kXor;
  throw Error(ErrorCode::kParameter, "unknown synthetic kind '" + name +
                                         "' (blobs, annulus, xor)");
}

LabeledBatch SynthGenerate(SynthKind kind, std::size_t n, double noise,
                           std::uint64_t seed) {
  if (n < 4) throw Error(ErrorCode::kParameter, "synthetic sets need n >= 4");
  if (!(noise >= 0.0)) throw Error(ErrorCode::kParameter, "noise must be >= 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  LabeledBatch out;
  out.rows.resize(static_cast<Eigen::Index>(n), 2);
  out.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double x = 0.0;
    double y = 0.0;
    int label = 0;
    switch (kind) {
      case SynthKind::kBlobs: {
        label = static_cast<int>(i % 2);
        const double c = label ? 1.0 : -1.0;
        x = c;
        y = c;
        break;
      }
      case SynthKind::kAnnulus: {
        label = static_cast<int>(i % 2);
        const double theta = 2.0 * std::numbers::pi * unit(rng);
        // Uniform in area: r^2 uniform between the radii squared.
        const double r = label ? 0.5 * std::sqrt(unit(rng))
                               : std::sqrt(0.64 + (1.44 - 0.64) * unit(rng));
        x = r * std::cos(theta);
        y = r * std::sin(theta);
        break;
      }
      case SynthKind::kXor: {
        const std::size_t q = i % 4;
        x = (q == 0 || q == 3) ? 1.0 : -1.0;
        y = (q == 0 || q == 1) ? 1.0 : -1.0;
        label = (x > 0) == (y > 0) ? 1 : 0;
        break;
      }
    }
    const auto r = static_cast<Eigen::Index>(i);
    out.rows(r, 0) = x + noise * gauss(rng);
    out.rows(r, 1) = y + noise * gauss(rng);
    out.labels[i] = label;
  }
  return out;
}

CsvTable ReadCsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kFormat, "cannot open " + path);
  CsvTable table;
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = SplitCsvLine(line);
    std::vector<double> values(cells.size());
    bool numeric = true;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      numeric &= ParseDouble(cells[i], values[i]);
    }
    if (!numeric) {
      if (rows.empty() && !table.header) {
        table.header = cells;
        width = cells.size();
        continue;
      }
      throw Error(ErrorCode::kFormat,
                  path + ":" + std::to_string(line_no) + ": non-numeric cell");
    }
    if (width == 0) width = values.size();
    if (values.size() != width) {
      throw Error(ErrorCode::kShape, path + ":" + std::to_string(line_no) +
                                         ": expected " + std::to_string(width) +
                                         " columns, got " +
                                         std::to_string(values.size()));
    }
    rows.push_back(std::move(values));
  }
  table.values.resize(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(width));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      table.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          rows[r][c];
    }
  }
  return table;
}

void WriteFileAtomic(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(ErrorCode::kFormat, "cannot write " + path);
    out << contents;
    if (!out) throw Error(ErrorCode::kFormat, "failed writing " + path);
  }
  std::filesystem::rename(tmp, path);
}

void WriteCsv(const std::string& path, const CsvTable& table) {
  std::string text;
  if (table.header) {
    for (std::size_t i = 0; i < table.header->size(); ++i) {
      text += (i ? "," : "") + (*table.header)[i];
    }
    text += "\n";
  }
  char buf[40];
  for (Eigen::Index r = 0; r < table.values.rows(); ++r) {
    for (Eigen::Index c = 0; c < table.values.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), "%s%.17g", c ? "," : "",
                    table.values(r, c));
      text += buf;
    }
    text += "\n";
  }
  WriteFileAtomic(path, text);
}

LabeledBatch LabeledFromTable(const CsvTable& table, int label_column) {
  const auto cols = table.values.cols();
  if (cols < 2) {
    throw Error(ErrorCode::kShape, "labeled table needs features and a label");
  }
  Eigen::Index lc = cols - 1;
  if (label_column >= 0) {
    lc = label_column;
  } else if (table.header) {
    for (std::size_t i = 0; i < table.header->size(); ++i) {
      if ((*table.header)[i] == "label") lc = static_cast<Eigen::Index>(i);
    }
  }
  if (lc >= cols) throw Error(ErrorCode::kShape, "label column out of range");
  LabeledBatch out;
  out.rows.resize(table.values.rows(), cols - 1);
  out.labels.resize(static_cast<std::size_t>(table.values.rows()));
  for (Eigen::Index r = 0; r < table.values.rows(); ++r) {
    Eigen::Index k = 0;
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (c == lc) continue;
      out.rows(r, k++) = table.values(r, c);
    }
    const double v = table.values(r, lc);
    if (v != 0.0 && v != 1.0) {
      throw Error(ErrorCode::kLabel, "row " + std::to_string(r) +
                                         " has non-binary label");
    }
    out.labels[static_cast<std::size_t>(r)] = static_cast<int>(v);
  }
  return out;
}

}  // namespace efmkit
