// Copyright (c) 2026 The VoxTracer Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "voxtracer/plot.hpp"

#include <zlib.h>

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>

#include "voxtracer/errors.hpp"
#include "voxtracer/util.hpp"

namespace vox {

Tensor pca_project_2d(const Tensor& rows) {
  if (rows.rows() < 2) throw RuntimeError("pca: need at least two rows");
  const int n = rows.rows(), d = rows.cols();
  Eigen::MatrixXd x(n, d);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < d; ++c) x(r, c) = rows(r, c);
  Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinV);
  Eigen::MatrixXd proj = x * svd.matrixV().leftCols(2);
  // fix sign for determinism: largest-|value| entry of each axis positive
  for (int c = 0; c < 2; ++c) {
    int arg = 0;
    for (int r = 1; r < n; ++r)
      if (std::abs(proj(r, c)) > std::abs(proj(arg, c))) arg = r;
    if (proj(arg, c) < 0) proj.col(c) *= -1.0;
  }
  Tensor out = Tensor::uninit(n, 2);
  for (int r = 0; r < n; ++r) {
    out(r, 0) = proj(r, 0);
    out(r, 1) = proj(r, 1);
  }
  return out;
}

std::vector<EmbeddingPair> load_pairs_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw RuntimeError("pairs: cannot open " + path);
  std::vector<EmbeddingPair> out;
  std::string line;
  while (std::getline(f, line)) {
    if (trim(line).empty()) continue;
    std::vector<std::string> fields = split(line, '\t');
    if (fields.size() != 3) throw FormatError("pairs: expected 3 tab-separated fields");
    auto parse_vec = [](const std::string& s) {
      std::vector<double> v;
      for (const std::string& tok : split(s, ' '))
        if (!tok.empty()) v.push_back(std::strtod(tok.c_str(), nullptr));
      if (static_cast<int>(v.size()) != kEmbeddingDim) throw FormatError("pairs: expected 256 floats per vector");
      return v;
    };
    EmbeddingPair p;
    p.speaker_id = fields[0];
    p.source.values = parse_vec(fields[1]);
    p.recovered.values = parse_vec(fields[2]);
    out.push_back(std::move(p));
  }
  if (out.empty()) throw RuntimeError("pairs: empty file " + path);
  return out;
}

void save_pairs_file(const std::vector<EmbeddingPair>& pairs, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw RuntimeError("pairs: cannot write " + path);
  char buf[32];
  for (const auto& p : pairs) {
    f << p.speaker_id << '\t';
    for (int i = 0; i < kEmbeddingDim; ++i) {
      std::snprintf(buf, sizeof(buf), "%.9g", p.source.values[i]);
      f << buf << (i + 1 < kEmbeddingDim ? " " : "");
    }
    f << '\t';
    for (int i = 0; i < kEmbeddingDim; ++i) {
      std::snprintf(buf, sizeof(buf), "%.9g", p.recovered.values[i]);
      f << buf << (i + 1 < kEmbeddingDim ? " " : "");
    }
    f << '\n';
  }
}

namespace {

void put_be32(std::vector<unsigned char>& v, std::uint32_t x) {
  v.push_back(static_cast<unsigned char>((x >> 24) & 0xff));
  v.push_back(static_cast<unsigned char>((x >> 16) & 0xff));
  v.push_back(static_cast<unsigned char>((x >> 8) & 0xff));
  v.push_back(static_cast<unsigned char>(x & 0xff));
}

void png_chunk(std::ofstream& f, const char type[4], const std::vector<unsigned char>& data) {
  std::vector<unsigned char> head;
  put_be32(head, static_cast<std::uint32_t>(data.size()));
  f.write(reinterpret_cast<const char*>(head.data()), 4);
  f.write(type, 4);
  if (!data.empty()) f.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  std::uint32_t crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(type), 4);
  if (!data.empty()) crc = crc32(crc, data.data(), static_cast<uInt>(data.size()));
  std::vector<unsigned char> tail;
  put_be32(tail, crc);
  f.write(reinterpret_cast<const char*>(tail.data()), 4);
}

}  // namespace

void write_png_rgb(const std::string& path, const std::vector<unsigned char>& rgb, int width, int height) {
  if (static_cast<std::size_t>(width) * height * 3 != rgb.size()) throw RuntimeError("png: buffer size mismatch");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw RuntimeError("png: cannot write " + path);
  static const unsigned char sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  f.write(reinterpret_cast<const char*>(sig), 8);

  std::vector<unsigned char> ihdr;
  put_be32(ihdr, static_cast<std::uint32_t>(width));
  put_be32(ihdr, static_cast<std::uint32_t>(height));
  ihdr.push_back(8);   // bit depth
  ihdr.push_back(2);   // RGB
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  png_chunk(f, "IHDR", ihdr);

  std::vector<unsigned char> raw;
  raw.reserve(static_cast<std::size_t>(height) * (1 + width * 3));
  for (int y = 0; y < height; ++y) {
    raw.push_back(0);  // filter: none
    raw.insert(raw.end(), rgb.begin() + static_cast<std::size_t>(y) * width * 3,
               rgb.begin() + static_cast<std::size_t>(y + 1) * width * 3);
  }
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<unsigned char> compressed(bound);
  if (compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
    throw RuntimeError("png: deflate failed");
  compressed.resize(bound);
  png_chunk(f, "IDAT", compressed);
  png_chunk(f, "IEND", {});
}

void plot_embedding_pairs(const std::vector<EmbeddingPair>& pairs, const std::string& png_path, int size) {
  if (pairs.empty()) throw RuntimeError("plot: empty pair list");
  Tensor rows = Tensor::uninit(static_cast<int>(pairs.size()) * 2, kEmbeddingDim);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    for (int c = 0; c < kEmbeddingDim; ++c) {
      rows(static_cast<int>(2 * i), c) = pairs[i].source.values[c];
      rows(static_cast<int>(2 * i + 1), c) = pairs[i].recovered.values[c];
    }
  }
  Tensor pts = pca_project_2d(rows);

  double xmin = pts(0, 0), xmax = pts(0, 0), ymin = pts(0, 1), ymax = pts(0, 1);
  for (int r = 0; r < pts.rows(); ++r) {
    xmin = std::min(xmin, pts(r, 0));
    xmax = std::max(xmax, pts(r, 0));
    ymin = std::min(ymin, pts(r, 1));
    ymax = std::max(ymax, pts(r, 1));
  }
  const double spanx = std::max(1e-9, xmax - xmin), spany = std::max(1e-9, ymax - ymin);

  std::map<std::string, int> color_of;
  for (const auto& p : pairs)
    if (color_of.find(p.speaker_id) == color_of.end()) color_of[p.speaker_id] = static_cast<int>(color_of.size());
  static const unsigned char palette[10][3] = {{200, 40, 40},  {40, 120, 200}, {40, 170, 80},  {170, 110, 30},
                                               {130, 60, 180}, {20, 150, 150}, {190, 60, 140}, {110, 110, 30},
                                               {80, 80, 200},  {60, 60, 60}};

  std::vector<unsigned char> img(static_cast<std::size_t>(size) * size * 3, 255);
  auto draw_dot = [&](double x, double y, const unsigned char c[3], bool light, int radius) {
    const int px = static_cast<int>(std::lround((x - xmin) / spanx * (size - 20))) + 10;
    const int py = static_cast<int>(std::lround((y - ymin) / spany * (size - 20))) + 10;
    for (int dy = -radius; dy <= radius; ++dy) {
      for (int dx = -radius; dx <= radius; ++dx) {
        if (dx * dx + dy * dy > radius * radius) continue;
        const int xx = px + dx, yy = py + dy;
        if (xx < 0 || yy < 0 || xx >= size || yy >= size) continue;
        unsigned char* p = &img[(static_cast<std::size_t>(yy) * size + xx) * 3];
        for (int k = 0; k < 3; ++k) p[k] = light ? static_cast<unsigned char>(c[k] / 2 + 128) : c[k];
      }
    }
  };
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const unsigned char* c = palette[color_of[pairs[i].speaker_id] % 10];
    draw_dot(pts(static_cast<int>(2 * i), 0), pts(static_cast<int>(2 * i), 1), c, false, 3);
    draw_dot(pts(static_cast<int>(2 * i + 1), 0), pts(static_cast<int>(2 * i + 1), 1), c, true, 2);
  }
  write_png_rgb(png_path, img, size, size);
}

double nearest_neighbor_purity(const Tensor& points2d, const std::vector<int>& labels) {
  if (points2d.rows() != static_cast<int>(labels.size()) || points2d.rows() < 2)
    throw RuntimeError("purity: label/point mismatch");
  long good = 0;
  for (int i = 0; i < points2d.rows(); ++i) {
    double best = 1e300;
    int arg = -1;
    for (int j = 0; j < points2d.rows(); ++j) {
      if (j == i) continue;
      const double dx = points2d(i, 0) - points2d(j, 0);
      const double dy = points2d(i, 1) - points2d(j, 1);
      const double d = dx * dx + dy * dy;
      if (d < best) {
        best = d;
        arg = j;
      }
    }
    if (labels[static_cast<std::size_t>(arg)] == labels[static_cast<std::size_t>(i)]) ++good;
  }
  return static_cast<double>(good) / points2d.rows();
}

}  // namespace vox
