/*
 * Copyright 2026 The cig Authors.
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

#include "cig/heatmap.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "cig/errors.hpp"
#include "binio.hpp"

namespace cig {
namespace {

std::uint8_t channel(double t) {
  return static_cast<std::uint8_t>(std::llround(t * 255.0));
}

void color_of(double t, HeatmapSpec::Colormap map, std::uint8_t rgb[3]) {
  if (map == HeatmapSpec::Colormap::kGrayscale) {
    rgb[0] = rgb[1] = rgb[2] = channel(t);
    return;
  }
  // Diverging blue -> white -> red.
  if (t < 0.5) {
    const double u = t * 2.0;
    rgb[0] = channel(u);
    rgb[1] = channel(u);
    rgb[2] = 255;
  } else {
    const double u = (t - 0.5) * 2.0;
    rgb[0] = 255;
    rgb[1] = channel(1.0 - u);
    rgb[2] = channel(1.0 - u);
  }
}

void put_be32(std::vector<std::uint8_t>& buf, std::uint32_t v) {
  buf.push_back(static_cast<std::uint8_t>(v >> 24));
  buf.push_back(static_cast<std::uint8_t>(v >> 16));
  buf.push_back(static_cast<std::uint8_t>(v >> 8));
  buf.push_back(static_cast<std::uint8_t>(v));
}

void put_chunk(std::vector<std::uint8_t>& out, const char type[4],
               const std::vector<std::uint8_t>& payload) {
  put_be32(out, static_cast<std::uint32_t>(payload.size()));
  const std::size_t start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), payload.begin(), payload.end());
  const std::uint32_t crc = static_cast<std::uint32_t>(
      ::crc32(0, out.data() + start, static_cast<uInt>(out.size() - start)));
  put_be32(out, crc);
}

}  // namespace

Image render_heatmap(
    const std::vector<std::pair<std::int32_t, std::int32_t>>& coords,
    const Tensor& saliency, const HeatmapSpec& spec) {
  if (coords.empty() || saliency.size() == 0) {
    throw ParameterError("render_heatmap: empty input");
  }
  if (coords.size() != saliency.size()) {
    throw ParameterError("render_heatmap: coords/saliency length mismatch");
  }
  if (spec.cell_size < 1) {
    throw ParameterError("render_heatmap: cell_size must be >= 1");
  }

  std::int32_t min_x = coords[0].first, max_x = coords[0].first;
  std::int32_t min_y = coords[0].second, max_y = coords[0].second;
  for (const auto& [x, y] : coords) {
    min_x = std::min(min_x, x);
    max_x = std::max(max_x, x);
    min_y = std::min(min_y, y);
    max_y = std::max(max_y, y);
  }
  double lo = saliency[0], hi = saliency[0];
  for (std::size_t i = 1; i < saliency.size(); ++i) {
    lo = std::min(lo, saliency[i]);
    hi = std::max(hi, saliency[i]);
  }
  const bool constant = hi == lo;

  const std::size_t cell = spec.cell_size;
  Image image;
  image.width = static_cast<std::size_t>(max_x - min_x + 1) * cell;
  image.height = static_cast<std::size_t>(max_y - min_y + 1) * cell;
  image.pixels.assign(image.width * image.height * 3, 0);

  for (std::size_t i = 0; i < coords.size(); ++i) {
    const double t =
        constant ? 0.5 : (saliency[i] - lo) / (hi - lo);
    std::uint8_t rgb[3];
    color_of(t, spec.colormap, rgb);
    const std::size_t cx = static_cast<std::size_t>(coords[i].first - min_x);
    const std::size_t cy = static_cast<std::size_t>(coords[i].second - min_y);
    for (std::size_t py = 0; py < cell; ++py) {
      const std::size_t row = cy * cell + py;
      for (std::size_t px = 0; px < cell; ++px) {
        const std::size_t col = cx * cell + px;
        std::uint8_t* p = &image.pixels[(row * image.width + col) * 3];
        p[0] = rgb[0];
        p[1] = rgb[1];
        p[2] = rgb[2];
      }
    }
  }
  return image;
}

void write_ppm(const Image& image, const std::string& path) {
  char header[64];
  const int n = std::snprintf(header, sizeof header, "P6\n%zu %zu\n255\n",
                              image.width, image.height);
  std::vector<std::uint8_t> bytes(header, header + n);
  bytes.insert(bytes.end(), image.pixels.begin(), image.pixels.end());
  detail::atomic_write_file(path, bytes);
}

void write_png(const Image& image, const std::string& path) {
  // Raw scanlines, filter byte 0 per row.
  std::vector<std::uint8_t> raw;
  raw.reserve(image.height * (1 + image.width * 3));
  for (std::size_t y = 0; y < image.height; ++y) {
    raw.push_back(0);
    const std::uint8_t* row = &image.pixels[y * image.width * 3];
    raw.insert(raw.end(), row, row + image.width * 3);
  }
  uLongf bound = ::compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> deflated(bound);
  if (::compress2(deflated.data(), &bound, raw.data(),
                  static_cast<uLong>(raw.size()), 6) != Z_OK) {
    throw IoError("png: deflate failed");
  }
  deflated.resize(bound);

  std::vector<std::uint8_t> out = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
  std::vector<std::uint8_t> ihdr;
  put_be32(ihdr, static_cast<std::uint32_t>(image.width));
  put_be32(ihdr, static_cast<std::uint32_t>(image.height));
  ihdr.push_back(8);   // bit depth
  ihdr.push_back(2);   // truecolor
  ihdr.push_back(0);   // compression
  ihdr.push_back(0);   // filter
  ihdr.push_back(0);   // no interlace
  put_chunk(out, "IHDR", ihdr);
  put_chunk(out, "IDAT", deflated);
  put_chunk(out, "IEND", {});
  detail::atomic_write_file(path, out);
}

}  // namespace cig
