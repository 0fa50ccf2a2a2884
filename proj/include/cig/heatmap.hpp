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

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cig/tensor.hpp"

namespace cig {

struct HeatmapSpec {
  enum class Colormap { kGrayscale, kDiverging };
  Colormap colormap = Colormap::kGrayscale;
  std::size_t cell_size = 1;  // pixels per grid cell
};

/// RGB raster; pixels row-major, 3 bytes each.
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;
};

/// Rasterizes per-patch saliency onto the bounding grid of the coords.
/// Saliency is min-max normalized per slide (a constant map renders
/// mid-scale); cells not covered by any patch stay black.
Image render_heatmap(
    const std::vector<std::pair<std::int32_t, std::int32_t>>& coords,
    const Tensor& saliency, const HeatmapSpec& spec);

/// Binary P6 portable pixmap; the byte-exact canonical image encoding.
void write_ppm(const Image& image, const std::string& path);

/// PNG convenience encoding of the same pixel buffer (fixed zlib level, so
/// output bytes are reproducible).
void write_png(const Image& image, const std::string& path);

}  // namespace cig
