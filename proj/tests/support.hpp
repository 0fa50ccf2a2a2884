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

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "cig/data_io.hpp"
#include "cig/fixtures.hpp"
#include "cig/rng.hpp"
#include "cig/tensor.hpp"

namespace test_support {

/// Unique scratch directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("cig_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string str(const std::string& name = "") const {
    return name.empty() ? path_.string() : (path_ / name).string();
  }

 private:
  std::filesystem::path path_;
};

inline std::vector<std::uint8_t> slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
}

inline double f32(double v) { return static_cast<double>(static_cast<float>(v)); }

/// Random bag with f32-representable features, ready for FBAG round trips.
inline cig::FeatureBag random_bag(std::size_t n, std::size_t d,
                                  std::uint64_t seed, bool with_mask = false) {
  cig::Rng rng(seed);
  cig::FeatureBag bag;
  bag.slide_id = "slide_" + std::to_string(seed);
  bag.patient_id = "patient_" + std::to_string(seed % 7);
  bag.label = static_cast<std::uint16_t>(seed % 2);
  cig::Tensor features({n, d});
  for (double& v : features.data()) v = f32(rng.normal());
  bag.features = std::move(features);
  for (std::size_t i = 0; i < n; ++i) {
    bag.coords.emplace_back(static_cast<std::int32_t>(i % 5),
                            static_cast<std::int32_t>(i / 5));
  }
  if (with_mask) {
    bag.mask.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      bag.mask[i] = rng.uniform() < 0.3 ? 1 : 0;
    }
  }
  return bag;
}

/// Max relative error with an absolute floor, the gradcheck metric.
inline double rel_err(const cig::Tensor& got, const cig::Tensor& want) {
  double worst = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    const double denom =
        std::max({std::fabs(got[i]), std::fabs(want[i]), 1e-6});
    worst = std::max(worst, std::fabs(got[i] - want[i]) / denom);
  }
  return worst;
}

}  // namespace test_support
