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

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cig/tensor.hpp"

namespace cig {

/// One slide as an unordered bag of patch feature vectors.
///
/// Features are stored on disk as 32-bit floats and widened to doubles in
/// memory; generators and importers quantize to 32-bit at creation so a
/// write/read round trip is bit-exact.
struct FeatureBag {
  std::string slide_id;
  std::string patient_id;
  std::uint16_t label = 0;
  Tensor features;  // n x d
  std::vector<std::pair<std::int32_t, std::int32_t>> coords;  // n entries
  std::vector<std::uint8_t> mask;  // ground-truth patch labels; may be empty

  std::size_t n_patches() const { return features.rank() == 2 ? features.rows() : 0; }
  std::size_t feature_dim() const { return features.rank() == 2 ? features.cols() : 0; }
  bool has_mask() const { return !mask.empty(); }
};

struct SlideRecord {
  std::string id;
  std::string patient;
  std::uint16_t label = 0;
  std::string path;   // bag file, relative to the manifest's directory
  std::string split;  // "train" | "val" | "test" | "" (unassigned)
};

struct DatasetManifest {
  std::vector<std::string> class_names;
  std::vector<SlideRecord> slides;
  std::optional<std::uint64_t> generation_seed;
};

/// Manifest plus loaded bags, keyed by slide id.
struct Dataset {
  DatasetManifest manifest;
  std::map<std::string, FeatureBag> bags;

  const FeatureBag& bag(const std::string& slide_id) const;
  std::vector<const FeatureBag*> split_bags(const std::string& split) const;
};

// ---- FBAG1 binary format -------------------------------------------------

void write_bag(const FeatureBag& bag, const std::string& path);
FeatureBag read_bag(const std::string& path);

// ---- manifest (JSON) -----------------------------------------------------

/// Writing validates that no patient straddles two splits.
void write_manifest(const DatasetManifest& manifest, const std::string& path);
DatasetManifest read_manifest(const std::string& path);
/// Reads a manifest and every bag it references.
Dataset load_dataset(const std::string& manifest_path);

// ---- CSV interop ---------------------------------------------------------

/// Rows: slide_id,x,y,f0..f{d-1}. Imported values are quantized to f32.
std::vector<FeatureBag> import_bags_csv(const std::string& path);
void export_bag_csv(const FeatureBag& bag, const std::string& path);

// ---- synthetic planted-signal dataset -------------------------------------

struct SyntheticConfig {
  std::size_t slides_per_class = 100;
  std::size_t patches_min = 200;
  std::size_t patches_max = 200;
  std::size_t feature_dim = 32;
  double background_sigma = 0.5;
  double shift_magnitude = 4.0;
  double tumor_frac_min = 0.05;
  double tumor_frac_max = 0.20;
  std::uint64_t seed = 11;
};

struct SyntheticDataset {
  DatasetManifest manifest;  // paths empty until bags are written
  std::vector<FeatureBag> bags;
};

/// Two classes: negative slides draw every patch from the background
/// Gaussian; positive slides plant a per-slide fraction of shifted patches
/// and record them in the mask. Deterministic in config.seed.
SyntheticDataset generate_synthetic(const SyntheticConfig& config);

/// Assigns train/val/test by shuffling patients (never slides), so every
/// slide of a patient lands in the same split.
void split_patients(DatasetManifest& manifest,
                    const std::array<double, 3>& ratios, std::uint64_t seed);

/// Writes bags under dir/bags/ and the manifest to dir/manifest.json.
void write_dataset(const SyntheticDataset& dataset, const std::string& dir);

}  // namespace cig
