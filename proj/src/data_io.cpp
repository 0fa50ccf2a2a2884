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

#include "cig/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "cig/errors.hpp"
#include "cig/rng.hpp"
#include "binio.hpp"

namespace fs = std::filesystem;

namespace cig {
namespace {

constexpr char kBagMagic[] = "FBAG1";
constexpr std::uint16_t kBagVersion = 1;

double quantize_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

void format_double(std::string& out, double v) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
  out.append(buf, static_cast<std::size_t>(n));
}

void check_patient_splits(const DatasetManifest& manifest) {
  std::map<std::string, std::string> seen;
  for (const SlideRecord& s : manifest.slides) {
    if (s.split.empty()) continue;
    auto [it, inserted] = seen.emplace(s.patient, s.split);
    if (!inserted && it->second != s.split) {
      throw DatasetError("patient " + s.patient +
                         " appears in splits " + it->second + " and " +
                         s.split);
    }
  }
}

}  // namespace

const FeatureBag& Dataset::bag(const std::string& slide_id) const {
  const auto it = bags.find(slide_id);
  if (it == bags.end()) throw DatasetError("unknown slide id: " + slide_id);
  return it->second;
}

std::vector<const FeatureBag*> Dataset::split_bags(
    const std::string& split) const {
  std::vector<const FeatureBag*> out;
  for (const SlideRecord& s : manifest.slides) {
    if (s.split == split) out.push_back(&bag(s.id));
  }
  return out;
}

void write_bag(const FeatureBag& bag, const std::string& path) {
  if (bag.features.rank() != 2 || bag.n_patches() == 0) {
    throw ParameterError("write_bag: features must be a nonempty n x d matrix");
  }
  if (bag.coords.size() != bag.n_patches()) {
    throw ParameterError("write_bag: coords length must equal patch count");
  }
  if (bag.has_mask() && bag.mask.size() != bag.n_patches()) {
    throw ParameterError("write_bag: mask length must equal patch count");
  }
  detail::ByteWriter w;
  w.put_bytes(kBagMagic, 5);
  w.put_u16(kBagVersion);
  w.put_u32(static_cast<std::uint32_t>(bag.n_patches()));
  w.put_u32(static_cast<std::uint32_t>(bag.feature_dim()));
  w.put_u16(bag.label);
  w.put_string(bag.patient_id);
  w.put_string(bag.slide_id);
  for (const auto& [x, y] : bag.coords) {
    w.put_i32(x);
    w.put_i32(y);
  }
  for (const double v : bag.features.data()) {
    w.put_f32(static_cast<float>(v));
  }
  w.put_u8(bag.has_mask() ? 1 : 0);
  if (bag.has_mask()) w.put_bytes(bag.mask.data(), bag.mask.size());
  w.put_crc();
  detail::atomic_write_file(path, w.bytes());
}

FeatureBag read_bag(const std::string& path) {
  detail::ByteReader r(detail::read_file_bytes(path));
  r.expect_magic(kBagMagic, 5, "FBAG1");
  r.check_crc("FBAG1");
  const std::uint16_t version = r.get_u16();
  if (version != kBagVersion) {
    throw FormatError("FBAG1: unsupported version " + std::to_string(version),
                      5);
  }
  const std::uint32_t n = r.get_u32();
  const std::uint32_t d = r.get_u32();
  FeatureBag bag;
  bag.label = r.get_u16();
  bag.patient_id = r.get_string();
  bag.slide_id = r.get_string();
  bag.coords.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::int32_t x = r.get_i32();
    const std::int32_t y = r.get_i32();
    bag.coords.emplace_back(x, y);
  }
  Tensor features({n, d});
  for (std::size_t i = 0; i < features.size(); ++i) {
    features[i] = static_cast<double>(r.get_f32());
  }
  bag.features = std::move(features);
  if (r.get_u8() != 0) {
    bag.mask.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) bag.mask[i] = r.get_u8();
  }
  r.expect_consumed("FBAG1");
  return bag;
}

void write_manifest(const DatasetManifest& manifest, const std::string& path) {
  check_patient_splits(manifest);
  nlohmann::json j;
  j["class_names"] = manifest.class_names;
  if (manifest.generation_seed) j["generation_seed"] = *manifest.generation_seed;
  nlohmann::json slides = nlohmann::json::array();
  for (const SlideRecord& s : manifest.slides) {
    nlohmann::json rec;
    rec["id"] = s.id;
    rec["patient"] = s.patient;
    rec["label"] = s.label;
    rec["path"] = s.path;
    rec["split"] = s.split;
    slides.push_back(std::move(rec));
  }
  j["slides"] = std::move(slides);
  detail::atomic_write_text(path, j.dump(2) + "\n");
}

DatasetManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what(), 0);
  }
  DatasetManifest m;
  m.class_names = j.at("class_names").get<std::vector<std::string>>();
  if (j.contains("generation_seed")) {
    m.generation_seed = j.at("generation_seed").get<std::uint64_t>();
  }
  for (const nlohmann::json& rec : j.at("slides")) {
    SlideRecord s;
    s.id = rec.at("id").get<std::string>();
    s.patient = rec.at("patient").get<std::string>();
    s.label = rec.at("label").get<std::uint16_t>();
    s.path = rec.at("path").get<std::string>();
    s.split = rec.value("split", "");
    if (s.label >= m.class_names.size()) {
      throw DatasetError("slide " + s.id + ": label out of range");
    }
    m.slides.push_back(std::move(s));
  }
  check_patient_splits(m);
  return m;
}

Dataset load_dataset(const std::string& manifest_path) {
  Dataset ds;
  ds.manifest = read_manifest(manifest_path);
  const fs::path base = fs::path(manifest_path).parent_path();
  for (const SlideRecord& s : ds.manifest.slides) {
    ds.bags.emplace(s.id, read_bag((base / s.path).string()));
  }
  return ds;
}

std::vector<FeatureBag> import_bags_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open csv: " + path);
  std::vector<FeatureBag> bags;
  std::map<std::string, std::size_t> index;
  std::map<std::string, std::vector<double>> features;
  std::string line;
  std::size_t line_no = 0;
  std::size_t dim = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (line_no == 1 && fields.size() >= 4 && fields[1] == "x") continue;
    if (fields.size() < 4) {
      throw FormatError("csv: expected slide_id,x,y,f0,... at line " +
                            std::to_string(line_no),
                        0);
    }
    const std::size_t row_dim = fields.size() - 3;
    if (dim == 0) dim = row_dim;
    if (row_dim != dim) {
      throw FormatError("csv: inconsistent feature count at line " +
                            std::to_string(line_no),
                        0);
    }
    const std::string& slide = fields[0];
    auto [it, inserted] = index.emplace(slide, bags.size());
    if (inserted) {
      FeatureBag bag;
      bag.slide_id = slide;
      bag.patient_id = slide;
      bags.push_back(std::move(bag));
    }
    FeatureBag& bag = bags[it->second];
    bag.coords.emplace_back(std::stoi(fields[1]), std::stoi(fields[2]));
    std::vector<double>& feat = features[slide];
    for (std::size_t i = 3; i < fields.size(); ++i) {
      feat.push_back(quantize_f32(std::stod(fields[i])));
    }
  }
  for (FeatureBag& bag : bags) {
    std::vector<double>& feat = features[bag.slide_id];
    const std::size_t n = bag.coords.size();
    bag.features = Tensor({n, dim}, std::move(feat));
  }
  return bags;
}

void export_bag_csv(const FeatureBag& bag, const std::string& path) {
  std::string out = "slide_id,x,y";
  for (std::size_t j = 0; j < bag.feature_dim(); ++j) {
    out += ",f" + std::to_string(j);
  }
  out += "\n";
  for (std::size_t i = 0; i < bag.n_patches(); ++i) {
    out += bag.slide_id;
    out += ',' + std::to_string(bag.coords[i].first);
    out += ',' + std::to_string(bag.coords[i].second);
    for (std::size_t j = 0; j < bag.feature_dim(); ++j) {
      out += ',';
      format_double(out, bag.features.at(i, j));
    }
    out += '\n';
  }
  detail::atomic_write_text(path, out);
}

SyntheticDataset generate_synthetic(const SyntheticConfig& config) {
  if (config.feature_dim < 2) {
    throw ParameterError("synthetic: feature_dim must be >= 2");
  }
  if (config.slides_per_class == 0) {
    throw ParameterError("synthetic: slides_per_class must be >= 1");
  }
  if (config.patches_min < 1 || config.patches_min > config.patches_max) {
    throw ParameterError("synthetic: invalid patches range");
  }
  if (!(config.tumor_frac_min > 0.0) || config.tumor_frac_min > config.tumor_frac_max ||
      config.tumor_frac_max > 1.0) {
    throw ParameterError("synthetic: tumor fraction must lie in (0, 1]");
  }
  if (!(config.background_sigma > 0.0)) {
    throw ParameterError("synthetic: background_sigma must be > 0");
  }

  SyntheticDataset out;
  out.manifest.class_names = {"normal", "tumor"};
  out.manifest.generation_seed = config.seed;

  // One shared shift direction per dataset.
  Rng dir_rng(derive_seed(config.seed, "shift-direction"));
  std::vector<double> shift(config.feature_dim);
  double norm = 0.0;
  for (double& v : shift) {
    v = dir_rng.normal();
    norm += v * v;
  }
  norm = std::sqrt(norm);
  for (double& v : shift) v = v / norm * config.shift_magnitude;

  for (std::uint16_t label = 0; label < 2; ++label) {
    for (std::size_t s = 0; s < config.slides_per_class; ++s) {
      Rng rng(derive_seed(config.seed, label == 0 ? "slide/neg" : "slide/pos", s));
      char idbuf[64];
      std::snprintf(idbuf, sizeof idbuf, "syn_%s_%04zu",
                    label == 0 ? "neg" : "pos", s);
      FeatureBag bag;
      bag.slide_id = idbuf;
      bag.patient_id = std::string("pat_") + idbuf;
      bag.label = label;
      const std::size_t n =
          config.patches_min +
          (config.patches_max > config.patches_min
               ? rng.uniform_index(config.patches_max - config.patches_min + 1)
               : 0);
      Tensor features({n, config.feature_dim});
      for (double& v : features.data()) {
        v = quantize_f32(rng.normal(0.0, config.background_sigma));
      }
      const std::size_t grid_w = static_cast<std::size_t>(
          std::ceil(std::sqrt(static_cast<double>(n))));
      bag.coords.reserve(n);
      for (std::size_t i = 0; i < n; ++i) {
        bag.coords.emplace_back(static_cast<std::int32_t>(i % grid_w),
                                static_cast<std::int32_t>(i / grid_w));
      }
      if (label == 1) {
        const double frac =
            config.tumor_frac_min == config.tumor_frac_max
                ? config.tumor_frac_min
                : rng.uniform(config.tumor_frac_min, config.tumor_frac_max);
        std::size_t count = static_cast<std::size_t>(
            std::llround(frac * static_cast<double>(n)));
        count = std::clamp<std::size_t>(count, 1, n);
        // Plant a contiguous blob: the `count` grid-nearest patches to a
        // random center, so rendered heatmaps have a coherent region.
        const std::size_t center = rng.uniform_index(n);
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        const auto d2 = [&](std::size_t i) {
          const double dx = static_cast<double>(bag.coords[i].first -
                                                bag.coords[center].first);
          const double dy = static_cast<double>(bag.coords[i].second -
                                                bag.coords[center].second);
          return dx * dx + dy * dy;
        };
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
          const double da = d2(a), db = d2(b);
          if (da != db) return da < db;
          return a < b;
        });
        bag.mask.assign(n, 0);
        for (std::size_t i = 0; i < count; ++i) {
          const std::size_t p = order[i];
          bag.mask[p] = 1;
          for (std::size_t j = 0; j < config.feature_dim; ++j) {
            features.at(p, j) = quantize_f32(features.at(p, j) + shift[j]);
          }
        }
      } else {
        bag.mask.assign(n, 0);
      }
      bag.features = std::move(features);

      SlideRecord rec;
      rec.id = bag.slide_id;
      rec.patient = bag.patient_id;
      rec.label = label;
      rec.path = "bags/" + bag.slide_id + ".fbag";
      out.manifest.slides.push_back(std::move(rec));
      out.bags.push_back(std::move(bag));
    }
  }
  return out;
}

void split_patients(DatasetManifest& manifest,
                    const std::array<double, 3>& ratios, std::uint64_t seed) {
  double total = 0.0;
  for (const double r : ratios) {
    if (r < 0.0) throw ParameterError("split: ratios must be nonnegative");
    total += r;
  }
  if (std::fabs(total - 1.0) > 1e-9) {
    throw ParameterError("split: ratios must sum to 1");
  }
  std::vector<std::string> patients;
  {
    std::set<std::string> seen;
    for (const SlideRecord& s : manifest.slides) {
      if (seen.insert(s.patient).second) patients.push_back(s.patient);
    }
  }
  std::sort(patients.begin(), patients.end());
  Rng rng(derive_seed(seed, "patient-split"));
  rng.shuffle(patients);

  const std::size_t n = patients.size();
  const std::size_t c1 = static_cast<std::size_t>(
      std::llround(ratios[0] * static_cast<double>(n)));
  const std::size_t c2 = static_cast<std::size_t>(
      std::llround((ratios[0] + ratios[1]) * static_cast<double>(n)));
  std::map<std::string, std::string> assignment;
  for (std::size_t i = 0; i < n; ++i) {
    assignment[patients[i]] = i < c1 ? "train" : (i < c2 ? "val" : "test");
  }
  for (SlideRecord& s : manifest.slides) s.split = assignment[s.patient];
}

void write_dataset(const SyntheticDataset& dataset, const std::string& dir) {
  const fs::path base(dir);
  fs::create_directories(base / "bags");
  for (std::size_t i = 0; i < dataset.bags.size(); ++i) {
    write_bag(dataset.bags[i],
              (base / dataset.manifest.slides[i].path).string());
  }
  write_manifest(dataset.manifest, (base / "manifest.json").string());
}

}  // namespace cig
