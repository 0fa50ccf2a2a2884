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

#include "cig/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "cig/errors.hpp"
#include "cig/rng.hpp"
#include "binio.hpp"

namespace cig {

ReferencePool build_reference_pool(
    const std::vector<const FeatureBag*>& opposite_bags,
    std::size_t target_class, std::size_t n_slides, std::size_t per_slide,
    std::uint64_t seed) {
  if (opposite_bags.empty()) {
    throw PoolError("reference pool: no opposite-class slides");
  }
  if (per_slide < 1) throw ParameterError("reference pool: per_slide < 1");
  if (n_slides < 1) throw ParameterError("reference pool: n_slides < 1");
  for (const FeatureBag* bag : opposite_bags) {
    if (bag->label == target_class) {
      throw ContractError("reference pool: slide " + bag->slide_id +
                          " belongs to the target class");
    }
  }

  // Group by class, deterministically ordered by slide id within a class.
  std::map<std::size_t, std::vector<const FeatureBag*>> by_class;
  for (const FeatureBag* bag : opposite_bags) by_class[bag->label].push_back(bag);
  for (auto& [cls, bags] : by_class) {
    std::sort(bags.begin(), bags.end(),
              [](const FeatureBag* a, const FeatureBag* b) {
                return a->slide_id < b->slide_id;
              });
  }

  ReferencePool pool;
  pool.target_class = target_class;
  pool.seed = seed;
  for (const auto& [cls, bags] : by_class) pool.source_classes.push_back(cls);

  // Shuffle each class's slide list once, then take slides round-robin
  // across classes until the quota or the supply runs out.
  Rng rng(derive_seed(seed, "pool-slides"));
  std::map<std::size_t, std::vector<const FeatureBag*>> shuffled = by_class;
  for (auto& [cls, bags] : shuffled) rng.shuffle(bags);
  std::vector<const FeatureBag*> chosen;
  std::map<std::size_t, std::size_t> cursor;
  while (chosen.size() < n_slides) {
    bool any = false;
    for (const auto& [cls, bags] : shuffled) {
      std::size_t& at = cursor[cls];
      if (at < bags.size() && chosen.size() < n_slides) {
        chosen.push_back(bags[at++]);
        any = true;
      }
    }
    if (!any) break;
  }
  pool.fewer_slides_than_requested = chosen.size() < n_slides;

  const std::size_t dim = chosen.front()->feature_dim();
  Tensor features({chosen.size() * per_slide, dim});
  std::size_t at = 0;
  Rng row_rng(derive_seed(seed, "pool-rows"));
  for (const FeatureBag* bag : chosen) {
    pool.source_slides.push_back(bag->slide_id);
    const std::size_t n = bag->n_patches();
    std::vector<std::size_t> rows;
    if (n >= per_slide) {
      rows = row_rng.sample_without_replacement(n, per_slide);
    } else {
      pool.sampled_with_replacement = true;
      rows.reserve(per_slide);
      for (std::size_t i = 0; i < per_slide; ++i) {
        rows.push_back(row_rng.uniform_index(n));
      }
    }
    for (const std::size_t row : rows) {
      for (std::size_t j = 0; j < dim; ++j) {
        features[at * dim + j] = bag->features.at(row, j);
      }
      pool.provenance.push_back(
          {bag->slide_id, static_cast<std::uint32_t>(row)});
      ++at;
    }
  }
  pool.features = std::move(features);
  return pool;
}

Tensor sample_baseline(const ReferencePool& pool, std::size_t n_target,
                       std::uint64_t seed) {
  if (pool.features.size() == 0) throw PoolError("sample_baseline: empty pool");
  if (n_target == 0) throw EmptyBagError("sample_baseline: n_target is 0");
  const std::size_t rows = pool.features.rows();
  const std::size_t dim = pool.features.cols();
  Rng rng(derive_seed(seed, "baseline-rows"));
  Tensor out({n_target, dim});
  for (std::size_t i = 0; i < n_target; ++i) {
    const std::size_t row = rng.uniform_index(rows);
    for (std::size_t j = 0; j < dim; ++j) {
      out.at(i, j) = pool.features.at(row, j);
    }
  }
  return out;
}

std::size_t default_per_slide(const std::vector<const FeatureBag*>& bags,
                              std::size_t n_slides) {
  if (bags.empty() || n_slides == 0) return 1;
  std::vector<std::size_t> sizes;
  sizes.reserve(bags.size());
  for (const FeatureBag* bag : bags) sizes.push_back(bag->n_patches());
  std::sort(sizes.begin(), sizes.end());
  const std::size_t median = sizes[sizes.size() / 2];
  return (median + n_slides - 1) / n_slides;
}

void write_pool_provenance_csv(const ReferencePool& pool,
                               const std::string& path) {
  std::string out = "slide_id,row_index,pool_position\n";
  for (std::size_t i = 0; i < pool.provenance.size(); ++i) {
    out += pool.provenance[i].slide_id;
    out += ',' + std::to_string(pool.provenance[i].row_index);
    out += ',' + std::to_string(i);
    out += '\n';
  }
  detail::atomic_write_text(path, out);
}

}  // namespace cig
