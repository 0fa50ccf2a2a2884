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
#include <vector>

#include "cig/data_io.hpp"
#include "cig/tensor.hpp"

namespace cig {

/// Patch features aggregated from slides of classes other than the target
/// class; the source of reference inputs for path attribution and of the
/// control features for the evaluation curves. Immutable once built.
struct ReferencePool {
  struct Row {
    std::string slide_id;
    std::uint32_t row_index = 0;  // row within the source slide
  };

  std::size_t target_class = 0;
  std::vector<std::string> source_slides;
  std::vector<std::size_t> source_classes;  // classes the pool draws from
  Tensor features;                          // p x d
  std::vector<Row> provenance;              // one entry per pooled row
  std::uint64_t seed = 0;
  bool fewer_slides_than_requested = false;
  bool sampled_with_replacement = false;  // some slide was smaller than per_slide
};

/// Pools `per_slide` patch rows from each of min(n_slides, available)
/// opposite-class slides, chosen uniformly without replacement. With more
/// than one opposite class, slide quota rotates round-robin across classes.
/// Deterministic in seed.
ReferencePool build_reference_pool(
    const std::vector<const FeatureBag*>& opposite_bags,
    std::size_t target_class, std::size_t n_slides, std::size_t per_slide,
    std::uint64_t seed);

/// n_target rows drawn uniformly with replacement from the pool, shaped to
/// match the target bag so x - x' is elementwise well defined.
Tensor sample_baseline(const ReferencePool& pool, std::size_t n_target,
                       std::uint64_t seed);

/// Suggested per-slide sample count: ceil(median bag size / n_slides).
std::size_t default_per_slide(const std::vector<const FeatureBag*>& bags,
                              std::size_t n_slides);

/// CSV rows: slide_id,row_index,pool_position.
void write_pool_provenance_csv(const ReferencePool& pool,
                               const std::string& path);

}  // namespace cig
