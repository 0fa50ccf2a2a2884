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

#include <doctest.h>

#include <map>
#include <set>

#include "cig/baseline.hpp"
#include "cig/errors.hpp"
#include "support.hpp"

using namespace cig;
using test_support::TempDir;
using test_support::random_bag;

namespace {

std::vector<FeatureBag> make_bags(std::size_t count, std::size_t n,
                                  std::size_t d, std::uint16_t label,
                                  std::uint64_t seed) {
  std::vector<FeatureBag> bags;
  for (std::size_t i = 0; i < count; ++i) {
    FeatureBag bag = random_bag(n, d, derive_seed(seed, "bag", i));
    bag.label = label;
    bag.slide_id = "s" + std::to_string(label) + "_" + std::to_string(i);
    bags.push_back(std::move(bag));
  }
  return bags;
}

std::vector<const FeatureBag*> pointers(const std::vector<FeatureBag>& bags) {
  std::vector<const FeatureBag*> out;
  for (const FeatureBag& bag : bags) out.push_back(&bag);
  return out;
}

}  // namespace

TEST_CASE("pool: 30 slides x 8 rows gives 240 rows, 8 per slide") {
  const std::vector<FeatureBag> bags = make_bags(40, 20, 4, 0, 1);
  const ReferencePool pool =
      build_reference_pool(pointers(bags), 1, 30, 8, 99);
  CHECK(pool.features.rows() == 240);
  CHECK(pool.source_slides.size() == 30);
  CHECK_FALSE(pool.fewer_slides_than_requested);
  CHECK_FALSE(pool.sampled_with_replacement);
  std::map<std::string, int> counts;
  for (const ReferencePool::Row& row : pool.provenance) {
    counts[row.slide_id]++;
  }
  CHECK(counts.size() == 30);
  for (const auto& [slide, count] : counts) CHECK(count == 8);
}

TEST_CASE("pool: degenerate availability sets the warning flag") {
  const std::vector<FeatureBag> bags = make_bags(1, 20, 4, 0, 2);
  const ReferencePool pool =
      build_reference_pool(pointers(bags), 1, 30, 5, 99);
  CHECK(pool.source_slides.size() == 1);
  CHECK(pool.fewer_slides_than_requested);
  CHECK(pool.features.rows() == 5);
}

TEST_CASE("pool: deterministic in the seed") {
  const std::vector<FeatureBag> bags = make_bags(12, 15, 4, 0, 3);
  const ReferencePool a = build_reference_pool(pointers(bags), 1, 8, 3, 7);
  const ReferencePool b = build_reference_pool(pointers(bags), 1, 8, 3, 7);
  CHECK(a.features.data() == b.features.data());
  REQUIRE(a.provenance.size() == b.provenance.size());
  for (std::size_t i = 0; i < a.provenance.size(); ++i) {
    CHECK(a.provenance[i].slide_id == b.provenance[i].slide_id);
    CHECK(a.provenance[i].row_index == b.provenance[i].row_index);
  }
}

TEST_CASE("pool: contract and parameter violations") {
  const std::vector<FeatureBag> bags = make_bags(3, 10, 4, 1, 4);
  CHECK_THROWS_AS(build_reference_pool({}, 1, 30, 5, 0), PoolError);
  CHECK_THROWS_AS(build_reference_pool(pointers(bags), 1, 30, 5, 0),
                  ContractError);
  const std::vector<FeatureBag> ok = make_bags(3, 10, 4, 0, 5);
  CHECK_THROWS_AS(build_reference_pool(pointers(ok), 1, 30, 0, 0),
                  ParameterError);
}

TEST_CASE("pool: small slides fall back to replacement and are flagged") {
  const std::vector<FeatureBag> bags = make_bags(4, 3, 4, 0, 6);
  const ReferencePool pool =
      build_reference_pool(pointers(bags), 1, 4, 10, 42);
  CHECK(pool.sampled_with_replacement);
  CHECK(pool.features.rows() == 40);
}

TEST_CASE("pool: multi-class sources rotate round-robin") {
  std::vector<FeatureBag> bags = make_bags(6, 10, 4, 1, 7);
  const std::vector<FeatureBag> more = make_bags(6, 10, 4, 2, 8);
  bags.insert(bags.end(), more.begin(), more.end());
  const ReferencePool pool =
      build_reference_pool(pointers(bags), 0, 7, 2, 13);
  CHECK(pool.source_classes == std::vector<std::size_t>{1, 2});
  // 7 slides over two classes: counts differ by at most one.
  std::map<char, int> per_class;
  for (const std::string& id : pool.source_slides) per_class[id[1]]++;
  CHECK(std::abs(per_class['1'] - per_class['2']) <= 1);
}

TEST_CASE("sample_baseline: singleton pool, determinism, shape") {
  std::vector<FeatureBag> bags = make_bags(1, 1, 3, 0, 9);
  const ReferencePool pool = build_reference_pool(pointers(bags), 1, 1, 1, 5);
  REQUIRE(pool.features.rows() == 1);

  const Tensor base = sample_baseline(pool, 3, 123);
  CHECK(base.rows() == 3);
  CHECK(base.cols() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(base.at(i, j) == pool.features.at(0, j));
    }
  }

  const std::vector<FeatureBag> big = make_bags(10, 30, 3, 0, 10);
  const ReferencePool pool2 = build_reference_pool(pointers(big), 1, 10, 3, 5);
  const Tensor a = sample_baseline(pool2, 30, 77);
  const Tensor b = sample_baseline(pool2, 30, 77);
  CHECK(a.data() == b.data());
  CHECK_THROWS_AS(sample_baseline(pool2, 0, 1), EmptyBagError);
}

TEST_CASE("default_per_slide: ceil of median bag size over slide count") {
  const std::vector<FeatureBag> bags = make_bags(5, 200, 2, 0, 11);
  CHECK(default_per_slide(pointers(bags), 30) == 7);  // ceil(200/30)
  CHECK(default_per_slide(pointers(bags), 200) == 1);
}

TEST_CASE("pool provenance exports as csv") {
  TempDir dir("pool_csv");
  const std::vector<FeatureBag> bags = make_bags(2, 4, 2, 0, 12);
  const ReferencePool pool = build_reference_pool(pointers(bags), 1, 2, 2, 5);
  const std::string path = dir.str("prov.csv");
  write_pool_provenance_csv(pool, path);
  const auto bytes = test_support::slurp(path);
  const std::string text(bytes.begin(), bytes.end());
  CHECK(text.rfind("slide_id,row_index,pool_position\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 5);  // header + 4 rows
}
