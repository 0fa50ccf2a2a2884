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
#include "cig/mil_model.hpp"

namespace cig {

enum class Optimizer { kAdam, kSgd };

struct TrainConfig {
  std::uint32_t epochs = 200;
  double learning_rate = 1e-4;
  std::uint32_t batch_size = 1;  // bags per optimizer step
  Optimizer optimizer = Optimizer::kAdam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double dropout = 0.25;
  bool shuffle = true;
  std::uint64_t seed = 0;
};

struct EpochStats {
  double loss = 0.0;      // mean cross-entropy over bags, pre-step values
  double accuracy = 0.0;  // training accuracy over the same pass
};

struct TrainResult {
  MilModel model;
  std::vector<EpochStats> history;
};

/// Cross-entropy training of the bag classifier. Fully deterministic for a
/// fixed seed: initialization, shuffling, and dropout all derive from it,
/// and every accumulation runs single-threaded in a fixed order.
TrainResult train(const std::vector<const FeatureBag*>& bags,
                  const MilModelConfig& model_config,
                  const TrainConfig& config);

/// Fraction of bags whose predicted class matches the label.
double evaluate_accuracy(const MilModel& model,
                         const std::vector<const FeatureBag*>& bags);

}  // namespace cig
