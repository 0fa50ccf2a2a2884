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

namespace cig {

struct AxiomCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct AxiomOptions {
  std::size_t gradient_trials = 100;
  std::size_t completeness_models = 50;
  std::size_t linear_models = 20;
  std::size_t sensitivity_seeds = 20;
  std::size_t invariance_seeds = 20;
  std::size_t lipschitz_models = 100;
  std::uint64_t seed = 11;
};

/// Runs every verifiable property of the attribution stack: gradient
/// correctness against central finite differences, completeness of the
/// contrastive and classic path integrals, closed-form agreement on linear
/// models, sensitivity to ignored inputs, invariance across equivalent
/// graphs, the Lipschitz attribution bound (both integrand readings), and
/// the spectral-norm and quadrature sanity checks they rely on.
std::vector<AxiomCheck> run_axiom_battery(const AxiomOptions& options = {});

}  // namespace cig
