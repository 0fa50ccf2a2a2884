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

// Closed-form and randomly seeded model generators shared by the axiom
// battery and the test suites.

#include <cstdint>
#include <vector>

#include "cig/diff_fn.hpp"
#include "cig/tensor.hpp"

namespace cig::fixtures {

enum class Activation { kRelu, kTanh };

Tensor random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed,
                     double scale = 1.0);
Tensor random_vector(std::size_t n, std::uint64_t seed, double scale = 1.0);

/// Fully connected net over a rank-1 input together with the weights it was
/// built from. widths.front() is the input dimension, widths.back() the
/// output; the final layer has no activation. Weights are
/// N(0, scale^2 / fan_in), biases N(0, 0.1^2).
struct MlpFixture {
  std::vector<std::size_t> widths;
  Activation activation = Activation::kTanh;
  std::vector<Tensor> weights;
  std::vector<Tensor> biases;
  DifferentiableFn fn;

  /// Smallest |pre-activation| over all hidden units at x; infinity for
  /// tanh nets (no kinks). Used to keep finite-difference checks away from
  /// relu corners.
  double relu_margin(const Tensor& x) const;
};

MlpFixture random_mlp(const std::vector<std::size_t>& widths,
                      Activation activation, std::uint64_t seed,
                      double scale = 1.0);

/// f(x) = W x over a rank-1 input.
DifferentiableFn linear_map(Tensor w);

/// Same function as linear_map but recorded as (c W) x + ((1-c) W) x,
/// a structurally different graph used for invariance checks.
DifferentiableFn split_linear_map(Tensor w, double part = 0.5);

/// Copy of w with one column zeroed (the model then ignores that input).
Tensor zero_column(Tensor w, std::size_t column);

}  // namespace cig::fixtures
