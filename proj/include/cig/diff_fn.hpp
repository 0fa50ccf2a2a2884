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

#include <cstddef>
#include <functional>
#include <vector>

#include "cig/tape.hpp"
#include "cig/tensor.hpp"

namespace cig {

/// Reduction of a function's output tensor to one scalar, usable both on a
/// tape (for reverse mode) and directly on values (for the finite-difference
/// oracle, which must stay independent of the tape).
class ScalarSelector {
 public:
  static ScalarSelector identity();
  static ScalarSelector output_index(std::size_t index);
  static ScalarSelector output_sum();
  static ScalarSelector squared_norm_diff(Tensor reference);

  double apply(const Tensor& output) const;
  Var apply(Tape& tape, Var output) const;

 private:
  enum class Kind { kIdentity, kIndex, kSum, kSquaredNormDiff };
  ScalarSelector(Kind kind, std::size_t index, Tensor reference)
      : kind_(kind), index_(index), reference_(std::move(reference)) {}

  Kind kind_;
  std::size_t index_;
  Tensor reference_;
};

using GraphBuilder = std::function<Var(Tape&, Var)>;

/// A deterministic differentiable map from one input tensor to one output
/// tensor. The builder re-records the computation on a fresh private tape
/// per call, so concurrent evaluate/gradient calls never share state.
class DifferentiableFn {
 public:
  DifferentiableFn() = default;
  DifferentiableFn(std::vector<std::size_t> input_shape, GraphBuilder builder);

  const std::vector<std::size_t>& input_shape() const { return input_shape_; }

  Tensor evaluate(const Tensor& x) const;
  double scalar(const Tensor& x, const ScalarSelector& selector) const;
  /// d selector(f(x)) / dx, exact reverse mode.
  Tensor gradient(const Tensor& x, const ScalarSelector& selector) const;

 private:
  void check_input(const Tensor& x) const;

  std::vector<std::size_t> input_shape_;
  GraphBuilder builder_;
};

/// Central finite differences, (s(x + h e_i) - s(x - h e_i)) / 2h. The
/// independent oracle for gradient(); evaluates the function only.
Tensor finite_diff_gradient(const DifferentiableFn& f, const Tensor& x,
                            const ScalarSelector& selector, double h);

}  // namespace cig
