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
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cig/baseline.hpp"
#include "cig/diff_fn.hpp"
#include "cig/tensor.hpp"

namespace cig {

enum class QuadratureRule { kTrapezoid, kLeft, kRight, kMidpoint };

/// Straight-line interpolation path from a reference to an input, plus the
/// quadrature used to integrate gradients along it.
struct PathSpec {
  Tensor input;
  Tensor reference;
  std::size_t steps = 50;
  QuadratureRule rule = QuadratureRule::kTrapezoid;
};

struct AttributionResult {
  std::string method;
  Tensor attributions;  // same shape as the input
  Tensor saliency;      // one score per patch (row)
  std::optional<double> completeness_residual;
  std::size_t steps = 0;
  std::string baseline_ref;  // provenance of the reference used, if any
  std::map<std::string, std::string> metadata;
};

/// Quadrature nodes and weights over [0, 1].
std::vector<std::pair<double, double>> quadrature_nodes(QuadratureRule rule,
                                                        std::size_t steps);

/// reference + alpha * (input - reference); alpha must lie in [0, 1].
Tensor straight_line(const Tensor& input, const Tensor& reference,
                     double alpha);

/// Squared Euclidean distance between the logits of z and of the reference.
double contrastive_objective(const DifferentiableFn& logit_fn, const Tensor& z,
                             const Tensor& reference);

struct CigOptions {
  /// When set, the integrand carries the extra alpha factor that arises
  /// from differentiating through the path at its endpoint. The default
  /// evaluates the gradient of the contrastive objective at the
  /// interpolated point, which is the reading under which the attributions
  /// sum exactly to the objective at the input.
  bool endpoint_derivative = false;
  std::string baseline_ref;
};

/// Contrastive attribution: (x - x') elementwise-times the path integral of
/// the gradient of ||logits(z) - logits(x')||^2. Records the completeness
/// residual |sum A - D(x)|.
AttributionResult contrastive_integrated_gradients(
    const DifferentiableFn& logit_fn, const PathSpec& path,
    const CigOptions& options = {});

/// Classic path attribution of one logit; records |sum A - (f_c(x) - f_c(x'))|.
AttributionResult integrated_gradients(const DifferentiableFn& logit_fn,
                                       const PathSpec& path,
                                       std::size_t target_class,
                                       const std::string& baseline_ref = "");

/// Monte-Carlo expectation over sampled reference bags and path positions.
AttributionResult expected_gradients(const DifferentiableFn& logit_fn,
                                     const Tensor& input,
                                     const ReferencePool& pool,
                                     std::size_t n_samples,
                                     std::size_t target_class,
                                     std::uint64_t seed);

/// Path attribution with gradient steps weighted by the slope of the target
/// logit along the path (weights telescope to 1; degenerate spans fall back
/// to uniform weights and are flagged in metadata).
AttributionResult integrated_decision_gradients(
    const DifferentiableFn& logit_fn, const PathSpec& path,
    std::size_t target_class, const std::string& baseline_ref = "");

/// Plain gradient of the target logit at the input; no reference, no
/// completeness residual.
AttributionResult vanilla_gradient(const DifferentiableFn& logit_fn,
                                   const Tensor& input,
                                   std::size_t target_class);

/// Per-patch saliency: mean absolute attribution across feature columns.
/// Rank-1 attributions are treated as n x 1.
Tensor patch_saliency(const Tensor& attributions);

/// |sum of attributions - D(x)| for a contrastive result.
double completeness_residual(const AttributionResult& result,
                             const DifferentiableFn& logit_fn,
                             const Tensor& input, const Tensor& reference);

// ---- ATTR1 binary format and CSV export ----------------------------------

void write_attribution(const AttributionResult& result,
                       const std::string& path);
AttributionResult read_attribution(const std::string& path);

/// CSV rows: patch_index,x,y,saliency.
void write_attribution_csv(
    const AttributionResult& result,
    const std::vector<std::pair<std::int32_t, std::int32_t>>& coords,
    const std::string& path);

}  // namespace cig
