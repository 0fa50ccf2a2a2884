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

#include "cig/attribution.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "cig/errors.hpp"
#include "cig/rng.hpp"
#include "binio.hpp"

namespace cig {
namespace {

constexpr char kAttrMagic[] = "ATTR1";

void validate_path(const PathSpec& path) {
  if (!path.input.same_shape(path.reference)) {
    throw ShapeError("path: input and reference shapes differ");
  }
  if (path.steps < 1) throw ParameterError("path: steps must be >= 1");
}

void check_finite_gradient(const Tensor& g, double alpha) {
  if (!g.all_finite()) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", alpha);
    throw NumericError(std::string("non-finite gradient at alpha=") + buf);
  }
}

Tensor input_times(const Tensor& delta, const Tensor& integral) {
  Tensor out = delta;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= integral[i];
  return out;
}

void finish(AttributionResult& result) {
  result.saliency = patch_saliency(result.attributions);
}

}  // namespace

std::vector<std::pair<double, double>> quadrature_nodes(QuadratureRule rule,
                                                        std::size_t steps) {
  if (steps < 1) throw ParameterError("quadrature: steps must be >= 1");
  const double m = static_cast<double>(steps);
  std::vector<std::pair<double, double>> nodes;
  switch (rule) {
    case QuadratureRule::kTrapezoid:
      nodes.reserve(steps + 1);
      for (std::size_t j = 0; j <= steps; ++j) {
        const double w = (j == 0 || j == steps) ? 0.5 / m : 1.0 / m;
        nodes.emplace_back(static_cast<double>(j) / m, w);
      }
      break;
    case QuadratureRule::kLeft:
      for (std::size_t j = 0; j < steps; ++j) {
        nodes.emplace_back(static_cast<double>(j) / m, 1.0 / m);
      }
      break;
    case QuadratureRule::kRight:
      for (std::size_t j = 1; j <= steps; ++j) {
        nodes.emplace_back(static_cast<double>(j) / m, 1.0 / m);
      }
      break;
    case QuadratureRule::kMidpoint:
      for (std::size_t j = 0; j < steps; ++j) {
        nodes.emplace_back((static_cast<double>(j) + 0.5) / m, 1.0 / m);
      }
      break;
  }
  return nodes;
}

Tensor straight_line(const Tensor& input, const Tensor& reference,
                     double alpha) {
  if (!input.same_shape(reference)) {
    throw ShapeError("straight_line: shape mismatch");
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ParameterError("straight_line: alpha outside [0, 1]");
  }
  Tensor out = reference;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] += alpha * (input[i] - reference[i]);
  }
  return out;
}

double contrastive_objective(const DifferentiableFn& logit_fn, const Tensor& z,
                             const Tensor& reference) {
  const Tensor ref_logits = logit_fn.evaluate(reference);
  return ScalarSelector::squared_norm_diff(ref_logits).apply(
      logit_fn.evaluate(z));
}

AttributionResult contrastive_integrated_gradients(
    const DifferentiableFn& logit_fn, const PathSpec& path,
    const CigOptions& options) {
  validate_path(path);
  const Tensor ref_logits = logit_fn.evaluate(path.reference);
  const ScalarSelector objective = ScalarSelector::squared_norm_diff(ref_logits);

  Tensor integral = Tensor::zeros(path.input.shape());
  for (const auto& [alpha, weight] : quadrature_nodes(path.rule, path.steps)) {
    const Tensor point = straight_line(path.input, path.reference, alpha);
    Tensor g = logit_fn.gradient(point, objective);
    check_finite_gradient(g, alpha);
    const double factor = options.endpoint_derivative ? weight * alpha : weight;
    for (std::size_t i = 0; i < integral.size(); ++i) {
      integral[i] += factor * g[i];
    }
  }

  AttributionResult result;
  result.method = "cig";
  result.steps = path.steps;
  result.baseline_ref = options.baseline_ref;
  result.attributions =
      input_times(sub(path.input, path.reference), integral);
  result.metadata["integrand"] = options.endpoint_derivative
                                     ? "endpoint-derivative"
                                     : "interpolated-point";
  const double objective_at_input = objective.apply(logit_fn.evaluate(path.input));
  result.completeness_residual =
      std::fabs(sum(result.attributions) - objective_at_input);
  finish(result);
  return result;
}

AttributionResult integrated_gradients(const DifferentiableFn& logit_fn,
                                       const PathSpec& path,
                                       std::size_t target_class,
                                       const std::string& baseline_ref) {
  validate_path(path);
  const ScalarSelector target = ScalarSelector::output_index(target_class);

  Tensor integral = Tensor::zeros(path.input.shape());
  for (const auto& [alpha, weight] : quadrature_nodes(path.rule, path.steps)) {
    const Tensor point = straight_line(path.input, path.reference, alpha);
    Tensor g = logit_fn.gradient(point, target);
    check_finite_gradient(g, alpha);
    for (std::size_t i = 0; i < integral.size(); ++i) {
      integral[i] += weight * g[i];
    }
  }

  AttributionResult result;
  result.method = "ig";
  result.steps = path.steps;
  result.baseline_ref = baseline_ref;
  result.attributions = input_times(sub(path.input, path.reference), integral);
  const double span = target.apply(logit_fn.evaluate(path.input)) -
                      target.apply(logit_fn.evaluate(path.reference));
  result.completeness_residual =
      std::fabs(sum(result.attributions) - span);
  finish(result);
  return result;
}

AttributionResult expected_gradients(const DifferentiableFn& logit_fn,
                                     const Tensor& input,
                                     const ReferencePool& pool,
                                     std::size_t n_samples,
                                     std::size_t target_class,
                                     std::uint64_t seed) {
  if (n_samples < 1) throw ParameterError("eg: n_samples must be >= 1");
  if (pool.features.size() == 0) throw PoolError("eg: empty pool");
  if (input.rank() != 2) throw ShapeError("eg: input must be n x d");
  const ScalarSelector target = ScalarSelector::output_index(target_class);

  Tensor accum = Tensor::zeros(input.shape());
  Rng rng(derive_seed(seed, "eg-alpha"));
  for (std::size_t s = 0; s < n_samples; ++s) {
    const Tensor reference =
        sample_baseline(pool, input.rows(), derive_seed(seed, "eg-ref", s));
    const double alpha = rng.uniform();
    const Tensor point = straight_line(input, reference, alpha);
    Tensor g = logit_fn.gradient(point, target);
    check_finite_gradient(g, alpha);
    for (std::size_t i = 0; i < accum.size(); ++i) {
      accum[i] += (input[i] - reference[i]) * g[i];
    }
  }
  const double inv = 1.0 / static_cast<double>(n_samples);

  AttributionResult result;
  result.method = "eg";
  result.steps = n_samples;
  result.baseline_ref = "pool seed " + std::to_string(pool.seed);
  result.attributions = scale(accum, inv);
  result.metadata["reconstruction"] = "true";
  finish(result);
  return result;
}

AttributionResult integrated_decision_gradients(
    const DifferentiableFn& logit_fn, const PathSpec& path,
    std::size_t target_class, const std::string& baseline_ref) {
  validate_path(path);
  if (path.steps < 2) throw ParameterError("idg: steps must be >= 2");
  const ScalarSelector target = ScalarSelector::output_index(target_class);
  const std::size_t m = path.steps;

  // Target logit at the m+1 grid nodes; gradients at the m left nodes.
  std::vector<double> logit_at(m + 1);
  for (std::size_t j = 0; j <= m; ++j) {
    const double alpha = static_cast<double>(j) / static_cast<double>(m);
    logit_at[j] = target.apply(
        logit_fn.evaluate(straight_line(path.input, path.reference, alpha)));
  }
  const double span = logit_at[m] - logit_at[0];
  const bool degenerate = std::fabs(span) < 1e-12;

  Tensor integral = Tensor::zeros(path.input.shape());
  for (std::size_t j = 0; j < m; ++j) {
    const double alpha = static_cast<double>(j) / static_cast<double>(m);
    const double slope_weight =
        degenerate ? 1.0 / static_cast<double>(m)
                   : (logit_at[j + 1] - logit_at[j]) / span;
    const Tensor point = straight_line(path.input, path.reference, alpha);
    Tensor g = logit_fn.gradient(point, target);
    check_finite_gradient(g, alpha);
    for (std::size_t i = 0; i < integral.size(); ++i) {
      integral[i] += slope_weight * g[i];
    }
  }

  AttributionResult result;
  result.method = "idg";
  result.steps = m;
  result.baseline_ref = baseline_ref;
  result.attributions = input_times(sub(path.input, path.reference), integral);
  result.metadata["reconstruction"] = "true";
  if (degenerate) result.metadata["uniform_fallback"] = "true";
  finish(result);
  return result;
}

AttributionResult vanilla_gradient(const DifferentiableFn& logit_fn,
                                   const Tensor& input,
                                   std::size_t target_class) {
  Tensor g =
      logit_fn.gradient(input, ScalarSelector::output_index(target_class));
  if (!g.all_finite()) throw NumericError("non-finite gradient at input");
  AttributionResult result;
  result.method = "gradient";
  result.attributions = std::move(g);
  finish(result);
  return result;
}

Tensor patch_saliency(const Tensor& attributions) {
  if (attributions.rank() == 1) {
    Tensor s({attributions.size()});
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] = std::fabs(attributions[i]);
    }
    return s;
  }
  if (attributions.rank() != 2 || attributions.cols() == 0) {
    throw ShapeError("patch_saliency: attributions must be n x d with d >= 1");
  }
  const std::size_t n = attributions.rows(), d = attributions.cols();
  Tensor s({n});
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      acc += std::fabs(attributions.at(i, j));
    }
    s[i] = acc / static_cast<double>(d);
  }
  return s;
}

double completeness_residual(const AttributionResult& result,
                             const DifferentiableFn& logit_fn,
                             const Tensor& input, const Tensor& reference) {
  return std::fabs(sum(result.attributions) -
                   contrastive_objective(logit_fn, input, reference));
}

void write_attribution(const AttributionResult& result,
                       const std::string& path) {
  const Tensor& a = result.attributions;
  const std::size_t n = a.rank() == 2 ? a.rows() : a.size();
  const std::size_t d = a.rank() == 2 ? a.cols() : 1;
  detail::ByteWriter w;
  w.put_bytes(kAttrMagic, 5);
  w.put_string(result.method);
  w.put_u32(static_cast<std::uint32_t>(n));
  w.put_u32(static_cast<std::uint32_t>(d));
  for (const double v : a.data()) w.put_f32(static_cast<float>(v));
  for (const double v : result.saliency.data()) {
    w.put_f32(static_cast<float>(v));
  }
  // Residual written as f64; NaN encodes "not recorded".
  w.put_f64(result.completeness_residual
                ? *result.completeness_residual
                : std::numeric_limits<double>::quiet_NaN());
  detail::atomic_write_file(path, w.bytes());
}

AttributionResult read_attribution(const std::string& path) {
  detail::ByteReader r(detail::read_file_bytes(path));
  r.expect_magic(kAttrMagic, 5, "ATTR1");
  AttributionResult result;
  result.method = r.get_string();
  const std::uint32_t n = r.get_u32();
  const std::uint32_t d = r.get_u32();
  Tensor a({n, d});
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = static_cast<double>(r.get_f32());
  }
  result.attributions = std::move(a);
  Tensor s({n});
  for (std::size_t i = 0; i < n; ++i) s[i] = static_cast<double>(r.get_f32());
  result.saliency = std::move(s);
  const double residual = r.get_f64();
  if (!std::isnan(residual)) result.completeness_residual = residual;
  return result;
}

void write_attribution_csv(
    const AttributionResult& result,
    const std::vector<std::pair<std::int32_t, std::int32_t>>& coords,
    const std::string& path) {
  if (coords.size() != result.saliency.size()) {
    throw ParameterError("attribution csv: coords/saliency length mismatch");
  }
  std::string out = "patch_index,x,y,saliency\n";
  char buf[48];
  for (std::size_t i = 0; i < coords.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%d,%d,%.17g\n", i, coords[i].first,
                  coords[i].second, result.saliency[i]);
    out += buf;
  }
  detail::atomic_write_text(path, out);
}

}  // namespace cig
