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

#include "cig/axioms.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "cig/attribution.hpp"
#include "cig/errors.hpp"
#include "cig/fixtures.hpp"
#include "cig/linalg.hpp"
#include "cig/rng.hpp"

namespace cig {
namespace {

using fixtures::Activation;
using fixtures::MlpFixture;

std::string detail_of(const char* fmt, double a, double b) {
  char buf[128];
  std::snprintf(buf, sizeof buf, fmt, a, b);
  return buf;
}

double rel_err(const Tensor& got, const Tensor& want) {
  double worst = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    const double denom =
        std::fmax(std::fmax(std::fabs(got[i]), std::fabs(want[i])), 1e-6);
    worst = std::fmax(worst, std::fabs(got[i] - want[i]) / denom);
  }
  return worst;
}

Var apply_mlp(Tape& tape, Var x, const MlpFixture& m) {
  Var h = x;
  for (std::size_t layer = 0; layer < m.weights.size(); ++layer) {
    h = tape.add(tape.matvec(tape.leaf(m.weights[layer]), h),
                 tape.leaf(m.biases[layer]));
    if (layer + 1 < m.weights.size()) {
      h = m.activation == Activation::kRelu ? tape.relu(h) : tape.tanh(h);
    }
  }
  return h;
}

/// d (W^T W d), the closed form the contrastive attribution must match on a
/// linear model; computed by plain loops, independent of the tape.
Tensor linear_closed_form(const Tensor& w, const Tensor& delta) {
  const std::size_t r = w.rows(), c = w.cols();
  Tensor wd({r});
  for (std::size_t i = 0; i < r; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += w.at(i, j) * delta[j];
    wd[i] = s;
  }
  Tensor wtwd({c});
  for (std::size_t j = 0; j < c; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < r; ++i) s += w.at(i, j) * wd[i];
    wtwd[j] = s;
  }
  Tensor out({c});
  for (std::size_t j = 0; j < c; ++j) out[j] = delta[j] * wtwd[j];
  return out;
}

struct GradientTrial {
  MlpFixture model;
  Tensor input;
  ScalarSelector selector = ScalarSelector::output_sum();
};

/// Random model/input/selector; relu inputs are re-drawn until every
/// pre-activation clears the kink margin of 1e-4.
GradientTrial make_gradient_trial(std::uint64_t seed) {
  Rng rng(derive_seed(seed, "trial-dims"));
  const std::size_t in = 3 + rng.uniform_index(6);
  const std::size_t out = 2 + rng.uniform_index(4);
  std::vector<std::size_t> widths = {in};
  const std::size_t n_hidden = 1 + rng.uniform_index(3);
  for (std::size_t i = 0; i < n_hidden; ++i) {
    widths.push_back(4 + rng.uniform_index(13));
  }
  widths.push_back(out);
  const Activation act =
      rng.uniform_index(2) == 0 ? Activation::kRelu : Activation::kTanh;

  GradientTrial trial;
  trial.model = fixtures::random_mlp(widths, act, derive_seed(seed, "trial-w"));
  for (std::uint64_t attempt = 0;; ++attempt) {
    trial.input =
        fixtures::random_vector(in, derive_seed(seed, "trial-x", attempt));
    if (trial.model.relu_margin(trial.input) > 1e-4) break;
    if (attempt > 1000) throw NumericError("gradient trial: no kink-free input");
  }
  switch (rng.uniform_index(3)) {
    case 0:
      trial.selector = ScalarSelector::output_index(rng.uniform_index(out));
      break;
    case 1:
      trial.selector = ScalarSelector::output_sum();
      break;
    default:
      trial.selector = ScalarSelector::squared_norm_diff(
          fixtures::random_vector(out, derive_seed(seed, "trial-ref")));
      break;
  }
  return trial;
}

AxiomCheck check_gradient_vs_finite_diff(const AxiomOptions& opt) {
  double worst = 0.0;
  for (std::size_t t = 0; t < opt.gradient_trials; ++t) {
    const GradientTrial trial =
        make_gradient_trial(derive_seed(opt.seed, "gradcheck", t));
    const Tensor got = trial.model.fn.gradient(trial.input, trial.selector);
    const Tensor want =
        finite_diff_gradient(trial.model.fn, trial.input, trial.selector, 1e-6);
    worst = std::fmax(worst, rel_err(got, want));
  }
  return {"gradient matches central finite differences", worst <= 1e-5,
          detail_of("max rel err %.3g (tol %.0e)", worst, 1e-5)};
}

AxiomCheck check_gradient_linearity(const AxiomOptions& opt) {
  double worst = 0.0;
  for (std::size_t t = 0; t < 20; ++t) {
    const std::uint64_t seed = derive_seed(opt.seed, "linearity", t);
    const MlpFixture a = fixtures::random_mlp({5, 8, 3}, Activation::kTanh,
                                              derive_seed(seed, "a"));
    const MlpFixture b = fixtures::random_mlp({5, 6, 3}, Activation::kTanh,
                                              derive_seed(seed, "b"));
    const DifferentiableFn combined({5}, [a, b](Tape& tape, Var x) {
      return tape.add(apply_mlp(tape, x, a), apply_mlp(tape, x, b));
    });
    const Tensor x = fixtures::random_vector(5, derive_seed(seed, "x"));
    const ScalarSelector sel = ScalarSelector::output_sum();
    const Tensor got = combined.gradient(x, sel);
    const Tensor want = add(a.fn.gradient(x, sel), b.fn.gradient(x, sel));
    worst = std::fmax(worst, max_abs_diff(got, want));
  }
  return {"gradient of a sum equals sum of gradients", worst <= 1e-12,
          detail_of("max abs diff %.3g (tol %.0e)", worst, 1e-12)};
}

AxiomCheck check_spectral_norm(const AxiomOptions& opt) {
  bool pass = true;
  double worst = 0.0;
  // Known singular values.
  pass &= std::fabs(spectral_norm(Tensor({2, 2}, {1, 0, 0, 2})) - 2.0) < 1e-9;
  pass &= std::fabs(spectral_norm(Tensor({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1})) -
                    1.0) < 1e-9;
  pass &= std::fabs(spectral_norm(Tensor({2, 2}, {0, 1, 0, 0})) - 1.0) < 1e-9;
  // Absolute homogeneity.
  for (std::size_t t = 0; t < 10; ++t) {
    const std::uint64_t seed = derive_seed(opt.seed, "specnorm", t);
    const Tensor w = fixtures::random_matrix(4, 6, seed);
    Rng rng(derive_seed(seed, "c"));
    const double c = rng.uniform(-3.0, 3.0);
    const double lhs = spectral_norm(scale(w, c));
    const double rhs = std::fabs(c) * spectral_norm(w);
    worst = std::fmax(worst, std::fabs(lhs - rhs));
    pass &= std::fabs(lhs - rhs) <= 1e-8;
  }
  return {"spectral norm: examples and |c| homogeneity", pass,
          detail_of("max |sigma(cW)-|c|sigma(W)| %.3g (tol %.0e)", worst, 1e-8)};
}

struct CompletenessFixture {
  MlpFixture model;
  Tensor input;
  Tensor reference;
};

CompletenessFixture make_completeness_fixture(std::uint64_t seed) {
  CompletenessFixture fix;
  fix.model = fixtures::random_mlp({12, 16, 4}, Activation::kTanh,
                                   derive_seed(seed, "model"));
  fix.input = fixtures::random_vector(12, derive_seed(seed, "input"));
  fix.reference = fixtures::random_vector(12, derive_seed(seed, "reference"));
  return fix;
}

double cig_relative_residual(const CompletenessFixture& fix, std::size_t steps) {
  PathSpec path{fix.input, fix.reference, steps, QuadratureRule::kTrapezoid};
  const AttributionResult result =
      contrastive_integrated_gradients(fix.model.fn, path);
  const double objective =
      contrastive_objective(fix.model.fn, fix.input, fix.reference);
  return *result.completeness_residual / std::fmax(1.0, objective);
}

AxiomCheck check_cig_completeness(const AxiomOptions& opt) {
  double worst = 0.0;
  for (std::size_t t = 0; t < opt.completeness_models; ++t) {
    const CompletenessFixture fix =
        make_completeness_fixture(derive_seed(opt.seed, "complete", t));
    worst = std::fmax(worst, cig_relative_residual(fix, 300));
  }
  return {"contrastive completeness: attributions sum to the objective",
          worst <= 1e-3,
          detail_of("max relative residual %.3g at 300 steps (tol %.0e)",
                    worst, 1e-3)};
}

AxiomCheck check_cig_residual_order(const AxiomOptions& opt) {
  std::vector<double> at200, at400;
  for (std::size_t t = 0; t < opt.completeness_models; ++t) {
    const CompletenessFixture fix =
        make_completeness_fixture(derive_seed(opt.seed, "complete", t));
    at200.push_back(cig_relative_residual(fix, 200));
    at400.push_back(cig_relative_residual(fix, 400));
  }
  std::sort(at200.begin(), at200.end());
  std::sort(at400.begin(), at400.end());
  const double ratio =
      at200[at200.size() / 2] / std::fmax(at400[at400.size() / 2], 1e-300);
  return {"contrastive completeness residual shrinks ~4x when steps double",
          ratio >= 3.0 && ratio <= 5.0,
          detail_of("median residual ratio 200->400 steps: %.3f (want %g..5)",
                    ratio, 3.0)};
}

AxiomCheck check_ig_completeness(const AxiomOptions& opt) {
  double worst = 0.0;
  for (std::size_t t = 0; t < opt.completeness_models; ++t) {
    const CompletenessFixture fix =
        make_completeness_fixture(derive_seed(opt.seed, "complete", t));
    PathSpec path{fix.input, fix.reference, 300, QuadratureRule::kTrapezoid};
    const AttributionResult result =
        integrated_gradients(fix.model.fn, path, 0);
    const ScalarSelector target = ScalarSelector::output_index(0);
    const double span = fix.model.fn.scalar(fix.input, target) -
                        fix.model.fn.scalar(fix.reference, target);
    worst = std::fmax(worst, *result.completeness_residual /
                                 std::fmax(1.0, std::fabs(span)));
  }
  return {"path attribution sums to the logit change", worst <= 1e-3,
          detail_of("max relative residual %.3g at 300 steps (tol %.0e)",
                    worst, 1e-3)};
}

AxiomCheck check_linear_closed_form(const AxiomOptions& opt) {
  double worst = 0.0;
  for (std::size_t t = 0; t < opt.linear_models; ++t) {
    const std::uint64_t seed = derive_seed(opt.seed, "linear", t);
    const Tensor w = fixtures::random_matrix(4, 6, derive_seed(seed, "w"), 0.7);
    const Tensor x = fixtures::random_vector(6, derive_seed(seed, "x"));
    const Tensor ref = fixtures::random_vector(6, derive_seed(seed, "ref"));
    PathSpec path{x, ref, 50, QuadratureRule::kTrapezoid};
    const AttributionResult result =
        contrastive_integrated_gradients(fixtures::linear_map(w), path);
    const Tensor want = linear_closed_form(w, sub(x, ref));
    worst = std::fmax(worst, max_abs_diff(result.attributions, want));
  }
  // Worked fixture: W = diag(1,2), x = (1,1), x' = 0 -> (1,4), sum 5.
  const Tensor w({2, 2}, {1, 0, 0, 2});
  PathSpec path{Tensor({2}, {1, 1}), Tensor({2}, {0, 0}), 50,
                QuadratureRule::kTrapezoid};
  const AttributionResult fixture =
      contrastive_integrated_gradients(fixtures::linear_map(w), path);
  const bool fixture_ok =
      std::fabs(fixture.attributions[0] - 1.0) < 1e-12 &&
      std::fabs(fixture.attributions[1] - 4.0) < 1e-12 &&
      std::fabs(sum(fixture.attributions) - 5.0) < 1e-12;
  return {"linear models match the closed form d*(W^T W d)",
          worst <= 1e-10 && fixture_ok,
          detail_of("max abs diff %.3g (tol %.0e); diag(1,2) fixture exact",
                    worst, 1e-10)};
}

AxiomCheck check_sensitivity(const AxiomOptions& opt) {
  bool pass = true;
  for (std::size_t t = 0; t < opt.sensitivity_seeds; ++t) {
    const std::uint64_t seed = derive_seed(opt.seed, "sensitivity", t);
    Rng rng(derive_seed(seed, "col"));
    const std::size_t in = 5, out = 3;
    const std::size_t dead = rng.uniform_index(in);
    const Tensor x = fixtures::random_vector(in, derive_seed(seed, "x"));
    const Tensor ref = fixtures::random_vector(in, derive_seed(seed, "ref"));
    PathSpec path{x, ref, 50, QuadratureRule::kTrapezoid};

    const Tensor w = fixtures::zero_column(
        fixtures::random_matrix(out, in, derive_seed(seed, "w")), dead);
    MlpFixture mlp = fixtures::random_mlp({in, 8, out}, Activation::kTanh,
                                          derive_seed(seed, "mlp"));
    mlp.weights[0] = fixtures::zero_column(mlp.weights[0], dead);
    const DifferentiableFn deaf({in}, [mlp](Tape& tape, Var v) {
      return apply_mlp(tape, v, mlp);
    });

    for (const DifferentiableFn& fn : {fixtures::linear_map(w), deaf}) {
      pass &= vanilla_gradient(fn, x, 0).attributions[dead] == 0.0;
      pass &= integrated_gradients(fn, path, 0).attributions[dead] == 0.0;
      pass &=
          contrastive_integrated_gradients(fn, path).attributions[dead] == 0.0;
    }
  }
  return {"ignored inputs receive exactly zero attribution", pass,
          pass ? "all zero, bitwise" : "nonzero attribution on a dead column"};
}

AxiomCheck check_implementation_invariance(const AxiomOptions& opt) {
  double worst = 0.0;
  for (std::size_t t = 0; t < opt.invariance_seeds; ++t) {
    const std::uint64_t seed = derive_seed(opt.seed, "invariance", t);
    const Tensor w = fixtures::random_matrix(3, 5, derive_seed(seed, "w"));
    const DifferentiableFn direct = fixtures::linear_map(w);
    const DifferentiableFn split = fixtures::split_linear_map(w, 0.5);
    const Tensor x = fixtures::random_vector(5, derive_seed(seed, "x"));
    const Tensor ref = fixtures::random_vector(5, derive_seed(seed, "ref"));
    PathSpec path{x, ref, 50, QuadratureRule::kTrapezoid};

    worst = std::fmax(worst,
                      max_abs_diff(vanilla_gradient(direct, x, 0).attributions,
                                   vanilla_gradient(split, x, 0).attributions));
    worst = std::fmax(
        worst, max_abs_diff(integrated_gradients(direct, path, 0).attributions,
                            integrated_gradients(split, path, 0).attributions));
    worst = std::fmax(
        worst,
        max_abs_diff(contrastive_integrated_gradients(direct, path).attributions,
                     contrastive_integrated_gradients(split, path).attributions));
    worst = std::fmax(
        worst,
        max_abs_diff(
            integrated_decision_gradients(direct, path, 0).attributions,
            integrated_decision_gradients(split, path, 0).attributions));
  }
  return {"equivalent graphs receive equal attributions", worst <= 1e-8,
          detail_of("max abs diff %.3g (tol %.0e)", worst, 1e-8)};
}

AxiomCheck check_lipschitz_bound(const AxiomOptions& opt) {
  double worst_excess = -1.0;
  bool pass = true;
  for (std::size_t t = 0; t < opt.lipschitz_models; ++t) {
    const std::uint64_t seed = derive_seed(opt.seed, "lipschitz", t);
    const Tensor w = fixtures::random_matrix(4, 6, derive_seed(seed, "w"), 0.6);
    const Tensor x = fixtures::random_vector(6, derive_seed(seed, "x"));
    const Tensor ref = fixtures::random_vector(6, derive_seed(seed, "ref"));
    const double lip = spectral_norm(w);
    const Tensor delta = sub(x, ref);
    const double delta_norm = norm2(delta);
    PathSpec path{x, ref, 50, QuadratureRule::kTrapezoid};
    const AttributionResult result =
        contrastive_integrated_gradients(fixtures::linear_map(w), path);
    for (std::size_t i = 0; i < delta.size(); ++i) {
      const double bound = lip * lip * delta_norm * std::fabs(delta[i]) + 1e-9;
      const double excess = std::fabs(result.attributions[i]) - bound;
      worst_excess = std::fmax(worst_excess, excess);
      pass &= excess <= 0.0;
    }
  }
  return {"attribution magnitude bounded by L^2 ||x-x'|| |x_i-x_i'|", pass,
          detail_of("worst bound excess %.3g (slack %.0e)", worst_excess, 1e-9)};
}

AxiomCheck check_lipschitz_bound_endpoint_variant(const AxiomOptions& opt) {
  // The endpoint-derivative integrand is quadratic in alpha, so this check
  // runs the midpoint rule at high resolution: midpoint never overshoots a
  // convex integrand, which keeps the quadrature on the bounded side of the
  // 2/3-constant inequality while the step count drives the sum identity to
  // within 1e-8.
  double worst_excess = -1.0;
  double worst_sum_err = 0.0;
  bool pass = true;
  CigOptions options;
  options.endpoint_derivative = true;
  for (std::size_t t = 0; t < 20; ++t) {
    const std::uint64_t seed = derive_seed(opt.seed, "lipschitz-ep", t);
    const Tensor w = fixtures::random_matrix(4, 6, derive_seed(seed, "w"), 0.6);
    const Tensor x =
        fixtures::random_vector(6, derive_seed(seed, "x"), 0.5);
    const Tensor ref =
        fixtures::random_vector(6, derive_seed(seed, "ref"), 0.5);
    const double lip = spectral_norm(w);
    const Tensor delta = sub(x, ref);
    const double delta_norm = norm2(delta);
    const DifferentiableFn fn = fixtures::linear_map(w);
    PathSpec path{x, ref, 40000, QuadratureRule::kMidpoint};
    const AttributionResult result =
        contrastive_integrated_gradients(fn, path, options);
    for (std::size_t i = 0; i < delta.size(); ++i) {
      const double bound =
          (2.0 / 3.0) * lip * lip * delta_norm * std::fabs(delta[i]) + 1e-9;
      const double excess = std::fabs(result.attributions[i]) - bound;
      worst_excess = std::fmax(worst_excess, excess);
      pass &= excess <= 0.0;
    }
    const double objective = contrastive_objective(fn, x, ref);
    const double sum_err =
        std::fabs(sum(result.attributions) - (2.0 / 3.0) * objective);
    worst_sum_err = std::fmax(worst_sum_err, sum_err);
    pass &= sum_err <= 1e-8;
  }
  return {"endpoint-derivative variant: 2/3 bound and 2/3 sum", pass,
          detail_of("worst bound excess %.3g; worst |sum - 2/3 D| %.3g",
                    worst_excess, worst_sum_err)};
}

AxiomCheck check_path_method_agreement(const AxiomOptions& opt) {
  double worst = 0.0;
  for (const QuadratureRule rule :
       {QuadratureRule::kTrapezoid, QuadratureRule::kMidpoint}) {
    for (const std::size_t steps : {2ul, 7ul, 50ul}) {
      const std::uint64_t seed = derive_seed(opt.seed, "agreement");
      const Tensor w = fixtures::random_matrix(3, 5, derive_seed(seed, "w"));
      const Tensor x = fixtures::random_vector(5, derive_seed(seed, "x"));
      const Tensor ref = fixtures::random_vector(5, derive_seed(seed, "ref"));
      const DifferentiableFn fn = fixtures::linear_map(w);
      PathSpec path{x, ref, steps, rule};
      const Tensor delta = sub(x, ref);

      const AttributionResult got_cig =
          contrastive_integrated_gradients(fn, path);
      worst = std::fmax(
          worst, max_abs_diff(got_cig.attributions,
                              linear_closed_form(w, delta)));

      const AttributionResult got_ig = integrated_gradients(fn, path, 1);
      Tensor want_ig({5});
      for (std::size_t j = 0; j < 5; ++j) want_ig[j] = delta[j] * w.at(1, j);
      worst = std::fmax(worst, max_abs_diff(got_ig.attributions, want_ig));
    }
  }
  return {"degree-1-exact rules reproduce linear closed forms at any m >= 2",
          worst <= 1e-12,
          detail_of("max abs diff %.3g (tol %.0e)", worst, 1e-12)};
}

AxiomCheck check_saliency_equivariance(const AxiomOptions& opt) {
  const Tensor a = fixtures::random_matrix(7, 4, derive_seed(opt.seed, "sal"));
  const Tensor s1 = patch_saliency(a);
  const Tensor s2 = patch_saliency(scale(a, 3.5));
  double worst = 0.0;
  bool order_same = true;
  for (std::size_t i = 0; i < s1.size(); ++i) {
    worst = std::fmax(worst, std::fabs(s2[i] - 3.5 * s1[i]));
    for (std::size_t j = 0; j < s1.size(); ++j) {
      order_same &= (s1[i] < s1[j]) == (s2[i] < s2[j]);
    }
  }
  return {"saliency scales with attributions and preserves ranking",
          worst <= 1e-12 && order_same,
          detail_of("max abs diff %.3g (tol %.0e)", worst, 1e-12)};
}

}  // namespace

std::vector<AxiomCheck> run_axiom_battery(const AxiomOptions& options) {
  std::vector<AxiomCheck> checks;
  checks.push_back(check_gradient_vs_finite_diff(options));
  checks.push_back(check_gradient_linearity(options));
  checks.push_back(check_spectral_norm(options));
  checks.push_back(check_cig_completeness(options));
  checks.push_back(check_cig_residual_order(options));
  checks.push_back(check_ig_completeness(options));
  checks.push_back(check_linear_closed_form(options));
  checks.push_back(check_sensitivity(options));
  checks.push_back(check_implementation_invariance(options));
  checks.push_back(check_lipschitz_bound(options));
  checks.push_back(check_lipschitz_bound_endpoint_variant(options));
  checks.push_back(check_path_method_agreement(options));
  checks.push_back(check_saliency_equivariance(options));
  return checks;
}

}  // namespace cig
