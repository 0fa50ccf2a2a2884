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

#include <thread>

#include "cig/diff_fn.hpp"
#include "cig/errors.hpp"
#include "cig/fixtures.hpp"
#include "cig/linalg.hpp"
#include "cig/rng.hpp"
#include "support.hpp"

using namespace cig;
using fixtures::Activation;
using fixtures::MlpFixture;
using test_support::rel_err;

namespace {

DifferentiableFn relu_fn(std::size_t n) {
  return DifferentiableFn({n}, [](Tape& t, Var x) { return t.relu(x); });
}

DifferentiableFn squared_norm_fn(std::size_t n) {
  return DifferentiableFn({n}, [](Tape& t, Var x) { return t.squared_norm(x); });
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

}  // namespace

TEST_CASE("evaluate: relu, identity map, softmax") {
  CHECK(relu_fn(2).evaluate(Tensor({2}, {-1.0, 2.0})).data() ==
        std::vector<double>{0.0, 2.0});

  const Tensor eye({2, 2}, {1, 0, 0, 1});
  const Tensor out = fixtures::linear_map(eye).evaluate(Tensor({2}, {3.0, 4.0}));
  CHECK(out.data() == std::vector<double>{3.0, 4.0});

  const DifferentiableFn softmax_fn(
      {2}, [](Tape& t, Var x) { return t.softmax(x); });
  const Tensor probs = softmax_fn.evaluate(Tensor({2}, {0.0, 0.0}));
  CHECK(probs[0] == 0.5);
  CHECK(probs[1] == 0.5);
}

TEST_CASE("evaluate: shape mismatch raises") {
  CHECK_THROWS_AS(relu_fn(2).evaluate(Tensor({3}, {1, 2, 3})), ShapeError);
}

TEST_CASE("gradient: x^2, z^T z, and a 3-layer relu net vs finite diff") {
  const DifferentiableFn square = squared_norm_fn(1);
  const Tensor g1 =
      square.gradient(Tensor({1}, {3.0}), ScalarSelector::identity());
  CHECK(g1[0] == doctest::Approx(6.0).epsilon(1e-12));

  const Tensor g2 = squared_norm_fn(2).gradient(Tensor({2}, {1.0, 2.0}),
                                                ScalarSelector::identity());
  CHECK(g2[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(g2[1] == doctest::Approx(4.0).epsilon(1e-12));

  MlpFixture mlp = fixtures::random_mlp({6, 10, 8, 3}, Activation::kRelu, 7);
  Tensor x;
  for (std::uint64_t attempt = 0;; ++attempt) {
    x = fixtures::random_vector(6, derive_seed(7, "x", attempt));
    if (mlp.relu_margin(x) > 1e-4) break;
  }
  const ScalarSelector sel = ScalarSelector::output_sum();
  CHECK(rel_err(mlp.fn.gradient(x, sel),
                finite_diff_gradient(mlp.fn, x, sel, 1e-6)) <= 1e-5);
}

TEST_CASE("gradient: non-scalar selector is a contract error") {
  const DifferentiableFn id(
      {3}, [](Tape& t, Var x) { return t.scale(x, 1.0); });
  CHECK_THROWS_AS(id.gradient(Tensor({3}, {1, 2, 3}), ScalarSelector::identity()),
                  ContractError);
}

TEST_CASE("finite differences: quadratic, unit slope, constant, bad h") {
  const DifferentiableFn square = squared_norm_fn(1);
  const Tensor g = finite_diff_gradient(square, Tensor({1}, {3.0}),
                                        ScalarSelector::identity(), 1e-5);
  CHECK(g[0] == doctest::Approx(6.0).epsilon(1e-7));

  // tanh has unit derivative at the origin.
  const DifferentiableFn tanh_fn(
      {1}, [](Tape& t, Var x) { return t.tanh(x); });
  const Tensor g2 = finite_diff_gradient(tanh_fn, Tensor({1}, {0.0}),
                                         ScalarSelector::identity(), 1e-5);
  CHECK(std::fabs(g2[0] - 1.0) <= 1e-9);

  const DifferentiableFn constant({2}, [](Tape& t, Var x) {
    (void)x;
    return t.leaf(Tensor({1}, {42.0}));
  });
  const Tensor g3 = finite_diff_gradient(constant, Tensor({2}, {1.0, 2.0}),
                                         ScalarSelector::identity(), 1e-5);
  CHECK(g3.data() == std::vector<double>{0.0, 0.0});
  // The reverse-mode route must agree on the constant case.
  const Tensor g4 =
      constant.gradient(Tensor({2}, {1.0, 2.0}), ScalarSelector::identity());
  CHECK(g4.data() == std::vector<double>{0.0, 0.0});

  CHECK_THROWS_AS(finite_diff_gradient(square, Tensor({1}, {1.0}),
                                       ScalarSelector::identity(), 0.0),
                  ParameterError);
}

TEST_CASE("gradient matches finite differences on 100 random composites") {
  double worst = 0.0;
  for (std::uint64_t t = 0; t < 100; ++t) {
    const std::uint64_t seed = derive_seed(3141, "composite", t);
    Rng rng(seed);
    const std::size_t in = 3 + rng.uniform_index(5);
    const std::size_t mid = 4 + rng.uniform_index(10);
    const std::size_t out = 2 + rng.uniform_index(4);
    const Activation act =
        rng.uniform_index(2) == 0 ? Activation::kRelu : Activation::kTanh;
    const MlpFixture mlp =
        fixtures::random_mlp({in, mid, out}, act, derive_seed(seed, "w"));
    // Compose a final softmax on half the trials to cover its backward.
    const bool with_softmax = rng.uniform_index(2) == 0;
    const DifferentiableFn fn(
        {in}, [mlp, with_softmax](Tape& tape, Var x) {
          const Var y = apply_mlp(tape, x, mlp);
          return with_softmax ? tape.softmax(y) : y;
        });
    Tensor x;
    for (std::uint64_t attempt = 0;; ++attempt) {
      x = fixtures::random_vector(in, derive_seed(seed, "x", attempt));
      if (mlp.relu_margin(x) > 1e-4) break;
    }
    const ScalarSelector sel =
        t % 3 == 0
            ? ScalarSelector::output_sum()
            : (t % 3 == 1 ? ScalarSelector::output_index(out - 1)
                          : ScalarSelector::squared_norm_diff(
                                fixtures::random_vector(
                                    out, derive_seed(seed, "ref"), 0.3)));
    worst = std::max(worst, rel_err(fn.gradient(x, sel),
                                    finite_diff_gradient(fn, x, sel, 1e-6)));
  }
  CHECK(worst <= 1e-5);
}

TEST_CASE("gradient of a sum equals the sum of gradients") {
  for (std::uint64_t t = 0; t < 20; ++t) {
    const std::uint64_t seed = derive_seed(99, "sumgrad", t);
    const MlpFixture a =
        fixtures::random_mlp({4, 6, 2}, Activation::kTanh, derive_seed(seed, "a"));
    const MlpFixture b =
        fixtures::random_mlp({4, 5, 2}, Activation::kTanh, derive_seed(seed, "b"));
    const DifferentiableFn combined({4}, [a, b](Tape& tape, Var x) {
      return tape.add(apply_mlp(tape, x, a), apply_mlp(tape, x, b));
    });
    const Tensor x = fixtures::random_vector(4, derive_seed(seed, "x"));
    const ScalarSelector sel = ScalarSelector::output_sum();
    const Tensor got = combined.gradient(x, sel);
    const Tensor want = add(a.fn.gradient(x, sel), b.fn.gradient(x, sel));
    CHECK(max_abs_diff(got, want) <= 1e-12);
  }
}

TEST_CASE("concurrent gradient calls on one function do not interfere") {
  const MlpFixture mlp = fixtures::random_mlp({8, 12, 4}, Activation::kTanh, 55);
  const Tensor x = fixtures::random_vector(8, 56);
  const ScalarSelector sel = ScalarSelector::output_sum();
  const Tensor want = mlp.fn.gradient(x, sel);

  std::vector<Tensor> results(8);
  std::vector<std::thread> workers;
  for (std::size_t i = 0; i < results.size(); ++i) {
    workers.emplace_back(
        [&, i]() { results[i] = mlp.fn.gradient(x, sel); });
  }
  for (std::thread& w : workers) w.join();
  for (const Tensor& got : results) {
    CHECK(got.data() == want.data());
  }
}

TEST_CASE("spectral norm: known singular values") {
  CHECK(spectral_norm(Tensor({2, 2}, {1, 0, 0, 2})) ==
        doctest::Approx(2.0).epsilon(1e-10));
  CHECK(spectral_norm(Tensor({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1})) ==
        doctest::Approx(1.0).epsilon(1e-10));
  // Nilpotent shift: W^T W = diag(0, 1), so the singular values are {1, 0}.
  CHECK(spectral_norm(Tensor({2, 2}, {0, 1, 0, 0})) ==
        doctest::Approx(1.0).epsilon(1e-10));
  CHECK(spectral_norm(Tensor({2, 3}, {0, 0, 0, 0, 0, 0})) == 0.0);
}

TEST_CASE("spectral norm: homogeneity and error paths") {
  for (std::uint64_t t = 0; t < 10; ++t) {
    const Tensor w = fixtures::random_matrix(5, 3, derive_seed(17, "h", t));
    const double direct = spectral_norm(scale(w, -2.5));
    CHECK(std::fabs(direct - 2.5 * spectral_norm(w)) <= 1e-8);
  }
  CHECK_THROWS_AS(spectral_norm(Tensor({2}, {1, 2})), ParameterError);
  CHECK_THROWS_AS(spectral_norm(Tensor({2, 2}, {1, 0, 0, 2}), 0), ParameterError);
  try {
    spectral_norm(fixtures::random_matrix(6, 6, 1), 1, 1e-16);
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& e) {
    CHECK(e.last_estimate() > 0.0);
  }
}

TEST_CASE("tensor: invariants and error paths") {
  CHECK_THROWS_AS(Tensor({2, 2}, {1, 2, 3}), ShapeError);
  CHECK_THROWS_AS(add(Tensor({2}, {1, 2}), Tensor({3}, {1, 2, 3})), ShapeError);
  const Tensor t({2, 3});
  CHECK(t.size() == 6);
  CHECK(t.all_finite());
}
