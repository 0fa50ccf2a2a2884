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

#include "cig/fixtures.hpp"

#include <cmath>
#include <limits>

#include "cig/errors.hpp"
#include "cig/rng.hpp"

namespace cig::fixtures {

Tensor random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed,
                     double scale) {
  Rng rng(seed);
  Tensor t({rows, cols});
  for (double& v : t.data()) v = rng.normal(0.0, scale);
  return t;
}

Tensor random_vector(std::size_t n, std::uint64_t seed, double scale) {
  Rng rng(seed);
  Tensor t({n});
  for (double& v : t.data()) v = rng.normal(0.0, scale);
  return t;
}

double MlpFixture::relu_margin(const Tensor& x) const {
  if (activation != Activation::kRelu) {
    return std::numeric_limits<double>::infinity();
  }
  double margin = std::numeric_limits<double>::infinity();
  Tensor h = x;
  for (std::size_t layer = 0; layer < weights.size(); ++layer) {
    const Tensor& w = weights[layer];
    const Tensor& b = biases[layer];
    Tensor pre({w.rows()});
    for (std::size_t i = 0; i < w.rows(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < w.cols(); ++j)
        s += w.data()[i * w.cols() + j] * h[j];
      pre[i] = s + b[i];
    }
    const bool last = layer + 1 == weights.size();
    if (!last) {
      for (std::size_t i = 0; i < pre.size(); ++i) {
        const double a = std::fabs(pre[i]);
        if (a < margin) margin = a;
        pre[i] = pre[i] > 0.0 ? pre[i] : 0.0;
      }
    }
    h = pre;
  }
  return margin;
}

MlpFixture random_mlp(const std::vector<std::size_t>& widths,
                      Activation activation, std::uint64_t seed,
                      double scale) {
  if (widths.size() < 2) {
    throw ParameterError("random_mlp: need at least input and output widths");
  }
  MlpFixture fix;
  fix.widths = widths;
  fix.activation = activation;
  Rng rng(seed);
  for (std::size_t layer = 0; layer + 1 < widths.size(); ++layer) {
    const std::size_t fan_in = widths[layer];
    const std::size_t fan_out = widths[layer + 1];
    const double std_w = scale / std::sqrt(static_cast<double>(fan_in));
    Tensor w({fan_out, fan_in});
    for (double& v : w.data()) v = rng.normal(0.0, std_w);
    Tensor b({fan_out});
    for (double& v : b.data()) v = rng.normal(0.0, 0.1);
    fix.weights.push_back(std::move(w));
    fix.biases.push_back(std::move(b));
  }
  const std::vector<Tensor> weights = fix.weights;
  const std::vector<Tensor> biases = fix.biases;
  fix.fn = DifferentiableFn(
      {widths.front()}, [weights, biases, activation](Tape& tape, Var in) {
        Var h = in;
        for (std::size_t layer = 0; layer < weights.size(); ++layer) {
          const Var w = tape.leaf(weights[layer]);
          const Var b = tape.leaf(biases[layer]);
          h = tape.add(tape.matvec(w, h), b);
          if (layer + 1 < weights.size()) {
            h = activation == Activation::kRelu ? tape.relu(h) : tape.tanh(h);
          }
        }
        return h;
      });
  return fix;
}

DifferentiableFn linear_map(Tensor w) {
  const std::size_t in = w.cols();
  return DifferentiableFn({in}, [w = std::move(w)](Tape& tape, Var x) {
    return tape.matvec(tape.leaf(w), x);
  });
}

DifferentiableFn split_linear_map(Tensor w, double part) {
  const std::size_t in = w.cols();
  const Tensor first = scale(w, part);
  const Tensor second = scale(w, 1.0 - part);
  return DifferentiableFn({in}, [first, second](Tape& tape, Var x) {
    const Var a = tape.matvec(tape.leaf(first), x);
    const Var b = tape.matvec(tape.leaf(second), x);
    return tape.add(a, b);
  });
}

Tensor zero_column(Tensor w, std::size_t column) {
  for (std::size_t i = 0; i < w.rows(); ++i) w.at(i, column) = 0.0;
  return w;
}

}  // namespace cig::fixtures
