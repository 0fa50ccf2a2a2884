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

#include "cig/diff_fn.hpp"

#include <utility>

#include "cig/errors.hpp"

namespace cig {

ScalarSelector ScalarSelector::identity() {
  return ScalarSelector(Kind::kIdentity, 0, Tensor());
}

ScalarSelector ScalarSelector::output_index(std::size_t index) {
  return ScalarSelector(Kind::kIndex, index, Tensor());
}

ScalarSelector ScalarSelector::output_sum() {
  return ScalarSelector(Kind::kSum, 0, Tensor());
}

ScalarSelector ScalarSelector::squared_norm_diff(Tensor reference) {
  return ScalarSelector(Kind::kSquaredNormDiff, 0, std::move(reference));
}

double ScalarSelector::apply(const Tensor& output) const {
  switch (kind_) {
    case Kind::kIdentity:
      if (output.size() != 1) {
        throw ContractError("selector: output is not a scalar");
      }
      return output[0];
    case Kind::kIndex:
      if (index_ >= output.size()) {
        throw ContractError("selector: index out of range");
      }
      return output[index_];
    case Kind::kSum:
      return sum(output);
    case Kind::kSquaredNormDiff: {
      if (!output.same_shape(reference_)) {
        throw ShapeError("selector: reference shape mismatch");
      }
      double s = 0.0;
      for (std::size_t i = 0; i < output.size(); ++i) {
        const double d = output[i] - reference_[i];
        s += d * d;
      }
      return s;
    }
  }
  throw ContractError("selector: unknown kind");
}

Var ScalarSelector::apply(Tape& tape, Var output) const {
  switch (kind_) {
    case Kind::kIdentity: {
      if (tape.value(output).size() != 1) {
        throw ContractError("selector: output is not a scalar");
      }
      return output;
    }
    case Kind::kIndex: {
      if (index_ >= tape.value(output).size()) {
        throw ContractError("selector: index out of range");
      }
      return tape.pick(output, index_);
    }
    case Kind::kSum:
      return tape.sum(output);
    case Kind::kSquaredNormDiff: {
      if (!tape.value(output).same_shape(reference_)) {
        throw ShapeError("selector: reference shape mismatch");
      }
      const Var ref = tape.leaf(reference_);
      return tape.squared_norm(tape.sub(output, ref));
    }
  }
  throw ContractError("selector: unknown kind");
}

DifferentiableFn::DifferentiableFn(std::vector<std::size_t> input_shape,
                                   GraphBuilder builder)
    : input_shape_(std::move(input_shape)), builder_(std::move(builder)) {}

void DifferentiableFn::check_input(const Tensor& x) const {
  if (x.shape() != input_shape_) {
    throw ShapeError("evaluate: input shape does not match declared shape");
  }
}

Tensor DifferentiableFn::evaluate(const Tensor& x) const {
  check_input(x);
  Tape tape;
  const Var in = tape.leaf(x, /*requires_grad=*/false);
  const Var out = builder_(tape, in);
  return tape.value(out);
}

double DifferentiableFn::scalar(const Tensor& x,
                                const ScalarSelector& selector) const {
  return selector.apply(evaluate(x));
}

Tensor DifferentiableFn::gradient(const Tensor& x,
                                  const ScalarSelector& selector) const {
  check_input(x);
  Tape tape;
  const Var in = tape.leaf(x, /*requires_grad=*/true);
  const Var out = builder_(tape, in);
  const Var root = selector.apply(tape, out);
  tape.backward(root);
  return tape.grad(in);
}

Tensor finite_diff_gradient(const DifferentiableFn& f, const Tensor& x,
                            const ScalarSelector& selector, double h) {
  if (!(h > 0.0)) throw ParameterError("finite_diff_gradient: h must be > 0");
  Tensor grad = Tensor::zeros(x.shape());
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double up = f.scalar(probe, selector);
    probe[i] = x[i] - h;
    const double down = f.scalar(probe, selector);
    probe[i] = x[i];
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

}  // namespace cig
