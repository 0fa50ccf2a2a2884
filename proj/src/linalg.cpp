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

#include "cig/linalg.hpp"

#include <cmath>

#include "cig/errors.hpp"
#include "cig/rng.hpp"

namespace cig {
namespace {

double vec_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (const double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

double spectral_norm(const Tensor& w, std::size_t max_iters, double tol,
                     std::uint64_t seed) {
  if (w.rank() != 2 || w.size() == 0) {
    throw ParameterError("spectral_norm: matrix must be nonempty rank 2");
  }
  if (max_iters < 1) throw ParameterError("spectral_norm: max_iters < 1");
  const std::size_t r = w.rows(), c = w.cols();

  std::vector<double> v(c, 1.0 / std::sqrt(static_cast<double>(c)));
  std::vector<double> u(r, 0.0);
  double sigma = 0.0;
  double prev = -1.0;
  bool reseeded = false;

  for (std::size_t iter = 0; iter < max_iters; ++iter) {
    for (std::size_t i = 0; i < r; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < c; ++j) s += w.data()[i * c + j] * v[j];
      u[i] = s;
    }
    sigma = vec_norm(u);  // Rayleigh estimate: ||W v|| with ||v|| = 1
    if (sigma == 0.0) {
      if (reseeded) return 0.0;  // random unit vector annihilated too
      Rng rng(seed);
      double n2 = 0.0;
      for (double& x : v) {
        x = rng.normal();
        n2 += x * x;
      }
      const double n = std::sqrt(n2);
      for (double& x : v) x /= n;
      reseeded = true;
      continue;
    }
    std::vector<double> back(c, 0.0);
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) back[j] += w.data()[i * c + j] * u[i];
    }
    const double bn = vec_norm(back);
    for (std::size_t j = 0; j < c; ++j) v[j] = back[j] / bn;

    if (iter > 0 && std::fabs(sigma - prev) <= tol * std::fmax(1.0, sigma)) {
      return sigma;
    }
    prev = sigma;
  }
  throw ConvergenceError("spectral_norm: no convergence in " +
                             std::to_string(max_iters) + " iterations",
                         sigma);
}

}  // namespace cig
