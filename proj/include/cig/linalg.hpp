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

#include "cig/tensor.hpp"

namespace cig {

/// Largest singular value of a rank-2 tensor via power iteration on W^T W.
/// The start vector is the deterministic all-equal unit vector; if an
/// iterate is annihilated it is re-seeded once from `seed`. Throws
/// ConvergenceError (carrying the last estimate) after max_iters sweeps
/// without the estimate settling to within tol.
double spectral_norm(const Tensor& w, std::size_t max_iters = 10000,
                     double tol = 1e-12,
                     std::uint64_t seed = 0x5EED5EEDull);

}  // namespace cig
