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

// Dense numeric kernels with pinned loop and accumulation orders. The tape
// forward pass and the model's inference path both call these, so the two
// routes produce bit-identical values.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "cig/tensor.hpp"

namespace cig::detail {

/// C = A * B^T with A (r x k), B (c x k).
inline Tensor dense_nt(const Tensor& a, const Tensor& b) {
  const std::size_t r = a.rows(), k = a.cols(), c = b.rows();
  Tensor out({r, c});
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* po = out.data().data();
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      double s = 0.0;
      const double* ra = pa + i * k;
      const double* rb = pb + j * k;
      for (std::size_t t = 0; t < k; ++t) s += ra[t] * rb[t];
      po[i * c + j] = s;
    }
  }
  return out;
}

/// C = A * B with A (r x k), B (k x c).
inline Tensor dense(const Tensor& a, const Tensor& b) {
  const std::size_t r = a.rows(), k = a.cols(), c = b.cols();
  Tensor out({r, c});
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* po = out.data().data();
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < k; ++t) s += pa[i * k + t] * pb[t * c + j];
      po[i * c + j] = s;
    }
  }
  return out;
}

/// y = A * x with A (r x k), x (k).
inline Tensor matvec(const Tensor& a, const Tensor& x) {
  const std::size_t r = a.rows(), k = a.cols();
  Tensor out({r});
  for (std::size_t i = 0; i < r; ++i) {
    double s = 0.0;
    for (std::size_t t = 0; t < k; ++t) s += a.data()[i * k + t] * x[t];
    out[i] = s;
  }
  return out;
}

inline void add_rowwise_inplace(Tensor& a, const Tensor& bias) {
  const std::size_t r = a.rows(), c = a.cols();
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) a[i * c + j] += bias[j];
  }
}

inline void relu_inplace(Tensor& a) {
  for (double& v : a.data()) {
    if (v <= 0.0) v = 0.0;
  }
}

inline void tanh_inplace(Tensor& a) {
  for (double& v : a.data()) v = std::tanh(v);
}

/// Stable softmax of a rank-1 tensor; accumulation in index order.
inline Tensor softmax_vec(const Tensor& a) {
  double mx = a[0];
  for (std::size_t i = 1; i < a.size(); ++i) {
    if (a[i] > mx) mx = a[i];
  }
  Tensor out = a;
  double denom = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::exp(a[i] - mx);
    denom += out[i];
  }
  for (double& v : out.data()) v /= denom;
  return out;
}

inline double logsumexp_vec(const Tensor& a) {
  double mx = a[0];
  for (std::size_t i = 1; i < a.size(); ++i) {
    if (a[i] > mx) mx = a[i];
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::exp(a[i] - mx);
  return mx + std::log(s);
}

/// Accumulation order over bag instances that depends only on instance
/// content, never on row position: ascending score, ties broken by the
/// lexicographic order of the embedding row. Reordering the bag therefore
/// replays the exact same floating-point reduction sequence.
inline std::vector<std::uint32_t> canonical_instance_order(
    const Tensor& scores, const Tensor& embeddings) {
  const std::size_t n = scores.size();
  const std::size_t h = embeddings.cols();
  std::vector<std::uint32_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<std::uint32_t>(i);
  const double* e = scores.data().data();
  const double* emb = embeddings.data().data();
  std::sort(order.begin(), order.end(),
            [&](std::uint32_t i, std::uint32_t j) {
              if (e[i] != e[j]) return e[i] < e[j];
              const double* ri = emb + static_cast<std::size_t>(i) * h;
              const double* rj = emb + static_cast<std::size_t>(j) * h;
              for (std::size_t t = 0; t < h; ++t) {
                if (ri[t] != rj[t]) return ri[t] < rj[t];
              }
              return i < j;
            });
  return order;
}

/// Attention pooling: weights = softmax(scores), pooled = sum_k w_k * H_k.
/// Both reductions run in the canonical instance order.
inline void abmil_pool(const Tensor& scores, const Tensor& h,
                       const std::vector<std::uint32_t>& order,
                       Tensor& weights, Tensor& pooled) {
  const std::size_t n = scores.size();
  const std::size_t dim = h.cols();
  double mx = scores[0];
  for (std::size_t i = 1; i < n; ++i) {
    if (scores[i] > mx) mx = scores[i];
  }
  weights = Tensor({n});
  double denom = 0.0;
  for (const std::uint32_t k : order) {
    weights[k] = std::exp(scores[k] - mx);
    denom += weights[k];
  }
  for (double& v : weights.data()) v /= denom;
  pooled = Tensor({dim});
  for (const std::uint32_t k : order) {
    const double w = weights[k];
    const double* row = h.data().data() + static_cast<std::size_t>(k) * dim;
    for (std::size_t j = 0; j < dim; ++j) pooled[j] += w * row[j];
  }
}

}  // namespace cig::detail
