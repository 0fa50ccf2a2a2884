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
#include <vector>

#include "cig/tensor.hpp"

namespace cig {

/// Handle to a node on a Tape.
struct Var {
  std::int32_t id = -1;
  bool valid() const { return id >= 0; }
};

/// Define-by-run reverse-mode tape. Ops evaluate eagerly; backward() walks
/// the recorded structure once and accumulates exact gradients for every
/// node that transitively depends on a differentiable leaf.
///
/// A tape is single-owner state: concurrent gradient computations must each
/// build their own tape (the library never shares one across threads).
class Tape {
 public:
  Var leaf(Tensor value, bool requires_grad = false);

  Var matmul(Var a, Var b);      // (r x k) * (k x c)
  Var matmul_nt(Var a, Var b);   // (r x k) * (c x k)^T
  Var matvec(Var a, Var x);      // (r x k) * (k)
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);         // elementwise
  Var add_rowwise(Var a, Var bias);
  Var scale(Var a, double c);
  Var relu(Var a);
  Var tanh(Var a);
  Var softmax(Var a);            // rank-1
  Var sum(Var a);                // scalar
  Var squared_norm(Var a);       // scalar
  Var pick(Var a, std::size_t index);  // rank-1 -> scalar
  Var logsumexp(Var a);          // rank-1 -> scalar
  /// Attention pooling over bag instances; scores (n), embeddings (n x h)
  /// -> pooled embedding (h). The softmax weights are exposed via aux().
  Var attention_pool(Var scores, Var embeddings);

  const Tensor& value(Var v) const;
  const Tensor& aux(Var v) const;

  /// Backpropagates from a size-1 output. Throws ContractError otherwise.
  void backward(Var scalar_root);

  /// Gradient of the last backward() root w.r.t. v; zeros if the root does
  /// not depend on v.
  Tensor grad(Var v) const;

  std::size_t node_count() const { return nodes_.size(); }

 private:
  enum class Op : std::uint8_t {
    kLeaf,
    kMatMul,
    kMatMulNT,
    kMatVec,
    kAdd,
    kSub,
    kMul,
    kAddRowwise,
    kScale,
    kRelu,
    kTanh,
    kSoftmax,
    kSum,
    kSquaredNorm,
    kPick,
    kLogSumExp,
    kAttentionPool,
  };

  struct Node {
    Op op = Op::kLeaf;
    std::int32_t a = -1;
    std::int32_t b = -1;
    double scalar = 0.0;
    std::size_t index = 0;
    bool requires_grad = false;
    Tensor value;
    Tensor aux;
    std::vector<std::uint32_t> order;
  };

  Var push(Node node);
  const Node& node(Var v) const;
  bool needs_grad(Var v) const;
  Tensor& grad_buffer(std::int32_t id);

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
};

}  // namespace cig
