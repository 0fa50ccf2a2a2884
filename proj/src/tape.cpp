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

#include "cig/tape.hpp"

#include <cmath>
#include <string>

#include "cig/errors.hpp"
#include "kernels.hpp"

namespace cig {
namespace {

void require_rank1(const Tensor& t, const char* op) {
  if (t.rank() != 1) throw ShapeError(std::string(op) + ": expected rank 1");
}

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) throw ShapeError(std::string(op) + ": expected rank 2");
}

}  // namespace

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

const Tape::Node& Tape::node(Var v) const {
  if (!v.valid() || static_cast<std::size_t>(v.id) >= nodes_.size()) {
    throw ContractError("tape: invalid node handle");
  }
  return nodes_[static_cast<std::size_t>(v.id)];
}

bool Tape::needs_grad(Var v) const { return node(v).requires_grad; }

const Tensor& Tape::value(Var v) const { return node(v).value; }

const Tensor& Tape::aux(Var v) const { return node(v).aux; }

Var Tape::leaf(Tensor value, bool requires_grad) {
  Node n;
  n.op = Op::kLeaf;
  n.requires_grad = requires_grad;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::matmul(Var a, Var b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  require_rank2(va, "matmul");
  require_rank2(vb, "matmul");
  if (va.cols() != vb.rows()) throw ShapeError("matmul: inner dim mismatch");
  Node n;
  n.op = Op::kMatMul;
  n.a = a.id;
  n.b = b.id;
  n.requires_grad = needs_grad(a) || needs_grad(b);
  n.value = detail::dense(va, vb);
  return push(std::move(n));
}

Var Tape::matmul_nt(Var a, Var b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  require_rank2(va, "matmul_nt");
  require_rank2(vb, "matmul_nt");
  if (va.cols() != vb.cols()) throw ShapeError("matmul_nt: inner dim mismatch");
  Node n;
  n.op = Op::kMatMulNT;
  n.a = a.id;
  n.b = b.id;
  n.requires_grad = needs_grad(a) || needs_grad(b);
  n.value = detail::dense_nt(va, vb);
  return push(std::move(n));
}

Var Tape::matvec(Var a, Var x) {
  const Tensor& va = value(a);
  const Tensor& vx = value(x);
  require_rank2(va, "matvec");
  require_rank1(vx, "matvec");
  if (va.cols() != vx.size()) throw ShapeError("matvec: dim mismatch");
  Node n;
  n.op = Op::kMatVec;
  n.a = a.id;
  n.b = x.id;
  n.requires_grad = needs_grad(a) || needs_grad(x);
  n.value = detail::matvec(va, vx);
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  Node n;
  n.op = Op::kAdd;
  n.a = a.id;
  n.b = b.id;
  n.requires_grad = needs_grad(a) || needs_grad(b);
  n.value = cig::add(value(a), value(b));
  return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
  Node n;
  n.op = Op::kSub;
  n.a = a.id;
  n.b = b.id;
  n.requires_grad = needs_grad(a) || needs_grad(b);
  n.value = cig::sub(value(a), value(b));
  return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
  Node n;
  n.op = Op::kMul;
  n.a = a.id;
  n.b = b.id;
  n.requires_grad = needs_grad(a) || needs_grad(b);
  n.value = cig::mul(value(a), value(b));
  return push(std::move(n));
}

Var Tape::add_rowwise(Var a, Var bias) {
  const Tensor& va = value(a);
  const Tensor& vb = value(bias);
  require_rank2(va, "add_rowwise");
  require_rank1(vb, "add_rowwise");
  if (va.cols() != vb.size()) throw ShapeError("add_rowwise: dim mismatch");
  Node n;
  n.op = Op::kAddRowwise;
  n.a = a.id;
  n.b = bias.id;
  n.requires_grad = needs_grad(a) || needs_grad(bias);
  n.value = va;
  detail::add_rowwise_inplace(n.value, vb);
  return push(std::move(n));
}

Var Tape::scale(Var a, double c) {
  Node n;
  n.op = Op::kScale;
  n.a = a.id;
  n.scalar = c;
  n.requires_grad = needs_grad(a);
  n.value = cig::scale(value(a), c);
  return push(std::move(n));
}

Var Tape::relu(Var a) {
  Node n;
  n.op = Op::kRelu;
  n.a = a.id;
  n.requires_grad = needs_grad(a);
  n.value = value(a);
  detail::relu_inplace(n.value);
  return push(std::move(n));
}

Var Tape::tanh(Var a) {
  Node n;
  n.op = Op::kTanh;
  n.a = a.id;
  n.requires_grad = needs_grad(a);
  n.value = value(a);
  detail::tanh_inplace(n.value);
  return push(std::move(n));
}

Var Tape::softmax(Var a) {
  const Tensor& va = value(a);
  require_rank1(va, "softmax");
  if (va.size() == 0) throw ShapeError("softmax: empty input");
  Node n;
  n.op = Op::kSoftmax;
  n.a = a.id;
  n.requires_grad = needs_grad(a);
  n.value = detail::softmax_vec(va);
  return push(std::move(n));
}

Var Tape::sum(Var a) {
  Node n;
  n.op = Op::kSum;
  n.a = a.id;
  n.requires_grad = needs_grad(a);
  n.value = Tensor::scalar(cig::sum(value(a)));
  return push(std::move(n));
}

Var Tape::squared_norm(Var a) {
  Node n;
  n.op = Op::kSquaredNorm;
  n.a = a.id;
  n.requires_grad = needs_grad(a);
  n.value = Tensor::scalar(dot(value(a), value(a)));
  return push(std::move(n));
}

Var Tape::pick(Var a, std::size_t index) {
  const Tensor& va = value(a);
  require_rank1(va, "pick");
  if (index >= va.size()) throw ParameterError("pick: index out of range");
  Node n;
  n.op = Op::kPick;
  n.a = a.id;
  n.index = index;
  n.requires_grad = needs_grad(a);
  n.value = Tensor::scalar(va[index]);
  return push(std::move(n));
}

Var Tape::logsumexp(Var a) {
  const Tensor& va = value(a);
  require_rank1(va, "logsumexp");
  if (va.size() == 0) throw ShapeError("logsumexp: empty input");
  Node n;
  n.op = Op::kLogSumExp;
  n.a = a.id;
  n.requires_grad = needs_grad(a);
  n.value = Tensor::scalar(detail::logsumexp_vec(va));
  n.aux = detail::softmax_vec(va);
  return push(std::move(n));
}

Var Tape::attention_pool(Var scores, Var embeddings) {
  const Tensor& e = value(scores);
  const Tensor& h = value(embeddings);
  require_rank1(e, "attention_pool");
  require_rank2(h, "attention_pool");
  if (e.size() == 0) throw EmptyBagError("attention_pool: empty bag");
  if (e.size() != h.rows()) {
    throw ShapeError("attention_pool: scores/embeddings rows mismatch");
  }
  Node n;
  n.op = Op::kAttentionPool;
  n.a = scores.id;
  n.b = embeddings.id;
  n.requires_grad = needs_grad(scores) || needs_grad(embeddings);
  n.order = detail::canonical_instance_order(e, h);
  detail::abmil_pool(e, h, n.order, n.aux, n.value);
  return push(std::move(n));
}

Tensor& Tape::grad_buffer(std::int32_t id) {
  Tensor& g = grads_[static_cast<std::size_t>(id)];
  if (g.size() == 0 && nodes_[static_cast<std::size_t>(id)].value.size() > 0) {
    g = Tensor::zeros(nodes_[static_cast<std::size_t>(id)].value.shape());
  }
  return g;
}

void Tape::backward(Var scalar_root) {
  const Node& root = node(scalar_root);
  if (root.value.size() != 1) {
    throw ContractError("backward: root is not a scalar");
  }
  grads_.assign(nodes_.size(), Tensor());
  if (!root.requires_grad) return;  // output independent of all leaves
  grads_[static_cast<std::size_t>(scalar_root.id)] =
      Tensor::full(root.value.shape(), 1.0);

  for (std::int32_t id = scalar_root.id; id >= 0; --id) {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    const Tensor& g = grads_[static_cast<std::size_t>(id)];
    if (g.size() == 0 || !n.requires_grad) continue;
    switch (n.op) {
      case Op::kLeaf:
        break;
      case Op::kMatMul: {
        const Tensor& va = nodes_[n.a].value;  // r x k
        const Tensor& vb = nodes_[n.b].value;  // k x c
        const std::size_t r = va.rows(), k = va.cols(), c = vb.cols();
        if (nodes_[n.a].requires_grad) {
          Tensor& ga = grad_buffer(n.a);
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t t = 0; t < k; ++t) {
              double s = 0.0;
              for (std::size_t j = 0; j < c; ++j)
                s += g[i * c + j] * vb[t * c + j];
              ga[i * k + t] += s;
            }
        }
        if (nodes_[n.b].requires_grad) {
          Tensor& gb = grad_buffer(n.b);
          for (std::size_t t = 0; t < k; ++t)
            for (std::size_t j = 0; j < c; ++j) {
              double s = 0.0;
              for (std::size_t i = 0; i < r; ++i)
                s += va[i * k + t] * g[i * c + j];
              gb[t * c + j] += s;
            }
        }
        break;
      }
      case Op::kMatMulNT: {
        const Tensor& va = nodes_[n.a].value;  // r x k
        const Tensor& vb = nodes_[n.b].value;  // c x k
        const std::size_t r = va.rows(), k = va.cols(), c = vb.rows();
        if (nodes_[n.a].requires_grad) {
          Tensor& ga = grad_buffer(n.a);  // dA = dC * B
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t t = 0; t < k; ++t) {
              double s = 0.0;
              for (std::size_t j = 0; j < c; ++j)
                s += g[i * c + j] * vb[j * k + t];
              ga[i * k + t] += s;
            }
        }
        if (nodes_[n.b].requires_grad) {
          Tensor& gb = grad_buffer(n.b);  // dB = dC^T * A
          for (std::size_t j = 0; j < c; ++j)
            for (std::size_t t = 0; t < k; ++t) {
              double s = 0.0;
              for (std::size_t i = 0; i < r; ++i)
                s += g[i * c + j] * va[i * k + t];
              gb[j * k + t] += s;
            }
        }
        break;
      }
      case Op::kMatVec: {
        const Tensor& va = nodes_[n.a].value;  // r x k
        const Tensor& vx = nodes_[n.b].value;  // k
        const std::size_t r = va.rows(), k = va.cols();
        if (nodes_[n.a].requires_grad) {
          Tensor& ga = grad_buffer(n.a);
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t t = 0; t < k; ++t) ga[i * k + t] += g[i] * vx[t];
        }
        if (nodes_[n.b].requires_grad) {
          Tensor& gx = grad_buffer(n.b);
          for (std::size_t t = 0; t < k; ++t) {
            double s = 0.0;
            for (std::size_t i = 0; i < r; ++i) s += va[i * k + t] * g[i];
            gx[t] += s;
          }
        }
        break;
      }
      case Op::kAdd: {
        if (nodes_[n.a].requires_grad) {
          Tensor& ga = grad_buffer(n.a);
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (nodes_[n.b].requires_grad) {
          Tensor& gb = grad_buffer(n.b);
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
        }
        break;
      }
      case Op::kSub: {
        if (nodes_[n.a].requires_grad) {
          Tensor& ga = grad_buffer(n.a);
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (nodes_[n.b].requires_grad) {
          Tensor& gb = grad_buffer(n.b);
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
        }
        break;
      }
      case Op::kMul: {
        const Tensor& va = nodes_[n.a].value;
        const Tensor& vb = nodes_[n.b].value;
        if (nodes_[n.a].requires_grad) {
          Tensor& ga = grad_buffer(n.a);
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * vb[i];
        }
        if (nodes_[n.b].requires_grad) {
          Tensor& gb = grad_buffer(n.b);
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * va[i];
        }
        break;
      }
      case Op::kAddRowwise: {
        const std::size_t r = n.value.rows(), c = n.value.cols();
        if (nodes_[n.a].requires_grad) {
          Tensor& ga = grad_buffer(n.a);
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (nodes_[n.b].requires_grad) {
          Tensor& gb = grad_buffer(n.b);
          for (std::size_t j = 0; j < c; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < r; ++i) s += g[i * c + j];
            gb[j] += s;
          }
        }
        break;
      }
      case Op::kScale: {
        if (nodes_[n.a].requires_grad) {
          Tensor& ga = grad_buffer(n.a);
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += n.scalar * g[i];
        }
        break;
      }
      case Op::kRelu: {
        if (nodes_[n.a].requires_grad) {
          const Tensor& va = nodes_[n.a].value;
          Tensor& ga = grad_buffer(n.a);
          for (std::size_t i = 0; i < g.size(); ++i) {
            if (va[i] > 0.0) ga[i] += g[i];
          }
        }
        break;
      }
      case Op::kTanh: {
        if (nodes_[n.a].requires_grad) {
          Tensor& ga = grad_buffer(n.a);
          for (std::size_t i = 0; i < g.size(); ++i)
            ga[i] += (1.0 - n.value[i] * n.value[i]) * g[i];
        }
        break;
      }
      case Op::kSoftmax: {
        if (nodes_[n.a].requires_grad) {
          Tensor& ga = grad_buffer(n.a);
          double inner = 0.0;
          for (std::size_t i = 0; i < g.size(); ++i) inner += n.value[i] * g[i];
          for (std::size_t i = 0; i < g.size(); ++i)
            ga[i] += n.value[i] * (g[i] - inner);
        }
        break;
      }
      case Op::kSum: {
        if (nodes_[n.a].requires_grad) {
          Tensor& ga = grad_buffer(n.a);
          for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0];
        }
        break;
      }
      case Op::kSquaredNorm: {
        if (nodes_[n.a].requires_grad) {
          const Tensor& va = nodes_[n.a].value;
          Tensor& ga = grad_buffer(n.a);
          for (std::size_t i = 0; i < ga.size(); ++i)
            ga[i] += 2.0 * va[i] * g[0];
        }
        break;
      }
      case Op::kPick: {
        if (nodes_[n.a].requires_grad) {
          grad_buffer(n.a)[n.index] += g[0];
        }
        break;
      }
      case Op::kLogSumExp: {
        if (nodes_[n.a].requires_grad) {
          Tensor& ga = grad_buffer(n.a);
          for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += n.aux[i] * g[0];
        }
        break;
      }
      case Op::kAttentionPool: {
        const Tensor& h = nodes_[n.b].value;   // n x dim
        const Tensor& w = n.aux;               // softmax weights (n)
        const std::size_t rows = h.rows(), dim = h.cols();
        Tensor dw({rows});
        for (std::size_t k = 0; k < rows; ++k) {
          double s = 0.0;
          for (std::size_t j = 0; j < dim; ++j) s += g[j] * h[k * dim + j];
          dw[k] = s;
        }
        if (nodes_[n.b].requires_grad) {
          Tensor& gh = grad_buffer(n.b);
          for (std::size_t k = 0; k < rows; ++k)
            for (std::size_t j = 0; j < dim; ++j)
              gh[k * dim + j] += w[k] * g[j];
        }
        if (nodes_[n.a].requires_grad) {
          Tensor& ge = grad_buffer(n.a);
          double inner = 0.0;
          for (const std::uint32_t k : n.order) inner += w[k] * dw[k];
          for (std::size_t k = 0; k < rows; ++k)
            ge[k] += w[k] * (dw[k] - inner);
        }
        break;
      }
    }
  }
}

Tensor Tape::grad(Var v) const {
  const Node& n = node(v);
  if (grads_.size() != nodes_.size()) {
    throw ContractError("grad: backward() has not been run");
  }
  const Tensor& g = grads_[static_cast<std::size_t>(v.id)];
  if (g.size() == 0) return Tensor::zeros(n.value.shape());
  return g;
}

}  // namespace cig
