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

#include "cig/mil_model.hpp"

#include <cmath>

#include "cig/errors.hpp"
#include "cig/rng.hpp"
#include "binio.hpp"
#include "kernels.hpp"

namespace cig {
namespace {

constexpr char kCkptMagic[] = "MILCKPT1";

}  // namespace

MilModel MilModel::init(const MilModelConfig& config, std::uint64_t seed) {
  if (config.input_dim == 0) throw ParameterError("model: input_dim required");
  if (config.hidden.empty()) throw ParameterError("model: no hidden layers");
  if (config.n_classes < 2) throw ParameterError("model: need >= 2 classes");
  if (config.attention_dim == 0) {
    throw ParameterError("model: attention_dim required");
  }
  MilModel m;
  m.config_ = config;
  Rng rng(derive_seed(seed, "model-init"));
  std::size_t in = config.input_dim;
  for (const std::size_t out : config.hidden) {
    Layer layer;
    layer.weight = Tensor({out, in});
    const double std_w = std::sqrt(2.0 / static_cast<double>(in));
    for (double& v : layer.weight.data()) v = rng.normal(0.0, std_w);
    layer.bias = Tensor::zeros({out});
    m.hidden_.push_back(std::move(layer));
    in = out;
  }
  const std::size_t h = config.hidden.back();
  const double std_v = std::sqrt(1.0 / static_cast<double>(h));
  m.attn_v_ = Tensor({config.attention_dim, h});
  for (double& v : m.attn_v_.data()) v = rng.normal(0.0, std_v);
  m.attn_w_ = Tensor({config.attention_dim});
  const double std_a = std::sqrt(1.0 / static_cast<double>(config.attention_dim));
  for (double& v : m.attn_w_.data()) v = rng.normal(0.0, std_a);
  m.classifier_.weight = Tensor({config.n_classes, h});
  for (double& v : m.classifier_.weight.data()) v = rng.normal(0.0, std_v);
  m.classifier_.bias = Tensor::zeros({config.n_classes});
  return m;
}

void MilModel::check_bag(const Tensor& bag) const {
  if (bag.rank() != 2 || bag.cols() != config_.input_dim) {
    throw ShapeError("bag must be n x input_dim");
  }
  if (bag.rows() == 0) throw EmptyBagError("bag has no instances");
}

Var MilModel::build_logits(Tape& tape, Var bag, bool train_weights,
                           const std::vector<Tensor>* dropout_masks,
                           std::vector<Var>* param_vars) const {
  const auto track = [&](const Tensor& t) {
    const Var v = tape.leaf(t, train_weights);
    if (param_vars) param_vars->push_back(v);
    return v;
  };
  Var h = bag;
  for (std::size_t i = 0; i < hidden_.size(); ++i) {
    const Var w = track(hidden_[i].weight);
    const Var b = track(hidden_[i].bias);
    h = tape.relu(tape.add_rowwise(tape.matmul_nt(h, w), b));
    if (dropout_masks && !(*dropout_masks)[i].data().empty()) {
      h = tape.mul(h, tape.leaf((*dropout_masks)[i]));
    }
  }
  const Var v = track(attn_v_);
  const Var w = track(attn_w_);
  const Var scores = tape.matvec(tape.tanh(tape.matmul_nt(h, v)), w);
  const Var pooled = tape.attention_pool(scores, h);
  const Var cw = track(classifier_.weight);
  const Var cb = track(classifier_.bias);
  return tape.add(tape.matvec(cw, pooled), cb);
}

Tensor MilModel::instance_embeddings(const Tensor& bag) const {
  check_bag(bag);
  Tensor h = bag;
  for (const Layer& layer : hidden_) {
    h = detail::dense_nt(h, layer.weight);
    detail::add_rowwise_inplace(h, layer.bias);
    detail::relu_inplace(h);
  }
  return h;
}

std::pair<Tensor, Tensor> MilModel::attention_pool(
    const Tensor& embeddings) const {
  if (embeddings.rank() != 2 || embeddings.cols() != config_.hidden.back()) {
    throw ShapeError("attention_pool: embeddings must be n x h_last");
  }
  if (embeddings.rows() == 0) {
    throw EmptyBagError("attention_pool: empty bag");
  }
  Tensor scored = detail::dense_nt(embeddings, attn_v_);
  detail::tanh_inplace(scored);
  const Tensor scores = detail::matvec(scored, attn_w_);
  const std::vector<std::uint32_t> order =
      detail::canonical_instance_order(scores, embeddings);
  Tensor weights, pooled;
  detail::abmil_pool(scores, embeddings, order, weights, pooled);
  return {std::move(pooled), std::move(weights)};
}

Tensor MilModel::logits(const Tensor& bag) const {
  check_bag(bag);
  const Tensor h = instance_embeddings(bag);
  Tensor scored = detail::dense_nt(h, attn_v_);
  detail::tanh_inplace(scored);
  const Tensor scores = detail::matvec(scored, attn_w_);
  const std::vector<std::uint32_t> order =
      detail::canonical_instance_order(scores, h);
  Tensor weights, pooled;
  detail::abmil_pool(scores, h, order, weights, pooled);
  Tensor out = detail::matvec(classifier_.weight, pooled);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += classifier_.bias[i];
  return out;
}

MilModel::Prediction MilModel::predict(const Tensor& bag) const {
  const Tensor l = logits(bag);
  Prediction p;
  p.confidence = detail::softmax_vec(l);
  p.cls = 0;
  for (std::size_t i = 1; i < l.size(); ++i) {
    if (l[i] > l[p.cls]) p.cls = i;
  }
  return p;
}

DifferentiableFn MilModel::logit_fn(std::size_t n_instances) const {
  if (n_instances == 0) throw EmptyBagError("logit_fn: empty bag");
  MilModel copy = *this;
  return DifferentiableFn(
      {n_instances, config_.input_dim},
      [copy = std::move(copy)](Tape& tape, Var bag) {
        return copy.build_logits(tape, bag, /*train_weights=*/false, nullptr,
                                 nullptr);
      });
}

std::vector<Tensor*> MilModel::parameters() {
  std::vector<Tensor*> out;
  for (Layer& layer : hidden_) {
    out.push_back(&layer.weight);
    out.push_back(&layer.bias);
  }
  out.push_back(&attn_v_);
  out.push_back(&attn_w_);
  out.push_back(&classifier_.weight);
  out.push_back(&classifier_.bias);
  return out;
}

std::vector<const Tensor*> MilModel::parameters() const {
  std::vector<const Tensor*> out;
  for (const Layer& layer : hidden_) {
    out.push_back(&layer.weight);
    out.push_back(&layer.bias);
  }
  out.push_back(&attn_v_);
  out.push_back(&attn_w_);
  out.push_back(&classifier_.weight);
  out.push_back(&classifier_.bias);
  return out;
}

void save_checkpoint(const MilModel& model, const CheckpointMeta& meta,
                     const std::string& path) {
  const MilModelConfig& c = model.config();
  detail::ByteWriter w;
  w.put_bytes(kCkptMagic, 8);
  w.put_u32(static_cast<std::uint32_t>(c.input_dim));
  w.put_u32(static_cast<std::uint32_t>(c.hidden.size()));
  for (const std::size_t width : c.hidden) {
    w.put_u32(static_cast<std::uint32_t>(width));
  }
  w.put_u32(static_cast<std::uint32_t>(c.attention_dim));
  w.put_u32(static_cast<std::uint32_t>(c.n_classes));
  for (const Tensor* t : model.parameters()) {
    for (const double v : t->data()) w.put_f32(static_cast<float>(v));
  }
  w.put_u64(meta.seed);
  w.put_u32(meta.epochs);
  w.put_f64(meta.final_loss);
  w.put_f64(meta.final_accuracy);
  w.put_crc();
  detail::atomic_write_file(path, w.bytes());
}

std::pair<MilModel, CheckpointMeta> load_checkpoint(const std::string& path) {
  detail::ByteReader r(detail::read_file_bytes(path));
  r.expect_magic(kCkptMagic, 8, "MILCKPT1");
  r.check_crc("MILCKPT1");
  MilModelConfig c;
  c.input_dim = r.get_u32();
  const std::uint32_t n_hidden = r.get_u32();
  if (n_hidden == 0 || n_hidden > 64) {
    throw FormatError("MILCKPT1: implausible hidden layer count", 12);
  }
  c.hidden.clear();
  for (std::uint32_t i = 0; i < n_hidden; ++i) c.hidden.push_back(r.get_u32());
  c.attention_dim = r.get_u32();
  c.n_classes = r.get_u32();
  MilModel model = MilModel::init(c, 0);
  for (Tensor* t : model.parameters()) {
    for (double& v : t->data()) v = static_cast<double>(r.get_f32());
  }
  CheckpointMeta meta;
  meta.seed = r.get_u64();
  meta.epochs = r.get_u32();
  meta.final_loss = r.get_f64();
  meta.final_accuracy = r.get_f64();
  r.expect_consumed("MILCKPT1");
  return {std::move(model), meta};
}

}  // namespace cig
