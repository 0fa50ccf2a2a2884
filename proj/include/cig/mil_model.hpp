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
#include <string>
#include <utility>
#include <vector>

#include "cig/diff_fn.hpp"
#include "cig/tape.hpp"
#include "cig/tensor.hpp"

namespace cig {

struct MilModelConfig {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden = {512, 256, 128};
  std::size_t attention_dim = 64;
  std::size_t n_classes = 2;
};

/// Attention-pooling MLP bag classifier. Instances pass through the hidden
/// stack row-wise; attention weights softmax(w^T tanh(V h_k^T)) pool the
/// final embeddings into one vector that the linear head scores.
///
/// Every bag-wide reduction runs in a canonical content-derived order, so
/// reordering a bag's rows reproduces the logits bit for bit.
///
/// A constructed model is immutable; evaluation and gradient calls build
/// private tapes and are safe to run concurrently.
class MilModel {
 public:
  struct Layer {
    Tensor weight;  // out x in
    Tensor bias;    // out
  };

  MilModel() = default;

  /// Seeded He/Gaussian initialization.
  static MilModel init(const MilModelConfig& config, std::uint64_t seed);

  const MilModelConfig& config() const { return config_; }
  const std::vector<Layer>& hidden_layers() const { return hidden_; }
  const Tensor& attention_v() const { return attn_v_; }
  const Tensor& attention_w() const { return attn_w_; }
  const Layer& classifier() const { return classifier_; }

  /// Pre-softmax class scores for an n x d bag; dropout-free.
  Tensor logits(const Tensor& bag) const;

  struct Prediction {
    std::size_t cls = 0;
    Tensor confidence;  // softmax over classes
  };
  /// Argmax with lowest-index tie-break; softmax stabilized by max shift.
  Prediction predict(const Tensor& bag) const;

  /// (pooled embedding, attention weights) for n x h instance embeddings.
  std::pair<Tensor, Tensor> attention_pool(const Tensor& embeddings) const;

  /// Per-instance embeddings after the hidden stack (n x h_last).
  Tensor instance_embeddings(const Tensor& bag) const;

  /// The logit layer as a differentiable function of an n x d bag.
  DifferentiableFn logit_fn(std::size_t n_instances) const;

  /// Records the logit graph on an existing tape. When train_weights is
  /// true the parameters become gradient leaves, returned in param_vars in
  /// parameters() order. dropout_masks, when given, multiply each hidden
  /// activation (one n x width mask per hidden layer).
  Var build_logits(Tape& tape, Var bag, bool train_weights,
                   const std::vector<Tensor>* dropout_masks,
                   std::vector<Var>* param_vars) const;

  /// All parameter tensors: per hidden layer W, b; attention V, w; head W, b.
  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;

 private:
  void check_bag(const Tensor& bag) const;

  MilModelConfig config_;
  std::vector<Layer> hidden_;
  Tensor attn_v_;  // a x h_last
  Tensor attn_w_;  // a
  Layer classifier_;
};

struct CheckpointMeta {
  std::uint64_t seed = 0;
  std::uint32_t epochs = 0;
  double final_loss = 0.0;
  double final_accuracy = 0.0;
};

/// MILCKPT1: dims as u32, weights as little-endian f32, trailing CRC32.
void save_checkpoint(const MilModel& model, const CheckpointMeta& meta,
                     const std::string& path);
std::pair<MilModel, CheckpointMeta> load_checkpoint(const std::string& path);

}  // namespace cig
