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

#include "cig/train.hpp"

#include <cmath>
#include <numeric>

#include "cig/errors.hpp"
#include "cig/rng.hpp"

namespace cig {
namespace {

void validate(const std::vector<const FeatureBag*>& bags,
              const MilModelConfig& model_config, const TrainConfig& config) {
  if (bags.empty()) throw DatasetError("train: empty dataset");
  if (!(config.learning_rate > 0.0)) {
    throw ParameterError("train: learning rate must be > 0");
  }
  if (config.batch_size < 1) throw ParameterError("train: batch_size < 1");
  if (config.dropout < 0.0 || config.dropout >= 1.0) {
    throw ParameterError("train: dropout must lie in [0, 1)");
  }
  for (const FeatureBag* bag : bags) {
    if (bag->feature_dim() != model_config.input_dim) {
      throw DatasetError("train: bag " + bag->slide_id +
                         " has feature dim " +
                         std::to_string(bag->feature_dim()) + ", expected " +
                         std::to_string(model_config.input_dim));
    }
    if (bag->label >= model_config.n_classes) {
      throw DatasetError("train: bag " + bag->slide_id + " label out of range");
    }
  }
}

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::uint64_t t = 0;
};

}  // namespace

double evaluate_accuracy(const MilModel& model,
                         const std::vector<const FeatureBag*>& bags) {
  if (bags.empty()) throw DatasetError("evaluate_accuracy: empty dataset");
  std::size_t correct = 0;
  for (const FeatureBag* bag : bags) {
    if (model.predict(bag->features).cls == bag->label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(bags.size());
}

TrainResult train(const std::vector<const FeatureBag*>& bags,
                  const MilModelConfig& model_config,
                  const TrainConfig& config) {
  validate(bags, model_config, config);

  TrainResult result;
  result.model = MilModel::init(model_config, config.seed);
  std::vector<Tensor*> params = result.model.parameters();

  AdamState adam;
  if (config.optimizer == Optimizer::kAdam) {
    for (const Tensor* p : params) {
      adam.m.push_back(Tensor::zeros(p->shape()));
      adam.v.push_back(Tensor::zeros(p->shape()));
    }
  }

  Rng shuffle_rng(derive_seed(config.seed, "train-shuffle"));
  Rng dropout_rng(derive_seed(config.seed, "train-dropout"));

  std::vector<std::size_t> order(bags.size());
  std::iota(order.begin(), order.end(), 0);

  const double keep = 1.0 - config.dropout;
  std::vector<Tensor> masks(model_config.hidden.size());

  for (std::uint32_t epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.shuffle) shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    std::size_t correct = 0;

    std::vector<Tensor> grad_accum;
    for (const Tensor* p : params) grad_accum.push_back(Tensor::zeros(p->shape()));
    std::size_t in_batch = 0;

    const auto apply_step = [&]() {
      if (in_batch == 0) return;
      const double inv = 1.0 / static_cast<double>(in_batch);
      if (config.optimizer == Optimizer::kAdam) {
        ++adam.t;
        const double bc1 =
            1.0 - std::pow(config.beta1, static_cast<double>(adam.t));
        const double bc2 =
            1.0 - std::pow(config.beta2, static_cast<double>(adam.t));
        for (std::size_t p = 0; p < params.size(); ++p) {
          Tensor& theta = *params[p];
          for (std::size_t i = 0; i < theta.size(); ++i) {
            const double g = grad_accum[p][i] * inv;
            adam.m[p][i] = config.beta1 * adam.m[p][i] + (1.0 - config.beta1) * g;
            adam.v[p][i] =
                config.beta2 * adam.v[p][i] + (1.0 - config.beta2) * g * g;
            const double mhat = adam.m[p][i] / bc1;
            const double vhat = adam.v[p][i] / bc2;
            theta[i] -= config.learning_rate * mhat /
                        (std::sqrt(vhat) + config.adam_eps);
          }
        }
      } else {
        for (std::size_t p = 0; p < params.size(); ++p) {
          Tensor& theta = *params[p];
          for (std::size_t i = 0; i < theta.size(); ++i) {
            theta[i] -= config.learning_rate * grad_accum[p][i] * inv;
          }
        }
      }
      for (Tensor& g : grad_accum) {
        for (double& v : g.data()) v = 0.0;
      }
      in_batch = 0;
    };

    for (const std::size_t bag_index : order) {
      const FeatureBag& bag = *bags[bag_index];
      const std::size_t n = bag.n_patches();

      const std::vector<Tensor>* mask_ptr = nullptr;
      if (config.dropout > 0.0) {
        for (std::size_t l = 0; l < masks.size(); ++l) {
          Tensor mask({n, model_config.hidden[l]});
          for (double& v : mask.data()) {
            v = dropout_rng.uniform() < config.dropout ? 0.0 : 1.0 / keep;
          }
          masks[l] = std::move(mask);
        }
        mask_ptr = &masks;
      }

      Tape tape;
      std::vector<Var> param_vars;
      const Var bag_var = tape.leaf(bag.features);
      const Var logits = result.model.build_logits(
          tape, bag_var, /*train_weights=*/true, mask_ptr, &param_vars);
      const Var loss =
          tape.sub(tape.logsumexp(logits), tape.pick(logits, bag.label));
      tape.backward(loss);

      loss_sum += tape.value(loss)[0];
      const Tensor& lv = tape.value(logits);
      std::size_t argmax = 0;
      for (std::size_t i = 1; i < lv.size(); ++i) {
        if (lv[i] > lv[argmax]) argmax = i;
      }
      if (argmax == bag.label) ++correct;

      for (std::size_t p = 0; p < params.size(); ++p) {
        const Tensor g = tape.grad(param_vars[p]);
        for (std::size_t i = 0; i < g.size(); ++i) grad_accum[p][i] += g[i];
      }
      if (++in_batch == config.batch_size) apply_step();
    }
    apply_step();  // remainder batch

    EpochStats stats;
    stats.loss = loss_sum / static_cast<double>(bags.size());
    stats.accuracy =
        static_cast<double>(correct) / static_cast<double>(bags.size());
    result.history.push_back(stats);
  }
  return result;
}

}  // namespace cig
