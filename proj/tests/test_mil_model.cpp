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

#include <doctest.h>

#include <cmath>

#include "cig/diff_fn.hpp"
#include "cig/errors.hpp"
#include "cig/fixtures.hpp"
#include "cig/mil_model.hpp"
#include "cig/rng.hpp"
#include "support.hpp"

using namespace cig;
using test_support::TempDir;
using test_support::rel_err;
using test_support::slurp;

namespace {

MilModelConfig small_config(std::size_t d = 6) {
  MilModelConfig config;
  config.input_dim = d;
  config.hidden = {10, 8};
  config.attention_dim = 5;
  config.n_classes = 2;
  return config;
}

Tensor random_bag_features(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  Tensor bag({n, d});
  for (double& v : bag.data()) v = rng.normal();
  return bag;
}

Tensor permute_rows(const Tensor& bag, const std::vector<std::size_t>& perm) {
  Tensor out({bag.rows(), bag.cols()});
  for (std::size_t i = 0; i < perm.size(); ++i) {
    for (std::size_t j = 0; j < bag.cols(); ++j) {
      out.at(i, j) = bag.at(perm[i], j);
    }
  }
  return out;
}

/// Smallest |relu pre-activation| over the hidden stack; used to keep
/// finite-difference checks away from the kink.
double bag_relu_margin(const MilModel& model, const Tensor& bag) {
  double margin = std::numeric_limits<double>::infinity();
  Tensor h = bag;
  for (const MilModel::Layer& layer : model.hidden_layers()) {
    Tensor pre({h.rows(), layer.weight.rows()});
    for (std::size_t i = 0; i < h.rows(); ++i) {
      for (std::size_t o = 0; o < layer.weight.rows(); ++o) {
        double s = layer.bias[o];
        for (std::size_t j = 0; j < h.cols(); ++j) {
          s += h.at(i, j) * layer.weight.at(o, j);
        }
        pre.at(i, o) = s;
        margin = std::min(margin, std::fabs(s));
      }
    }
    for (double& v : pre.data()) v = v > 0.0 ? v : 0.0;
    h = std::move(pre);
  }
  return margin;
}

}  // namespace

TEST_CASE("attention pool: singleton, symmetry, permutation equivariance") {
  const MilModel model = MilModel::init(small_config(), 3);
  const std::size_t h = model.config().hidden.back();

  const Tensor one = random_bag_features(1, h, 10);
  const auto [z1, w1] = model.attention_pool(one);
  CHECK(w1.size() == 1);
  CHECK(w1[0] == 1.0);
  for (std::size_t j = 0; j < h; ++j) CHECK(z1[j] == one[j]);

  Tensor twins({2, h});
  for (std::size_t j = 0; j < h; ++j) {
    twins.at(0, j) = twins.at(1, j) = 0.3 * static_cast<double>(j) - 1.0;
  }
  const auto [z2, w2] = model.attention_pool(twins);
  CHECK(w2[0] == 0.5);
  CHECK(w2[1] == 0.5);

  const Tensor five = random_bag_features(5, h, 11);
  const auto [z5, w5] = model.attention_pool(five);
  double total = 0.0;
  for (std::size_t k = 0; k < 5; ++k) {
    CHECK(w5[k] >= 0.0);
    total += w5[k];
  }
  CHECK(std::fabs(total - 1.0) <= 1e-12);

  const std::vector<std::size_t> perm = {3, 0, 4, 1, 2};
  const auto [zp, wp] = model.attention_pool(permute_rows(five, perm));
  for (std::size_t k = 0; k < 5; ++k) CHECK(wp[k] == w5[perm[k]]);
  CHECK(zp.data() == z5.data());

  CHECK_THROWS_AS(model.attention_pool(Tensor({0, h})), EmptyBagError);
}

TEST_CASE("logits: zero classifier, duplicated bag, bitwise reproducibility") {
  MilModel model = MilModel::init(small_config(), 3);
  const Tensor bag = random_bag_features(4, 6, 4);

  {
    MilModel zeroed = model;
    std::vector<Tensor*> params = zeroed.parameters();
    Tensor* cls_w = params[params.size() - 2];
    Tensor* cls_b = params[params.size() - 1];
    for (double& v : cls_w->data()) v = 0.0;
    for (double& v : cls_b->data()) v = 0.0;
    const Tensor logits = zeroed.logits(bag);
    CHECK(logits.data() == std::vector<double>{0.0, 0.0});
  }

  Tensor doubled({8, 6});
  for (std::size_t i = 0; i < 8; ++i) {
    for (std::size_t j = 0; j < 6; ++j) doubled.at(i, j) = bag.at(i / 2, j);
  }
  CHECK(max_abs_diff(model.logits(doubled), model.logits(bag)) <= 1e-12);

  const Tensor a = model.logits(bag);
  const Tensor b = model.logits(bag);
  CHECK(a.all_finite());
  CHECK(a.data() == b.data());
}

TEST_CASE("logits: permutation invariance is bitwise over 100 shuffles") {
  const MilModel model = MilModel::init(small_config(8), 21);
  const Tensor bag = random_bag_features(17, 8, 22);
  const Tensor want = model.logits(bag);
  Rng rng(23);
  std::vector<std::size_t> perm(17);
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  for (int trial = 0; trial < 100; ++trial) {
    rng.shuffle(perm);
    const Tensor got = model.logits(permute_rows(bag, perm));
    CHECK(got.data() == want.data());
  }
}

TEST_CASE("logits: dimension mismatch and empty bag raise") {
  const MilModel model = MilModel::init(small_config(), 3);
  CHECK_THROWS_AS(model.logits(random_bag_features(3, 5, 1)), ShapeError);
  CHECK_THROWS_AS(model.logits(Tensor({0, 6})), EmptyBagError);
}

TEST_CASE("predict: tie-break, two-class softmax, overflow stability") {
  // Zeroing the classifier weight makes the logits equal the bias for any
  // bag, which pins the softmax inputs exactly.
  MilModelConfig config = small_config();
  const Tensor bag = random_bag_features(3, 6, 9);
  const auto with_bias = [&](std::vector<double> bias) {
    MilModel model = MilModel::init(config, 5);
    std::vector<Tensor*> params = model.parameters();
    for (double& v : params[params.size() - 2]->data()) v = 0.0;
    params[params.size() - 1]->data() = std::move(bias);
    return model;
  };

  const MilModel::Prediction tie = with_bias({0.0, 0.0}).predict(bag);
  CHECK(tie.cls == 0);
  CHECK(tie.confidence[0] == 0.5);
  CHECK(tie.confidence[1] == 0.5);

  const MilModel::Prediction two = with_bias({1.0, 3.0}).predict(bag);
  CHECK(two.cls == 1);
  CHECK(two.confidence[1] ==
        doctest::Approx(1.0 / (1.0 + std::exp(-2.0))).epsilon(1e-12));

  const MilModel::Prediction big = with_bias({1000.0, 0.0}).predict(bag);
  CHECK(big.cls == 0);
  CHECK(big.confidence[0] == 1.0);
  CHECK(big.confidence.all_finite());
}

TEST_CASE("logit gradient w.r.t. the bag matches finite differences") {
  const MilModel model = MilModel::init(small_config(), 31);
  Tensor bag;
  for (std::uint64_t attempt = 0;; ++attempt) {
    bag = random_bag_features(5, 6, derive_seed(32, "bag", attempt));
    if (bag_relu_margin(model, bag) > 1e-4) break;
  }
  const DifferentiableFn fn = model.logit_fn(5);
  for (std::size_t cls = 0; cls < 2; ++cls) {
    const ScalarSelector sel = ScalarSelector::output_index(cls);
    CHECK(rel_err(fn.gradient(bag, sel),
                  finite_diff_gradient(fn, bag, sel, 1e-6)) <= 1e-5);
  }
  // The tape forward agrees with the inference path bit for bit.
  CHECK(fn.evaluate(bag).data() == model.logits(bag).data());
}

TEST_CASE("checkpoint: round trip reproduces logits") {
  TempDir dir("ckpt");
  const MilModel model = MilModel::init(small_config(), 77);
  const Tensor bag = random_bag_features(6, 6, 78);
  CheckpointMeta meta;
  meta.seed = 77;
  meta.epochs = 12;
  meta.final_loss = 0.25;
  meta.final_accuracy = 0.9;

  const std::string path = dir.str("model.ckpt");
  save_checkpoint(model, meta, path);
  const auto [loaded, loaded_meta] = load_checkpoint(path);
  CHECK(loaded_meta.seed == 77);
  CHECK(loaded_meta.epochs == 12);
  CHECK(loaded_meta.final_loss == 0.25);

  // f32 storage: logits agree to single precision.
  const Tensor a = model.logits(bag);
  const Tensor b = loaded.logits(bag);
  CHECK(rel_err(a, b) <= 1e-5);

  // A second round trip is lossless: bytes and logits are bit-identical.
  const std::string path2 = dir.str("model2.ckpt");
  save_checkpoint(loaded, loaded_meta, path2);
  CHECK(slurp(path) == slurp(path2));
  const auto [loaded2, meta2] = load_checkpoint(path2);
  CHECK(loaded2.logits(bag).data() == b.data());
}

TEST_CASE("checkpoint: corruption reports format errors with offsets") {
  TempDir dir("ckpt_bad");
  const MilModel model = MilModel::init(small_config(), 1);
  const std::string path = dir.str("m.ckpt");
  save_checkpoint(model, CheckpointMeta{}, path);
  auto bytes = slurp(path);

  {
    auto bad = bytes;
    bad[0] = 'X';
    const std::string bad_path = dir.str("bad_magic.ckpt");
    std::ofstream(bad_path, std::ios::binary)
        .write(reinterpret_cast<const char*>(bad.data()),
               static_cast<std::streamsize>(bad.size()));
    CHECK_THROWS_AS(load_checkpoint(bad_path), FormatError);
  }
  {
    auto bad = bytes;
    bad[bad.size() - 1] ^= 0xFF;  // flip a CRC byte
    const std::string bad_path = dir.str("bad_crc.ckpt");
    std::ofstream(bad_path, std::ios::binary)
        .write(reinterpret_cast<const char*>(bad.data()),
               static_cast<std::streamsize>(bad.size()));
    CHECK_THROWS_AS(load_checkpoint(bad_path), FormatError);
  }
  {
    auto bad = bytes;
    bad.resize(bad.size() / 2);
    const std::string bad_path = dir.str("truncated.ckpt");
    std::ofstream(bad_path, std::ios::binary)
        .write(reinterpret_cast<const char*>(bad.data()),
               static_cast<std::streamsize>(bad.size()));
    try {
      load_checkpoint(bad_path);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.offset() <= bad.size());
      CHECK(std::string(e.what()).find("byte") != std::string::npos);
    }
  }
}
