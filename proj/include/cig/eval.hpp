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
#include <vector>

#include "cig/attribution.hpp"
#include "cig/baseline.hpp"
#include "cig/data_io.hpp"
#include "cig/mil_model.hpp"

namespace cig {

/// Patch counts at which the curves are sampled: a dense-to-sparse top-k
/// ladder merged with percentile-threshold counts into one strictly
/// increasing ordinal sequence ending at n.
struct InfoBins {
  enum class Source : std::uint8_t { kTopK, kThreshold };
  std::vector<std::size_t> counts;
  std::vector<Source> provenance;  // parallel to counts
};

struct BinsConfig {
  std::vector<std::size_t> topk = {1,  2,  3,  4,  5,  6,  7,   8,   9,   10,
                                   15, 20, 25, 30, 35, 40, 45,  50,  60,  70,
                                   80, 90, 100, 150, 200, 300, 400, 500};
  std::vector<std::uint32_t> threshold_percents = {20, 40, 60, 80,
                                                    85, 90, 95, 99};
};

InfoBins info_bins(std::size_t n_patches, const BinsConfig& config = {});

/// Bag with target features at the k highest-ranked patch positions and
/// control features everywhere else. `order` is a permutation of patch
/// indices, highest saliency first.
Tensor reveal(const Tensor& target_features, const Tensor& control,
              const std::vector<std::uint32_t>& order, std::size_t k);

/// Ranking by descending saliency; ties broken by ascending patch index.
std::vector<std::uint32_t> saliency_order(const Tensor& saliency);

enum class CurveKind { kMilAic, kMilSic };

struct EvalCurve {
  InfoBins bins;
  std::vector<double> values;
  CurveKind kind = CurveKind::kMilAic;
  double auc = 0.0;
  std::string slide_id;
  std::string method;
};

/// Trapezoidal mean of the values over the unit-spaced ordinal index; a
/// single-bin curve scores its own value.
double curve_auc(const std::vector<double>& values);

/// Correct-label indicator at each bin as the top-k target patches replace
/// the control features.
EvalCurve mil_aic(const MilModel& model, const FeatureBag& target,
                  const Tensor& control, const Tensor& saliency,
                  const InfoBins& bins);

/// Softmax confidence of the true class at each bin.
EvalCurve mil_sic(const MilModel& model, const FeatureBag& target,
                  const Tensor& control, const Tensor& saliency,
                  const InfoBins& bins);

/// i.i.d. uniform(0,1) scores; constant_scores swaps in all-equal scores so
/// the ranking degenerates to patch order.
Tensor random_saliency(std::size_t n_patches, std::uint64_t seed,
                       bool constant_scores = false);

// ---- whole-split evaluation ------------------------------------------------

enum class Method {
  kVanillaGradient,
  kIntegratedGradients,
  kExpectedGradients,
  kIntegratedDecisionGradients,
  kContrastiveIntegratedGradients,
  kRandom,
  kOracle,  // ground-truth mask as saliency (synthetic data only)
};

std::string method_name(Method method);
/// Throws ConfigError for names outside {gradient, ig, eg, idg, cig, random}.
Method method_from_config_name(const std::string& name);

struct EvalConfig {
  std::string eval_split = "test";
  std::string pool_split = "train";
  std::vector<std::size_t> positive_classes = {1};
  std::size_t steps = 50;
  QuadratureRule rule = QuadratureRule::kTrapezoid;
  std::size_t eg_samples = 50;
  std::size_t pool_slides = 30;
  std::size_t pool_per_slide = 0;  // 0: ceil(median bag size / pool_slides)
  bool endpoint_derivative = false;
  bool constant_random_scores = false;
  BinsConfig bins;
  std::uint64_t seed = 11;
  std::size_t threads = 1;
};

struct SlideEval {
  std::string slide_id;
  std::size_t label = 0;
  EvalCurve aic;
  EvalCurve sic;
};

struct ClassStats {
  std::size_t cls = 0;
  std::size_t n_slides = 0;
  double aic_mean = 0.0, aic_std = 0.0;
  double sic_mean = 0.0, sic_std = 0.0;
};

struct MethodEvaluation {
  Method method = Method::kRandom;
  std::vector<SlideEval> slides;     // in manifest order
  std::vector<ClassStats> per_class; // ascending class index
};

/// Evaluates one attribution method over every positive-class slide of the
/// eval split. Reference pools are built per class from the pool split;
/// per-slide seeds derive from the base seed and the slide id, so results
/// are independent of thread scheduling. The same derived streams produce
/// the baseline for every path method and the control features for every
/// method, holding the comparison fixed.
MethodEvaluation evaluate_method(const Dataset& dataset, const MilModel& model,
                                 Method method, const EvalConfig& config);

/// Plain-text table of per-class mean +/- std rows for several methods.
std::string render_table(const std::vector<MethodEvaluation>& evaluations,
                         const std::vector<std::string>& class_names);

/// CSV rows: bin,k,value (full double precision).
void write_curve_csv(const EvalCurve& curve, const std::string& path);

}  // namespace cig
