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

#include "cig/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "cig/errors.hpp"
#include "cig/rng.hpp"
#include "binio.hpp"
#include "parallel.hpp"

namespace cig {
namespace {

std::size_t ceil_percent(std::size_t n, std::uint32_t percent) {
  return (n * percent + 99) / 100;
}

double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (const double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double sample_std(const std::vector<double>& xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double s = 0.0;
  for (const double x : xs) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

}  // namespace

InfoBins info_bins(std::size_t n_patches, const BinsConfig& config) {
  if (n_patches < 1) throw ParameterError("info_bins: n_patches must be >= 1");
  std::set<std::size_t> topk_set;
  for (const std::size_t k : config.topk) {
    if (k >= 1 && k <= n_patches) topk_set.insert(k);
  }
  std::set<std::size_t> merged = topk_set;
  for (const std::uint32_t p : config.threshold_percents) {
    const std::size_t k = ceil_percent(n_patches, p);
    if (k >= 1 && k <= n_patches) merged.insert(k);
  }
  merged.insert(n_patches);

  InfoBins bins;
  for (const std::size_t k : merged) {
    bins.counts.push_back(k);
    bins.provenance.push_back(topk_set.count(k) ? InfoBins::Source::kTopK
                                                : InfoBins::Source::kThreshold);
  }
  return bins;
}

std::vector<std::uint32_t> saliency_order(const Tensor& saliency) {
  const std::size_t n = saliency.size();
  std::vector<std::uint32_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<std::uint32_t>(i);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint32_t a, std::uint32_t b) {
                     if (saliency[a] != saliency[b]) {
                       return saliency[a] > saliency[b];
                     }
                     return a < b;
                   });
  return order;
}

Tensor reveal(const Tensor& target_features, const Tensor& control,
              const std::vector<std::uint32_t>& order, std::size_t k) {
  if (!target_features.same_shape(control)) {
    throw ShapeError("reveal: target/control shape mismatch");
  }
  const std::size_t n = target_features.rows();
  if (k > n) throw ParameterError("reveal: k exceeds patch count");
  if (order.size() != n) throw ParameterError("reveal: order is not a permutation");
  std::vector<bool> seen(n, false);
  for (const std::uint32_t i : order) {
    if (i >= n || seen[i]) {
      throw ParameterError("reveal: order is not a permutation");
    }
    seen[i] = true;
  }
  Tensor out = control;
  const std::size_t d = target_features.cols();
  for (std::size_t r = 0; r < k; ++r) {
    const std::size_t patch = order[r];
    for (std::size_t j = 0; j < d; ++j) {
      out.at(patch, j) = target_features.at(patch, j);
    }
  }
  return out;
}

double curve_auc(const std::vector<double>& values) {
  if (values.empty()) throw ParameterError("auc: no values");
  if (values.size() == 1) return values[0];
  double area = 0.0;
  for (std::size_t i = 0; i + 1 < values.size(); ++i) {
    area += 0.5 * (values[i] + values[i + 1]);
  }
  return area / static_cast<double>(values.size() - 1);
}

namespace {

EvalCurve run_curve(const MilModel& model, const FeatureBag& target,
                    const Tensor& control, const Tensor& saliency,
                    const InfoBins& bins, CurveKind kind) {
  if (saliency.size() != target.n_patches()) {
    throw ParameterError("curve: saliency length must equal patch count");
  }
  const std::vector<std::uint32_t> order = saliency_order(saliency);
  EvalCurve curve;
  curve.bins = bins;
  curve.kind = kind;
  curve.slide_id = target.slide_id;
  curve.values.reserve(bins.counts.size());
  for (const std::size_t k : bins.counts) {
    const Tensor bag = reveal(target.features, control, order, k);
    const MilModel::Prediction pred = model.predict(bag);
    if (kind == CurveKind::kMilAic) {
      curve.values.push_back(pred.cls == target.label ? 1.0 : 0.0);
    } else {
      curve.values.push_back(pred.confidence[target.label]);
    }
  }
  curve.auc = curve_auc(curve.values);
  return curve;
}

}  // namespace

EvalCurve mil_aic(const MilModel& model, const FeatureBag& target,
                  const Tensor& control, const Tensor& saliency,
                  const InfoBins& bins) {
  return run_curve(model, target, control, saliency, bins, CurveKind::kMilAic);
}

EvalCurve mil_sic(const MilModel& model, const FeatureBag& target,
                  const Tensor& control, const Tensor& saliency,
                  const InfoBins& bins) {
  return run_curve(model, target, control, saliency, bins, CurveKind::kMilSic);
}

Tensor random_saliency(std::size_t n_patches, std::uint64_t seed,
                       bool constant_scores) {
  Tensor s({n_patches});
  if (constant_scores) {
    for (double& v : s.data()) v = 0.5;
    return s;
  }
  Rng rng(derive_seed(seed, "random-saliency"));
  for (double& v : s.data()) v = rng.uniform();
  return s;
}

std::string method_name(Method method) {
  switch (method) {
    case Method::kVanillaGradient: return "gradient";
    case Method::kIntegratedGradients: return "ig";
    case Method::kExpectedGradients: return "eg";
    case Method::kIntegratedDecisionGradients: return "idg";
    case Method::kContrastiveIntegratedGradients: return "cig";
    case Method::kRandom: return "random";
    case Method::kOracle: return "oracle";
  }
  return "unknown";
}

Method method_from_config_name(const std::string& name) {
  if (name == "gradient") return Method::kVanillaGradient;
  if (name == "ig") return Method::kIntegratedGradients;
  if (name == "eg") return Method::kExpectedGradients;
  if (name == "idg") return Method::kIntegratedDecisionGradients;
  if (name == "cig") return Method::kContrastiveIntegratedGradients;
  if (name == "random") return Method::kRandom;
  throw ConfigError("unknown method name: " + name, "methods");
}

MethodEvaluation evaluate_method(const Dataset& dataset, const MilModel& model,
                                 Method method, const EvalConfig& config) {
  // Eligible slides: positive-class members of the eval split.
  std::vector<const FeatureBag*> eligible;
  for (const SlideRecord& rec : dataset.manifest.slides) {
    if (rec.split != config.eval_split) continue;
    if (std::find(config.positive_classes.begin(),
                  config.positive_classes.end(),
                  static_cast<std::size_t>(rec.label)) ==
        config.positive_classes.end()) {
      continue;
    }
    eligible.push_back(&dataset.bag(rec.id));
  }
  if (eligible.empty()) {
    throw EvalError("evaluate_method: no eligible slides in split '" +
                    config.eval_split + "'");
  }

  // One reference pool per target class, drawn from the pool split.
  std::map<std::size_t, ReferencePool> pools;
  const std::vector<const FeatureBag*> pool_bags =
      dataset.split_bags(config.pool_split);
  for (const FeatureBag* bag : eligible) {
    const std::size_t cls = bag->label;
    if (pools.count(cls)) continue;
    std::vector<const FeatureBag*> opposite;
    for (const FeatureBag* candidate : pool_bags) {
      if (candidate->label != cls) opposite.push_back(candidate);
    }
    if (opposite.empty()) {
      throw EvalError("evaluate_method: no opposite-class slides for class " +
                      std::to_string(cls));
    }
    const std::size_t per_slide =
        config.pool_per_slide > 0
            ? config.pool_per_slide
            : default_per_slide(opposite, config.pool_slides);
    pools.emplace(cls, build_reference_pool(
                           opposite, cls, config.pool_slides, per_slide,
                           derive_seed(config.seed, "pool", cls)));
  }

  MethodEvaluation evaluation;
  evaluation.method = method;
  evaluation.slides.resize(eligible.size());

  detail::parallel_for(eligible.size(), config.threads, [&](std::size_t idx) {
    const FeatureBag& bag = *eligible[idx];
    const std::size_t n = bag.n_patches();
    const ReferencePool& pool = pools.at(bag.label);
    const std::uint64_t slide_seed =
        derive_seed(config.seed, bag.slide_id);

    const InfoBins bins = info_bins(n, config.bins);
    const Tensor control =
        sample_baseline(pool, n, derive_seed(slide_seed, "control"));

    Tensor saliency;
    switch (method) {
      case Method::kRandom:
        saliency = random_saliency(n, derive_seed(slide_seed, "random"),
                                   config.constant_random_scores);
        break;
      case Method::kOracle: {
        if (!bag.has_mask()) {
          throw EvalError("oracle saliency requires a ground-truth mask: " +
                          bag.slide_id);
        }
        saliency = Tensor({n});
        for (std::size_t i = 0; i < n; ++i) {
          saliency[i] = bag.mask[i] ? 1.0 : 0.0;
        }
        break;
      }
      default: {
        const DifferentiableFn fn = model.logit_fn(n);
        const std::size_t target_class = model.predict(bag.features).cls;
        if (method == Method::kVanillaGradient) {
          saliency = vanilla_gradient(fn, bag.features, target_class).saliency;
          break;
        }
        if (method == Method::kExpectedGradients) {
          saliency = expected_gradients(fn, bag.features, pool,
                                        config.eg_samples, target_class,
                                        derive_seed(slide_seed, "eg"))
                         .saliency;
          break;
        }
        PathSpec path;
        path.input = bag.features;
        path.reference =
            sample_baseline(pool, n, derive_seed(slide_seed, "baseline"));
        path.steps = config.steps;
        path.rule = config.rule;
        if (method == Method::kIntegratedGradients) {
          saliency = integrated_gradients(fn, path, target_class).saliency;
        } else if (method == Method::kIntegratedDecisionGradients) {
          saliency =
              integrated_decision_gradients(fn, path, target_class).saliency;
        } else {
          CigOptions options;
          options.endpoint_derivative = config.endpoint_derivative;
          saliency =
              contrastive_integrated_gradients(fn, path, options).saliency;
        }
        break;
      }
    }

    SlideEval result;
    result.slide_id = bag.slide_id;
    result.label = bag.label;
    result.aic = mil_aic(model, bag, control, saliency, bins);
    result.sic = mil_sic(model, bag, control, saliency, bins);
    result.aic.method = method_name(method);
    result.sic.method = method_name(method);
    evaluation.slides[idx] = std::move(result);
  });

  // Aggregate AUCs per class.
  std::map<std::size_t, std::pair<std::vector<double>, std::vector<double>>>
      by_class;
  for (const SlideEval& s : evaluation.slides) {
    by_class[s.label].first.push_back(s.aic.auc);
    by_class[s.label].second.push_back(s.sic.auc);
  }
  for (const auto& [cls, aucs] : by_class) {
    ClassStats stats;
    stats.cls = cls;
    stats.n_slides = aucs.first.size();
    stats.aic_mean = mean_of(aucs.first);
    stats.aic_std = sample_std(aucs.first, stats.aic_mean);
    stats.sic_mean = mean_of(aucs.second);
    stats.sic_std = sample_std(aucs.second, stats.sic_mean);
    evaluation.per_class.push_back(stats);
  }
  return evaluation;
}

void write_curve_csv(const EvalCurve& curve, const std::string& path) {
  std::string csv = "bin,k,value\n";
  char buf[64];
  for (std::size_t b = 0; b < curve.values.size(); ++b) {
    std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g\n", b, curve.bins.counts[b],
                  curve.values[b]);
    csv += buf;
  }
  detail::atomic_write_text(path, csv);
}

std::string render_table(const std::vector<MethodEvaluation>& evaluations,
                         const std::vector<std::string>& class_names) {
  // Column set: the union of classes present across evaluations.
  std::set<std::size_t> classes;
  for (const MethodEvaluation& e : evaluations) {
    for (const ClassStats& s : e.per_class) classes.insert(s.cls);
  }
  const auto pad = [](std::string s, std::size_t width) {
    if (s.size() < width) s.append(width - s.size(), ' ');
    return s;
  };
  constexpr std::size_t kCol = 20;
  std::string out = pad("Method", 10);
  for (const std::size_t cls : classes) {
    const std::string name = cls < class_names.size()
                                 ? class_names[cls]
                                 : "class" + std::to_string(cls);
    out += pad("  " + name + " MIL-AIC", kCol);
    out += pad("  " + name + " MIL-SIC", kCol);
  }
  out += '\n';
  out.append(10 + classes.size() * 2 * kCol, '-');
  out += '\n';
  char buf[48];
  for (const MethodEvaluation& e : evaluations) {
    out += pad(method_name(e.method), 10);
    for (const std::size_t cls : classes) {
      const ClassStats* stats = nullptr;
      for (const ClassStats& s : e.per_class) {
        if (s.cls == cls) stats = &s;
      }
      if (stats) {
        std::snprintf(buf, sizeof buf, "  %.3f +/- %.3f", stats->aic_mean,
                      stats->aic_std);
        out += pad(buf, kCol);
        std::snprintf(buf, sizeof buf, "  %.3f +/- %.3f", stats->sic_mean,
                      stats->sic_std);
        out += pad(buf, kCol);
      } else {
        out += pad("  -", kCol);
        out += pad("  -", kCol);
      }
    }
    out += '\n';
  }
  return out;
}

}  // namespace cig
