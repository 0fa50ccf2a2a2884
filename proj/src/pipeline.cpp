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

#include "cig/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

#include "cig/attribution.hpp"
#include "cig/axioms.hpp"
#include "cig/errors.hpp"
#include "cig/rng.hpp"
#include "binio.hpp"
#include "parallel.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace cig {
namespace {

const std::set<std::string> kKnownMethods = {"gradient", "ig",  "eg",
                                             "idg",      "cig", "random"};

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string rule_name(QuadratureRule rule) {
  switch (rule) {
    case QuadratureRule::kTrapezoid: return "trapezoid";
    case QuadratureRule::kLeft: return "left";
    case QuadratureRule::kRight: return "right";
    case QuadratureRule::kMidpoint: return "midpoint";
  }
  return "trapezoid";
}

void reject_unknown_keys(const json& j, const std::set<std::string>& known,
                         const std::string& scope) {
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!known.count(key)) {
      throw ConfigError("unknown config key: " + scope + key, scope + key);
    }
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback, const std::string& scope) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("invalid value for " + scope + key, scope + key);
  }
}

/// Positive eval-split slides, in manifest order; the slide set that both
/// `attribute` and `eval` operate on.
std::vector<const FeatureBag*> eligible_slides(const Dataset& dataset,
                                               const RunConfig& config) {
  std::vector<const FeatureBag*> out;
  for (const SlideRecord& rec : dataset.manifest.slides) {
    if (rec.split != "test") continue;
    if (std::find(config.positive_classes.begin(),
                  config.positive_classes.end(),
                  static_cast<std::size_t>(rec.label)) ==
        config.positive_classes.end()) {
      continue;
    }
    out.push_back(&dataset.bag(rec.id));
  }
  return out;
}

std::map<std::size_t, ReferencePool> build_pools(
    const Dataset& dataset, const RunConfig& config,
    const std::vector<const FeatureBag*>& eligible) {
  std::map<std::size_t, ReferencePool> pools;
  const std::vector<const FeatureBag*> pool_bags = dataset.split_bags("train");
  for (const FeatureBag* bag : eligible) {
    const std::size_t cls = bag->label;
    if (pools.count(cls)) continue;
    std::vector<const FeatureBag*> opposite;
    for (const FeatureBag* candidate : pool_bags) {
      if (candidate->label != cls) opposite.push_back(candidate);
    }
    if (opposite.empty()) {
      throw EvalError("no opposite-class slides for class " +
                      std::to_string(cls));
    }
    const std::size_t per_slide =
        config.pool_per_slide > 0
            ? config.pool_per_slide
            : default_per_slide(opposite, config.pool_slides);
    pools.emplace(cls,
                  build_reference_pool(opposite, cls, config.pool_slides,
                                       per_slide,
                                       derive_seed(config.seed, "pool", cls)));
  }
  return pools;
}

}  // namespace

QuadratureRule quadrature_rule_from_name(const std::string& name) {
  if (name == "trapezoid") return QuadratureRule::kTrapezoid;
  if (name == "left") return QuadratureRule::kLeft;
  if (name == "right") return QuadratureRule::kRight;
  if (name == "midpoint") return QuadratureRule::kMidpoint;
  throw ConfigError("unknown quadrature rule: " + name,
                    "attribution.quadrature");
}

std::size_t RunConfig::effective_threads() const {
  if (const char* env = std::getenv("CIG_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<std::size_t>(v);
  }
  return threads;
}

RunConfig parse_run_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what(),
                      "<root>");
  }
  reject_unknown_keys(
      j,
      {"dataset_dir", "checkpoint", "output_dir", "seed", "threads", "synth",
       "model", "train", "attribution", "pool", "eval", "heatmap"},
      "");

  RunConfig c;
  c.dataset_dir = get_or<std::string>(j, "dataset_dir", c.dataset_dir, "");
  c.checkpoint = get_or<std::string>(j, "checkpoint", c.checkpoint, "");
  c.output_dir = get_or<std::string>(j, "output_dir", c.output_dir, "");
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed, "");
  c.threads = get_or<std::size_t>(j, "threads", c.threads, "");

  if (j.contains("synth")) {
    const json& s = j.at("synth");
    reject_unknown_keys(s,
                        {"slides_per_class", "patches_min", "patches_max",
                         "feature_dim", "background_sigma", "shift_magnitude",
                         "tumor_frac_min", "tumor_frac_max", "split_ratios"},
                        "synth.");
    c.synth.slides_per_class = get_or<std::size_t>(
        s, "slides_per_class", c.synth.slides_per_class, "synth.");
    c.synth.patches_min =
        get_or<std::size_t>(s, "patches_min", c.synth.patches_min, "synth.");
    c.synth.patches_max =
        get_or<std::size_t>(s, "patches_max", c.synth.patches_max, "synth.");
    c.synth.feature_dim =
        get_or<std::size_t>(s, "feature_dim", c.synth.feature_dim, "synth.");
    c.synth.background_sigma = get_or<double>(
        s, "background_sigma", c.synth.background_sigma, "synth.");
    c.synth.shift_magnitude = get_or<double>(
        s, "shift_magnitude", c.synth.shift_magnitude, "synth.");
    c.synth.tumor_frac_min =
        get_or<double>(s, "tumor_frac_min", c.synth.tumor_frac_min, "synth.");
    c.synth.tumor_frac_max =
        get_or<double>(s, "tumor_frac_max", c.synth.tumor_frac_max, "synth.");
    if (s.contains("split_ratios")) {
      const auto ratios =
          get_or<std::vector<double>>(s, "split_ratios", {}, "synth.");
      if (ratios.size() != 3) {
        throw ConfigError("split_ratios needs exactly 3 entries",
                          "synth.split_ratios");
      }
      c.split_ratios = {ratios[0], ratios[1], ratios[2]};
    }
  }
  if (j.contains("model")) {
    const json& m = j.at("model");
    reject_unknown_keys(m, {"hidden", "attention_dim"}, "model.");
    c.hidden = get_or<std::vector<std::size_t>>(m, "hidden", c.hidden, "model.");
    if (c.hidden.empty()) {
      throw ConfigError("hidden layer list is empty", "model.hidden");
    }
    c.attention_dim =
        get_or<std::size_t>(m, "attention_dim", c.attention_dim, "model.");
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    reject_unknown_keys(t,
                        {"epochs", "learning_rate", "batch_size", "optimizer",
                         "dropout", "shuffle"},
                        "train.");
    c.train.epochs =
        get_or<std::uint32_t>(t, "epochs", c.train.epochs, "train.");
    c.train.learning_rate =
        get_or<double>(t, "learning_rate", c.train.learning_rate, "train.");
    if (!(c.train.learning_rate > 0.0)) {
      throw ConfigError("learning_rate must be > 0", "train.learning_rate");
    }
    c.train.batch_size =
        get_or<std::uint32_t>(t, "batch_size", c.train.batch_size, "train.");
    c.train.dropout = get_or<double>(t, "dropout", c.train.dropout, "train.");
    c.train.shuffle = get_or<bool>(t, "shuffle", c.train.shuffle, "train.");
    const std::string opt =
        get_or<std::string>(t, "optimizer", "adam", "train.");
    if (opt == "adam") {
      c.train.optimizer = Optimizer::kAdam;
    } else if (opt == "sgd") {
      c.train.optimizer = Optimizer::kSgd;
    } else {
      throw ConfigError("unknown optimizer: " + opt, "train.optimizer");
    }
  }
  if (j.contains("attribution")) {
    const json& a = j.at("attribution");
    reject_unknown_keys(a,
                        {"methods", "steps", "quadrature", "eg_samples",
                         "endpoint_derivative"},
                        "attribution.");
    c.methods = get_or<std::vector<std::string>>(a, "methods", c.methods,
                                                 "attribution.");
    c.steps = get_or<std::size_t>(a, "steps", c.steps, "attribution.");
    if (c.steps < 1) throw ConfigError("steps must be >= 1", "attribution.steps");
    c.rule = quadrature_rule_from_name(
        get_or<std::string>(a, "quadrature", rule_name(c.rule), "attribution."));
    c.eg_samples =
        get_or<std::size_t>(a, "eg_samples", c.eg_samples, "attribution.");
    c.endpoint_derivative = get_or<bool>(a, "endpoint_derivative",
                                         c.endpoint_derivative, "attribution.");
  }
  if (j.contains("pool")) {
    const json& p = j.at("pool");
    reject_unknown_keys(p, {"n_slides", "per_slide"}, "pool.");
    c.pool_slides = get_or<std::size_t>(p, "n_slides", c.pool_slides, "pool.");
    c.pool_per_slide =
        get_or<std::size_t>(p, "per_slide", c.pool_per_slide, "pool.");
  }
  if (j.contains("eval")) {
    const json& e = j.at("eval");
    reject_unknown_keys(e,
                        {"positive_classes", "topk", "threshold_percents",
                         "include_oracle", "constant_random_scores"},
                        "eval.");
    c.positive_classes = get_or<std::vector<std::size_t>>(
        e, "positive_classes", c.positive_classes, "eval.");
    c.bins.topk =
        get_or<std::vector<std::size_t>>(e, "topk", c.bins.topk, "eval.");
    c.bins.threshold_percents = get_or<std::vector<std::uint32_t>>(
        e, "threshold_percents", c.bins.threshold_percents, "eval.");
    c.include_oracle =
        get_or<bool>(e, "include_oracle", c.include_oracle, "eval.");
    c.constant_random_scores = get_or<bool>(
        e, "constant_random_scores", c.constant_random_scores, "eval.");
  }
  if (j.contains("heatmap")) {
    const json& h = j.at("heatmap");
    reject_unknown_keys(h, {"colormap", "cell_size", "png"}, "heatmap.");
    const std::string colormap =
        get_or<std::string>(h, "colormap", "grayscale", "heatmap.");
    if (colormap == "grayscale") {
      c.heatmap.colormap = HeatmapSpec::Colormap::kGrayscale;
    } else if (colormap == "diverging") {
      c.heatmap.colormap = HeatmapSpec::Colormap::kDiverging;
    } else {
      throw ConfigError("unknown colormap: " + colormap, "heatmap.colormap");
    }
    c.heatmap.cell_size =
        get_or<std::size_t>(h, "cell_size", c.heatmap.cell_size, "heatmap.");
    if (c.heatmap.cell_size < 1) {
      throw ConfigError("cell_size must be >= 1", "heatmap.cell_size");
    }
    c.emit_png = get_or<bool>(h, "png", c.emit_png, "heatmap.");
  }

  for (const std::string& m : c.methods) {
    if (!kKnownMethods.count(m)) {
      throw ConfigError("unknown method name: " + m, "attribution.methods");
    }
  }
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return parse_run_config(text);
}

EvalConfig eval_config_of(const RunConfig& config) {
  EvalConfig e;
  e.eval_split = "test";
  e.pool_split = "train";
  e.positive_classes = config.positive_classes;
  e.steps = config.steps;
  e.rule = config.rule;
  e.eg_samples = config.eg_samples;
  e.pool_slides = config.pool_slides;
  e.pool_per_slide = config.pool_per_slide;
  e.endpoint_derivative = config.endpoint_derivative;
  e.constant_random_scores = config.constant_random_scores;
  e.bins = config.bins;
  e.seed = config.seed;
  e.threads = config.effective_threads();
  return e;
}

void cmd_synth(const RunConfig& config, std::ostream& log) {
  SyntheticDataset dataset = generate_synthetic(config.synth);
  split_patients(dataset.manifest, config.split_ratios, config.seed);
  write_dataset(dataset, config.dataset_dir);
  log << "wrote " << dataset.bags.size() << " bags to " << config.dataset_dir
      << "\n";
}

void cmd_train(const RunConfig& config, std::ostream& log) {
  const Dataset dataset = load_dataset(config.dataset_dir + "/manifest.json");
  const std::vector<const FeatureBag*> train_bags =
      dataset.split_bags("train");
  if (train_bags.empty()) throw DatasetError("train split is empty");

  MilModelConfig model_config;
  model_config.input_dim = train_bags.front()->feature_dim();
  model_config.hidden = config.hidden;
  model_config.attention_dim = config.attention_dim;
  model_config.n_classes = dataset.manifest.class_names.size();

  TrainConfig train_config = config.train;
  train_config.seed = derive_seed(config.seed, "train");

  const TrainResult result = train(train_bags, model_config, train_config);

  CheckpointMeta meta;
  meta.seed = train_config.seed;
  meta.epochs = train_config.epochs;
  if (!result.history.empty()) {
    meta.final_loss = result.history.back().loss;
    meta.final_accuracy = result.history.back().accuracy;
  }
  save_checkpoint(result.model, meta, config.checkpoint_path());

  std::string history = "epoch,loss,accuracy\n";
  for (std::size_t e = 0; e < result.history.size(); ++e) {
    history += std::to_string(e) + ',' + fmt17(result.history[e].loss) + ',' +
               fmt17(result.history[e].accuracy) + '\n';
  }
  detail::atomic_write_text(config.output_dir + "/history.csv", history);

  const std::vector<const FeatureBag*> val_bags = dataset.split_bags("val");
  log << "trained " << train_config.epochs << " epochs on "
      << train_bags.size() << " bags";
  if (!result.history.empty()) {
    log << "; final loss " << result.history.back().loss << ", train acc "
        << result.history.back().accuracy;
  }
  if (!val_bags.empty()) {
    log << ", val acc " << evaluate_accuracy(result.model, val_bags);
  }
  log << "\n";
}

void cmd_attribute(const RunConfig& config, bool emit_steps,
                   std::ostream& log) {
  const Dataset dataset = load_dataset(config.dataset_dir + "/manifest.json");
  const MilModel model = load_checkpoint(config.checkpoint_path()).first;
  const std::vector<const FeatureBag*> eligible =
      eligible_slides(dataset, config);
  if (eligible.empty()) throw EvalError("attribute: no eligible slides");
  const std::map<std::size_t, ReferencePool> pools =
      build_pools(dataset, config, eligible);

  struct SlideOutput {
    std::string slide_id;
    std::vector<AttributionResult> results;  // one per method
    std::vector<std::vector<Tensor>> step_maps;  // per method, per node
  };
  std::vector<SlideOutput> outputs(eligible.size());

  detail::parallel_for(
      eligible.size(), config.effective_threads(), [&](std::size_t idx) {
        const FeatureBag& bag = *eligible[idx];
        const std::size_t n = bag.n_patches();
        const ReferencePool& pool = pools.at(bag.label);
        const std::uint64_t slide_seed = derive_seed(config.seed, bag.slide_id);
        const DifferentiableFn fn = model.logit_fn(n);
        const std::size_t target_class = model.predict(bag.features).cls;

        PathSpec path;
        path.input = bag.features;
        path.reference =
            sample_baseline(pool, n, derive_seed(slide_seed, "baseline"));
        path.steps = config.steps;
        path.rule = config.rule;
        const std::string baseline_ref =
            "pool:" + std::to_string(pool.seed) + "/slide:" + bag.slide_id;

        SlideOutput& out = outputs[idx];
        out.slide_id = bag.slide_id;
        for (const std::string& name : config.methods) {
          AttributionResult result;
          const Method method = method_from_config_name(name);
          switch (method) {
            case Method::kVanillaGradient:
              result = vanilla_gradient(fn, bag.features, target_class);
              break;
            case Method::kIntegratedGradients:
              result =
                  integrated_gradients(fn, path, target_class, baseline_ref);
              break;
            case Method::kExpectedGradients:
              result = expected_gradients(fn, bag.features, pool,
                                          config.eg_samples, target_class,
                                          derive_seed(slide_seed, "eg"));
              break;
            case Method::kIntegratedDecisionGradients:
              result = integrated_decision_gradients(fn, path, target_class,
                                                     baseline_ref);
              break;
            case Method::kContrastiveIntegratedGradients: {
              CigOptions options;
              options.endpoint_derivative = config.endpoint_derivative;
              options.baseline_ref = baseline_ref;
              result = contrastive_integrated_gradients(fn, path, options);
              break;
            }
            case Method::kRandom: {
              result.method = "random";
              result.attributions = Tensor::zeros({n, bag.feature_dim()});
              result.saliency = random_saliency(
                  n, derive_seed(slide_seed, "random"),
                  config.constant_random_scores);
              break;
            }
            case Method::kOracle:
              break;  // not a config method
          }
          std::vector<Tensor> steps;
          if (emit_steps &&
              (method == Method::kContrastiveIntegratedGradients ||
               method == Method::kIntegratedGradients)) {
            // Per-node gradient snapshots, aggregated like the saliency.
            const Tensor ref_logits = fn.evaluate(path.reference);
            const ScalarSelector selector =
                method == Method::kContrastiveIntegratedGradients
                    ? ScalarSelector::squared_norm_diff(ref_logits)
                    : ScalarSelector::output_index(target_class);
            for (const auto& [alpha, weight] :
                 quadrature_nodes(path.rule, path.steps)) {
              (void)weight;
              const Tensor point =
                  straight_line(path.input, path.reference, alpha);
              steps.push_back(patch_saliency(fn.gradient(point, selector)));
            }
          }
          out.results.push_back(std::move(result));
          out.step_maps.push_back(std::move(steps));
        }
      });

  // Single-writer pass, slide order fixed by the manifest.
  const fs::path base = fs::path(config.output_dir) / "attr";
  for (std::size_t idx = 0; idx < outputs.size(); ++idx) {
    const SlideOutput& out = outputs[idx];
    const FeatureBag& bag = *eligible[idx];
    for (std::size_t m = 0; m < out.results.size(); ++m) {
      const AttributionResult& result = out.results[m];
      const fs::path dir = base / result.method;
      fs::create_directories(dir);
      write_attribution(result, (dir / (out.slide_id + ".attr")).string());
      write_attribution_csv(result, bag.coords,
                            (dir / (out.slide_id + ".csv")).string());
      const Image image =
          render_heatmap(bag.coords, result.saliency, config.heatmap);
      write_ppm(image, (dir / (out.slide_id + ".ppm")).string());
      if (config.emit_png) {
        write_png(image, (dir / (out.slide_id + ".png")).string());
      }
      for (std::size_t s = 0; s < out.step_maps[m].size(); ++s) {
        char name[64];
        std::snprintf(name, sizeof name, "%s_step%03zu.ppm",
                      out.slide_id.c_str(), s);
        const fs::path steps_dir = dir / "steps";
        fs::create_directories(steps_dir);
        write_ppm(render_heatmap(bag.coords, out.step_maps[m][s],
                                 config.heatmap),
                  (steps_dir / name).string());
      }
    }
  }
  log << "attributed " << eligible.size() << " slides x " << config.methods.size()
      << " methods under " << base.string() << "\n";
}

void cmd_eval(const RunConfig& config, std::ostream& log) {
  const Dataset dataset = load_dataset(config.dataset_dir + "/manifest.json");
  const MilModel model = load_checkpoint(config.checkpoint_path()).first;
  const EvalConfig eval_config = eval_config_of(config);

  std::vector<Method> methods;
  for (const std::string& name : config.methods) {
    methods.push_back(method_from_config_name(name));
  }
  if (config.include_oracle) methods.push_back(Method::kOracle);

  std::vector<MethodEvaluation> evaluations;
  for (const Method method : methods) {
    evaluations.push_back(evaluate_method(dataset, model, method, eval_config));
  }

  const fs::path base = fs::path(config.output_dir) / "eval";
  fs::create_directories(base);

  // Per-slide curves.
  for (const MethodEvaluation& evaluation : evaluations) {
    const fs::path dir = base / "curves" / method_name(evaluation.method);
    fs::create_directories(dir);
    for (const SlideEval& slide : evaluation.slides) {
      for (const EvalCurve* curve : {&slide.aic, &slide.sic}) {
        const char* suffix =
            curve->kind == CurveKind::kMilAic ? ".aic.csv" : ".sic.csv";
        write_curve_csv(*curve, (dir / (slide.slide_id + suffix)).string());
      }
    }
  }

  // Pool provenance (pools are identical across methods by construction).
  const std::vector<const FeatureBag*> eligible =
      eligible_slides(dataset, config);
  const std::map<std::size_t, ReferencePool> pools =
      build_pools(dataset, config, eligible);
  for (const auto& [cls, pool] : pools) {
    write_pool_provenance_csv(
        pool,
        (base / ("pool_class" + std::to_string(cls) + ".csv")).string());
  }

  // JSON summary: full-precision stats the table is derived from.
  json summary;
  summary["seed"] = config.seed;
  summary["steps"] = config.steps;
  summary["quadrature"] = rule_name(config.rule);
  summary["eval_split"] = "test";
  summary["pool_split"] = "train";
  summary["pool_slides"] = config.pool_slides;
  summary["class_names"] = dataset.manifest.class_names;
  json per_method = json::object();
  for (const MethodEvaluation& evaluation : evaluations) {
    json stats = json::object();
    for (const ClassStats& s : evaluation.per_class) {
      json row;
      row["n_slides"] = s.n_slides;
      row["aic_mean"] = s.aic_mean;
      row["aic_std"] = s.aic_std;
      row["sic_mean"] = s.sic_mean;
      row["sic_std"] = s.sic_std;
      stats[std::to_string(s.cls)] = std::move(row);
    }
    per_method[method_name(evaluation.method)] = std::move(stats);
  }
  summary["methods"] = std::move(per_method);
  detail::atomic_write_text((base / "summary.json").string(),
                            summary.dump(2) + "\n");

  const std::string table =
      render_table(evaluations, dataset.manifest.class_names);
  detail::atomic_write_text((base / "table.txt").string(), table);
  log << table;
}

void cmd_render(const std::string& bag_path, const std::string& attr_path,
                const std::string& out_path, const HeatmapSpec& spec,
                bool also_png, std::ostream& log) {
  const FeatureBag bag = read_bag(bag_path);
  const AttributionResult result = read_attribution(attr_path);
  const Image image = render_heatmap(bag.coords, result.saliency, spec);
  write_ppm(image, out_path);
  if (also_png) {
    fs::path png = out_path;
    png.replace_extension(".png");
    write_png(image, png.string());
  }
  log << "rendered " << image.width << "x" << image.height << " heatmap to "
      << out_path << "\n";
}

int cmd_axioms(std::uint64_t seed, std::ostream& log) {
  AxiomOptions options;
  options.seed = seed;
  const std::vector<AxiomCheck> checks = run_axiom_battery(options);
  int failures = 0;
  for (const AxiomCheck& check : checks) {
    log << (check.passed ? "[PASS] " : "[FAIL] ") << check.name << " - "
        << check.detail << "\n";
    if (!check.passed) ++failures;
  }
  log << (failures == 0 ? "all checks passed\n"
                        : std::to_string(failures) + " check(s) failed\n");
  return failures;
}

}  // namespace cig
