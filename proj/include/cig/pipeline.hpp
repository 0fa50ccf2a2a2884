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

#include <array>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "cig/data_io.hpp"
#include "cig/eval.hpp"
#include "cig/heatmap.hpp"
#include "cig/train.hpp"

namespace cig {

/// Everything a pipeline run needs, loadable from one JSON file with CLI
/// overrides on top. Every command is a pure function of (config, input
/// files), so reruns produce byte-identical outputs.
struct RunConfig {
  std::string dataset_dir = "data";
  std::string checkpoint;  // defaults to <output_dir>/model.ckpt
  std::string output_dir = "out";

  SyntheticConfig synth;
  std::array<double, 3> split_ratios = {0.4, 0.1, 0.5};

  std::vector<std::size_t> hidden = {512, 256, 128};
  std::size_t attention_dim = 64;
  TrainConfig train;

  std::vector<std::string> methods = {"gradient", "ig",  "eg",
                                      "idg",      "cig", "random"};
  std::size_t steps = 50;
  QuadratureRule rule = QuadratureRule::kTrapezoid;
  std::size_t eg_samples = 50;
  bool endpoint_derivative = false;

  std::size_t pool_slides = 30;
  std::size_t pool_per_slide = 0;  // 0: ceil(median bag size / pool_slides)

  std::vector<std::size_t> positive_classes = {1};
  BinsConfig bins;
  bool include_oracle = false;
  bool constant_random_scores = false;

  HeatmapSpec heatmap;
  bool emit_png = false;

  std::uint64_t seed = 11;
  std::size_t threads = 0;  // 0: hardware parallelism; CIG_THREADS overrides

  std::string checkpoint_path() const {
    return checkpoint.empty() ? output_dir + "/model.ckpt" : checkpoint;
  }
  /// Threads after applying the CIG_THREADS environment override.
  std::size_t effective_threads() const;
};

/// Parses and validates a config file; throws ConfigError naming the bad
/// field. Unknown keys are rejected.
RunConfig load_run_config(const std::string& path);
RunConfig parse_run_config(const std::string& json_text);

/// Throws ConfigError for names outside {trapezoid, left, right, midpoint}.
QuadratureRule quadrature_rule_from_name(const std::string& name);

EvalConfig eval_config_of(const RunConfig& config);

/// synth: generate the planted-signal dataset, split it by patient, and
/// write bags plus manifest under dataset_dir.
void cmd_synth(const RunConfig& config, std::ostream& log);

/// train: fit the bag classifier on the train split; writes the checkpoint
/// and a per-epoch history CSV.
void cmd_train(const RunConfig& config, std::ostream& log);

/// attribute: run every configured method over the positive eval slides;
/// writes ATTR1 + CSV per (method, slide) and a heatmap per slide. With
/// emit_steps, path methods also write one gradient heatmap per
/// interpolation step.
void cmd_attribute(const RunConfig& config, bool emit_steps, std::ostream& log);

/// eval: MIL-AIC / MIL-SIC curves for every configured method, per-slide
/// curve CSVs, pool provenance, a JSON summary, and the summary table.
void cmd_eval(const RunConfig& config, std::ostream& log);

/// render: one heatmap from a bag file plus an ATTR1 file.
void cmd_render(const std::string& bag_path, const std::string& attr_path,
                const std::string& out_path, const HeatmapSpec& spec,
                bool also_png, std::ostream& log);

/// axioms: the verification battery; prints one line per check and returns
/// the number of failures.
int cmd_axioms(std::uint64_t seed, std::ostream& log);

}  // namespace cig
