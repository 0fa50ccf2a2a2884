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

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "cig/errors.hpp"
#include "cig/pipeline.hpp"

namespace {

// Exit codes: 0 success, 1 failure, 2 config error.
constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kConfigError = 2;

struct CommonArgs {
  std::string config_path;
  std::string dataset_dir;
  std::string output_dir;
  std::string checkpoint;
  std::int64_t seed = -1;
  std::int64_t threads = -1;
  std::vector<std::string> methods;
  std::int64_t steps = -1;
  std::string quadrature;
  std::int64_t epochs = -1;
  double learning_rate = -1.0;
  std::vector<std::size_t> hidden;
};

void add_common(CLI::App* cmd, CommonArgs* args) {
  cmd->add_option("--config", args->config_path, "JSON run configuration");
  cmd->add_option("--dataset-dir", args->dataset_dir, "dataset directory");
  cmd->add_option("--output-dir", args->output_dir, "output directory");
  cmd->add_option("--checkpoint", args->checkpoint, "model checkpoint path");
  cmd->add_option("--seed", args->seed, "base seed");
  cmd->add_option("--threads", args->threads,
                  "worker threads (0 = hardware; CIG_THREADS overrides)");
  cmd->add_option("--methods", args->methods,
                  "attribution methods (gradient ig eg idg cig random)");
  cmd->add_option("--steps", args->steps, "interpolation steps");
  cmd->add_option("--quadrature", args->quadrature,
                  "trapezoid | left | right | midpoint");
  cmd->add_option("--epochs", args->epochs, "training epochs");
  cmd->add_option("--lr", args->learning_rate, "learning rate");
  cmd->add_option("--hidden", args->hidden, "hidden layer widths");
}

cig::RunConfig resolve_config(const CommonArgs& args) {
  cig::RunConfig config = args.config_path.empty()
                              ? cig::RunConfig{}
                              : cig::load_run_config(args.config_path);
  if (!args.dataset_dir.empty()) config.dataset_dir = args.dataset_dir;
  if (!args.output_dir.empty()) config.output_dir = args.output_dir;
  if (!args.checkpoint.empty()) config.checkpoint = args.checkpoint;
  if (args.seed >= 0) config.seed = static_cast<std::uint64_t>(args.seed);
  if (args.threads >= 0) config.threads = static_cast<std::size_t>(args.threads);
  if (!args.methods.empty()) {
    for (const std::string& m : args.methods) {
      (void)cig::method_from_config_name(m);  // ConfigError on bad names
    }
    config.methods = args.methods;
  }
  if (args.steps >= 0) {
    if (args.steps < 1) {
      throw cig::ConfigError("steps must be >= 1", "attribution.steps");
    }
    config.steps = static_cast<std::size_t>(args.steps);
  }
  if (!args.quadrature.empty()) {
    config.rule = cig::quadrature_rule_from_name(args.quadrature);
  }
  if (args.epochs >= 0) config.train.epochs = static_cast<std::uint32_t>(args.epochs);
  if (args.learning_rate > 0.0) config.train.learning_rate = args.learning_rate;
  if (!args.hidden.empty()) config.hidden = args.hidden;
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"contrastive path attribution for bag-of-patches classifiers"};
  app.require_subcommand(1);

  CommonArgs synth_args, train_args, attr_args, eval_args, axioms_args;
  bool emit_steps = false;

  CLI::App* synth = app.add_subcommand("synth", "generate synthetic dataset");
  add_common(synth, &synth_args);
  CLI::App* train = app.add_subcommand("train", "train the bag classifier");
  add_common(train, &train_args);
  CLI::App* attribute =
      app.add_subcommand("attribute", "compute attributions and heatmaps");
  add_common(attribute, &attr_args);
  attribute->add_flag("--emit-steps", emit_steps,
                      "write one gradient heatmap per interpolation step");
  CLI::App* eval = app.add_subcommand("eval", "MIL-AIC / MIL-SIC evaluation");
  add_common(eval, &eval_args);
  CLI::App* axioms = app.add_subcommand("axioms", "run the axiom battery");
  add_common(axioms, &axioms_args);

  std::string render_bag, render_attr, render_out, render_colormap = "grayscale";
  std::size_t render_cell = 8;
  bool render_png = false;
  CLI::App* render = app.add_subcommand("render", "render a saliency heatmap");
  render->add_option("--bag", render_bag, "FBAG1 bag file")->required();
  render->add_option("--attr", render_attr, "ATTR1 attribution file")->required();
  render->add_option("--out", render_out, "output PPM path")->required();
  render->add_option("--colormap", render_colormap, "grayscale | diverging");
  render->add_option("--cell-size", render_cell, "pixels per grid cell");
  render->add_flag("--png", render_png, "also write a PNG");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      cig::cmd_synth(resolve_config(synth_args), std::cout);
    } else if (train->parsed()) {
      cig::cmd_train(resolve_config(train_args), std::cout);
    } else if (attribute->parsed()) {
      cig::cmd_attribute(resolve_config(attr_args), emit_steps, std::cout);
    } else if (eval->parsed()) {
      cig::cmd_eval(resolve_config(eval_args), std::cout);
    } else if (axioms->parsed()) {
      const cig::RunConfig config = resolve_config(axioms_args);
      if (cig::cmd_axioms(config.seed, std::cout) != 0) return kFailure;
    } else if (render->parsed()) {
      cig::HeatmapSpec spec;
      if (render_colormap == "grayscale") {
        spec.colormap = cig::HeatmapSpec::Colormap::kGrayscale;
      } else if (render_colormap == "diverging") {
        spec.colormap = cig::HeatmapSpec::Colormap::kDiverging;
      } else {
        throw cig::ConfigError("unknown colormap: " + render_colormap,
                               "heatmap.colormap");
      }
      spec.cell_size = render_cell;
      cig::cmd_render(render_bag, render_attr, render_out, spec, render_png,
                      std::cout);
    }
  } catch (const cig::ConfigError& e) {
    std::cerr << "config error (" << e.field() << "): " << e.what() << "\n";
    return kConfigError;
  } catch (const cig::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kOk;
}
