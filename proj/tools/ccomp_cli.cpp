// Copyright 2026 The ccomp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// ccomp: joint channel pruning + low-rank decomposition of conv layers.
//
//   ccomp demo-gen    --out DIR [--seed N]
//   ccomp sensitivity --manifest M --out DIR
//   ccomp plan        --manifest M --out DIR --target-rate C
//   ccomp compress    --manifest M --out DIR [--pruning-only | --decompose-only]
//   ccomp report      --out DIR
//   ccomp run         (sensitivity, plan, compress in sequence)

#include <algorithm>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "ccomp/pipeline.hpp"

int main(int argc, char** argv) {
  ccomp::configure_logging_from_env();

  ccomp::PipelineConfig cfg;
  cfg.workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  std::string manifest;
  std::string out_dir = cfg.out_dir.string();
  bool pruning_only = false;
  bool decompose_only = false;
  bool bruteforce = false;

  CLI::App app{"Collaborative channel pruning and SVD compression of convolution layers"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--manifest", manifest, "Network manifest (JSON)");
  app.add_option("--out", out_dir, "Output directory shared by all stages");
  app.add_option("--target-rate", cfg.target_rate, "Network-wide FLOPs reduction C in (0,1)");
  app.add_option("--gamma", cfg.gamma, "Weight of the look-ahead term in the importance metric");
  app.add_option("--interval-frac", cfg.interval_fraction,
                 "Units removed per scoring round, as a fraction of c + r");
  app.add_option("--eta", cfg.eta, "Planner step size (0 = curvature-scaled)");
  app.add_option("--stop-threshold", cfg.stop_threshold, "Planner stop: squared FLOPs error");
  app.add_option("--r-max", cfg.r_max, "Upper clamp for per-layer rates");
  app.add_option("--min-r2", cfg.min_r_squared, "Fits below this R^2 get the global rate");
  app.add_option("--workers", cfg.workers, "Layers processed in parallel");
  app.add_option("--seed", cfg.seed, "Seed for demo-gen");
  auto* po = app.add_flag("--pruning-only", pruning_only, "Remove input channels only");
  auto* dco = app.add_flag("--decompose-only", decompose_only, "Remove singular values only");
  po->excludes(dco);
  app.add_flag("--bruteforce-metric", bruteforce, "Score units by explicit look-ahead");

  auto* demo = app.add_subcommand("demo-gen", "Write a synthetic 4-layer network");
  auto* sens = app.add_subcommand("sensitivity", "Learn and fit per-layer sensitivity curves");
  auto* plan = app.add_subcommand("plan", "Allocate per-layer compression rates");
  auto* comp = app.add_subcommand("compress", "Compress every layer to its planned rate");
  auto* rep = app.add_subcommand("report", "Summarize a compressed network");
  auto* run = app.add_subcommand("run", "sensitivity + plan + compress");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  cfg.manifest = manifest;
  cfg.out_dir = out_dir;
  cfg.use_fast_metric = !bruteforce;
  if (pruning_only) cfg.selection = ccomp::UnitSelection::kPruningOnly;
  if (decompose_only) cfg.selection = ccomp::UnitSelection::kDecompositionOnly;

  const bool needs_manifest = !demo->parsed() && !rep->parsed();
  if (needs_manifest && manifest.empty()) {
    std::cerr << "--manifest is required\n";
    return 1;
  }

  if (demo->parsed()) return ccomp::cmd_demo_gen(cfg, std::cout);
  if (sens->parsed()) return ccomp::cmd_sensitivity(cfg, std::cout);
  if (plan->parsed()) return ccomp::cmd_plan(cfg, std::cout);
  if (comp->parsed()) return ccomp::cmd_compress(cfg, std::cout);
  if (rep->parsed()) return ccomp::cmd_report(cfg, std::cout);
  if (run->parsed()) {
    for (auto* stage : {ccomp::cmd_sensitivity, ccomp::cmd_plan, ccomp::cmd_compress}) {
      if (const int code = stage(cfg, std::cout); code != 0) return code;
    }
    return 0;
  }
  return 1;
}
