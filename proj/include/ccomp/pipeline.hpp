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

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "ccomp/heuristic.hpp"
#include "ccomp/model_io.hpp"
#include "ccomp/planner.hpp"

namespace ccomp {

/// Settings shared by every pipeline stage. Stages communicate only through
/// files under out_dir:
///
///   sensitivity/curve_<layer>.csv, sensitivity/sensitivity_summary.csv
///   plan.json
///   compressed/manifest.json, compressed/blobs/*
///   report.json, report.txt
struct PipelineConfig {
  fs::path manifest;
  fs::path out_dir = "out";
  double target_rate = 0.5;
  double gamma = 0.5;
  double interval_fraction = 0.01;
  double eta = 0.0;
  double stop_threshold = 1e4;
  double r_max = 0.95;
  double initial_sensitivity = 0.1;
  /// Fits below this R^2 are left out of the joint rate solve.
  double min_r_squared = 0.5;
  UnitSelection selection = UnitSelection::kJoint;
  bool use_fast_metric = true;
  std::uint64_t seed = 0;
  int workers = 1;

  /// Throws UsageError on out-of-range values.
  void validate() const;
};

struct PipelinePaths {
  fs::path sensitivity_dir;
  fs::path summary;
  fs::path plan;
  fs::path compressed_manifest;
  fs::path report;
};

PipelinePaths pipeline_paths(const fs::path& out_dir);

// Each command returns a process exit code: 0 success, 1 usage error,
// 2 data error, 3 numerical failure. Human-readable progress goes to `out`,
// diagnostics to the log.
int cmd_demo_gen(const PipelineConfig& config, std::ostream& out);
int cmd_sensitivity(const PipelineConfig& config, std::ostream& out);
int cmd_plan(const PipelineConfig& config, std::ostream& out);
int cmd_compress(const PipelineConfig& config, std::ostream& out);
int cmd_report(const PipelineConfig& config, std::ostream& out);

/// Synthetic four-layer network with structured random weights and random
/// gradients, deterministic in `seed`. The first layer is marked
/// non-compressible.
NetworkBundle make_demo_network(std::uint64_t seed);

/// Applies CC_LOG (error|warn|info|debug|trace|off) to the library logger.
void configure_logging_from_env();

}  // namespace ccomp
