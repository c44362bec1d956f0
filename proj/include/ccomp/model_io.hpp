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
#include <map>
#include <string>
#include <vector>

#include "ccomp/compression.hpp"
#include "ccomp/sensitivity.hpp"

namespace ccomp {

namespace fs = std::filesystem;

struct LayerTensors {
  WeightTensor weight;
  GradientTensor gradient;
};

/// A network in interchange form: ordered layer records, their tensors,
/// and free-form metadata.
struct NetworkBundle {
  std::vector<LayerRecord> layers;
  std::map<std::string, LayerTensors> tensors;
  std::map<std::string, std::string> metadata;

  const LayerTensors& tensors_of(const std::string& name) const;
  std::int64_t total_flops() const;
};

// Raw blobs: float32, little endian, row major.
std::vector<double> read_f32_blob(const fs::path& path, std::size_t expected_count);
void write_f32_blob(const fs::path& path, std::span<const double> values);

/// Loads a manifest and every blob it references. Blob paths are relative
/// to the manifest's directory. Rejects missing files, byte-length or shape
/// mismatches, duplicate names and non-finite values with DataError.
NetworkBundle load_network(const fs::path& manifest_path);

/// Writes manifest.json plus one blob per tensor under `dir`. Blob paths in
/// the layer records are replaced by the ones actually written.
fs::path save_network(const NetworkBundle& bundle, const fs::path& dir);

/// Output of the compression stage, one entry per layer of the source
/// network (non-compressible layers are carried as identity realizations).
struct CompressedNetwork {
  std::vector<LayerRecord> records;
  std::vector<CompressedLayer> layers;
  std::vector<double> target_rates;
  std::map<std::string, std::string> metadata;
  std::string source_manifest;
};

/// Writes the compressed manifest to `manifest_path` and factor blobs to a
/// blobs/ directory beside it.
void save_compressed(const CompressedNetwork& network, const fs::path& manifest_path);
CompressedNetwork load_compressed(const fs::path& manifest_path);

struct SensitivitySummaryRow {
  std::string layer;
  ExponentialFit fit;
};

/// Writes curve_<layer>.csv (header "R,I") per layer and
/// sensitivity_summary.csv (layer,a,b,r_squared) into `dir`.
void write_sensitivity_csv(const std::map<std::string, SensitivityCurve>& curves,
                           const fs::path& dir);

/// Writes only the summary file (header plus one row per layer).
void write_sensitivity_summary(std::span<const SensitivitySummaryRow> rows, const fs::path& path);
std::vector<SensitivitySummaryRow> read_sensitivity_summary(const fs::path& path);
/// Parses a per-layer curve file back into (rate, loss) points.
std::vector<CurvePoint> read_curve_csv(const fs::path& path);

fs::path curve_csv_path(const fs::path& dir, const std::string& layer);
fs::path summary_csv_path(const fs::path& dir);

struct LayerReport {
  std::string name;
  bool compressible = false;
  std::string variant;
  std::int64_t flops_before = 0;
  std::int64_t flops_after = 0;
  std::int64_t params_before = 0;
  std::int64_t params_after = 0;
  double r_target = 0.0;
  double r_achieved = 0.0;
  int t1 = 0;
  int t2 = 0;
  double fraction_removed_by_pruning = 0.0;
  double fraction_removed_by_decomposition = 0.0;
};

struct ReportTotals {
  std::int64_t flops_before = 0;
  std::int64_t flops_after = 0;
  std::int64_t params_before = 0;
  std::int64_t params_after = 0;
  std::int64_t t1 = 0;
  std::int64_t t2 = 0;
  double fraction_removed_by_pruning = 0.0;
  double fraction_removed_by_decomposition = 0.0;
};

struct CompressionReport {
  std::vector<LayerReport> layers;
  ReportTotals totals;
  /// 1 - FLOPs after / FLOPs before over the whole network.
  double overall_rate_achieved = 0.0;
  double parameter_rate_achieved = 0.0;
};

CompressionReport build_report(const CompressedNetwork& network);

/// Writes the report as JSON to `path` and as a text table to `path` with
/// extension ".txt".
void write_report(const CompressionReport& report, const fs::path& path);
std::string format_report_table(const CompressionReport& report);

/// One row of a serialized rate plan.
struct PlanEntry {
  std::string name;
  double a = 0.0;
  double b = 0.0;
  double r_squared = 0.0;
  double r_target = 0.0;
  bool clamped = false;
  /// False when the layer was assigned the global rate instead of taking
  /// part in the joint solve.
  bool joint = true;
};

struct PlanFile {
  double target_rate = 0.0;
  double sensitivity = 0.0;
  long iterations = 0;
  double achieved_flops = 0.0;
  double clamped_flops = 0.0;
  double target_flops = 0.0;
  std::vector<PlanEntry> layers;
  std::vector<std::string> warnings;
};

void write_plan(const PlanFile& plan, const fs::path& path);
PlanFile read_plan(const fs::path& path);

}  // namespace ccomp
