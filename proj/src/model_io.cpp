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

#include "ccomp/model_io.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "ccomp/errors.hpp"
#include "json.hpp"

namespace ccomp {

using nlohmann::json;

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_for_write(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  auto out = open_for_write(path);
  out << text;
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("malformed JSON in '" + path.string() + "': " + e.what());
  }
}

template <typename T>
T field(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw DataError(where + ": missing field '" + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw DataError(where + ": field '" + key + "' has the wrong type");
  }
}

LayerRecord parse_record(const json& j, std::size_t index) {
  const std::string where = "layer #" + std::to_string(index);
  if (!j.is_object()) throw DataError(where + ": not an object");
  LayerRecord rec;
  rec.name = field<std::string>(j, "name", where);
  const std::string named = where + " ('" + rec.name + "')";
  rec.n = field<int>(j, "n", named);
  rec.c = field<int>(j, "c", named);
  rec.k = field<int>(j, "k", named);
  rec.stride = field<int>(j, "stride", named);
  rec.h_out = field<int>(j, "h_out", named);
  rec.w_out = field<int>(j, "w_out", named);
  rec.compressible = field<bool>(j, "compressible", named);
  rec.weight_blob = field<std::string>(j, "weight_blob", named);
  rec.gradient_blob = field<std::string>(j, "gradient_blob", named);
  rec.validate();
  return rec;
}

json record_json(const LayerRecord& rec) {
  return json{{"name", rec.name},
              {"n", rec.n},
              {"c", rec.c},
              {"k", rec.k},
              {"stride", rec.stride},
              {"h_out", rec.h_out},
              {"w_out", rec.w_out},
              {"compressible", rec.compressible},
              {"weight_blob", rec.weight_blob},
              {"gradient_blob", rec.gradient_blob}};
}

std::map<std::string, std::string> parse_metadata(const json& root) {
  std::map<std::string, std::string> out;
  auto it = root.find("metadata");
  if (it == root.end() || it->is_null()) return out;
  if (!it->is_object()) throw DataError("manifest metadata must be an object");
  for (const auto& [key, value] : it->items()) {
    out[key] = value.is_string() ? value.get<std::string>() : value.dump();
  }
  return out;
}

template <typename Tag>
Tensor4<Tag> load_tensor(const fs::path& path, const Shape& shape, const std::string& what) {
  std::vector<double> values = read_f32_blob(path, shape.size());
  for (double v : values) {
    if (!std::isfinite(v)) throw DataError(what + " blob '" + path.string() + "' contains NaN/Inf");
  }
  return Tensor4<Tag>(shape, std::move(values));
}

std::string blob_name(std::size_t index, const std::string& layer, const char* tag) {
  char prefix[16];
  std::snprintf(prefix, sizeof prefix, "%03zu_", index);
  return std::string("blobs/") + prefix + layer + "." + tag + ".bin";
}

}  // namespace

// --- blobs -----------------------------------------------------------------

std::vector<double> read_f32_blob(const fs::path& path, std::size_t expected_count) {
  std::error_code ec;
  const auto bytes = fs::file_size(path, ec);
  if (ec) throw DataError("cannot read blob '" + path.string() + "': " + ec.message());
  const std::size_t expected_bytes = expected_count * sizeof(float);
  if (bytes != expected_bytes) {
    throw DataError("blob '" + path.string() + "' has " + std::to_string(bytes) +
                    " bytes, expected " + std::to_string(expected_bytes));
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open blob '" + path.string() + "'");
  std::vector<unsigned char> raw(expected_bytes);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!in) throw DataError("short read on blob '" + path.string() + "'");

  std::vector<double> values(expected_count);
  for (std::size_t i = 0; i < expected_count; ++i) {
    const unsigned char* b = raw.data() + 4 * i;
    const std::uint32_t word = static_cast<std::uint32_t>(b[0]) |
                               (static_cast<std::uint32_t>(b[1]) << 8) |
                               (static_cast<std::uint32_t>(b[2]) << 16) |
                               (static_cast<std::uint32_t>(b[3]) << 24);
    values[i] = static_cast<double>(std::bit_cast<float>(word));
  }
  return values;
}

void write_f32_blob(const fs::path& path, std::span<const double> values) {
  std::vector<unsigned char> raw(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto word = std::bit_cast<std::uint32_t>(static_cast<float>(values[i]));
    raw[4 * i] = static_cast<unsigned char>(word & 0xffu);
    raw[4 * i + 1] = static_cast<unsigned char>((word >> 8) & 0xffu);
    raw[4 * i + 2] = static_cast<unsigned char>((word >> 16) & 0xffu);
    raw[4 * i + 3] = static_cast<unsigned char>((word >> 24) & 0xffu);
  }
  auto out = open_for_write(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw DataError("failed writing blob '" + path.string() + "'");
}

// --- network bundles -------------------------------------------------------

const LayerTensors& NetworkBundle::tensors_of(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw DataError("no tensors loaded for layer '" + name + "'");
  return it->second;
}

std::int64_t NetworkBundle::total_flops() const {
  std::int64_t total = 0;
  for (const auto& rec : layers) total += layer_flops(rec);
  return total;
}

NetworkBundle load_network(const fs::path& manifest_path) {
  const json root = read_json(manifest_path);
  if (!root.is_object() || !root.contains("layers") || !root["layers"].is_array()) {
    throw DataError("manifest '" + manifest_path.string() + "' lacks a 'layers' array");
  }
  const fs::path base = manifest_path.parent_path();
  NetworkBundle bundle;
  bundle.metadata = parse_metadata(root);
  std::set<std::string> names;
  const auto& layers = root["layers"];
  for (std::size_t i = 0; i < layers.size(); ++i) {
    LayerRecord rec = parse_record(layers[i], i);
    if (!names.insert(rec.name).second) throw DataError("duplicate layer name '" + rec.name + "'");
    const Shape shape = rec.shape();
    LayerTensors t{load_tensor<WeightTag>(base / rec.weight_blob, shape, "weight"),
                   load_tensor<GradientTag>(base / rec.gradient_blob, shape, "gradient")};
    bundle.tensors.emplace(rec.name, std::move(t));
    bundle.layers.push_back(std::move(rec));
  }
  return bundle;
}

fs::path save_network(const NetworkBundle& bundle, const fs::path& dir) {
  json layers = json::array();
  for (std::size_t i = 0; i < bundle.layers.size(); ++i) {
    LayerRecord rec = bundle.layers[i];
    rec.validate();
    const LayerTensors& t = bundle.tensors_of(rec.name);
    if (t.weight.shape() != rec.shape() || t.gradient.shape() != rec.shape()) {
      throw DataError("layer '" + rec.name + "': tensor shape disagrees with its record");
    }
    rec.weight_blob = blob_name(i, rec.name, "weight");
    rec.gradient_blob = blob_name(i, rec.name, "gradient");
    write_f32_blob(dir / rec.weight_blob, t.weight.values());
    write_f32_blob(dir / rec.gradient_blob, t.gradient.values());
    layers.push_back(record_json(rec));
  }
  json root{{"layers", layers}, {"metadata", bundle.metadata}};
  const fs::path manifest = dir / "manifest.json";
  write_text(manifest, root.dump(2) + "\n");
  return manifest;
}

// --- compressed networks ---------------------------------------------------

void save_compressed(const CompressedNetwork& network, const fs::path& manifest_path) {
  if (network.records.size() != network.layers.size() ||
      network.target_rates.size() != network.layers.size()) {
    throw DataError("compressed network: records, layers and targets differ in length");
  }
  const fs::path dir = manifest_path.parent_path();
  json layers = json::array();
  for (std::size_t i = 0; i < network.layers.size(); ++i) {
    const LayerRecord& rec = network.records[i];
    const CompressedLayer& layer = network.layers[i];
    layer.validate();
    if (layer.original != rec.shape()) {
      throw DataError("compressed layer '" + layer.source_layer + "' does not match record '" +
                      rec.name + "'");
    }
    json j = record_json(rec);
    j["variant"] = layer.decomposed() ? "decomposed" : "pruned";
    j["kept_channels"] = layer.kept_channels;
    j["r_bar"] = layer.rank();
    j["r_target"] = network.target_rates[i];
    json blobs = json::array();
    if (const auto* p = std::get_if<PrunedOnly>(&layer.factors)) {
      const std::string w = blob_name(i, rec.name, "w");
      write_f32_blob(dir / w, p->weights.values());
      blobs.push_back(w);
    } else {
      const auto& d = std::get<Decomposed>(layer.factors);
      const std::string w1 = blob_name(i, rec.name, "w1");
      const std::string w2 = blob_name(i, rec.name, "w2");
      write_f32_blob(dir / w1, d.w1.values());
      write_f32_blob(dir / w2, d.w2.values());
      blobs.push_back(w1);
      blobs.push_back(w2);
    }
    j["blobs"] = blobs;
    layers.push_back(std::move(j));
  }
  json root{{"layers", layers},
            {"metadata", network.metadata},
            {"source_manifest", network.source_manifest}};
  write_text(manifest_path, root.dump(2) + "\n");
}

CompressedNetwork load_compressed(const fs::path& manifest_path) {
  const json root = read_json(manifest_path);
  if (!root.is_object() || !root.contains("layers") || !root["layers"].is_array()) {
    throw DataError("compressed manifest '" + manifest_path.string() + "' lacks 'layers'");
  }
  const fs::path base = manifest_path.parent_path();
  CompressedNetwork net;
  net.metadata = parse_metadata(root);
  if (root.contains("source_manifest") && root["source_manifest"].is_string()) {
    net.source_manifest = root["source_manifest"].get<std::string>();
  }
  std::set<std::string> names;
  const auto& layers = root["layers"];
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const json& j = layers[i];
    LayerRecord rec = parse_record(j, i);
    if (!names.insert(rec.name).second) throw DataError("duplicate layer name '" + rec.name + "'");
    const std::string where = "compressed layer '" + rec.name + "'";
    const auto variant = field<std::string>(j, "variant", where);
    const auto kept = field<std::vector<int>>(j, "kept_channels", where);
    const auto r_bar = field<int>(j, "r_bar", where);
    const auto blobs = field<std::vector<std::string>>(j, "blobs", where);
    const double target = j.contains("r_target") ? field<double>(j, "r_target", where) : 0.0;
    const int nk = static_cast<int>(kept.size());
    const Shape s = rec.shape();

    CompressedLayer layer{rec.name, s, kept, PrunedOnly{}};
    if (variant == "pruned") {
      if (blobs.size() != 1) throw DataError(where + ": pruned variant needs exactly one blob");
      layer.factors = PrunedOnly{load_tensor<WeightTag>(base / blobs[0], Shape{s.n, nk, s.k}, where)};
    } else if (variant == "decomposed") {
      if (blobs.size() != 2) throw DataError(where + ": decomposed variant needs two blobs");
      if (r_bar < 1) throw DataError(where + ": r_bar must be >= 1");
      layer.factors =
          Decomposed{load_tensor<WeightTag>(base / blobs[0], Shape{r_bar, nk, s.k}, where),
                     load_tensor<WeightTag>(base / blobs[1], Shape{s.n, r_bar, 1}, where)};
    } else {
      throw DataError(where + ": unknown variant '" + variant + "'");
    }
    layer.validate();
    net.records.push_back(std::move(rec));
    net.layers.push_back(std::move(layer));
    net.target_rates.push_back(target);
  }
  return net;
}

// --- sensitivity CSV -------------------------------------------------------

fs::path curve_csv_path(const fs::path& dir, const std::string& layer) {
  return dir / ("curve_" + layer + ".csv");
}

fs::path summary_csv_path(const fs::path& dir) { return dir / "sensitivity_summary.csv"; }

void write_sensitivity_csv(const std::map<std::string, SensitivityCurve>& curves,
                           const fs::path& dir) {
  if (curves.empty()) throw DataError("no sensitivity curves to write");
  std::vector<SensitivitySummaryRow> rows;
  for (const auto& [layer, curve] : curves) {
    std::string text = "R,I\n";
    for (const auto& p : curve.points) {
      text += format_double(p.rate) + "," + format_double(p.loss) + "\n";
    }
    write_text(curve_csv_path(dir, layer), text);
    rows.push_back({layer, curve.fit});
  }
  write_sensitivity_summary(rows, summary_csv_path(dir));
}

void write_sensitivity_summary(std::span<const SensitivitySummaryRow> rows, const fs::path& path) {
  std::string summary = "layer,a,b,r_squared\n";
  for (const auto& row : rows) {
    summary += row.layer + "," + format_double(row.fit.a) + "," + format_double(row.fit.b) + "," +
               format_double(row.fit.r_squared) + "\n";
  }
  write_text(path, summary);
}

namespace {

std::vector<std::vector<std::string>> read_csv(const fs::path& path, const std::string& header) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != header) {
    throw DataError("'" + path.string() + "' does not start with header '" + header + "'");
  }
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

double parse_number(const std::string& s, const fs::path& path) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) {
    throw DataError("'" + path.string() + "': cannot parse number '" + s + "'");
  }
  return v;
}

}  // namespace

std::vector<SensitivitySummaryRow> read_sensitivity_summary(const fs::path& path) {
  std::vector<SensitivitySummaryRow> out;
  for (const auto& cells : read_csv(path, "layer,a,b,r_squared")) {
    if (cells.size() != 4) throw DataError("'" + path.string() + "': expected 4 columns");
    out.push_back({cells[0], ExponentialFit{parse_number(cells[1], path),
                                            parse_number(cells[2], path),
                                            parse_number(cells[3], path)}});
  }
  return out;
}

std::vector<CurvePoint> read_curve_csv(const fs::path& path) {
  std::vector<CurvePoint> out;
  for (const auto& cells : read_csv(path, "R,I")) {
    if (cells.size() != 2) throw DataError("'" + path.string() + "': expected 2 columns");
    CurvePoint p;
    p.rate = parse_number(cells[0], path);
    p.loss = parse_number(cells[1], path);
    out.push_back(p);
  }
  return out;
}

// --- reports ---------------------------------------------------------------

CompressionReport build_report(const CompressedNetwork& network) {
  CompressionReport report;
  ReportTotals& tot = report.totals;
  for (std::size_t i = 0; i < network.layers.size(); ++i) {
    const LayerRecord& rec = network.records.at(i);
    const CompressedLayer& layer = network.layers[i];
    LayerReport row;
    row.name = rec.name;
    row.compressible = rec.compressible;
    row.variant = layer.decomposed() ? "decomposed" : "pruned";
    row.params_before = dense_parameter_count(rec.shape());
    row.params_after = layer.parameter_count();
    row.flops_before = layer_flops(rec);
    row.flops_after = compressed_flops(layer, rec);
    row.r_target = network.target_rates.at(i);
    row.r_achieved = layer.compression_rate();
    row.t1 = layer.pruned_count();
    row.t2 = layer.removed_singular_values();
    const int removed = row.t1 + row.t2;
    if (removed > 0) {
      row.fraction_removed_by_pruning = static_cast<double>(row.t1) / removed;
      row.fraction_removed_by_decomposition = static_cast<double>(row.t2) / removed;
    }
    tot.flops_before += row.flops_before;
    tot.flops_after += row.flops_after;
    tot.params_before += row.params_before;
    tot.params_after += row.params_after;
    tot.t1 += row.t1;
    tot.t2 += row.t2;
    report.layers.push_back(std::move(row));
  }
  if (tot.t1 + tot.t2 > 0) {
    tot.fraction_removed_by_pruning = static_cast<double>(tot.t1) / static_cast<double>(tot.t1 + tot.t2);
    tot.fraction_removed_by_decomposition =
        static_cast<double>(tot.t2) / static_cast<double>(tot.t1 + tot.t2);
  }
  if (tot.flops_before > 0) {
    report.overall_rate_achieved =
        1.0 - static_cast<double>(tot.flops_after) / static_cast<double>(tot.flops_before);
  }
  if (tot.params_before > 0) {
    report.parameter_rate_achieved =
        1.0 - static_cast<double>(tot.params_after) / static_cast<double>(tot.params_before);
  }
  return report;
}

std::string format_report_table(const CompressionReport& report) {
  std::ostringstream os;
  os << std::left << std::setw(20) << "layer" << std::right << std::setw(11) << "variant"
     << std::setw(14) << "FLOPs" << std::setw(14) << "FLOPs'" << std::setw(11) << "params"
     << std::setw(11) << "params'" << std::setw(9) << "R*" << std::setw(9) << "R" << std::setw(6)
     << "t1" << std::setw(6) << "t2" << std::setw(8) << "prune" << std::setw(8) << "decomp"
     << "\n";
  os << std::fixed;
  auto line = [&](const std::string& name, const std::string& variant, std::int64_t fb,
                  std::int64_t fa, std::int64_t pb, std::int64_t pa, const std::string& target,
                  double achieved, std::int64_t t1, std::int64_t t2, double fp, double fd) {
    os << std::left << std::setw(20) << name << std::right << std::setw(11) << variant
       << std::setw(14) << fb << std::setw(14) << fa << std::setw(11) << pb << std::setw(11) << pa
       << std::setw(9) << target << std::setw(9) << std::setprecision(4) << achieved
       << std::setw(6) << t1 << std::setw(6) << t2 << std::setw(8) << std::setprecision(3) << fp
       << std::setw(8) << fd << "\n";
  };
  for (const auto& r : report.layers) {
    std::ostringstream target;
    target << std::fixed << std::setprecision(4) << r.r_target;
    line(r.name, r.compressible ? r.variant : "dense", r.flops_before, r.flops_after,
         r.params_before, r.params_after, target.str(), r.r_achieved, r.t1, r.t2,
         r.fraction_removed_by_pruning, r.fraction_removed_by_decomposition);
  }
  const auto& t = report.totals;
  line("TOTAL", "", t.flops_before, t.flops_after, t.params_before, t.params_after, "",
       report.overall_rate_achieved, t.t1, t.t2, t.fraction_removed_by_pruning,
       t.fraction_removed_by_decomposition);
  os << "FLOPs reduction " << std::setprecision(2) << 100.0 * report.overall_rate_achieved
     << "%, parameter reduction " << 100.0 * report.parameter_rate_achieved << "%\n";
  return os.str();
}

void write_report(const CompressionReport& report, const fs::path& path) {
  json layers = json::array();
  for (const auto& r : report.layers) {
    layers.push_back(json{{"name", r.name},
                          {"compressible", r.compressible},
                          {"variant", r.variant},
                          {"flops_before", r.flops_before},
                          {"flops_after", r.flops_after},
                          {"params_before", r.params_before},
                          {"params_after", r.params_after},
                          {"R_target", r.r_target},
                          {"R_achieved", r.r_achieved},
                          {"t1", r.t1},
                          {"t2", r.t2},
                          {"fraction_removed_by_pruning", r.fraction_removed_by_pruning},
                          {"fraction_removed_by_decomposition", r.fraction_removed_by_decomposition}});
  }
  const auto& t = report.totals;
  json totals{{"flops_before", t.flops_before},
              {"flops_after", t.flops_after},
              {"params_before", t.params_before},
              {"params_after", t.params_after},
              {"t1", t.t1},
              {"t2", t.t2},
              {"fraction_removed_by_pruning", t.fraction_removed_by_pruning},
              {"fraction_removed_by_decomposition", t.fraction_removed_by_decomposition}};
  json root{{"layers", layers},
            {"totals", totals},
            {"overall_rate_achieved", report.overall_rate_achieved},
            {"parameter_rate_achieved", report.parameter_rate_achieved}};
  write_text(path, root.dump(2) + "\n");
  fs::path table = path;
  table.replace_extension(".txt");
  write_text(table, format_report_table(report));
}

// --- plans -----------------------------------------------------------------

void write_plan(const PlanFile& plan, const fs::path& path) {
  json layers = json::array();
  for (const auto& e : plan.layers) {
    layers.push_back(json{{"name", e.name},
                          {"a", e.a},
                          {"b", e.b},
                          {"r_squared", e.r_squared},
                          {"R_target", e.r_target},
                          {"clamped", e.clamped},
                          {"joint", e.joint}});
  }
  json root{{"target_rate", plan.target_rate},
            {"sensitivity", plan.sensitivity},
            {"iterations", plan.iterations},
            {"achieved_flops", plan.achieved_flops},
            {"clamped_flops", plan.clamped_flops},
            {"target_flops", plan.target_flops},
            {"layers", layers},
            {"warnings", plan.warnings}};
  write_text(path, root.dump(2) + "\n");
}

PlanFile read_plan(const fs::path& path) {
  const json root = read_json(path);
  const std::string where = "plan '" + path.string() + "'";
  PlanFile plan;
  plan.target_rate = field<double>(root, "target_rate", where);
  plan.sensitivity = field<double>(root, "sensitivity", where);
  plan.iterations = field<long>(root, "iterations", where);
  plan.achieved_flops = field<double>(root, "achieved_flops", where);
  plan.clamped_flops = field<double>(root, "clamped_flops", where);
  plan.target_flops = field<double>(root, "target_flops", where);
  if (root.contains("warnings")) plan.warnings = field<std::vector<std::string>>(root, "warnings", where);
  const auto layers = field<json>(root, "layers", where);
  if (!layers.is_array()) throw DataError(where + ": 'layers' must be an array");
  for (const auto& j : layers) {
    PlanEntry e;
    e.name = field<std::string>(j, "name", where);
    e.a = field<double>(j, "a", where);
    e.b = field<double>(j, "b", where);
    e.r_squared = field<double>(j, "r_squared", where);
    e.r_target = field<double>(j, "R_target", where);
    e.clamped = field<bool>(j, "clamped", where);
    if (j.contains("joint")) e.joint = field<bool>(j, "joint", where);
    plan.layers.push_back(std::move(e));
  }
  return plan;
}

}  // namespace ccomp
