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

#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "ccomp/errors.hpp"
#include "ccomp/model_io.hpp"
#include "json.hpp"
#include "test_util.hpp"

namespace ccomp {
namespace {

using nlohmann::json;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

LayerRecord record(std::string name, Shape s, int h = 4, int w = 4) {
  LayerRecord rec;
  rec.name = std::move(name);
  rec.n = s.n;
  rec.c = s.c;
  rec.k = s.k;
  rec.h_out = h;
  rec.w_out = w;
  return rec;
}

template <typename Tag>
Tensor4<Tag> float_exact(Tensor4<Tag> t) {
  for (double& v : t.values()) v = static_cast<float>(v);
  return t;
}

NetworkBundle small_bundle(std::mt19937_64& rng) {
  NetworkBundle b;
  for (const auto& [name, s] : {std::pair{"a", Shape{4, 3, 3}}, std::pair{"b", Shape{5, 4, 1}}}) {
    b.layers.push_back(record(name, s));
    b.tensors[name] = {float_exact(testing::random_weight(s, rng)),
                       float_exact(testing::random_gradient(s, rng, 1e-3))};
  }
  b.metadata["origin"] = "unit test";
  return b;
}

void write_minimal_manifest(const fs::path& dir, std::size_t weight_bytes) {
  fs::create_directories(dir);
  std::ofstream(dir / "w.bin", std::ios::binary) << std::string(weight_bytes, '\0');
  std::ofstream(dir / "g.bin", std::ios::binary) << std::string(24, '\0');
  const json manifest{{"layers",
                       {{{"name", "only"},
                         {"n", 2},
                         {"c", 3},
                         {"k", 1},
                         {"stride", 1},
                         {"h_out", 5},
                         {"w_out", 5},
                         {"compressible", true},
                         {"weight_blob", "w.bin"},
                         {"gradient_blob", "g.bin"}}}},
                      {"metadata", json::object()}};
  std::ofstream(dir / "manifest.json") << manifest.dump(2);
}

TEST(LoadNetwork, MinimalManifest) {
  const fs::path dir = testing::scratch_dir("io_minimal");
  write_minimal_manifest(dir, 24);
  const NetworkBundle b = load_network(dir / "manifest.json");
  ASSERT_EQ(b.layers.size(), 1u);
  EXPECT_EQ(b.tensors_of("only").weight.shape(), (Shape{2, 3, 1}));
  EXPECT_EQ(b.tensors_of("only").gradient.shape(), (Shape{2, 3, 1}));
  EXPECT_EQ(b.total_flops(), 2 * 3 * 25);
}

TEST(LoadNetwork, TruncatedBlob) {
  const fs::path dir = testing::scratch_dir("io_truncated");
  write_minimal_manifest(dir, 20);
  try {
    load_network(dir / "manifest.json");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("bytes"), std::string::npos) << e.what();
  }
}

TEST(LoadNetwork, MissingFile) {
  EXPECT_THROW(load_network(testing::scratch_dir("io_missing") / "manifest.json"), DataError);
}

TEST(LoadNetwork, RejectsNonFinite) {
  std::mt19937_64 rng(1);
  NetworkBundle b = small_bundle(rng);
  b.tensors["b"].gradient.values()[3] = std::numeric_limits<double>::quiet_NaN();
  const fs::path dir = testing::scratch_dir("io_nan");
  const fs::path manifest = save_network(b, dir);
  EXPECT_THROW(load_network(manifest), DataError);
}

TEST(LoadNetwork, RejectsDuplicateNames) {
  const fs::path dir = testing::scratch_dir("io_dup");
  write_minimal_manifest(dir, 24);
  json m = json::parse(slurp(dir / "manifest.json"));
  m["layers"].push_back(m["layers"][0]);
  std::ofstream(dir / "manifest.json") << m.dump();
  EXPECT_THROW(load_network(dir / "manifest.json"), DataError);
}

TEST(LoadNetwork, RejectsBadDimensionsAndFields) {
  const fs::path dir = testing::scratch_dir("io_bad");
  write_minimal_manifest(dir, 24);
  json m = json::parse(slurp(dir / "manifest.json"));
  m["layers"][0]["h_out"] = 0;
  std::ofstream(dir / "manifest.json") << m.dump();
  EXPECT_THROW(load_network(dir / "manifest.json"), DataError);
  m["layers"][0].erase("h_out");
  std::ofstream(dir / "manifest.json") << m.dump();
  EXPECT_THROW(load_network(dir / "manifest.json"), DataError);
}

TEST(SaveNetwork, RoundTripIsBitwise) {
  std::mt19937_64 rng(2);
  const NetworkBundle b = small_bundle(rng);
  const fs::path first = save_network(b, testing::scratch_dir("io_rt1"));
  const NetworkBundle loaded = load_network(first);
  for (const auto& rec : b.layers) {
    EXPECT_EQ(loaded.tensors_of(rec.name).weight, b.tensors_of(rec.name).weight);
    EXPECT_EQ(loaded.tensors_of(rec.name).gradient, b.tensors_of(rec.name).gradient);
  }
  EXPECT_EQ(loaded.metadata.at("origin"), "unit test");
  const fs::path second = save_network(loaded, testing::scratch_dir("io_rt2"));
  for (const auto& rec : loaded.layers) {
    EXPECT_EQ(slurp(first.parent_path() / rec.weight_blob),
              slurp(second.parent_path() / rec.weight_blob));
  }
}

TEST(Blob, LittleEndianFloat32) {
  const fs::path dir = testing::scratch_dir("io_blob");
  const std::vector<double> values{1.0, -2.5};
  write_f32_blob(dir / "x.bin", values);
  const std::string bytes = slurp(dir / "x.bin");
  ASSERT_EQ(bytes.size(), 8u);
  // 1.0f = 0x3f800000, -2.5f = 0xc0200000
  EXPECT_EQ(static_cast<unsigned char>(bytes[3]), 0x3f);
  EXPECT_EQ(static_cast<unsigned char>(bytes[2]), 0x80);
  EXPECT_EQ(static_cast<unsigned char>(bytes[7]), 0xc0);
  EXPECT_EQ(static_cast<unsigned char>(bytes[6]), 0x20);
  EXPECT_EQ(read_f32_blob(dir / "x.bin", 2), values);
  EXPECT_THROW(read_f32_blob(dir / "x.bin", 3), DataError);
}

CompressedNetwork compressed_pair(std::mt19937_64& rng) {
  const Shape s{6, 4, 3};
  ApproxState pruned(float_exact(testing::random_weight(s, rng)));
  pruned.prune_channel(2);
  ApproxState decomposed(float_exact(testing::random_weight(s, rng)));
  decomposed.prune_channel(0);
  for (int j = 0; j < 4; ++j) decomposed.remove_singular_value(2);

  CompressedNetwork net;
  net.records = {record("p", s), record("d", s)};
  net.layers = {realize(pruned, "p"), realize(decomposed, "d")};
  net.target_rates = {0.25, 0.5};
  net.source_manifest = "src/manifest.json";
  return net;
}

TEST(SaveCompressed, ManifestContents) {
  std::mt19937_64 rng(3);
  const CompressedNetwork net = compressed_pair(rng);
  const fs::path dir = testing::scratch_dir("io_comp");
  save_compressed(net, dir / "manifest.json");
  const json m = json::parse(slurp(dir / "manifest.json"));
  EXPECT_EQ(m["layers"][0]["variant"], "pruned");
  EXPECT_EQ(m["layers"][0]["kept_channels"], json({0, 1, 3}));
  EXPECT_EQ(m["layers"][1]["variant"], "decomposed");
  EXPECT_EQ(m["layers"][1]["r_bar"], 2);
  ASSERT_EQ(m["layers"][1]["blobs"].size(), 2u);
  EXPECT_EQ(fs::file_size(dir / m["layers"][1]["blobs"][0].get<std::string>()), 2u * 3 * 9 * 4);
  EXPECT_EQ(fs::file_size(dir / m["layers"][1]["blobs"][1].get<std::string>()), 6u * 2 * 4);
}

TEST(SaveCompressed, RoundTrip) {
  std::mt19937_64 rng(4);
  CompressedNetwork net = compressed_pair(rng);
  // Factors computed in double; make them float-exact for a bitwise check.
  for (CompressedLayer& l : net.layers) {
    if (auto* p = std::get_if<PrunedOnly>(&l.factors)) p->weights = float_exact(p->weights);
    if (auto* d = std::get_if<Decomposed>(&l.factors)) {
      d->w1 = float_exact(d->w1);
      d->w2 = float_exact(d->w2);
    }
  }
  const fs::path dir = testing::scratch_dir("io_comp_rt");
  save_compressed(net, dir / "manifest.json");
  const CompressedNetwork back = load_compressed(dir / "manifest.json");
  ASSERT_EQ(back.layers.size(), 2u);
  EXPECT_EQ(back.source_manifest, net.source_manifest);
  EXPECT_EQ(back.target_rates, net.target_rates);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back.layers[i].kept_channels, net.layers[i].kept_channels);
    EXPECT_EQ(back.layers[i].expand(), net.layers[i].expand());
    EXPECT_EQ(back.layers[i].decomposed(), net.layers[i].decomposed());
  }
  const auto& d0 = std::get<Decomposed>(net.layers[1].factors);
  const auto& d1 = std::get<Decomposed>(back.layers[1].factors);
  EXPECT_EQ(d0.w1, d1.w1);
  EXPECT_EQ(d0.w2, d1.w2);
}

TEST(SaveCompressed, RejectsInconsistentLayer) {
  std::mt19937_64 rng(5);
  CompressedNetwork net = compressed_pair(rng);
  net.layers[0].kept_channels.pop_back();
  EXPECT_THROW(save_compressed(net, testing::scratch_dir("io_incons") / "manifest.json"),
               DataError);
}

TEST(SensitivityCsv, WritesAndParsesBack) {
  SensitivityCurve curve;
  curve.points = {{0.1, 0.001234567891234, Unit::channel(0)},
                  {0.2, 0.0456789012345678, Unit::singular_value(1)},
                  {1.0, 1.0, Unit::channel(1)}};
  curve.fit = {0.0123456789012, 4.56789012345, 0.987654321};
  const fs::path dir = testing::scratch_dir("io_csv");
  write_sensitivity_csv({{"conv_x", curve}}, dir);

  const std::string text = slurp(curve_csv_path(dir, "conv_x"));
  EXPECT_EQ(text.substr(0, 4), "R,I\n");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 4);

  const auto points = read_curve_csv(curve_csv_path(dir, "conv_x"));
  ASSERT_EQ(points.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(points[i].rate, curve.points[i].rate, 1e-9);
    EXPECT_NEAR(points[i].loss, curve.points[i].loss, 1e-9);
  }
  const auto rows = read_sensitivity_summary(summary_csv_path(dir));
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].layer, "conv_x");
  EXPECT_NEAR(rows[0].fit.a, curve.fit.a, 1e-9 * curve.fit.a);
  EXPECT_NEAR(rows[0].fit.b, curve.fit.b, 1e-9 * curve.fit.b);
  EXPECT_NEAR(rows[0].fit.r_squared, curve.fit.r_squared, 1e-9);
}

TEST(SensitivityCsv, EmptyInputIsAnError) {
  EXPECT_THROW(write_sensitivity_csv({}, testing::scratch_dir("io_csv_empty")), DataError);
}

TEST(Report, ZeroLayers) {
  const CompressionReport r = build_report(CompressedNetwork{});
  EXPECT_EQ(r.totals.flops_before, 0);
  EXPECT_EQ(r.totals.flops_after, 0);
  EXPECT_EQ(r.totals.params_before, 0);
  EXPECT_EQ(r.overall_rate_achieved, 0.0);
  const fs::path dir = testing::scratch_dir("io_report0");
  write_report(r, dir / "report.json");
  EXPECT_TRUE(fs::exists(dir / "report.txt"));
}

TEST(Report, HalfPrunedLayer) {
  std::mt19937_64 rng(6);
  const Shape s{3, 4, 1};
  ApproxState st(testing::random_weight(s, rng));
  st.prune_channel(0);
  st.prune_channel(3);
  CompressedNetwork net;
  net.records = {record("half", s)};
  net.layers = {realize(st, "half")};
  net.target_rates = {0.5};
  const CompressionReport r = build_report(net);
  EXPECT_DOUBLE_EQ(r.layers[0].r_achieved, 0.5);
  EXPECT_DOUBLE_EQ(r.overall_rate_achieved, 0.5);
  EXPECT_EQ(r.layers[0].fraction_removed_by_decomposition, 0.0);
  EXPECT_EQ(r.layers[0].fraction_removed_by_pruning, 1.0);
}

TEST(Report, TotalsAreSumsOfRows) {
  std::mt19937_64 rng(7);
  CompressedNetwork net = compressed_pair(rng);
  net.records.push_back(record("dense", Shape{2, 2, 3}, 7, 7));
  net.layers.push_back(passthrough(testing::random_weight(Shape{2, 2, 3}, rng), "dense"));
  net.target_rates.push_back(0.0);
  net.records.back().compressible = false;

  const fs::path dir = testing::scratch_dir("io_report");
  write_report(build_report(net), dir / "report.json");
  const json j = json::parse(slurp(dir / "report.json"));
  std::int64_t fb = 0, fa = 0, pb = 0, pa = 0, t1 = 0, t2 = 0;
  for (const json& row : j["layers"]) {
    fb += row["flops_before"].get<std::int64_t>();
    fa += row["flops_after"].get<std::int64_t>();
    pb += row["params_before"].get<std::int64_t>();
    pa += row["params_after"].get<std::int64_t>();
    t1 += row["t1"].get<std::int64_t>();
    t2 += row["t2"].get<std::int64_t>();
  }
  EXPECT_EQ(j["totals"]["flops_before"].get<std::int64_t>(), fb);
  EXPECT_EQ(j["totals"]["flops_after"].get<std::int64_t>(), fa);
  EXPECT_EQ(j["totals"]["params_before"].get<std::int64_t>(), pb);
  EXPECT_EQ(j["totals"]["params_after"].get<std::int64_t>(), pa);
  EXPECT_EQ(j["totals"]["t1"].get<std::int64_t>(), t1);
  EXPECT_EQ(j["totals"]["t2"].get<std::int64_t>(), t2);
  EXPECT_NEAR(j["overall_rate_achieved"].get<double>(), 1.0 - double(fa) / double(fb), 1e-15);
  EXPECT_EQ(j["layers"][2]["R_achieved"].get<double>(), 0.0);
  EXPECT_EQ(j["layers"][1]["fraction_removed_by_pruning"].get<double>(), 1.0 / 5.0);
}

TEST(Plan, RoundTrip) {
  PlanFile plan;
  plan.target_rate = 0.5;
  plan.sensitivity = 0.0123;
  plan.iterations = 7;
  plan.layers = {{"a", 0.01, 3.0, 0.9, 0.4, false, true}, {"b", 0.0, 0.0, 0.1, 0.5, false, false}};
  plan.warnings = {"b: poor fit"};
  const fs::path dir = testing::scratch_dir("io_plan");
  write_plan(plan, dir / "plan.json");
  const PlanFile back = read_plan(dir / "plan.json");
  ASSERT_EQ(back.layers.size(), 2u);
  EXPECT_EQ(back.layers[0].r_target, 0.4);
  EXPECT_FALSE(back.layers[1].joint);
  EXPECT_EQ(back.sensitivity, plan.sensitivity);
  EXPECT_EQ(back.warnings, plan.warnings);
}

}  // namespace
}  // namespace ccomp
