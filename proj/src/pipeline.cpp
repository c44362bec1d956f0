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

#include "ccomp/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <functional>
#include <iomanip>
#include <optional>
#include <ostream>
#include <random>
#include <thread>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "ccomp/errors.hpp"

namespace ccomp {

namespace {

std::shared_ptr<spdlog::logger> log() {
  static std::shared_ptr<spdlog::logger> logger = [] {
    auto l = spdlog::stderr_color_mt("ccomp");
    l->set_level(spdlog::level::warn);
    l->set_pattern("[%l] %v");
    return l;
  }();
  return logger;
}

int run_command(const char* name, const std::function<void()>& body) {
  try {
    body();
    return 0;
  } catch (const Error& e) {
    log()->error("{}: {}", name, e.what());
    return e.exit_code();
  } catch (const std::exception& e) {
    log()->error("{}: {}", name, e.what());
    return static_cast<int>(ErrorKind::kData);
  }
}

/// Runs fn(i) for i in [0, count) on up to `workers` threads. Exceptions are
/// captured per index so the caller can report the first failing item in
/// index order.
std::vector<std::exception_ptr> parallel_for(std::size_t count, int workers,
                                             const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t pool_size =
      std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), std::max<std::size_t>(count, 1));
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < pool_size; ++t) pool.emplace_back(worker);
    worker();
  }
  return errors;
}

std::string describe(const std::exception_ptr& e) {
  try {
    std::rethrow_exception(e);
  } catch (const std::exception& ex) {
    return ex.what();
  } catch (...) {
    return "unknown error";
  }
}

ErrorKind kind_of(const std::exception_ptr& e) {
  try {
    std::rethrow_exception(e);
  } catch (const Error& ex) {
    return ex.kind();
  } catch (...) {
    return ErrorKind::kData;
  }
}

}  // namespace

void PipelineConfig::validate() const {
  if (!(target_rate > 0.0 && target_rate < 1.0)) throw UsageError("--target-rate must lie in (0, 1)");
  if (!(gamma >= 0.0)) throw UsageError("--gamma must be >= 0");
  if (!(interval_fraction > 0.0 && interval_fraction <= 1.0)) {
    throw UsageError("--interval-frac must lie in (0, 1]");
  }
  if (eta < 0.0) throw UsageError("--eta must be >= 0");
  if (!(stop_threshold > 0.0)) throw UsageError("--stop-threshold must be > 0");
  if (!(r_max > 0.0 && r_max < 1.0)) throw UsageError("--r-max must lie in (0, 1)");
  if (workers < 1) throw UsageError("--workers must be >= 1");
}

PipelinePaths pipeline_paths(const fs::path& out_dir) {
  return PipelinePaths{out_dir / "sensitivity", summary_csv_path(out_dir / "sensitivity"),
                       out_dir / "plan.json", out_dir / "compressed" / "manifest.json",
                       out_dir / "report.json"};
}

void configure_logging_from_env() {
  const char* level = std::getenv("CC_LOG");
  if (level == nullptr || *level == '\0') return;
  log()->set_level(spdlog::level::from_str(level));
}

// --- demo network ------------------------------------------------------------

namespace {

Vector random_unit(int size, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(size);
  for (int i = 0; i < size; ++i) v(i) = normal(rng);
  return v.normalized();
}

// Decaying spectrum plus per-channel scales, so both kinds of unit carry
// uneven amounts of information.
WeightTensor structured_weight(const Shape& s, std::mt19937_64& rng) {
  const int r = s.full_rank();
  Matrix m = Matrix::Zero(s.rows(), s.cols());
  for (int j = 0; j < r; ++j) {
    const double sigma = std::exp(-4.0 * j / r);
    m.noalias() += sigma * random_unit(s.rows(), rng) * random_unit(s.cols(), rng).transpose();
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  const int kk = s.kernel_area();
  for (int i = 0; i < s.c; ++i) {
    m.middleCols(static_cast<Eigen::Index>(i) * kk, kk) *= std::exp(0.5 * normal(rng));
  }
  return dematricize(m, s);
}

GradientTensor random_gradient(const Shape& s, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1e-3);
  GradientTensor g(s);
  for (double& v : g.values()) v = normal(rng);
  return g;
}

// Round-trip through float32 so the in-memory bundle equals what loads back.
template <typename Tag>
Tensor4<Tag> as_float32(Tensor4<Tag> t) {
  for (double& v : t.values()) v = static_cast<double>(static_cast<float>(v));
  return t;
}

}  // namespace

NetworkBundle make_demo_network(std::uint64_t seed) {
  struct DemoLayer {
    const char* name;
    int n, c, k, stride, h_out, w_out;
    bool compressible;
  };
  static constexpr DemoLayer kLayers[] = {
      {"conv1", 16, 3, 3, 1, 32, 32, false},
      {"conv2", 32, 16, 3, 1, 16, 16, true},
      {"conv3", 48, 32, 3, 1, 16, 16, true},
      {"conv4", 64, 48, 3, 1, 8, 8, true},
  };
  std::mt19937_64 rng(seed);
  NetworkBundle bundle;
  for (const DemoLayer& spec : kLayers) {
    LayerRecord rec{spec.name, spec.n, spec.c, spec.k, spec.stride, spec.h_out, spec.w_out,
                    spec.compressible, "", ""};
    const Shape s = rec.shape();
    LayerTensors t{as_float32(structured_weight(s, rng)), as_float32(random_gradient(s, rng))};
    bundle.tensors.emplace(rec.name, std::move(t));
    bundle.layers.push_back(std::move(rec));
  }
  bundle.metadata["generator"] = "ccomp demo-gen";
  bundle.metadata["seed"] = std::to_string(seed);
  return bundle;
}

int cmd_demo_gen(const PipelineConfig& config, std::ostream& out) {
  return run_command("demo-gen", [&] {
    const fs::path manifest = save_network(make_demo_network(config.seed), config.out_dir);
    out << "wrote " << manifest.string() << "\n";
  });
}

// --- sensitivity -------------------------------------------------------------

int cmd_sensitivity(const PipelineConfig& config, std::ostream& out) {
  return run_command("sensitivity", [&] {
    config.validate();
    const NetworkBundle bundle = load_network(config.manifest);
    if (bundle.layers.empty()) throw DataError("network has no layers");
    std::vector<const LayerRecord*> targets;
    for (const auto& rec : bundle.layers) {
      if (rec.compressible) targets.push_back(&rec);
    }
    const PipelinePaths paths = pipeline_paths(config.out_dir);

    std::vector<std::optional<SensitivityCurve>> curves(targets.size());
    const auto errors = parallel_for(targets.size(), config.workers, [&](std::size_t i) {
      const LayerTensors& t = bundle.tensors_of(targets[i]->name);
      curves[i] = analyze_layer(t.weight, t.gradient);
      log()->info("sensitivity {}: {} points", targets[i]->name, curves[i]->points.size());
    });

    std::map<std::string, SensitivityCurve> done;
    bool failed = false;
    out << std::left << std::setw(20) << "layer" << std::right << std::setw(16) << "a"
        << std::setw(16) << "b" << std::setw(14) << "R^2" << "\n";
    for (std::size_t i = 0; i < targets.size(); ++i) {
      if (errors[i]) {
        failed = true;
        log()->error("sensitivity {}: {}", targets[i]->name, describe(errors[i]));
        out << std::left << std::setw(20) << targets[i]->name << "  FAILED: " << describe(errors[i])
            << "\n";
        continue;
      }
      const ExponentialFit& f = curves[i]->fit;
      out << std::left << std::setw(20) << targets[i]->name << std::right << std::setprecision(6)
          << std::setw(16) << f.a << std::setw(16) << f.b << std::setw(14) << f.r_squared << "\n";
      done.emplace(targets[i]->name, std::move(*curves[i]));
    }
    if (done.empty()) {
      if (!targets.empty()) throw NumericalError("no compressible layer could be analyzed");
      log()->warn("network has no compressible layers; writing an empty summary");
      write_sensitivity_summary({}, paths.summary);
    } else {
      write_sensitivity_csv(done, paths.sensitivity_dir);
    }
    out << "wrote " << paths.summary.string() << "\n";
    if (failed) throw NumericalError("sensitivity analysis failed for at least one layer");
  });
}

// --- plan ------------------------------------------------------------------

int cmd_plan(const PipelineConfig& config, std::ostream& out) {
  return run_command("plan", [&] {
    config.validate();
    const NetworkBundle bundle = load_network(config.manifest);
    if (bundle.layers.empty()) throw DataError("network has no layers");
    const PipelinePaths paths = pipeline_paths(config.out_dir);
    if (!fs::exists(paths.summary)) {
      throw DataError("sensitivity summary '" + paths.summary.string() +
                      "' not found; run the sensitivity stage first");
    }
    std::map<std::string, ExponentialFit> fits;
    for (const auto& row : read_sensitivity_summary(paths.summary)) fits[row.layer] = row.fit;

    const double total_flops = static_cast<double>(bundle.total_flops());
    PlanFile plan;
    plan.target_rate = config.target_rate;
    plan.target_flops = config.target_rate * total_flops;

    std::vector<ExponentialModel> models;
    std::vector<double> flops;
    std::vector<std::size_t> joint_index;
    double excluded_flops = 0.0;
    for (const auto& rec : bundle.layers) {
      if (!rec.compressible) continue;
      auto it = fits.find(rec.name);
      if (it == fits.end()) {
        throw DataError("no sensitivity fit for compressible layer '" + rec.name + "'");
      }
      const ExponentialFit& f = it->second;
      PlanEntry e{rec.name, f.a, f.b, f.r_squared, 0.0, false, true};
      const bool usable = std::isfinite(f.a) && std::isfinite(f.b) && f.a > 0.0 && f.b > 0.0 &&
                          f.r_squared >= config.min_r_squared;
      const double layer_flops_value = static_cast<double>(layer_flops(rec));
      if (!usable) {
        e.joint = false;
        e.r_target = std::clamp(config.target_rate, 0.0, config.r_max);
        e.clamped = e.r_target != config.target_rate;
        excluded_flops += layer_flops_value;
        const std::string msg = "layer '" + rec.name + "' (b=" + std::to_string(f.b) +
                                ", R^2=" + std::to_string(f.r_squared) +
                                ") excluded from the joint solve; assigned the global rate";
        log()->warn("{}", msg);
        plan.warnings.push_back(msg);
        plan.achieved_flops += layer_flops_value * config.target_rate;
        plan.clamped_flops += layer_flops_value * e.r_target;
      } else {
        models.push_back({f.a, f.b});
        flops.push_back(layer_flops_value);
        joint_index.push_back(plan.layers.size());
      }
      plan.layers.push_back(std::move(e));
    }

    if (!models.empty()) {
      PlannerConfig pc;
      pc.initial_sensitivity = config.initial_sensitivity;
      pc.eta = config.eta;
      pc.stop_threshold = config.stop_threshold;
      pc.r_max = config.r_max;
      RatePlan rp;
      try {
        // Excluded layers already remove C times their FLOPs.
        rp = plan_rates(models, flops, total_flops - excluded_flops, config.target_rate, pc);
      } catch (const PlannerError& e) {
        out << "planner failed after " << e.last_state().iterations
            << " iterations; last sensitivity " << e.last_state().sensitivity << "\n";
        throw;
      }
      plan.sensitivity = rp.sensitivity;
      plan.iterations = rp.iterations;
      plan.achieved_flops += rp.achieved_flops;
      plan.clamped_flops += rp.clamped_flops;
      for (std::size_t j = 0; j < joint_index.size(); ++j) {
        PlanEntry& e = plan.layers[joint_index[j]];
        e.r_target = rp.rates[j];
        e.clamped = rp.clamped[j];
      }
    }
    write_plan(plan, paths.plan);

    out << std::left << std::setw(20) << "layer" << std::right << std::setw(12) << "R_target"
        << std::setw(10) << "clamped" << std::setw(8) << "joint" << "\n";
    for (const auto& e : plan.layers) {
      out << std::left << std::setw(20) << e.name << std::right << std::fixed
          << std::setprecision(6) << std::setw(12) << e.r_target << std::setw(10)
          << (e.clamped ? "yes" : "no") << std::setw(8) << (e.joint ? "yes" : "no") << "\n";
    }
    out << std::defaultfloat << std::setprecision(10) << "sum F*R = " << plan.achieved_flops
        << " (clamped " << plan.clamped_flops << "), C*F = " << plan.target_flops << "\n";
    out << "wrote " << paths.plan.string() << "\n";
  });
}

// --- compress --------------------------------------------------------------

int cmd_compress(const PipelineConfig& config, std::ostream& out) {
  return run_command("compress", [&] {
    config.validate();
    const NetworkBundle bundle = load_network(config.manifest);
    const PipelinePaths paths = pipeline_paths(config.out_dir);
    if (!fs::exists(paths.plan)) {
      throw DataError("plan '" + paths.plan.string() + "' not found; run the plan stage first");
    }
    const PlanFile plan = read_plan(paths.plan);
    std::map<std::string, double> targets;
    for (const auto& e : plan.layers) targets[e.name] = e.r_target;

    const std::size_t count = bundle.layers.size();
    CompressedNetwork net;
    net.records = bundle.layers;
    net.metadata = bundle.metadata;
    net.source_manifest = config.manifest.string();
    net.target_rates.assign(count, 0.0);
    std::vector<std::optional<CompressedLayer>> layers(count);

    for (std::size_t i = 0; i < count; ++i) {
      const LayerRecord& rec = bundle.layers[i];
      if (!rec.compressible) continue;
      auto it = targets.find(rec.name);
      if (it == targets.end()) throw DataError("plan has no entry for layer '" + rec.name + "'");
      net.target_rates[i] = it->second;
    }

    const auto errors = parallel_for(count, config.workers, [&](std::size_t i) {
      const LayerRecord& rec = bundle.layers[i];
      const LayerTensors& t = bundle.tensors_of(rec.name);
      const double target = net.target_rates[i];
      if (!rec.compressible || target <= 0.0) {
        layers[i] = passthrough(t.weight, rec.name);
        return;
      }
      HeuristicConfig hc;
      hc.gamma = config.gamma;
      hc.interval_fraction = config.interval_fraction;
      hc.target_rate = target;
      hc.use_fast_metric = config.use_fast_metric;
      hc.selection = config.selection;
      LayerCompression result = compress_layer(t.weight, t.gradient, hc, rec.name);
      log()->info("compress {}: R={:.4f} (target {:.4f}) t1={} t2={}{}", rec.name,
                  result.achieved_rate, target, result.pruned_channels,
                  result.removed_singular_values, result.pruning_fallback ? " [pruning only]" : "");
      layers[i] = std::move(result.layer);
    });
    for (std::size_t i = 0; i < count; ++i) {
      if (errors[i]) {
        throw Error(kind_of(errors[i]),
                    "layer '" + bundle.layers[i].name + "': " + describe(errors[i]));
      }
      net.layers.push_back(std::move(*layers[i]));
    }

    save_compressed(net, paths.compressed_manifest);
    const CompressionReport report = build_report(net);
    write_report(report, paths.report);
    out << format_report_table(report);
    out << "wrote " << paths.compressed_manifest.string() << "\n";
  });
}

// --- report ----------------------------------------------------------------

int cmd_report(const PipelineConfig& config, std::ostream& out) {
  return run_command("report", [&] {
    const PipelinePaths paths = pipeline_paths(config.out_dir);
    if (!fs::exists(paths.compressed_manifest)) {
      throw DataError("compressed manifest '" + paths.compressed_manifest.string() +
                      "' not found; run the compress stage first");
    }
    const CompressionReport report = build_report(load_compressed(paths.compressed_manifest));
    write_report(report, paths.report);
    out << format_report_table(report);
    out << "wrote " << paths.report.string() << "\n";
  });
}

}  // namespace ccomp
