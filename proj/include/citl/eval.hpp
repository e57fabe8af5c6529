#pragma once

// Metrics, the A→B task runner and the four-variant ablation harness.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "citl/citl.hpp"
#include "citl/csv.hpp"
#include "citl/data.hpp"
#include "citl/rscn.hpp"

namespace citl {

inline double rmse(std::span<const double> y, std::span<const double> yhat) {
  if (y.size() != yhat.size() || y.empty()) throw Error(ErrorCode::LengthMismatch, "rmse needs equal, non-empty inputs");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - yhat[i]) * (y[i] - yhat[i]);
  return std::sqrt(s / static_cast<double>(y.size()));
}

inline double r2(std::span<const double> y, std::span<const double> yhat) {
  if (y.size() != yhat.size() || y.size() < 2) throw Error(ErrorCode::LengthMismatch, "r2 needs equal inputs, N >= 2");
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    ss_res += (y[i] - yhat[i]) * (y[i] - yhat[i]);
    ss_tot += (y[i] - mean) * (y[i] - mean);
  }
  if (!(ss_tot > 0.0)) throw Error(ErrorCode::DegenerateTarget, "r2 undefined for constant targets");
  return 1.0 - ss_res / ss_tot;
}

enum class Variant { Baseline, StructuralRisk, WithoutManifold, Full };

inline const char* to_string(Variant v) {
  switch (v) {
    case Variant::Baseline: return "baseline";
    case Variant::StructuralRisk: return "structural_risk";
    case Variant::WithoutManifold: return "without_manifold";
    case Variant::Full: return "full";
  }
  return "?";
}

inline constexpr Variant kAllVariants[] = {Variant::Baseline, Variant::StructuralRisk, Variant::WithoutManifold,
                                           Variant::Full};

struct TaskConfig {
  std::string name = "A->B";
  GrowConfig source;
  TransferConfig target;
  SplitSpec split;
  double baseline_c = 1e6;  // ridge penalty of the label-only baseline
  bool record_timing = true;
};

inline TaskConfig default_task_config() {
  TaskConfig cfg;
  cfg.source.eps = 0.05;
  cfg.source.C = 1000.0;
  cfg.target.growth.eps = 0.02;
  return cfg;
}

/// Settings of the synthetic transfer benchmark. Features are 8-point curves:
/// with the fixed unit kernel width, graph weights vanish at d = 102.
struct Benchmark {
  TaskConfig task = default_task_config();
  SynthConfig synth;
};

inline Benchmark synthetic_benchmark() {
  Benchmark b;
  b.task.name = "synth";
  b.synth.d = 8;
  return b;
}

inline nlohmann::ordered_json to_json(const TaskConfig& cfg) {
  return {{"task", cfg.name},
          {"source", to_json(cfg.source)},
          {"target", to_json(cfg.target)},
          {"labeled", cfg.split.labeled_count},
          {"semisup", cfg.split.semisup_unlabeled_count},
          {"baseline_C", cfg.baseline_c}};
}

struct EvalReport {
  std::string task;
  std::uint64_t seed = 0;
  std::string variant;
  double rmse_pct = 0.0;
  double r2 = 0.0;
  double train_time_s = 0.0;
  double predict_time_ms = 0.0;
  std::size_t node_count = 0;
};

/// Seed for one consumer (`stream`) derived from a task seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return RngStream(seed).fork(stream).next_u64();
}

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace detail

/// Source model trained on all source cycles, carrying the normalization that
/// every domain of the task shares.
inline GrowResult train_source(const CycleMatrix& raw_source, const GrowConfig& cfg) {
  const NormStats stats = fit_norm(raw_source.x);
  GrowResult fit = grow_source(normalized(raw_source, stats), cfg);
  fit.model.norm = stats;
  return fit;
}

/// Fills accuracy and prediction timing for a trained model over every target
/// cycle.
inline EvalReport evaluate_model(const ShallowModel& model, const CycleMatrix& test_norm, bool record_timing) {
  EvalReport rep;
  Matrix yhat = predict(model, test_norm.x);
  if (record_timing) {
    std::vector<double> ms;
    for (int rep_i = 0; rep_i < 5; ++rep_i) {
      const auto t0 = detail::Clock::now();
      yhat = predict(model, test_norm.x);
      ms.push_back(1e3 * detail::seconds_since(t0));
    }
    std::sort(ms.begin(), ms.end());
    rep.predict_time_ms = ms[2];
  }
  const Vector pred = yhat.col(0);
  rep.rmse_pct = 100.0 * rmse(test_norm.soh, pred);
  rep.r2 = r2(test_norm.soh, pred);
  rep.node_count = model.nodes();
  return rep;
}

struct VariantRun {
  EvalReport report;
  ShallowModel model;
  GrowthLog log;
};

/// Trains and evaluates one variant against an already trained source model.
inline VariantRun run_variant(Variant variant, const ShallowModel& source, const CycleMatrix& raw_target,
                              const TaskConfig& cfg, std::uint64_t seed) {
  const CycleMatrix target = normalized(raw_target, source.norm);
  const TargetSplit split = split_protocol(target, cfg.split);
  TransferConfig tc = cfg.target;
  tc.growth.seed = derive_seed(seed, 2);

  VariantRun run;
  const auto t0 = detail::Clock::now();
  if (variant == Variant::Baseline) {
    GrowConfig g = tc.growth;
    g.C = cfg.baseline_c;
    GrowResult fit = grow_source(split.labeled, g);
    fit.model.norm = source.norm;
    run.model = std::move(fit.model);
    run.log = std::move(fit.log);
  } else {
    if (variant == Variant::StructuralRisk) tc.c_tu = 0.0;
    if (variant != Variant::Full) tc.eta = 0.0;
    GrowResult fit = grow_target(split.labeled, split.unlabeled, source, tc);
    run.model = std::move(fit.model);
    run.log = std::move(fit.log);
  }
  const double train_s = cfg.record_timing ? detail::seconds_since(t0) : 0.0;

  run.report = evaluate_model(run.model, split.test, cfg.record_timing);
  run.report.task = cfg.name;
  run.report.seed = seed;
  run.report.variant = to_string(variant);
  run.report.train_time_s = train_s;
  return run;
}

/// Source growth, target split and full transfer for one seed. Training time
/// covers the target model only; the source model is treated as given.
inline EvalReport run_task(const CycleMatrix& source_data, const CycleMatrix& target_data, const TaskConfig& cfg,
                           std::uint64_t seed) {
  GrowConfig sc = cfg.source;
  sc.seed = derive_seed(seed, 1);
  const GrowResult src = train_source(source_data, sc);
  return run_variant(Variant::Full, src.model, target_data, cfg, seed).report;
}

/// Four variants per seed, sharing one source model and one growth seed.
inline std::vector<EvalReport> run_ablation(const CycleMatrix& source_data, const CycleMatrix& target_data,
                                            const TaskConfig& cfg, const std::vector<std::uint64_t>& seeds) {
  std::vector<EvalReport> out;
  for (std::uint64_t seed : seeds) {
    GrowConfig sc = cfg.source;
    sc.seed = derive_seed(seed, 1);
    const GrowResult src = train_source(source_data, sc);
    for (Variant v : kAllVariants) out.push_back(run_variant(v, src.model, target_data, cfg, seed).report);
  }
  return out;
}

inline void write_report(std::ostream& out, const std::vector<EvalReport>& reports,
                         const nlohmann::ordered_json& config) {
  out << "# config " << config.dump() << '\n';
  out << "task,seed,variant,rmse_pct,r2,train_time_s,predict_time_ms,node_count\n";
  for (const auto& r : reports) {
    out << r.task << ',' << r.seed << ',' << r.variant << ',' << csv::format_double(r.rmse_pct) << ','
        << csv::format_double(r.r2) << ',' << csv::format_double(r.train_time_s) << ','
        << csv::format_double(r.predict_time_ms) << ',' << r.node_count << '\n';
  }
}

inline void write_report(const std::string& path, const std::vector<EvalReport>& reports,
                         const nlohmann::ordered_json& config) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  write_report(out, reports, config);
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path);
}

/// Fixed-width table for terminals.
inline void print_table(std::ostream& out, const std::vector<EvalReport>& reports) {
  char line[160];
  std::snprintf(line, sizeof line, "%-10s %6s %-17s %9s %8s %9s %10s %5s\n", "task", "seed", "variant", "RMSE(%)",
                "R2", "train(s)", "pred(ms)", "L");
  out << line;
  for (const auto& r : reports) {
    std::snprintf(line, sizeof line, "%-10s %6llu %-17s %9.4f %8.4f %9.4f %10.4f %5zu\n", r.task.c_str(),
                  static_cast<unsigned long long>(r.seed), r.variant.c_str(), r.rmse_pct, r.r2, r.train_time_s,
                  r.predict_time_ms, r.node_count);
    out << line;
  }
}

}  // namespace citl
