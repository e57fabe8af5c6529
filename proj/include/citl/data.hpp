#pragma once

// Cycle data: raw discharge traces, fixed-length feature matrices, SOH labels,
// the target-domain split, z-score normalization and the synthetic task
// generator. CSV readers/writers for the canonical and raw formats live in
// csv.hpp.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "citl/numcore.hpp"

namespace citl {

/// Default feature dimension of a resampled discharge curve.
inline constexpr std::size_t kDefaultFeatureDim = 102;

struct RawCycleTrace {
  int cycle_id = 0;
  std::vector<double> time_s;
  std::vector<double> voltage_v;
  double discharge_capacity_ah = 0.0;
};

/// Features (one row per cycle) with SOH labels, rows ordered by cycle id.
struct CycleMatrix {
  Matrix x;
  Vector soh;
  std::vector<int> cycle_ids;

  std::size_t size() const noexcept { return x.rows(); }
  std::size_t dim() const noexcept { return x.cols(); }
};

/// Target cycles whose labels are withheld from training. There is no label
/// field, so nothing that accepts this type can read SOH.
struct UnlabeledBlock {
  Matrix x;
  std::vector<int> cycle_ids;

  std::size_t size() const noexcept { return x.rows(); }
};

struct NormStats {
  Vector mean;
  Vector std;
};

struct SplitSpec {
  std::size_t labeled_count = 20;
  std::size_t semisup_unlabeled_count = 20;
};

struct TargetSplit {
  CycleMatrix labeled;
  UnlabeledBlock unlabeled;
  CycleMatrix test;  // every target cycle, for evaluation only
};

// Voltage model of the synthetic generator:
//   v(τ) = (a0 + shift·a1) − (b0 + shift·b1)·τ − c·(1 − soh)·τ² + N(0, noise_sd)
// SOH noise has standard deviation kSynthSohNoiseRatio·noise_sd.
inline constexpr double kSynthA0 = 4.2;
inline constexpr double kSynthA1 = 0.0;
inline constexpr double kSynthB0 = 0.9;
inline constexpr double kSynthB1 = 0.05;
inline constexpr double kSynthC = 2.0;
inline constexpr double kSynthSohNoiseRatio = 0.2;

struct SynthConfig {
  std::size_t n_cycles = 100;
  std::size_t d = kDefaultFeatureDim;
  double shift = 0.5;
  double noise_sd = 0.005;
  double fade_rate = 0.2;
  double fade_exponent = 1.0;
  std::uint64_t seed = 1;
};

struct SynthTask {
  CycleMatrix source;
  CycleMatrix target;
};

inline void validate(const RawCycleTrace& trace) {
  if (trace.time_s.size() < 2 || trace.voltage_v.size() != trace.time_s.size()) {
    throw Error(ErrorCode::TooFewSamples,
                "cycle " + std::to_string(trace.cycle_id) + " needs at least two (time, voltage) samples");
  }
  for (std::size_t i = 0; i < trace.time_s.size(); ++i) {
    if (i > 0 && !(trace.time_s[i] > trace.time_s[i - 1])) {
      throw Error(ErrorCode::DegenerateInput,
                  "cycle " + std::to_string(trace.cycle_id) + " time is not strictly increasing");
    }
    if (!std::isfinite(trace.voltage_v[i]) || !(trace.voltage_v[i] > 0.0)) {
      throw Error(ErrorCode::DegenerateInput,
                  "cycle " + std::to_string(trace.cycle_id) + " has a non-positive voltage");
    }
  }
  if (!(trace.discharge_capacity_ah > 0.0)) {
    throw Error(ErrorCode::NonPositiveCapacity, "cycle " + std::to_string(trace.cycle_id));
  }
}

/// Linear interpolation of voltage onto `d` equispaced points of normalized
/// time τ ∈ [0, 1], both endpoints included.
inline Vector resample_cycle(const RawCycleTrace& trace, std::size_t d) {
  if (trace.time_s.size() < 2) {
    throw Error(ErrorCode::TooFewSamples, "resample needs at least two samples");
  }
  if (d < 2) throw Error(ErrorCode::InvalidConfig, "resample dimension must be >= 2");
  validate(trace);

  const double t0 = trace.time_s.front();
  const double span = trace.time_s.back() - t0;
  Vector out(d);
  std::size_t seg = 0;
  const std::size_t last = trace.time_s.size() - 1;
  for (std::size_t j = 0; j < d; ++j) {
    if (j == d - 1) {
      out[j] = trace.voltage_v.back();
      break;
    }
    const double t = t0 + span * static_cast<double>(j) / static_cast<double>(d - 1);
    while (seg + 1 < last && trace.time_s[seg + 1] <= t) ++seg;
    const double ta = trace.time_s[seg];
    const double tb = trace.time_s[seg + 1];
    const double w = (t - ta) / (tb - ta);
    out[j] = trace.voltage_v[seg] + w * (trace.voltage_v[seg + 1] - trace.voltage_v[seg]);
  }
  return out;
}

/// SOH as the ratio of each cycle's capacity to the reference capacity.
inline Vector compute_soh(std::span<const double> capacities_ah, double q_ref_ah) {
  if (!(q_ref_ah > 0.0)) throw Error(ErrorCode::NonPositiveCapacity, "reference capacity must be positive");
  Vector soh(capacities_ah.size());
  for (std::size_t i = 0; i < capacities_ah.size(); ++i) {
    if (!(capacities_ah[i] > 0.0)) {
      throw Error(ErrorCode::NonPositiveCapacity, "capacity at index " + std::to_string(i));
    }
    soh[i] = capacities_ah[i] / q_ref_ah;
  }
  return soh;
}

/// Builds a CycleMatrix from raw traces; the first cycle (lowest id) is the
/// capacity reference.
inline CycleMatrix ingest_traces(std::vector<RawCycleTrace> traces, std::size_t d = kDefaultFeatureDim) {
  if (traces.empty()) throw Error(ErrorCode::EmptyData, "no cycle traces");
  std::sort(traces.begin(), traces.end(),
            [](const RawCycleTrace& a, const RawCycleTrace& b) { return a.cycle_id < b.cycle_id; });
  CycleMatrix out;
  out.x = Matrix(0, d);
  Vector caps;
  for (const auto& t : traces) {
    out.x.append_row(resample_cycle(t, d));
    out.cycle_ids.push_back(t.cycle_id);
    caps.push_back(t.discharge_capacity_ah);
  }
  out.soh = compute_soh(caps, caps.front());
  return out;
}

inline NormStats fit_norm(const Matrix& x) {
  if (x.rows() < 2) throw Error(ErrorCode::DegenerateInput, "fit_norm needs at least two rows");
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  NormStats s{Vector(d, 0.0), Vector(d, 0.0)};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) s.mean[j] += x(i, j);
  for (double& m : s.mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double c = x(i, j) - s.mean[j];
      s.std[j] += c * c;
    }
  for (double& v : s.std) v = std::max(std::sqrt(v / static_cast<double>(n - 1)), 1e-12);
  return s;
}

inline Matrix apply_norm(const Matrix& x, const NormStats& s) {
  if (x.cols() != s.mean.size() || s.std.size() != s.mean.size()) {
    throw Error(ErrorCode::DimensionMismatch, "normalization width does not match features");
  }
  Matrix out = x;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] = (r[j] - s.mean[j]) / s.std[j];
  }
  return out;
}

inline CycleMatrix normalized(const CycleMatrix& data, const NormStats& s) {
  return CycleMatrix{apply_norm(data.x, s), data.soh, data.cycle_ids};
}

namespace detail {

inline CycleMatrix take_rows(const CycleMatrix& data, std::size_t begin, std::size_t end) {
  CycleMatrix out;
  out.x = Matrix(0, data.dim());
  for (std::size_t i = begin; i < end; ++i) {
    out.x.append_row(data.x.row(i));
    out.soh.push_back(data.soh[i]);
    out.cycle_ids.push_back(data.cycle_ids[i]);
  }
  return out;
}

}  // namespace detail

/// First `labeled_count` cycles keep labels, the next `semisup_unlabeled_count`
/// lose them, and every cycle is retained for testing.
inline TargetSplit split_protocol(const CycleMatrix& data, const SplitSpec& spec) {
  if (spec.labeled_count < 1 || spec.semisup_unlabeled_count < 1) {
    throw Error(ErrorCode::InvalidConfig, "split counts must be >= 1");
  }
  const std::size_t need = spec.labeled_count + spec.semisup_unlabeled_count;
  if (data.size() < need) {
    throw Error(ErrorCode::InsufficientCycles,
                "need " + std::to_string(need) + " cycles, have " + std::to_string(data.size()));
  }
  if (!std::is_sorted(data.cycle_ids.begin(), data.cycle_ids.end())) {
    throw Error(ErrorCode::DegenerateInput, "cycles must be ordered by cycle id");
  }
  TargetSplit split;
  split.labeled = detail::take_rows(data, 0, spec.labeled_count);
  CycleMatrix u = detail::take_rows(data, spec.labeled_count, need);
  split.unlabeled = UnlabeledBlock{std::move(u.x), std::move(u.cycle_ids)};
  split.test = data;
  return split;
}

inline void validate(const SynthConfig& cfg) {
  if (cfg.n_cycles < 40) throw Error(ErrorCode::InvalidConfig, "synthetic n_cycles must be >= 40");
  if (cfg.d < 2) throw Error(ErrorCode::InvalidConfig, "synthetic d must be >= 2");
  if (!(cfg.shift >= 0.0) || !(cfg.noise_sd >= 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "shift and noise_sd must be non-negative");
  }
  if (!(cfg.fade_rate > 0.0) || !(cfg.fade_exponent > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "fade_rate and fade_exponent must be positive");
  }
}

namespace detail {

inline CycleMatrix synth_cell(const SynthConfig& cfg, double shift, RngStream rng) {
  const std::size_t n = cfg.n_cycles;
  const std::size_t d = cfg.d;
  CycleMatrix out;
  out.x = Matrix(n, d);
  out.soh.resize(n);
  out.cycle_ids.resize(n);
  const double soh_sd = kSynthSohNoiseRatio * cfg.noise_sd;
  for (std::size_t i = 0; i < n; ++i) {
    const double frac = static_cast<double>(i) / static_cast<double>(n);
    out.soh[i] = 1.0 - cfg.fade_rate * std::pow(frac, cfg.fade_exponent) + soh_sd * rng.normal();
    out.cycle_ids[i] = static_cast<int>(i);
  }
  const double offset = kSynthA0 + shift * kSynthA1;
  const double slope = kSynthB0 + shift * kSynthB1;
  for (std::size_t i = 0; i < n; ++i) {
    const double fade = kSynthC * (1.0 - out.soh[i]);
    for (std::size_t j = 0; j < d; ++j) {
      const double tau = static_cast<double>(j) / static_cast<double>(d - 1);
      out.x(i, j) = offset - slope * tau - fade * tau * tau + cfg.noise_sd * rng.normal();
    }
  }
  return out;
}

}  // namespace detail

/// Source cell (shift 0) and target cell (shift = cfg.shift) drawn from
/// independent substreams of cfg.seed.
inline SynthTask synth_generate(const SynthConfig& cfg) {
  validate(cfg);
  const RngStream root(cfg.seed);
  return SynthTask{detail::synth_cell(cfg, 0.0, root.fork(1)),
                   detail::synth_cell(cfg, cfg.shift, root.fork(2))};
}

}  // namespace citl
