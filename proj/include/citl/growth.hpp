#pragma once

// Pieces shared by the source (RSCN) and target (CITL) builders: the growth
// configuration, the per-node log, and the random candidate search with its
// relaxation ladder.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "citl/csv.hpp"
#include "citl/model.hpp"
#include "citl/numcore.hpp"

namespace citl {

struct GrowConfig {
  std::size_t max_nodes = 200;       // L_max
  std::size_t candidates = 50;       // T_max, per weight range
  double eps = 0.01;                 // stop once ‖e‖_F ≤ eps
  std::vector<double> gamma_list{0.5, 1, 5, 10, 50, 100, 200};
  double r = 0.9;                    // contraction factor, μ_L = (1 − r)/(L + 1)
  double C = 1024.0;                 // ridge penalty on the residual term
  std::size_t fallback_rounds = 8;
  bool force_accept = true;          // take the best candidate once the ladder is exhausted
  Activation activation = Activation::Sigmoid;
  std::uint64_t seed = 1;
};

inline void validate(const GrowConfig& cfg) {
  if (cfg.max_nodes < 1) throw Error(ErrorCode::InvalidConfig, "max_nodes must be >= 1");
  if (cfg.candidates < 1) throw Error(ErrorCode::InvalidConfig, "candidates must be >= 1");
  if (!(cfg.eps > 0.0)) throw Error(ErrorCode::InvalidConfig, "eps must be positive");
  if (cfg.gamma_list.empty()) throw Error(ErrorCode::InvalidConfig, "gamma_list must be non-empty");
  for (double g : cfg.gamma_list)
    if (!(g > 0.0)) throw Error(ErrorCode::InvalidConfig, "gamma values must be positive");
  if (!(cfg.r > 0.0 && cfg.r < 1.0)) throw Error(ErrorCode::InvalidConfig, "r must lie in (0, 1)");
  if (!(cfg.C > 0.0)) throw Error(ErrorCode::InvalidConfig, "C must be positive");
}

/// μ_L for a model that currently has `nodes` hidden nodes.
inline double mu_schedule(double r, std::size_t nodes) { return (1.0 - r) / static_cast<double>(nodes + 1); }

enum class WeightMode { Global, Incremental };

inline const char* to_string(WeightMode m) { return m == WeightMode::Global ? "global" : "incremental"; }

inline WeightMode parse_weight_mode(const std::string& s) {
  if (s == "global") return WeightMode::Global;
  if (s == "incremental") return WeightMode::Incremental;
  throw Error(ErrorCode::InvalidConfig, "unknown mode '" + s + "'");
}

struct GrowthLogEntry {
  std::size_t node = 0;
  double gamma = 0.0;
  double score = 0.0;         // ℘ or ξ of the accepted candidate at the nominal μ_L
  double min_score_q = 0.0;   // min over outputs of the per-output score
  double mu = 0.0;            // μ_L used for the nominal score
  double residual_before = 0.0;
  double residual_fro = 0.0;  // ‖e‖_F after the node was added
  WeightMode mode = WeightMode::Global;
  std::size_t fallback_rounds = 0;  // relaxation rounds needed to accept
  bool forced = false;              // accepted without satisfying the criterion
};

struct GrowthLog {
  std::vector<GrowthLogEntry> entries;
  std::vector<std::string> warnings;
};

inline std::string fallback_label(const GrowthLogEntry& e) {
  if (e.forced) return "forced";
  if (e.fallback_rounds > 0) return "relaxed" + std::to_string(e.fallback_rounds);
  return "none";
}

inline void write_growth_log(const std::string& path, const GrowthLog& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << "node,gamma,xi,residual_fro,mode,fallback\n";
  for (const auto& e : log.entries) {
    out << e.node << ',' << csv::format_double(e.gamma) << ',' << csv::format_double(e.score) << ','
        << csv::format_double(e.residual_fro) << ',' << to_string(e.mode) << ',' << fallback_label(e) << '\n';
  }
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path);
}

/// Candidate that won a search round, with the bookkeeping needed for the log.
struct CandidateChoice {
  Vector w;
  double b = 0.0;
  double gamma = 0.0;
  Vector drop_per_q;  // predicted residual decrease per output
  double score = 0.0;
  double min_score_q = 0.0;
  std::size_t fallback_rounds = 0;
  bool forced = false;
};

namespace detail {

struct PoolEntry {
  Vector w;
  double b;
  double gamma;
  Vector drop_per_q;
};

inline void score_entry(const PoolEntry& c, std::span<const double> residual_sq, double gap, double& total,
                        double& min_q) {
  total = 0.0;
  min_q = std::numeric_limits<double>::infinity();
  for (std::size_t q = 0; q < residual_sq.size(); ++q) {
    const double s = c.drop_per_q[q] - gap * residual_sq[q];
    total += s;
    min_q = std::min(min_q, s);
  }
}

// Index of the best admissible entry in [begin, end) at the given gap, or -1.
// Ties go to the lowest index.
inline long best_admissible(const std::vector<PoolEntry>& pool, std::size_t begin, std::size_t end,
                            std::span<const double> residual_sq, double gap) {
  long best = -1;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t i = begin; i < end; ++i) {
    double total, min_q;
    score_entry(pool[i], residual_sq, gap, total, min_q);
    if (min_q >= 0.0 && total > best_score) {
      best = static_cast<long>(i);
      best_score = total;
    }
  }
  return best;
}

}  // namespace detail

/// Random search for the next node.
///
/// For each γ in order, `candidates` (ω, b) pairs are drawn uniformly from
/// [−γ, γ]^d × [−γ, γ] and scored as drop_q − (1 − r − μ)·‖e_q‖². The first γ
/// that yields an admissible candidate (every per-output score ≥ 0) wins with
/// its max-score member. If no γ does, the gap (1 − r − μ) is halved over the
/// whole pool for up to `fallback_rounds` rounds; after that the max-score
/// candidate is taken and flagged as forced.
///
/// `drop_fn(w, b)` must return the exact residual decrease per output that
/// appending the candidate would produce.
template <class DropFn>
CandidateChoice search_candidate(RngStream& rng, const GrowConfig& cfg, std::size_t d,
                                 std::span<const double> residual_sq, double mu, DropFn&& drop_fn) {
  std::vector<detail::PoolEntry> pool;
  pool.reserve(cfg.gamma_list.size() * cfg.candidates);
  const double nominal_gap = 1.0 - cfg.r - mu;

  long chosen = -1;
  std::size_t rounds = 0;
  for (double gamma : cfg.gamma_list) {
    const std::size_t begin = pool.size();
    for (std::size_t t = 0; t < cfg.candidates; ++t) {
      detail::PoolEntry c{Vector(d), 0.0, gamma, {}};
      for (double& v : c.w) v = rng.uniform(-gamma, gamma);
      c.b = rng.uniform(-gamma, gamma);
      c.drop_per_q = drop_fn(std::span<const double>(c.w), c.b);
      pool.push_back(std::move(c));
    }
    chosen = detail::best_admissible(pool, begin, pool.size(), residual_sq, nominal_gap);
    if (chosen >= 0) break;
  }

  bool forced = false;
  double gap = nominal_gap;
  while (chosen < 0 && rounds < cfg.fallback_rounds) {
    ++rounds;
    gap *= 0.5;
    chosen = detail::best_admissible(pool, 0, pool.size(), residual_sq, gap);
  }
  if (chosen < 0) {
    if (!cfg.force_accept) {
      throw Error(ErrorCode::NoCandidateFound,
                  "no admissible candidate after " + std::to_string(rounds) + " relaxation rounds");
    }
    forced = true;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pool.size(); ++i) {
      double total, min_q;
      detail::score_entry(pool[i], residual_sq, nominal_gap, total, min_q);
      if (std::isfinite(total) && total > best) {
        best = total;
        chosen = static_cast<long>(i);
      }
    }
    if (chosen < 0) throw Error(ErrorCode::NoCandidateFound, "every candidate produced a non-finite score");
  }

  auto& c = pool[static_cast<std::size_t>(chosen)];
  CandidateChoice out;
  detail::score_entry(c, residual_sq, nominal_gap, out.score, out.min_score_q);
  out.w = std::move(c.w);
  out.b = c.b;
  out.gamma = c.gamma;
  out.drop_per_q = std::move(c.drop_per_q);
  out.fallback_rounds = rounds;
  out.forced = forced;
  return out;
}

}  // namespace citl
