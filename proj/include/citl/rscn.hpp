#pragma once

// Source estimator: nodes are added one at a time under the quality factor ℘,
// and after each acceptance every output weight is re-solved as a ridge
// problem.

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "citl/data.hpp"
#include "citl/growth.hpp"
#include "citl/model.hpp"
#include "citl/numcore.hpp"

namespace citl {

/// ℘ = Σ_q ⟨e_q,h⟩²(‖h‖²+2/C)/(‖h‖²+1/C)² − (1−r−μ_L)‖e‖²_F, with e stored
/// as m×N (one row per output).
inline double quality_factor(const Matrix& e, std::span<const double> h, double C, double r, double mu_L) {
  if (e.cols() != h.size()) throw Error(ErrorCode::DimensionMismatch, "residual and candidate lengths differ");
  const double hh = squared_norm(h);
  if (!(hh > 0.0)) throw Error(ErrorCode::ZeroCandidate, "candidate hidden output is zero");
  const double denom = hh + 1.0 / C;
  double score = 0.0;
  for (std::size_t q = 0; q < e.rows(); ++q) {
    const double eh = dot(e.row(q), h);
    score += eh * eh * (hh + 2.0 / C) / (denom * denom);
  }
  return score - (1.0 - r - mu_L) * frobenius_sq(e);
}

/// β = (H·Hᵀ + I/C)⁻¹·H·T, the minimizer of ½‖β‖² + (C/2)‖T − Hᵀβ‖².
inline Matrix global_weights_ridge(const Matrix& h, const Matrix& t, double C) {
  if (h.cols() != t.rows()) throw Error(ErrorCode::DimensionMismatch, "H and T disagree on N");
  if (!(C > 0.0)) throw Error(ErrorCode::InvalidConfig, "C must be positive");
  Matrix a = matmul_nt(h, h);
  for (std::size_t i = 0; i < a.rows(); ++i) a(i, i) += 1.0 / C;
  return solve_spd(a, matmul(h, t));
}

/// Labels as an N×m matrix.
inline Matrix label_matrix(std::span<const double> y) { return Matrix::column(y); }

/// Residual T − Hᵀβ, stored m×N.
inline Matrix residual_rows(const Matrix& t, const Matrix& h, const Matrix& beta) {
  Matrix e(t.cols(), t.rows());
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t q = 0; q < t.cols(); ++q) {
      double f = 0.0;
      for (std::size_t j = 0; j < h.rows(); ++j) f += h(j, i) * beta(j, q);
      e(q, i) = t(i, q) - f;
    }
  return e;
}

inline nlohmann::ordered_json to_json(const GrowConfig& cfg) {
  return {{"L_max", cfg.max_nodes},   {"T_max", cfg.candidates}, {"eps", cfg.eps},
          {"gamma_list", cfg.gamma_list}, {"r", cfg.r},           {"C", cfg.C},
          {"fallback_rounds", cfg.fallback_rounds}, {"force_accept", cfg.force_accept},
          {"activation", to_string(cfg.activation)}, {"seed", cfg.seed}};
}

struct GrowResult {
  ShallowModel model;
  GrowthLog log;
};

namespace detail {

inline void note_acceptance(GrowthLog& log, const CandidateChoice& c, std::size_t node) {
  if (c.forced) {
    log.warnings.push_back("node " + std::to_string(node) + ": no admissible candidate, best one forced in");
  } else if (c.fallback_rounds > 0) {
    log.warnings.push_back("node " + std::to_string(node) + ": accepted after " +
                           std::to_string(c.fallback_rounds) + " relaxation rounds");
  }
}

}  // namespace detail

/// Grows the source model on already-normalized features. The returned model
/// carries identity normalization; callers attach the stats they used.
inline GrowResult grow_source(const CycleMatrix& data, const GrowConfig& cfg) {
  validate(cfg);
  if (data.size() == 0) throw Error(ErrorCode::EmptyData, "source data is empty");
  const std::size_t n = data.size();
  const std::size_t d = data.dim();
  const Matrix t = label_matrix(data.soh);

  GrowResult out;
  out.model = empty_model(ModelKind::Rscn, cfg.activation, d, t.cols());
  out.model.seed = cfg.seed;
  out.model.norm = NormStats{Vector(d, 0.0), Vector(d, 1.0)};
  out.model.config = to_json(cfg);

  RngStream rng(cfg.seed);
  Matrix h(0, n);
  Matrix e = residual_rows(t, h, Matrix(0, t.cols()));
  Vector residual_sq(e.rows());

  while (frobenius(e) > cfg.eps && out.model.nodes() < cfg.max_nodes) {
    const std::size_t L = out.model.nodes();
    const double mu = mu_schedule(cfg.r, L);
    for (std::size_t q = 0; q < e.rows(); ++q) residual_sq[q] = squared_norm(e.row(q));

    auto drop = [&](std::span<const double> w, double b) {
      const Vector hc = node_output(w, b, cfg.activation, data.x);
      const double hh = squared_norm(hc);
      Vector per_q(e.rows(), 0.0);
      if (!(hh > 0.0)) return per_q;
      const double denom = hh + 1.0 / cfg.C;
      for (std::size_t q = 0; q < e.rows(); ++q) {
        const double eh = dot(e.row(q), hc);
        per_q[q] = eh * eh * (hh + 2.0 / cfg.C) / (denom * denom);
      }
      return per_q;
    };
    CandidateChoice c = search_candidate(rng, cfg, d, residual_sq, mu, drop);
    detail::note_acceptance(out.log, c, L + 1);

    const double before = frobenius(e);
    h.append_row(node_output(c.w, c.b, cfg.activation, data.x));
    out.model.w.append_row(c.w);
    out.model.b.push_back(c.b);
    out.model.beta = global_weights_ridge(h, t, cfg.C);
    e = residual_rows(t, h, out.model.beta);

    out.log.entries.push_back(GrowthLogEntry{L + 1, c.gamma, c.score, c.min_score_q, mu, before, frobenius(e),
                                             WeightMode::Global, c.fallback_rounds, c.forced});
  }
  if (out.model.nodes() == 0) {
    out.log.warnings.push_back("initial residual already within eps; model has no hidden nodes");
  }
  return out;
}

}  // namespace citl
