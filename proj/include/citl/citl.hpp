#pragma once

// Target estimator. The objective combines structural risk on the labeled
// target cycles, a mismatch term against source-model pseudo-labels on the
// unlabeled cycles, and a graph-Laplacian smoothness term over all target
// cycles:
//   J(β) = ½‖β‖² + (C_T/2)‖T_Tl − H_Tlᵀβ‖² + (C_Tu/2)‖T_Tu − H_Tuᵀβ‖²
//          + (η/2)·tr((H_Tᵀβ)ᵀ·Lap·(H_Tᵀβ))

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "citl/data.hpp"
#include "citl/growth.hpp"
#include "citl/model.hpp"
#include "citl/numcore.hpp"
#include "citl/rscn.hpp"

namespace citl {

struct TransferConfig {
  GrowConfig growth;
  double c_t = 100.0;   // labeled-target fit
  double c_tu = 10.0;   // agreement with pseudo-labels
  double eta = 10.0;    // manifold smoothness
  std::size_t k_nn = 5;
  WeightMode mode = WeightMode::Global;
};

inline void validate(const TransferConfig& cfg) {
  validate(cfg.growth);
  if (!(cfg.c_t > 0.0)) throw Error(ErrorCode::InvalidConfig, "C_T must be positive");
  if (!(cfg.c_tu >= 0.0)) throw Error(ErrorCode::InvalidConfig, "C_Tu must be non-negative");
  if (!(cfg.eta >= 0.0)) throw Error(ErrorCode::InvalidConfig, "eta must be non-negative");
  if (cfg.k_nn < 1) throw Error(ErrorCode::InvalidConfig, "k_nn must be >= 1");
}

inline nlohmann::ordered_json to_json(const TransferConfig& cfg) {
  auto j = to_json(cfg.growth);
  j["C_T"] = cfg.c_t;
  j["C_Tu"] = cfg.c_tu;
  j["eta"] = cfg.eta;
  j["k_nn"] = cfg.k_nn;
  j["mode"] = to_string(cfg.mode);
  return j;
}

/// kNN graph Laplacian Λ − V with ν_ij = exp(−½‖x_i − x_j‖²) on the union of
/// each point's k nearest neighbours. Distance ties go to the lower index.
inline Matrix build_laplacian(const Matrix& x, std::size_t k_nn) {
  const std::size_t n = x.rows();
  if (n == 0) throw Error(ErrorCode::EmptyInput, "laplacian needs at least one point");
  Matrix dist(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < x.cols(); ++c) {
        const double diff = x(i, c) - x(j, c);
        s += diff * diff;
      }
      dist(i, j) = dist(j, i) = s;
    }

  std::vector<char> adjacent(n * n, 0);
  const std::size_t k = std::min(k_nn, n - 1);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return dist(i, a) < dist(i, b); });
    std::size_t taken = 0;
    for (std::size_t j : order) {
      if (taken == k) break;
      if (j == i) continue;
      adjacent[i * n + j] = adjacent[j * n + i] = 1;
      ++taken;
    }
  }

  Matrix lap(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j || !adjacent[i * n + j]) continue;
      const double nu = std::exp(-0.5 * dist(i, j));
      lap(i, j) = -nu;
      lap(i, i) += nu;
    }
  return lap;
}

/// Source-model predictions on the unlabeled target inputs.
inline Matrix pseudo_labels(const ShallowModel& source, const Matrix& x_tu) { return predict(source, x_tu); }

/// Builder state. Matrices follow the L×N convention for hidden outputs and
/// m×N for residuals; H_T holds the labeled block first, then the unlabeled.
struct GrowthState {
  Matrix h_tl, h_tu, h_t;
  Matrix e_tl, e_tu;
  Matrix zeta;  // m×N_T, rows of (Lap·H_Tᵀ·β)ᵀ
  Matrix lap;
  Matrix t_tl;  // N_Tl×m
  Matrix t_tu;  // N_Tu×m pseudo-labels
  Matrix beta;  // L×m
  std::size_t nodes = 0;
};

/// Hidden output of one candidate on each block.
struct NodeOutputs {
  Vector h_tl, h_tu, h_t;
};

/// Per-output pieces of the node score. With a = ⟨e_Tl,h_Tl⟩,
/// u = (C_Tu/C_T)⟨e_Tu,h_Tu⟩, z = (η/C_T)⟨ζ,h_T⟩ and n = ‖h_Tl‖²:
///   A = (2h' + n)a², C = 2h'au, D = 2h'az, E = −2nuz, F = nz², G = nu²
/// and (A + C − D − E − F − G)/b_g² is the exact drop in ‖e_Tl,q‖² when the
/// node is appended with its closed-form weight.
struct XiTerms {
  double a = 0, c = 0, d = 0, e = 0, f = 0, g = 0;
};

struct XiResult {
  Vector xi_per_q;
  double xi = 0.0;
  Vector drop_per_q;
  std::vector<XiTerms> terms;
  double h_prime = 0.0;
  double b_g = 0.0;
};

namespace detail {

inline void check_outputs(const GrowthState& s, std::span<const double> h_tl, std::span<const double> h_tu,
                          std::span<const double> h_t) {
  if (h_tl.size() != s.e_tl.cols() || h_tu.size() != s.e_tu.cols() || h_t.size() != s.lap.rows() ||
      s.zeta.cols() != h_t.size() || s.e_tu.rows() != s.e_tl.rows() || s.zeta.rows() != s.e_tl.rows()) {
    throw Error(ErrorCode::InconsistentState, "candidate outputs do not match the growth state");
  }
}

// h' = 1/C_T + (C_Tu/C_T)‖h_Tu‖² + (η/C_T)·h_TᵀLap·h_T
inline double h_prime(const GrowthState& s, std::span<const double> h_tu, std::span<const double> h_t,
                      const TransferConfig& cfg) {
  double hp = 1.0 / cfg.c_t + (cfg.c_tu / cfg.c_t) * squared_norm(h_tu);
  if (cfg.eta != 0.0) hp += (cfg.eta / cfg.c_t) * quad_form(h_t, s.lap);
  return hp;
}

}  // namespace detail

inline XiResult xi_score(const GrowthState& s, std::span<const double> h_tl, std::span<const double> h_tu,
                         std::span<const double> h_t, const TransferConfig& cfg, double mu_L) {
  detail::check_outputs(s, h_tl, h_tu, h_t);
  XiResult out;
  const std::size_t m = s.e_tl.rows();
  const double n = squared_norm(h_tl);
  out.h_prime = detail::h_prime(s, h_tu, h_t, cfg);
  out.b_g = out.h_prime + n;
  const double bg2 = out.b_g * out.b_g;
  const double gap = 1.0 - cfg.growth.r - mu_L;
  out.xi_per_q.resize(m);
  out.drop_per_q.resize(m);
  out.terms.resize(m);
  for (std::size_t q = 0; q < m; ++q) {
    const double a = dot(s.e_tl.row(q), h_tl);
    const double u = (cfg.c_tu / cfg.c_t) * dot(s.e_tu.row(q), h_tu);
    const double z = (cfg.eta / cfg.c_t) * dot(s.zeta.row(q), h_t);
    const double hp = out.h_prime;
    XiTerms& t = out.terms[q];
    t.a = (2.0 * hp + n) * a * a;
    t.c = 2.0 * hp * a * u;
    t.d = 2.0 * hp * a * z;
    t.e = -2.0 * n * u * z;
    t.f = n * z * z;
    t.g = n * u * u;
    out.drop_per_q[q] = (t.a + t.c - t.d - t.e - t.f - t.g) / bg2;
    out.xi_per_q[q] = out.drop_per_q[q] - gap * squared_norm(s.e_tl.row(q));
    out.xi += out.xi_per_q[q];
  }
  return out;
}

/// Closed-form output weight of a new node with every earlier weight frozen.
inline Vector single_node_weight(const GrowthState& s, std::span<const double> h_tl, std::span<const double> h_tu,
                                 std::span<const double> h_t, const TransferConfig& cfg) {
  detail::check_outputs(s, h_tl, h_tu, h_t);
  const double denom = detail::h_prime(s, h_tu, h_t, cfg) + squared_norm(h_tl);
  Vector beta(s.e_tl.rows());
  for (std::size_t q = 0; q < beta.size(); ++q) {
    beta[q] = (dot(s.e_tl.row(q), h_tl) + (cfg.c_tu / cfg.c_t) * dot(s.e_tu.row(q), h_tu) -
               (cfg.eta / cfg.c_t) * dot(s.zeta.row(q), h_t)) /
              denom;
  }
  return beta;
}

/// β' = (I + C_T·H_Tl·H_Tlᵀ + C_Tu·H_Tu·H_Tuᵀ + η·H_T·Lap·H_Tᵀ)⁻¹(C_T·H_Tl·T_Tl + C_Tu·H_Tu·T_Tu),
/// the minimizer of J.
inline Matrix global_weights_citl(const GrowthState& s, const Matrix& t_tl, const TransferConfig& cfg) {
  const std::size_t L = s.h_tl.rows();
  if (L == 0) throw Error(ErrorCode::InconsistentState, "global weights need at least one node");
  if (t_tl.rows() != s.h_tl.cols() || s.t_tu.rows() != s.h_tu.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "targets do not match hidden outputs");
  }
  Matrix a = Matrix::identity(L);
  a = add(a, matmul_nt(s.h_tl, s.h_tl), cfg.c_t);
  Matrix rhs = scaled(matmul(s.h_tl, t_tl), cfg.c_t);
  if (cfg.c_tu != 0.0 && s.h_tu.cols() > 0) {
    a = add(a, matmul_nt(s.h_tu, s.h_tu), cfg.c_tu);
    rhs = add(rhs, matmul(s.h_tu, s.t_tu), cfg.c_tu);
  }
  if (cfg.eta != 0.0) {
    const Matrix hl = matmul(s.h_t, s.lap);  // L×N_T, Lap symmetric
    Matrix m = matmul_nt(hl, s.h_t);
    // Symmetrize away rounding so the solver's symmetry check sees exact symmetry.
    for (std::size_t i = 0; i < L; ++i)
      for (std::size_t j = i + 1; j < L; ++j) m(i, j) = m(j, i) = 0.5 * (m(i, j) + m(j, i));
    a = add(a, m, cfg.eta);
  }
  return solve_spd(a, rhs);
}

/// ζ = rows of (Lap·H_Tᵀ·β)ᵀ, m×N_T.
inline Matrix manifold_gradient(const Matrix& lap, const Matrix& h_t, const Matrix& beta) {
  const std::size_t n = lap.rows();
  const std::size_t m = beta.cols();
  Matrix f(n, m);  // H_Tᵀβ
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t q = 0; q < m; ++q) {
      double s = 0.0;
      for (std::size_t j = 0; j < h_t.rows(); ++j) s += h_t(j, i) * beta(j, q);
      f(i, q) = s;
    }
  return matmul(lap, f).transposed();
}

/// Owns a GrowthState together with the target inputs, and appends nodes in
/// either weight mode. Copyable, so a state can be branched for comparisons.
class TargetBuilder {
 public:
  TargetBuilder(Matrix x_tl, Matrix t_tl, Matrix x_tu, Matrix t_tu, const TransferConfig& cfg)
      : cfg_(cfg), x_tl_(std::move(x_tl)), x_tu_(std::move(x_tu)) {
    validate(cfg_);
    if (x_tl_.rows() == 0) throw Error(ErrorCode::EmptyData, "no labeled target cycles");
    if (t_tl.rows() != x_tl_.rows()) throw Error(ErrorCode::DimensionMismatch, "labels do not match inputs");
    if (x_tu_.rows() > 0 && x_tu_.cols() != x_tl_.cols()) {
      throw Error(ErrorCode::DimensionMismatch, "labeled and unlabeled widths differ");
    }
    if (t_tu.rows() != x_tu_.rows() || (x_tu_.rows() > 0 && t_tu.cols() != t_tl.cols())) {
      throw Error(ErrorCode::DimensionMismatch, "pseudo-labels do not match unlabeled inputs");
    }
    if (x_tu_.rows() == 0 && (cfg_.c_tu > 0.0 || cfg_.eta > 0.0)) {
      throw Error(ErrorCode::EmptyData, "unlabeled cycles required when C_Tu > 0 or eta > 0");
    }
    const std::size_t m = t_tl.cols();
    const std::size_t n_tl = x_tl_.rows();
    const std::size_t n_tu = x_tu_.rows();
    x_t_ = x_tl_;
    for (std::size_t i = 0; i < n_tu; ++i) x_t_.append_row(x_tu_.row(i));

    s_.h_tl = Matrix(0, n_tl);
    s_.h_tu = Matrix(0, n_tu);
    s_.h_t = Matrix(0, n_tl + n_tu);
    s_.t_tl = std::move(t_tl);
    s_.t_tu = n_tu > 0 ? std::move(t_tu) : Matrix(0, m);
    s_.beta = Matrix(0, m);
    s_.lap = build_laplacian(x_t_, cfg_.k_nn);
    s_.e_tl = s_.t_tl.transposed();
    s_.e_tu = n_tu > 0 ? s_.t_tu.transposed() : Matrix(m, 0);
    s_.zeta = Matrix(m, n_tl + n_tu);
    w_ = Matrix(0, x_tl_.cols());
  }

  const GrowthState& state() const noexcept { return s_; }
  const TransferConfig& config() const noexcept { return cfg_; }
  const Matrix& input_weights() const noexcept { return w_; }
  const Vector& biases() const noexcept { return b_; }
  const Matrix& labeled_inputs() const noexcept { return x_tl_; }
  const Matrix& unlabeled_inputs() const noexcept { return x_tu_; }

  NodeOutputs outputs(std::span<const double> w, double b) const {
    NodeOutputs o;
    o.h_tl = node_output(w, b, cfg_.growth.activation, x_tl_);
    o.h_tu = node_output(w, b, cfg_.growth.activation, x_tu_);
    o.h_t = o.h_tl;
    o.h_t.insert(o.h_t.end(), o.h_tu.begin(), o.h_tu.end());
    return o;
  }

  XiResult score(const NodeOutputs& o, double mu_L) const { return xi_score(s_, o.h_tl, o.h_tu, o.h_t, cfg_, mu_L); }

  /// Appends a node. Incremental mode gives it the closed-form weight and
  /// leaves earlier weights alone; global mode re-solves every weight.
  void append(std::span<const double> w, double b, WeightMode mode) {
    const NodeOutputs o = outputs(w, b);
    const std::size_t m = s_.e_tl.rows();
    if (mode == WeightMode::Incremental) {
      const Vector beta_new = single_node_weight(s_, o.h_tl, o.h_tu, o.h_t, cfg_);
      push_node(w, b, o);
      s_.beta.append_row(beta_new);
      const Vector lh = matvec(s_.lap, o.h_t);
      for (std::size_t q = 0; q < m; ++q) {
        for (std::size_t i = 0; i < o.h_tl.size(); ++i) s_.e_tl(q, i) -= beta_new[q] * o.h_tl[i];
        for (std::size_t i = 0; i < o.h_tu.size(); ++i) s_.e_tu(q, i) -= beta_new[q] * o.h_tu[i];
        for (std::size_t i = 0; i < lh.size(); ++i) s_.zeta(q, i) += beta_new[q] * lh[i];
      }
    } else {
      push_node(w, b, o);
      s_.beta = global_weights_citl(s_, s_.t_tl, cfg_);
      s_.e_tl = residual_rows(s_.t_tl, s_.h_tl, s_.beta);
      s_.e_tu = residual_rows(s_.t_tu, s_.h_tu, s_.beta);
      s_.zeta = manifold_gradient(s_.lap, s_.h_t, s_.beta);
    }
  }

  double residual_fro() const { return frobenius(s_.e_tl); }

 private:
  void push_node(std::span<const double> w, double b, const NodeOutputs& o) {
    w_.append_row(w);
    b_.push_back(b);
    s_.h_tl.append_row(o.h_tl);
    s_.h_tu.append_row(o.h_tu);
    s_.h_t.append_row(o.h_t);
    ++s_.nodes;
  }

  TransferConfig cfg_;
  Matrix x_tl_, x_tu_, x_t_;
  GrowthState s_;
  Matrix w_;
  Vector b_;
};

/// Runs the growth loop on a prepared builder until ‖e_Tl‖_F ≤ eps or L_max.
inline GrowthLog grow(TargetBuilder& builder) {
  const TransferConfig& cfg = builder.config();
  const GrowConfig& g = cfg.growth;
  RngStream rng(g.seed);
  GrowthLog log;
  const std::size_t d = builder.labeled_inputs().cols();
  Vector residual_sq(builder.state().e_tl.rows());

  while (builder.residual_fro() > g.eps && builder.state().nodes < g.max_nodes) {
    const std::size_t L = builder.state().nodes;
    const double mu = mu_schedule(g.r, L);
    for (std::size_t q = 0; q < residual_sq.size(); ++q) residual_sq[q] = squared_norm(builder.state().e_tl.row(q));
    auto drop = [&](std::span<const double> w, double b) { return builder.score(builder.outputs(w, b), mu).drop_per_q; };
    const CandidateChoice c = search_candidate(rng, g, d, residual_sq, mu, drop);
    detail::note_acceptance(log, c, L + 1);
    const double before = builder.residual_fro();
    builder.append(c.w, c.b, cfg.mode);
    log.entries.push_back(GrowthLogEntry{L + 1, c.gamma, c.score, c.min_score_q, mu, before, builder.residual_fro(),
                                         cfg.mode, c.fallback_rounds, c.forced});
  }
  if (builder.state().nodes == 0) {
    log.warnings.push_back("initial labeled residual already within eps; model has no hidden nodes");
  }
  return log;
}

inline ShallowModel to_model(const TargetBuilder& builder, const ShallowModel& source) {
  ShallowModel model = empty_model(ModelKind::Citl, builder.config().growth.activation,
                                   builder.labeled_inputs().cols(), builder.state().t_tl.cols());
  model.w = builder.input_weights();
  model.b = builder.biases();
  model.beta = builder.state().beta;
  model.norm = source.norm;
  model.seed = builder.config().growth.seed;
  model.config = to_json(builder.config());
  return model;
}

/// Grows the target model. Inputs must already be normalized with source.norm.
inline GrowResult grow_target(const CycleMatrix& labeled, const UnlabeledBlock& unlabeled,
                              const ShallowModel& source, const TransferConfig& cfg) {
  if (labeled.size() == 0) throw Error(ErrorCode::EmptyData, "no labeled target cycles");
  if (labeled.dim() != source.d || (unlabeled.size() > 0 && unlabeled.x.cols() != source.d)) {
    throw Error(ErrorCode::DimensionMismatch, "target features do not match the source model dimension");
  }
  Matrix t_tu = unlabeled.size() > 0 ? pseudo_labels(source, unlabeled.x) : Matrix(0, source.m);
  TargetBuilder builder(labeled.x, label_matrix(labeled.soh), unlabeled.x, std::move(t_tu), cfg);
  GrowResult out;
  out.log = grow(builder);
  out.model = to_model(builder, source);
  return out;
}

/// Online prediction shares the source model's formula.
inline Matrix predict_target(const ShallowModel& model, const Matrix& x) { return predict(model, x); }

}  // namespace citl
