#pragma once

// Random instances shared by the unit tests and the acceptance binary.

#include <cmath>
#include <string>

#include "citl/citl.hpp"
#include "citl/eval.hpp"
#include "citl/oracle.hpp"

namespace citl::testing {

inline Matrix random_matrix(RngStream& rng, std::size_t rows, std::size_t cols, double lo = -1.0, double hi = 1.0) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.uniform(lo, hi);
  return m;
}

inline Vector random_vector(RngStream& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  Vector v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

inline Vector values(const Matrix& m) { return Vector(m.data().begin(), m.data().end()); }

struct RandomProblem {
  TransferConfig cfg;
  Matrix x_tl, t_tl, x_tu, t_tu;
};

/// d-dimensional standard-normal inputs, SOH-like labels and pseudo-labels,
/// and penalties drawn over a few decades.
inline RandomProblem random_problem(RngStream& rng, std::size_t d = 8, std::size_t n_tl = 20, std::size_t n_tu = 20) {
  RandomProblem p;
  p.cfg.c_t = std::pow(10.0, rng.uniform(0.0, 2.0));
  p.cfg.c_tu = rng.uniform01() < 0.2 ? 0.0 : std::pow(10.0, rng.uniform(-1.0, 2.0));
  p.cfg.eta = rng.uniform01() < 0.2 ? 0.0 : std::pow(10.0, rng.uniform(-1.0, 1.5));
  p.cfg.k_nn = 1 + static_cast<std::size_t>(rng.uniform(0.0, 7.0));
  p.x_tl = Matrix(n_tl, d);
  p.x_tu = Matrix(n_tu, d);
  for (double& v : p.x_tl.data()) v = 0.5 * rng.normal();
  for (double& v : p.x_tu.data()) v = 0.5 * rng.normal();
  p.t_tl = random_matrix(rng, n_tl, 1, 0.8, 1.0);
  p.t_tu = random_matrix(rng, n_tu, 1, 0.8, 1.0);
  return p;
}

inline TargetBuilder make_builder(const RandomProblem& p) {
  return TargetBuilder(p.x_tl, p.t_tl, p.x_tu, p.t_tu, p.cfg);
}

/// Appends `nodes` random nodes (weights in [−γ, γ]) in the given mode.
inline void add_random_nodes(TargetBuilder& b, RngStream& rng, std::size_t nodes, WeightMode mode, double gamma = 1.0) {
  const std::size_t d = b.labeled_inputs().cols();
  for (std::size_t i = 0; i < nodes; ++i) {
    const Vector w = random_vector(rng, d, -gamma, gamma);
    b.append(w, rng.uniform(-gamma, gamma), mode);
  }
}

inline oracle::TargetProblem oracle_problem(const TargetBuilder& b) {
  const auto& s = b.state();
  const auto& cfg = b.config();
  return oracle::TargetProblem{s.h_tl, s.h_tu, s.t_tl, s.t_tu, oracle::weights_from_laplacian(s.lap),
                               cfg.c_t, cfg.c_tu, cfg.eta};
}

/// The restricted objective seen by a candidate node, built from a
/// from-scratch evaluation of the current model rather than builder state.
inline oracle::NodeProblem node_problem(const TargetBuilder& b, const NodeOutputs& o) {
  const auto& s = b.state();
  ShallowModel model = to_model(b, ShallowModel{});
  model.norm = NormStats{};
  const auto r = oracle::recompute_residuals(model, b.labeled_inputs(), s.t_tl, b.unlabeled_inputs(), s.t_tu, s.lap);
  oracle::NodeProblem p;
  p.e_tl = Vector(r.e_tl.row(0).begin(), r.e_tl.row(0).end());
  p.e_tu = Vector(r.e_tu.row(0).begin(), r.e_tu.row(0).end());
  const Matrix f_l = predict(model, b.labeled_inputs());
  const Matrix f_u = predict(model, b.unlabeled_inputs());
  for (std::size_t i = 0; i < f_l.rows(); ++i) p.f_prev.push_back(f_l(i, 0));
  for (std::size_t i = 0; i < f_u.rows(); ++i) p.f_prev.push_back(f_u(i, 0));
  p.h_tl = o.h_tl;
  p.h_tu = o.h_tu;
  p.nu = oracle::weights_from_laplacian(s.lap);
  p.c_t = b.config().c_t;
  p.c_tu = b.config().c_tu;
  p.eta = b.config().eta;
  return p;
}

}  // namespace citl::testing
