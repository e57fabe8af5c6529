#pragma once

// Brute-force checks for the closed-form solvers. Nothing here calls
// global_weights_citl, single_node_weight or xi_score: objectives are
// assembled term by term from explicit matrices, with the manifold term as a
// pairwise sum, and evaluated in extended precision.

#include <cmath>
#include <functional>
#include <vector>

#include "citl/model.hpp"
#include "citl/numcore.hpp"

namespace citl::oracle {

using Objective = std::function<long double(std::span<const double>)>;

/// Central differences with step 1e-5·max(1, |x_i|) unless `h` is given.
inline Vector finite_diff_grad(const Objective& f, std::span<const double> x, double h = 0.0) {
  if (h < 0.0) throw Error(ErrorCode::InvalidConfig, "finite-difference step must be positive");
  Vector grad(x.size());
  Vector probe(x.begin(), x.end());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double step = h > 0.0 ? h : 1e-5 * std::max(1.0, std::abs(x[i]));
    probe[i] = x[i] + step;
    const long double up = f(probe);
    probe[i] = x[i] - step;
    const long double down = f(probe);
    probe[i] = x[i];
    if (!std::isfinite(static_cast<double>(up)) || !std::isfinite(static_cast<double>(down))) {
      throw Error(ErrorCode::NonFiniteObjective, "objective is not finite near the probe point");
    }
    grad[i] = static_cast<double>((up - down) / (2.0L * step));
  }
  return grad;
}

/// Golden-section search; returns the midpoint of the final bracket, whose
/// width is at most `tol`.
inline double minimize_1d(const std::function<long double(double)>& f, double lo, double hi, double tol) {
  if (!(lo < hi)) throw Error(ErrorCode::InvalidBracket, "minimize_1d needs lo < hi");
  if (!(tol > 0.0)) throw Error(ErrorCode::InvalidConfig, "tolerance must be positive");
  const long double inv_phi = (std::sqrt(5.0L) - 1.0L) / 2.0L;
  long double a = lo, b = hi;
  long double c = b - inv_phi * (b - a);
  long double d = a + inv_phi * (b - a);
  long double fc = f(static_cast<double>(c)), fd = f(static_cast<double>(d));
  while (b - a > tol) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(static_cast<double>(c));
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(static_cast<double>(d));
    }
  }
  return static_cast<double>((a + b) / 2.0L);
}

/// Everything needed to write the target objective down explicitly.
/// `nu` holds the pairwise graph weights over the stacked target inputs
/// (labeled rows first).
struct TargetProblem {
  Matrix h_tl, h_tu;  // L×N
  Matrix t_tl, t_tu;  // N×m
  Matrix nu;          // N_T×N_T
  double c_t = 1.0, c_tu = 0.0, eta = 0.0;
};

/// Graph weights recovered from the off-diagonal of a Laplacian.
inline Matrix weights_from_laplacian(const Matrix& lap) {
  Matrix nu(lap.rows(), lap.cols());
  for (std::size_t i = 0; i < lap.rows(); ++i)
    for (std::size_t j = 0; j < lap.cols(); ++j)
      if (i != j) nu(i, j) = -lap(i, j);
  return nu;
}

namespace detail {

// Output of column i of h under weights beta (L×m, flat row-major) for output q.
inline long double output_at(const Matrix& h, std::span<const double> beta, std::size_t m, std::size_t i,
                             std::size_t q) {
  long double s = 0.0L;
  for (std::size_t j = 0; j < h.rows(); ++j) s += static_cast<long double>(h(j, i)) * beta[j * m + q];
  return s;
}

}  // namespace detail

/// J(β) = ½‖β‖² + (C_T/2)Σ(t−f)² over labeled + (C_Tu/2)Σ(t−f)² over unlabeled
///        + (η/2)·½Σ_ij ν_ij (f_i − f_j)², with β flattened row-major (L×m).
inline long double target_objective(const TargetProblem& p, std::span<const double> beta) {
  const std::size_t m = p.t_tl.cols();
  long double reg = 0.0L;
  for (double v : beta) reg += static_cast<long double>(v) * v;
  long double fit_l = 0.0L, fit_u = 0.0L, smooth = 0.0L;
  const std::size_t n_tl = p.h_tl.cols(), n_tu = p.h_tu.cols();
  for (std::size_t q = 0; q < m; ++q) {
    std::vector<long double> f(n_tl + n_tu);
    for (std::size_t i = 0; i < n_tl; ++i) {
      f[i] = detail::output_at(p.h_tl, beta, m, i, q);
      const long double r = p.t_tl(i, q) - f[i];
      fit_l += r * r;
    }
    for (std::size_t i = 0; i < n_tu; ++i) {
      f[n_tl + i] = detail::output_at(p.h_tu, beta, m, i, q);
      const long double r = p.t_tu(i, q) - f[n_tl + i];
      fit_u += r * r;
    }
    if (p.eta != 0.0) {
      for (std::size_t i = 0; i < f.size(); ++i)
        for (std::size_t j = 0; j < f.size(); ++j) {
          const long double diff = f[i] - f[j];
          smooth += p.nu(i, j) * diff * diff;
        }
    }
  }
  return 0.5L * reg + 0.5L * p.c_t * fit_l + 0.5L * p.c_tu * fit_u + 0.5L * p.eta * 0.5L * smooth;
}

/// Objective seen by a new node's weight when every earlier weight is frozen:
///   ½b² + (C_T/2)‖e_Tl − b·h_Tl‖² + (C_Tu/2)‖e_Tu − b·h_Tu‖² + (η/2)·½Σ ν_ij (g_i − g_j)²
/// with g = f_prev + b·h_T, for a single output.
struct NodeProblem {
  Vector e_tl, e_tu;  // current residuals
  Vector f_prev;      // current outputs on the stacked target inputs
  Vector h_tl, h_tu;  // new node's hidden outputs
  Matrix nu;
  double c_t = 1.0, c_tu = 0.0, eta = 0.0;
};

inline long double node_objective(const NodeProblem& p, double b) {
  const long double bb = b;
  long double fit_l = 0.0L, fit_u = 0.0L, smooth = 0.0L;
  for (std::size_t i = 0; i < p.e_tl.size(); ++i) {
    const long double r = p.e_tl[i] - bb * p.h_tl[i];
    fit_l += r * r;
  }
  for (std::size_t i = 0; i < p.e_tu.size(); ++i) {
    const long double r = p.e_tu[i] - bb * p.h_tu[i];
    fit_u += r * r;
  }
  if (p.eta != 0.0) {
    const std::size_t n_tl = p.h_tl.size();
    std::vector<long double> g(p.f_prev.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double h = i < n_tl ? p.h_tl[i] : p.h_tu[i - n_tl];
      g[i] = p.f_prev[i] + bb * h;
    }
    for (std::size_t i = 0; i < g.size(); ++i)
      for (std::size_t j = 0; j < g.size(); ++j) {
        const long double diff = g[i] - g[j];
        smooth += p.nu(i, j) * diff * diff;
      }
  }
  return 0.5L * bb * bb + 0.5L * p.c_t * fit_l + 0.5L * p.c_tu * fit_u + 0.5L * p.eta * 0.5L * smooth;
}

struct Residuals {
  Matrix e_tl;  // m×N_Tl
  Matrix e_tu;  // m×N_Tu
  Matrix zeta;  // m×N_T
};

/// From-scratch residuals and ζ = (Lap·F)ᵀ for a model, where F stacks the
/// model's predictions on the labeled then unlabeled inputs.
inline Residuals recompute_residuals(const ShallowModel& model, const Matrix& x_tl, const Matrix& t_tl,
                                     const Matrix& x_tu, const Matrix& t_tu, const Matrix& lap) {
  if (t_tl.rows() != x_tl.rows() || t_tu.rows() != x_tu.rows() || lap.rows() != x_tl.rows() + x_tu.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "blocks do not line up");
  }
  const Matrix f_l = predict(model, x_tl);
  const Matrix f_u = x_tu.rows() > 0 ? predict(model, x_tu) : Matrix(0, model.m);
  const std::size_t m = model.m;
  Residuals r{Matrix(m, x_tl.rows()), Matrix(m, x_tu.rows()), Matrix(m, lap.rows())};
  for (std::size_t q = 0; q < m; ++q) {
    for (std::size_t i = 0; i < x_tl.rows(); ++i) r.e_tl(q, i) = t_tl(i, q) - f_l(i, q);
    for (std::size_t i = 0; i < x_tu.rows(); ++i) r.e_tu(q, i) = t_tu(i, q) - f_u(i, q);
    for (std::size_t i = 0; i < lap.rows(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < lap.cols(); ++j) {
        const double fj = j < x_tl.rows() ? f_l(j, q) : f_u(j - x_tl.rows(), q);
        s += lap(i, j) * fj;
      }
      r.zeta(q, i) = s;
    }
  }
  return r;
}

}  // namespace citl::oracle
