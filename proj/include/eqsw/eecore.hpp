// Copyright 2026 the eqsw authors
// SPDX-License-Identifier: Apache-2.0
//
// Core estimating-equation machinery: the function-set abstraction, the
// stacked and two-step (profile) solvers, and the empirical moment matrices
// that every variance estimator downstream consumes.
#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "eqsw/numkit.hpp"

namespace eqsw {

/// Joint parameter: target psi (length p >= 1) and nuisance theta
/// (length q >= 0; q = 0 means no nuisance model).
struct ParamVector {
  Vector psi;
  Vector theta;
};

/// A set of unbiased estimating functions bound to a dataset of n_units
/// independent units. u1 gives the p target equations per unit, u2 the q
/// nuisance equations. Analytic Jacobian callbacks are optional per block;
/// absent blocks fall back to central finite differences.
///
/// theta_is_partial_score records whether u2 is the (partial) score of a
/// correctly specified nuisance likelihood; the score-corrected variance
/// estimator is only valid when it is true.
struct EstimatingFunctionSet {
  std::size_t dim_psi = 0;
  std::size_t dim_theta = 0;
  std::size_t n_units = 0;
  std::function<Vector(std::size_t, const Vector&, const Vector&)> u1;
  std::function<Vector(std::size_t, const Vector&)> u2;
  std::function<Matrix(std::size_t, const Vector&, const Vector&)> d_u1_dpsi;
  std::function<Matrix(std::size_t, const Vector&, const Vector&)> d_u1_dtheta;
  std::function<Matrix(std::size_t, const Vector&)> d_u2_dtheta;
  bool theta_is_partial_score = false;
};

struct SolverConfig {
  double tol = 1e-9;
  int max_iter = 200;
  int max_halvings = 50;
  double fd_step_rel = 1e-6;
};

/// Empirical moment matrices at the fitted parameters, all sample averages
/// over units: bread = Pn du1/dpsi (p x p), d_theta_u1 = Pn du1/dtheta
/// (p x q), meat = Pn u1 u1^T, cross = Pn u1 u2^T, fisher = Pn u2 u2^T,
/// d_theta_u2 = Pn du2/dtheta. meat and fisher come out symmetric PSD up
/// to rounding.
struct MomentEstimates {
  Matrix bread;
  Matrix d_theta_u1;
  Matrix meat;
  Matrix cross;
  Matrix fisher;
  Matrix d_theta_u2;
  std::size_t n = 0;
};

/// Per-unit values of u1 and u2 at the fitted parameters; consumed by the
/// general-correction variance estimator and the projection residuals.
struct ScoreRows {
  std::vector<Vector> u1;
  std::vector<Vector> u2;
};

/// Sample averages of u1 / u2 over all units.
Vector mean_u1(const EstimatingFunctionSet& fns, const Vector& psi, const Vector& theta);
Vector mean_u2(const EstimatingFunctionSet& fns, const Vector& theta);

/// Damped Newton with step-halving on the residual 2-norm: the root finder
/// under both solvers, exposed for nuisance-model fits. Stops when the
/// residual infinity norm drops to cfg.tol. iterate_check, when given, runs
/// on every accepted iterate and may throw (used for divergence detection).
/// Throws NoConvergence and SingularJacobian as solve_stacked does.
Vector solve_root(const std::function<Vector(const Vector&)>& residual,
                  const std::function<Matrix(const Vector&)>& jacobian, Vector init,
                  const SolverConfig& cfg, const std::string& context,
                  const std::function<void(const Vector&)>& iterate_check = {});

/// Solves the stacked system Pn(u1; u2) = 0 in (psi, theta) jointly by
/// damped Newton with step-halving. Throws NoConvergence when the
/// iteration cap is hit or no halved step reduces the residual, and
/// SingularJacobian when the Newton system is singular or has condition
/// number above 1e12.
ParamVector solve_stacked(const EstimatingFunctionSet& fns, const ParamVector& init,
                          const SolverConfig& cfg = {});

/// Two-step solver: first Pn u2(theta) = 0, then Pn u1(psi, theta_hat) = 0.
/// Same contract and error conditions as solve_stacked; with q = 0 it
/// reduces to solving the target equations alone.
ParamVector solve_profile(const EstimatingFunctionSet& fns, const ParamVector& init,
                          const SolverConfig& cfg = {});

/// Default starting point: theta from a preliminary nuisance-only solve
/// started at zero, psi = 0.
ParamVector default_init(const EstimatingFunctionSet& fns, const SolverConfig& cfg = {});

/// All six moment matrices at `at`, analytic Jacobian blocks when supplied
/// and per-unit central differences otherwise.
MomentEstimates empirical_moments(const EstimatingFunctionSet& fns, const ParamVector& at,
                                  double fd_step_rel = 1e-6);

/// Per-unit u1 / u2 values at `at`.
ScoreRows score_rows(const EstimatingFunctionSet& fns, const ParamVector& at);

}  // namespace eqsw
