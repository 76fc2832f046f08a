// Copyright 2026 the eqsw authors
// SPDX-License-Identifier: Apache-2.0
//
// Builtin partial-score nuisance models: logistic regression for point
// treatment and pooled logistic regression for longitudinal treatment.
//
// Probability convention: P(A=1 | x) = 1/(1 + exp(-theta'x)). Model output
// (fitted probabilities, scores) is invariant to flipping the sign of
// theta, so every contract here is stated on probabilities.
#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "eqsw/data.hpp"
#include "eqsw/eecore.hpp"
#include "eqsw/numkit.hpp"

namespace eqsw {

inline double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Treatment probabilities this far outside (0,1) trigger warnings at
/// nuisance level and hard errors inside weighting estimators.
inline constexpr double kPositivityFloor = 1e-6;

/// Iterates whose infinity norm passes this bound are treated as diverging
/// (complete or quasi-complete separation).
inline constexpr double kSeparationNorm = 50.0;

/// Design definition for a point-treatment propensity model: which
/// covariate columns enter, plus an optional intercept.
struct LogisticSpec {
  std::vector<std::size_t> design_columns;
  bool include_intercept = true;

  std::size_t dim() const { return design_columns.size() + (include_intercept ? 1 : 0); }
};

/// Design for the pooled (longitudinal) treatment model. The model is fit
/// on at-risk person-times only: records strictly before any treatment.
/// With lag_treatment = true the previous treatment indicator enters the
/// design; on absorbing-treatment data that column is identically zero on
/// the at-risk set and the fit fails as rank-deficient.
struct PooledLogisticSpec {
  std::vector<std::size_t> covariate_columns;
  bool lag_treatment = false;
  bool include_intercept = true;

  std::size_t dim() const {
    return covariate_columns.size() + (include_intercept ? 1 : 0) + (lag_treatment ? 1 : 0);
  }
};

/// Result of a nuisance fit: the parameter, the per-unit score second
/// moment (Pn u2 u2' at theta_hat), its inverse scaled by 1/n as the
/// classical variance estimate, and a positivity summary over the fitted
/// probabilities.
struct NuisanceFit {
  Vector theta;
  Matrix fisher;
  Matrix var_theta;
  std::size_t n = 0;
  double min_prob = 1.0;
  double max_prob = 0.0;
  bool positivity_warning = false;
};

Vector logistic_design(const LogisticSpec& spec, const PointRow& row);
double logistic_prob(const LogisticSpec& spec, const Vector& theta, const PointRow& row);

/// Per-row score x * (a - p_theta(x)); the average over rows is the
/// estimating-equation residual the fit drives to zero.
std::vector<Vector> logistic_score(const LogisticSpec& spec, const Vector& theta,
                                   const std::vector<PointRow>& rows);

/// Maximum-likelihood fit. Throws Separation when iterates diverge past
/// kSeparationNorm and SingularMatrix on a rank-deficient design.
NuisanceFit fit_logistic(const LogisticSpec& spec, const std::vector<PointRow>& rows,
                         const SolverConfig& cfg = SolverConfig{1e-10, 200, 50, 1e-6});

/// True when person has no treatment at any time before k.
bool at_risk(const PersonHistory& person, int k);

Vector pooled_design(const PooledLogisticSpec& spec, const PersonHistory& person, int k);
double pooled_prob(const PooledLogisticSpec& spec, const Vector& theta,
                   const PersonHistory& person, int k);

/// Per-person score: the sum over that person's at-risk records of
/// x_k * (a_k - p_theta(x_k)). The independent unit is the person, so
/// cross moments against target estimating functions stay valid.
std::vector<Vector> pooled_logistic_score(const PooledLogisticSpec& spec, const Vector& theta,
                                          const std::vector<PersonHistory>& persons);

NuisanceFit fit_pooled_logistic(const PooledLogisticSpec& spec,
                                const std::vector<PersonHistory>& persons,
                                const SolverConfig& cfg = SolverConfig{1e-10, 200, 50, 1e-6});

}  // namespace eqsw
