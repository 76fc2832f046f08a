// Copyright 2026 the eqsw authors
// SPDX-License-Identifier: Apache-2.0
//
// Builtin target estimating functions:
//   iptw  inverse-probability-weighted means of both treatment arms,
//         psi = (mean under treatment, mean under control);
//   aipw  the augmented (doubly robust) version with linear outcome
//         models plugged in as fixed coefficients;
//   snmm  g-estimation of a coarse structural nested mean model for an
//         absorbing treatment in longitudinal data.
//
// Every builder returns an EstimatingFunctionSet with analytic Jacobian
// blocks filled in. The set holds references to the data container passed
// in, which must outlive it. The known_theta variants evaluate the same
// target equations with the nuisance parameter frozen at a given value
// (dim_theta = 0), used for estimated-vs-known comparisons in simulation.
#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "eqsw/data.hpp"
#include "eqsw/eecore.hpp"
#include "eqsw/nuisance.hpp"
#include "eqsw/numkit.hpp"

namespace eqsw {

/// Throws Positivity unless p stays in [kPositivityFloor, 1 - kPositivityFloor].
void require_positivity(double p);

/// Per-row inverse-weighted arm-mean equations at propensity p:
/// ( a(y - psi1)/p, (1-a)(y - psi0)/(1-p) ).
Vector iptw_u1(const Vector& psi, double p, const PointRow& row);

/// Augmented version with outcome-model means m1, m0 for the two arms:
/// component 1 is a y / p - (a - p)/p * m1 - psi1, component 0 the mirror
/// image. Unbiased if either the propensity or the outcome model is right.
Vector aipw_u1(const Vector& psi, double p, double m1, double m0, const PointRow& row);

/// Per-arm linear least-squares outcome models on design (1, l[columns]).
struct OutcomeModels {
  Vector xi_treated;
  Vector xi_control;
  std::vector<std::size_t> columns;
};

OutcomeModels fit_outcome_models(const std::vector<PointRow>& rows,
                                 const std::vector<std::size_t>& columns);
double outcome_mean(const OutcomeModels& models, bool treated, const PointRow& row);

EstimatingFunctionSet make_iptw_set(const std::vector<PointRow>& rows, const LogisticSpec& model,
                                    std::optional<Vector> known_theta = {});

EstimatingFunctionSet make_aipw_set(const std::vector<PointRow>& rows, const LogisticSpec& model,
                                    const OutcomeModels& outcome,
                                    std::optional<Vector> known_theta = {});

/// Treatment-effect contrast psi1 - psi0 with variance c' cov c, c = (1,-1),
/// from the joint covariance of the two arm means.
struct AteContrast {
  double estimate = 0.0;
  double variance = 0.0;
};
AteContrast ate_contrast(const Vector& psi, const Matrix& cov);

/// Effect-curve basis for the coarse SNMM: gamma(t, k) is the mean effect
/// on the outcome at time k of starting treatment at time t (zero for
/// k <= t). kDuration uses psi1 * (k - t); kDurationQuadratic uses
/// (psi1 + psi2 t + psi3 t^2) * (k - t).
enum class GammaBasis { kDuration, kDurationQuadratic };

struct SnmmSpec {
  GammaBasis basis = GammaBasis::kDurationQuadratic;
  /// Index functions q(m, k, person) weighting each (decision time m,
  /// outcome time k > m) pair, of length dim_psi. The default mirrors the
  /// gamma basis: (1, m, m^2) * (k - m), truncated to dim_psi components.
  std::function<Vector(int, int, const PersonHistory&)> q_fn;
  /// Expected decision horizon K; -1 accepts whatever the data carry.
  int horizon = -1;

  std::size_t dim_psi() const { return basis == GammaBasis::kDuration ? 1 : 3; }
};

double snmm_gamma(const SnmmSpec& spec, const Vector& psi, int t, int k);

/// Treatment-free outcome reconstruction: y_k minus the modeled effect of
/// the person's actual treatment start, y_k unchanged for k <= t_start.
double snmm_h(const SnmmSpec& spec, const Vector& psi, const PersonHistory& person, int k);

/// The default index functions for the spec's basis.
Vector snmm_default_q(const SnmmSpec& spec, int m, int k);

/// One person's g-estimation equation: sum over at-risk decision times m
/// of (a_m - p(m)) * sum_{k>m} q(m,k) h(k), with p(m) supplied per time.
Vector snmm_u1(const SnmmSpec& spec, const Vector& psi, const PersonHistory& person,
               const std::function<double(int)>& prob_at);

EstimatingFunctionSet make_snmm_set(const std::vector<PersonHistory>& persons,
                                    const SnmmSpec& spec, const PooledLogisticSpec& model,
                                    std::optional<Vector> known_theta = {});

}  // namespace eqsw
