// Copyright 2026 the eqsw authors
// SPDX-License-Identifier: Apache-2.0
//
// Variance estimators for two-stage estimating-equation fits, all built
// from one set of empirical moments:
//
//   naive            bread^-1 meat bread^-T / n; ignores that theta was
//                    estimated, conservative when the nuisance equations
//                    are partial scores.
//   corrected_score  bread^-1 (meat - cross fisher^-1 cross^T) bread^-T / n;
//                    consistent when the nuisance equations are the partial
//                    score of a correctly specified model.
//   correction       the PSD block subtracted from naive to get
//                    corrected_score; exposed so the recipe can be applied
//                    to variance output of external software.
//   general          bread^-1 Pn[(u1 - D u2)(u1 - D u2)^T] bread^-T / n
//                    with D = (Pn du1/dtheta)(Pn du2/dtheta)^-1; consistent
//                    for any unbiased nuisance equations, score or not.
//
// Identity diagnostics quantify two expectation-level identities that hold
// under a correctly specified partial-score nuisance model, as relative
// gaps: Pn du1/dtheta vs -Pn u1 u2^T and Pn du2/dtheta vs -Pn u2 u2^T.
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "eqsw/eecore.hpp"
#include "eqsw/numkit.hpp"

namespace eqsw {

/// Relative gaps of the two moment identities plus the (numerically exact)
/// orthogonality of projected residuals against u2. Not applicable when
/// there is no nuisance model (q = 0); gaps are then zero with
/// applicable = false.
struct IdentityDiagnostics {
  double ddtheta_gap = 0.0;
  double fisher_gap = 0.0;
  double orthogonality_gap = 0.0;
  bool applicable = false;
};

/// Advisory reading of a relative gap at n >= 2000.
enum class GapVerdict { kPass, kWarn, kFail };
GapVerdict judge_gap(double gap);

/// All variance estimators side by side, with the projection coefficient
/// A_hat = cross fisher^-1 and the diagnostics.
struct VarianceReport {
  Matrix naive;
  Matrix corrected_score;
  Matrix general;
  Matrix correction;
  Matrix projection_coeff;
  IdentityDiagnostics diagnostics;
  std::size_t n = 0;
  /// False when the nuisance equations are not partial scores, in which
  /// case corrected_score is reported but generally invalid.
  bool corrected_score_valid = true;
};

Matrix sandwich_naive(const MomentEstimates& m);

/// When theta_is_partial_score is false a warning is written to stderr:
/// the formula's derivation needs score-type nuisance equations.
Matrix sandwich_corrected_score(const MomentEstimates& m, bool theta_is_partial_score = true);

Matrix correction_term(const MomentEstimates& m);

/// Same correction with the nuisance second moment supplied indirectly as
/// a variance estimate of theta_hat (fisher := (var_theta * n)^-1), the
/// form available from standard software output.
Matrix correction_term_from_nuisance_variance(const MomentEstimates& m,
                                              const Matrix& var_theta);

Matrix sandwich_general(const MomentEstimates& m, const ScoreRows& rows);

/// A_hat = cross fisher^-1 and the projected residuals u1_i - A_hat u2_i.
struct ProjectionResult {
  Matrix a_hat;
  std::vector<Vector> u1_tilde;
};
ProjectionResult projection_residuals(const MomentEstimates& m, const ScoreRows& rows);

IdentityDiagnostics identity_diagnostics(const MomentEstimates& m);

/// Assembles the full report. Emits the corrected-score warning through
/// sandwich_corrected_score when theta_is_partial_score is false.
VarianceReport variance_report(const MomentEstimates& m, const ScoreRows& rows,
                               bool theta_is_partial_score);

/// JSON form: {"naive":[[..]],"corrected_score":[[..]],"general":[[..]],
/// "correction":[[..]],"diagnostics":{"ddtheta_gap":..,"fisher_gap":..,
/// "orthogonality_gap":..},"n":..} with nulls for non-applicable gaps.
std::string variance_report_json(const VarianceReport& report);

}  // namespace eqsw
