// Copyright 2026 the eqsw authors
// SPDX-License-Identifier: Apache-2.0
#include "eqsw/variance.hpp"

#include <cmath>
#include <iostream>
#include <mutex>

#include <json.hpp>

#include "eqsw/errors.hpp"

namespace eqsw {

namespace {

Matrix sandwich(const Matrix& bread, const Matrix& filling, std::size_t n) {
  Matrix bi = inverse(bread);
  Matrix v = bi * filling * bi.transposed();
  v *= 1.0 / double(n);
  return v.symmetrized();
}

Matrix corrected_filling(const MomentEstimates& m) {
  if (m.cross.cols() == 0) return m.meat;
  Matrix fi = sym_inverse(m.fisher);
  return (m.meat - m.cross * fi * m.cross.transposed()).symmetrized();
}

double relative_gap(const Matrix& a, const Matrix& b) {
  // Gap between a and -b, relative to the larger operand scale.
  double denom = std::max(a.max_abs(), b.max_abs());
  if (denom == 0.0) return 0.0;
  return (a + b).max_abs() / denom;
}

nlohmann::json matrix_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

GapVerdict judge_gap(double gap) {
  if (gap < 0.05) return GapVerdict::kPass;
  if (gap < 0.2) return GapVerdict::kWarn;
  return GapVerdict::kFail;
}

Matrix sandwich_naive(const MomentEstimates& m) { return sandwich(m.bread, m.meat, m.n); }

Matrix sandwich_corrected_score(const MomentEstimates& m, bool theta_is_partial_score) {
  if (!theta_is_partial_score && m.cross.cols() > 0) {
    static std::once_flag warned;
    std::call_once(warned, [] {
      std::cerr << "warning: score-corrected variance requested for nuisance equations that are "
                   "not partial scores; the formula is generally invalid there, consider the "
                   "general estimator\n";
    });
  }
  return sandwich(m.bread, corrected_filling(m), m.n);
}

Matrix correction_term(const MomentEstimates& m) {
  if (m.cross.cols() == 0) return Matrix(m.bread.rows(), m.bread.rows());
  Matrix fi = sym_inverse(m.fisher);
  return sandwich(m.bread, (m.cross * fi * m.cross.transposed()).symmetrized(), m.n);
}

Matrix correction_term_from_nuisance_variance(const MomentEstimates& m,
                                              const Matrix& var_theta) {
  if (m.cross.cols() == 0) return Matrix(m.bread.rows(), m.bread.rows());
  // fisher = (var_theta * n)^-1, so fisher^-1 = var_theta * n.
  Matrix fi = var_theta.symmetrized();
  fi *= double(m.n);
  return sandwich(m.bread, (m.cross * fi * m.cross.transposed()).symmetrized(), m.n);
}

Matrix sandwich_general(const MomentEstimates& m, const ScoreRows& rows) {
  std::size_t p = m.bread.rows(), q = m.d_theta_u2.rows();
  Matrix d(p, q);
  if (q > 0) d = m.d_theta_u1 * inverse(m.d_theta_u2);
  MatrixMean filling(p, p);
  for (std::size_t i = 0; i < rows.u1.size(); ++i) {
    Vector r = rows.u1[i];
    if (q > 0) r -= d.apply(rows.u2[i]);
    filling.add(Matrix::outer(r, r));
  }
  return sandwich(m.bread, filling.mean().symmetrized(), m.n);
}

ProjectionResult projection_residuals(const MomentEstimates& m, const ScoreRows& rows) {
  std::size_t p = m.bread.rows(), q = m.fisher.rows();
  ProjectionResult out;
  out.a_hat = Matrix(p, q);
  if (q > 0) out.a_hat = m.cross * sym_inverse(m.fisher);
  out.u1_tilde.reserve(rows.u1.size());
  for (std::size_t i = 0; i < rows.u1.size(); ++i) {
    Vector r = rows.u1[i];
    if (q > 0) r -= out.a_hat.apply(rows.u2[i]);
    out.u1_tilde.push_back(std::move(r));
  }
  return out;
}

IdentityDiagnostics identity_diagnostics(const MomentEstimates& m) {
  IdentityDiagnostics d;
  if (m.fisher.rows() == 0) return d;
  d.applicable = true;
  d.ddtheta_gap = relative_gap(m.d_theta_u1, m.cross);
  d.fisher_gap = relative_gap(m.d_theta_u2, m.fisher);
  // Residual orthogonality: Pn u1~ u2^T = cross - (cross fisher^-1) fisher,
  // zero up to rounding by construction.
  Matrix leftover = m.cross - m.cross * sym_inverse(m.fisher) * m.fisher;
  d.orthogonality_gap = leftover.max_abs();
  return d;
}

VarianceReport variance_report(const MomentEstimates& m, const ScoreRows& rows,
                               bool theta_is_partial_score) {
  VarianceReport r;
  r.naive = sandwich_naive(m);
  r.corrected_score = sandwich_corrected_score(m, theta_is_partial_score);
  r.general = sandwich_general(m, rows);
  r.correction = correction_term(m);
  r.projection_coeff = projection_residuals(m, rows).a_hat;
  r.diagnostics = identity_diagnostics(m);
  r.n = m.n;
  // With no nuisance stage there is nothing to correct and the naive form
  // is already right, so the flag stays true.
  r.corrected_score_valid = theta_is_partial_score || m.cross.cols() == 0;
  return r;
}

std::string variance_report_json(const VarianceReport& report) {
  nlohmann::json j;
  j["naive"] = matrix_json(report.naive);
  j["corrected_score"] = matrix_json(report.corrected_score);
  j["general"] = matrix_json(report.general);
  j["correction"] = matrix_json(report.correction);
  nlohmann::json d;
  if (report.diagnostics.applicable) {
    d["ddtheta_gap"] = report.diagnostics.ddtheta_gap;
    d["fisher_gap"] = report.diagnostics.fisher_gap;
    d["orthogonality_gap"] = report.diagnostics.orthogonality_gap;
  } else {
    d["ddtheta_gap"] = nullptr;
    d["fisher_gap"] = nullptr;
    d["orthogonality_gap"] = nullptr;
  }
  j["diagnostics"] = d;
  j["n"] = report.n;
  return j.dump(2);
}

}  // namespace eqsw
