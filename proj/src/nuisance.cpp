// Copyright 2026 the eqsw authors
// SPDX-License-Identifier: Apache-2.0
#include "eqsw/nuisance.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "eqsw/errors.hpp"

namespace eqsw {

namespace {

void check_columns(const std::vector<std::size_t>& cols, std::size_t have,
                   const std::string& what) {
  for (std::size_t c : cols)
    if (c >= have)
      throw ConfigError(what + ": column index " + std::to_string(c) + " out of range (have " +
                        std::to_string(have) + " covariates)");
}

/// Shared Newton driver over a generic design-row view. rows(i) yields the
/// design vector and the response for unit i of the score average.
struct DesignRow {
  Vector x;
  double a = 0.0;
};

NuisanceFit fit_score_model(const std::vector<DesignRow>& rows, std::size_t dim,
                            std::size_t n_units,
                            const std::function<std::vector<Vector>(const Vector&)>& unit_scores,
                            const SolverConfig& cfg, const std::string& context) {
  if (rows.size() < dim) throw ConfigError(context + ": fewer rows than parameters");
  auto residual = [&rows](const Vector& theta) {
    VectorMean acc(theta.size());
    for (const DesignRow& r : rows) {
      Vector v = r.x;
      v *= (r.a - expit(theta.dot(r.x)));
      acc.add(v);
    }
    return acc.mean();
  };
  auto jacobian = [&rows](const Vector& theta) {
    MatrixMean acc(theta.size(), theta.size());
    for (const DesignRow& r : rows) {
      double p = expit(theta.dot(r.x));
      Matrix j = Matrix::outer(r.x, r.x);
      j *= -p * (1.0 - p);
      acc.add(j);
    }
    return acc.mean();
  };
  auto diverging = [&context](const Vector& theta) {
    if (theta.inf_norm() > kSeparationNorm)
      throw Separation(context + ": parameter norm passed " + std::to_string(kSeparationNorm) +
                       ", data look separated");
  };

  Vector theta;
  try {
    theta = solve_root(residual, jacobian, Vector(dim), cfg, context, diverging);
  } catch (const SingularJacobian& e) {
    // A singular information matrix at interior iterates means a
    // rank-deficient design.
    throw SingularMatrix(e.what());
  }

  NuisanceFit fit;
  fit.theta = theta;
  fit.n = n_units;
  for (const DesignRow& r : rows) {
    double p = expit(theta.dot(r.x));
    fit.min_prob = std::min(fit.min_prob, p);
    fit.max_prob = std::max(fit.max_prob, p);
  }
  fit.positivity_warning =
      fit.min_prob < kPositivityFloor || fit.max_prob > 1.0 - kPositivityFloor;

  MatrixMean fisher(dim, dim);
  for (const Vector& s : unit_scores(theta)) fisher.add(Matrix::outer(s, s));
  fit.fisher = fisher.mean().symmetrized();
  fit.var_theta = sym_inverse(fit.fisher);
  fit.var_theta *= 1.0 / double(n_units);
  return fit;
}

}  // namespace

Vector logistic_design(const LogisticSpec& spec, const PointRow& row) {
  check_columns(spec.design_columns, row.l.size(), "logistic model");
  Vector x(spec.dim());
  std::size_t j = 0;
  if (spec.include_intercept) x[j++] = 1.0;
  for (std::size_t c : spec.design_columns) x[j++] = row.l[c];
  return x;
}

double logistic_prob(const LogisticSpec& spec, const Vector& theta, const PointRow& row) {
  Vector x = logistic_design(spec, row);
  if (theta.size() != x.size()) throw ConfigError("logistic model: theta dimension mismatch");
  return expit(theta.dot(x));
}

std::vector<Vector> logistic_score(const LogisticSpec& spec, const Vector& theta,
                                   const std::vector<PointRow>& rows) {
  std::vector<Vector> scores;
  scores.reserve(rows.size());
  for (const PointRow& r : rows) {
    Vector x = logistic_design(spec, r);
    if (theta.size() != x.size()) throw ConfigError("logistic model: theta dimension mismatch");
    double p = expit(theta.dot(x));
    x *= (r.a - p);
    scores.push_back(std::move(x));
  }
  return scores;
}

NuisanceFit fit_logistic(const LogisticSpec& spec, const std::vector<PointRow>& rows,
                         const SolverConfig& cfg) {
  validate_point(rows);
  std::vector<DesignRow> design;
  design.reserve(rows.size());
  for (const PointRow& r : rows) design.push_back({logistic_design(spec, r), r.a});
  auto unit_scores = [&spec, &rows](const Vector& theta) {
    return logistic_score(spec, theta, rows);
  };
  return fit_score_model(design, spec.dim(), rows.size(), unit_scores, cfg, "fit_logistic");
}

bool at_risk(const PersonHistory& person, int k) { return k <= person.t_start; }

Vector pooled_design(const PooledLogisticSpec& spec, const PersonHistory& person, int k) {
  const TimePoint& rec = person.records.at(std::size_t(k));
  check_columns(spec.covariate_columns, rec.l.size(), "pooled logistic model");
  Vector x(spec.dim());
  std::size_t j = 0;
  if (spec.include_intercept) x[j++] = 1.0;
  for (std::size_t c : spec.covariate_columns) x[j++] = rec.l[c];
  if (spec.lag_treatment) x[j++] = (k > 0) ? person.records[std::size_t(k) - 1].a : 0.0;
  return x;
}

double pooled_prob(const PooledLogisticSpec& spec, const Vector& theta,
                   const PersonHistory& person, int k) {
  Vector x = pooled_design(spec, person, k);
  if (theta.size() != x.size())
    throw ConfigError("pooled logistic model: theta dimension mismatch");
  return expit(theta.dot(x));
}

std::vector<Vector> pooled_logistic_score(const PooledLogisticSpec& spec, const Vector& theta,
                                          const std::vector<PersonHistory>& persons) {
  validate_long(persons);
  std::vector<Vector> scores;
  scores.reserve(persons.size());
  for (const PersonHistory& person : persons) {
    Vector s(spec.dim());
    for (const TimePoint& rec : person.records) {
      if (!at_risk(person, rec.k)) continue;
      Vector x = pooled_design(spec, person, rec.k);
      if (theta.size() != x.size())
        throw ConfigError("pooled logistic model: theta dimension mismatch");
      x *= (rec.a - expit(theta.dot(x)));
      s += x;
    }
    scores.push_back(std::move(s));
  }
  return scores;
}

NuisanceFit fit_pooled_logistic(const PooledLogisticSpec& spec,
                                const std::vector<PersonHistory>& persons,
                                const SolverConfig& cfg) {
  validate_long(persons);
  std::vector<DesignRow> design;
  for (const PersonHistory& person : persons)
    for (const TimePoint& rec : person.records)
      if (at_risk(person, rec.k)) design.push_back({pooled_design(spec, person, rec.k), rec.a});
  auto unit_scores = [&spec, &persons](const Vector& theta) {
    return pooled_logistic_score(spec, theta, persons);
  };
  return fit_score_model(design, spec.dim(), persons.size(), unit_scores, cfg,
                         "fit_pooled_logistic");
}

}  // namespace eqsw
