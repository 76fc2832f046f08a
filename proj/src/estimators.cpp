// Copyright 2026 the eqsw authors
// SPDX-License-Identifier: Apache-2.0
#include "eqsw/estimators.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "eqsw/errors.hpp"

namespace eqsw {

void require_positivity(double p) {
  if (!(p >= kPositivityFloor && p <= 1.0 - kPositivityFloor))
    throw Positivity("treatment probability " + std::to_string(p) + " outside [" +
                     std::to_string(kPositivityFloor) + ", 1 - " +
                     std::to_string(kPositivityFloor) + "]");
}

Vector iptw_u1(const Vector& psi, double p, const PointRow& row) {
  require_positivity(p);
  return Vector{row.a * (row.y - psi[0]) / p, (1.0 - row.a) * (row.y - psi[1]) / (1.0 - p)};
}

Vector aipw_u1(const Vector& psi, double p, double m1, double m0, const PointRow& row) {
  require_positivity(p);
  double c1 = row.a * row.y / p - (row.a - p) / p * m1 - psi[0];
  double c0 = (1.0 - row.a) * row.y / (1.0 - p) + (row.a - p) / (1.0 - p) * m0 - psi[1];
  return Vector{c1, c0};
}

OutcomeModels fit_outcome_models(const std::vector<PointRow>& rows,
                                 const std::vector<std::size_t>& columns) {
  validate_point(rows);
  std::size_t d = columns.size() + 1;
  OutcomeModels out;
  out.columns = columns;
  for (int arm = 0; arm < 2; ++arm) {
    double want = arm == 0 ? 1.0 : 0.0;
    Matrix xtx(d, d);
    Vector xty(d);
    std::size_t count = 0;
    for (const PointRow& r : rows) {
      if (r.a != want) continue;
      Vector x(d);
      x[0] = 1.0;
      for (std::size_t j = 0; j < columns.size(); ++j) {
        if (columns[j] >= r.l.size())
          throw ConfigError("outcome model: column index out of range");
        x[j + 1] = r.l[columns[j]];
      }
      xtx += Matrix::outer(x, x);
      for (std::size_t j = 0; j < d; ++j) xty[j] += x[j] * r.y;
      ++count;
    }
    if (count < d)
      throw ConfigError("outcome model: arm " + std::to_string(int(want)) + " has " +
                        std::to_string(count) + " rows for " + std::to_string(d) +
                        " coefficients");
    Vector xi = solve_linear(xtx, xty);
    (arm == 0 ? out.xi_treated : out.xi_control) = std::move(xi);
  }
  return out;
}

double outcome_mean(const OutcomeModels& models, bool treated, const PointRow& row) {
  const Vector& xi = treated ? models.xi_treated : models.xi_control;
  double v = xi[0];
  for (std::size_t j = 0; j < models.columns.size(); ++j) v += xi[j + 1] * row.l[models.columns[j]];
  return v;
}

namespace {

/// Shared logistic plumbing for the point-treatment builders. With a known
/// theta the design/probability close over it and dim_theta becomes 0.
struct PropensityView {
  const LogisticSpec* model;
  std::optional<Vector> fixed;

  double prob(const Vector& theta, const PointRow& row) const {
    return logistic_prob(*model, fixed ? *fixed : theta, row);
  }
};

void fill_logistic_u2(EstimatingFunctionSet& fns, const std::vector<PointRow>& rows,
                      const LogisticSpec& model) {
  fns.u2 = [&rows, &model](std::size_t i, const Vector& theta) {
    Vector x = logistic_design(model, rows[i]);
    double p = expit(theta.dot(x));
    x *= (rows[i].a - p);
    return x;
  };
  fns.d_u2_dtheta = [&rows, &model](std::size_t i, const Vector& theta) {
    Vector x = logistic_design(model, rows[i]);
    double p = expit(theta.dot(x));
    Matrix j = Matrix::outer(x, x);
    j *= -p * (1.0 - p);
    return j;
  };
  fns.theta_is_partial_score = true;
}

}  // namespace

EstimatingFunctionSet make_iptw_set(const std::vector<PointRow>& rows, const LogisticSpec& model,
                                    std::optional<Vector> known_theta) {
  validate_point(rows);
  EstimatingFunctionSet fns;
  fns.dim_psi = 2;
  fns.n_units = rows.size();
  PropensityView view{&model, std::move(known_theta)};

  fns.u1 = [&rows, view](std::size_t i, const Vector& psi, const Vector& theta) {
    return iptw_u1(psi, view.prob(theta, rows[i]), rows[i]);
  };
  fns.d_u1_dpsi = [&rows, view](std::size_t i, const Vector&, const Vector& theta) {
    double p = view.prob(theta, rows[i]);
    Matrix j(2, 2);
    j(0, 0) = -rows[i].a / p;
    j(1, 1) = -(1.0 - rows[i].a) / (1.0 - p);
    return j;
  };
  if (!view.fixed) {
    fns.dim_theta = model.dim();
    fill_logistic_u2(fns, rows, model);
    fns.d_u1_dtheta = [&rows, &model](std::size_t i, const Vector& psi, const Vector& theta) {
      const PointRow& r = rows[i];
      Vector x = logistic_design(model, r);
      double p = expit(theta.dot(x));
      Vector u = iptw_u1(psi, p, r);
      // d/dtheta of the weights: row 1 scales by -(1-p), row 2 by +p.
      Vector coeff{-u[0] * (1.0 - p), u[1] * p};
      return Matrix::outer(coeff, x);
    };
  }
  return fns;
}

EstimatingFunctionSet make_aipw_set(const std::vector<PointRow>& rows, const LogisticSpec& model,
                                    const OutcomeModels& outcome,
                                    std::optional<Vector> known_theta) {
  validate_point(rows);
  EstimatingFunctionSet fns;
  fns.dim_psi = 2;
  fns.n_units = rows.size();
  PropensityView view{&model, std::move(known_theta)};

  fns.u1 = [&rows, &outcome, view](std::size_t i, const Vector& psi, const Vector& theta) {
    const PointRow& r = rows[i];
    return aipw_u1(psi, view.prob(theta, r), outcome_mean(outcome, true, r),
                   outcome_mean(outcome, false, r), r);
  };
  fns.d_u1_dpsi = [](std::size_t, const Vector&, const Vector&) {
    Matrix j(2, 2);
    j(0, 0) = -1.0;
    j(1, 1) = -1.0;
    return j;
  };
  if (!view.fixed) {
    fns.dim_theta = model.dim();
    fill_logistic_u2(fns, rows, model);
    fns.d_u1_dtheta = [&rows, &model, &outcome](std::size_t i, const Vector&,
                                                const Vector& theta) {
      const PointRow& r = rows[i];
      Vector x = logistic_design(model, r);
      double p = expit(theta.dot(x));
      double m1 = outcome_mean(outcome, true, r);
      double m0 = outcome_mean(outcome, false, r);
      Vector coeff{-r.a * (r.y - m1) * (1.0 - p) / p,
                   (1.0 - r.a) * (r.y - m0) * p / (1.0 - p)};
      return Matrix::outer(coeff, x);
    };
  }
  return fns;
}

AteContrast ate_contrast(const Vector& psi, const Matrix& cov) {
  if (psi.size() != 2 || cov.rows() != 2 || cov.cols() != 2)
    throw ConfigError("ate_contrast expects two arm means and their 2x2 covariance");
  AteContrast c;
  c.estimate = psi[0] - psi[1];
  c.variance = cov(0, 0) + cov(1, 1) - 2.0 * cov(0, 1);
  return c;
}

namespace {

/// Gradient of gamma in psi; zero vector for k <= t.
Vector gamma_gradient(const SnmmSpec& spec, int t, int k) {
  Vector g(spec.dim_psi());
  if (k <= t) return g;
  double dur = double(k - t);
  g[0] = dur;
  if (spec.basis == GammaBasis::kDurationQuadratic) {
    g[1] = dur * double(t);
    g[2] = dur * double(t) * double(t);
  }
  return g;
}

Vector q_value(const SnmmSpec& spec, int m, int k, const PersonHistory& person) {
  Vector q = spec.q_fn ? spec.q_fn(m, k, person) : snmm_default_q(spec, m, k);
  if (q.size() != spec.dim_psi())
    throw ConfigError("q-function returned " + std::to_string(q.size()) + " components for " +
                      std::to_string(spec.dim_psi()) + " parameters");
  return q;
}

void check_snmm_data(const SnmmSpec& spec, const std::vector<PersonHistory>& persons) {
  validate_long(persons);
  for (const PersonHistory& p : persons) {
    if (spec.horizon >= 0 && p.horizon() != spec.horizon)
      throw ConfigError("person " + p.id + " has horizon " + std::to_string(p.horizon()) +
                        ", spec expects " + std::to_string(spec.horizon));
    for (int m = 0; m <= p.horizon(); ++m)
      for (int k = m + 1; k <= p.horizon() + 1; ++k)
        if (q_value(spec, m, k, p).inf_norm() >= 1e6)
          throw ConfigError("q-function unbounded at person " + p.id + ", m=" +
                            std::to_string(m) + ", k=" + std::to_string(k));
  }
}

}  // namespace

double snmm_gamma(const SnmmSpec& spec, const Vector& psi, int t, int k) {
  if (k <= t) return 0.0;
  double dur = double(k - t);
  if (spec.basis == GammaBasis::kDuration) return psi[0] * dur;
  return (psi[0] + psi[1] * double(t) + psi[2] * double(t) * double(t)) * dur;
}

double snmm_h(const SnmmSpec& spec, const Vector& psi, const PersonHistory& person, int k) {
  double y = person.outcomes.at(std::size_t(k));
  if (!person.treated() || k <= person.t_start) return y;
  return y - snmm_gamma(spec, psi, person.t_start, k);
}

Vector snmm_default_q(const SnmmSpec& spec, int m, int k) {
  Vector q(spec.dim_psi());
  if (k <= m) return q;
  double dur = double(k - m);
  q[0] = dur;
  if (spec.basis == GammaBasis::kDurationQuadratic) {
    q[1] = dur * double(m);
    q[2] = dur * double(m) * double(m);
  }
  return q;
}

Vector snmm_u1(const SnmmSpec& spec, const Vector& psi, const PersonHistory& person,
               const std::function<double(int)>& prob_at) {
  Vector u(spec.dim_psi());
  for (int m = 0; m <= person.horizon(); ++m) {
    if (!at_risk(person, m)) break;  // treatment is absorbing
    double p = prob_at(m);
    require_positivity(p);
    double resid = person.records[std::size_t(m)].a - p;
    Vector inner(spec.dim_psi());
    for (int k = m + 1; k <= person.horizon() + 1; ++k) {
      Vector q = q_value(spec, m, k, person);
      q *= snmm_h(spec, psi, person, k);
      inner += q;
    }
    inner *= resid;
    u += inner;
  }
  return u;
}

EstimatingFunctionSet make_snmm_set(const std::vector<PersonHistory>& persons,
                                    const SnmmSpec& spec, const PooledLogisticSpec& model,
                                    std::optional<Vector> known_theta) {
  check_snmm_data(spec, persons);
  EstimatingFunctionSet fns;
  fns.dim_psi = spec.dim_psi();
  fns.n_units = persons.size();

  auto prob_fn = [&model, fixed = known_theta](const PersonHistory& person,
                                               const Vector& theta) {
    return [&model, &person, th = fixed ? *fixed : theta](int m) {
      return pooled_prob(model, th, person, m);
    };
  };

  fns.u1 = [&persons, spec, prob_fn](std::size_t i, const Vector& psi, const Vector& theta) {
    return snmm_u1(spec, psi, persons[i], prob_fn(persons[i], theta));
  };
  fns.d_u1_dpsi = [&persons, spec, prob_fn](std::size_t i, const Vector&, const Vector& theta) {
    const PersonHistory& person = persons[i];
    auto prob = prob_fn(person, theta);
    Matrix j(spec.dim_psi(), spec.dim_psi());
    for (int m = 0; m <= person.horizon(); ++m) {
      if (!at_risk(person, m)) break;
      double resid = person.records[std::size_t(m)].a - prob(m);
      for (int k = m + 1; k <= person.horizon() + 1; ++k) {
        Vector q = q_value(spec, m, k, person);
        Vector g = gamma_gradient(spec, person.t_start, k);
        Matrix block = Matrix::outer(q, g);
        block *= -resid;  // dH/dpsi = -gamma gradient
        j += block;
      }
    }
    return j;
  };

  if (!known_theta) {
    fns.dim_theta = model.dim();
    fns.theta_is_partial_score = true;
    fns.u2 = [&persons, &model](std::size_t i, const Vector& theta) {
      Vector s(model.dim());
      const PersonHistory& person = persons[i];
      for (const TimePoint& rec : person.records) {
        if (!at_risk(person, rec.k)) continue;
        Vector x = pooled_design(model, person, rec.k);
        x *= (rec.a - expit(theta.dot(x)));
        s += x;
      }
      return s;
    };
    fns.d_u2_dtheta = [&persons, &model](std::size_t i, const Vector& theta) {
      Matrix j(model.dim(), model.dim());
      const PersonHistory& person = persons[i];
      for (const TimePoint& rec : person.records) {
        if (!at_risk(person, rec.k)) continue;
        Vector x = pooled_design(model, person, rec.k);
        double p = expit(theta.dot(x));
        Matrix block = Matrix::outer(x, x);
        block *= -p * (1.0 - p);
        j += block;
      }
      return j;
    };
    fns.d_u1_dtheta = [&persons, spec, &model](std::size_t i, const Vector& psi,
                                               const Vector& theta) {
      const PersonHistory& person = persons[i];
      Matrix j(spec.dim_psi(), model.dim());
      for (int m = 0; m <= person.horizon(); ++m) {
        if (!at_risk(person, m)) break;
        Vector x = pooled_design(model, person, m);
        double p = expit(theta.dot(x));
        Vector inner(spec.dim_psi());
        for (int k = m + 1; k <= person.horizon() + 1; ++k) {
          Vector q = q_value(spec, m, k, person);
          q *= snmm_h(spec, psi, person, k);
          inner += q;
        }
        // d(a_m - p_m)/dtheta = -p(1-p) x
        inner *= -p * (1.0 - p);
        j += Matrix::outer(inner, x);
      }
      return j;
    };
  }
  return fns;
}

}  // namespace eqsw
