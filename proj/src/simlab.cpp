// Copyright 2026 the eqsw authors
// SPDX-License-Identifier: Apache-2.0
#include "eqsw/simlab.hpp"

#include <algorithm>
#include <cmath>

#include "eqsw/estimators.hpp"
#include "eqsw/nuisance.hpp"

namespace eqsw {

namespace {

double clamp25(double x) { return std::clamp(x, -2.5, 2.5); }

ReplicationRecord record_from_fit(const EstimatingFunctionSet& fns, const ParamVector& fit) {
  MomentEstimates m = empirical_moments(fns, fit);
  ScoreRows rows = score_rows(fns, fit);
  VarianceReport report = variance_report(m, rows, fns.theta_is_partial_score);
  ReplicationRecord rec;
  rec.psi = fit.psi;
  rec.naive = std::move(report.naive);
  rec.corrected_score = std::move(report.corrected_score);
  rec.general = std::move(report.general);
  rec.diagnostics = report.diagnostics;
  return rec;
}

ReplicationRecord fit_and_record(const EstimatingFunctionSet& fns) {
  ParamVector fit = solve_profile(fns, default_init(fns));
  return record_from_fit(fns, fit);
}

}  // namespace

PointTruth point_truth(const PointScenario& sc) {
  PointTruth t;
  t.psi = Vector{1.0 + sc.effect, 1.0};
  t.ate = sc.effect;
  t.theta = Vector{0.0, 0.5 * sc.confounding, -0.4 * sc.confounding};
  t.xi_treated = Vector{1.0 + sc.effect, 1.0, 1.0};
  t.xi_control = Vector{1.0, 1.0, 1.0};
  return t;
}

std::vector<PointRow> draw_point(const PointScenario& sc, Rng& rng) {
  std::vector<PointRow> rows;
  rows.reserve(sc.n);
  for (std::size_t i = 0; i < sc.n; ++i) {
    double l1 = clamp25(rng.normal());
    double l2 = clamp25(rng.normal());
    double p = expit(sc.confounding * (0.5 * l1 - 0.4 * l2));
    PointRow r;
    r.a = rng.bernoulli(p) ? 1.0 : 0.0;
    r.y = 1.0 + l1 + l2 + rng.normal() + (r.a == 1.0 ? sc.effect : 0.0);
    r.l = Vector{l1, l2};
    rows.push_back(std::move(r));
  }
  return rows;
}

LongTruth long_truth() {
  LongTruth t;
  t.psi = Vector{1.0, -0.2, 0.0};
  t.theta = Vector{-1.1, 0.5};
  return t;
}

std::vector<PersonHistory> draw_longitudinal(const LongScenario& sc, Rng& rng) {
  if (sc.horizon < 1) throw ConfigError("longitudinal scenario needs horizon >= 1");
  if (sc.horizon > 10) throw ConfigError("longitudinal scenario supports horizon <= 10");
  std::vector<PersonHistory> persons;
  persons.reserve(sc.n);
  int kk = sc.horizon;
  for (std::size_t i = 0; i < sc.n; ++i) {
    double b = clamp25(rng.normal());
    PersonHistory person;
    person.id = "s" + std::to_string(i + 1);
    double l = 0.0;
    bool on = false;
    int started = kNeverTreated;
    for (int k = 0; k <= kk; ++k) {
      l = k == 0 ? clamp25(0.6 * b + 0.5 * rng.normal())
                 : clamp25(0.5 * l + 0.4 * b + 0.5 * rng.normal());
      if (!on && rng.bernoulli(expit(-1.1 + 0.5 * l))) {
        on = true;
        started = k;
      }
      TimePoint tp;
      tp.k = k;
      tp.a = on ? 1.0 : 0.0;
      tp.l = Vector{l};
      person.records.push_back(std::move(tp));
    }
    person.t_start = started;
    for (int k = 0; k <= kk + 1; ++k) {
      double cov = person.records[std::size_t(std::min(k, kk))].l[0];
      double base = 0.5 + 0.3 * k + 0.7 * b + 0.4 * cov + 0.4 * rng.normal();
      double lift =
          (started != kNeverTreated && k > started) ? (1.0 - 0.2 * started) * (k - started) : 0.0;
      person.outcomes.push_back(base + lift);
    }
    persons.push_back(std::move(person));
  }
  return persons;
}

MomTruth mom_truth() {
  MomTruth t;
  t.theta = std::exp(0.125);
  t.psi = 1.0 + std::exp(0.375);
  return t;
}

std::vector<PointRow> draw_mom(const MomScenario& sc, Rng& rng) {
  std::vector<PointRow> rows;
  rows.reserve(sc.n);
  for (std::size_t i = 0; i < sc.n; ++i) {
    double w = std::exp(0.5 * rng.normal());
    PointRow r;
    r.y = 1.0 + w + 0.5 * rng.normal();
    r.a = 0.0;
    r.l = Vector{w};
    rows.push_back(std::move(r));
  }
  return rows;
}

EstimatingFunctionSet make_mom_ratio_set(const std::vector<PointRow>& rows) {
  validate_point(rows);
  EstimatingFunctionSet fns;
  fns.dim_psi = 1;
  fns.dim_theta = 1;
  fns.n_units = rows.size();
  fns.theta_is_partial_score = false;

  fns.u1 = [&rows](std::size_t i, const Vector& psi, const Vector& theta) {
    if (theta[0] == 0.0) throw NonFiniteEvaluation("ratio equation at theta = 0");
    return Vector{rows[i].l[0] / theta[0] * rows[i].y - psi[0]};
  };
  fns.u2 = [&rows](std::size_t i, const Vector& theta) {
    return Vector{rows[i].l[0] - theta[0]};
  };
  fns.d_u1_dpsi = [](std::size_t, const Vector&, const Vector&) {
    return Matrix::from_rows({{-1.0}});
  };
  fns.d_u1_dtheta = [&rows](std::size_t i, const Vector&, const Vector& theta) {
    return Matrix::from_rows({{-rows[i].l[0] * rows[i].y / (theta[0] * theta[0])}});
  };
  fns.d_u2_dtheta = [](std::size_t, const Vector&) { return Matrix::from_rows({{-1.0}}); };
  return fns;
}

ReplicationRecord replicate_point_iptw(const PointScenario& sc, Rng& rng) {
  std::vector<PointRow> rows = draw_point(sc, rng);
  LogisticSpec model{{0, 1}, true};
  EstimatingFunctionSet fns = make_iptw_set(rows, model);
  return fit_and_record(fns);
}

ReplicationRecord replicate_point_aipw(const PointScenario& sc, Rng& rng) {
  std::vector<PointRow> rows = draw_point(sc, rng);
  LogisticSpec model{{0, 1}, true};
  OutcomeModels outcome = fit_outcome_models(rows, {0, 1});
  EstimatingFunctionSet fns = make_aipw_set(rows, model, outcome);
  return fit_and_record(fns);
}

ReplicationRecord replicate_long_snmm(const LongScenario& sc, Rng& rng) {
  std::vector<PersonHistory> persons = draw_longitudinal(sc, rng);
  SnmmSpec spec;
  spec.horizon = sc.horizon;
  PooledLogisticSpec model{{0}, false, true};
  EstimatingFunctionSet fns = make_snmm_set(persons, spec, model);
  return fit_and_record(fns);
}

ReplicationRecord replicate_mom(const MomScenario& sc, Rng& rng) {
  std::vector<PointRow> rows = draw_mom(sc, rng);
  EstimatingFunctionSet fns = make_mom_ratio_set(rows);
  return fit_and_record(fns);
}

ScenarioSummary summarize_records(const std::vector<ReplicationRecord>& records,
                                  std::size_t attempted, std::size_t failed, const Vector& truth,
                                  double level) {
  if (records.empty()) throw ConfigError("scenario summary needs at least one replication");
  std::size_t p = truth.size();
  for (const ReplicationRecord& r : records)
    if (r.psi.size() != p || r.naive.rows() != p)
      throw ConfigError("replication records do not match the truth dimension");

  ScenarioSummary s;
  s.attempted = attempted;
  s.failed = failed;
  s.truth = truth;

  Vector mean_psi(p);
  for (std::size_t j = 0; j < p; ++j) {
    std::vector<double> col;
    col.reserve(records.size());
    for (const ReplicationRecord& r : records) col.push_back(r.psi[j]);
    mean_psi[j] = sample_mean(col);
  }
  s.bias = mean_psi - truth;

  Matrix cov(p, p);
  if (records.size() >= 2) {
    for (const ReplicationRecord& r : records) {
      Vector d = r.psi - mean_psi;
      cov += Matrix::outer(d, d);
    }
    cov *= 1.0 / double(records.size() - 1);
  }
  s.empirical_variance = cov.symmetrized();

  MatrixMean mn(p, p), mc(p, p), mg(p, p);
  for (const ReplicationRecord& r : records) {
    mn.add(r.naive);
    mc.add(r.corrected_score);
    mg.add(r.general);
  }
  s.mean_naive = mn.mean();
  s.mean_corrected_score = mc.mean();
  s.mean_general = mg.mean();

  auto coverage_of = [&](const std::function<const Matrix&(const ReplicationRecord&)>& pick) {
    CoverageSummary c;
    c.rate = Vector(p);
    c.se = Vector(p);
    for (std::size_t j = 0; j < p; ++j) {
      std::vector<double> est, se;
      est.reserve(records.size());
      se.reserve(records.size());
      for (const ReplicationRecord& r : records) {
        est.push_back(r.psi[j]);
        se.push_back(std::sqrt(std::max(0.0, pick(r)(j, j))));
      }
      double rate = coverage_rate(est, se, truth[j], level);
      c.rate[j] = rate;
      c.se[j] = std::sqrt(rate * (1.0 - rate) / double(records.size()));
    }
    return c;
  };
  s.naive = coverage_of([](const ReplicationRecord& r) -> const Matrix& { return r.naive; });
  s.corrected_score =
      coverage_of([](const ReplicationRecord& r) -> const Matrix& { return r.corrected_score; });
  s.general = coverage_of([](const ReplicationRecord& r) -> const Matrix& { return r.general; });
  return s;
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ConfigError("normal quantile needs p in (0, 1)");
  // Acklam's rational approximation.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // One Halley refinement against the exact CDF.
  double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  double u = e * std::sqrt(2.0 * 3.14159265358979323846) * std::exp(x * x / 2.0);
  return x - u / (1.0 + x * u / 2.0);
}

double sample_mean(const std::vector<double>& xs) {
  if (xs.empty()) throw ConfigError("mean of an empty sample");
  KahanSum s;
  for (double x : xs) s.add(x);
  return s.value() / double(xs.size());
}

double sample_variance(const std::vector<double>& xs) {
  if (xs.size() < 2) throw ConfigError("variance needs at least two values");
  double m = sample_mean(xs);
  KahanSum s;
  for (double x : xs) s.add((x - m) * (x - m));
  return s.value() / double(xs.size() - 1);
}

double coverage_rate(const std::vector<double>& estimates, const std::vector<double>& ses,
                     double truth, double level) {
  if (estimates.size() != ses.size() || estimates.empty())
    throw ConfigError("coverage needs matching nonempty estimate and se lists");
  double z = normal_quantile(0.5 + level / 2.0);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < estimates.size(); ++i)
    if (std::fabs(estimates[i] - truth) <= z * ses[i]) ++hit;
  return double(hit) / double(estimates.size());
}

}  // namespace eqsw
