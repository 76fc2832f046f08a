// Copyright 2026 the eqsw authors
// SPDX-License-Identifier: Apache-2.0
//
// Scenario generator and replication harness tests. Generators are checked
// for faithfulness to their stated models (fitted parameters near truth,
// estimating equations unbiased at truth); the harness for determinism
// across thread counts and for its failure policy.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "eqsw/errors.hpp"
#include "eqsw/estimators.hpp"
#include "eqsw/nuisance.hpp"
#include "eqsw/simlab.hpp"

using namespace eqsw;

TEST_CASE("point draws are deterministic in the seed") {
  PointScenario sc;
  sc.n = 50;
  Rng a(7001u), b(7001u), c(7002u);
  std::vector<PointRow> ra = draw_point(sc, a);
  std::vector<PointRow> rb = draw_point(sc, b);
  std::vector<PointRow> rc = draw_point(sc, c);
  bool same = true, diff = false;
  for (std::size_t i = 0; i < sc.n; ++i) {
    same = same && ra[i].y == rb[i].y && ra[i].a == rb[i].a && ra[i].l[0] == rb[i].l[0];
    diff = diff || ra[i].y != rc[i].y;
  }
  CHECK(same);
  CHECK(diff);
}

TEST_CASE("point scenario matches its stated models") {
  PointScenario sc;
  sc.n = 8000;
  Rng rng(351001u);
  std::vector<PointRow> rows = draw_point(sc, rng);
  PointTruth truth = point_truth(sc);

  // Propensity coefficients recovered within 4 standard errors.
  LogisticSpec prop;
  prop.design_columns = {0, 1};
  NuisanceFit fit = fit_logistic(prop, rows);
  for (std::size_t j = 0; j < 3; ++j)
    CHECK(std::fabs(fit.theta[j] - truth.theta[j]) <= 4.0 * std::sqrt(fit.var_theta(j, j)));

  // Outcome models recovered; coefficients all equal one except the
  // treated intercept.
  OutcomeModels om = fit_outcome_models(rows, {0, 1});
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(std::fabs(om.xi_treated[j] - truth.xi_treated[j]) <= 0.1);
    CHECK(std::fabs(om.xi_control[j] - truth.xi_control[j]) <= 0.1);
  }

  // The weighted-mean equations average to zero at the truth.
  EstimatingFunctionSet fns = make_iptw_set(rows, prop);
  VectorMean acc(2);
  std::vector<double> comp1, comp2;
  for (std::size_t i = 0; i < fns.n_units; ++i) {
    Vector u = fns.u1(i, truth.psi, truth.theta);
    acc.add(u);
    comp1.push_back(u[0]);
    comp2.push_back(u[1]);
  }
  Vector m = acc.mean();
  CHECK(std::fabs(m[0]) <= 4.0 * std::sqrt(sample_variance(comp1) / double(sc.n)));
  CHECK(std::fabs(m[1]) <= 4.0 * std::sqrt(sample_variance(comp2) / double(sc.n)));
}

TEST_CASE("zero confounding makes weighting equal arm means") {
  PointScenario sc;
  sc.n = 600;
  sc.confounding = 0.0;
  Rng rng(90210u);
  std::vector<PointRow> rows = draw_point(sc, rng);

  // Propensity is constant, so the fitted weights are constant within each
  // arm and the weighted estimate is exactly the arm average.
  LogisticSpec prop;  // intercept only: correctly specified here
  EstimatingFunctionSet fns = make_iptw_set(rows, prop);
  ParamVector fit = solve_stacked(fns, default_init(fns), SolverConfig{});

  double sum1 = 0.0, sum0 = 0.0;
  std::size_t n1 = 0, n0 = 0;
  for (const PointRow& r : rows) {
    if (r.a == 1.0) {
      sum1 += r.y;
      ++n1;
    } else {
      sum0 += r.y;
      ++n0;
    }
  }
  CHECK(std::fabs(fit.psi[0] - sum1 / double(n1)) <= 1e-9);
  CHECK(std::fabs(fit.psi[1] - sum0 / double(n0)) <= 1e-9);

  // Treated fraction is a fair coin.
  CHECK(std::fabs(double(n1) / double(sc.n) - 0.5) <= 4.0 * std::sqrt(0.25 / double(sc.n)));
}

TEST_CASE("null effect scenario has equal arm truths") {
  PointScenario sc;
  sc.effect = 0.0;
  PointTruth t = point_truth(sc);
  CHECK(t.psi[0] == t.psi[1]);
  CHECK(t.ate == 0.0);
}

TEST_CASE("longitudinal draws are structurally valid") {
  LongScenario sc;
  sc.n = 300;
  Rng rng(42042u);
  std::vector<PersonHistory> persons = draw_longitudinal(sc, rng);
  REQUIRE(persons.size() == sc.n);
  CHECK_NOTHROW(validate_long(persons));

  std::size_t treated_at_0 = 0, never = 0;
  for (const PersonHistory& p : persons) {
    CHECK(p.horizon() == sc.horizon);
    CHECK(p.outcomes.size() == std::size_t(sc.horizon) + 2);
    if (p.t_start == 0) ++treated_at_0;
    if (!p.treated()) ++never;
  }
  // Hazard near expit(-1.1) each period.
  CHECK(double(treated_at_0) / double(sc.n) > 0.12);
  CHECK(double(treated_at_0) / double(sc.n) < 0.38);
  CHECK(double(never) / double(sc.n) > 0.15);
  CHECK(double(never) / double(sc.n) < 0.5);

  CHECK_THROWS_AS(draw_longitudinal(LongScenario{10, 0}, rng), ConfigError);
}

TEST_CASE("longitudinal scenario matches its treatment model") {
  LongScenario sc;
  sc.n = 4000;
  Rng rng(66007u);
  std::vector<PersonHistory> persons = draw_longitudinal(sc, rng);
  LongTruth truth = long_truth();

  PooledLogisticSpec model;
  model.covariate_columns = {0};
  NuisanceFit fit = fit_pooled_logistic(model, persons);
  for (std::size_t j = 0; j < 2; ++j)
    CHECK(std::fabs(fit.theta[j] - truth.theta[j]) <= 4.0 * std::sqrt(fit.var_theta(j, j)));
}

TEST_CASE("g-estimation equation is unbiased at the longitudinal truth") {
  LongScenario sc;
  sc.n = 3000;
  Rng rng(5150123u);
  std::vector<PersonHistory> persons = draw_longitudinal(sc, rng);
  LongTruth truth = long_truth();

  SnmmSpec spec;  // quadratic basis matches the generator's effect curve
  PooledLogisticSpec model;
  model.covariate_columns = {0};
  EstimatingFunctionSet fns = make_snmm_set(persons, spec, model);

  VectorMean acc(3);
  std::vector<std::vector<double>> comps(3);
  for (std::size_t i = 0; i < fns.n_units; ++i) {
    Vector u = fns.u1(i, truth.psi, truth.theta);
    acc.add(u);
    for (std::size_t j = 0; j < 3; ++j) comps[j].push_back(u[j]);
  }
  Vector m = acc.mean();
  for (std::size_t j = 0; j < 3; ++j)
    CHECK(std::fabs(m[j]) <= 4.0 * std::sqrt(sample_variance(comps[j]) / double(sc.n)));
}

TEST_CASE("moment scenario solves to its closed forms") {
  MomScenario sc;
  sc.n = 3000;
  Rng rng(8675309u);
  std::vector<PointRow> rows = draw_mom(sc, rng);
  MomTruth truth = mom_truth();

  EstimatingFunctionSet fns = make_mom_ratio_set(rows);
  CHECK_FALSE(fns.theta_is_partial_score);
  ParamVector fit = solve_stacked(fns, default_init(fns), SolverConfig{});

  // theta solves w_bar - theta = 0; psi is mean(w y) / w_bar.
  KahanSum sw, swy;
  for (const PointRow& r : rows) {
    sw.add(r.l[0]);
    swy.add(r.l[0] * r.y);
  }
  double wbar = sw.value() / double(sc.n);
  CHECK(std::fabs(fit.theta[0] - wbar) <= 1e-9);
  CHECK(std::fabs(fit.psi[0] - swy.value() / double(sc.n) / wbar) <= 1e-9);

  // Both parameters sit near their population values.
  CHECK(std::fabs(fit.theta[0] - truth.theta) <= 0.1);
  CHECK(std::fabs(fit.psi[0] - truth.psi) <= 0.2);

  // Analytic Jacobian blocks agree with finite differences.
  MomentEstimates analytic = empirical_moments(fns, fit);
  EstimatingFunctionSet numeric = fns;
  numeric.d_u1_dpsi = nullptr;
  numeric.d_u1_dtheta = nullptr;
  numeric.d_u2_dtheta = nullptr;
  MomentEstimates fd = empirical_moments(numeric, fit);
  CHECK((analytic.bread - fd.bread).max_abs() <= 1e-6);
  CHECK((analytic.d_theta_u1 - fd.d_theta_u1).max_abs() <= 1e-6);
  CHECK((analytic.d_theta_u2 - fd.d_theta_u2).max_abs() <= 1e-6);
}

TEST_CASE("normal quantile") {
  CHECK(std::fabs(normal_quantile(0.5)) <= 1e-15);
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  CHECK(normal_quantile(0.025) == doctest::Approx(-1.959963984540054).epsilon(1e-12));
  CHECK(normal_quantile(0.841344746068543) == doctest::Approx(1.0).epsilon(1e-9));

  // Round trip through the exact CDF.
  for (double p : {1e-6, 0.01, 0.2, 0.5, 0.7, 0.99, 1.0 - 1e-6}) {
    double x = normal_quantile(p);
    double back = 0.5 * std::erfc(-x / std::sqrt(2.0));
    CHECK(std::fabs(back - p) <= 1e-12);
  }
  CHECK_THROWS_AS(normal_quantile(0.0), ConfigError);
  CHECK_THROWS_AS(normal_quantile(1.0), ConfigError);
}

TEST_CASE("sample statistics") {
  std::vector<double> xs = {1.0, 2.0, 3.0, 4.0};
  CHECK(sample_mean(xs) == doctest::Approx(2.5).epsilon(1e-15));
  CHECK(sample_variance(xs) == doctest::Approx(5.0 / 3.0).epsilon(1e-15));
  CHECK_THROWS_AS(sample_mean({}), ConfigError);
  CHECK_THROWS_AS(sample_variance({1.0}), ConfigError);

  std::vector<double> est = {0.0, 1.0, 2.0, 10.0};
  std::vector<double> huge(4, 1e6);
  CHECK(coverage_rate(est, huge, 1.0) == 1.0);
  std::vector<double> zero(4, 0.0);
  CHECK(coverage_rate(est, zero, 1.0) == 0.25);  // only the exact hit
}

TEST_CASE("replication harness is deterministic across thread counts") {
  auto rep = [](Rng& rng) {
    double s = 0.0;
    for (int i = 0; i < 10; ++i) s += rng.normal();
    return s;
  };
  MonteCarloOptions one;
  one.replications = 40;
  one.seed = 99;
  one.threads = 1;
  MonteCarloOptions four = one;
  four.threads = 4;

  MonteCarloOutcome<double> a = run_replications<double>(one, rep);
  MonteCarloOutcome<double> b = run_replications<double>(four, rep);
  REQUIRE(a.results.size() == 40);
  REQUIRE(b.results.size() == 40);
  for (std::size_t i = 0; i < 40; ++i) CHECK(a.results[i] == b.results[i]);
  CHECK(a.failed == 0);
}

TEST_CASE("replication harness drops failures up to the cap") {
  // Simulated flaky replicate: fails whenever its stream opens low.
  auto rep = [](Rng& rng) {
    double u = rng.uniform01();
    if (u < 0.10) throw NoConvergence("simulated failure");
    return u;
  };
  MonteCarloOptions opt;
  opt.replications = 200;
  opt.seed = 31337;
  opt.failure_cap = 1.0;  // count without aborting
  MonteCarloOutcome<double> free_run = run_replications<double>(opt, rep);
  REQUIRE(free_run.failed > 0);
  CHECK(free_run.results.size() + free_run.failed == 200);
  CHECK(free_run.first_failure.find("simulated failure") != std::string::npos);

  // The same run under a cap below the observed failure rate aborts.
  MonteCarloOptions strict = opt;
  strict.failure_cap = (double(free_run.failed) - 0.5) / 200.0;
  CHECK_THROWS_AS(run_replications<double>(strict, rep), TooManyFailures);

  // And a cap at exactly the observed rate passes.
  MonteCarloOptions at_cap = opt;
  at_cap.failure_cap = double(free_run.failed) / 200.0;
  MonteCarloOutcome<double> ok = run_replications<double>(at_cap, rep);
  CHECK(ok.failed == free_run.failed);
}

TEST_CASE("replication harness rethrows misuse immediately") {
  auto rep = [](Rng&) -> int { throw ConfigError("bad setup"); };
  MonteCarloOptions opt;
  opt.replications = 5;
  opt.seed = 1;
  CHECK_THROWS_AS(run_replications<int>(opt, rep), ConfigError);
  CHECK_THROWS_AS(run_replications<int>(MonteCarloOptions{0, 1, 1, 0.02},
                                        std::function<int(Rng&)>([](Rng&) { return 0; })),
                  ConfigError);
}

TEST_CASE("scenario pipelines produce complete replication records") {
  PointScenario sc;
  sc.n = 400;
  MonteCarloOptions opt;
  opt.replications = 4;
  opt.seed = 7;
  auto mc = run_replications<ReplicationRecord>(
      opt, [&sc](Rng& rng) { return replicate_point_iptw(sc, rng); });
  REQUIRE(mc.results.size() == 4);

  PointTruth truth = point_truth(sc);
  ScenarioSummary s = summarize_records(mc.results, mc.attempted, mc.failed, truth.psi);
  REQUIRE(s.bias.size() == 2);
  REQUIRE(s.empirical_variance.rows() == 2);
  CHECK(std::fabs(s.bias[0]) < 0.5);
  CHECK(std::fabs(s.bias[1]) < 0.5);
  for (std::size_t j = 0; j < 2; ++j) {
    CHECK(s.mean_naive(j, j) > 0.0);
    CHECK(s.mean_corrected_score(j, j) > 0.0);
    CHECK(s.mean_general(j, j) > 0.0);
    CHECK(s.naive.rate[j] >= 0.0);
    CHECK(s.naive.rate[j] <= 1.0);
    CHECK(s.corrected_score.se[j] >= 0.0);
  }
  // Each record carries applicable diagnostics for a modeled nuisance.
  for (const ReplicationRecord& r : mc.results) CHECK(r.diagnostics.applicable);

  // The other pipelines run end to end on small draws.
  Rng rng(11);
  PointScenario small;
  small.n = 300;
  ReplicationRecord aipw = replicate_point_aipw(small, rng);
  CHECK(aipw.psi.size() == 2);

  LongScenario ls;
  ls.n = 250;
  ls.horizon = 3;
  ReplicationRecord snmm = replicate_long_snmm(ls, rng);
  CHECK(snmm.psi.size() == 3);
  CHECK(snmm.naive.rows() == 3);

  MomScenario ms;
  ms.n = 400;
  ReplicationRecord mom = replicate_mom(ms, rng);
  CHECK(mom.psi.size() == 1);
  CHECK(mom.general(0, 0) > 0.0);

  // Dimension mismatch between records and truth is misuse.
  CHECK_THROWS_AS(summarize_records(mc.results, 4, 0, Vector{1.0}), ConfigError);
}
