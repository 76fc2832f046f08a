// Copyright 2026 the eqsw authors
// SPDX-License-Identifier: Apache-2.0
//
// Bootstrap engine tests on refits cheap enough to run hundreds of times:
// resampled means, degenerate data, and the failure policy.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "eqsw/bootstrap.hpp"
#include "eqsw/errors.hpp"
#include "eqsw/rng.hpp"

using namespace eqsw;

namespace {

std::vector<double> normal_sample(std::uint64_t seed, std::size_t n, double mu, double sd) {
  Rng rng(seed);
  std::vector<double> xs(n);
  for (double& x : xs) x = mu + sd * rng.normal();
  return xs;
}

std::function<Vector(const std::vector<std::size_t>&, const Vector&)> mean_refit(
    const std::vector<double>& xs) {
  return [&xs](const std::vector<std::size_t>& idx, const Vector&) {
    double s = 0.0;
    for (std::size_t i : idx) s += xs[i];
    return Vector{s / double(idx.size())};
  };
}

}  // namespace

TEST_CASE("interpolated quantiles") {
  std::vector<double> xs = {3.0, 1.0, 4.0, 2.0};  // unsorted on purpose
  CHECK(type7_quantile(xs, 0.0) == 1.0);
  CHECK(type7_quantile(xs, 1.0) == 4.0);
  CHECK(type7_quantile(xs, 0.5) == doctest::Approx(2.5).epsilon(1e-15));
  CHECK(type7_quantile(xs, 0.25) == doctest::Approx(1.75).epsilon(1e-15));
  CHECK(type7_quantile(xs, 1.0 / 3.0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(type7_quantile({7.5}, 0.9) == 7.5);

  CHECK_THROWS_AS(type7_quantile({}, 0.5), ConfigError);
  CHECK_THROWS_AS(type7_quantile(xs, 1.5), ConfigError);
  CHECK_THROWS_AS(type7_quantile(xs, -0.1), ConfigError);
}

TEST_CASE("bootstrap of a sample mean behaves like its standard error") {
  std::vector<double> xs = normal_sample(20260816u, 150, 2.0, 1.5);
  double xbar = 0.0;
  for (double x : xs) xbar += x;
  xbar /= double(xs.size());

  BootstrapOptions opt;
  opt.replicates = 800;
  opt.seed = 4242;
  BootstrapResult r = percentile_bootstrap(xs.size(), Vector{xbar}, mean_refit(xs), opt);

  CHECK(r.failed == 0);
  CHECK(r.attempted == 800);
  REQUIRE(r.draws.size() == 800);
  CHECK(r.lower[0] < xbar);
  CHECK(xbar < r.upper[0]);

  // Bootstrap spread tracks the classical standard error of the mean.
  std::vector<double> comp;
  for (const Vector& d : r.draws) comp.push_back(d[0]);
  double se_boot = std::sqrt(sample_variance(comp));
  double se_classic = std::sqrt(sample_variance(xs) / double(xs.size()));
  CHECK(se_boot / se_classic > 0.8);
  CHECK(se_boot / se_classic < 1.25);

  // Interval width is roughly 2 z se.
  double width = r.upper[0] - r.lower[0];
  CHECK(width > 2.8 * se_classic);
  CHECK(width < 5.0 * se_classic);
}

TEST_CASE("identical data give a zero-width interval") {
  std::vector<double> xs(40, 3.25);
  BootstrapOptions opt;
  opt.replicates = 200;
  opt.seed = 7;
  BootstrapResult r = percentile_bootstrap(xs.size(), Vector{3.25}, mean_refit(xs), opt);
  CHECK(r.lower[0] == 3.25);
  CHECK(r.upper[0] == 3.25);
}

TEST_CASE("bootstrap is deterministic and thread-count independent") {
  std::vector<double> xs = normal_sample(5u, 60, 0.0, 1.0);
  BootstrapOptions a;
  a.replicates = 240;
  a.seed = 99;
  a.threads = 1;
  BootstrapOptions b = a;
  b.threads = 3;

  BootstrapResult ra = percentile_bootstrap(xs.size(), Vector{0.0}, mean_refit(xs), a);
  BootstrapResult rb = percentile_bootstrap(xs.size(), Vector{0.0}, mean_refit(xs), b);
  REQUIRE(ra.draws.size() == rb.draws.size());
  for (std::size_t i = 0; i < ra.draws.size(); ++i) CHECK(ra.draws[i][0] == rb.draws[i][0]);
  CHECK(ra.lower[0] == rb.lower[0]);
  CHECK(ra.upper[0] == rb.upper[0]);
}

TEST_CASE("resampled indices cover exactly the unit range") {
  std::vector<double> xs = normal_sample(11u, 25, 0.0, 1.0);
  bool shape_ok = true;
  bool warm_ok = true;
  auto refit = [&](const std::vector<std::size_t>& idx, const Vector& warm) {
    shape_ok = shape_ok && idx.size() == xs.size();
    for (std::size_t i : idx) shape_ok = shape_ok && i < xs.size();
    warm_ok = warm_ok && warm.size() == 1 && warm[0] == 1.75;
    return Vector{0.0};
  };
  BootstrapOptions opt;
  opt.replicates = 200;
  opt.seed = 3;
  percentile_bootstrap(xs.size(), Vector{1.75}, refit, opt);
  CHECK(shape_ok);
  CHECK(warm_ok);
}

TEST_CASE("failure policy drops and caps") {
  std::vector<double> xs = normal_sample(17u, 30, 0.0, 1.0);
  auto flaky = [&xs](const std::vector<std::size_t>& idx, const Vector&) {
    // Fails on a deterministic subset: when the first resampled index is 0.
    if (idx[0] == 0) throw NoConvergence("unlucky resample");
    double s = 0.0;
    for (std::size_t i : idx) s += xs[i];
    return Vector{s / double(idx.size())};
  };
  BootstrapOptions opt;
  opt.replicates = 300;
  opt.seed = 123;
  opt.failure_cap = 1.0;
  BootstrapResult r = percentile_bootstrap(xs.size(), Vector{0.0}, flaky, opt);
  CHECK(r.failed > 0);
  CHECK(r.draws.size() + r.failed == 300);

  BootstrapOptions strict = opt;
  strict.failure_cap = 0.0;
  CHECK_THROWS_AS(percentile_bootstrap(xs.size(), Vector{0.0}, flaky, strict),
                  TooManyFailures);
}

TEST_CASE("configuration errors") {
  std::vector<double> xs = {1.0, 2.0};
  BootstrapOptions opt;
  opt.replicates = 100;  // below the minimum
  CHECK_THROWS_AS(percentile_bootstrap(2, Vector{0.0}, mean_refit(xs), opt), ConfigError);

  opt.replicates = 200;
  CHECK_THROWS_AS(percentile_bootstrap(0, Vector{0.0}, mean_refit(xs), opt), ConfigError);

  opt.level = 1.0;
  CHECK_THROWS_AS(percentile_bootstrap(2, Vector{0.0}, mean_refit(xs), opt), ConfigError);

  // A refit that changes dimension is misuse, not a statistical failure.
  opt.level = 0.95;
  auto bad = [](const std::vector<std::size_t>&, const Vector&) { return Vector{1.0, 2.0}; };
  CHECK_THROWS_AS(percentile_bootstrap(2, Vector{0.0}, bad, opt), ConfigError);
}
