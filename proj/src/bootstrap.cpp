// Copyright 2026 the eqsw authors
// SPDX-License-Identifier: Apache-2.0
#include "eqsw/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "eqsw/errors.hpp"

namespace eqsw {

double type7_quantile(std::vector<double> xs, double p) {
  if (xs.empty()) throw ConfigError("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("quantile level outside [0, 1]");
  std::sort(xs.begin(), xs.end());
  double h = double(xs.size() - 1) * p;
  std::size_t i = std::size_t(h);
  if (i + 1 >= xs.size()) return xs.back();
  double frac = h - double(i);
  return xs[i] + frac * (xs[i + 1] - xs[i]);
}

BootstrapResult percentile_bootstrap(
    std::size_t n_units, const Vector& full_estimate,
    const std::function<Vector(const std::vector<std::size_t>&, const Vector&)>& refit,
    const BootstrapOptions& opt) {
  if (opt.replicates < kMinBootstrapReplicates)
    throw ConfigError("bootstrap needs at least " + std::to_string(kMinBootstrapReplicates) +
                      " replicates, got " + std::to_string(opt.replicates));
  if (n_units == 0) throw ConfigError("bootstrap over zero units");
  if (!(opt.level > 0.0 && opt.level < 1.0))
    throw ConfigError("bootstrap level must lie in (0, 1)");
  std::size_t p = full_estimate.size();

  MonteCarloOptions mc;
  mc.replications = opt.replicates;
  mc.seed = opt.seed;
  mc.threads = opt.threads;
  mc.failure_cap = opt.failure_cap;
  auto one_draw = [&](Rng& rng) {
    std::vector<std::size_t> idx(n_units);
    for (std::size_t i = 0; i < n_units; ++i) idx[i] = std::size_t(rng.uniform_int(n_units));
    Vector est = refit(idx, full_estimate);
    if (est.size() != p) throw ConfigError("bootstrap refit returned a different dimension");
    return est;
  };
  MonteCarloOutcome<Vector> mco =
      run_replications<Vector>(mc, std::function<Vector(Rng&)>(one_draw));

  BootstrapResult out;
  out.estimate = full_estimate;
  out.attempted = mco.attempted;
  out.failed = mco.failed;
  out.draws = std::move(mco.results);
  out.lower = Vector(p);
  out.upper = Vector(p);
  double tail = (1.0 - opt.level) / 2.0;
  for (std::size_t j = 0; j < p; ++j) {
    std::vector<double> comp;
    comp.reserve(out.draws.size());
    for (const Vector& d : out.draws) comp.push_back(d[j]);
    out.lower[j] = type7_quantile(comp, tail);
    out.upper[j] = type7_quantile(comp, 1.0 - tail);
  }
  return out;
}

}  // namespace eqsw
