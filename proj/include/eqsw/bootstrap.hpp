// Copyright 2026 the eqsw authors
// SPDX-License-Identifier: Apache-2.0
//
// Nonparametric percentile bootstrap over independent units. The engine
// resamples unit indices with replacement, hands each index multiset to a
// caller-supplied refit function warm-started at the full-data estimate,
// and reads confidence limits off the percentile of the completed draws.
// Replicate b uses the stream derived from (seed, b), so results are
// independent of thread count and schedule.
#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "eqsw/numkit.hpp"
#include "eqsw/simlab.hpp"

namespace eqsw {

/// Percentile bootstrap below this many replicates is too coarse for the
/// tail quantiles it reports.
inline constexpr std::size_t kMinBootstrapReplicates = 200;

struct BootstrapOptions {
  std::size_t replicates = 500;
  std::uint64_t seed = 1;
  unsigned threads = 1;  // 0 = hardware concurrency
  double level = 0.95;
  double failure_cap = 0.02;
};

struct BootstrapResult {
  Vector estimate;             // full-data estimate the intervals are for
  Vector lower, upper;         // percentile limits per component
  std::vector<Vector> draws;   // completed bootstrap estimates
  std::size_t attempted = 0;
  std::size_t failed = 0;
};

/// Linear-interpolation sample quantile (the common spreadsheet/type-7
/// definition): h = (m - 1) p split into integer and fractional parts.
double type7_quantile(std::vector<double> xs, double p);

/// refit(indices, warm) fits the model on the resampled units and returns
/// the target estimate; statistical failures drop the replicate, more than
/// failure_cap of them raise TooManyFailures.
BootstrapResult percentile_bootstrap(
    std::size_t n_units, const Vector& full_estimate,
    const std::function<Vector(const std::vector<std::size_t>&, const Vector&)>& refit,
    const BootstrapOptions& opt);

}  // namespace eqsw
