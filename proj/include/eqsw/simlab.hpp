// Copyright 2026 the eqsw authors
// SPDX-License-Identifier: Apache-2.0
//
// Simulation scenarios with known truth, plus a deterministic replication
// harness. Three data-generating processes cover the estimator matrix:
//
//   point scenario        two truncated-normal covariates, logistic
//                         treatment, linear outcomes, additive effect;
//                         exercises the weighted and augmented estimators.
//   longitudinal scenario frailty-driven covariate process, absorbing
//                         logistic treatment hazard, deterministic additive
//                         effect (1 - 0.2 t) per period since start;
//                         exercises g-estimation.
//   moment scenario       lognormal exposure with a method-of-moments
//                         nuisance (not a partial score) inside a ratio
//                         equation; exercises the general variance route.
//
// True parameter values are exposed separately from the drawn data so
// estimator code cannot touch them by accident.
#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "eqsw/data.hpp"
#include "eqsw/eecore.hpp"
#include "eqsw/errors.hpp"
#include "eqsw/rng.hpp"
#include "eqsw/variance.hpp"

namespace eqsw {

/// Point-treatment process: l1, l2 iid standard normal clamped to
/// [-2.5, 2.5], treatment probability expit(confounding * (0.5 l1 - 0.4 l2)),
/// control outcome 1 + l1 + l2 + e with unit normal e, treated outcome
/// shifted by `effect`. Clamping keeps propensities inside [0.095, 0.905].
struct PointScenario {
  std::size_t n = 2000;
  double effect = 1.0;
  double confounding = 1.0;
};

struct PointTruth {
  Vector psi;          // arm means (treated, control)
  double ate = 0.0;
  Vector theta;        // propensity coefficients (intercept, l1, l2)
  Vector xi_treated;   // outcome model (intercept, l1, l2)
  Vector xi_control;
};

PointTruth point_truth(const PointScenario& sc);
std::vector<PointRow> draw_point(const PointScenario& sc, Rng& rng);

/// Longitudinal process with K+1 decision times. A latent frailty b feeds
/// an AR(1) covariate; treatment starts with hazard expit(-1.1 + 0.5 l_k)
/// and is absorbing; treatment-free outcomes grow in k and load on b and
/// the current covariate; starting at t adds (1 - 0.2 t)(k - t) to the
/// outcome at every later k. Covariates do not react to treatment, which
/// keeps the treatment-free outcomes exact without a counterfactual
/// covariate process.
struct LongScenario {
  std::size_t n = 1000;
  int horizon = 3;  // K: decision times are 0..K, outcomes 0..K+1
};

struct LongTruth {
  Vector psi;    // effect-curve coefficients for the quadratic basis
  Vector theta;  // pooled treatment model (intercept, l)
};

LongTruth long_truth();
std::vector<PersonHistory> draw_longitudinal(const LongScenario& sc, Rng& rng);

/// Moment-nuisance process: w = exp(z/2) for standard normal z, outcome
/// y = 1 + w + e/2. Rows carry w as the single covariate.
struct MomScenario {
  std::size_t n = 2000;
};

struct MomTruth {
  double psi = 0.0;    // 1 + exp(3/8)
  double theta = 0.0;  // exp(1/8)
};

MomTruth mom_truth();
std::vector<PointRow> draw_mom(const MomScenario& sc, Rng& rng);

/// Ratio equation u1 = (w/theta) y - psi with the method-of-moments
/// nuisance u2 = w - theta. The nuisance is not a partial score, so the
/// set carries theta_is_partial_score = false.
EstimatingFunctionSet make_mom_ratio_set(const std::vector<PointRow>& rows);

/// One replicate of a full estimation pipeline: draw, fit nuisance and
/// target, compute every variance estimator.
struct ReplicationRecord {
  Vector psi;
  Matrix naive;
  Matrix corrected_score;
  Matrix general;
  IdentityDiagnostics diagnostics;
};

ReplicationRecord replicate_point_iptw(const PointScenario& sc, Rng& rng);
ReplicationRecord replicate_point_aipw(const PointScenario& sc, Rng& rng);
ReplicationRecord replicate_long_snmm(const LongScenario& sc, Rng& rng);
ReplicationRecord replicate_mom(const MomScenario& sc, Rng& rng);

struct CoverageSummary {
  Vector rate;  // per component
  Vector se;    // binomial standard error of each rate
};

/// Replication summaries: bias and empirical covariance of the estimates,
/// the mean of each variance estimator, and Wald coverage per estimator.
struct ScenarioSummary {
  std::size_t attempted = 0;
  std::size_t failed = 0;
  Vector truth;
  Vector bias;
  Matrix empirical_variance;
  Matrix mean_naive, mean_corrected_score, mean_general;
  CoverageSummary naive, corrected_score, general;
};

ScenarioSummary summarize_records(const std::vector<ReplicationRecord>& records,
                                  std::size_t attempted, std::size_t failed,
                                  const Vector& truth, double level = 0.95);

/// Standard normal quantile (Acklam's rational approximation refined by
/// one Halley step), |error| < 1e-12 on (0, 1).
double normal_quantile(double p);

double sample_mean(const std::vector<double>& xs);
/// Unbiased (n-1 denominator) sample variance.
double sample_variance(const std::vector<double>& xs);

/// Fraction of replicates whose Wald interval est +- z se covers truth.
double coverage_rate(const std::vector<double>& estimates, const std::vector<double>& ses,
                     double truth, double level = 0.95);

/// Monte Carlo driver. Replicate r runs on an independent stream derived
/// from (seed, r), so results are identical for any thread count.
struct MonteCarloOptions {
  std::size_t replications = 1000;
  std::uint64_t seed = 1;
  unsigned threads = 1;  // 0 = hardware concurrency
  double failure_cap = 0.02;
};

template <typename T>
struct MonteCarloOutcome {
  std::vector<T> results;  // completed replicates in replicate order
  std::size_t attempted = 0;
  std::size_t failed = 0;
  std::string first_failure;
};

/// Runs fn once per replicate. Statistical failures (no convergence,
/// separation, singular systems, positivity violations) drop the replicate;
/// more than failure_cap of them aborts with TooManyFailures. ConfigError
/// marks a misuse and is always rethrown.
template <typename T>
MonteCarloOutcome<T> run_replications(const MonteCarloOptions& opt,
                                      const std::function<T(Rng&)>& fn) {
  if (opt.replications == 0) throw ConfigError("need at least one replication");
  unsigned threads = opt.threads != 0 ? opt.threads : std::thread::hardware_concurrency();
  if (threads == 0) threads = 1;
  if (threads > opt.replications) threads = unsigned(opt.replications);

  std::vector<std::optional<T>> slots(opt.replications);
  std::vector<std::string> failures(opt.replications);
  std::atomic<std::size_t> failed{0};
  std::exception_ptr fatal;
  std::mutex fatal_mu;

  auto worker = [&](unsigned t) {
    for (std::size_t r = t; r < opt.replications; r += threads) {
      Rng rng(derive_stream(opt.seed, r));
      try {
        slots[r] = fn(rng);
      } catch (const ConfigError&) {
        std::lock_guard<std::mutex> lock(fatal_mu);
        if (!fatal) fatal = std::current_exception();
        return;
      } catch (const Error& e) {
        failures[r] = e.what();
        failed.fetch_add(1, std::memory_order_relaxed);
      }
    }
  };

  if (threads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker, t);
    for (std::thread& th : pool) th.join();
  }
  if (fatal) std::rethrow_exception(fatal);

  MonteCarloOutcome<T> out;
  out.attempted = opt.replications;
  out.failed = failed.load();
  out.results.reserve(opt.replications - out.failed);
  for (std::size_t r = 0; r < opt.replications; ++r) {
    if (slots[r]) {
      out.results.push_back(std::move(*slots[r]));
    } else if (out.first_failure.empty()) {
      out.first_failure = failures[r];
    }
  }
  double failed_frac = double(out.failed) / double(opt.replications);
  if (failed_frac > opt.failure_cap + 1e-12)
    throw TooManyFailures(std::to_string(out.failed) + " of " +
                          std::to_string(opt.replications) + " replications failed (cap " +
                          std::to_string(opt.failure_cap) + "); first: " + out.first_failure);
  return out;
}

}  // namespace eqsw
