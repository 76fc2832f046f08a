// Copyright 2026 the eqsw authors
// SPDX-License-Identifier: Apache-2.0
//
// Observation containers and CSV interchange.
//
// Point data:        header y,a,l1..lm; one row per subject.
// Longitudinal data: header id,k,a,y,l1..lm; rows sorted by (id, k) with
//                    k = 0..K+1 per person. Rows 0..K carry the treatment
//                    decisions and covariates; the final row exists for its
//                    outcome y_{K+1} only (its a and l repeat row K).
//
// Counterfactual oracle columns produced by the simulation generators are
// kept in separate structures (see simlab.hpp), never in these containers,
// so estimator code cannot read them.
#pragma once

#include <limits>
#include <string>
#include <vector>

#include "eqsw/numkit.hpp"

namespace eqsw {

/// One subject of point-treatment data.
struct PointRow {
  double y = 0.0;
  double a = 0.0;  // binary {0,1}
  Vector l;
};

inline constexpr int kNeverTreated = std::numeric_limits<int>::max();

/// One decision time of a longitudinal record.
struct TimePoint {
  int k = 0;
  double a = 0.0;  // binary {0,1}
  Vector l;
};

/// One subject of longitudinal data: decisions at k = 0..K, outcomes at
/// k = 0..K+1, with t_start the first treated time (kNeverTreated if none).
struct PersonHistory {
  std::string id;
  std::vector<TimePoint> records;
  std::vector<double> outcomes;
  int t_start = kNeverTreated;

  int horizon() const { return int(records.size()) - 1; }  // K
  bool treated() const { return t_start != kNeverTreated; }
};

/// Checks a ∈ {0,1} and finiteness on every row; throws ConfigError.
void validate_point(const std::vector<PointRow>& rows);

/// Checks per-person structure: records at k = 0..K exactly, outcomes of
/// length K+2, absorbing treatment, t_start consistent. Throws
/// UnorderedRecords for time-ordering violations and ConfigError for the
/// rest.
void validate_long(const std::vector<PersonHistory>& persons);

/// Recomputes t_start from the records (first k with a = 1).
int first_treated_time(const std::vector<TimePoint>& records);

std::vector<PointRow> load_point_csv(const std::string& path);
void save_point_csv(const std::string& path, const std::vector<PointRow>& rows);

std::vector<PersonHistory> load_long_csv(const std::string& path);
void save_long_csv(const std::string& path, const std::vector<PersonHistory>& persons);

}  // namespace eqsw
