// Copyright 2026 the eqsw authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Four subcommands share one shape: read a JSON
// run configuration, do the work, write machine-readable results under
// --out, and print a short human summary unless --quiet.
//
//   fit        estimate psi and theta from a CSV file, write every
//              variance estimator side by side with Wald intervals
//   simulate   run a Monte Carlo scenario with known truth
//   bootstrap  percentile bootstrap intervals for a fit
//   diagnose   score-identity diagnostics with pass/warn/fail verdicts
//
// Exit codes: 0 success, 1 numerical failure (message starts with the
// error kind, e.g. "Separation"), 2 usage or configuration failure.
// Outputs are deterministic: the same config, seed, and data give
// byte-identical files regardless of thread count.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "eqsw/bootstrap.hpp"
#include "eqsw/data.hpp"
#include "eqsw/eecore.hpp"
#include "eqsw/errors.hpp"
#include "eqsw/estimators.hpp"
#include "eqsw/nuisance.hpp"
#include "eqsw/rng.hpp"
#include "eqsw/simlab.hpp"
#include "eqsw/variance.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using namespace eqsw;

struct CommonArgs {
  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 1;
  int threads = -1;  // -1 = flag absent, fall back to EQSW_THREADS then hardware
  bool quiet = false;
};

unsigned resolve_threads(int flag_value) {
  if (flag_value >= 0) return unsigned(flag_value);
  if (const char* env = std::getenv("EQSW_THREADS")) {
    std::string s(env);
    std::size_t pos = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(s, &pos);
    } catch (const std::exception&) {
      throw ConfigError("EQSW_THREADS must be a nonnegative integer, got \"" + s + "\"");
    }
    if (pos != s.size())
      throw ConfigError("EQSW_THREADS must be a nonnegative integer, got \"" + s + "\"");
    return unsigned(v);
  }
  return 0;  // 0 = available cores downstream
}

// ---------------------------------------------------------------------------
// JSON configuration plumbing. Every document is schema-checked before any
// computation: unknown keys are rejected so a typo cannot silently change
// what a run means.

json load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config root in " + path + " must be a JSON object");
  return j;
}

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        known = true;
        break;
      }
    if (!known) throw ConfigError("unknown field \"" + it.key() + "\" in " + where);
  }
}

const json* find_field(const json& j, const char* key) {
  auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

const json& require_field(const json& j, const char* key, const std::string& where) {
  const json* v = find_field(j, key);
  if (!v) throw ConfigError("missing field \"" + std::string(key) + "\" in " + where);
  return *v;
}

std::string get_string(const json& j, const char* key, const std::string& where) {
  const json& v = require_field(j, key, where);
  if (!v.is_string())
    throw ConfigError("field \"" + std::string(key) + "\" in " + where + " must be a string");
  return v.get<std::string>();
}

double get_number(const json& j, const char* key, const std::string& where, double fallback,
                  bool required = false) {
  const json* v = find_field(j, key);
  if (!v) {
    if (required) throw ConfigError("missing field \"" + std::string(key) + "\" in " + where);
    return fallback;
  }
  if (!v->is_number())
    throw ConfigError("field \"" + std::string(key) + "\" in " + where + " must be a number");
  return v->get<double>();
}

std::size_t get_count(const json& j, const char* key, const std::string& where,
                      std::size_t fallback, bool required = false) {
  const json* v = find_field(j, key);
  if (!v) {
    if (required) throw ConfigError("missing field \"" + std::string(key) + "\" in " + where);
    return fallback;
  }
  if (!v->is_number_integer() || v->get<long long>() < 0)
    throw ConfigError("field \"" + std::string(key) + "\" in " + where +
                      " must be a nonnegative integer");
  return std::size_t(v->get<long long>());
}

bool get_flag(const json& j, const char* key, const std::string& where, bool fallback) {
  const json* v = find_field(j, key);
  if (!v) return fallback;
  if (!v->is_boolean())
    throw ConfigError("field \"" + std::string(key) + "\" in " + where + " must be a boolean");
  return v->get<bool>();
}

// Covariate columns are written 1-based in configs (l1 is column 1) and
// used 0-based internally.
std::vector<std::size_t> get_columns(const json& j, const char* key, const std::string& where) {
  const json* v = find_field(j, key);
  std::vector<std::size_t> out;
  if (!v) return out;
  if (!v->is_array())
    throw ConfigError("field \"" + std::string(key) + "\" in " + where +
                      " must be an array of column numbers");
  for (const json& e : *v) {
    if (!e.is_number_integer() || e.get<long long>() < 1)
      throw ConfigError("field \"" + std::string(key) + "\" in " + where +
                        " must contain 1-based column numbers");
    out.push_back(std::size_t(e.get<long long>()) - 1);
  }
  return out;
}

std::optional<Vector> get_optional_vector(const json& j, const char* key,
                                          const std::string& where) {
  const json* v = find_field(j, key);
  if (!v) return std::nullopt;
  if (!v->is_array())
    throw ConfigError("field \"" + std::string(key) + "\" in " + where +
                      " must be an array of numbers");
  Vector out(v->size());
  for (std::size_t i = 0; i < v->size(); ++i) {
    const json& e = (*v)[i];
    if (!e.is_number())
      throw ConfigError("field \"" + std::string(key) + "\" in " + where +
                        " must be an array of numbers");
    out[i] = e.get<double>();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Fit specification shared by fit, bootstrap, and diagnose.

struct FitSpec {
  std::string data;
  std::string format;     // point | long
  std::string estimator;  // iptw | aipw | snmm
  std::vector<std::size_t> propensity_columns;
  bool propensity_intercept = true;
  bool lag_treatment = false;
  std::vector<std::size_t> outcome_columns;
  std::optional<Vector> known_theta;
  GammaBasis basis = GammaBasis::kDurationQuadratic;
  int horizon = -1;
  SolverConfig solver;
  std::string solve = "profile";
  double level = 0.95;
};

SolverConfig parse_solver(const json& j, const std::string& where) {
  check_keys(j, {"tol", "max_iter", "max_halvings", "fd_step_rel"}, where);
  SolverConfig cfg;
  cfg.tol = get_number(j, "tol", where, cfg.tol);
  cfg.max_iter = int(get_count(j, "max_iter", where, std::size_t(cfg.max_iter)));
  cfg.max_halvings = int(get_count(j, "max_halvings", where, std::size_t(cfg.max_halvings)));
  cfg.fd_step_rel = get_number(j, "fd_step_rel", where, cfg.fd_step_rel);
  if (cfg.tol <= 0.0 || cfg.fd_step_rel <= 0.0)
    throw ConfigError("solver tolerances in " + where + " must be positive");
  return cfg;
}

FitSpec parse_fit_spec(const json& j, const std::string& where) {
  check_keys(j,
             {"data", "format", "estimator", "propensity", "outcome", "known_theta", "snmm",
              "solver", "solve", "level"},
             where);
  FitSpec spec;
  spec.data = get_string(j, "data", where);
  spec.format = get_string(j, "format", where);
  if (spec.format != "point" && spec.format != "long")
    throw ConfigError("field \"format\" in " + where + " must be \"point\" or \"long\"");
  spec.estimator = get_string(j, "estimator", where);
  if (spec.estimator != "iptw" && spec.estimator != "aipw" && spec.estimator != "snmm")
    throw ConfigError("field \"estimator\" in " + where +
                      " must be \"iptw\", \"aipw\", or \"snmm\"");
  bool long_format = spec.format == "long";
  if (long_format != (spec.estimator == "snmm"))
    throw ConfigError("estimator \"" + spec.estimator + "\" does not apply to format \"" +
                      spec.format + "\"");

  if (const json* p = find_field(j, "propensity")) {
    std::string pw = where + ".propensity";
    check_keys(*p, {"columns", "intercept", "lag_treatment"}, pw);
    spec.propensity_columns = get_columns(*p, "columns", pw);
    spec.propensity_intercept = get_flag(*p, "intercept", pw, true);
    spec.lag_treatment = get_flag(*p, "lag_treatment", pw, false);
    if (spec.lag_treatment && !long_format)
      throw ConfigError("field \"lag_treatment\" in " + pw +
                        " only applies to longitudinal data");
  }

  if (const json* o = find_field(j, "outcome")) {
    if (spec.estimator != "aipw")
      throw ConfigError("field \"outcome\" in " + where +
                        " only applies to the aipw estimator");
    std::string ow = where + ".outcome";
    check_keys(*o, {"columns"}, ow);
    spec.outcome_columns = get_columns(*o, "columns", ow);
  }

  spec.known_theta = get_optional_vector(j, "known_theta", where);

  if (const json* s = find_field(j, "snmm")) {
    if (spec.estimator != "snmm")
      throw ConfigError("field \"snmm\" in " + where + " only applies to the snmm estimator");
    std::string sw = where + ".snmm";
    check_keys(*s, {"basis", "horizon"}, sw);
    if (find_field(*s, "basis")) {
      std::string basis = get_string(*s, "basis", sw);
      if (basis == "duration")
        spec.basis = GammaBasis::kDuration;
      else if (basis == "duration_quadratic")
        spec.basis = GammaBasis::kDurationQuadratic;
      else
        throw ConfigError("field \"basis\" in " + sw +
                          " must be \"duration\" or \"duration_quadratic\"");
    }
    spec.horizon = int(get_count(*s, "horizon", sw, 0, /*required=*/false));
    if (!find_field(*s, "horizon")) spec.horizon = -1;
  }

  if (const json* s = find_field(j, "solver")) spec.solver = parse_solver(*s, where + ".solver");

  if (find_field(j, "solve")) {
    spec.solve = get_string(j, "solve", where);
    if (spec.solve != "profile" && spec.solve != "stacked")
      throw ConfigError("field \"solve\" in " + where + " must be \"profile\" or \"stacked\"");
  }

  spec.level = get_number(j, "level", where, 0.95);
  if (!(spec.level > 0.0 && spec.level < 1.0))
    throw ConfigError("field \"level\" in " + where + " must lie in (0, 1)");
  return spec;
}

// The estimating-function sets hold references into the data containers and
// model specs, so everything they point at lives together in this bundle.
// bind_problem is a separate step so the bundle can be filled in place and
// never moved afterwards.
struct FitProblem {
  FitSpec spec;
  std::vector<PointRow> rows;
  std::vector<PersonHistory> persons;
  LogisticSpec point_model;
  PooledLogisticSpec long_model;
  OutcomeModels outcome;
  SnmmSpec snmm;
  EstimatingFunctionSet fns;

  std::size_t units() const { return spec.format == "point" ? rows.size() : persons.size(); }
};

void bind_problem(FitProblem& p) {
  if (p.spec.format == "point") {
    p.point_model = LogisticSpec{p.spec.propensity_columns, p.spec.propensity_intercept};
    if (p.spec.known_theta && p.spec.known_theta->size() != p.point_model.dim())
      throw ConfigError("known_theta length does not match the propensity design");
    if (p.spec.estimator == "aipw") {
      p.outcome = fit_outcome_models(p.rows, p.spec.outcome_columns);
      p.fns = make_aipw_set(p.rows, p.point_model, p.outcome, p.spec.known_theta);
    } else {
      p.fns = make_iptw_set(p.rows, p.point_model, p.spec.known_theta);
    }
  } else {
    p.long_model = PooledLogisticSpec{p.spec.propensity_columns, p.spec.lag_treatment,
                                      p.spec.propensity_intercept};
    if (p.spec.known_theta && p.spec.known_theta->size() != p.long_model.dim())
      throw ConfigError("known_theta length does not match the pooled propensity design");
    p.snmm = SnmmSpec{};
    p.snmm.basis = p.spec.basis;
    p.snmm.horizon = p.spec.horizon;
    p.fns = make_snmm_set(p.persons, p.snmm, p.long_model, p.spec.known_theta);
  }
}

void load_problem(FitProblem& p, const FitSpec& spec) {
  p.spec = spec;
  if (spec.format == "point")
    p.rows = load_point_csv(spec.data);
  else
    p.persons = load_long_csv(spec.data);
  bind_problem(p);
}

// Starting point for the solvers. Estimated propensity models are prefit
// with the dedicated MLE routines so separation and positivity problems
// surface under their proper names before the equation solve starts.
ParamVector problem_init(const FitProblem& p) {
  if (!p.spec.known_theta) {
    NuisanceFit nf = p.spec.format == "point"
                         ? fit_logistic(p.point_model, p.rows, p.spec.solver)
                         : fit_pooled_logistic(p.long_model, p.persons, p.spec.solver);
    if (nf.positivity_warning)
      std::cerr << "warning: fitted treatment probabilities reach [" << nf.min_prob << ", "
                << nf.max_prob << "]; weights may be unstable\n";
    ParamVector init;
    init.psi = Vector(p.fns.dim_psi);
    init.theta = nf.theta;
    return init;
  }
  return default_init(p.fns, p.spec.solver);
}

ParamVector solve_problem(const FitProblem& p, const ParamVector* warm = nullptr) {
  ParamVector init = warm ? *warm : problem_init(p);
  return p.spec.solve == "stacked" ? solve_stacked(p.fns, init, p.spec.solver)
                                   : solve_profile(p.fns, init, p.spec.solver);
}

struct FitResult {
  ParamVector fit;
  VarianceReport report;
};

FitResult fit_problem(const FitProblem& p) {
  FitResult out;
  out.fit = solve_problem(p);
  MomentEstimates m = empirical_moments(p.fns, out.fit, p.spec.solver.fd_step_rel);
  ScoreRows rows = score_rows(p.fns, out.fit);
  out.report = variance_report(m, rows, p.fns.theta_is_partial_score);
  return out;
}

// ---------------------------------------------------------------------------
// Output helpers. Files are written in binary mode with locale-free
// formatting so reruns are byte-identical.

std::string format_full(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string format_short(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write output file " + path.string());
  out << content;
  if (!out) throw ConfigError("failed writing output file " + path.string());
}

fs::path prepare_out_dir(const std::string& dir) {
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir + ": " + ec.message());
  return p;
}

json vector_json(const Vector& v) {
  json a = json::array();
  for (std::size_t i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

json wald_intervals(const Vector& psi, const Matrix& var, double z) {
  json out = json::array();
  for (std::size_t i = 0; i < psi.size(); ++i) {
    double se = std::sqrt(std::max(0.0, var(i, i)));
    out.push_back(json::array({psi[i] - z * se, psi[i] + z * se}));
  }
  return out;
}

const char* verdict_name(GapVerdict v) {
  switch (v) {
    case GapVerdict::kPass:
      return "pass";
    case GapVerdict::kWarn:
      return "warn";
    default:
      return "fail";
  }
}

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// fit

std::string human_fit_table(const FitSpec& spec, const FitResult& r, std::size_t n) {
  std::ostringstream out;
  out << "two-stage fit: " << spec.estimator << " on " << spec.data << " (n = " << n << ", "
      << spec.solve << " solve)\n\n";
  out << "target      estimate      se(naive)     se(corrected) se(general)\n";
  const Vector& psi = r.fit.psi;
  for (std::size_t i = 0; i < psi.size(); ++i) {
    char line[160];
    std::snprintf(line, sizeof line, "psi%-8zu %-13.6g %-13.6g %-13.6g %-13.6g\n", i + 1, psi[i],
                  std::sqrt(std::max(0.0, r.report.naive(i, i))),
                  std::sqrt(std::max(0.0, r.report.corrected_score(i, i))),
                  std::sqrt(std::max(0.0, r.report.general(i, i))));
    out << line;
  }
  if (!r.report.corrected_score_valid)
    out << "note: nuisance equations are not partial scores; the corrected column "
           "is reported for comparison only\n";
  const Vector& theta = r.fit.theta;
  if (theta.size() > 0) {
    out << "\nnuisance theta:";
    for (std::size_t i = 0; i < theta.size(); ++i) out << ' ' << format_short(theta[i]);
    out << "\n";
  } else if (spec.known_theta) {
    out << "\nnuisance theta fixed at:";
    for (std::size_t i = 0; i < spec.known_theta->size(); ++i)
      out << ' ' << format_short((*spec.known_theta)[i]);
    out << "\n";
  }
  if (r.report.diagnostics.applicable) {
    const IdentityDiagnostics& d = r.report.diagnostics;
    out << "identity gaps: ddtheta " << format_short(d.ddtheta_gap) << " ("
        << verdict_name(judge_gap(d.ddtheta_gap)) << "), fisher " << format_short(d.fisher_gap)
        << " (" << verdict_name(judge_gap(d.fisher_gap)) << ")\n";
  }
  return out.str();
}

json fit_json(const FitSpec& spec, const FitResult& r, std::size_t n) {
  double z = normal_quantile(0.5 + spec.level / 2.0);
  json j;
  j["command"] = "fit";
  j["data"] = spec.data;
  j["estimator"] = spec.estimator;
  j["solve"] = spec.solve;
  j["n"] = n;
  j["psi"] = vector_json(r.fit.psi);
  if (r.fit.theta.size() > 0) {
    j["theta"] = vector_json(r.fit.theta);
    j["theta_estimated"] = true;
  } else if (spec.known_theta) {
    j["theta"] = vector_json(*spec.known_theta);
    j["theta_estimated"] = false;
  } else {
    j["theta"] = json::array();
    j["theta_estimated"] = false;
  }
  j["level"] = spec.level;
  json ci;
  ci["naive"] = wald_intervals(r.fit.psi, r.report.naive, z);
  ci["corrected_score"] = wald_intervals(r.fit.psi, r.report.corrected_score, z);
  ci["general"] = wald_intervals(r.fit.psi, r.report.general, z);
  j["ci"] = ci;
  j["variance"] = json::parse(variance_report_json(r.report));
  j["corrected_score_valid"] = r.report.corrected_score_valid;
  if (spec.format == "point" && r.fit.psi.size() == 2) {
    json ate;
    AteContrast naive = ate_contrast(r.fit.psi, r.report.naive);
    ate["estimate"] = naive.estimate;
    json se;
    se["naive"] = std::sqrt(std::max(0.0, naive.variance));
    se["corrected_score"] =
        std::sqrt(std::max(0.0, ate_contrast(r.fit.psi, r.report.corrected_score).variance));
    se["general"] = std::sqrt(std::max(0.0, ate_contrast(r.fit.psi, r.report.general).variance));
    ate["se"] = se;
    j["ate"] = ate;
  }
  return j;
}

int cmd_fit(const CommonArgs& args) {
  json cfg = load_config(args.config_path);
  FitSpec spec = parse_fit_spec(cfg, "fit config");
  FitProblem problem;
  load_problem(problem, spec);
  FitResult r = fit_problem(problem);

  fs::path out = prepare_out_dir(args.out_dir);
  std::string table = human_fit_table(spec, r, problem.fns.n_units);
  write_file(out / "estimate.json", dump_json(fit_json(spec, r, problem.fns.n_units)));
  write_file(out / "estimate.txt", table);
  if (!args.quiet) {
    std::cout << table;
    std::cout << "wrote " << (out / "estimate.json").string() << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// diagnose

int cmd_diagnose(const CommonArgs& args) {
  json cfg = load_config(args.config_path);
  FitSpec spec = parse_fit_spec(cfg, "diagnose config");
  FitProblem problem;
  load_problem(problem, spec);
  FitResult r = fit_problem(problem);
  const IdentityDiagnostics& d = r.report.diagnostics;

  json j;
  j["command"] = "diagnose";
  j["data"] = spec.data;
  j["estimator"] = spec.estimator;
  j["n"] = problem.fns.n_units;
  j["applicable"] = d.applicable;
  std::ostringstream lines;
  if (d.applicable) {
    json gaps, verdicts;
    gaps["ddtheta"] = d.ddtheta_gap;
    gaps["fisher"] = d.fisher_gap;
    gaps["orthogonality"] = d.orthogonality_gap;
    verdicts["ddtheta"] = verdict_name(judge_gap(d.ddtheta_gap));
    verdicts["fisher"] = verdict_name(judge_gap(d.fisher_gap));
    verdicts["orthogonality"] = verdict_name(judge_gap(d.orthogonality_gap));
    j["gaps"] = gaps;
    j["verdicts"] = verdicts;
    lines << "ddtheta identity:     " << verdict_name(judge_gap(d.ddtheta_gap))
          << "  (relative gap " << format_short(d.ddtheta_gap) << ")\n"
          << "fisher identity:      " << verdict_name(judge_gap(d.fisher_gap))
          << "  (relative gap " << format_short(d.fisher_gap) << ")\n"
          << "residual orthogonality: " << verdict_name(judge_gap(d.orthogonality_gap))
          << "  (gap " << format_short(d.orthogonality_gap) << ")\n";
  } else {
    j["gaps"] = nullptr;
    j["verdicts"] = nullptr;
    lines << "identity diagnostics: not applicable (no nuisance model)\n";
  }

  fs::path out = prepare_out_dir(args.out_dir);
  write_file(out / "diagnostics.json", dump_json(j));
  if (!args.quiet) {
    std::cout << lines.str();
    std::cout << "wrote " << (out / "diagnostics.json").string() << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateSpec {
  std::string name;
  std::string generator;  // point_treatment | longitudinal | mom_nuisance
  std::string estimator = "iptw";
  std::size_t n = 2000;
  std::size_t replications = 1000;
  double effect = 1.0;
  double confounding = 1.0;
  int horizon = 3;
  double level = 0.95;
  double failure_cap = 0.02;
};

SimulateSpec parse_simulate_spec(const json& j) {
  const std::string where = "simulate config";
  check_keys(j,
             {"name", "generator", "estimator", "n", "replications", "effect", "confounding",
              "horizon", "level", "failure_cap"},
             where);
  SimulateSpec spec;
  if (find_field(j, "name")) spec.name = get_string(j, "name", where);
  spec.generator = get_string(j, "generator", where);
  if (spec.generator != "point_treatment" && spec.generator != "longitudinal" &&
      spec.generator != "mom_nuisance")
    throw ConfigError("unknown generator \"" + spec.generator +
                      "\": expected point_treatment, longitudinal, or mom_nuisance");
  bool is_point = spec.generator == "point_treatment";
  if (find_field(j, "estimator")) {
    if (!is_point)
      throw ConfigError("field \"estimator\" in " + where +
                        " only applies to the point_treatment generator");
    spec.estimator = get_string(j, "estimator", where);
    if (spec.estimator != "iptw" && spec.estimator != "aipw")
      throw ConfigError("field \"estimator\" in " + where + " must be \"iptw\" or \"aipw\"");
  }
  if (find_field(j, "effect") && !is_point)
    throw ConfigError("field \"effect\" in " + where +
                      " only applies to the point_treatment generator");
  if (find_field(j, "confounding") && !is_point)
    throw ConfigError("field \"confounding\" in " + where +
                      " only applies to the point_treatment generator");
  if (find_field(j, "horizon") && spec.generator != "longitudinal")
    throw ConfigError("field \"horizon\" in " + where +
                      " only applies to the longitudinal generator");
  spec.n = get_count(j, "n", where, spec.n);
  if (spec.n < 50) throw ConfigError("field \"n\" in " + where + " must be at least 50");
  spec.replications = get_count(j, "replications", where, spec.replications);
  if (spec.replications < 2)
    throw ConfigError("field \"replications\" in " + where + " must be at least 2");
  spec.effect = get_number(j, "effect", where, spec.effect);
  spec.confounding = get_number(j, "confounding", where, spec.confounding);
  spec.horizon = int(get_count(j, "horizon", where, std::size_t(spec.horizon)));
  spec.level = get_number(j, "level", where, spec.level);
  if (!(spec.level > 0.0 && spec.level < 1.0))
    throw ConfigError("field \"level\" in " + where + " must lie in (0, 1)");
  spec.failure_cap = get_number(j, "failure_cap", where, spec.failure_cap);
  if (spec.failure_cap < 0.0 || spec.failure_cap > 1.0)
    throw ConfigError("field \"failure_cap\" in " + where + " must lie in [0, 1]");
  return spec;
}

json coverage_json(const CoverageSummary& c) {
  json j;
  j["rate"] = vector_json(c.rate);
  j["se"] = vector_json(c.se);
  return j;
}

int cmd_simulate(const CommonArgs& args) {
  SimulateSpec spec = parse_simulate_spec(load_config(args.config_path));

  std::function<ReplicationRecord(Rng&)> replicate;
  Vector truth;
  if (spec.generator == "point_treatment") {
    PointScenario sc{spec.n, spec.effect, spec.confounding};
    truth = point_truth(sc).psi;
    if (spec.estimator == "aipw")
      replicate = [sc](Rng& rng) { return replicate_point_aipw(sc, rng); };
    else
      replicate = [sc](Rng& rng) { return replicate_point_iptw(sc, rng); };
  } else if (spec.generator == "longitudinal") {
    LongScenario sc{spec.n, spec.horizon};
    if (sc.horizon < 1 || sc.horizon > 10)
      throw ConfigError("field \"horizon\" in simulate config must lie in [1, 10]");
    truth = long_truth().psi;
    spec.estimator = "snmm";
    replicate = [sc](Rng& rng) { return replicate_long_snmm(sc, rng); };
  } else {
    MomScenario sc{spec.n};
    MomTruth t = mom_truth();
    truth = Vector{t.psi};
    spec.estimator = "mom_ratio";
    replicate = [sc](Rng& rng) { return replicate_mom(sc, rng); };
  }

  MonteCarloOptions opt;
  opt.replications = spec.replications;
  opt.seed = args.seed;
  opt.threads = resolve_threads(args.threads);
  opt.failure_cap = spec.failure_cap;
  if (!args.quiet)
    std::cout << "running " << spec.replications << " replications of " << spec.generator
              << " (n = " << spec.n << ", estimator " << spec.estimator << ")\n";
  MonteCarloOutcome<ReplicationRecord> mc = run_replications<ReplicationRecord>(opt, replicate);
  ScenarioSummary s = summarize_records(mc.results, mc.attempted, mc.failed, truth, spec.level);

  json j;
  j["command"] = "simulate";
  if (!spec.name.empty()) j["name"] = spec.name;
  j["generator"] = spec.generator;
  j["estimator"] = spec.estimator;
  j["n"] = spec.n;
  j["replications"] = spec.replications;
  j["completed"] = mc.results.size();
  j["failed"] = mc.failed;
  j["seed"] = args.seed;
  j["level"] = spec.level;
  j["truth"] = vector_json(s.truth);
  j["bias"] = vector_json(s.bias);
  j["empirical_variance"] = matrix_json(s.empirical_variance);
  j["mean_naive"] = matrix_json(s.mean_naive);
  j["mean_corrected_score"] = matrix_json(s.mean_corrected_score);
  j["mean_general"] = matrix_json(s.mean_general);
  json cov;
  cov["naive"] = coverage_json(s.naive);
  cov["corrected_score"] = coverage_json(s.corrected_score);
  cov["general"] = coverage_json(s.general);
  j["coverage"] = cov;

  std::ostringstream csv;
  csv << "rep";
  for (std::size_t c = 0; c < truth.size(); ++c) csv << ",psi" << c + 1;
  csv << "\r\n";
  for (std::size_t i = 0; i < mc.results.size(); ++i) {
    csv << i + 1;
    const Vector& psi = mc.results[i].psi;
    for (std::size_t c = 0; c < psi.size(); ++c) csv << ',' << format_full(psi[c]);
    csv << "\r\n";
  }

  fs::path out = prepare_out_dir(args.out_dir);
  write_file(out / "simulation.json", dump_json(j));
  write_file(out / "estimates.csv", csv.str());
  if (!args.quiet) {
    std::cout << "completed " << mc.results.size() << "/" << spec.replications << " (failed "
              << mc.failed << ")\n";
    for (std::size_t c = 0; c < truth.size(); ++c)
      std::cout << "psi" << c + 1 << ": bias " << format_short(s.bias[c]) << ", coverage naive "
                << format_short(s.naive.rate[c]) << " corrected "
                << format_short(s.corrected_score.rate[c]) << " general "
                << format_short(s.general.rate[c]) << "\n";
    std::cout << "wrote " << (out / "simulation.json").string() << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// bootstrap

int cmd_bootstrap(const CommonArgs& args, int b_flag, double level_flag) {
  json cfg = load_config(args.config_path);
  const std::string where = "bootstrap config";
  // The replicate count is the one key beyond the shared fit spec.
  std::size_t b = get_count(cfg, "b", where, 500);
  cfg.erase("b");
  FitSpec spec = parse_fit_spec(cfg, where);
  if (b_flag >= 0) b = std::size_t(b_flag);
  if (level_flag >= 0.0) {
    if (!(level_flag > 0.0 && level_flag < 1.0))
      throw ConfigError("--level must lie in (0, 1)");
    spec.level = level_flag;
  }

  FitProblem problem;
  load_problem(problem, spec);
  ParamVector full = solve_problem(problem);

  auto refit = [&problem, &spec, &full](const std::vector<std::size_t>& idx, const Vector&) {
    FitProblem sub;
    sub.spec = spec;
    if (spec.format == "point") {
      sub.rows.reserve(idx.size());
      for (std::size_t i : idx) sub.rows.push_back(problem.rows[i]);
    } else {
      sub.persons.reserve(idx.size());
      for (std::size_t i : idx) sub.persons.push_back(problem.persons[i]);
    }
    bind_problem(sub);
    return solve_problem(sub, &full).psi;
  };

  BootstrapOptions opt;
  opt.replicates = b;
  opt.seed = args.seed;
  opt.threads = resolve_threads(args.threads);
  opt.level = spec.level;
  if (!args.quiet)
    std::cout << "bootstrap: " << b << " resamples of " << problem.units() << " units\n";
  BootstrapResult r = percentile_bootstrap(problem.units(), full.psi, refit, opt);

  json j;
  j["command"] = "bootstrap";
  j["data"] = spec.data;
  j["estimator"] = spec.estimator;
  j["n"] = problem.units();
  j["b"] = b;
  j["seed"] = args.seed;
  j["level"] = spec.level;
  j["attempted"] = r.attempted;
  j["failed"] = r.failed;
  j["estimate"] = vector_json(r.estimate);
  j["ci_lower"] = vector_json(r.lower);
  j["ci_upper"] = vector_json(r.upper);

  std::ostringstream csv;
  csv << "draw";
  for (std::size_t c = 0; c < r.estimate.size(); ++c) csv << ",psi" << c + 1;
  csv << "\r\n";
  for (std::size_t i = 0; i < r.draws.size(); ++i) {
    csv << i + 1;
    for (std::size_t c = 0; c < r.draws[i].size(); ++c) csv << ',' << format_full(r.draws[i][c]);
    csv << "\r\n";
  }

  fs::path out = prepare_out_dir(args.out_dir);
  write_file(out / "bootstrap.json", dump_json(j));
  write_file(out / "bootstrap_draws.csv", csv.str());
  if (!args.quiet) {
    for (std::size_t c = 0; c < r.estimate.size(); ++c)
      std::cout << "psi" << c + 1 << ": " << format_short(r.estimate[c]) << "  ["
                << format_short(r.lower[c]) << ", " << format_short(r.upper[c]) << "]\n";
    std::cout << "wrote " << (out / "bootstrap.json").string() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"two-stage estimating-equation toolkit"};
  app.require_subcommand(1);

  CommonArgs fit_args, sim_args, boot_args, diag_args;
  int boot_b = -1;
  double boot_level = -1.0;

  auto add_common = [](CLI::App* cmd, CommonArgs& a) {
    cmd->add_option("--config", a.config_path, "JSON run configuration")->required();
    cmd->add_option("--out", a.out_dir, "output directory (default: current)");
    cmd->add_option("--seed", a.seed, "RNG seed (default: 1)");
    cmd->add_option("--threads", a.threads, "worker threads (default: available cores)")
        ->check(CLI::NonNegativeNumber);
    cmd->add_flag("--quiet", a.quiet, "suppress progress output");
  };

  CLI::App* fit = app.add_subcommand("fit", "fit an estimator on CSV data");
  add_common(fit, fit_args);
  CLI::App* sim = app.add_subcommand("simulate", "run a Monte Carlo scenario");
  add_common(sim, sim_args);
  CLI::App* boot = app.add_subcommand("bootstrap", "percentile bootstrap intervals");
  add_common(boot, boot_args);
  boot->add_option("--b", boot_b, "bootstrap replicates (default: 500 or config)");
  boot->add_option("--level", boot_level, "confidence level (default: 0.95 or config)");
  CLI::App* diag = app.add_subcommand("diagnose", "score-identity diagnostics");
  add_common(diag, diag_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (fit->parsed()) return cmd_fit(fit_args);
    if (sim->parsed()) return cmd_simulate(sim_args);
    if (boot->parsed()) return cmd_bootstrap(boot_args, boot_b, boot_level);
    return cmd_diagnose(diag_args);
  } catch (const eqsw::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const eqsw::Error& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
}
