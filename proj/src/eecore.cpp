// Copyright 2026 the eqsw authors
// SPDX-License-Identifier: Apache-2.0
#include "eqsw/eecore.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "eqsw/errors.hpp"

namespace eqsw {

namespace {

void check_dims(const EstimatingFunctionSet& fns) {
  if (fns.dim_psi < 1) throw ConfigError("estimating function set needs dim_psi >= 1");
  if (fns.n_units < fns.dim_psi + fns.dim_theta)
    throw ConfigError("fewer units than parameters");
  if (!fns.u1) throw ConfigError("u1 callback missing");
  if (fns.dim_theta > 0 && !fns.u2) throw ConfigError("u2 callback missing with dim_theta > 0");
}

Vector stack(const Vector& a, const Vector& b) {
  Vector out(a.size() + b.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i];
  for (std::size_t i = 0; i < b.size(); ++i) out[a.size() + i] = b[i];
  return out;
}

Vector head(const Vector& x, std::size_t n) {
  Vector out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i];
  return out;
}

Vector tail(const Vector& x, std::size_t n) {
  Vector out(n);
  std::size_t off = x.size() - n;
  for (std::size_t i = 0; i < n; ++i) out[i] = x[off + i];
  return out;
}

void require_row_finite(const Vector& v, const char* what) {
  if (!v.all_finite()) throw NonFiniteEvaluation(std::string(what) + " returned NaN/Inf");
}

/// Averaged Jacobian blocks at (psi, theta): analytic per-unit callbacks
/// when present, otherwise central differences of the averaged function.
Matrix mean_d_u1_dpsi(const EstimatingFunctionSet& fns, const Vector& psi, const Vector& theta,
                      double h) {
  if (fns.d_u1_dpsi) {
    MatrixMean acc(fns.dim_psi, fns.dim_psi);
    for (std::size_t i = 0; i < fns.n_units; ++i) acc.add(fns.d_u1_dpsi(i, psi, theta));
    return acc.mean();
  }
  VectorFn f = [&](const Vector& p) { return mean_u1(fns, p, theta); };
  return finite_diff_jacobian(f, psi, h);
}

Matrix mean_d_u1_dtheta(const EstimatingFunctionSet& fns, const Vector& psi, const Vector& theta,
                        double h) {
  if (fns.dim_theta == 0) return Matrix(fns.dim_psi, 0);
  if (fns.d_u1_dtheta) {
    MatrixMean acc(fns.dim_psi, fns.dim_theta);
    for (std::size_t i = 0; i < fns.n_units; ++i) acc.add(fns.d_u1_dtheta(i, psi, theta));
    return acc.mean();
  }
  VectorFn f = [&](const Vector& t) { return mean_u1(fns, psi, t); };
  return finite_diff_jacobian(f, theta, h);
}

Matrix mean_d_u2_dtheta(const EstimatingFunctionSet& fns, const Vector& theta, double h) {
  if (fns.dim_theta == 0) return Matrix(0, 0);
  if (fns.d_u2_dtheta) {
    MatrixMean acc(fns.dim_theta, fns.dim_theta);
    for (std::size_t i = 0; i < fns.n_units; ++i) acc.add(fns.d_u2_dtheta(i, theta));
    return acc.mean();
  }
  VectorFn f = [&](const Vector& t) { return mean_u2(fns, t); };
  return finite_diff_jacobian(f, theta, h);
}

}  // namespace

Vector mean_u1(const EstimatingFunctionSet& fns, const Vector& psi, const Vector& theta) {
  VectorMean acc(fns.dim_psi);
  for (std::size_t i = 0; i < fns.n_units; ++i) {
    Vector v = fns.u1(i, psi, theta);
    require_row_finite(v, "u1");
    acc.add(v);
  }
  return acc.mean();
}

Vector mean_u2(const EstimatingFunctionSet& fns, const Vector& theta) {
  if (fns.dim_theta == 0) return Vector();
  VectorMean acc(fns.dim_theta);
  for (std::size_t i = 0; i < fns.n_units; ++i) {
    Vector v = fns.u2(i, theta);
    require_row_finite(v, "u2");
    acc.add(v);
  }
  return acc.mean();
}

Vector solve_root(const std::function<Vector(const Vector&)>& residual,
                  const std::function<Matrix(const Vector&)>& jacobian, Vector x,
                  const SolverConfig& cfg, const std::string& context,
                  const std::function<void(const Vector&)>& iterate_check) {
  if (x.size() == 0) return x;
  Vector f = residual(x);
  require_row_finite(f, context.c_str());
  double fnorm = f.two_norm();
  for (int iter = 0; iter < cfg.max_iter; ++iter) {
    if (f.inf_norm() <= cfg.tol) return x;
    Matrix j = jacobian(x);
    Vector step;
    try {
      step = solve_linear(j, f);
    } catch (const SingularMatrix& e) {
      throw SingularJacobian(context + ": " + e.what());
    }
    double t = 1.0;
    bool accepted = false;
    for (int h = 0; h <= cfg.max_halvings; ++h) {
      Vector cand = x;
      cand -= t * step;
      // Trial points with a non-finite residual, or ones that push fitted
      // probabilities outside the positivity bounds, are rejected, not fatal.
      bool usable = true;
      Vector fc;
      try {
        fc = residual(cand);
        usable = fc.all_finite();
      } catch (const NonFiniteEvaluation&) {
        usable = false;
      } catch (const Positivity&) {
        usable = false;
      }
      if (usable) {
        double cnorm = fc.two_norm();
        if (cnorm < fnorm || fc.inf_norm() <= cfg.tol) {
          x = cand;
          f = std::move(fc);
          fnorm = cnorm;
          accepted = true;
          break;
        }
      }
      t *= 0.5;
    }
    if (!accepted)
      throw NoConvergence(context + ": no residual decrease after " +
                          std::to_string(cfg.max_halvings) + " step halvings");
    if (iterate_check) iterate_check(x);
  }
  if (f.inf_norm() <= cfg.tol) return x;
  throw NoConvergence(context + ": residual " + std::to_string(f.inf_norm()) + " after " +
                      std::to_string(cfg.max_iter) + " iterations");
}

ParamVector solve_stacked(const EstimatingFunctionSet& fns, const ParamVector& init,
                          const SolverConfig& cfg) {
  check_dims(fns);
  std::size_t p = fns.dim_psi, q = fns.dim_theta;
  auto residual = [&](const Vector& x) {
    Vector psi = head(x, p), theta = tail(x, q);
    return stack(mean_u1(fns, psi, theta), mean_u2(fns, theta));
  };
  auto jacobian = [&](const Vector& x) {
    Vector psi = head(x, p), theta = tail(x, q);
    double h = fd_step(x, cfg.fd_step_rel);
    Matrix j11 = mean_d_u1_dpsi(fns, psi, theta, h);
    Matrix j12 = mean_d_u1_dtheta(fns, psi, theta, h);
    Matrix j22 = mean_d_u2_dtheta(fns, theta, h);
    Matrix j(p + q, p + q);
    for (std::size_t i = 0; i < p; ++i) {
      for (std::size_t k = 0; k < p; ++k) j(i, k) = j11(i, k);
      for (std::size_t k = 0; k < q; ++k) j(i, p + k) = j12(i, k);
    }
    // u2 does not depend on psi, so the lower-left block stays zero.
    for (std::size_t i = 0; i < q; ++i)
      for (std::size_t k = 0; k < q; ++k) j(p + i, p + k) = j22(i, k);
    return j;
  };
  Vector x = solve_root(residual, jacobian, stack(init.psi, init.theta), cfg, "solve_stacked");
  return ParamVector{head(x, p), tail(x, q)};
}

ParamVector solve_profile(const EstimatingFunctionSet& fns, const ParamVector& init,
                          const SolverConfig& cfg) {
  check_dims(fns);
  Vector theta = init.theta;
  if (fns.dim_theta > 0) {
    auto residual = [&](const Vector& t) { return mean_u2(fns, t); };
    auto jacobian = [&](const Vector& t) {
      return mean_d_u2_dtheta(fns, t, fd_step(t, cfg.fd_step_rel));
    };
    theta = solve_root(residual, jacobian, theta, cfg, "solve_profile[theta]");
  }
  auto residual = [&](const Vector& p) { return mean_u1(fns, p, theta); };
  auto jacobian = [&](const Vector& p) {
    return mean_d_u1_dpsi(fns, p, theta, fd_step(p, cfg.fd_step_rel));
  };
  Vector psi = solve_root(residual, jacobian, init.psi, cfg, "solve_profile[psi]");
  return ParamVector{psi, theta};
}

ParamVector default_init(const EstimatingFunctionSet& fns, const SolverConfig& cfg) {
  check_dims(fns);
  Vector theta(fns.dim_theta);
  if (fns.dim_theta > 0) {
    auto residual = [&](const Vector& t) { return mean_u2(fns, t); };
    auto jacobian = [&](const Vector& t) {
      return mean_d_u2_dtheta(fns, t, fd_step(t, cfg.fd_step_rel));
    };
    theta = solve_root(residual, jacobian, theta, cfg, "default_init[theta]");
  }
  return ParamVector{Vector(fns.dim_psi), theta};
}

MomentEstimates empirical_moments(const EstimatingFunctionSet& fns, const ParamVector& at,
                                  double fd_step_rel) {
  check_dims(fns);
  std::size_t p = fns.dim_psi, q = fns.dim_theta;
  const Vector& psi = at.psi;
  const Vector& theta = at.theta;
  double h = fd_step(stack(psi, theta), fd_step_rel);

  MatrixMean bread(p, p), dtu1(p, q), meat(p, p), cross(p, q), fisher(q, q), dtu2(q, q);
  for (std::size_t i = 0; i < fns.n_units; ++i) {
    Vector v1 = fns.u1(i, psi, theta);
    require_row_finite(v1, "u1");
    meat.add(Matrix::outer(v1, v1));

    if (fns.d_u1_dpsi) {
      bread.add(fns.d_u1_dpsi(i, psi, theta));
    } else {
      VectorFn f = [&](const Vector& pp) { return fns.u1(i, pp, theta); };
      bread.add(finite_diff_jacobian(f, psi, h));
    }

    if (q > 0) {
      Vector v2 = fns.u2(i, theta);
      require_row_finite(v2, "u2");
      cross.add(Matrix::outer(v1, v2));
      fisher.add(Matrix::outer(v2, v2));

      if (fns.d_u1_dtheta) {
        dtu1.add(fns.d_u1_dtheta(i, psi, theta));
      } else {
        VectorFn f = [&](const Vector& tt) { return fns.u1(i, psi, tt); };
        dtu1.add(finite_diff_jacobian(f, theta, h));
      }
      if (fns.d_u2_dtheta) {
        dtu2.add(fns.d_u2_dtheta(i, theta));
      } else {
        VectorFn f = [&](const Vector& tt) { return fns.u2(i, tt); };
        dtu2.add(finite_diff_jacobian(f, theta, h));
      }
    }
  }

  MomentEstimates m;
  m.bread = bread.mean();
  m.d_theta_u1 = dtu1.mean();
  m.meat = meat.mean().symmetrized();
  m.cross = cross.mean();
  m.fisher = fisher.mean().symmetrized();
  m.d_theta_u2 = dtu2.mean();
  m.n = fns.n_units;
  if (!m.bread.all_finite() || !m.d_theta_u1.all_finite() || !m.d_theta_u2.all_finite())
    throw NonFiniteEvaluation("empirical moment matrices");
  return m;
}

ScoreRows score_rows(const EstimatingFunctionSet& fns, const ParamVector& at) {
  check_dims(fns);
  ScoreRows rows;
  rows.u1.reserve(fns.n_units);
  rows.u2.reserve(fns.n_units);
  for (std::size_t i = 0; i < fns.n_units; ++i) {
    Vector v1 = fns.u1(i, at.psi, at.theta);
    require_row_finite(v1, "u1");
    rows.u1.push_back(std::move(v1));
    if (fns.dim_theta > 0) {
      Vector v2 = fns.u2(i, at.theta);
      require_row_finite(v2, "u2");
      rows.u2.push_back(std::move(v2));
    }
  }
  return rows;
}

}  // namespace eqsw
