// Copyright 2026 the eqsw authors
// SPDX-License-Identifier: Apache-2.0
#include "eqsw/numkit.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

namespace eqsw {

namespace {

constexpr double kConditionLimit = 1e12;
constexpr double kSymmetryTol = 1e-8;

void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) throw NonFiniteEvaluation(std::string(what) + " contains NaN/Inf");
}

}  // namespace

Vector::Vector(std::size_t n, double fill) : v_(n, fill) { require_finite(fill, "Vector fill"); }

Vector::Vector(std::initializer_list<double> xs) : v_(xs) {
  for (double x : v_) require_finite(x, "Vector");
}

Vector Vector::from(std::vector<double> xs) {
  for (double x : xs) require_finite(x, "Vector");
  Vector v;
  v.v_ = std::move(xs);
  return v;
}

Vector& Vector::operator+=(const Vector& o) {
  for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += o.v_[i];
  return *this;
}

Vector& Vector::operator-=(const Vector& o) {
  for (std::size_t i = 0; i < v_.size(); ++i) v_[i] -= o.v_[i];
  return *this;
}

Vector& Vector::operator*=(double s) {
  for (double& x : v_) x *= s;
  return *this;
}

double Vector::dot(const Vector& o) const {
  KahanSum acc;
  for (std::size_t i = 0; i < v_.size(); ++i) acc.add(v_[i] * o.v_[i]);
  return acc.value();
}

double Vector::inf_norm() const {
  double m = 0.0;
  for (double x : v_) m = std::max(m, std::fabs(x));
  return m;
}

double Vector::two_norm() const { return std::sqrt(dot(*this)); }

bool Vector::all_finite() const {
  return std::all_of(v_.begin(), v_.end(), [](double x) { return std::isfinite(x); });
}

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), a_(rows * cols, fill) {
  require_finite(fill, "Matrix fill");
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  std::size_t r = rows.size();
  std::size_t c = r == 0 ? 0 : rows.begin()->size();
  Matrix m(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) throw ConfigError("ragged rows in Matrix::from_rows");
    std::size_t j = 0;
    for (double x : row) {
      require_finite(x, "Matrix");
      m(i, j++) = x;
    }
    ++i;
  }
  return m;
}

Matrix Matrix::column(const Vector& v) {
  Matrix m(v.size(), 1);
  for (std::size_t i = 0; i < v.size(); ++i) m(i, 0) = v[i];
  return m;
}

Matrix Matrix::outer(const Vector& u, const Vector& v) {
  Matrix m(u.size(), v.size());
  for (std::size_t i = 0; i < u.size(); ++i)
    for (std::size_t j = 0; j < v.size(); ++j) m(i, j) = u[i] * v[j];
  return m;
}

Matrix& Matrix::operator+=(const Matrix& o) {
  for (std::size_t i = 0; i < a_.size(); ++i) a_[i] += o.a_[i];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& o) {
  for (std::size_t i = 0; i < a_.size(); ++i) a_[i] -= o.a_[i];
  return *this;
}

Matrix& Matrix::operator*=(double s) {
  for (double& x : a_) x *= s;
  return *this;
}

Matrix Matrix::operator*(const Matrix& o) const {
  Matrix out(rows_, o.cols_);
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t k = 0; k < cols_; ++k) {
      double aik = (*this)(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < o.cols_; ++j) out(i, j) += aik * o(k, j);
    }
  }
  return out;
}

Vector Matrix::apply(const Vector& x) const {
  Vector out(rows_);
  for (std::size_t i = 0; i < rows_; ++i) {
    KahanSum acc;
    for (std::size_t j = 0; j < cols_; ++j) acc.add((*this)(i, j) * x[j]);
    out[i] = acc.value();
  }
  return out;
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

Matrix Matrix::symmetrized() const {
  Matrix s(rows_, cols_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) s(i, j) = 0.5 * ((*this)(i, j) + (*this)(j, i));
  return s;
}

bool Matrix::is_symmetric(double tol) const {
  if (!is_square()) return false;
  double scale = std::max(1.0, max_abs());
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = i + 1; j < cols_; ++j)
      if (std::fabs((*this)(i, j) - (*this)(j, i)) > tol * scale) return false;
  return true;
}

bool Matrix::all_finite() const {
  return std::all_of(a_.begin(), a_.end(), [](double x) { return std::isfinite(x); });
}

double Matrix::max_abs() const {
  double m = 0.0;
  for (double x : a_) m = std::max(m, std::fabs(x));
  return m;
}

namespace {

// LU with partial pivoting, in place. Returns the permutation; throws on
// an exactly zero pivot.
struct Lu {
  Matrix lu;
  std::vector<std::size_t> perm;
};

Lu lu_factor(const Matrix& a) {
  std::size_t n = a.rows();
  Lu f{a, std::vector<std::size_t>(n)};
  for (std::size_t i = 0; i < n; ++i) f.perm[i] = i;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    double best = std::fabs(f.lu(k, k));
    for (std::size_t i = k + 1; i < n; ++i) {
      double v = std::fabs(f.lu(i, k));
      if (v > best) {
        best = v;
        piv = i;
      }
    }
    if (best == 0.0) throw SingularMatrix("zero pivot in LU factorization");
    if (piv != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(f.lu(k, j), f.lu(piv, j));
      std::swap(f.perm[k], f.perm[piv]);
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      f.lu(i, k) /= f.lu(k, k);
      double lik = f.lu(i, k);
      for (std::size_t j = k + 1; j < n; ++j) f.lu(i, j) -= lik * f.lu(k, j);
    }
  }
  return f;
}

Vector lu_solve_one(const Lu& f, const Vector& b) {
  std::size_t n = f.perm.size();
  Vector x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = b[f.perm[i]];
  for (std::size_t i = 1; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) x[i] -= f.lu(i, j) * x[j];
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t j = i + 1; j < n; ++j) x[i] -= f.lu(i, j) * x[j];
    x[i] /= f.lu(i, i);
  }
  return x;
}

double inf_operator_norm(const Matrix& a) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) s += std::fabs(a(i, j));
    m = std::max(m, s);
  }
  return m;
}

// Solves against all columns of b with a pre-checked factorization.
Matrix lu_solve(const Lu& f, const Matrix& b) {
  Matrix x(b.rows(), b.cols());
  Vector col(b.rows());
  for (std::size_t j = 0; j < b.cols(); ++j) {
    for (std::size_t i = 0; i < b.rows(); ++i) col[i] = b(i, j);
    Vector xc = lu_solve_one(f, col);
    for (std::size_t i = 0; i < b.rows(); ++i) x(i, j) = xc[i];
  }
  return x;
}

// Condition estimate |A|_inf * |A^-1|_inf; dimensions here are tiny, so the
// explicit inverse is the cheapest reliable estimator.
void check_condition(const Matrix& a, const Lu& f) {
  std::size_t n = a.rows();
  if (n == 0) return;
  Matrix inv = lu_solve(f, Matrix::identity(n));
  if (!inv.all_finite()) throw SingularMatrix("non-finite inverse");
  double cond = inf_operator_norm(a) * inf_operator_norm(inv);
  if (!(cond <= kConditionLimit))
    throw SingularMatrix("condition number " + std::to_string(cond) + " exceeds 1e12");
}

}  // namespace

Matrix solve_linear(const Matrix& a, const Matrix& b) {
  if (!a.is_square()) throw ConfigError("solve_linear: matrix not square");
  if (a.rows() != b.rows()) throw ConfigError("solve_linear: shape mismatch");
  if (!a.all_finite() || !b.all_finite()) throw NonFiniteEvaluation("solve_linear input");
  Lu f = lu_factor(a);
  check_condition(a, f);
  return lu_solve(f, b);
}

Vector solve_linear(const Matrix& a, const Vector& b) {
  Matrix x = solve_linear(a, Matrix::column(b));
  Vector out(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) out[i] = x(i, 0);
  return out;
}

Matrix inverse(const Matrix& a) { return solve_linear(a, Matrix::identity(a.rows())); }

Matrix sym_inverse(const Matrix& m) {
  if (!m.is_symmetric(kSymmetryTol)) throw NotSymmetric("sym_inverse input");
  return inverse(m.symmetrized()).symmetrized();
}

namespace {

// Cyclic Jacobi sweeps; adequate and robust at order <= ~50.
std::vector<double> jacobi_eigenvalues(Matrix a) {
  std::size_t n = a.rows();
  if (n == 0) return {};
  double scale = std::max(1.0, a.max_abs());
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off = std::max(off, std::fabs(a(p, q)));
    if (off <= 1e-13 * scale) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double apq = a(p, q);
        if (std::fabs(apq) <= 1e-300) continue;
        double tau = (a(q, q) - a(p, p)) / (2.0 * apq);
        double t = (tau >= 0 ? 1.0 : -1.0) / (std::fabs(tau) + std::sqrt(1.0 + tau * tau));
        double c = 1.0 / std::sqrt(1.0 + t * t);
        double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = a(i, i);
  return ev;
}

}  // namespace

std::vector<double> sym_eigenvalues(const Matrix& m) {
  if (!m.is_symmetric(kSymmetryTol)) throw NotSymmetric("sym_eigenvalues input");
  return jacobi_eigenvalues(m.symmetrized());
}

double min_eigenvalue(const Matrix& m) {
  std::vector<double> ev = sym_eigenvalues(m);
  if (ev.empty()) throw ConfigError("min_eigenvalue of empty matrix");
  return *std::min_element(ev.begin(), ev.end());
}

double fd_step(const Vector& x, double rel) { return rel * std::max(1.0, x.inf_norm()); }

Matrix finite_diff_jacobian(const VectorFn& f, const Vector& x, double h) {
  if (!(h > 0.0)) throw ConfigError("finite_diff_jacobian: step must be positive");
  Vector xp = x, xm = x;
  Matrix jac;
  for (std::size_t j = 0; j < x.size(); ++j) {
    xp[j] = x[j] + h;
    xm[j] = x[j] - h;
    Vector fp = f(xp);
    Vector fm = f(xm);
    xp[j] = x[j];
    xm[j] = x[j];
    if (!fp.all_finite() || !fm.all_finite())
      throw NonFiniteEvaluation("finite_diff_jacobian: f returned NaN/Inf");
    if (jac.rows() == 0 && jac.cols() == 0) jac = Matrix(fp.size(), x.size());
    for (std::size_t i = 0; i < fp.size(); ++i) jac(i, j) = (fp[i] - fm[i]) / (2.0 * h);
  }
  if (x.size() == 0) {
    Vector f0 = f(x);
    jac = Matrix(f0.size(), 0);
  }
  return jac;
}

Matrix finite_diff_jacobian(const VectorFn& f, const Vector& x) {
  return finite_diff_jacobian(f, x, fd_step(x));
}

void VectorMean::add(const Vector& v) {
  for (std::size_t i = 0; i < acc_.size(); ++i) acc_[i].add(v[i]);
  ++n_;
}

Vector VectorMean::mean() const {
  Vector m(acc_.size());
  for (std::size_t i = 0; i < acc_.size(); ++i) m[i] = acc_[i].value() / double(n_);
  return m;
}

void MatrixMean::add(const Matrix& m) {
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) acc_[i * cols_ + j].add(m(i, j));
  ++n_;
}

Matrix MatrixMean::mean() const {
  Matrix m(rows_, cols_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) m(i, j) = acc_[i * cols_ + j].value() / double(n_);
  return m;
}

}  // namespace eqsw
