// Copyright 2026 the eqsw authors
// SPDX-License-Identifier: Apache-2.0
//
// Minimal dense linear-algebra and numerical-differentiation kernel.
// Everything downstream works with matrices of order dim(psi)+dim(theta),
// i.e. a few dozen at most, so all storage is dense row-major and all
// algorithms are the simple O(n^3) classics.
#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <vector>

#include "eqsw/errors.hpp"

namespace eqsw {

/// Dense real vector. Entries are checked to be finite on construction
/// from data; mutation through operator[] is the caller's responsibility.
class Vector {
 public:
  Vector() = default;
  explicit Vector(std::size_t n, double fill = 0.0);
  Vector(std::initializer_list<double> xs);
  static Vector from(std::vector<double> xs);

  std::size_t size() const { return v_.size(); }
  bool empty() const { return v_.empty(); }
  double& operator[](std::size_t i) { return v_[i]; }
  double operator[](std::size_t i) const { return v_[i]; }
  const std::vector<double>& values() const { return v_; }

  Vector& operator+=(const Vector& o);
  Vector& operator-=(const Vector& o);
  Vector& operator*=(double s);
  friend Vector operator+(Vector a, const Vector& b) { return a += b; }
  friend Vector operator-(Vector a, const Vector& b) { return a -= b; }
  friend Vector operator*(double s, Vector a) { return a *= s; }

  double dot(const Vector& o) const;
  double inf_norm() const;
  double two_norm() const;
  bool all_finite() const;

 private:
  std::vector<double> v_;
};

/// Dense real matrix, row-major. Zero-sized dimensions are legal; they
/// show up as the theta blocks of nuisance-free problems.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  static Matrix identity(std::size_t n);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  /// Column vector from a Vector.
  static Matrix column(const Vector& v);
  /// u * v^T
  static Matrix outer(const Vector& u, const Vector& v);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t i, std::size_t j) { return a_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a_[i * cols_ + j]; }

  Matrix& operator+=(const Matrix& o);
  Matrix& operator-=(const Matrix& o);
  Matrix& operator*=(double s);
  friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
  friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
  friend Matrix operator*(double s, Matrix a) { return a *= s; }
  Matrix operator*(const Matrix& o) const;
  Vector apply(const Vector& x) const;

  Matrix transposed() const;
  Matrix symmetrized() const;  // (m + m^T)/2
  bool is_square() const { return rows_ == cols_; }
  bool is_symmetric(double tol) const;
  bool all_finite() const;
  double max_abs() const;

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> a_;
};

/// Solves a * x = b by LU with partial pivoting.
/// Throws SingularMatrix when a zero pivot appears or the estimated
/// infinity-norm condition number exceeds 1e12.
Matrix solve_linear(const Matrix& a, const Matrix& b);
Vector solve_linear(const Matrix& a, const Vector& b);

/// Inverse of a square matrix through solve_linear against the identity.
Matrix inverse(const Matrix& a);

/// Inverse of a symmetric matrix: symmetrizes the input, inverts, and
/// symmetrizes the result. Requires symmetry within 1e-8 (relative to the
/// matrix scale); throws NotSymmetric otherwise.
Matrix sym_inverse(const Matrix& m);

/// Smallest eigenvalue of a symmetric matrix by cyclic Jacobi rotations,
/// to absolute tolerance 1e-8 or better. Throws NotSymmetric when the
/// symmetry tolerance is violated.
double min_eigenvalue(const Matrix& m);

/// All eigenvalues of a symmetric matrix (unsorted), same method.
std::vector<double> sym_eigenvalues(const Matrix& m);

using VectorFn = std::function<Vector(const Vector&)>;

/// Step size for central differences: rel * max(1, |x|_inf).
double fd_step(const Vector& x, double rel = 1e-6);

/// Central-difference Jacobian, one column per coordinate of x.
/// Throws NonFiniteEvaluation when f produces NaN or Inf.
Matrix finite_diff_jacobian(const VectorFn& f, const Vector& x, double h);
Matrix finite_diff_jacobian(const VectorFn& f, const Vector& x);

/// Compensated (Kahan) scalar accumulator; keeps Pn sums deterministic
/// against reordering at the 1e-12 level required downstream.
struct KahanSum {
  double sum = 0.0;
  double carry = 0.0;
  void add(double x) {
    double y = x - carry;
    double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
  double value() const { return sum; }
};

/// Running compensated mean of vectors of a fixed length.
class VectorMean {
 public:
  explicit VectorMean(std::size_t dim) : acc_(dim), n_(0) {}
  void add(const Vector& v);
  std::size_t count() const { return n_; }
  Vector mean() const;

 private:
  std::vector<KahanSum> acc_;
  std::size_t n_;
};

/// Running compensated mean of matrices of a fixed shape.
class MatrixMean {
 public:
  MatrixMean(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), acc_(rows * cols), n_(0) {}
  void add(const Matrix& m);
  std::size_t count() const { return n_; }
  Matrix mean() const;

 private:
  std::size_t rows_, cols_;
  std::vector<KahanSum> acc_;
  std::size_t n_;
};

}  // namespace eqsw
