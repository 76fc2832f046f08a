// Copyright 2026 the eqsw authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "eqsw/numkit.hpp"
#include "eqsw/rng.hpp"

using namespace eqsw;

namespace {

// Independent solve oracle: plain Gauss-Jordan elimination with full
// row normalization, no pivoting tricks shared with the library path.
std::vector<double> gauss_jordan_solve(std::vector<std::vector<double>> a,
                                       std::vector<double> b) {
  std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
    std::swap(a[col], a[piv]);
    std::swap(b[col], b[piv]);
    double d = a[col][col];
    for (std::size_t j = 0; j < n; ++j) a[col][j] /= d;
    b[col] /= d;
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      double f = a[r][col];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) a[r][j] -= f * a[col][j];
      b[r] -= f * b[col];
    }
  }
  return b;
}

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c) {
  Matrix m(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) m(i, j) = rng.normal();
  return m;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      m = std::max(m, std::fabs(a(i, j) - b(i, j)));
  return m;
}

}  // namespace

TEST_CASE("vector construction rejects non-finite entries") {
  CHECK_THROWS_AS(Vector::from({1.0, std::nan("")}), NonFiniteEvaluation);
  CHECK_THROWS_AS((Vector{1.0, INFINITY}), NonFiniteEvaluation);
  Vector v{1.0, -2.0, 3.0};
  CHECK(v.inf_norm() == 3.0);
  CHECK(v.dot(v) == doctest::Approx(14.0));
  CHECK(v.two_norm() == doctest::Approx(std::sqrt(14.0)));
}

TEST_CASE("matrix basics") {
  Matrix a = Matrix::from_rows({{1.0, 2.0}, {3.0, 4.0}});
  Matrix b = a * Matrix::identity(2);
  CHECK(max_abs_diff(a, b) == 0.0);
  Matrix t = a.transposed();
  CHECK(t(0, 1) == 3.0);
  Vector x{1.0, 1.0};
  Vector y = a.apply(x);
  CHECK(y[0] == doctest::Approx(3.0));
  CHECK(y[1] == doctest::Approx(7.0));
  Matrix o = Matrix::outer(Vector{1.0, 2.0}, Vector{3.0, 4.0});
  CHECK(o(1, 0) == 6.0);
}

TEST_CASE("solve_linear identity and diagonal cases") {
  Matrix b = Matrix::from_rows({{3.0}, {4.0}});
  Matrix x = solve_linear(Matrix::identity(2), b);
  CHECK(x(0, 0) == doctest::Approx(3.0));
  CHECK(x(1, 0) == doctest::Approx(4.0));

  Matrix d = Matrix::from_rows({{2.0, 0.0}, {0.0, 4.0}});
  Matrix rhs = Matrix::from_rows({{2.0}, {4.0}});
  Matrix y = solve_linear(d, rhs);
  CHECK(y(0, 0) == doctest::Approx(1.0));
  CHECK(y(1, 0) == doctest::Approx(1.0));
}

TEST_CASE("solve_linear matches Gauss-Jordan oracle on random 6x6 systems") {
  Rng rng(20260815u);
  for (int rep = 0; rep < 20; ++rep) {
    std::size_t n = 6;
    // Diagonal boost keeps the draw well conditioned.
    std::vector<std::vector<double>> a(n, std::vector<double>(n));
    std::vector<double> b(n);
    Matrix am(n, n);
    Vector bv(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        a[i][j] = rng.normal() + (i == j ? 6.0 : 0.0);
        am(i, j) = a[i][j];
      }
      b[i] = rng.normal();
      bv[i] = b[i];
    }
    Vector x = solve_linear(am, bv);
    std::vector<double> oracle = gauss_jordan_solve(a, b);
    for (std::size_t i = 0; i < n; ++i)
      CHECK(std::fabs(x[i] - oracle[i]) < 1e-10);
    Vector resid = am.apply(x);
    resid -= bv;
    CHECK(resid.inf_norm() < 1e-10 * std::max(1.0, bv.inf_norm()));
  }
}

TEST_CASE("solve_linear recovers x from a*x for well-conditioned a") {
  Rng rng(7u);
  for (int rep = 0; rep < 20; ++rep) {
    Matrix a = random_matrix(rng, 5, 5);
    for (std::size_t i = 0; i < 5; ++i) a(i, i) += 5.0;
    Vector x(5);
    for (std::size_t i = 0; i < 5; ++i) x[i] = rng.normal();
    Vector b = a.apply(x);
    Vector got = solve_linear(a, b);
    got -= x;
    CHECK(got.inf_norm() < 1e-9 * std::max(1.0, x.inf_norm()));
  }
}

TEST_CASE("solve_linear rejects singular and ill-conditioned input") {
  Matrix s = Matrix::from_rows({{1.0, 2.0}, {2.0, 4.0}});
  CHECK_THROWS_AS(solve_linear(s, Matrix::identity(2)), SingularMatrix);
  // cond ~ 1e14 exceeds the 1e12 gate even though the pivot is nonzero.
  Matrix ill = Matrix::from_rows({{1.0, 0.0}, {0.0, 1e-14}});
  CHECK_THROWS_AS(solve_linear(ill, Matrix::identity(2)), SingularMatrix);
}

TEST_CASE("sym_inverse on identity and diagonal") {
  Matrix i3 = sym_inverse(Matrix::identity(3));
  CHECK(max_abs_diff(i3, Matrix::identity(3)) < 1e-12);
  Matrix d = Matrix::from_rows({{2.0, 0.0}, {0.0, 5.0}});
  Matrix di = sym_inverse(d);
  CHECK(di(0, 0) == doctest::Approx(0.5));
  CHECK(di(1, 1) == doctest::Approx(0.2));
  CHECK(di(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("sym_inverse multiply-back on random SPD") {
  Rng rng(99u);
  for (int rep = 0; rep < 10; ++rep) {
    Matrix x = random_matrix(rng, 8, 4);
    Matrix m = x.transposed() * x + Matrix::identity(4);
    Matrix mi = sym_inverse(m);
    CHECK(max_abs_diff(m * mi, Matrix::identity(4)) < 1e-9);
    // Double inversion returns to the original.
    CHECK(max_abs_diff(sym_inverse(mi), m) < 1e-7 * std::max(1.0, m.max_abs()));
  }
}

TEST_CASE("sym_inverse rejects asymmetric input") {
  Matrix a = Matrix::from_rows({{1.0, 2.0}, {0.0, 1.0}});
  CHECK_THROWS_AS(sym_inverse(a), NotSymmetric);
}

TEST_CASE("min_eigenvalue known cases") {
  CHECK(min_eigenvalue(Matrix::identity(2)) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(min_eigenvalue(Matrix(3, 3)) == doctest::Approx(0.0).epsilon(1e-8));
  // Characteristic polynomial x^2 - 4x + 3 has roots 1 and 3.
  Matrix m = Matrix::from_rows({{2.0, 1.0}, {1.0, 2.0}});
  CHECK(std::fabs(min_eigenvalue(m) - 1.0) < 1e-8);
  CHECK_THROWS_AS(min_eigenvalue(Matrix::from_rows({{1.0, 2.0}, {0.0, 1.0}})), NotSymmetric);
}

TEST_CASE("min_eigenvalue shift property") {
  Rng rng(123u);
  Matrix x = random_matrix(rng, 6, 6);
  Matrix m = (x.transposed() * x).symmetrized();
  double base = min_eigenvalue(m);
  for (double c : {-3.0, 0.5, 10.0}) {
    Matrix shifted = m + c * Matrix::identity(6);
    CHECK(std::fabs(min_eigenvalue(shifted) - (base + c)) < 1e-8 * std::max(1.0, m.max_abs()));
  }
}

TEST_CASE("finite_diff_jacobian on identity and linear maps") {
  VectorFn id = [](const Vector& v) { return v; };
  Vector x{0.3, -1.2, 2.0};
  Matrix j = finite_diff_jacobian(id, x);
  CHECK(max_abs_diff(j, Matrix::identity(3)) < 1e-9);

  Matrix a = Matrix::from_rows({{1.0, -2.0, 0.5}, {0.0, 3.0, 1.0}});
  VectorFn lin = [&a](const Vector& v) { return a.apply(v); };
  Matrix ja = finite_diff_jacobian(lin, x);
  CHECK(max_abs_diff(ja, a) < 1e-8);
}

TEST_CASE("finite_diff_jacobian matches analytic nonlinear Jacobian") {
  VectorFn f = [](const Vector& v) { return Vector{v[0] * v[0], v[0] * v[1]}; };
  Vector x{1.0, 2.0};
  Matrix j = finite_diff_jacobian(f, x);
  Matrix analytic = Matrix::from_rows({{2.0, 0.0}, {2.0, 1.0}});
  CHECK(max_abs_diff(j, analytic) < 1e-6);
}

TEST_CASE("finite_diff_jacobian flags non-finite evaluations") {
  VectorFn f = [](const Vector& v) {
    return Vector::from({std::log(v[0])});  // NaN for negative input
  };
  Vector x{1e-9};
  CHECK_THROWS_AS(finite_diff_jacobian(f, x, 1e-3), NonFiniteEvaluation);
}

TEST_CASE("kahan accumulation keeps small terms") {
  KahanSum s;
  s.add(1.0);
  for (int i = 0; i < 1000000; ++i) s.add(1e-16);
  CHECK(s.value() == doctest::Approx(1.0 + 1e-10).epsilon(1e-12));

  VectorMean vm(2);
  vm.add(Vector{1.0, 2.0});
  vm.add(Vector{3.0, 6.0});
  Vector m = vm.mean();
  CHECK(m[0] == doctest::Approx(2.0));
  CHECK(m[1] == doctest::Approx(4.0));

  MatrixMean mm(1, 2);
  mm.add(Matrix::from_rows({{1.0, 0.0}}));
  mm.add(Matrix::from_rows({{3.0, 1.0}}));
  Matrix mmean = mm.mean();
  CHECK(mmean(0, 0) == doctest::Approx(2.0));
  CHECK(mmean(0, 1) == doctest::Approx(0.5));
}

TEST_CASE("rng determinism and moments") {
  Rng a(42u), b(42u);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng r(2026u);
  KahanSum mean, sq;
  int n = 200000;
  for (int i = 0; i < n; ++i) {
    double z = r.normal();
    mean.add(z);
    sq.add(z * z);
  }
  CHECK(std::fabs(mean.value() / n) < 4.0 / std::sqrt(double(n)));
  CHECK(std::fabs(sq.value() / n - 1.0) < 4.0 * std::sqrt(2.0 / double(n)));

  // Distinct derived streams differ; identical inputs coincide.
  CHECK(derive_stream(1, 0) != derive_stream(1, 1));
  CHECK(derive_stream(1, 0) != derive_stream(2, 0));
  CHECK(derive_stream(5, 7) == derive_stream(5, 7));
}
