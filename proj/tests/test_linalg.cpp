#include "qbda/linalg.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace qbda;

namespace {

Matrix random_spd(std::mt19937_64& rng, Index dim) {
  std::normal_distribution<double> normal;
  Matrix a(dim, dim);
  for (Index i = 0; i < dim; ++i)
    for (Index j = 0; j < dim; ++j) a(i, j) = normal(rng);
  return a.transpose() * a + Matrix::Identity(dim, dim);
}

// Plain Gauss–Jordan with partial pivoting, independent of Eigen's solvers.
Matrix gauss_jordan_inverse(Matrix a) {
  const Index n = a.rows();
  Matrix inv = Matrix::Identity(n, n);
  for (Index c = 0; c < n; ++c) {
    Index piv = c;
    for (Index r = c + 1; r < n; ++r)
      if (std::abs(a(r, c)) > std::abs(a(piv, c))) piv = r;
    a.row(c).swap(a.row(piv));
    inv.row(c).swap(inv.row(piv));
    const double d = a(c, c);
    a.row(c) /= d;
    inv.row(c) /= d;
    for (Index r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = a(r, c);
      a.row(r) -= f * a.row(c);
      inv.row(r) -= f * inv.row(c);
    }
  }
  return inv;
}

}  // namespace

TEST_CASE("cholesky of identity and diagonal matrices") {
  const CholFactor id = cholesky(SpdMatrix::identity(3));
  CHECK(id.lower().isApprox(Matrix::Identity(3, 3)));
  CHECK(id.log_det() == doctest::Approx(0.0));

  Matrix d(2, 2);
  d << 4, 0, 0, 9;
  const CholFactor f = cholesky(SpdMatrix(d));
  Matrix expected(2, 2);
  expected << 2, 0, 0, 3;
  CHECK((f.lower() - expected).norm() < 1e-15);
  CHECK(f.log_det() == doctest::Approx(std::log(36.0)).epsilon(1e-14));
  CHECK(f.jitter() == 0.0);
}

TEST_CASE("cholesky reconstructs the input and matches the eigenvalue product") {
  std::mt19937_64 rng(7);
  const Matrix m = random_spd(rng, 5);
  const CholFactor f = cholesky(SpdMatrix(m));
  CHECK((f.reconstruct() - m).cwiseAbs().maxCoeff() < 1e-10);
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(m);
  CHECK(f.log_det() == doctest::Approx(eig.eigenvalues().array().log().sum()).epsilon(1e-10));
}

TEST_CASE("quad_form examples") {
  const CholFactor id = cholesky(SpdMatrix::identity(2));
  CHECK(quad_form(id, Vector::Map(std::array<double, 2>{3, 4}.data(), 2)) == doctest::Approx(25.0));
  Vector diag(2);
  diag << 4, 9;
  const CholFactor f = cholesky(SpdMatrix::diagonal(diag));
  Vector v(2);
  v << 2, 3;
  CHECK(quad_form(f, v) == doctest::Approx(2.0));
  CHECK(quad_form(f, Vector::Zero(2)) == 0.0);
}

TEST_CASE("quad_form agrees with a Gauss-Jordan inverse on random matrices") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 200; ++trial) {
    const Index dim = 1 + trial % 8;
    const Matrix m = random_spd(rng, dim);
    Vector v(dim);
    for (Index i = 0; i < dim; ++i) v(i) = normal(rng);
    const double expected = v.dot(gauss_jordan_inverse(m) * v);
    const double got = quad_form(cholesky(SpdMatrix(m)), v);
    CHECK(std::abs(got - expected) <= 1e-8 * std::abs(expected));
  }
}

TEST_CASE("log_det scales with dim * log c") {
  std::mt19937_64 rng(3);
  for (Index dim : {1, 3, 6}) {
    const Matrix m = random_spd(rng, dim);
    for (double c : {1e-3, 0.5, 7.0, 1e4}) {
      const double lhs = cholesky(SpdMatrix(c * m)).log_det();
      const double rhs = cholesky(SpdMatrix(m)).log_det() + static_cast<double>(dim) * std::log(c);
      CHECK(std::abs(lhs - rhs) < 1e-10);
    }
  }
}

TEST_CASE("SpdMatrix symmetrizes its input") {
  Matrix m(2, 2);
  m << 2, 1, 0, 2;
  const SpdMatrix s(m);
  CHECK(s(0, 1) == 0.5);
  CHECK(s(1, 0) == 0.5);
  Matrix lower(2, 2);
  lower << 3, 99, 1, 3;
  CHECK(SpdMatrix::from_lower(lower)(0, 1) == 1.0);
  CHECK_THROWS_AS(SpdMatrix(Matrix(2, 3)), DimensionMismatch);
}

TEST_CASE("jitter, breakdown and non-finite input") {
  // Rank one: singular, rescued by the smallest jitter step.
  Vector a(3);
  a << 1, 2, 3;
  const SpdMatrix rank_one(a * a.transpose());
  const auto rescued = try_cholesky(rank_one);
  REQUIRE(rescued.has_value());
  CHECK(rescued->jitter() > 0.0);
  CHECK_FALSE(try_cholesky(rank_one, JitterPolicy::none()).has_value());

  Matrix neg(2, 2);
  neg << 1, 0, 0, -1;
  CHECK_FALSE(try_cholesky(SpdMatrix(neg)).has_value());
  CHECK_THROWS_AS(cholesky(SpdMatrix(neg)), NotPositiveDefinite);

  Matrix nan = Matrix::Identity(2, 2);
  nan(1, 1) = std::nan("");
  CHECK_THROWS_AS(try_cholesky(SpdMatrix(nan)), NonFiniteInput);

  CHECK_FALSE(try_cholesky(SpdMatrix(Matrix::Zero(2, 2))).has_value());
}

TEST_CASE("empirical_cov examples") {
  Matrix s(2, 2);
  s << 0, 0, 2, 0;
  Matrix expected(2, 2);
  expected << 2, 0, 0, 0;
  CHECK((empirical_cov(s).matrix() - expected).norm() < 1e-15);

  const Matrix constant = Matrix::Constant(10, 3, 4.2);
  CHECK((empirical_cov(constant, 1e-6).matrix() - 1e-6 * Matrix::Identity(3, 3)).norm() < 1e-15);

  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal;
  Matrix iid(10000, 3);
  for (Index i = 0; i < iid.rows(); ++i)
    for (Index j = 0; j < 3; ++j) iid(i, j) = normal(rng);
  CHECK((empirical_cov(iid).matrix() - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() < 0.1);

  std::vector<Vector> rows;
  for (Index i = 0; i < 50; ++i) rows.push_back(iid.row(i).transpose());
  CHECK((empirical_cov(rows).matrix() - empirical_cov(iid.topRows(50)).matrix()).norm() < 1e-12);

  CHECK_THROWS_AS(empirical_cov(Matrix(1, 3)), InsufficientSamples);
}

TEST_CASE("empirical_cov is symmetric positive semidefinite") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 50; ++trial) {
    const Index n = 2 + trial % 7;
    const Index p = 1 + trial % 5;
    Matrix s(n, p);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < p; ++j) s(i, j) = normal(rng);
    const Matrix c = empirical_cov(s).matrix();
    CHECK(c == c.transpose());
    CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(c).eigenvalues().minCoeff() >= -1e-12);
  }
}
