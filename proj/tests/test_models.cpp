#include "qbda/models.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

using namespace qbda;

namespace {

class FixedRowsModel final : public MomentModel {
 public:
  explicit FixedRowsModel(Matrix rows) : rows_(std::move(rows)) {}
  Index param_dim() const override { return rows_.cols(); }
  Index moment_dim() const override { return rows_.cols(); }
  Index sample_size() const override { return rows_.rows(); }
  std::string name() const override { return "fixed"; }
  Matrix moment_contributions(const Vector&) const override { return rows_; }

 private:
  Matrix rows_;
};

IvData random_iv(std::mt19937_64& rng, Index n) {
  std::normal_distribution<double> normal;
  IvData d;
  d.y.resize(n);
  d.x.resize(n);
  d.z.resize(n);
  d.controls.resize(n, 4);
  for (Index i = 0; i < n; ++i) {
    d.z(i) = normal(rng);
    for (Index c = 0; c < 4; ++c) d.controls(i, c) = normal(rng);
    d.x(i) = 0.7 * d.z(i) + normal(rng);
    d.y(i) = 1.0 + 0.5 * d.x(i) + d.controls.row(i).sum() + normal(rng);
  }
  d.control_names = {"a", "b", "c", "d"};
  return d;
}

}  // namespace

TEST_CASE("synthetic data layout and determinism") {
  const SyntheticData a = generate_synthetic(100, 5, 42);
  const SyntheticData b = generate_synthetic(100, 5, 42);
  CHECK(a.data.X == b.data.X);
  CHECK(a.data.y == b.data.y);
  CHECK((a.data.X.col(0).array() == 1.0).all());
  CHECK(a.data.X.cols() == 5);
  Vector expected(5);
  expected << 1, 1, 1, 0, 0;
  CHECK(a.theta_true == expected);
  const SyntheticData c = generate_synthetic(100, 5, 43);
  CHECK(c.data.y != a.data.y);
  CHECK_THROWS_AS(generate_synthetic(100, 2, 1), InvalidDimension);
}

TEST_CASE("noise variance averages to one") {
  // E[(1 + x2^2 + x3^2) / 3] = 1.
  double total = 0.0;
  for (std::uint64_t s = 1; s <= 20; ++s) total += generate_synthetic(100, 5, s).noise_var.mean();
  CHECK(total / 20.0 == doctest::Approx(1.0).epsilon(0.2));
}

TEST_CASE("OLS recovers theta_true within three standard errors") {
  const SyntheticData syn = generate_synthetic(1000, 20, 3);
  const Matrix& X = syn.data.X;
  const Matrix xtx_inv = (X.transpose() * X).inverse();
  const Vector beta = xtx_inv * X.transpose() * syn.data.y;
  // Heteroskedasticity-robust sandwich standard errors.
  const Vector resid = syn.data.y - X * beta;
  const Matrix meat = X.transpose() * resid.array().square().matrix().asDiagonal() * X;
  const Vector se = (xtx_inv * meat * xtx_inv).diagonal().cwiseSqrt();
  for (Index j = 0; j < beta.size(); ++j) CHECK(std::abs(beta(j) - syn.theta_true(j)) < 3.0 * se(j) + 1e-3);
}

TEST_CASE("linear regression moment contributions") {
  RegressionData d{Matrix::Ones(1, 2), Vector::Constant(1, 3.0)};
  const LinearRegressionModel model(d);
  const Matrix rows = model.moment_contributions(Vector::Ones(2));
  CHECK(rows(0, 0) == -2.0);
  CHECK(rows(0, 1) == -2.0);

  SyntheticData syn = generate_synthetic(50, 4, 1);
  syn.data.y = syn.data.X * syn.theta_true;
  const LinearRegressionModel noiseless(syn.data);
  CHECK(noiseless.moment_contributions(syn.theta_true).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("mbar is the column mean of the contributions") {
  const SyntheticData syn = generate_synthetic(80, 5, 2);
  const LinearRegressionModel model(syn.data);
  const Vector theta = Vector::LinSpaced(5, -1.0, 2.0);
  const Vector direct = model.moment_contributions(theta).colwise().mean().transpose();
  CHECK((model.mbar(theta) - direct).norm() < 1e-12);
  CHECK(FixedRowsModel(Matrix::Zero(4, 3)).mbar(Vector::Zero(3)) == Vector::Zero(3));
}

TEST_CASE("mbar vanishes at the OLS solution and moment_root finds it") {
  const SyntheticData syn = generate_synthetic(300, 5, 8);
  const LinearRegressionModel model(syn.data);
  const Matrix& X = syn.data.X;
  const Vector ols = (X.transpose() * X).ldlt().solve(X.transpose() * syn.data.y);
  CHECK(model.mbar(ols).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((moment_root(model) - ols).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("IV contributions equal r_i Z_i and mbar equals Z^T r / N") {
  std::mt19937_64 rng(4);
  const IvData d = random_iv(rng, 40);
  const IvModel model(d);
  CHECK(model.param_dim() == 6);
  CHECK(model.moment_dim() == 6);

  Matrix Q(40, 6), Z(40, 6);
  Q.col(0).setOnes();
  Q.col(1) = d.x;
  Q.rightCols(4) = d.controls;
  Z.col(0) = d.z;
  Z.col(1).setOnes();
  Z.rightCols(4) = d.controls;
  Vector theta(6);
  theta << 0.3, -0.2, 1.0, 0.5, -0.5, 2.0;
  const Vector r = d.y - Q * theta;
  const Matrix rows = model.moment_contributions(theta);
  for (Index i = 0; i < 40; ++i) CHECK((rows.row(i) - r(i) * Z.row(i)).norm() < 1e-12);
  CHECK((model.mbar(theta) - Z.transpose() * r / 40.0).norm() < 1e-12);

  const Vector gmm = (Z.transpose() * Q).partialPivLu().solve(Z.transpose() * d.y);
  CHECK(model.mbar(gmm).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("weight matrix hand examples") {
  CHECK(weight_matrix(FixedRowsModel(Matrix::Constant(5, 2, 3.0)), Vector::Zero(2)).matrix().norm() == 0.0);

  Vector a(3);
  a << 1, -2, 0.5;
  Matrix rows(2, 3);
  rows.row(0) = a.transpose();
  rows.row(1) = -a.transpose();
  const FixedRowsModel model(rows);
  const Matrix expected = a * a.transpose();
  CHECK((weight_matrix(model, Vector::Zero(3)).matrix() - expected).norm() < 1e-15);
  CHECK((weight_matrix(model, Vector::Zero(3), WeightEstimator::kUncentered).matrix() - expected).norm() < 1e-15);

  // Uncentered differs from centered by mbar mbar^T.
  Matrix shifted = rows;
  shifted.rowwise() += Vector::Ones(3).transpose();
  const FixedRowsModel off(shifted);
  const Matrix diff = weight_matrix(off, Vector::Zero(3), WeightEstimator::kUncentered).matrix() -
                      weight_matrix(off, Vector::Zero(3)).matrix();
  CHECK((diff - Matrix::Ones(3, 3)).norm() < 1e-14);
}

TEST_CASE("weight matrix at theta_true approaches the population covariance") {
  // Cov(-2 e x) = 4 E[sigma^2(x) x x^T] = diag(4, 20/3, 20/3) for K = 3.
  const SyntheticData syn = generate_synthetic(100000, 3, 12);
  const LinearRegressionModel model(syn.data);
  const Matrix w = weight_matrix(model, syn.theta_true).matrix();
  Matrix expected = Matrix::Zero(3, 3);
  expected.diagonal() << 4.0, 20.0 / 3.0, 20.0 / 3.0;
  for (Index i = 0; i < 3; ++i) CHECK(w(i, i) == doctest::Approx(expected(i, i)).epsilon(0.05));
  CHECK(std::abs(w(0, 1)) < 0.1);
  CHECK(std::abs(w(0, 2)) < 0.1);
  CHECK(std::abs(w(1, 2)) < 0.15);
}

TEST_CASE("weight matrix is invariant under permutation of observations") {
  const SyntheticData syn = generate_synthetic(60, 4, 21);
  std::vector<Index> perm(60);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(1);
  std::shuffle(perm.begin(), perm.end(), rng);
  RegressionData p{syn.data.X(perm, Eigen::all), syn.data.y(perm)};
  const Vector theta = Vector::LinSpaced(4, 0.5, 1.5);
  for (auto est : {WeightEstimator::kCentered, WeightEstimator::kUncentered}) {
    const Matrix a = weight_matrix(LinearRegressionModel(syn.data), theta, est).matrix();
    const Matrix b = weight_matrix(LinearRegressionModel(p), theta, est).matrix();
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12 * a.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("mbar matches the central difference of the risk") {
  const SyntheticData syn = generate_synthetic(200, 5, 6);
  const LinearRegressionModel model(syn.data);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> normal(0.0, 0.5);
  for (int trial = 0; trial < 10; ++trial) {
    Vector theta = syn.theta_true;
    for (Index j = 0; j < 5; ++j) theta(j) += normal(rng);
    Vector fd(5);
    for (Index j = 0; j < 5; ++j) {
      Vector hi = theta, lo = theta;
      hi(j) += 1e-5;
      lo(j) -= 1e-5;
      fd(j) = (*model.risk(hi) - *model.risk(lo)) / 2e-5;
    }
    const Vector g = model.mbar(theta);
    CHECK((g - fd).norm() / g.norm() <= 1e-5);
  }
}

TEST_CASE("location model has a constant weight matrix") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  Matrix pts(30, 2);
  for (Index i = 0; i < 30; ++i) pts.row(i) << normal(rng), normal(rng);
  const LocationModel model(pts);
  const Matrix w0 = weight_matrix(model, Vector::Zero(2)).matrix();
  Vector far(2);
  far << 40.0, -7.0;
  CHECK((weight_matrix(model, far).matrix() - w0).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((model.mbar(far) - (far - pts.colwise().mean().transpose())).norm() < 1e-12);
}

TEST_CASE("log prior examples") {
  const GaussianPrior prior = GaussianPrior::centered(5);
  const double mode = 5.0 * -std::log(100.0 * std::sqrt(2.0 * M_PI));
  CHECK(log_prior(prior, Vector::Zero(5)) == doctest::Approx(mode).epsilon(1e-14));
  Vector shifted = Vector::Zero(5);
  shifted(2) = 100.0;
  CHECK(log_prior(prior, shifted) == doctest::Approx(mode - 0.5).epsilon(1e-14));
  const Vector t = Vector::LinSpaced(5, -3.0, 4.0);
  CHECK(log_prior(prior, t) == log_prior(prior, -t));
}

TEST_CASE("weight estimator names round trip") {
  CHECK(parse_weight_estimator(to_string(WeightEstimator::kUncentered)) == WeightEstimator::kUncentered);
  CHECK(parse_weight_estimator("centered") == WeightEstimator::kCentered);
  CHECK_THROWS(parse_weight_estimator("bogus"));
}
