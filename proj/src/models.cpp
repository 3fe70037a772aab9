#include "qbda/models.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace qbda {

std::string to_string(WeightEstimator e) {
  return e == WeightEstimator::kCentered ? "centered" : "uncentered";
}

WeightEstimator parse_weight_estimator(const std::string& s) {
  if (s == "centered") return WeightEstimator::kCentered;
  if (s == "uncentered") return WeightEstimator::kUncentered;
  throw std::invalid_argument("unknown W estimator '" + s + "' (expected centered|uncentered)");
}

Vector MomentModel::mbar(const Vector& theta) const {
  return moment_contributions(theta).colwise().mean().transpose();
}

SpdMatrix weight_matrix(const MomentModel& model, const Vector& theta, WeightEstimator estimator) {
  return weight_matrix(model, theta, model.mbar(theta), estimator);
}

SpdMatrix weight_matrix(const MomentModel& model, const Vector& theta, const Vector& mbar,
                        WeightEstimator estimator) {
  Matrix contrib = model.moment_contributions(theta);
  if (estimator == WeightEstimator::kCentered) contrib.rowwise() -= mbar.transpose();
  const Index m = contrib.cols();
  Matrix w = Matrix::Zero(m, m);
  w.selfadjointView<Eigen::Lower>().rankUpdate(contrib.transpose(),
                                               1.0 / static_cast<double>(contrib.rows()));
  return SpdMatrix::from_lower(std::move(w));
}

Vector moment_root(const MomentModel& model, int max_iter) {
  const Index k = model.param_dim();
  Vector theta = Vector::Zero(k);
  Vector g = model.mbar(theta);
  double best = g.squaredNorm();
  for (int it = 0; it < max_iter && best > 0.0; ++it) {
    Matrix jac(g.size(), k);
    for (Index j = 0; j < k; ++j) {
      const double h = 1e-6 * std::max(1.0, std::abs(theta(j)));
      Vector shifted = theta;
      shifted(j) += h;
      jac.col(j) = (model.mbar(shifted) - g) / h;
    }
    const Vector next = theta - jac.colPivHouseholderQr().solve(g);
    const Vector g_next = model.mbar(next);
    if (!next.allFinite() || !(g_next.squaredNorm() < best)) break;
    theta = next;
    g = g_next;
    best = g.squaredNorm();
  }
  return theta;
}

// ---------------------------------------------------------------------------

LinearRegressionModel::LinearRegressionModel(RegressionData data) : data_(std::move(data)) {
  if (data_.X.rows() != data_.y.size())
    throw DimensionMismatch("regression: X has " + std::to_string(data_.X.rows()) +
                            " rows but y has " + std::to_string(data_.y.size()));
  if (data_.X.rows() < 1 || data_.X.cols() < 1)
    throw InvalidDimension("regression: empty design matrix");
}

Matrix LinearRegressionModel::moment_contributions(const Vector& theta) const {
  const Vector resid = data_.y - data_.X * theta;
  return (-2.0 * resid).asDiagonal() * data_.X;
}

Vector LinearRegressionModel::mbar(const Vector& theta) const {
  const Vector resid = data_.y - data_.X * theta;
  return (-2.0 / static_cast<double>(sample_size())) * (data_.X.transpose() * resid);
}

std::optional<double> LinearRegressionModel::risk(const Vector& theta) const {
  return (data_.y - data_.X * theta).squaredNorm() / static_cast<double>(sample_size());
}

// ---------------------------------------------------------------------------

IvModel::IvModel(IvData data) : data_(std::move(data)) {
  const Index n = data_.y.size();
  if (n < 1) throw InvalidDimension("iv: empty dataset");
  if (data_.x.size() != n || data_.z.size() != n || data_.controls.rows() != n)
    throw DimensionMismatch("iv: y, x, z and controls must have the same number of rows");
  const Index c = data_.controls.cols();
  regressors_.resize(n, c + 2);
  regressors_.col(0).setOnes();
  regressors_.col(1) = data_.x;
  regressors_.rightCols(c) = data_.controls;
  instruments_.resize(n, c + 2);
  instruments_.col(0) = data_.z;
  instruments_.col(1).setOnes();
  instruments_.rightCols(c) = data_.controls;
  y_ = data_.y;
}

Matrix IvModel::moment_contributions(const Vector& theta) const {
  const Vector resid = y_ - regressors_ * theta;
  return resid.asDiagonal() * instruments_;
}

Vector IvModel::mbar(const Vector& theta) const {
  const Vector resid = y_ - regressors_ * theta;
  return (instruments_.transpose() * resid) / static_cast<double>(sample_size());
}

// ---------------------------------------------------------------------------

LocationModel::LocationModel(Matrix points) : points_(std::move(points)) {
  if (points_.rows() < 1 || points_.cols() < 1) throw InvalidDimension("location: no points");
  mean_ = points_.colwise().mean().transpose();
}

Matrix LocationModel::moment_contributions(const Vector& theta) const {
  return (-points_).rowwise() + theta.transpose();
}

Vector LocationModel::mbar(const Vector& theta) const { return theta - mean_; }

// ---------------------------------------------------------------------------

GaussianPrior GaussianPrior::centered(Index dim, double sd) {
  return GaussianPrior{Vector::Zero(dim), sd};
}

double log_prior(const GaussianPrior& prior, const Vector& theta) {
  if (theta.size() != prior.mean.size())
    throw DimensionMismatch("log_prior: theta has length " + std::to_string(theta.size()) +
                            ", prior has " + std::to_string(prior.mean.size()));
  const double k = static_cast<double>(theta.size());
  const double z2 = (theta - prior.mean).squaredNorm() / (prior.sd * prior.sd);
  return -0.5 * z2 - k * (std::log(prior.sd) + 0.5 * std::log(2.0 * std::numbers::pi));
}

SyntheticData generate_synthetic(Index n, Index k, std::uint64_t seed) {
  if (k < 3) throw InvalidDimension("generate_synthetic: k must be at least 3, got " + std::to_string(k));
  if (n < 1) throw InvalidDimension("generate_synthetic: n must be positive");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  SyntheticData out;
  out.theta_true = Vector::Zero(k);
  out.theta_true.head(3).setOnes();
  out.data.X.resize(n, k);
  out.data.y.resize(n);
  out.noise_var.resize(n);
  for (Index i = 0; i < n; ++i) {
    out.data.X(i, 0) = 1.0;
    for (Index j = 1; j < k; ++j) out.data.X(i, j) = normal(rng);
    const double x2 = out.data.X(i, 1);
    const double x3 = out.data.X(i, 2);
    const double var = (1.0 + x2 * x2 + x3 * x3) / 3.0;
    out.noise_var(i) = var;
    out.data.y(i) = out.data.X.row(i).dot(out.theta_true) + std::sqrt(var) * normal(rng);
  }
  return out;
}

}  // namespace qbda
