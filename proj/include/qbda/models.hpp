#pragma once

#include "qbda/linalg.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace qbda {

class InvalidDimension : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Estimator used for W(theta), the covariance of sqrt(N) * mbar(theta).
enum class WeightEstimator {
  kCentered,    ///< N^-1 sum (m_i - mbar)(m_i - mbar)^T
  kUncentered,  ///< N^-1 sum m_i m_i^T
};

std::string to_string(WeightEstimator e);
WeightEstimator parse_weight_estimator(const std::string& s);

/// A target problem described by per-observation moment functions m_i(theta).
class MomentModel {
 public:
  virtual ~MomentModel() = default;

  virtual Index param_dim() const = 0;
  virtual Index moment_dim() const = 0;
  virtual Index sample_size() const = 0;
  virtual std::string name() const = 0;

  /// N x M matrix whose i-th row is m_i(theta).
  virtual Matrix moment_contributions(const Vector& theta) const = 0;

  /// Column mean of moment_contributions. Models override this with a cheaper
  /// route that never materializes the N x M matrix.
  virtual Vector mbar(const Vector& theta) const;

  /// Empirical risk r(theta) when the moments are the gradient of one.
  virtual std::optional<double> risk(const Vector& /*theta*/) const { return std::nullopt; }
};

/// W(theta) from the moment contributions.
SpdMatrix weight_matrix(const MomentModel& model, const Vector& theta,
                        WeightEstimator estimator = WeightEstimator::kCentered);

/// Same as above with mbar(theta) already known.
SpdMatrix weight_matrix(const MomentModel& model, const Vector& theta, const Vector& mbar,
                        WeightEstimator estimator);

/// Least-squares root of mbar(theta) = 0 by Gauss–Newton from zero with a
/// forward-difference Jacobian. Exact after one step for moments affine in theta.
Vector moment_root(const MomentModel& model, int max_iter = 20);

struct RegressionData {
  Matrix X;  ///< N x K, first column all ones
  Vector y;
};

/// Linear regression under quadratic loss r(theta) = N^-1 sum (y_i - theta^T x_i)^2,
/// with moments m_i = -2 (y_i - theta^T x_i) x_i so that mbar = grad r.
class LinearRegressionModel final : public MomentModel {
 public:
  explicit LinearRegressionModel(RegressionData data);

  Index param_dim() const override { return data_.X.cols(); }
  Index moment_dim() const override { return data_.X.cols(); }
  Index sample_size() const override { return data_.X.rows(); }
  std::string name() const override { return "linear_regression"; }

  Matrix moment_contributions(const Vector& theta) const override;
  Vector mbar(const Vector& theta) const override;
  std::optional<double> risk(const Vector& theta) const override;

  const RegressionData& data() const { return data_; }

 private:
  RegressionData data_;
};

struct IvData {
  Vector y;         ///< outcome (log GDP per capita)
  Vector x;         ///< endogenous treatment (expropriation risk)
  Vector z;         ///< excluded instrument (log settler mortality)
  Matrix controls;  ///< N x C exogenous controls, constant excluded
  std::vector<std::string> control_names;
};

/// Exactly identified IV regression y = mu + beta x + gamma^T w + u with
/// moments m_i = (y_i - mu - beta x_i - gamma^T w_i) (z_i, 1, w_i^T)^T.
/// Parameter order: (mu, beta, gamma).
class IvModel final : public MomentModel {
 public:
  explicit IvModel(IvData data);

  Index param_dim() const override { return regressors_.cols(); }
  Index moment_dim() const override { return instruments_.cols(); }
  Index sample_size() const override { return regressors_.rows(); }
  std::string name() const override { return "iv_regression"; }

  Matrix moment_contributions(const Vector& theta) const override;
  Vector mbar(const Vector& theta) const override;

  /// Columns (1, x, controls).
  const Matrix& regressors() const { return regressors_; }
  /// Columns (z, 1, controls).
  const Matrix& instruments() const { return instruments_; }
  const IvData& data() const { return data_; }

  static constexpr Index kBetaIndex = 1;

 private:
  IvData data_;
  Matrix regressors_;
  Matrix instruments_;
  Vector y_;
};

/// Location model m_i(theta) = theta - d_i. Its centered W is the sample
/// covariance of the d_i and does not depend on theta, so the quasi-posterior
/// is Gaussian with mean dbar and covariance W / N.
class LocationModel final : public MomentModel {
 public:
  explicit LocationModel(Matrix points);

  Index param_dim() const override { return points_.cols(); }
  Index moment_dim() const override { return points_.cols(); }
  Index sample_size() const override { return points_.rows(); }
  std::string name() const override { return "location"; }

  Matrix moment_contributions(const Vector& theta) const override;
  Vector mbar(const Vector& theta) const override;

  const Matrix& points() const { return points_; }

 private:
  Matrix points_;
  Vector mean_;
};

/// Isotropic normal prior N(mean, sd^2 I).
struct GaussianPrior {
  Vector mean;
  double sd = 100.0;

  static GaussianPrior centered(Index dim, double sd = 100.0);
};

/// Sum of independent normal log-densities, normalizing constants included.
double log_prior(const GaussianPrior& prior, const Vector& theta);

struct SyntheticData {
  RegressionData data;
  Vector noise_var;   ///< sigma_i^2
  Vector theta_true;  ///< (1, 1, 1, 0, ..., 0)
};

/// Heteroskedastic regression: x_1 = 1, x_2..x_K iid N(0,1),
/// sigma_i^2 = (1 + x_2^2 + x_3^2) / 3, y_i ~ N(theta_true^T x_i, sigma_i^2).
SyntheticData generate_synthetic(Index n, Index k, std::uint64_t seed);

}  // namespace qbda
