#pragma once

#include <Eigen/Dense>

#include <array>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

namespace qbda {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

class NotPositiveDefinite : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonFiniteInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class InsufficientSamples : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Symmetric matrix with exactly mirrored entries. Construction from an
/// arbitrary square matrix averages it with its transpose.
class SpdMatrix {
 public:
  explicit SpdMatrix(const Matrix& m);

  /// Builds from a matrix whose lower triangle is authoritative; the upper
  /// triangle is overwritten by the mirror image.
  static SpdMatrix from_lower(Matrix m);
  static SpdMatrix identity(Index dim);
  static SpdMatrix diagonal(const Vector& diag);

  Index dim() const { return m_.rows(); }
  const Matrix& matrix() const { return m_; }
  double operator()(Index i, Index j) const { return m_(i, j); }

 private:
  struct Trusted {};
  SpdMatrix(Matrix m, Trusted) : m_(std::move(m)) {}

  Matrix m_;
};

/// Diagonal jitter escalation applied when plain Cholesky breaks down.
/// Attempt k adds scales[k] * mean(diag) * I to the original matrix.
struct JitterPolicy {
  std::array<double, 3> scales{1e-10, 1e-8, 1e-6};
  bool enabled = true;

  static JitterPolicy none() {
    JitterPolicy p;
    p.enabled = false;
    return p;
  }
};

class CholFactor {
 public:
  Index dim() const { return lower_.rows(); }
  const Matrix& lower() const { return lower_; }
  double log_det() const { return log_det_; }
  /// Diagonal shift that was needed for the factorization to succeed.
  double jitter() const { return jitter_; }

  /// Solves L u = v.
  Vector solve_lower(const Vector& v) const;
  /// Returns L L^T.
  Matrix reconstruct() const;

 private:
  friend std::optional<CholFactor> try_cholesky(const SpdMatrix&, const JitterPolicy&);
  CholFactor(Matrix lower, double jitter);

  Matrix lower_;
  double log_det_ = 0.0;
  double jitter_ = 0.0;
};

/// Returns std::nullopt when the matrix is not positive definite after the
/// jitter escalation. Throws NonFiniteInput on NaN/Inf entries.
std::optional<CholFactor> try_cholesky(const SpdMatrix& m, const JitterPolicy& policy = {});

/// Throwing variant of try_cholesky.
CholFactor cholesky(const SpdMatrix& m, const JitterPolicy& policy = {});

/// v^T M^{-1} v through one forward substitution.
double quad_form(const CholFactor& f, const Vector& v);

/// Sample covariance (divisor n - 1) of the rows of `samples`, plus ridge * I.
SpdMatrix empirical_cov(const Matrix& samples, double ridge = 0.0);
SpdMatrix empirical_cov(std::span<const Vector> samples, double ridge = 0.0);

}  // namespace qbda
