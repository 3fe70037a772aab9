#include "qbda/linalg.hpp"

#include <cmath>
#include <string>

namespace qbda {

namespace {

void require_square(const Matrix& m) {
  if (m.rows() != m.cols()) {
    throw DimensionMismatch("matrix is " + std::to_string(m.rows()) + "x" +
                            std::to_string(m.cols()) + ", expected square");
  }
  if (m.rows() < 1) throw DimensionMismatch("matrix dimension must be at least 1");
}

// Unpivoted lower Cholesky of the lower triangle of `a` shifted by `shift` on
// the diagonal. Returns false on a non-positive pivot.
bool factor_lower(const Matrix& a, double shift, Matrix& l) {
  const Index n = a.rows();
  l.setZero(n, n);
  for (Index j = 0; j < n; ++j) {
    double d = a(j, j) + shift;
    for (Index k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0) || !std::isfinite(d)) return false;
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (Index i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (Index k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return true;
}

}  // namespace

SpdMatrix::SpdMatrix(const Matrix& m) {
  require_square(m);
  m_ = 0.5 * (m + m.transpose());
}

SpdMatrix SpdMatrix::from_lower(Matrix m) {
  require_square(m);
  m.triangularView<Eigen::StrictlyUpper>() = m.transpose();
  return SpdMatrix(std::move(m), Trusted{});
}

SpdMatrix SpdMatrix::identity(Index dim) {
  if (dim < 1) throw DimensionMismatch("matrix dimension must be at least 1");
  return SpdMatrix(Matrix::Identity(dim, dim), Trusted{});
}

SpdMatrix SpdMatrix::diagonal(const Vector& diag) {
  if (diag.size() < 1) throw DimensionMismatch("matrix dimension must be at least 1");
  return SpdMatrix(Matrix(diag.asDiagonal()), Trusted{});
}

CholFactor::CholFactor(Matrix lower, double jitter) : lower_(std::move(lower)), jitter_(jitter) {
  log_det_ = 2.0 * lower_.diagonal().array().log().sum();
}

Vector CholFactor::solve_lower(const Vector& v) const {
  if (v.size() != dim()) {
    throw DimensionMismatch("vector length " + std::to_string(v.size()) +
                            " does not match factor dimension " + std::to_string(dim()));
  }
  return lower_.triangularView<Eigen::Lower>().solve(v);
}

Matrix CholFactor::reconstruct() const { return lower_ * lower_.transpose(); }

std::optional<CholFactor> try_cholesky(const SpdMatrix& m, const JitterPolicy& policy) {
  const Matrix& a = m.matrix();
  if (!a.allFinite()) throw NonFiniteInput("cholesky: matrix has non-finite entries");

  Matrix l;
  if (factor_lower(a, 0.0, l)) return CholFactor(std::move(l), 0.0);
  if (!policy.enabled) return std::nullopt;

  const double mean_diag = a.diagonal().mean();
  for (double scale : policy.scales) {
    const double shift = scale * mean_diag;
    if (!(shift > 0.0)) break;
    if (factor_lower(a, shift, l)) return CholFactor(std::move(l), shift);
  }
  return std::nullopt;
}

CholFactor cholesky(const SpdMatrix& m, const JitterPolicy& policy) {
  auto f = try_cholesky(m, policy);
  if (!f) {
    throw NotPositiveDefinite("cholesky: matrix of dimension " + std::to_string(m.dim()) +
                              " is not positive definite after jitter escalation");
  }
  return *std::move(f);
}

double quad_form(const CholFactor& f, const Vector& v) { return f.solve_lower(v).squaredNorm(); }

SpdMatrix empirical_cov(const Matrix& samples, double ridge) {
  const Index n = samples.rows();
  if (n < 2) throw InsufficientSamples("empirical_cov needs at least 2 samples");
  const Vector mean = samples.colwise().mean();
  const Matrix centered = samples.rowwise() - mean.transpose();
  Matrix cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  cov.diagonal().array() += ridge;
  return SpdMatrix(cov);
}

SpdMatrix empirical_cov(std::span<const Vector> samples, double ridge) {
  if (samples.size() < 2) throw InsufficientSamples("empirical_cov needs at least 2 samples");
  const Index p = samples.front().size();
  Matrix rows(static_cast<Index>(samples.size()), p);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].size() != p) throw DimensionMismatch("empirical_cov: samples differ in length");
    rows.row(static_cast<Index>(i)) = samples[i].transpose();
  }
  return empirical_cov(rows, ridge);
}

}  // namespace qbda
