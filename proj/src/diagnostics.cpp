#include "qbda/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace qbda {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::optional<double> log_det_spd(const Matrix& m) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) return std::nullopt;
  const double ld = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  if (!std::isfinite(ld)) return std::nullopt;
  return ld;
}

// Kolmogorov survival function Q(lambda) = 2 sum (-1)^{k-1} exp(-2 k^2 lambda^2).
double kolmogorov_q(double lambda) {
  if (lambda < 1e-3) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = sign * std::exp(-2.0 * k * k * lambda * lambda);
    sum += term;
    if (std::abs(term) < 1e-16 * std::abs(sum)) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

}  // namespace

void EssReport::attach_wall_clock(double seconds) {
  ess_per_second = seconds > 0.0 ? multi_ess / seconds : kNaN;
}

EssReport multi_ess(const Matrix& draws) {
  EssReport r;
  r.n = draws.rows();
  r.p = draws.cols();
  r.ess_per_second = kNaN;
  if (r.p < 1 || r.n < 4 * r.p) {
    throw InsufficientSamples("multi_ess needs at least 4p draws (n=" + std::to_string(r.n) +
                              ", p=" + std::to_string(r.p) + ")");
  }

  r.batch_size = static_cast<Index>(std::floor(std::sqrt(static_cast<double>(r.n))));
  r.n_batches = r.n / r.batch_size;

  const Vector mean = draws.colwise().mean();
  const Matrix centered = draws.rowwise() - mean.transpose();
  const Matrix lambda = centered.transpose() * centered / static_cast<double>(r.n - 1);

  Matrix batch_means(r.n_batches, r.p);
  for (Index k = 0; k < r.n_batches; ++k) {
    batch_means.row(k) = draws.middleRows(k * r.batch_size, r.batch_size).colwise().mean();
  }
  const Vector grand = batch_means.colwise().mean();
  const Matrix bc = batch_means.rowwise() - grand.transpose();
  const Matrix sigma_bm = static_cast<double>(r.batch_size) * (bc.transpose() * bc) /
                          static_cast<double>(r.n_batches - 1);

  const auto ld_lambda = log_det_spd(lambda);
  const auto ld_bm = log_det_spd(sigma_bm);
  if (!ld_lambda || !ld_bm) {
    r.rank_deficient = true;
    r.multi_ess = kNaN;
    r.ess_per_iter = kNaN;
    r.diagnostic = !ld_lambda ? "sample covariance is not positive definite (constant or collinear columns)"
                              : "batch-means covariance is not positive definite";
    return r;
  }
  r.multi_ess = static_cast<double>(r.n) * std::exp((*ld_lambda - *ld_bm) / static_cast<double>(r.p));
  r.ess_per_iter = r.multi_ess / static_cast<double>(r.n);
  if (r.n_batches < 5 * r.p) {
    r.diagnostic = "only " + std::to_string(r.n_batches) + " batches for dimension " +
                   std::to_string(r.p) + "; batch-means estimate is noisy";
  }
  return r;
}

Vector mcse(const Matrix& draws, double multi_ess_value) {
  const Vector mean = draws.colwise().mean();
  const Matrix centered = draws.rowwise() - mean.transpose();
  const Vector var = centered.colwise().squaredNorm() / static_cast<double>(draws.rows() - 1);
  return (var / multi_ess_value).cwiseSqrt();
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw EmptyInput("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

Percentiles acceptance_percentiles(std::span<const AcceptRecord> records) {
  std::vector<double> a2;
  for (const auto& r : records) {
    if (r.promoted) a2.push_back(r.stage2_prob);
  }
  if (a2.empty()) throw NoPromotions("no promoted proposals among " + std::to_string(records.size()) + " records");
  std::sort(a2.begin(), a2.end());
  return {quantile(a2, 0.25), quantile(a2, 0.5), quantile(a2, 0.75)};
}

Histogram histogram(std::span<const double> values, int n_bins, double lo, double hi) {
  if (values.empty()) throw EmptyInput("histogram of an empty sample");
  if (n_bins < 1 || !(hi > lo)) throw std::invalid_argument("histogram: invalid bins or range");
  Histogram h;
  h.edges.resize(static_cast<std::size_t>(n_bins) + 1);
  for (int i = 0; i <= n_bins; ++i) h.edges[i] = lo + (hi - lo) * i / n_bins;
  std::vector<std::size_t> counts(static_cast<std::size_t>(n_bins), 0);
  std::size_t in_range = 0;
  const double width = (hi - lo) / n_bins;
  for (double v : values) {
    if (!(v >= lo && v <= hi)) {
      ++h.n_out_of_range;
      continue;
    }
    auto bin = static_cast<int>(std::floor((v - lo) / width));
    bin = std::min(bin, n_bins - 1);
    ++counts[bin];
    ++in_range;
  }
  h.frequency.resize(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i)
    h.frequency[i] = in_range ? static_cast<double>(counts[i]) / static_cast<double>(in_range) : 0.0;
  return h;
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw EmptyInput("ks_two_sample needs two non-empty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double ne = std::sqrt(na * nb / (na + nb));
  return {d, kolmogorov_q((ne + 0.12 + 0.11 / ne) * d)};
}

std::vector<double> thin(std::span<const double> values, std::size_t spacing) {
  if (spacing == 0) throw std::invalid_argument("thin: spacing must be positive");
  std::vector<double> out;
  out.reserve(values.size() / spacing + 1);
  for (std::size_t i = 0; i < values.size(); i += spacing) out.push_back(values[i]);
  return out;
}

std::size_t thinning_spacing(std::size_t n, double ess, std::size_t max_draws) {
  std::size_t spacing = 1;
  if (std::isfinite(ess) && ess > 0.0)
    spacing = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(static_cast<double>(n) / ess)));
  if (max_draws > 0) spacing = std::max(spacing, (n + max_draws - 1) / max_draws);
  return spacing;
}

}  // namespace qbda
