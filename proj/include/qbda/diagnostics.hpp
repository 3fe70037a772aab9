#pragma once

#include "qbda/linalg.hpp"
#include "qbda/sampler.hpp"

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace qbda {

class NoPromotions : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptyInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Multivariate effective sample size from multivariate batch means.
struct EssReport {
  double multi_ess = 0.0;
  double ess_per_iter = 0.0;
  double ess_per_second = 0.0;  ///< NaN until a wall-clock figure is attached
  Index n = 0;
  Index p = 0;
  Index batch_size = 0;
  Index n_batches = 0;
  bool rank_deficient = false;
  std::string diagnostic;  ///< non-empty when the estimate is unreliable or undefined

  void attach_wall_clock(double seconds);
};

/// multiESS = n (|Lambda| / |Sigma_bm|)^{1/p} with batch size floor(sqrt(n));
/// trailing draws that do not fill a batch are discarded from Sigma_bm.
/// Throws InsufficientSamples when n < 4p.
EssReport multi_ess(const Matrix& draws);

/// Per-coordinate Monte Carlo standard error sqrt(Lambda_jj / multiESS).
Vector mcse(const Matrix& draws, double multi_ess);

struct Percentiles {
  double p25 = 0.0;
  double p50 = 0.0;
  double p75 = 0.0;
};

/// Type-7 (linear interpolation) sample quantile, q in [0, 1].
double quantile(std::vector<double> values, double q);
double median(std::vector<double> values);

/// Percentiles of the second-stage probability over promoted proposals only.
Percentiles acceptance_percentiles(std::span<const AcceptRecord> records);

struct Histogram {
  std::vector<double> edges;      ///< n_bins + 1 edges
  std::vector<double> frequency;  ///< relative frequencies, sum to 1 over in-range values
  std::size_t n_out_of_range = 0;
};

/// Fixed-range histogram; the final bin is closed on the right.
Histogram histogram(std::span<const double> values, int n_bins = 20, double lo = 0.0, double hi = 1.0);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Two-sample Kolmogorov–Smirnov test with the asymptotic p-value.
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

/// Every `spacing`-th value starting at index 0.
std::vector<double> thin(std::span<const double> values, std::size_t spacing);

/// Spacing that yields roughly independent draws: n / ess, further increased so
/// at most `max_draws` remain.
std::size_t thinning_spacing(std::size_t n, double ess, std::size_t max_draws = 2000);

}  // namespace qbda
