#pragma once

#include "qbda/linalg.hpp"
#include "qbda/models.hpp"

#include <cstdint>
#include <memory>
#include <optional>

namespace qbda {

enum class PosteriorMode {
  /// [ |W|^{-1/2} exp{-N/2 mbar^T W^{-1} mbar} ]^omega p(theta)
  kQuasi,
  /// exp{-omega N r(theta)} p(theta); needs a model with a risk function.
  kGibbs,
};

std::string to_string(PosteriorMode m);

struct PosteriorConfig {
  /// Tempering exponent. It multiplies the whole log-determinant plus
  /// quadratic bracket, not only the exponential term.
  double omega = 1.0;
  WeightEstimator estimator = WeightEstimator::kCentered;
  PosteriorMode mode = PosteriorMode::kQuasi;
  JitterPolicy jitter{};
};

/// Instrumentation shared by one chain's evaluations.
struct EvalCounters {
  std::uint64_t n_full_evals = 0;  ///< exact evaluations (W formed and factorized)
  std::uint64_t n_mbar_evals = 0;
  std::uint64_t n_cholesky = 0;    ///< factorizations of W
};

/// mbar and log prior at a point; shared by the surrogate and exact routes so
/// a promoted proposal does not recompute them.
struct PointEval {
  Vector theta;
  Vector mbar;
  double log_prior = 0.0;
};

/// Exact state of the chain at theta. Carries the factor of W(theta) that
/// later serves as the frozen matrix of the surrogate.
struct PosteriorCache {
  PointEval point;
  std::optional<CholFactor> chol_w;  ///< absent in Gibbs mode
  double log_post_exact = 0.0;

  const Vector& theta() const { return point.theta; }
};

/// Quasi-posterior log-kernel, additive normalizing constant dropped.
class Posterior {
 public:
  Posterior(std::shared_ptr<const MomentModel> model, std::optional<GaussianPrior> prior,
            PosteriorConfig config = {});

  const MomentModel& model() const { return *model_; }
  const PosteriorConfig& config() const { return config_; }
  const std::optional<GaussianPrior>& prior() const { return prior_; }
  Index param_dim() const { return model_->param_dim(); }

  PointEval evaluate_point(const Vector& theta, EvalCounters* counters = nullptr) const;

  /// Exact log-kernel. std::nullopt when W(theta) is not positive definite
  /// after jitter escalation (the caller treats the density as zero).
  std::optional<PosteriorCache> exact(const PointEval& point, EvalCounters* counters = nullptr) const;
  std::optional<PosteriorCache> exact(const Vector& theta, EvalCounters* counters = nullptr) const;

  /// Log-kernel with W frozen at `frozen.theta()`: one triangular solve, no
  /// factorization. Equals frozen.log_post_exact at theta == frozen.theta().
  double surrogate(const PosteriorCache& frozen, const PointEval& point) const;
  double surrogate(const PosteriorCache& frozen, const Vector& theta,
                   EvalCounters* counters = nullptr) const;

 private:
  double kernel(double log_det, double quad, double log_prior) const;

  std::shared_ptr<const MomentModel> model_;
  std::optional<GaussianPrior> prior_;
  PosteriorConfig config_;
};

}  // namespace qbda
