#include "qbda/posterior.hpp"

#include <cmath>
#include <limits>

namespace qbda {

std::string to_string(PosteriorMode m) { return m == PosteriorMode::kQuasi ? "quasi" : "gibbs"; }

Posterior::Posterior(std::shared_ptr<const MomentModel> model, std::optional<GaussianPrior> prior,
                     PosteriorConfig config)
    : model_(std::move(model)), prior_(std::move(prior)), config_(config) {
  if (!model_) throw std::invalid_argument("posterior: null model");
  if (!(config_.omega > 0.0) || !std::isfinite(config_.omega))
    throw std::invalid_argument("posterior: omega must be positive");
  if (prior_ && prior_->mean.size() != model_->param_dim())
    throw DimensionMismatch("posterior: prior dimension does not match model");
  if (prior_ && !(prior_->sd > 0.0)) throw std::invalid_argument("posterior: prior sd must be positive");
  if (config_.mode == PosteriorMode::kGibbs && !model_->risk(Vector::Zero(model_->param_dim())))
    throw std::invalid_argument("posterior: Gibbs mode needs a model with an empirical risk");
}

double Posterior::kernel(double log_det, double quad, double log_prior) const {
  const double n = static_cast<double>(model_->sample_size());
  return config_.omega * (-0.5 * log_det - 0.5 * n * quad) + log_prior;
}

PointEval Posterior::evaluate_point(const Vector& theta, EvalCounters* counters) const {
  if (theta.size() != model_->param_dim())
    throw DimensionMismatch("posterior: theta has length " + std::to_string(theta.size()) +
                            ", model expects " + std::to_string(model_->param_dim()));
  if (!theta.allFinite()) throw NonFiniteInput("posterior: theta has non-finite entries");
  PointEval p;
  p.theta = theta;
  if (config_.mode == PosteriorMode::kQuasi) {
    p.mbar = model_->mbar(theta);
    if (counters) ++counters->n_mbar_evals;
  }
  p.log_prior = prior_ ? log_prior(*prior_, theta) : 0.0;
  return p;
}

std::optional<PosteriorCache> Posterior::exact(const PointEval& point, EvalCounters* counters) const {
  if (counters) ++counters->n_full_evals;
  PosteriorCache cache;
  cache.point = point;

  if (config_.mode == PosteriorMode::kGibbs) {
    const double n = static_cast<double>(model_->sample_size());
    cache.log_post_exact = -config_.omega * n * *model_->risk(point.theta) + point.log_prior;
    return cache;
  }

  if (!point.mbar.allFinite()) return std::nullopt;
  const SpdMatrix w = weight_matrix(*model_, point.theta, point.mbar, config_.estimator);
  if (!w.matrix().allFinite()) return std::nullopt;
  if (counters) ++counters->n_cholesky;
  auto chol = try_cholesky(w, config_.jitter);
  if (!chol) return std::nullopt;

  cache.log_post_exact = kernel(chol->log_det(), quad_form(*chol, point.mbar), point.log_prior);
  cache.chol_w = std::move(chol);
  if (!std::isfinite(cache.log_post_exact)) return std::nullopt;
  return cache;
}

std::optional<PosteriorCache> Posterior::exact(const Vector& theta, EvalCounters* counters) const {
  return exact(evaluate_point(theta, counters), counters);
}

double Posterior::surrogate(const PosteriorCache& frozen, const PointEval& point) const {
  if (config_.mode == PosteriorMode::kGibbs) {
    const double n = static_cast<double>(model_->sample_size());
    return -config_.omega * n * *model_->risk(point.theta) + point.log_prior;
  }
  const CholFactor& f = *frozen.chol_w;
  const double value = kernel(f.log_det(), quad_form(f, point.mbar), point.log_prior);
  return std::isnan(value) ? -std::numeric_limits<double>::infinity() : value;
}

double Posterior::surrogate(const PosteriorCache& frozen, const Vector& theta,
                            EvalCounters* counters) const {
  return surrogate(frozen, evaluate_point(theta, counters));
}

}  // namespace qbda
