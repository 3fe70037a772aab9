#include "qbda/sampler.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace qbda {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double min_log_one(double log_ratio) {
  if (std::isnan(log_ratio)) return kNegInf;
  return std::min(0.0, log_ratio);
}

void check_surrogate_identity(const Posterior& posterior, const PosteriorCache& cache) {
  const double s = posterior.surrogate(cache, cache.point);
  if (s != cache.log_post_exact) {
    throw std::logic_error("surrogate at current state (" + std::to_string(s) +
                           ") differs from exact log-posterior (" +
                           std::to_string(cache.log_post_exact) + ")");
  }
}

}  // namespace

std::string to_string(KernelKind k) { return k == KernelKind::kStandard ? "standard" : "delayed"; }

KernelKind parse_kernel(const std::string& s) {
  if (s == "standard") return KernelKind::kStandard;
  if (s == "delayed") return KernelKind::kDelayed;
  throw std::invalid_argument("unknown kernel '" + s + "' (expected standard|delayed)");
}

std::string to_string(StageTwoRule r) {
  return r == StageTwoRule::kReversible ? "reversible" : "frozen";
}

std::string to_string(AcceptAveraging a) {
  return a == AcceptAveraging::kPerIteration ? "per-iteration" : "cumulative";
}

AcceptAveraging parse_accept_averaging(const std::string& s) {
  if (s == "per-iteration") return AcceptAveraging::kPerIteration;
  if (s == "cumulative") return AcceptAveraging::kCumulative;
  throw std::invalid_argument("unknown averaging '" + s + "' (expected per-iteration|cumulative)");
}

std::string to_string(InitStrategy i) { return i == InitStrategy::kMomentRoot ? "moment-root" : "prior-mean"; }

InitStrategy parse_init_strategy(const std::string& s) {
  if (s == "moment-root") return InitStrategy::kMomentRoot;
  if (s == "prior-mean") return InitStrategy::kPriorMean;
  throw std::invalid_argument("unknown init strategy '" + s + "' (expected moment-root|prior-mean)");
}

void SamplerConfig::validate() const {
  if (!(target_accept > 0.0 && target_accept < 1.0))
    throw std::invalid_argument("target acceptance must lie in (0, 1)");
  if (!(varsigma > 0.5 && varsigma < 1.0)) throw std::invalid_argument("varsigma must lie in (0.5, 1)");
  if (n_warmup < 0 || n_draws < 0) throw std::invalid_argument("iteration counts must be non-negative");
  if (eps_init && !(*eps_init > 0.0)) throw std::invalid_argument("eps_init must be positive");
}

ChainRng::ChainRng(std::uint64_t seed, bool lockstep) : main_(seed), lockstep_(lockstep) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    0x5EC0DDu};
  stage_two_.seed(seq);
}

// ---------------------------------------------------------------------------

ProposalState ProposalState::initial(Index dim, double eps_init, const SpdMatrix& sigma_init) {
  if (sigma_init.dim() != dim) throw DimensionMismatch("sigma_init dimension does not match model");
  ProposalState s{std::log(eps_init),
                  sigma_init,
                  cholesky(sigma_init),
                  sigma_init,
                  Vector::Zero(dim),
                  Matrix::Zero(dim, dim),
                  0,
                  0.0};
  return s;
}

double ProposalState::eps() const { return std::exp(log_eps); }

Matrix ProposalState::running_cov() const {
  if (iter < 2) return Matrix::Zero(running_m2.rows(), running_m2.cols());
  return running_m2 / static_cast<double>(iter - 1);
}

double ProposalState::mean_accept() const {
  return iter > 0 ? accept_prob_sum / static_cast<double>(iter) : 0.0;
}

std::span<const AcceptRecord> ChainTrace::sampling_records() const {
  const auto skip = static_cast<std::size_t>(std::min<std::int64_t>(n_warmup, records.size()));
  return std::span<const AcceptRecord>(records).subspan(skip);
}

double ChainTrace::acceptance_rate() const {
  const auto recs = sampling_records();
  if (recs.empty()) return 0.0;
  const auto n = std::count_if(recs.begin(), recs.end(), [](const AcceptRecord& r) { return r.accepted; });
  return static_cast<double>(n) / static_cast<double>(recs.size());
}

// ---------------------------------------------------------------------------

Vector propose(ChainRng& rng, const Vector& current, const ProposalState& proposal) {
  Vector z(current.size());
  for (Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
  const Vector step = proposal.chol_sigma.lower().triangularView<Eigen::Lower>() * z;
  return current + std::sqrt(proposal.eps()) * step;
}

double stage_one_probability(double log_surrogate_proposal, double log_exact_current) {
  return std::exp(min_log_one(log_surrogate_proposal - log_exact_current));
}

double stage_two_probability(const StageTwoInputs& in, StageTwoRule rule, bool inject_fault) {
  if (in.log_exact_proposal == kNegInf) return 0.0;
  double log_ratio = 0.0;
  if (rule == StageTwoRule::kFrozen) {
    // The surrogate at the current state equals the exact value there.
    log_ratio = in.log_exact_proposal - in.log_surrogate_forward;
  } else {
    const double log_a1_fwd = min_log_one(in.log_surrogate_forward - in.log_exact_current);
    const double log_a1_rev = min_log_one(in.log_surrogate_reverse - in.log_exact_proposal);
    if (log_a1_rev == kNegInf) return 0.0;
    log_ratio = (in.log_exact_proposal + log_a1_rev) - (in.log_exact_current + log_a1_fwd);
  }
  if (inject_fault) log_ratio = -log_ratio;
  return std::exp(min_log_one(log_ratio));
}

AcceptRecord da_step(ChainRng& rng, const Posterior& posterior, PosteriorCache& cache,
                     const ProposalState& proposal, const SamplerConfig& config,
                     EvalCounters& counters) {
  AcceptRecord rec;
  const Vector theta_prop = propose(rng, cache.theta(), proposal);
  PointEval point = posterior.evaluate_point(theta_prop, &counters);
  const double log_surr_fwd = posterior.surrogate(cache, point);

  rec.stage1_prob = stage_one_probability(log_surr_fwd, cache.log_post_exact);
  rec.accept_prob = rec.stage1_prob;
  const double u1 = rng.uniform();
  if (u1 > rec.stage1_prob) return rec;

  rec.promoted = true;
  auto exact = posterior.exact(std::move(point), &counters);
  if (!exact) {
    rec.degenerate = true;
    rec.stage2_prob = 0.0;
    rec.accept_prob = 0.0;
    rng.stage_two_uniform();
    return rec;
  }

  StageTwoInputs in;
  in.log_exact_current = cache.log_post_exact;
  in.log_exact_proposal = exact->log_post_exact;
  in.log_surrogate_forward = log_surr_fwd;
  if (config.stage_two == StageTwoRule::kReversible) {
    in.log_surrogate_reverse = posterior.surrogate(*exact, cache.point);
  }
  rec.stage2_prob = stage_two_probability(in, config.stage_two, config.inject_stage_two_fault);
  rec.accept_prob = rec.stage1_prob * rec.stage2_prob;

  const double u2 = rng.stage_two_uniform();
  if (u2 <= rec.stage2_prob) {
    rec.accepted = true;
    cache = std::move(*exact);
  }
  return rec;
}

AcceptRecord mh_step(ChainRng& rng, const Posterior& posterior, PosteriorCache& cache,
                     const ProposalState& proposal, const SamplerConfig& /*config*/,
                     EvalCounters& counters) {
  AcceptRecord rec;
  rec.promoted = true;
  const Vector theta_prop = propose(rng, cache.theta(), proposal);
  auto exact = posterior.exact(theta_prop, &counters);
  if (!exact) {
    rec.degenerate = true;
  } else {
    rec.stage1_prob = std::exp(min_log_one(exact->log_post_exact - cache.log_post_exact));
  }
  rec.stage2_prob = rec.stage1_prob;
  rec.accept_prob = rec.stage1_prob;

  const double u = rng.uniform();
  if (exact && u <= rec.stage1_prob) {
    rec.accepted = true;
    cache = std::move(*exact);
  }
  return rec;
}

void adapt(ProposalState& state, double accept_signal, const Vector& theta_new,
           const SamplerConfig& config) {
  state.iter += 1;
  const double t = static_cast<double>(state.iter);
  state.accept_prob_sum += accept_signal;
  const double level =
      config.accept_averaging == AcceptAveraging::kPerIteration ? accept_signal : state.mean_accept();
  state.log_eps += std::pow(t, -config.varsigma) * (level - config.target_accept);

  const Vector delta = theta_new - state.running_mean;
  state.running_mean += delta / t;
  state.running_m2.noalias() += delta * (theta_new - state.running_mean).transpose();

  const Index k = state.running_mean.size();
  if (state.iter >= 2 * k && state.iter >= 2) {
    Matrix cov = state.running_cov();
    const double ridge = 1e-10 * cov.trace() / static_cast<double>(k);
    cov.diagonal().array() += ridge;
    SpdMatrix sigma(cov);
    if (auto f = try_cholesky(sigma, JitterPolicy::none())) {
      state.sigma = std::move(sigma);
      state.chol_sigma = std::move(*f);
    }
  }
}

ChainTrace run_chain(KernelKind kernel, const Posterior& posterior, const SamplerConfig& config) {
  config.validate();
  const Index k = posterior.param_dim();

  ChainTrace trace;
  trace.kernel = kernel;
  trace.n_warmup = config.n_warmup;
  trace.seed = config.seed;
  trace.draws.resize(config.n_draws, k);
  trace.records.reserve(static_cast<std::size_t>(config.n_warmup + config.n_draws));

  Vector theta0 = Vector::Zero(k);
  if (config.theta_init) {
    theta0 = *config.theta_init;
  } else if (config.init == InitStrategy::kMomentRoot && posterior.config().mode == PosteriorMode::kQuasi) {
    theta0 = moment_root(posterior.model());
  } else if (posterior.prior()) {
    theta0 = posterior.prior()->mean;
  }
  if (theta0.size() != k) throw DimensionMismatch("theta_init dimension does not match model");

  auto initial = posterior.exact(theta0, &trace.counters);
  if (!initial) {
    throw InitializationDegenerate(
        "W(theta) is not positive definite at the initial state; choose a different "
        "initialization (e.g. theta_init)");
  }
  PosteriorCache cache = std::move(*initial);

  const double eps0 = config.eps_init.value_or(2.38 * 2.38 / static_cast<double>(k));
  ProposalState proposal =
      ProposalState::initial(k, eps0, config.sigma_init.value_or(SpdMatrix::identity(k)));
  ChainRng rng(config.seed, config.lockstep_rng);

  const auto step = kernel == KernelKind::kDelayed ? &da_step : &mh_step;
  const std::int64_t total = config.n_warmup + config.n_draws;

  const auto start = std::chrono::steady_clock::now();
  for (std::int64_t it = 0; it < total; ++it) {
    const AcceptRecord rec = step(rng, posterior, cache, proposal, config, trace.counters);
    trace.records.push_back(rec);
    if (config.check_surrogate_identity && posterior.config().mode == PosteriorMode::kQuasi)
      check_surrogate_identity(posterior, cache);
    if (it < config.n_warmup) {
      const double signal = config.adapt_signal == AdaptSignal::kProbability
                                ? rec.accept_prob
                                : (rec.accepted ? 1.0 : 0.0);
      adapt(proposal, signal, cache.theta(), config);
    } else {
      trace.draws.row(it - config.n_warmup) = cache.theta().transpose();
    }
  }
  const auto stop = std::chrono::steady_clock::now();
  trace.wall_clock_seconds = std::chrono::duration<double>(stop - start).count();
  trace.final_eps = proposal.eps();
  return trace;
}

}  // namespace qbda
