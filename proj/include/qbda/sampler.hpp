#pragma once

#include "qbda/linalg.hpp"
#include "qbda/posterior.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace qbda {

enum class KernelKind { kStandard, kDelayed };

std::string to_string(KernelKind k);
KernelKind parse_kernel(const std::string& s);

/// Quantity averaged into the step-size adaptation signal.
enum class AdaptSignal {
  kProbability,  ///< overall acceptance probability of the iteration
  kIndicator,    ///< realized accept/reject outcome
};

/// How the second-stage acceptance probability of the delayed kernel is formed.
enum class StageTwoRule {
  /// Reverse first-stage probability uses the surrogate frozen at the proposal,
  /// which keeps detailed balance when the surrogate depends on the current state.
  kReversible,
  /// min{1, pi(y) pi*(x) / (pi(x) pi*(y))} with one surrogate for both directions.
  kFrozen,
};

std::string to_string(StageTwoRule r);

/// Level compared with the target in the step-size recursion.
enum class AcceptAveraging {
  kPerIteration,  ///< this iteration's acceptance signal
  kCumulative,    ///< running mean of all signals since the start of warmup
};

std::string to_string(AcceptAveraging a);
AcceptAveraging parse_accept_averaging(const std::string& s);

/// Starting point used when SamplerConfig::theta_init is not given.
enum class InitStrategy {
  kMomentRoot,  ///< solution of mbar(theta) = 0, see moment_root()
  kPriorMean,   ///< prior mean, or zero under a flat prior
};

std::string to_string(InitStrategy i);
InitStrategy parse_init_strategy(const std::string& s);

class InitializationDegenerate : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SamplerConfig {
  double target_accept = 0.25;
  double varsigma = 0.51;
  std::int64_t n_warmup = 10000;
  std::int64_t n_draws = 10000;
  std::uint64_t seed = 1;
  std::optional<double> eps_init;       ///< default 2.38^2 / K
  std::optional<SpdMatrix> sigma_init;  ///< default identity
  std::optional<Vector> theta_init;     ///< overrides `init`
  InitStrategy init = InitStrategy::kMomentRoot;
  AdaptSignal adapt_signal = AdaptSignal::kProbability;
  AcceptAveraging accept_averaging = AcceptAveraging::kPerIteration;
  StageTwoRule stage_two = StageTwoRule::kReversible;
  /// Draw second-stage uniforms from a separate stream so the delayed and
  /// standard kernels consume identical proposal randomness.
  bool lockstep_rng = false;
  /// Harness sensitivity check: inverts the second-stage ratio.
  bool inject_stage_two_fault = false;
  /// Asserts surrogate == exact at the current state after every iteration.
  bool check_surrogate_identity = false;

  void validate() const;
};

/// Per-chain random streams.
class ChainRng {
 public:
  ChainRng(std::uint64_t seed, bool lockstep);

  double normal() { return normal_(main_); }
  double uniform() { return uniform_(main_); }
  double stage_two_uniform() { return lockstep_ ? uniform_(stage_two_) : uniform_(main_); }

 private:
  std::mt19937_64 main_;
  std::mt19937_64 stage_two_;
  bool lockstep_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// Random-walk proposal N(theta, eps * Sigma) with Haario-style adaptation.
struct ProposalState {
  double log_eps = 0.0;
  SpdMatrix sigma;
  CholFactor chol_sigma;
  SpdMatrix sigma_init;
  Vector running_mean;
  Matrix running_m2;  ///< Welford sum of squared deviations
  std::int64_t iter = 0;
  double accept_prob_sum = 0.0;

  static ProposalState initial(Index dim, double eps_init, const SpdMatrix& sigma_init);

  double eps() const;
  Matrix running_cov() const;
  double mean_accept() const;
};

struct AcceptRecord {
  double stage1_prob = 0.0;
  double stage2_prob = 0.0;   ///< meaningful only when promoted
  double accept_prob = 0.0;   ///< overall probability of moving this iteration
  bool promoted = false;
  bool accepted = false;
  bool degenerate = false;    ///< exact evaluation at the proposal failed
};

struct ChainTrace {
  KernelKind kernel = KernelKind::kStandard;
  Matrix draws;                       ///< n_draws x K, post-warmup
  std::vector<AcceptRecord> records;  ///< every iteration, warmup included
  std::int64_t n_warmup = 0;
  double wall_clock_seconds = 0.0;
  EvalCounters counters;
  double final_eps = 0.0;
  std::uint64_t seed = 0;

  std::span<const AcceptRecord> sampling_records() const;
  double acceptance_rate() const;  ///< realized, post-warmup
};

Vector propose(ChainRng& rng, const Vector& current, const ProposalState& proposal);

double stage_one_probability(double log_surrogate_proposal, double log_exact_current);

struct StageTwoInputs {
  double log_exact_current = 0.0;
  double log_exact_proposal = 0.0;
  double log_surrogate_forward = 0.0;  ///< W frozen at current, evaluated at proposal
  double log_surrogate_reverse = 0.0;  ///< W frozen at proposal, evaluated at current
};

double stage_two_probability(const StageTwoInputs& in, StageTwoRule rule,
                             bool inject_fault = false);

/// Two-stage delayed-acceptance transition. Updates `cache` in place when the
/// proposal is accepted.
AcceptRecord da_step(ChainRng& rng, const Posterior& posterior, PosteriorCache& cache,
                     const ProposalState& proposal, const SamplerConfig& config,
                     EvalCounters& counters);

/// Single-stage random-walk Metropolis–Hastings transition.
AcceptRecord mh_step(ChainRng& rng, const Posterior& posterior, PosteriorCache& cache,
                     const ProposalState& proposal, const SamplerConfig& config,
                     EvalCounters& counters);

void adapt(ProposalState& state, double accept_signal, const Vector& theta_new,
           const SamplerConfig& config);

ChainTrace run_chain(KernelKind kernel, const Posterior& posterior, const SamplerConfig& config);

}  // namespace qbda
