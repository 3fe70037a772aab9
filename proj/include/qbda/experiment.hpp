#pragma once

#include "qbda/data.hpp"
#include "qbda/diagnostics.hpp"
#include "qbda/posterior.hpp"
#include "qbda/sampler.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace qbda {

/// git-describe identifier captured at configure time.
const char* build_id();

enum class ExperimentKind { kSynthGrid, kAcceptSweep, kIv, kToyValidate };

std::string to_string(ExperimentKind e);

struct GridCell {
  Index n = 0;
  Index k = 0;
  std::string label() const;
};

struct ExperimentSpec {
  ExperimentKind experiment = ExperimentKind::kSynthGrid;
  std::vector<GridCell> grid{{100, 5}, {100, 20}, {1000, 5}, {1000, 20}};
  std::vector<double> alpha_targets{0.25};
  int n_replicates = 50;
  std::int64_t n_warmup = 10000;
  std::int64_t n_draws = 10000;
  std::vector<KernelKind> kernels{KernelKind::kStandard, KernelKind::kDelayed};
  std::uint64_t seed_base = 1;
  std::filesystem::path output_dir;  ///< empty: nothing written
  PosteriorConfig posterior{};
  StageTwoRule stage_two = StageTwoRule::kReversible;
  AcceptAveraging accept_averaging = AcceptAveraging::kPerIteration;
  InitStrategy init = InitStrategy::kMomentRoot;
  int jobs = 1;
  /// Reuse the dataset drawn with seed_base for every replicate.
  bool fixed_dataset = false;

  // iv
  std::filesystem::path data_path;
  IvLoadOptions iv_load{};

  // validate
  bool inject_fault = false;

  /// Defaults of each study: grid warmup/draws 10,000/10,000; sweep over
  /// alpha in {0.02, ..., 0.40}; iv warmup 100,000 and 1,000,000 draws.
  static ExperimentSpec defaults(ExperimentKind kind);
  void validate() const;
};

/// One chain of one replicate.
struct RunRow {
  std::string cell;
  Index n = 0;
  Index k = 0;
  double alpha_target = 0.0;
  KernelKind kernel = KernelKind::kStandard;
  int replicate = 0;
  std::uint64_t data_seed = 0;
  std::uint64_t chain_seed = 0;
  EssReport ess{};
  double wall_clock_seconds = 0.0;
  double accept_rate = 0.0;
  EvalCounters counters{};
  std::optional<Percentiles> stage2;
  std::string status = "ok";

  bool ok() const { return status == "ok"; }
};

struct CellSummary {
  std::string cell;
  Index n = 0;
  Index k = 0;
  double alpha_target = 0.0;
  KernelKind kernel = KernelKind::kStandard;
  int n_ok = 0;
  double median_ess_per_iter = 0.0;
  double median_ess_per_second = 0.0;
  std::optional<Percentiles> stage2_pooled;  ///< delayed kernel only
  std::optional<Histogram> stage2_histogram;
};

struct IvSummary {
  Index n = 0;
  std::vector<std::string> warnings;
  std::vector<double> beta_mean;  ///< per kernel, replicate 0
  std::vector<double> beta_sd;
  std::vector<Histogram> beta_histogram;
  std::optional<KsResult> ks;     ///< standard vs delayed, thinned beta draws
  std::size_t ks_spacing_standard = 0;
  std::size_t ks_spacing_delayed = 0;
};

struct ExperimentReport {
  ExperimentKind experiment = ExperimentKind::kSynthGrid;
  std::vector<RunRow> rows;
  std::vector<CellSummary> summaries;
  std::optional<IvSummary> iv;
  double total_seconds = 0.0;

  const CellSummary* find(Index n, Index k, KernelKind kernel, double alpha) const;
};

/// Deterministic chain seed for a replicate; independent of the kernel, the
/// target acceptance and the experiment.
std::uint64_t chain_seed(std::uint64_t data_seed, Index n, Index k);

/// Medians per (cell, alpha, kernel) recomputed from rows.
std::vector<CellSummary> summarize(const std::vector<RunRow>& rows,
                                   const std::vector<std::vector<double>>& pooled_stage2 = {});

ExperimentReport run_synth_grid(const ExperimentSpec& spec);
ExperimentReport run_accept_sweep(const ExperimentSpec& spec);
ExperimentReport run_iv(const ExperimentSpec& spec);

/// Writes the report tables and a JSON manifest into spec.output_dir.
void write_report(const ExperimentSpec& spec, const ExperimentReport& report);

// ---------------------------------------------------------------------------
// Sampler validation harness

struct ValidationCheck {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;
  bool all_passed() const;
};

struct ValidationOptions {
  std::uint64_t seed = 1;
  bool inject_fault = false;
  StageTwoRule stage_two = StageTwoRule::kReversible;
  std::int64_t gaussian_draws = 200000;
  std::int64_t constant_w_steps = 100000;
};

/// Transition matrix of the delayed-acceptance kernel on a finite state space
/// with uniform proposals to the other states. `log_target[x]` is log pi(x);
/// `log_surrogate(x, y)` is the surrogate built at x evaluated at y and must
/// equal log_target[x] on the diagonal.
Matrix discrete_da_transition(const Vector& log_target, const Matrix& log_surrogate,
                              StageTwoRule rule, bool inject_fault = false);

ValidationCheck check_detailed_balance(const ValidationOptions& opts);
ValidationCheck check_constant_w_exactness(const ValidationOptions& opts);
ValidationCheck check_gaussian_target(const ValidationOptions& opts);
ValidationCheck check_finite_difference_moments(const ValidationOptions& opts);
ValidationCheck check_surrogate_identity(const ValidationOptions& opts);
ValidationCheck check_lockstep_equivalence(const ValidationOptions& opts);

ValidationReport run_toy_validate(const ValidationOptions& opts);

/// Per-coordinate mean agreement plus a KS test on one thinned coordinate.
struct PosteriorAgreement {
  Vector mean_a;
  Vector mean_b;
  Vector combined_mcse;
  double max_z = 0.0;  ///< max_j |mean_a - mean_b| / combined_mcse
  KsResult ks;
  std::size_t spacing_a = 0;
  std::size_t spacing_b = 0;
};

PosteriorAgreement compare_posteriors(const Matrix& draws_a, const Matrix& draws_b, Index ks_coord);

}  // namespace qbda
