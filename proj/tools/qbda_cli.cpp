#include "qbda/experiment.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace {

using namespace qbda;

struct Options {
  std::vector<Index> n;
  std::vector<Index> k;
  std::int64_t warmup = -1;
  std::int64_t draws = -1;
  int replicates = -1;
  std::vector<double> alpha;
  std::string kernel = "both";
  std::uint64_t seed = 1;
  std::string out;
  double omega = 1.0;
  std::string w_estimator = "centered";
  std::string mode = "quasi";
  int jobs = 1;
  bool fixed_dataset = false;
  std::string stage_two = "reversible";
  std::string accept_averaging = "per-iteration";
  std::string init = "moment-root";
  // iv
  std::string data;
  std::vector<std::string> columns;
  bool normalize_latitude = false;
  // validate
  bool inject_fault = false;
};

void add_common(CLI::App* sub, Options& o, bool grid) {
  if (grid) {
    sub->add_option("--n", o.n, "sample size; repeat to build a grid")->check(CLI::PositiveNumber);
    sub->add_option("--k", o.k, "number of regressors; repeat to build a grid")->check(CLI::Range(3, 1000));
    sub->add_flag("--fixed-dataset", o.fixed_dataset, "reuse one synthetic dataset for every replicate");
  }
  sub->add_option("--warmup", o.warmup, "warmup iterations (adaptation on, draws discarded)");
  sub->add_option("--draws", o.draws, "retained iterations");
  sub->add_option("--replicates", o.replicates, "independent replicates")->check(CLI::PositiveNumber);
  sub->add_option("--alpha-target", o.alpha, "target acceptance rate; repeatable")
      ->check(CLI::Range(0.0, 1.0));
  sub->add_option("--kernel", o.kernel, "standard, delayed or both")
      ->check(CLI::IsMember({"standard", "delayed", "both"}));
  sub->add_option("--seed", o.seed, "base seed");
  sub->add_option("--out", o.out, "output directory for CSV tables and manifest.json");
  sub->add_option("--omega", o.omega, "learning rate")->check(CLI::PositiveNumber);
  sub->add_option("--w-estimator", o.w_estimator, "weighting matrix estimator")
      ->check(CLI::IsMember({"centered", "uncentered"}));
  sub->add_option("--posterior", o.mode, "quasi (GMM criterion) or gibbs (squared-error risk)")
      ->check(CLI::IsMember({"quasi", "gibbs"}));
  sub->add_option("--jobs", o.jobs, "worker threads; 1 keeps timings serial")->check(CLI::PositiveNumber);
  sub->add_option("--stage-two", o.stage_two, "second-stage rule")
      ->check(CLI::IsMember({"reversible", "frozen"}));
  sub->add_option("--accept-averaging", o.accept_averaging, "acceptance signal driving step-size adaptation")
      ->check(CLI::IsMember({"per-iteration", "cumulative"}));
  sub->add_option("--init", o.init, "chain starting point")->check(CLI::IsMember({"moment-root", "prior-mean"}));
}

ExperimentSpec build_spec(ExperimentKind kind, const Options& o) {
  ExperimentSpec s = ExperimentSpec::defaults(kind);
  if (!o.n.empty() || !o.k.empty()) {
    std::vector<Index> ns = o.n, ks = o.k;
    if (ns.empty())
      for (const auto& c : s.grid)
        if (std::find(ns.begin(), ns.end(), c.n) == ns.end()) ns.push_back(c.n);
    if (ks.empty())
      for (const auto& c : s.grid)
        if (std::find(ks.begin(), ks.end(), c.k) == ks.end()) ks.push_back(c.k);
    s.grid.clear();
    for (Index n : ns)
      for (Index k : ks) s.grid.push_back({n, k});
  }
  if (o.warmup >= 0) s.n_warmup = o.warmup;
  if (o.draws >= 0) s.n_draws = o.draws;
  if (o.replicates > 0) s.n_replicates = o.replicates;
  if (!o.alpha.empty()) s.alpha_targets = o.alpha;
  if (kind != ExperimentKind::kAcceptSweep) {
    if (o.kernel == "both")
      s.kernels = {KernelKind::kStandard, KernelKind::kDelayed};
    else
      s.kernels = {parse_kernel(o.kernel)};
  }
  s.seed_base = o.seed;
  s.output_dir = o.out;
  s.posterior.omega = o.omega;
  s.posterior.estimator = parse_weight_estimator(o.w_estimator);
  s.posterior.mode = o.mode == "gibbs" ? PosteriorMode::kGibbs : PosteriorMode::kQuasi;
  s.jobs = o.jobs;
  s.fixed_dataset = o.fixed_dataset;
  s.stage_two = o.stage_two == "frozen" ? StageTwoRule::kFrozen : StageTwoRule::kReversible;
  s.accept_averaging = parse_accept_averaging(o.accept_averaging);
  s.init = parse_init_strategy(o.init);
  if (kind == ExperimentKind::kIv) {
    s.data_path = o.data;
    for (const auto& c : o.columns) {
      const auto eq = c.find('=');
      if (eq == std::string::npos || eq == 0 || eq + 1 == c.size())
        throw std::invalid_argument("--col expects field=column, got '" + c + "'");
      s.iv_load.columns[c.substr(0, eq)] = c.substr(eq + 1);
    }
    s.iv_load.normalize_latitude = o.normalize_latitude;
  }
  return s;
}

void print_summary(const ExperimentReport& report) {
  std::printf("%-16s %6s %-9s %4s %14s %14s\n", "cell", "alpha", "kernel", "ok", "ess/iter", "ess/s");
  for (const auto& s : report.summaries) {
    std::printf("%-16s %6.3f %-9s %4d %14.6g %14.6g", s.cell.c_str(), s.alpha_target, to_string(s.kernel).c_str(),
                s.n_ok, s.median_ess_per_iter, s.median_ess_per_second);
    if (s.stage2_pooled)
      std::printf("   stage-2 P25/P50/P75 %.3f/%.3f/%.3f", s.stage2_pooled->p25, s.stage2_pooled->p50,
                  s.stage2_pooled->p75);
    std::printf("\n");
  }
  int failed = 0;
  for (const auto& r : report.rows) {
    if (r.ok()) continue;
    ++failed;
    std::fprintf(stderr, "warning: %s %s replicate %d: %s\n", r.cell.c_str(), to_string(r.kernel).c_str(),
                 r.replicate, r.status.c_str());
  }
  for (const auto& r : report.rows) {
    if (r.ok() && r.ess.n_batches < 5 * r.ess.p) {
      std::fprintf(stderr, "warning: only %lld batches for p=%lld; multiESS is noisy\n",
                   static_cast<long long>(r.ess.n_batches), static_cast<long long>(r.ess.p));
      break;
    }
  }
  if (report.iv) {
    for (const auto& w : report.iv->warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    for (std::size_t j = 0; j < report.iv->beta_mean.size(); ++j)
      std::printf("beta[%zu] mean %.6g sd %.6g\n", j, report.iv->beta_mean[j], report.iv->beta_sd[j]);
    if (report.iv->ks)
      std::printf("KS on thinned beta: D=%.4f p=%.4g (spacing %zu / %zu)\n", report.iv->ks->statistic,
                  report.iv->ks->p_value, report.iv->ks_spacing_standard, report.iv->ks_spacing_delayed);
  }
  std::printf("total %.2f s, %d failed runs\n", report.total_seconds, failed);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Delayed-acceptance MCMC benchmarks for quasi-Bayesian posteriors"};
  app.set_config("--config", "", "INI/TOML file of option values; command-line flags take precedence");
  app.set_version_flag("--version", std::string(qbda::build_id()));
  app.require_subcommand(1);

  Options o;
  auto* grid = app.add_subcommand("synth-grid", "standard vs delayed kernel on synthetic regression grids");
  add_common(grid, o, true);
  auto* sweep = app.add_subcommand("accept-sweep", "delayed kernel over a range of target acceptance rates");
  add_common(sweep, o, true);
  auto* iv = app.add_subcommand("iv", "instrumental-variable regression on a CSV dataset");
  add_common(iv, o, false);
  iv->add_option("--data", o.data, "CSV file")->required();
  iv->add_option("--col", o.columns, "column map entry field=column; repeatable");
  iv->add_flag("--normalize-latitude", o.normalize_latitude, "divide latitude by 90");
  auto* validate = app.add_subcommand("validate", "sampler correctness checks");
  validate->add_option("--seed", o.seed, "seed");
  validate->add_flag("--inject-fault", o.inject_fault, "flip the sign of the stage-two log ratio");
  validate->add_option("--stage-two", o.stage_two, "second-stage rule")
      ->check(CLI::IsMember({"reversible", "frozen"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate->parsed()) {
      qbda::ValidationOptions vo;
      vo.seed = o.seed;
      vo.inject_fault = o.inject_fault;
      vo.stage_two = o.stage_two == "frozen" ? qbda::StageTwoRule::kFrozen : qbda::StageTwoRule::kReversible;
      const auto report = qbda::run_toy_validate(vo);
      for (const auto& c : report.checks)
        std::printf("%-4s %-28s measured %-12.4g tolerance %-10.3g %s\n", c.passed ? "PASS" : "FAIL",
                    c.name.c_str(), c.measured, c.tolerance, c.detail.c_str());
      return report.all_passed() ? 0 : 1;
    }

    qbda::ExperimentKind kind = qbda::ExperimentKind::kSynthGrid;
    if (sweep->parsed()) kind = qbda::ExperimentKind::kAcceptSweep;
    if (iv->parsed()) kind = qbda::ExperimentKind::kIv;
    const qbda::ExperimentSpec spec = build_spec(kind, o);
    spec.validate();
    qbda::ExperimentReport report;
    switch (kind) {
      case qbda::ExperimentKind::kAcceptSweep: report = qbda::run_accept_sweep(spec); break;
      case qbda::ExperimentKind::kIv: report = qbda::run_iv(spec); break;
      default: report = qbda::run_synth_grid(spec); break;
    }
    qbda::write_report(spec, report);
    print_summary(report);
    if (!spec.output_dir.empty()) std::printf("wrote %s\n", spec.output_dir.string().c_str());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
