#include "qbda/experiment.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <thread>

#ifndef QBDA_BUILD_ID
#define QBDA_BUILD_ID "unknown"
#endif

namespace qbda {

namespace fs = std::filesystem;

const char* build_id() { return QBDA_BUILD_ID; }

std::string to_string(ExperimentKind e) {
  switch (e) {
    case ExperimentKind::kSynthGrid: return "synth-grid";
    case ExperimentKind::kAcceptSweep: return "accept-sweep";
    case ExperimentKind::kIv: return "iv";
    case ExperimentKind::kToyValidate: return "validate";
  }
  return "unknown";
}

std::string GridCell::label() const {
  return "N=" + std::to_string(n) + ",K=" + std::to_string(k);
}

ExperimentSpec ExperimentSpec::defaults(ExperimentKind kind) {
  ExperimentSpec s;
  s.experiment = kind;
  switch (kind) {
    case ExperimentKind::kAcceptSweep:
      s.alpha_targets.clear();
      for (int i = 1; i <= 20; ++i) s.alpha_targets.push_back(0.02 * i);
      s.kernels = {KernelKind::kDelayed};
      break;
    case ExperimentKind::kIv:
      s.n_warmup = 100000;
      s.n_draws = 1000000;
      s.grid.clear();
      break;
    default:
      break;
  }
  return s;
}

void ExperimentSpec::validate() const {
  if (n_replicates < 1) throw std::invalid_argument("replicates must be positive");
  if (n_warmup < 0 || n_draws < 0) throw std::invalid_argument("warmup and draws must be non-negative");
  if (jobs < 1) throw std::invalid_argument("jobs must be at least 1");
  if (kernels.empty()) throw std::invalid_argument("at least one kernel is required");
  if (alpha_targets.empty()) throw std::invalid_argument("at least one target acceptance rate is required");
  for (double a : alpha_targets)
    if (!(a > 0.0 && a < 1.0)) throw std::invalid_argument("target acceptance rates must lie in (0, 1)");
  if (experiment == ExperimentKind::kSynthGrid || experiment == ExperimentKind::kAcceptSweep) {
    if (grid.empty()) throw std::invalid_argument("grid is empty");
    for (const auto& c : grid)
      if (c.k < 3 || c.n < 1) throw std::invalid_argument("grid cell " + c.label() + " invalid (need K >= 3)");
  }
  if (!(posterior.omega > 0.0)) throw std::invalid_argument("omega must be positive");
}

const CellSummary* ExperimentReport::find(Index n, Index k, KernelKind kernel, double alpha) const {
  for (const auto& s : summaries) {
    if (s.n == n && s.k == k && s.kernel == kernel && std::abs(s.alpha_target - alpha) < 1e-12) return &s;
  }
  return nullptr;
}

std::uint64_t chain_seed(std::uint64_t data_seed, Index n, Index k) {
  // splitmix64 finalizer
  std::uint64_t z = data_seed ^ (static_cast<std::uint64_t>(n) << 32) ^ (static_cast<std::uint64_t>(k) << 16);
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

constexpr int kHistogramBins = 20;

void parallel_for(std::size_t n_tasks, int jobs, const std::function<void(std::size_t)>& body) {
  if (jobs <= 1 || n_tasks <= 1) {
    for (std::size_t i = 0; i < n_tasks; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  const auto n_workers = std::min<std::size_t>(static_cast<std::size_t>(jobs), n_tasks);
  for (std::size_t w = 0; w < n_workers; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n_tasks; i = next++) body(i);
    });
  }
  for (auto& t : workers) t.join();
}

SamplerConfig sampler_config(const ExperimentSpec& spec, double alpha, std::uint64_t seed) {
  SamplerConfig c;
  c.target_accept = alpha;
  c.n_warmup = spec.n_warmup;
  c.n_draws = spec.n_draws;
  c.seed = seed;
  c.stage_two = spec.stage_two;
  c.accept_averaging = spec.accept_averaging;
  c.init = spec.init;
  return c;
}

std::string sanitize(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

// Runs one chain and fills a row; failures become the row's status.
RunRow run_one(const Posterior& posterior, KernelKind kernel, const SamplerConfig& config, RunRow row,
               std::vector<double>* stage2_out, ChainTrace* keep) {
  row.kernel = kernel;
  row.chain_seed = config.seed;
  try {
    ChainTrace trace = run_chain(kernel, posterior, config);
    row.wall_clock_seconds = trace.wall_clock_seconds;
    row.counters = trace.counters;
    row.accept_rate = trace.acceptance_rate();
    row.ess = multi_ess(trace.draws);
    row.ess.attach_wall_clock(trace.wall_clock_seconds);
    if (row.ess.rank_deficient) row.status = "rank deficient: " + row.ess.diagnostic;
    if (kernel == KernelKind::kDelayed) {
      const auto recs = trace.sampling_records();
      if (std::any_of(recs.begin(), recs.end(), [](const AcceptRecord& r) { return r.promoted; })) {
        row.stage2 = acceptance_percentiles(recs);
        if (stage2_out) {
          for (const auto& r : recs)
            if (r.promoted) stage2_out->push_back(r.stage2_prob);
        }
      }
    }
    if (keep) *keep = std::move(trace);
  } catch (const std::exception& e) {
    row.status = sanitize(e.what());
  }
  return row;
}

struct TaskResult {
  std::vector<RunRow> rows;
  std::vector<double> stage2;
};

ExperimentReport run_synthetic(const ExperimentSpec& spec, const std::vector<KernelKind>& kernels,
                               ExperimentKind kind) {
  spec.validate();
  const auto start = std::chrono::steady_clock::now();

  struct Task {
    GridCell cell;
    double alpha;
    int replicate;
  };
  std::vector<Task> tasks;
  for (const auto& cell : spec.grid)
    for (double alpha : spec.alpha_targets)
      for (int r = 0; r < spec.n_replicates; ++r) tasks.push_back({cell, alpha, r});

  std::vector<TaskResult> results(tasks.size());
  parallel_for(tasks.size(), spec.jobs, [&](std::size_t i) {
    const Task& t = tasks[i];
    const std::uint64_t data_seed = spec.fixed_dataset ? spec.seed_base : spec.seed_base + t.replicate;
    const std::uint64_t seed = chain_seed(spec.seed_base + t.replicate, t.cell.n, t.cell.k);
    RunRow base;
    base.cell = t.cell.label();
    base.n = t.cell.n;
    base.k = t.cell.k;
    base.alpha_target = t.alpha;
    base.replicate = t.replicate;
    base.data_seed = data_seed;
    try {
      auto model = std::make_shared<LinearRegressionModel>(generate_synthetic(t.cell.n, t.cell.k, data_seed).data);
      Posterior posterior(model, GaussianPrior::centered(t.cell.k), spec.posterior);
      for (KernelKind kernel : kernels) {
        results[i].rows.push_back(run_one(posterior, kernel, sampler_config(spec, t.alpha, seed), base,
                                          &results[i].stage2, nullptr));
      }
    } catch (const std::exception& e) {
      for (KernelKind kernel : kernels) {
        RunRow row = base;
        row.kernel = kernel;
        row.status = sanitize(e.what());
        results[i].rows.push_back(row);
      }
    }
  });

  ExperimentReport report;
  report.experiment = kind;
  std::map<std::pair<std::string, double>, std::vector<double>> pooled;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    for (auto& row : results[i].rows) report.rows.push_back(std::move(row));
    auto& dst = pooled[{tasks[i].cell.label(), tasks[i].alpha}];
    dst.insert(dst.end(), results[i].stage2.begin(), results[i].stage2.end());
  }
  report.summaries = summarize(report.rows);
  for (auto& s : report.summaries) {
    if (s.kernel != KernelKind::kDelayed) continue;
    const auto it = pooled.find({s.cell, s.alpha_target});
    if (it == pooled.end() || it->second.empty()) continue;
    std::vector<double> v = it->second;
    std::sort(v.begin(), v.end());
    s.stage2_pooled = Percentiles{quantile(v, 0.25), quantile(v, 0.5), quantile(v, 0.75)};
    s.stage2_histogram = histogram(v, kHistogramBins, 0.0, 1.0);
  }
  report.total_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace

std::vector<CellSummary> summarize(const std::vector<RunRow>& rows,
                                   const std::vector<std::vector<double>>& /*pooled_stage2*/) {
  std::vector<CellSummary> out;
  std::vector<std::vector<double>> per_iter;
  std::vector<std::vector<double>> per_sec;
  for (const auto& row : rows) {
    auto it = std::find_if(out.begin(), out.end(), [&](const CellSummary& s) {
      return s.cell == row.cell && s.kernel == row.kernel && s.alpha_target == row.alpha_target;
    });
    if (it == out.end()) {
      CellSummary s;
      s.cell = row.cell;
      s.n = row.n;
      s.k = row.k;
      s.alpha_target = row.alpha_target;
      s.kernel = row.kernel;
      out.push_back(s);
      per_iter.emplace_back();
      per_sec.emplace_back();
      it = std::prev(out.end());
    }
    const auto idx = static_cast<std::size_t>(it - out.begin());
    if (!row.ok()) continue;
    ++it->n_ok;
    per_iter[idx].push_back(row.ess.ess_per_iter);
    per_sec[idx].push_back(row.ess.ess_per_second);
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].median_ess_per_iter = per_iter[i].empty() ? nan : median(per_iter[i]);
    out[i].median_ess_per_second = per_sec[i].empty() ? nan : median(per_sec[i]);
  }
  return out;
}

ExperimentReport run_synth_grid(const ExperimentSpec& spec) {
  return run_synthetic(spec, spec.kernels, ExperimentKind::kSynthGrid);
}

ExperimentReport run_accept_sweep(const ExperimentSpec& spec) {
  return run_synthetic(spec, {KernelKind::kDelayed}, ExperimentKind::kAcceptSweep);
}

ExperimentReport run_iv(const ExperimentSpec& spec) {
  ExperimentSpec checked = spec;
  checked.grid = {{1, 3}};
  checked.validate();
  const auto start = std::chrono::steady_clock::now();

  IvLoadResult loaded = load_iv_csv(spec.data_path, spec.iv_load);
  auto model = std::make_shared<IvModel>(loaded.data);
  const Index n = model->sample_size();
  const Index k = model->param_dim();
  Posterior posterior(model, GaussianPrior::centered(k), spec.posterior);
  const double alpha = spec.alpha_targets.front();

  std::vector<TaskResult> results(static_cast<std::size_t>(spec.n_replicates));
  std::vector<ChainTrace> first(spec.kernels.size());
  parallel_for(results.size(), spec.jobs, [&](std::size_t r) {
    RunRow base;
    base.cell = "iv";
    base.n = n;
    base.k = k;
    base.alpha_target = alpha;
    base.replicate = static_cast<int>(r);
    base.data_seed = 0;
    const std::uint64_t seed = chain_seed(spec.seed_base + r, n, k);
    for (std::size_t j = 0; j < spec.kernels.size(); ++j) {
      results[r].rows.push_back(run_one(posterior, spec.kernels[j], sampler_config(spec, alpha, seed), base,
                                        nullptr, r == 0 ? &first[j] : nullptr));
    }
  });

  ExperimentReport report;
  report.experiment = ExperimentKind::kIv;
  for (auto& res : results)
    for (auto& row : res.rows) report.rows.push_back(std::move(row));
  report.summaries = summarize(report.rows);

  IvSummary iv;
  iv.n = n;
  iv.warnings = loaded.warnings;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& tr : first) {
    if (tr.draws.rows() == 0) continue;
    lo = std::min(lo, tr.draws.col(IvModel::kBetaIndex).minCoeff());
    hi = std::max(hi, tr.draws.col(IvModel::kBetaIndex).maxCoeff());
  }
  for (const auto& tr : first) {
    if (tr.draws.rows() < 2) {
      iv.beta_mean.push_back(std::numeric_limits<double>::quiet_NaN());
      iv.beta_sd.push_back(std::numeric_limits<double>::quiet_NaN());
      iv.beta_histogram.emplace_back();
      continue;
    }
    const Vector beta = tr.draws.col(IvModel::kBetaIndex);
    const double mean = beta.mean();
    iv.beta_mean.push_back(mean);
    iv.beta_sd.push_back(std::sqrt((beta.array() - mean).square().sum() / static_cast<double>(beta.size() - 1)));
    std::vector<double> values(beta.data(), beta.data() + beta.size());
    iv.beta_histogram.push_back(histogram(values, 50, lo, hi > lo ? hi : lo + 1.0));
  }
  if (first.size() == 2 && first[0].draws.rows() >= 4 * k && first[1].draws.rows() >= 4 * k) {
    try {
      const PosteriorAgreement agree = compare_posteriors(first[0].draws, first[1].draws, IvModel::kBetaIndex);
      iv.ks = agree.ks;
      iv.ks_spacing_standard = agree.spacing_a;
      iv.ks_spacing_delayed = agree.spacing_b;
    } catch (const std::exception& e) {
      iv.warnings.push_back(std::string("overlap statistics unavailable: ") + e.what());
    }
  }
  report.iv = std::move(iv);
  report.total_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

// ---------------------------------------------------------------------------
// Report emission

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

std::string posterior_options(const ExperimentSpec& spec) {
  return "omega=" + num(spec.posterior.omega) + ";w=" + to_string(spec.posterior.estimator) +
         ";mode=" + to_string(spec.posterior.mode) + ";stage2=" + to_string(spec.stage_two) +
         ";avg=" + to_string(spec.accept_averaging) + ";init=" + to_string(spec.init);
}

nlohmann::json spec_json(const ExperimentSpec& spec) {
  nlohmann::json j;
  j["experiment"] = to_string(spec.experiment);
  for (const auto& c : spec.grid) j["grid"].push_back({{"n", c.n}, {"k", c.k}});
  j["alpha_targets"] = spec.alpha_targets;
  j["n_replicates"] = spec.n_replicates;
  j["n_warmup"] = spec.n_warmup;
  j["n_draws"] = spec.n_draws;
  for (auto k : spec.kernels) j["kernels"].push_back(to_string(k));
  j["seed_base"] = spec.seed_base;
  j["omega"] = spec.posterior.omega;
  j["w_estimator"] = to_string(spec.posterior.estimator);
  j["stage_two"] = to_string(spec.stage_two);
  j["accept_averaging"] = to_string(spec.accept_averaging);
  j["init"] = to_string(spec.init);
  j["jobs"] = spec.jobs;
  j["fixed_dataset"] = spec.fixed_dataset;
  if (spec.experiment == ExperimentKind::kIv) {
    j["data_path"] = spec.data_path.string();
    j["column_map"] = spec.iv_load.columns;
    j["normalize_latitude"] = spec.iv_load.normalize_latitude;
  }
  return j;
}

}  // namespace

void write_report(const ExperimentSpec& spec, const ExperimentReport& report) {
  if (spec.output_dir.empty()) return;
  fs::create_directories(spec.output_dir);
  const fs::path dir = spec.output_dir;
  std::vector<std::string> files;
  const std::string opts = posterior_options(spec);

  {
    auto out = open_out(dir / "runs.csv");
    out << "experiment,cell,n,k,alpha_target,kernel,replicate,data_seed,chain_seed,multi_ess,ess_per_iter,"
           "batch_size,n_batches,accept_rate,n_full_evals,n_mbar_evals,n_cholesky,a2_p25,a2_p50,a2_p75,"
           "posterior_options,build_id,status\n";
    for (const auto& r : report.rows) {
      out << to_string(report.experiment) << ',' << '"' << r.cell << '"' << ',' << r.n << ',' << r.k << ','
          << num(r.alpha_target) << ',' << to_string(r.kernel) << ',' << r.replicate << ',' << r.data_seed << ','
          << r.chain_seed << ',' << num(r.ess.multi_ess) << ',' << num(r.ess.ess_per_iter) << ','
          << r.ess.batch_size << ',' << r.ess.n_batches << ',' << num(r.accept_rate) << ','
          << r.counters.n_full_evals << ',' << r.counters.n_mbar_evals << ',' << r.counters.n_cholesky << ','
          << (r.stage2 ? num(r.stage2->p25) : "") << ',' << (r.stage2 ? num(r.stage2->p50) : "") << ','
          << (r.stage2 ? num(r.stage2->p75) : "") << ',' << opts << ',' << build_id() << ',' << r.status
          << '\n';
    }
    files.push_back("runs.csv");
  }
  {
    auto out = open_out(dir / "timings.csv");
    out << "cell,alpha_target,kernel,replicate,chain_seed,wall_clock_seconds,ess_per_second\n";
    for (const auto& r : report.rows) {
      out << '"' << r.cell << '"' << ',' << num(r.alpha_target) << ',' << to_string(r.kernel) << ','
          << r.replicate << ',' << r.chain_seed << ',' << num(r.wall_clock_seconds) << ','
          << num(r.ess.ess_per_second) << '\n';
    }
    files.push_back("timings.csv");
  }

  const bool sweep = report.experiment == ExperimentKind::kAcceptSweep;
  {
    // one row per (cell, alpha), one column per kernel
    std::vector<std::pair<std::string, double>> keys;
    for (const auto& s : report.summaries) {
      std::pair<std::string, double> key{s.cell, s.alpha_target};
      if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
    }
    const auto value = [&](const std::string& cell, double alpha, KernelKind kernel, bool per_second) {
      for (const auto& s : report.summaries)
        if (s.cell == cell && s.alpha_target == alpha && s.kernel == kernel)
          return num(per_second ? s.median_ess_per_second : s.median_ess_per_iter);
      return std::string();
    };
    const auto model_name = report.experiment == ExperimentKind::kIv ? "iv_regression" : "linear_regression";
    for (bool per_second : {false, true}) {
      const std::string name = std::string(sweep ? "sweep_" : (per_second ? "table2_" : "table1_")) +
                               (per_second ? "ess_per_second.csv" : "ess_per_iter.csv");
      auto out = open_out(dir / name);
      out << "model,n,k,alpha_target,standard,delayed,replicates,batch_size\n";
      for (const auto& [cell, alpha] : keys) {
        const CellSummary* any = nullptr;
        for (const auto& s : report.summaries)
          if (s.cell == cell && s.alpha_target == alpha) any = &s;
        Index batch = 0;
        for (const auto& r : report.rows)
          if (r.cell == cell && r.alpha_target == alpha && r.ok()) batch = r.ess.batch_size;
        out << model_name << ',' << any->n << ',' << any->k << ',' << num(alpha) << ','
            << value(cell, alpha, KernelKind::kStandard, per_second) << ','
            << value(cell, alpha, KernelKind::kDelayed, per_second) << ',' << spec.n_replicates << ','
            << batch << '\n';
      }
      files.push_back(name);
    }
  }
  {
    auto out = open_out(dir / "table3_stage2_percentiles.csv");
    out << "n,k,alpha_target,p25,p50,p75\n";
    auto hist = open_out(dir / "fig2_stage2_histogram.csv");
    hist << "n,k,alpha_target,bin_lo,bin_hi,frequency\n";
    for (const auto& s : report.summaries) {
      if (!s.stage2_pooled) continue;
      out << s.n << ',' << s.k << ',' << num(s.alpha_target) << ',' << num(s.stage2_pooled->p25) << ','
          << num(s.stage2_pooled->p50) << ',' << num(s.stage2_pooled->p75) << '\n';
      const Histogram& h = *s.stage2_histogram;
      for (std::size_t b = 0; b < h.frequency.size(); ++b)
        hist << s.n << ',' << s.k << ',' << num(s.alpha_target) << ',' << num(h.edges[b]) << ','
             << num(h.edges[b + 1]) << ',' << num(h.frequency[b]) << '\n';
    }
    files.push_back("table3_stage2_percentiles.csv");
    files.push_back("fig2_stage2_histogram.csv");
  }
  if (report.iv) {
    const IvSummary& iv = *report.iv;
    auto out = open_out(dir / "iv_beta_summary.csv");
    out << "kernel,beta_mean,beta_sd\n";
    for (std::size_t j = 0; j < iv.beta_mean.size(); ++j)
      out << to_string(spec.kernels[j]) << ',' << num(iv.beta_mean[j]) << ',' << num(iv.beta_sd[j]) << '\n';
    auto hist = open_out(dir / "fig3_beta_histogram.csv");
    hist << "kernel,bin_lo,bin_hi,frequency\n";
    for (std::size_t j = 0; j < iv.beta_histogram.size(); ++j) {
      const Histogram& h = iv.beta_histogram[j];
      for (std::size_t b = 0; b < h.frequency.size(); ++b)
        hist << to_string(spec.kernels[j]) << ',' << num(h.edges[b]) << ',' << num(h.edges[b + 1]) << ','
             << num(h.frequency[b]) << '\n';
    }
    auto ks = open_out(dir / "iv_overlap.csv");
    ks << "ks_statistic,ks_p_value,spacing_standard,spacing_delayed\n";
    if (iv.ks)
      ks << num(iv.ks->statistic) << ',' << num(iv.ks->p_value) << ',' << iv.ks_spacing_standard << ','
         << iv.ks_spacing_delayed << '\n';
    files.insert(files.end(), {"iv_beta_summary.csv", "fig3_beta_histogram.csv", "iv_overlap.csv"});
  }

  nlohmann::json manifest;
  manifest["spec"] = spec_json(spec);
  manifest["build_id"] = build_id();
  manifest["environment"] = {{"hardware_concurrency", std::thread::hardware_concurrency()},
#if defined(__VERSION__)
                             {"compiler", __VERSION__},
#endif
                             {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                           std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                           std::to_string(EIGEN_MINOR_VERSION)}};
  manifest["timings"] = {{"total_seconds", report.total_seconds}, {"serial", spec.jobs == 1}};
  if (report.iv) manifest["iv_warnings"] = report.iv->warnings;
  int failed = 0;
  for (const auto& r : report.rows) failed += r.ok() ? 0 : 1;
  manifest["failed_runs"] = failed;
  manifest["files"] = files;
  auto out = open_out(dir / "manifest.json");
  out << manifest.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Validation harness

bool ValidationReport::all_passed() const {
  return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

Matrix discrete_da_transition(const Vector& log_target, const Matrix& log_surrogate, StageTwoRule rule,
                              bool inject_fault) {
  const Index s = log_target.size();
  if (log_surrogate.rows() != s || log_surrogate.cols() != s)
    throw DimensionMismatch("surrogate table must be S x S");
  Matrix p = Matrix::Zero(s, s);
  const double q = 1.0 / static_cast<double>(s - 1);
  for (Index x = 0; x < s; ++x) {
    double off = 0.0;
    for (Index y = 0; y < s; ++y) {
      if (y == x) continue;
      const double a1 = stage_one_probability(log_surrogate(x, y), log_target(x));
      StageTwoInputs in;
      in.log_exact_current = log_target(x);
      in.log_exact_proposal = log_target(y);
      in.log_surrogate_forward = log_surrogate(x, y);
      in.log_surrogate_reverse = log_surrogate(y, x);
      p(x, y) = q * a1 * stage_two_probability(in, rule, inject_fault);
      off += p(x, y);
    }
    p(x, x) = 1.0 - off;
  }
  return p;
}

namespace {

ValidationCheck make_check(std::string name, double measured, double tol, std::string detail) {
  return {std::move(name), measured <= tol, measured, tol, std::move(detail)};
}

Matrix correlated_points(std::mt19937_64& rng, Index n) {
  std::normal_distribution<double> normal;
  Matrix pts(n, 2);
  for (Index i = 0; i < n; ++i) {
    const double a = normal(rng);
    const double b = normal(rng);
    pts(i, 0) = 1.0 + a;
    pts(i, 1) = -2.0 + 0.8 * a + 0.6 * b;
  }
  return pts;
}

}  // namespace

ValidationCheck check_detailed_balance(const ValidationOptions& opts) {
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal;
  constexpr Index kStates = 5;
  Vector log_target(kStates);
  for (Index i = 0; i < kStates; ++i) log_target(i) = normal(rng);
  Matrix log_surrogate(kStates, kStates);
  for (Index x = 0; x < kStates; ++x)
    for (Index y = 0; y < kStates; ++y)
      log_surrogate(x, y) = x == y ? log_target(x) : log_target(y) + 0.8 * normal(rng);

  const Matrix p = discrete_da_transition(log_target, log_surrogate, opts.stage_two, opts.inject_fault);
  Vector pi = (log_target.array() - log_target.maxCoeff()).exp();
  pi /= pi.sum();

  double worst = 0.0;
  for (Index x = 0; x < kStates; ++x)
    for (Index y = 0; y < kStates; ++y) worst = std::max(worst, std::abs(pi(x) * p(x, y) - pi(y) * p(y, x)));
  const double stationarity = (pi.transpose() * p - pi.transpose()).cwiseAbs().maxCoeff();
  std::ostringstream d;
  d << "max |pi_x P_xy - pi_y P_yx| = " << worst << ", max |pi P - pi| = " << stationarity;
  return make_check("detailed_balance", std::max(worst, stationarity), 1e-12, d.str());
}

ValidationCheck check_constant_w_exactness(const ValidationOptions& opts) {
  std::mt19937_64 rng(opts.seed);
  auto model = std::make_shared<LocationModel>(correlated_points(rng, 40));
  Posterior posterior(model, std::nullopt);
  SamplerConfig cfg;
  cfg.seed = opts.seed;
  cfg.n_warmup = opts.constant_w_steps / 10;
  cfg.n_draws = opts.constant_w_steps - cfg.n_warmup;
  cfg.stage_two = opts.stage_two;
  cfg.inject_stage_two_fault = opts.inject_fault;
  const ChainTrace trace = run_chain(KernelKind::kDelayed, posterior, cfg);
  double worst = 0.0;
  std::size_t promoted = 0;
  for (const auto& r : trace.records) {
    if (!r.promoted) continue;
    ++promoted;
    worst = std::max(worst, 1.0 - r.stage2_prob);
  }
  std::ostringstream d;
  d << promoted << " promotions over " << trace.records.size() << " steps, max (1 - alpha2) = " << worst;
  auto c = make_check("constant_w_exactness", worst, 1e-9, d.str());
  c.passed = c.passed && promoted > 0;
  return c;
}

ValidationCheck check_gaussian_target(const ValidationOptions& opts) {
  std::mt19937_64 rng(opts.seed + 1);
  const Matrix pts = correlated_points(rng, 50);
  auto model = std::make_shared<LocationModel>(pts);
  Posterior posterior(model, std::nullopt);
  const Vector true_mean = pts.colwise().mean().transpose();
  const Matrix true_cov = weight_matrix(*model, true_mean).matrix() / static_cast<double>(pts.rows());

  SamplerConfig cfg;
  cfg.seed = opts.seed;
  cfg.n_warmup = 20000;
  cfg.n_draws = opts.gaussian_draws;
  cfg.stage_two = opts.stage_two;
  cfg.inject_stage_two_fault = opts.inject_fault;
  const ChainTrace trace = run_chain(KernelKind::kDelayed, posterior, cfg);
  const EssReport ess = multi_ess(trace.draws);
  const Vector se = mcse(trace.draws, ess.multi_ess);
  const Vector mean = trace.draws.colwise().mean().transpose();
  const double z = ((mean - true_mean).cwiseAbs().array() / se.array()).maxCoeff();
  const Matrix cov = empirical_cov(trace.draws).matrix();
  const double rel = ((cov - true_cov).cwiseAbs().array() / true_cov.cwiseAbs().array()).maxCoeff();

  std::ostringstream d;
  d << "max mean error = " << z << " MCSE (limit 3), max relative covariance error = " << rel
    << " (limit 0.1), multiESS = " << ess.multi_ess;
  ValidationCheck c = make_check("gaussian_target", rel, 0.1, d.str());
  c.passed = c.passed && z < 3.0;
  return c;
}

ValidationCheck check_finite_difference_moments(const ValidationOptions& opts) {
  const SyntheticData syn = generate_synthetic(200, 5, opts.seed);
  const LinearRegressionModel model(syn.data);
  std::mt19937_64 rng(opts.seed + 2);
  std::normal_distribution<double> normal(0.0, 0.5);
  constexpr double kStep = 1e-5;
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    Vector theta = syn.theta_true;
    for (Index j = 0; j < theta.size(); ++j) theta(j) += normal(rng);
    Vector fd(theta.size());
    for (Index j = 0; j < theta.size(); ++j) {
      Vector hi = theta, lo = theta;
      hi(j) += kStep;
      lo(j) -= kStep;
      fd(j) = (*model.risk(hi) - *model.risk(lo)) / (2.0 * kStep);
    }
    const Vector g = model.mbar(theta);
    worst = std::max(worst, (g - fd).norm() / std::max(g.norm(), 1e-300));
  }
  return make_check("finite_difference_moments", worst, 1e-5,
                    "max relative error of mbar vs central difference of r over 10 points");
}

ValidationCheck check_surrogate_identity(const ValidationOptions& opts) {
  const SyntheticData syn = generate_synthetic(200, 5, opts.seed);
  Posterior posterior(std::make_shared<LinearRegressionModel>(syn.data), GaussianPrior::centered(5));
  SamplerConfig cfg;
  cfg.seed = opts.seed;
  cfg.n_warmup = 500;
  cfg.n_draws = 500;
  cfg.stage_two = opts.stage_two;
  cfg.check_surrogate_identity = true;
  try {
    run_chain(KernelKind::kDelayed, posterior, cfg);
  } catch (const std::logic_error& e) {
    return make_check("surrogate_identity", 1.0, 0.0, e.what());
  }
  return make_check("surrogate_identity", 0.0, 0.0, "surrogate equals exact at every state of a 1,000-step chain");
}

ValidationCheck check_lockstep_equivalence(const ValidationOptions& opts) {
  std::mt19937_64 rng(opts.seed + 3);
  auto model = std::make_shared<LocationModel>(correlated_points(rng, 40));
  Posterior posterior(model, std::nullopt);
  SamplerConfig cfg;
  cfg.seed = opts.seed;
  cfg.n_warmup = 1000;
  cfg.n_draws = 5000;
  cfg.lockstep_rng = true;
  cfg.stage_two = opts.stage_two;
  cfg.inject_stage_two_fault = opts.inject_fault;
  const ChainTrace mh = run_chain(KernelKind::kStandard, posterior, cfg);
  const ChainTrace da = run_chain(KernelKind::kDelayed, posterior, cfg);
  std::size_t mismatched = 0;
  for (std::size_t i = 0; i < mh.records.size(); ++i) mismatched += mh.records[i].accepted != da.records[i].accepted;
  // Rounding in W differs between the two evaluation paths at the 1e-14 level and
  // adaptation carries it forward, so draws agree only to a loose tolerance.
  const double scale = std::max(1.0, mh.draws.cwiseAbs().maxCoeff());
  const double diff = (mh.draws - da.draws).cwiseAbs().maxCoeff() / scale;
  std::ostringstream d;
  d << "accept decisions differing: " << mismatched << " of " << mh.records.size()
    << ", max relative draw difference = " << diff << " (limit 1e-5)";
  auto c = make_check("lockstep_equivalence", static_cast<double>(mismatched), 0.0, d.str());
  c.passed = c.passed && diff <= 1e-5;
  return c;
}

ValidationReport run_toy_validate(const ValidationOptions& opts) {
  ValidationReport report;
  report.checks.push_back(check_detailed_balance(opts));
  report.checks.push_back(check_constant_w_exactness(opts));
  report.checks.push_back(check_gaussian_target(opts));
  report.checks.push_back(check_finite_difference_moments(opts));
  report.checks.push_back(check_surrogate_identity(opts));
  report.checks.push_back(check_lockstep_equivalence(opts));
  return report;
}

PosteriorAgreement compare_posteriors(const Matrix& draws_a, const Matrix& draws_b, Index ks_coord) {
  PosteriorAgreement out;
  const EssReport ea = multi_ess(draws_a);
  const EssReport eb = multi_ess(draws_b);
  out.mean_a = draws_a.colwise().mean().transpose();
  out.mean_b = draws_b.colwise().mean().transpose();
  const Vector sa = mcse(draws_a, ea.multi_ess);
  const Vector sb = mcse(draws_b, eb.multi_ess);
  out.combined_mcse = (sa.array().square() + sb.array().square()).sqrt().matrix();
  out.max_z = ((out.mean_a - out.mean_b).cwiseAbs().array() / out.combined_mcse.array()).maxCoeff();

  const auto column = [ks_coord](const Matrix& m) {
    const Vector c = m.col(ks_coord);
    return std::vector<double>(c.data(), c.data() + c.size());
  };
  const auto ca = column(draws_a);
  const auto cb = column(draws_b);
  out.spacing_a = thinning_spacing(ca.size(), ea.multi_ess);
  out.spacing_b = thinning_spacing(cb.size(), eb.multi_ess);
  out.ks = ks_two_sample(thin(ca, out.spacing_a), thin(cb, out.spacing_b));
  return out;
}

}  // namespace qbda
