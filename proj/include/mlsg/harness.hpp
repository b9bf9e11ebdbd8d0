#ifndef MLSG_HARNESS_HPP
#define MLSG_HARNESS_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mlsg/estimators.hpp"
#include "mlsg/optimizers.hpp"
#include "mlsg/schedules.hpp"

namespace mlsg {

struct ReferenceSource {
  std::string path;  // cache file; empty means compute inline
  int q = 3;
  int level = 4;
  int max_iters = 30;
  double grad_tol = 1e-8;
};

struct ExperimentConfig {
  // mlsg | rmlsg | rm-baseline | reference | screen | validate-rates
  std::string strategy = "mlsg";
  AlgoParams params = AlgoParams::defaults(Strategy::mlsg);
  nlohmann::json param_overrides = nlohmann::json::object();
  int repetitions = 1;
  std::int64_t iterations = 1;
  std::uint64_t seed = 1;
  std::optional<ReferenceSource> reference;
  int baseline_level = 0;
  int screen_samples = 100;
  int screen_max_level = 3;
  std::string output = ".";

  // Unknown keys anywhere in the document are rejected with the key named.
  static ExperimentConfig from_json(const nlohmann::json& doc);
  static ExperimentConfig load(const std::string& path);
  // Fully resolved configuration, sufficient to replay the run.
  nlohmann::json to_json() const;
  // Re-resolves params from param_overrides for the current strategy.
  void resolve_params();
};

// Defaults of the numerical experiment, then the flat overrides. Scales that were
// not given explicitly are re-derived from the overridden values.
AlgoParams resolve_params(const std::string& strategy, const nlohmann::json& overrides);

struct AggregatedRun {
  std::vector<std::int64_t> j;
  std::vector<int> max_level;
  std::vector<int> level;
  std::vector<double> mean_error;
  std::vector<std::vector<double>> errors;  // [repetition][record]
  std::vector<double> work_mean;            // realised cumulative work
  std::vector<double> work_std;
  std::vector<double> work_cv;
  std::vector<double> expected_work;        // RMLSG
  std::vector<double> estimator_cost_mean;
};

// Arithmetic mean of the per-repetition L2 errors, record by record.
AggregatedRun aggregate(const std::vector<RunTrace>& traces);

struct ExperimentResult {
  std::string csv_path;
  std::string sidecar_path;
  AggregatedRun run;                 // run strategies
  std::optional<ReferenceResult> reference;
  std::optional<LevelStats> stats;   // screen / validate-rates
  nlohmann::json summary = nlohmann::json::object();
};

ExperimentResult run_experiment(const ExperimentConfig& config);

// Runs every repetition of a run strategy; repetitions fan out over OpenMP.
std::vector<RunTrace> run_repetitions(const ExperimentConfig& config, const ProblemData& data,
                                      const FeField* reference);

// OLS slope of log(ys) against log(xs) over indices [first, last).
double fit_slope(const std::vector<double>& xs, const std::vector<double>& ys, std::size_t first,
                 std::size_t last);
// Same, restricted to points with lo <= xs[i] <= hi.
double fit_slope_in_range(const std::vector<double>& xs, const std::vector<double>& ys, double lo, double hi);

struct RateReport {
  LevelStats stats;
  double slope = 0.0;
  double C_star = 0.0;
  bool pass = false;
  double band_lo = -5.0;
  double band_hi = -3.0;
};

RateReport rate_report(const LevelStats& stats, double exponent);
RateReport validate_rates(const ExperimentConfig& config);

// Merges run CSVs into one long-format CSV with log10 columns, one series per input.
void merge_plot_data(const std::vector<std::string>& inputs, const std::string& output);

std::string format_number(double v);

}  // namespace mlsg

#endif  // MLSG_HARNESS_HPP
