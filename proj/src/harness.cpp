#include "mlsg/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>

#include "mlsg/reference_cache.hpp"

namespace mlsg {

using nlohmann::json;

namespace {

const std::set<std::string> kStrategies{"mlsg", "rmlsg", "rm-baseline", "reference", "screen", "validate-rates"};
const std::set<std::string> kParamKeys{"beta", "tau0", "alpha", "eta", "eps0_sq", "sigma0_sq",
                                       "h0",   "r",    "d",     "gamma", "C_star", "C_tilde"};

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw std::invalid_argument(where + " must be a JSON object");
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (!allowed.count(key)) throw std::invalid_argument("unknown key '" + key + "' in " + where);
  }
}

double number(const json& obj, const std::string& key) {
  const auto& v = obj.at(key);
  if (!v.is_number()) throw std::invalid_argument("'" + key + "' must be a number");
  return v.get<double>();
}

std::int64_t integer(const json& obj, const std::string& key) {
  const auto& v = obj.at(key);
  if (!v.is_number_integer()) throw std::invalid_argument("'" + key + "' must be an integer");
  return v.get<std::int64_t>();
}

bool is_run_strategy(const std::string& s) { return s == "mlsg" || s == "rmlsg" || s == "rm-baseline"; }

}  // namespace

AlgoParams resolve_params(const std::string& strategy, const json& overrides) {
  reject_unknown(overrides, kParamKeys, "params");
  AlgoParams p = AlgoParams::defaults(strategy == "rmlsg" ? Strategy::rmlsg : Strategy::mlsg);
  auto has = [&](const char* k) { return overrides.contains(k); };
  if (has("beta")) {
    p.beta = number(overrides, "beta");
    if (!has("tau0")) p.tau0 = 2.0 / p.beta;
  }
  if (has("tau0")) p.tau0 = number(overrides, "tau0");
  if (has("alpha")) p.alpha = number(overrides, "alpha");
  if (has("eta")) p.eta = number(overrides, "eta");
  if (has("h0")) p.h0 = number(overrides, "h0");
  if (has("r")) p.r = static_cast<int>(integer(overrides, "r"));
  if (has("d")) p.d = static_cast<int>(integer(overrides, "d"));
  if (has("gamma")) p.gamma = number(overrides, "gamma");
  if (has("C_star")) p.C_star = number(overrides, "C_star");
  p.C_tilde = has("C_tilde") ? number(overrides, "C_tilde") : p.C_star;
  p.derive_scales();
  if (has("eps0_sq")) {
    p.eps0_sq = number(overrides, "eps0_sq");
    p.sigma0_sq = (2.0 * p.tau0 + 2.0 / p.l_convex()) / (2.0 * p.tau0) * p.eps0_sq;
  }
  if (has("sigma0_sq")) p.sigma0_sq = number(overrides, "sigma0_sq");
  return p;
}

void ExperimentConfig::resolve_params() { params = mlsg::resolve_params(strategy, param_overrides); }

ExperimentConfig ExperimentConfig::from_json(const json& doc) {
  reject_unknown(doc, {"strategy", "params", "repetitions", "iterations", "seed", "reference", "baseline_level",
                       "screen", "output"},
                 "config");
  ExperimentConfig c;
  if (doc.contains("strategy")) c.strategy = doc.at("strategy").get<std::string>();
  if (!kStrategies.count(c.strategy)) throw std::invalid_argument("unknown strategy '" + c.strategy + "'");
  if (doc.contains("params")) c.param_overrides = doc.at("params");
  if (doc.contains("repetitions")) c.repetitions = static_cast<int>(integer(doc, "repetitions"));
  if (doc.contains("iterations")) c.iterations = integer(doc, "iterations");
  if (doc.contains("seed")) c.seed = static_cast<std::uint64_t>(integer(doc, "seed"));
  if (doc.contains("baseline_level")) c.baseline_level = static_cast<int>(integer(doc, "baseline_level"));
  if (doc.contains("output")) c.output = doc.at("output").get<std::string>();
  if (doc.contains("reference")) {
    const json& r = doc.at("reference");
    ReferenceSource src;
    if (r.is_string()) {
      src.path = r.get<std::string>();
    } else {
      reject_unknown(r, {"path", "q", "level", "max_iters", "grad_tol"}, "reference");
      if (r.contains("path")) src.path = r.at("path").get<std::string>();
      if (r.contains("q")) src.q = static_cast<int>(integer(r, "q"));
      if (r.contains("level")) src.level = static_cast<int>(integer(r, "level"));
      if (r.contains("max_iters")) src.max_iters = static_cast<int>(integer(r, "max_iters"));
      if (r.contains("grad_tol")) src.grad_tol = number(r, "grad_tol");
    }
    c.reference = src;
  }
  if (doc.contains("screen")) {
    const json& s = doc.at("screen");
    reject_unknown(s, {"samples", "max_level"}, "screen");
    if (s.contains("samples")) c.screen_samples = static_cast<int>(integer(s, "samples"));
    if (s.contains("max_level")) c.screen_max_level = static_cast<int>(integer(s, "max_level"));
  }
  if (c.repetitions < 1) throw std::invalid_argument("repetitions must be >= 1");
  if (c.iterations < 1) throw std::invalid_argument("iterations must be >= 1");
  c.resolve_params();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  return from_json(json::parse(in));
}

json ExperimentConfig::to_json() const {
  json p = {{"beta", params.beta},   {"tau0", params.tau0},       {"alpha", params.alpha},
            {"eta", params.eta},     {"eps0_sq", params.eps0_sq}, {"sigma0_sq", params.sigma0_sq},
            {"h0", params.h0},       {"r", params.r},             {"d", params.d},
            {"gamma", params.gamma}, {"C_star", params.C_star},   {"C_tilde", params.C_tilde}};
  json doc = {{"strategy", strategy},     {"params", p},
              {"repetitions", repetitions}, {"iterations", iterations},
              {"seed", seed},             {"baseline_level", baseline_level},
              {"screen", {{"samples", screen_samples}, {"max_level", screen_max_level}}},
              {"output", output}};
  if (reference) {
    doc["reference"] = {{"path", reference->path},
                        {"q", reference->q},
                        {"level", reference->level},
                        {"max_iters", reference->max_iters},
                        {"grad_tol", reference->grad_tol}};
  }
  return doc;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

AggregatedRun aggregate(const std::vector<RunTrace>& traces) {
  if (traces.empty()) throw std::invalid_argument("nothing to aggregate");
  AggregatedRun a;
  const std::size_t n = traces.front().records.size();
  for (const auto& t : traces)
    if (t.records.size() != n) throw std::invalid_argument("repetitions have different lengths");
  a.errors.assign(traces.size(), std::vector<double>(n));
  for (std::size_t k = 0; k < n; ++k) {
    const auto& first = traces.front().records[k];
    a.j.push_back(first.j);
    a.max_level.push_back(first.max_level);
    a.level.push_back(first.level);
    a.expected_work.push_back(first.expected_work);
    double err = 0.0, cost = 0.0;
    std::vector<double> work;
    for (std::size_t r = 0; r < traces.size(); ++r) {
      const auto& rec = traces[r].records[k];
      a.errors[r][k] = rec.error;
      err += rec.error;
      cost += rec.estimator_cost;
      work.push_back(rec.work);
    }
    const double reps = static_cast<double>(traces.size());
    a.mean_error.push_back(err / reps);
    a.estimator_cost_mean.push_back(cost / reps);
    const Spread s = spread(work);
    a.work_mean.push_back(s.mean);
    a.work_std.push_back(std::sqrt(s.variance));
    a.work_cv.push_back(s.cv);
  }
  return a;
}

std::vector<RunTrace> run_repetitions(const ExperimentConfig& config, const ProblemData& data,
                                      const FeField* reference) {
  std::vector<RunTrace> traces(static_cast<std::size_t>(config.repetitions));
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (int r = 0; r < config.repetitions; ++r) {
    try {
      RunOptions options;
      options.repetition = static_cast<std::uint64_t>(r);
      options.reference = reference;
      options.parallel = false;
      RunTrace trace;
      if (config.strategy == "mlsg") {
        trace = run_mlsg(config.params, data, config.iterations, config.seed, options);
      } else if (config.strategy == "rmlsg") {
        trace = run_rmlsg(config.params, data, config.iterations, config.seed, options);
      } else {
        trace = run_rm_baseline(config.params, data, config.baseline_level, config.iterations, config.seed, options);
      }
      traces[static_cast<std::size_t>(r)] = std::move(trace);
    } catch (...) {
#pragma omp critical(mlsg_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return traces;
}

namespace {

void write_sidecar(const ExperimentConfig& config, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << config.to_json().dump(2) << "\n";
}

void write_run_csv(const ExperimentConfig& config, const AggregatedRun& a, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  const bool mlsg = config.strategy == "mlsg";
  const bool rmlsg = config.strategy == "rmlsg";
  out << "j," << (config.strategy == "rm-baseline" ? "level" : "L_j,level") << ",mean_error";
  for (std::size_t r = 0; r < a.errors.size(); ++r) out << ",err_rep" << r;
  if (mlsg) out << ",W_j,estimator_cost_mean";
  if (rmlsg) out << ",expected_W_j,W_mean,W_std,W_cv,estimator_cost_mean";
  if (!mlsg && !rmlsg) out << ",W_j";
  out << "\n";
  for (std::size_t k = 0; k < a.j.size(); ++k) {
    out << a.j[k] << ",";
    if (config.strategy == "rm-baseline") {
      out << a.level[k];
    } else {
      out << a.max_level[k] << "," << a.level[k];
    }
    out << "," << format_number(a.mean_error[k]);
    for (const auto& e : a.errors) out << "," << format_number(e[k]);
    if (mlsg) out << "," << format_number(a.work_mean[k]) << "," << format_number(a.estimator_cost_mean[k]);
    if (rmlsg)
      out << "," << format_number(a.expected_work[k]) << "," << format_number(a.work_mean[k]) << ","
          << format_number(a.work_std[k]) << "," << format_number(a.work_cv[k]) << ","
          << format_number(a.estimator_cost_mean[k]);
    if (!mlsg && !rmlsg) out << "," << format_number(a.work_mean[k]);
    out << "\n";
  }
}

void write_stats_csv(const LevelStats& stats, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "level,h,second_moment\n";
  for (std::size_t l = 0; l < stats.second_moment.size(); ++l)
    out << l << "," << format_number(stats.h[l]) << "," << format_number(stats.second_moment[l]) << "\n";
}

int required_level(const ExperimentConfig& config) {
  int level = 0;
  if (config.strategy == "mlsg" || config.strategy == "rmlsg")
    level = max_schedule_level(config.params, config.iterations);
  if (config.strategy == "rm-baseline") level = config.baseline_level;
  if (config.strategy == "screen" || config.strategy == "validate-rates") level = config.screen_max_level;
  if (config.reference) level = std::max(level, config.reference->level);
  return level;
}

LevelStats screen_at_zero(const ExperimentConfig& config, const ProblemData& data) {
  return screen_levels(data, FeField::zero(data.meshes().mesh(0)), config.screen_max_level, config.screen_samples,
                       keyed_xi_source(config.seed, 0, 0));
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  namespace fs = std::filesystem;
  fs::create_directories(config.output);
  ExperimentResult result;
  result.csv_path = (fs::path(config.output) / (config.strategy + ".csv")).string();
  result.sidecar_path = (fs::path(config.output) / (config.strategy + ".config.json")).string();

  if (config.strategy == "screen" || config.strategy == "validate-rates") {
    if (config.screen_samples < 2) throw std::invalid_argument("screening needs at least 2 samples per level");
  }
  if (config.strategy == "rmlsg" && !pmf_variance_bounded(config.params))
    std::cerr << "warning: 2r+2 <= gamma d, the randomized estimator variance is not bounded\n";

  // Reference level may exceed the schedule; read cached files first so the hierarchy covers them.
  std::optional<ReferenceFile> cached;
  if (config.reference && !config.reference->path.empty() && is_run_strategy(config.strategy)) {
    cached = read_reference(config.reference->path);
    if (std::abs(cached->h0 - config.params.h0) > 1e-15)
      throw std::invalid_argument("reference file h0 does not match params.h0");
  }
  int max_level = required_level(config);
  if (cached) max_level = std::max(max_level, cached->control.level);
  if (is_run_strategy(config.strategy) && config.reference) {
    const int ref_level = cached ? cached->control.level : config.reference->level;
    int run_level = config.baseline_level;
    if (config.strategy != "rm-baseline") run_level = max_schedule_level(config.params, config.iterations);
    if (ref_level < run_level)
      throw std::invalid_argument("reference level " + std::to_string(ref_level) +
                                  " is coarser than the finest iterate level " + std::to_string(run_level));
  }
  const ProblemData data = ProblemData::test_case(config.params.beta, config.params.h0, max_level);

  if (is_run_strategy(config.strategy)) {
    std::optional<FeField> reference;
    if (cached) {
      reference = cached->control;
    } else if (config.reference) {
      const auto& spec = *config.reference;
      auto ref = solve_reference(data, spec.q, spec.level, spec.max_iters, spec.grad_tol);
      if (!ref.converged)
        std::cerr << "warning: reference solve stopped after " << ref.iterations
                  << " iterations with gradient norm " << format_number(ref.gradient_norms.back()) << "\n";
      reference = ref.control;
    }
    const auto traces = run_repetitions(config, data, reference ? &*reference : nullptr);
    result.run = aggregate(traces);
    write_run_csv(config, result.run, result.csv_path);
    result.summary = {{"final_mean_error", result.run.mean_error.back()},
                      {"iterations", config.iterations},
                      {"repetitions", config.repetitions}};
  } else if (config.strategy == "reference") {
    const ReferenceSource spec = config.reference.value_or(ReferenceSource{});
    ReferenceResult ref = solve_reference(data, spec.q, spec.level, spec.max_iters, spec.grad_tol);
    if (!ref.converged)
      std::cerr << "warning: reference solve did not reach " << format_number(spec.grad_tol) << " in "
                << ref.iterations << " iterations, final gradient norm "
                << format_number(ref.gradient_norms.back()) << "\n";
    const std::string cache =
        spec.path.empty() ? (fs::path(config.output) / "reference.txt").string() : spec.path;
    write_reference(cache, ref.control, data.h0());
    std::ofstream out(result.csv_path);
    out << "iteration,gradient_norm,objective\n";
    for (std::size_t k = 0; k < ref.gradient_norms.size(); ++k)
      out << k << "," << format_number(ref.gradient_norms[k]) << "," << format_number(ref.objective[k]) << "\n";
    result.summary = {{"cache", cache},
                      {"hash", hash_hex(content_hash(ref.control.coeffs))},
                      {"iterations", ref.iterations},
                      {"final_gradient_norm", ref.gradient_norms.back()},
                      {"converged", ref.converged}};
    result.reference = std::move(ref);
  } else {
    LevelStats stats = screen_at_zero(config, data);
    write_stats_csv(stats, result.csv_path);
    const RateReport report = rate_report(stats, config.params.variance_rate());
    result.summary = {{"C_star", report.C_star}, {"slope", report.slope}, {"pass", report.pass},
                      {"band", {report.band_lo, report.band_hi}}};
    result.stats = std::move(stats);
  }
  write_sidecar(config, result.sidecar_path);
  return result;
}

double fit_slope(const std::vector<double>& xs, const std::vector<double>& ys, std::size_t first, std::size_t last) {
  if (xs.size() != ys.size()) throw std::invalid_argument("fit_slope: xs and ys differ in length");
  if (last > xs.size() || first >= last || last - first < 3)
    throw std::invalid_argument("fit_slope: need at least 3 points in the window");
  std::vector<double> lx, ly;
  for (std::size_t i = first; i < last; ++i) {
    if (!(xs[i] > 0.0) || !(ys[i] > 0.0)) throw std::invalid_argument("fit_slope: values must be positive");
    lx.push_back(std::log(xs[i]));
    ly.push_back(std::log(ys[i]));
  }
  const double n = static_cast<double>(lx.size());
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / n;
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("fit_slope: degenerate abscissae");
  return sxy / sxx;
}

double fit_slope_in_range(const std::vector<double>& xs, const std::vector<double>& ys, double lo, double hi) {
  std::vector<double> sx, sy;
  for (std::size_t i = 0; i < xs.size() && i < ys.size(); ++i) {
    if (xs[i] >= lo && xs[i] <= hi) {
      sx.push_back(xs[i]);
      sy.push_back(ys[i]);
    }
  }
  return fit_slope(sx, sy, 0, sx.size());
}

RateReport rate_report(const LevelStats& stats, double exponent) {
  RateReport report;
  report.stats = stats;
  report.slope = level_decay_slope(stats);
  report.C_star = fit_rate_constant(stats, exponent);
  report.pass = report.slope >= report.band_lo && report.slope <= report.band_hi;
  return report;
}

RateReport validate_rates(const ExperimentConfig& config) {
  if (config.screen_samples < 2) throw std::invalid_argument("screening needs at least 2 samples per level");
  const ProblemData data = ProblemData::test_case(config.params.beta, config.params.h0, config.screen_max_level);
  return rate_report(screen_at_zero(config, data), config.params.variance_rate());
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

}  // namespace

void merge_plot_data(const std::vector<std::string>& inputs, const std::string& output) {
  if (inputs.empty()) throw std::invalid_argument("plot-data needs at least one input CSV");
  std::ofstream out(output);
  if (!out) throw std::runtime_error("cannot write " + output);
  out << "series,j,cost,mean_error,log10_j,log10_cost,log10_mean_error\n";
  for (const auto& path : inputs) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::string line;
    std::getline(in, line);
    const auto header = split_csv(line);
    auto column = [&](const std::vector<std::string>& names) -> long {
      for (const auto& name : names) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it != header.end()) return it - header.begin();
      }
      return -1;
    };
    const long cj = column({"j"}), ce = column({"mean_error"}), cw = column({"expected_W_j", "W_j"});
    if (cj < 0 || ce < 0 || cw < 0) throw std::invalid_argument(path + " is not a run trace CSV");
    const std::string series = std::filesystem::path(path).stem().string();
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto cells = split_csv(line);
      const double j = std::stod(cells.at(static_cast<std::size_t>(cj)));
      const double err = std::stod(cells.at(static_cast<std::size_t>(ce)));
      const double w = std::stod(cells.at(static_cast<std::size_t>(cw)));
      out << series << "," << format_number(j) << "," << format_number(w) << "," << format_number(err) << ","
          << format_number(std::log10(j)) << "," << format_number(std::log10(w)) << ","
          << format_number(std::log10(err)) << "\n";
    }
  }
}

}  // namespace mlsg
