#include "mlsg/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <utility>

#include "mlsg/schedules.hpp"

namespace mlsg {

FeField coupled_adjoint_difference(const ProblemData& data, const ControlLoads& loads, int level,
                                   const SampleVector& xi) {
  const RealizationSolver fine(data, level, xi);
  FeField diff = fine.adjoint(fine.primal(loads.at(level)));
  if (level > 0) {
    const RealizationSolver coarse(data, level - 1, xi);
    const FeField p_coarse = coarse.adjoint(coarse.primal(loads.at(level - 1)));
    diff.coeffs -= prolong(p_coarse, level, data.h0()).coeffs;
  }
  return diff;
}

double coupled_difference_cost(int level, double cost_exponent) {
  double cost = std::exp2(level * cost_exponent);
  if (level > 0) cost += std::exp2((level - 1) * cost_exponent);
  return 2.0 * cost;
}

namespace {

void check_samples(int levels, const std::vector<std::int64_t>& samples) {
  if (samples.empty()) throw std::invalid_argument("mlmc_gradient: empty sample vector");
  if (levels < 0 || samples.size() != static_cast<std::size_t>(levels) + 1)
    throw std::invalid_argument("mlmc_gradient: need one sample count per level 0..L");
  for (auto n : samples)
    if (n < 1) throw std::invalid_argument("mlmc_gradient: every level needs at least one sample");
}

struct Task {
  int level;
  std::uint64_t index;
};

std::vector<Task> flatten(const std::vector<std::int64_t>& samples) {
  std::vector<Task> tasks;
  for (std::size_t l = 0; l < samples.size(); ++l)
    for (std::int64_t i = 0; i < samples[l]; ++i) tasks.push_back({static_cast<int>(l), static_cast<std::uint64_t>(i)});
  return tasks;
}

// Ordered reduction shared by both execution paths.
MlmcOutput reduce(const ProblemData& data, const FeField& u, int levels,
                  const std::vector<std::int64_t>& samples, const std::vector<FeField>& diffs,
                  double cost_exponent) {
  const int out_level = std::max(levels, u.level);
  MlmcOutput out;
  out.grad = prolong(u, out_level, data.h0());
  out.grad.coeffs *= data.beta;
  out.samples_used = samples;
  std::size_t k = 0;
  for (int l = 0; l <= levels; ++l) {
    FeField level_sum = FeField::zero(data.meshes().mesh(l));
    const auto n = samples[static_cast<std::size_t>(l)];
    for (std::int64_t i = 0; i < n; ++i) level_sum.coeffs += diffs[k++].coeffs;
    level_sum.coeffs /= static_cast<double>(n);
    out.grad.coeffs += prolong(level_sum, out_level, data.h0()).coeffs;
    out.model_cost += static_cast<double>(n) * coupled_difference_cost(l, cost_exponent);
  }
  return out;
}

}  // namespace

MlmcOutput mlmc_gradient(const ProblemData& data, const FeField& u, int levels,
                         const std::vector<std::int64_t>& samples, const XiSource& xi_source,
                         double cost_exponent) {
  check_samples(levels, samples);
  const ControlLoads loads(data, u, levels);
  const auto tasks = flatten(samples);
  std::vector<FeField> diffs(tasks.size());
  const auto count = static_cast<std::int64_t>(tasks.size());
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t t = 0; t < count; ++t) {
    const Task& task = tasks[static_cast<std::size_t>(t)];
    diffs[static_cast<std::size_t>(t)] =
        coupled_adjoint_difference(data, loads, task.level, xi_source(task.level, task.index));
  }
  return reduce(data, u, levels, samples, diffs, cost_exponent);
}

MlmcOutput mlmc_gradient_serial(const ProblemData& data, const FeField& u, int levels,
                                const std::vector<std::int64_t>& samples, const XiSource& xi_source,
                                double cost_exponent) {
  check_samples(levels, samples);
  const ControlLoads loads(data, u, levels);
  std::vector<FeField> diffs;
  for (const Task& task : flatten(samples))
    diffs.push_back(coupled_adjoint_difference(data, loads, task.level, xi_source(task.level, task.index)));
  return reduce(data, u, levels, samples, diffs, cost_exponent);
}

void validate_pmf(const std::vector<double>& pmf) {
  if (pmf.empty()) throw std::invalid_argument("pmf is empty");
  for (double p : pmf)
    if (!(p > 0.0)) throw std::invalid_argument("pmf entries must be positive");
  const double total = std::accumulate(pmf.begin(), pmf.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("pmf does not sum to one");
}

FeField rmlmc_term(const ProblemData& data, const FeField& u, int levels, const std::vector<double>& pmf,
                   int level, const SampleVector& xi) {
  validate_pmf(pmf);
  if (pmf.size() != static_cast<std::size_t>(levels) + 1) throw std::invalid_argument("pmf length must be L+1");
  if (level < 0 || level > levels) throw std::out_of_range("sampled level outside 0..L");
  const ControlLoads loads(data, u, level);
  const int out_level = std::max(levels, u.level);
  FeField diff = coupled_adjoint_difference(data, loads, level, xi);
  FeField grad = prolong(u, out_level, data.h0());
  grad.coeffs *= data.beta;
  grad.coeffs += prolong(diff, out_level, data.h0()).coeffs / pmf[static_cast<std::size_t>(level)];
  return grad;
}

MlmcOutput rmlmc_gradient(const ProblemData& data, const FeField& u, int levels,
                          const std::vector<double>& pmf, double level_uniform,
                          const XiSource& xi_source, double cost_exponent) {
  validate_pmf(pmf);
  const int level = sample_level(pmf, level_uniform);
  MlmcOutput out;
  out.grad = rmlmc_term(data, u, levels, pmf, level, xi_source(level, 0));
  out.model_cost = coupled_difference_cost(level, cost_exponent);
  out.samples_used.assign(static_cast<std::size_t>(levels) + 1, 0);
  out.samples_used[static_cast<std::size_t>(level)] = 1;
  out.sampled_level = level;
  return out;
}

namespace {

// Squared norms of grad f at level 0 and of each coupled gradient difference for one realisation.
std::vector<double> screening_sample(const ProblemData& data, const FeField& u, const ControlLoads& loads,
                                     int max_level, const SampleVector& xi) {
  std::vector<double> out(static_cast<std::size_t>(max_level) + 1);
  const auto& meshes = data.meshes();
  FeField previous;
  for (int l = 0; l <= max_level; ++l) {
    const RealizationSolver solver(data, l, xi);
    FeField p = solver.adjoint(solver.primal(loads.at(l)));
    if (l == 0) {
      const int lvl = std::max(0, u.level);
      FeField grad = prolong(u, lvl, data.h0());
      grad.coeffs *= data.beta;
      grad.coeffs += prolong(p, lvl, data.h0()).coeffs;
      out[0] = l2_inner(meshes, grad, grad);
    } else {
      // beta u cancels in the difference
      FeField diff = p;
      diff.coeffs -= prolong(previous, l, data.h0()).coeffs;
      out[static_cast<std::size_t>(l)] = l2_inner(meshes, diff, diff);
    }
    previous = std::move(p);
  }
  return out;
}

LevelStats finish_stats(const ProblemData& data, int max_level, int samples,
                        const std::vector<std::vector<double>>& per_sample) {
  LevelStats stats;
  stats.samples = samples;
  stats.second_moment.assign(static_cast<std::size_t>(max_level) + 1, 0.0);
  for (const auto& s : per_sample)
    for (std::size_t l = 0; l < s.size(); ++l) stats.second_moment[l] += s[l];
  for (auto& v : stats.second_moment) v /= samples;
  for (int l = 0; l <= max_level; ++l) stats.h.push_back(data.meshes().mesh(l).h());
  return stats;
}

void check_screening(int max_level, int samples) {
  if (samples < 2) throw std::invalid_argument("screening needs at least 2 samples per level");
  if (max_level < 1) throw std::invalid_argument("screening needs at least one difference level");
}

}  // namespace

LevelStats screen_levels(const ProblemData& data, const FeField& u, int max_level, int samples,
                         const XiSource& xi_source) {
  check_screening(max_level, samples);
  const ControlLoads loads(data, u, max_level);
  std::vector<std::vector<double>> per_sample(static_cast<std::size_t>(samples));
#pragma omp parallel for schedule(dynamic)
  for (int j = 0; j < samples; ++j)
    per_sample[static_cast<std::size_t>(j)] =
        screening_sample(data, u, loads, max_level, xi_source(0, static_cast<std::uint64_t>(j)));
  return finish_stats(data, max_level, samples, per_sample);
}

LevelStats screen_levels_serial(const ProblemData& data, const FeField& u, int max_level, int samples,
                                const XiSource& xi_source) {
  check_screening(max_level, samples);
  const ControlLoads loads(data, u, max_level);
  std::vector<std::vector<double>> per_sample;
  for (int j = 0; j < samples; ++j)
    per_sample.push_back(screening_sample(data, u, loads, max_level, xi_source(0, static_cast<std::uint64_t>(j))));
  return finish_stats(data, max_level, samples, per_sample);
}

double fit_rate_constant(const LevelStats& stats, double exponent) {
  double sum = 0.0;
  int used = 0;
  for (std::size_t l = 1; l < stats.second_moment.size(); ++l) {
    const double e = stats.second_moment[l];
    if (e > 0.0) {
      sum += std::log(e) - exponent * std::log(stats.h.at(l));
      ++used;
    }
  }
  if (used == 0) throw std::domain_error("cannot fit rate constant: every level difference is zero");
  return std::exp(sum / used);
}

double level_decay_slope(const LevelStats& stats) {
  std::vector<double> xs, ys;
  for (std::size_t l = 1; l < stats.second_moment.size(); ++l) {
    if (!(stats.second_moment[l] > 0.0)) throw std::domain_error("zero level difference in slope fit");
    xs.push_back(static_cast<double>(l));
    ys.push_back(std::log2(stats.second_moment[l]));
  }
  if (xs.size() < 2) throw std::invalid_argument("slope fit needs at least two difference levels");
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return sxy / sxx;
}

std::vector<std::int64_t> optimal_sample_sizes(double tol, const std::vector<double>& variances,
                                               const std::vector<double>& costs) {
  if (!(tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
  if (variances.size() != costs.size() || variances.empty())
    throw std::invalid_argument("need matching, nonempty variance and cost vectors");
  double total = 0.0;
  for (std::size_t k = 0; k < costs.size(); ++k) {
    if (!(costs[k] > 0.0)) throw std::invalid_argument("level costs must be positive");
    if (variances[k] < 0.0) throw std::invalid_argument("level variances must be nonnegative");
    total += std::sqrt(variances[k] * costs[k]);
  }
  std::vector<std::int64_t> n;
  for (std::size_t l = 0; l < costs.size(); ++l)
    n.push_back(snapped_ceil(std::sqrt(variances[l] / costs[l]) * total / (tol * tol)));
  return n;
}

}  // namespace mlsg
