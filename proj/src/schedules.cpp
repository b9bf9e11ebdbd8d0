#include "mlsg/schedules.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mlsg {

std::string to_string(Strategy s) { return s == Strategy::mlsg ? "mlsg" : "rmlsg"; }

AlgoParams AlgoParams::defaults(Strategy strategy) {
  AlgoParams p;
  p.strategy = strategy;
  p.beta = 1e-4;
  p.tau0 = 2.0 / p.beta;
  p.alpha = 10.0;
  p.h0 = 0.125;
  p.r = 1;
  p.d = 2;
  p.gamma = 1.0;
  p.C_star = 0.5;
  p.C_tilde = p.C_star;
  p.eta = strategy == Strategy::mlsg ? 3.0 : 2.0;
  p.derive_scales();
  return p;
}

void AlgoParams::derive_scales() {
  eps0_sq = C_star * std::pow(h0, variance_rate());
  sigma0_sq = (2.0 * tau0 + 2.0 / l_convex()) / (2.0 * tau0) * eps0_sq;
}

void AlgoParams::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("invalid parameters: " + what); };
  if (!(beta > 0.0)) fail("beta must be > 0");
  if (!(tau0 > 0.0)) fail("tau0 must be > 0");
  if (!(tau0 * l_convex() > 2.0)) fail("tau0 * l must exceed 2");
  if (!(alpha >= 0.0)) fail("alpha must be >= 0");
  if (!(eta > 1.0)) fail("eta must exceed 1");
  if (!(h0 > 0.0 && h0 < 1.0)) fail("h0 must lie in (0, 1)");
  if (r < 1 || d < 1 || !(gamma > 0.0)) fail("r, d and gamma must be positive");
  if (!(C_star > 0.0) || !(C_tilde > 0.0)) fail("rate constants must be > 0");
  if (!(eps0_sq > 0.0)) fail("eps0_sq must be > 0");
  const double qs = variance_rate(), qc = cost_rate();
  if (eps0_sq > C_star * std::pow(h0, qs) * (1.0 + 1e-12)) fail("eps0_sq must not exceed C h0^(2r+2)");
  if (strategy == Strategy::mlsg) {
    if (!(sigma0_sq > 0.0)) fail("sigma0_sq must be > 0");
    if (qs > qc && eta < (2.0 * qs - qc) / (qs - qc) * (1.0 - 1e-12))
      fail("MLSG requires eta >= (2(2r+2) - gamma d) / (2r+2 - gamma d)");
  } else {
    if (!(eta < (3.0 * qs + qc) / (qs + qc))) fail("RMLSG requires eta < (3(2r+2) + gamma d) / (2r+2 + gamma d)");
  }
}

std::int64_t snapped_ceil(double x) {
  const double nearest = std::round(x);
  if (std::abs(x - nearest) <= 1e-9 * std::max(1.0, std::abs(x))) return static_cast<std::int64_t>(nearest);
  return static_cast<std::int64_t>(std::ceil(x));
}

double step_size(const AlgoParams& p, std::int64_t j) {
  if (j < 1) throw std::invalid_argument("iteration index starts at 1");
  return p.tau0 / (static_cast<double>(j) + p.alpha);
}

namespace {

int level_from_bias(const AlgoParams& p, std::int64_t j, double decay_exponent) {
  if (j < 1) throw std::invalid_argument("iteration index starts at 1");
  const double qs = p.variance_rate();
  const double log2_bias = std::log2(p.eps0_sq) + decay_exponent * std::log2(static_cast<double>(j)) -
                           std::log2(p.C_star);
  const double x = std::log2(p.h0) - log2_bias / qs;
  return static_cast<int>(std::max<std::int64_t>(0, snapped_ceil(x)));
}

}  // namespace

int mlsg_levels(const AlgoParams& p, std::int64_t j) { return level_from_bias(p, j, 1.0 - p.eta); }

int rmlsg_levels(const AlgoParams& p, std::int64_t j) { return level_from_bias(p, j, -1.0); }

std::vector<std::int64_t> mlsg_samples(const AlgoParams& p, std::int64_t j, int levels) {
  if (j < 1) throw std::invalid_argument("iteration index starts at 1");
  if (levels < 0) throw std::invalid_argument("levels must be nonnegative");
  const double qs = p.variance_rate(), qc = p.cost_rate();
  double tail = 0.0;
  for (int k = 0; k <= levels; ++k) tail += std::exp2(-k * (qs - qc) / 2.0);
  const double prefactor = std::pow(static_cast<double>(j), p.eta - 2.0) * 2.0 * p.C_tilde *
                           std::pow(p.h0, qs) / p.sigma0_sq * tail;
  std::vector<std::int64_t> n(static_cast<std::size_t>(levels) + 1);
  for (int l = 0; l <= levels; ++l)
    n[static_cast<std::size_t>(l)] = std::max<std::int64_t>(1, snapped_ceil(prefactor * std::exp2(-l * (qs + qc) / 2.0)));
  return n;
}

std::vector<double> level_pmf(const AlgoParams& p, int levels) {
  if (levels < 0) throw std::invalid_argument("levels must be nonnegative");
  const double ratio = std::exp2(-(p.variance_rate() + p.cost_rate()) / 2.0);
  std::vector<double> pmf(static_cast<std::size_t>(levels) + 1);
  double w = 1.0;
  for (auto& v : pmf) {
    v = w;
    w *= ratio;
  }
  const double total = std::accumulate(pmf.begin(), pmf.end(), 0.0);
  for (auto& v : pmf) v /= total;
  return pmf;
}

bool pmf_variance_bounded(const AlgoParams& p) { return p.variance_rate() > p.cost_rate(); }

int sample_level(const std::vector<double>& pmf, double uniform) {
  if (pmf.empty()) throw std::invalid_argument("empty pmf");
  double cumulative = 0.0;
  for (std::size_t l = 0; l < pmf.size(); ++l) {
    cumulative += pmf[l];
    if (uniform < cumulative) return static_cast<int>(l);
  }
  return static_cast<int>(pmf.size()) - 1;
}

double solve_work(const AlgoParams& p, int level) { return std::exp2(level * p.cost_rate()); }

double mlsg_iteration_work(const AlgoParams& p, const std::vector<std::int64_t>& samples) {
  double w = 0.0;
  for (std::size_t l = 0; l < samples.size(); ++l)
    w += solve_work(p, static_cast<int>(l)) * static_cast<double>(samples[l]);
  return w;
}

double rmlsg_expected_iteration_work(const AlgoParams& p, const std::vector<double>& pmf) {
  double w = 0.0;
  for (std::size_t l = 0; l < pmf.size(); ++l) w += solve_work(p, static_cast<int>(l)) * pmf[l];
  return w;
}

WorkHistory mlsg_work_history(const AlgoParams& p, std::int64_t iterations) {
  WorkHistory h;
  double total = 0.0;
  for (std::int64_t j = 1; j <= iterations; ++j) {
    total += mlsg_iteration_work(p, mlsg_samples(p, j, mlsg_levels(p, j)));
    h.cumulative.push_back(total);
  }
  return h;
}

WorkHistory rmlsg_work_history(const AlgoParams& p, const std::vector<int>& sampled_levels) {
  WorkHistory h;
  double realised = 0.0, expected = 0.0;
  for (std::size_t i = 0; i < sampled_levels.size(); ++i) {
    const auto j = static_cast<std::int64_t>(i) + 1;
    expected += rmlsg_expected_iteration_work(p, level_pmf(p, rmlsg_levels(p, j)));
    realised += solve_work(p, sampled_levels[i]);
    h.cumulative.push_back(realised);
    h.expected_cumulative.push_back(expected);
  }
  return h;
}

Spread spread(const std::vector<double>& values) {
  Spread s;
  if (values.empty()) return s;
  const double n = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.variance = ss / (n - 1.0);
  }
  s.cv = s.mean != 0.0 ? std::sqrt(s.variance) / s.mean : 0.0;
  return s;
}

}  // namespace mlsg
