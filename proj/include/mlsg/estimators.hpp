#ifndef MLSG_ESTIMATORS_HPP
#define MLSG_ESTIMATORS_HPP

#include <cstdint>
#include <optional>
#include <vector>

#include "mlsg/fem.hpp"
#include "mlsg/pde.hpp"
#include "mlsg/random_field.hpp"

namespace mlsg {

struct MlmcOutput {
  FeField grad;
  // Sum over solves of 2^(l gamma d); a level-l difference costs both of its
  // levels and every solve is counted twice (primal and adjoint).
  double model_cost = 0.0;
  std::vector<std::int64_t> samples_used;
  std::optional<int> sampled_level;
};

// p^{h_l}(u, xi) - p^{h_{l-1}}(u, xi) on level l, both solves on the same xi and
// the coarse adjoint prolonged before subtracting. At l = 0 the coarse term is zero.
FeField coupled_adjoint_difference(const ProblemData& data, const ControlLoads& loads, int level,
                                   const SampleVector& xi);

// Model cost of one coupled difference on `level`.
double coupled_difference_cost(int level, double cost_exponent);

// beta u + sum_l 1/N_l sum_i (p^{h_l} - p^{h_{l-1}})(u, xi_{l,i}) at level max(levels, u.level).
// Sample i of level l uses xi_source(l, i). Per-sample solves run on the
// OpenMP pool; the reduction order is fixed, so the result matches the serial path bit for bit.
MlmcOutput mlmc_gradient(const ProblemData& data, const FeField& u, int levels,
                         const std::vector<std::int64_t>& samples, const XiSource& xi_source,
                         double cost_exponent);
MlmcOutput mlmc_gradient_serial(const ProblemData& data, const FeField& u, int levels,
                                const std::vector<std::int64_t>& samples, const XiSource& xi_source,
                                double cost_exponent);

// One reweighted difference: beta u + (p^{h_l} - p^{h_{l-1}})(u, xi) / pmf[l].
FeField rmlmc_term(const ProblemData& data, const FeField& u, int levels, const std::vector<double>& pmf,
                   int level, const SampleVector& xi);

// Draws l from the pmf with `level_uniform`, then xi = xi_source(l, 0).
MlmcOutput rmlmc_gradient(const ProblemData& data, const FeField& u, int levels,
                          const std::vector<double>& pmf, double level_uniform,
                          const XiSource& xi_source, double cost_exponent);

void validate_pmf(const std::vector<double>& pmf);

struct LevelStats {
  // second_moment[0] = mean ||grad f^{h_0}||^2, second_moment[l] = mean ||grad f^{h_l} - grad f^{h_{l-1}}||^2.
  std::vector<double> second_moment;
  std::vector<double> h;
  int samples = 0;
};

// Screening at a fixed control with M realisations xi_j = xi_source(0, j), shared by all levels.
LevelStats screen_levels(const ProblemData& data, const FeField& u, int max_level, int samples,
                         const XiSource& xi_source);
LevelStats screen_levels_serial(const ProblemData& data, const FeField& u, int max_level, int samples,
                                const XiSource& xi_source);

// C such that E_l ~ C h_l^exponent, fitted in log space with the slope pinned.
double fit_rate_constant(const LevelStats& stats, double exponent);
// Least-squares slope of log2 E_l against l over the difference levels.
double level_decay_slope(const LevelStats& stats);

// N_l = ceil(tol^-2 sqrt(V_l / C_l) sum_k sqrt(V_k C_k)).
std::vector<std::int64_t> optimal_sample_sizes(double tol, const std::vector<double>& variances,
                                               const std::vector<double>& costs);

}  // namespace mlsg

#endif  // MLSG_ESTIMATORS_HPP
