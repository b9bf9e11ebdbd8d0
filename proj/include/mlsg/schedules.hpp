#ifndef MLSG_SCHEDULES_HPP
#define MLSG_SCHEDULES_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace mlsg {

enum class Strategy { mlsg, rmlsg };

std::string to_string(Strategy s);

// Every scalar the iteration schedules need. For the randomized variant
// eps0_sq plays the role of the bias scale of its level sequence.
struct AlgoParams {
  double tau0 = 2.0e4;
  double alpha = 10.0;
  double eta = 3.0;
  double eps0_sq = 0.5 * 0x1.0p-12;
  double sigma0_sq = 1.25 * 0.5 * 0x1.0p-12;
  double h0 = 0.125;
  int r = 1;
  int d = 2;
  double gamma = 1.0;
  double beta = 1e-4;
  double C_star = 0.5;
  double C_tilde = 0.5;
  Strategy strategy = Strategy::mlsg;

  double l_convex() const { return 2.0 * beta; }
  double variance_rate() const { return 2.0 * r + 2.0; }  // q_s
  double cost_rate() const { return gamma * d; }          // q_c

  // Numerical-experiment defaults: beta = 1e-4, tau0 = 2/beta, alpha = 10,
  // h0 = 2^-3, C = 0.5, eps0^2 = C h0^(2r+2), sigma0^2 = (2 tau0 + 2/l)/(2 tau0) eps0^2,
  // eta = 3 for MLSG and 2 for RMLSG.
  static AlgoParams defaults(Strategy strategy);

  // Recomputes eps0_sq and sigma0_sq from the other fields using the default rules.
  void derive_scales();

  // Throws std::invalid_argument when a convergence condition is violated.
  void validate() const;
};

// Smallest integer >= x, treating values within 1e-9 of an integer as that integer.
std::int64_t snapped_ceil(double x);

double step_size(const AlgoParams& p, std::int64_t j);

int mlsg_levels(const AlgoParams& p, std::int64_t j);
std::vector<std::int64_t> mlsg_samples(const AlgoParams& p, std::int64_t j, int levels);
int rmlsg_levels(const AlgoParams& p, std::int64_t j);

// Geometric pmf over 0..L with ratio 2^-(q_s + q_c)/2.
std::vector<double> level_pmf(const AlgoParams& p, int levels);
bool pmf_variance_bounded(const AlgoParams& p);

// Inverse-CDF draw from a pmf given a uniform on [0, 1).
int sample_level(const std::vector<double>& pmf, double uniform);

// Model cost of one level-l solve: 2^(l gamma d).
double solve_work(const AlgoParams& p, int level);
// sum_l 2^(l gamma d) N_l for one MLSG iteration.
double mlsg_iteration_work(const AlgoParams& p, const std::vector<std::int64_t>& samples);
// sum_k 2^(k gamma d) p_k for one RMLSG iteration.
double rmlsg_expected_iteration_work(const AlgoParams& p, const std::vector<double>& pmf);

struct WorkHistory {
  std::vector<double> cumulative;           // W_j (MLSG) or realised sum (RMLSG)
  std::vector<double> expected_cumulative;  // E[W_j] from the pmf (RMLSG only)
};

// Cumulative MLSG work W_j over iterations 1..J.
WorkHistory mlsg_work_history(const AlgoParams& p, std::int64_t iterations);
// Expected RMLSG work E[W_j] plus the realised cost of a given sequence of sampled levels.
WorkHistory rmlsg_work_history(const AlgoParams& p, const std::vector<int>& sampled_levels);

struct Spread {
  double mean = 0.0;
  double variance = 0.0;  // unbiased sample variance
  double cv = 0.0;        // coefficient of variation sqrt(variance) / mean
};
Spread spread(const std::vector<double>& values);

}  // namespace mlsg

#endif  // MLSG_SCHEDULES_HPP
