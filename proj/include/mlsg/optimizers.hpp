#ifndef MLSG_OPTIMIZERS_HPP
#define MLSG_OPTIMIZERS_HPP

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mlsg/estimators.hpp"
#include "mlsg/fem.hpp"
#include "mlsg/pde.hpp"
#include "mlsg/schedules.hpp"

namespace mlsg {

// State after update j, i.e. the iterate u_{j+1}.
struct IterationRecord {
  std::int64_t j = 0;
  int level = 0;               // level of u_{j+1}
  int max_level = 0;           // L_j used by the estimator
  int sampled_level = -1;      // RMLSG only
  double step = 0.0;
  double work = 0.0;           // cumulative 2^(l gamma d) model work (W_j, realised)
  double expected_work = 0.0;  // cumulative E[W_j] from the pmf (RMLSG only)
  double estimator_cost = 0.0; // cumulative primal+adjoint solve cost incl. coarse solves
  double error = std::numeric_limits<double>::quiet_NaN();
};

struct RunTrace {
  std::string strategy;
  std::uint64_t seed = 0;
  std::uint64_t repetition = 0;
  AlgoParams params;
  std::vector<IterationRecord> records;
  FeField final_control;
  // u_1 .. u_{J+1}, only when RunOptions::keep_iterates is set.
  std::vector<FeField> iterates;
};

// Thrown when a solve fails mid-run; carries every record completed before the failure.
class RunAborted : public std::runtime_error {
 public:
  RunAborted(const std::string& what, RunTrace partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const RunTrace& partial() const { return partial_; }

 private:
  RunTrace partial_;
};

// Overrides for the schedule. Empty hooks fall back to the closed-form schedules.
struct RunOptions {
  std::uint64_t repetition = 0;
  const FeField* reference = nullptr;  // records ||u_{j+1} - u_ref|| when set
  bool keep_iterates = false;
  bool parallel = true;
  std::function<double(std::int64_t j)> step;
  std::function<int(std::int64_t j)> levels;
  std::function<std::vector<std::int64_t>(std::int64_t j, int levels)> samples;
  // Realisations for iteration j; defaults to keyed streams.
  std::function<XiSource(std::int64_t j)> xi_source;
};

// u_{j+1} = u_j - tau_j (beta u_j + MLMC[p(u_j, .)]), u_1 = 0 on level 0.
RunTrace run_mlsg(const AlgoParams& params, const ProblemData& data, std::int64_t iterations,
                  std::uint64_t seed, const RunOptions& options = {});

// u_{j+1} = u_j - tau_j (beta u_j + (p^{h_l} - p^{h_{l-1}})(u_j, xi_j) / p_l), l ~ pmf.
RunTrace run_rmlsg(const AlgoParams& params, const ProblemData& data, std::int64_t iterations,
                   std::uint64_t seed, const RunOptions& options = {});

// Single-sample Robbins-Monro on one fixed level.
RunTrace run_rm_baseline(const AlgoParams& params, const ProblemData& data, int level,
                         std::int64_t iterations, std::uint64_t seed, const RunOptions& options = {});

// Highest level any iterate of a run with these parameters can reach.
int max_schedule_level(const AlgoParams& params, std::int64_t iterations);

struct ReferenceResult {
  FeField control;
  std::vector<double> gradient_norms;  // ||grad J(u_k)|| for k = 0..iterations
  std::vector<double> objective;       // J(u_k) on the quadrature grid
  int iterations = 0;
  bool converged = false;
};

// Full-gradient descent with exact line search on the quadrature approximation
// J(u) = sum_k w_k f^h(u, xi_k), starting from u = 0.
ReferenceResult solve_reference(const ProblemData& data, int q, int level, int max_iters, double grad_tol,
                                bool parallel = true);

// Quadrature objective, gradient and Hessian action used by solve_reference.
double quadrature_objective(const ProblemData& data, const QuadratureGrid& grid, int level, const FeField& u,
                            bool parallel = true);
FeField quadrature_gradient(const ProblemData& data, const QuadratureGrid& grid, int level, const FeField& u,
                            bool parallel = true);
FeField quadrature_hessian_action(const ProblemData& data, const QuadratureGrid& grid, int level,
                                  const FeField& v, bool parallel = true);

// ||u_j - u_ref|| for every kept iterate u_1 .. u_{J+1}.
std::vector<double> error_vs_reference(const ProblemData& data, const RunTrace& trace, const FeField& u_ref);

}  // namespace mlsg

#endif  // MLSG_OPTIMIZERS_HPP
