#include "mlsg/optimizers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mlsg {

namespace {

void check_consistent(const AlgoParams& params, const ProblemData& data) {
  params.validate();
  if (std::abs(params.beta - data.beta) > 1e-15 * std::max(1.0, std::abs(data.beta)))
    throw std::invalid_argument("AlgoParams.beta and ProblemData.beta disagree");
  if (std::abs(params.h0 - data.h0()) > 1e-15)
    throw std::invalid_argument("AlgoParams.h0 and the mesh hierarchy disagree");
}

double reference_error(const ProblemData& data, const FeField& u, const FeField& u_ref) {
  if (u.level > u_ref.level)
    throw std::invalid_argument("reference control (level " + std::to_string(u_ref.level) +
                                ") is coarser than iterate (level " + std::to_string(u.level) + ")");
  FeField diff = prolong(u, u_ref.level, data.h0());
  diff.coeffs -= u_ref.coeffs;
  return l2_norm(data.meshes(), diff);
}

RunTrace start_trace(const std::string& strategy, const AlgoParams& params, std::uint64_t seed,
                     const RunOptions& options, const FeField& u) {
  RunTrace trace;
  trace.strategy = strategy;
  trace.seed = seed;
  trace.repetition = options.repetition;
  trace.params = params;
  if (options.keep_iterates) trace.iterates.push_back(u);
  return trace;
}

// u <- prolong(u) - tau * grad, recorded into the trace.
void apply_update(const ProblemData& data, FeField& u, const FeField& grad, double tau,
                  IterationRecord record, const RunOptions& options, RunTrace& trace) {
  FeField next = prolong(u, grad.level, data.h0());
  next.coeffs -= tau * grad.coeffs;
  u = std::move(next);
  record.level = u.level;
  record.step = tau;
  if (options.reference) record.error = reference_error(data, u, *options.reference);
  trace.records.push_back(record);
  if (options.keep_iterates) trace.iterates.push_back(u);
}

// Runs one iteration; a failure is rethrown together with the trace so far.
template <class Step>
void guarded(RunTrace& trace, const FeField& u, Step&& step) {
  try {
    step();
  } catch (const std::exception& e) {
    trace.final_control = u;
    throw RunAborted(e.what(), std::move(trace));
  }
}

XiSource iteration_source(const RunOptions& options, std::uint64_t seed, std::int64_t j) {
  if (options.xi_source) return options.xi_source(j);
  return keyed_xi_source(seed, options.repetition, static_cast<std::uint64_t>(j));
}

}  // namespace

RunTrace run_mlsg(const AlgoParams& params, const ProblemData& data, std::int64_t iterations,
                  std::uint64_t seed, const RunOptions& options) {
  check_consistent(params, data);
  if (iterations < 1) throw std::invalid_argument("need at least one iteration");
  FeField u = FeField::zero(data.meshes().mesh(0));
  RunTrace trace = start_trace("mlsg", params, seed, options, u);
  IterationRecord record;
  for (std::int64_t j = 1; j <= iterations; ++j) {
    guarded(trace, u, [&] {
      const int levels = options.levels ? options.levels(j) : mlsg_levels(params, j);
      const auto samples = options.samples ? options.samples(j, levels) : mlsg_samples(params, j, levels);
      const double tau = options.step ? options.step(j) : step_size(params, j);
      const XiSource source = iteration_source(options, seed, j);
      const MlmcOutput est = options.parallel
                                 ? mlmc_gradient(data, u, levels, samples, source, params.cost_rate())
                                 : mlmc_gradient_serial(data, u, levels, samples, source, params.cost_rate());
      record.j = j;
      record.max_level = levels;
      record.work += mlsg_iteration_work(params, samples);
      record.estimator_cost += est.model_cost;
      apply_update(data, u, est.grad, tau, record, options, trace);
    });
  }
  trace.final_control = u;
  return trace;
}

RunTrace run_rmlsg(const AlgoParams& params, const ProblemData& data, std::int64_t iterations,
                   std::uint64_t seed, const RunOptions& options) {
  check_consistent(params, data);
  if (iterations < 1) throw std::invalid_argument("need at least one iteration");
  FeField u = FeField::zero(data.meshes().mesh(0));
  RunTrace trace = start_trace("rmlsg", params, seed, options, u);
  IterationRecord record;
  for (std::int64_t j = 1; j <= iterations; ++j) {
    guarded(trace, u, [&] {
      const int levels = options.levels ? options.levels(j) : rmlsg_levels(params, j);
      const auto pmf = level_pmf(params, levels);
      const double tau = options.step ? options.step(j) : step_size(params, j);
      RandomStream level_stream({seed, options.repetition, static_cast<std::uint64_t>(j), kLevelDrawSlot, 0});
      const MlmcOutput est = rmlmc_gradient(data, u, levels, pmf, level_stream.uniform(),
                                            iteration_source(options, seed, j), params.cost_rate());
      record.j = j;
      record.max_level = levels;
      record.sampled_level = *est.sampled_level;
      record.work += solve_work(params, *est.sampled_level);
      record.expected_work += rmlsg_expected_iteration_work(params, pmf);
      record.estimator_cost += est.model_cost;
      apply_update(data, u, est.grad, tau, record, options, trace);
    });
  }
  trace.final_control = u;
  return trace;
}

RunTrace run_rm_baseline(const AlgoParams& params, const ProblemData& data, int level,
                         std::int64_t iterations, std::uint64_t seed, const RunOptions& options) {
  check_consistent(params, data);
  if (iterations < 1) throw std::invalid_argument("need at least one iteration");
  if (level < 0) throw std::invalid_argument("baseline level must be nonnegative");
  FeField u = FeField::zero(data.meshes().mesh(0));
  RunTrace trace = start_trace("rm-baseline", params, seed, options, u);
  IterationRecord record;
  for (std::int64_t j = 1; j <= iterations; ++j) {
    guarded(trace, u, [&] {
      const double tau = options.step ? options.step(j) : step_size(params, j);
      const SampleVector xi = iteration_source(options, seed, j)(level, 0);
      const FeField grad = grad_f(data, level, xi, u);
      record.j = j;
      record.max_level = level;
      record.work += solve_work(params, level);
      record.estimator_cost += 2.0 * solve_work(params, level);
      apply_update(data, u, grad, tau, record, options, trace);
    });
  }
  trace.final_control = u;
  return trace;
}

int max_schedule_level(const AlgoParams& params, std::int64_t iterations) {
  if (iterations < 1) return 0;
  return params.strategy == Strategy::mlsg ? mlsg_levels(params, iterations) : rmlsg_levels(params, iterations);
}

namespace {

struct QuadraturePass {
  double objective = 0.0;
  FeField gradient;
};

struct NodeResult {
  double tracking = 0.0;
  Eigen::VectorXd adjoint;
};

NodeResult quadrature_node(const ProblemData& data, int level, const ControlLoads& loads, const SampleVector& xi,
                           bool hessian) {
  const RealizationSolver solver(data, level, xi);
  const FeField y = solver.primal(loads.at(level));
  NodeResult r;
  if (!hessian) {
    FeField misfit = y;
    misfit.coeffs -= interpolate(data.meshes().mesh(level), data.target).coeffs;
    r.tracking = l2_inner(data.meshes(), misfit, misfit);
  }
  r.adjoint = solver.adjoint(y, !hessian).coeffs;
  return r;
}

// beta u + sum_k w_k p_k. For the Hessian the source and the target are dropped.
QuadraturePass quadrature_pass(const ProblemData& data, const QuadratureGrid& grid, int level, const FeField& u,
                               bool hessian, bool parallel) {
  if (u.level != level) throw std::invalid_argument("quadrature: control must live on the reference level");
  const ControlLoads loads(data, u, level, !hessian);
  const auto count = static_cast<std::int64_t>(grid.nodes.size());
  std::vector<NodeResult> nodes(grid.nodes.size());
  if (parallel) {
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t k = 0; k < count; ++k)
      nodes[static_cast<std::size_t>(k)] =
          quadrature_node(data, level, loads, grid.nodes[static_cast<std::size_t>(k)], hessian);
  } else {
    for (std::int64_t k = 0; k < count; ++k)
      nodes[static_cast<std::size_t>(k)] =
          quadrature_node(data, level, loads, grid.nodes[static_cast<std::size_t>(k)], hessian);
  }
  QuadraturePass pass;
  pass.gradient = u;
  pass.gradient.coeffs *= data.beta;
  double tracking = 0.0;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    pass.gradient.coeffs += grid.weights[k] * nodes[k].adjoint;
    tracking += grid.weights[k] * nodes[k].tracking;
  }
  pass.objective = 0.5 * tracking + 0.5 * data.beta * l2_inner(data.meshes(), u, u);
  return pass;
}

}  // namespace

double quadrature_objective(const ProblemData& data, const QuadratureGrid& grid, int level, const FeField& u,
                            bool parallel) {
  return quadrature_pass(data, grid, level, u, false, parallel).objective;
}

FeField quadrature_gradient(const ProblemData& data, const QuadratureGrid& grid, int level, const FeField& u,
                            bool parallel) {
  return quadrature_pass(data, grid, level, u, false, parallel).gradient;
}

FeField quadrature_hessian_action(const ProblemData& data, const QuadratureGrid& grid, int level,
                                  const FeField& v, bool parallel) {
  return quadrature_pass(data, grid, level, v, true, parallel).gradient;
}

ReferenceResult solve_reference(const ProblemData& data, int q, int level, int max_iters, double grad_tol,
                                bool parallel) {
  if (q < 1) throw std::invalid_argument("quadrature order must be >= 1");
  if (level < 0) throw std::invalid_argument("reference level must be nonnegative");
  if (max_iters < 0) throw std::invalid_argument("max_iters must be nonnegative");
  const QuadratureGrid grid = gl_grid(q);
  const auto& meshes = data.meshes();
  ReferenceResult result;
  result.control = FeField::zero(meshes.mesh(level));
  for (int k = 0;; ++k) {
    const QuadraturePass pass = quadrature_pass(data, grid, level, result.control, false, parallel);
    const double norm = l2_norm(meshes, pass.gradient);
    result.gradient_norms.push_back(norm);
    result.objective.push_back(pass.objective);
    result.iterations = k;
    if (norm <= grad_tol) {
      result.converged = true;
      break;
    }
    if (k == max_iters) break;
    const FeField hg = quadrature_hessian_action(data, grid, level, pass.gradient, parallel);
    const double curvature = l2_inner(meshes, pass.gradient, hg);
    if (!(curvature > 0.0)) throw std::runtime_error("reference solver: nonpositive curvature");
    const double tau = norm * norm / curvature;
    result.control.coeffs -= tau * pass.gradient.coeffs;
  }
  return result;
}

std::vector<double> error_vs_reference(const ProblemData& data, const RunTrace& trace, const FeField& u_ref) {
  if (trace.iterates.empty()) throw std::invalid_argument("trace was recorded without iterates");
  std::vector<double> errors;
  errors.reserve(trace.iterates.size());
  for (const FeField& u : trace.iterates) errors.push_back(reference_error(data, u, u_ref));
  return errors;
}

}  // namespace mlsg
