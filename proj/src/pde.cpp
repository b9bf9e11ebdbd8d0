#include "mlsg/pde.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mlsg {

ProblemData ProblemData::test_case(double beta, double h0, int max_level) {
  if (!(beta > 0.0)) throw std::invalid_argument("beta must be strictly positive");
  ProblemData data;
  data.beta = beta;
  data.source = [](Point) { return 1.0; };
  data.target = [](Point p) {
    return std::sin(std::numbers::pi * p.x) * std::sin(std::numbers::pi * p.y);
  };
  data.hierarchy = std::make_shared<const MeshHierarchy>(h0, max_level);
  data.field = std::make_shared<const FourModeField>();
  return data;
}

ControlLoads::ControlLoads(const ProblemData& data, const FeField& u, int max_level, bool include_source) {
  const auto& meshes = data.meshes();
  const double h0 = data.h0();
  if (u.level > meshes.max_level()) throw std::out_of_range("control level outside mesh hierarchy");
  loads_.resize(static_cast<std::size_t>(max_level) + 1);

  const Eigen::VectorXd fine = meshes.mass(u.level) * u.coeffs;
  Eigen::VectorXd restricted = fine;
  for (int l = u.level - 1; l >= 0; --l) {
    restricted = restrict_load(restricted, l + 1, l, h0);
    if (l <= max_level) loads_[static_cast<std::size_t>(l)] = restricted;
  }
  for (int l = u.level; l <= max_level; ++l) {
    loads_[static_cast<std::size_t>(l)] =
        l == u.level ? fine : Eigen::VectorXd(meshes.mass(l) * prolong(u, l, h0).coeffs);
  }
  if (include_source) {
    for (int l = 0; l <= max_level; ++l)
      loads_[static_cast<std::size_t>(l)] += meshes.mass(l) * interpolate(meshes.mesh(l), data.source).coeffs;
  }
}

const Eigen::VectorXd& ControlLoads::at(int level) const {
  if (level < 0 || level > max_level()) throw std::out_of_range("no control load at this level");
  return loads_[static_cast<std::size_t>(level)];
}

RealizationSolver::RealizationSolver(const ProblemData& data, int level, const SampleVector& xi)
    : data_(&data),
      level_(level),
      solver_(data.meshes(), level, [&data, &xi](Point x) { return data.field->eval(xi, x); }) {}

FeField RealizationSolver::adjoint(const FeField& y, bool subtract_target) const {
  if (y.level != level_) throw std::invalid_argument("adjoint: state lives on another level");
  const auto& meshes = data_->meshes();
  Eigen::VectorXd residual = y.coeffs;
  if (subtract_target) residual -= interpolate(meshes.mesh(level_), data_->target).coeffs;
  return solver_.solve(meshes.mass(level_) * residual);
}

FeField solve_primal(const ProblemData& data, int level, const SampleVector& xi, const FeField& u) {
  const ControlLoads loads(data, u, level);
  return RealizationSolver(data, level, xi).primal(loads.at(level));
}

FeField solve_adjoint(const ProblemData& data, int level, const SampleVector& xi, const FeField& y) {
  return RealizationSolver(data, level, xi).adjoint(y);
}

FeField grad_f(const ProblemData& data, int level, const SampleVector& xi, const FeField& u) {
  const RealizationSolver solver(data, level, xi);
  const ControlLoads loads(data, u, level);
  const FeField p = solver.adjoint(solver.primal(loads.at(level)));
  const int out_level = std::max(level, u.level);
  FeField grad = prolong(u, out_level, data.h0());
  grad.coeffs *= data.beta;
  grad.coeffs += prolong(p, out_level, data.h0()).coeffs;
  return grad;
}

double eval_f(const ProblemData& data, int level, const SampleVector& xi, const FeField& u) {
  const FeField y = solve_primal(data, level, xi, u);
  FeField misfit = y;
  misfit.coeffs -= interpolate(data.meshes().mesh(level), data.target).coeffs;
  const double tracking = l2_inner(data.meshes(), misfit, misfit);
  return 0.5 * tracking + 0.5 * data.beta * l2_inner(data.meshes(), u, u);
}

FeField hessian_action(const ProblemData& data, int level, std::span<const SampleVector> xis,
                       std::span<const double> weights, const FeField& v) {
  if (xis.size() != weights.size()) throw std::invalid_argument("hessian_action: weight count mismatch");
  if (v.level != level) throw std::invalid_argument("hessian_action: direction must live on the solve level");
  const ControlLoads loads(data, v, level, /*include_source=*/false);
  FeField out = v;
  out.coeffs *= data.beta;
  for (std::size_t k = 0; k < xis.size(); ++k) {
    const RealizationSolver solver(data, level, xis[k]);
    out.coeffs += weights[k] * solver.adjoint(solver.primal(loads.at(level)), false).coeffs;
  }
  return out;
}

FeField hessian_action(const ProblemData& data, int level, const SampleVector& xi, const FeField& v) {
  const double one = 1.0;
  return hessian_action(data, level, std::span<const SampleVector>(&xi, 1), std::span<const double>(&one, 1), v);
}

}  // namespace mlsg
