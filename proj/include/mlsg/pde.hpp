#ifndef MLSG_PDE_HPP
#define MLSG_PDE_HPP

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "mlsg/fem.hpp"
#include "mlsg/random_field.hpp"

namespace mlsg {

// Data of the control problem
//   min_u 1/2 E||y(u) - z_d||^2 + beta/2 ||u||^2,  -div(a grad y) = g + u, y = 0 on the boundary.
struct ProblemData {
  double beta = 1e-4;
  std::function<double(Point)> source;  // g
  std::function<double(Point)> target;  // z_d
  std::shared_ptr<const MeshHierarchy> hierarchy;
  std::shared_ptr<const RandomField> field;

  double h0() const { return hierarchy->h0(); }
  const MeshHierarchy& meshes() const { return *hierarchy; }

  // g = 1, z_d = sin(pi x) sin(pi y), four-mode coefficient.
  static ProblemData test_case(double beta, double h0, int max_level);
};

// Load vectors <u + g, phi_i> for every level 0..max_level. They depend only on
// the control, so one set serves all realisations of an estimator call.
// Controls finer than a level are tested exactly against the coarse basis.
class ControlLoads {
 public:
  ControlLoads(const ProblemData& data, const FeField& u, int max_level, bool include_source = true);
  const Eigen::VectorXd& at(int level) const;
  int max_level() const { return static_cast<int>(loads_.size()) - 1; }

 private:
  std::vector<Eigen::VectorXd> loads_;
};

// Factorised operator of one realisation on one level. Primal and adjoint
// share the same symmetric matrix.
class RealizationSolver {
 public:
  RealizationSolver(const ProblemData& data, int level, const SampleVector& xi);

  FeField primal(const Eigen::VectorXd& load) const { return solver_.solve(load); }
  // Adjoint with right-hand side <y - z_d, v>; subtract_target = false drops z_d.
  FeField adjoint(const FeField& y, bool subtract_target = true) const;
  int level() const { return level_; }

 private:
  const ProblemData* data_;
  int level_;
  DirichletSolver solver_;
};

FeField solve_primal(const ProblemData& data, int level, const SampleVector& xi, const FeField& u);
FeField solve_adjoint(const ProblemData& data, int level, const SampleVector& xi, const FeField& y);

// beta u + p^h(u). Returned at max(level, u.level) so that a control finer than
// the solve level keeps its own representation.
FeField grad_f(const ProblemData& data, int level, const SampleVector& xi, const FeField& u);
double eval_f(const ProblemData& data, int level, const SampleVector& xi, const FeField& u);

// beta v + sum_k w_k S_k^* S_k v over the given realisations.
FeField hessian_action(const ProblemData& data, int level, std::span<const SampleVector> xis,
                       std::span<const double> weights, const FeField& v);
FeField hessian_action(const ProblemData& data, int level, const SampleVector& xi, const FeField& v);

}  // namespace mlsg

#endif  // MLSG_PDE_HPP
