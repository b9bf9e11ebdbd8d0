#include <doctest.h>

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "mlsg/optimizers.hpp"

using namespace mlsg;

namespace {

double max_abs(const Eigen::VectorXd& v) { return v.cwiseAbs().maxCoeff(); }

RunOptions zero_steps() {
  RunOptions o;
  o.keep_iterates = true;
  o.step = [](std::int64_t) { return 0.0; };
  return o;
}

}  // namespace

TEST_CASE("zero step keeps the initial iterate") {
  const ProblemData data = ProblemData::test_case(1e-4, 0.125, 3);
  const AlgoParams pm = AlgoParams::defaults(Strategy::mlsg);
  const AlgoParams pr = AlgoParams::defaults(Strategy::rmlsg);
  for (const RunTrace& t : {run_mlsg(pm, data, 5, 1, zero_steps()), run_rmlsg(pr, data, 5, 1, zero_steps()),
                            run_rm_baseline(pm, data, 1, 5, 1, zero_steps())}) {
    REQUIRE(t.iterates.size() == 6);
    for (const FeField& u : t.iterates) CHECK(max_abs(u.coeffs) == 0.0);
  }
}

TEST_CASE("strongly convex problem stays bounded") {
  ProblemData data = ProblemData::test_case(1.0, 0.125, 3);
  data.target = [](Point p) { return 50.0 * std::sin(std::numbers::pi * p.x) * std::sin(std::numbers::pi * p.y); };
  const AlgoParams p = [] {
    AlgoParams q = AlgoParams::defaults(Strategy::mlsg);
    q.beta = 1.0;
    q.tau0 = 2.0;
    q.derive_scales();
    return q;
  }();
  RunOptions o;
  o.keep_iterates = true;
  const RunTrace t = run_mlsg(p, data, 60, 3, o);
  std::vector<double> norms;
  for (const FeField& u : t.iterates) norms.push_back(l2_norm(data.meshes(), u));
  for (double n : norms) CHECK(n < 10.0);
  CHECK(std::abs(norms[60] - norms[40]) < 5e-2 * norms[60]);
}

TEST_CASE("randomized run with a single level is the baseline") {
  const ProblemData data = ProblemData::test_case(1e-4, 0.125, 2);
  const AlgoParams p = AlgoParams::defaults(Strategy::rmlsg);
  RunOptions o;
  o.levels = [](std::int64_t) { return 0; };
  const RunTrace a = run_rmlsg(p, data, 30, 8, o);
  const RunTrace b = run_rm_baseline(p, data, 0, 30, 8, o);
  CHECK(a.final_control.coeffs == b.final_control.coeffs);
  for (const auto& r : a.records) CHECK(r.sampled_level == 0);
}

TEST_CASE("baseline with a pinned realisation reaches the discrete optimum") {
  const ProblemData data = ProblemData::test_case(1e-4, 0.125, 1);
  const AlgoParams p = AlgoParams::defaults(Strategy::mlsg);
  RunOptions o;
  o.xi_source = [](std::int64_t) { return XiSource([](int, std::uint64_t) { return SampleVector::zero(); }); };
  const RunTrace t = run_rm_baseline(p, data, 1, 2000, 1, o);
  const FeField g = grad_f(data, 1, SampleVector::zero(), t.final_control);
  CHECK(l2_norm(data.meshes(), g) <= 1e-6);
}

TEST_CASE("runs are reproducible and independent of the parallel switch") {
  const ProblemData data = ProblemData::test_case(1e-4, 0.125, 2);
  const AlgoParams p = AlgoParams::defaults(Strategy::mlsg);
  RunOptions serial;
  serial.parallel = false;
  const RunTrace a = run_mlsg(p, data, 12, 21);
  const RunTrace b = run_mlsg(p, data, 12, 21);
  const RunTrace c = run_mlsg(p, data, 12, 21, serial);
  CHECK(a.final_control.coeffs == b.final_control.coeffs);
  CHECK(a.final_control.coeffs == c.final_control.coeffs);
  const RunTrace d = run_mlsg(p, data, 12, 22);
  CHECK(!(a.final_control.coeffs == d.final_control.coeffs));

  const RunTrace r1 = run_rm_baseline(p, data, 1, 20, 4);
  const RunTrace r2 = run_rm_baseline(p, data, 1, 20, 4);
  CHECK(r1.final_control.coeffs == r2.final_control.coeffs);
}

TEST_CASE("trace bookkeeping") {
  const ProblemData data = ProblemData::test_case(1e-4, 0.125, 3);
  const AlgoParams p = AlgoParams::defaults(Strategy::mlsg);
  const RunTrace t = run_mlsg(p, data, 20, 2);
  const WorkHistory w = mlsg_work_history(p, 20);
  REQUIRE(t.records.size() == 20);
  for (std::size_t k = 0; k < 20; ++k) {
    CHECK(t.records[k].j == static_cast<std::int64_t>(k) + 1);
    CHECK(t.records[k].max_level == mlsg_levels(p, t.records[k].j));
    CHECK(t.records[k].work == w.cumulative[k]);
  }
  CHECK_THROWS_AS(run_mlsg(p, data, 0, 2), std::invalid_argument);
  const ProblemData other = ProblemData::test_case(1e-3, 0.125, 2);
  CHECK_THROWS_AS(run_mlsg(p, other, 3, 2), std::invalid_argument);
}

TEST_CASE("failure keeps the partial trace") {
  const ProblemData data = ProblemData::test_case(1e-4, 0.125, 2);
  const AlgoParams p = AlgoParams::defaults(Strategy::mlsg);
  RunOptions o;
  o.xi_source = [](std::int64_t j) {
    if (j == 3) throw std::runtime_error("solver breakdown");
    return keyed_xi_source(1, 0, static_cast<std::uint64_t>(j));
  };
  try {
    run_mlsg(p, data, 10, 1, o);
    FAIL("expected an abort");
  } catch (const RunAborted& e) {
    CHECK(e.partial().records.size() == 2);
    CHECK(std::string(e.what()) == "solver breakdown");
  }
}

TEST_CASE("reference solver") {
  const ProblemData data = ProblemData::test_case(1e-4, 0.125, 1);
  const ReferenceResult ref = solve_reference(data, 2, 1, 30, 1e-9);
  CHECK(ref.converged);
  for (std::size_t k = 1; k < ref.objective.size(); ++k) CHECK(ref.objective[k] < ref.objective[k - 1]);
  const FeField g = quadrature_gradient(data, gl_grid(2), 1, ref.control);
  CHECK(l2_norm(data.meshes(), g) <= 1e-9);
  CHECK(ref.gradient_norms.back() == doctest::Approx(l2_norm(data.meshes(), g)).epsilon(1e-6));

  const ReferenceResult partial = solve_reference(data, 2, 1, 1, 1e-12);
  CHECK(!partial.converged);
  CHECK(partial.iterations == 1);
  CHECK(partial.gradient_norms.size() == 2);

  const FeField v = interpolate(data.meshes().mesh(1), [](Point p) { return p.x * (1 - p.y); });
  const QuadratureGrid grid = gl_grid(2);
  const FeField hv = quadrature_hessian_action(data, grid, 1, v);
  Eigen::VectorXd direct = Eigen::VectorXd::Zero(v.coeffs.size());
  for (std::size_t k = 0; k < grid.nodes.size(); ++k)
    direct += grid.weights[k] * hessian_action(data, 1, grid.nodes[k], v).coeffs;
  CHECK(max_abs(hv.coeffs - direct) < 1e-15);
  CHECK(quadrature_objective(data, grid, 1, ref.control) == doctest::Approx(ref.objective.back()).epsilon(1e-14));
}

TEST_CASE("error against a reference") {
  const ProblemData data = ProblemData::test_case(1e-4, 0.125, 3);
  const AlgoParams p = AlgoParams::defaults(Strategy::mlsg);
  RunOptions o;
  o.keep_iterates = true;
  const RunTrace t = run_mlsg(p, data, 10, 5, o);
  const FeField ref = prolong(t.iterates.back(), 3, 0.125);
  const auto errors = error_vs_reference(data, t, ref);
  CHECK(errors.front() == doctest::Approx(l2_norm(data.meshes(), ref)).epsilon(1e-14));
  CHECK(errors.back() < 1e-15);
  for (std::size_t a = 0; a < errors.size(); ++a)
    for (std::size_t b = 0; b < errors.size(); ++b)
      CHECK(std::abs(errors[a] - errors[b]) <=
            l2_distance(data.meshes(), t.iterates[a], t.iterates[b]) * (1 + 1e-12) + 1e-15);

  RunOptions with_ref;
  with_ref.reference = &ref;
  const RunTrace r = run_mlsg(p, data, 10, 5, with_ref);
  for (std::size_t k = 0; k < r.records.size(); ++k) CHECK(r.records[k].error == errors[k + 1]);

  const FeField coarse = FeField::zero(data.meshes().mesh(0));
  CHECK_THROWS_AS(error_vs_reference(data, t, coarse), std::invalid_argument);
}
