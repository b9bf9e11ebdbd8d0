#include <doctest.h>

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "mlsg/schedules.hpp"

using namespace mlsg;

namespace {

// Smallest L with base^L >= j, computed in integers.
int integer_log_ceil(std::int64_t j, std::int64_t base) {
  int L = 0;
  for (std::int64_t p = 1; p < j; p *= base) ++L;
  return L;
}

}  // namespace

TEST_CASE("defaults") {
  const AlgoParams p = AlgoParams::defaults(Strategy::mlsg);
  CHECK(p.tau0 == doctest::Approx(20000.0));
  CHECK(p.eps0_sq == doctest::Approx(0.5 * std::pow(0.125, 4)).epsilon(1e-15));
  CHECK(p.sigma0_sq == doctest::Approx(1.25 * p.eps0_sq).epsilon(1e-12));
  CHECK(p.eta == 3.0);
  CHECK(AlgoParams::defaults(Strategy::rmlsg).eta == 2.0);
  CHECK_NOTHROW(p.validate());
  CHECK_NOTHROW(AlgoParams::defaults(Strategy::rmlsg).validate());
}

TEST_CASE("parameter validation") {
  AlgoParams p = AlgoParams::defaults(Strategy::mlsg);
  p.tau0 = 1.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = AlgoParams::defaults(Strategy::mlsg);
  p.eta = 1.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = AlgoParams::defaults(Strategy::mlsg);
  p.eta = 2.5;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = AlgoParams::defaults(Strategy::mlsg);
  p.eps0_sq *= 2.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = AlgoParams::defaults(Strategy::rmlsg);
  p.eta = 2.5;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("step size") {
  AlgoParams p = AlgoParams::defaults(Strategy::mlsg);
  CHECK(step_size(p, 1) == doctest::Approx(20000.0 / 11).epsilon(1e-15));
  for (std::int64_t j = 1; j < 500; ++j) CHECK(step_size(p, j + 1) < step_size(p, j));
  p.alpha = 0.0;
  CHECK(step_size(p, 1) == p.tau0);
  CHECK_THROWS(step_size(p, 0));
}

TEST_CASE("snapped ceiling") {
  CHECK(snapped_ceil(2.0) == 2);
  CHECK(snapped_ceil(2.0 + 1e-12) == 2);
  CHECK(snapped_ceil(2.0 + 1e-6) == 3);
  CHECK(snapped_ceil(0.1) == 1);
  CHECK(snapped_ceil(-0.5) == 0);
}

TEST_CASE("mlsg levels") {
  const AlgoParams p = AlgoParams::defaults(Strategy::mlsg);
  CHECK(mlsg_levels(p, 1) == 0);
  CHECK(mlsg_levels(p, 2) == 1);
  for (std::int64_t j = 1; j <= 200; ++j) CHECK(mlsg_levels(p, j) == integer_log_ceil(j, 4));
  int previous = 0;
  for (std::int64_t j = 1; j <= 1000000; j += (j < 5000 ? 1 : 997)) {
    const int L = mlsg_levels(p, j);
    CHECK(L >= previous);
    previous = L;
  }
  CHECK(mlsg_levels(p, 1000000) == integer_log_ceil(1000000, 4));
}

TEST_CASE("mlsg samples") {
  const AlgoParams p = AlgoParams::defaults(Strategy::mlsg);
  CHECK(mlsg_samples(p, 1, 0) == std::vector<std::int64_t>{2});
  for (std::int64_t j = 1; j <= 200; ++j) CHECK(mlsg_samples(p, j, 0)[0] == (16 * j + 9) / 10);
  CHECK(mlsg_samples(p, 1, 1)[1] == 1);
  CHECK(mlsg_samples(p, 10, 1)[0] == 24);
  CHECK(mlsg_samples(p, 10, 1)[1] == 3);
  for (std::int64_t j = 1; j <= 300; j += 7) {
    const auto n = mlsg_samples(p, j, mlsg_levels(p, j));
    for (std::size_t l = 1; l < n.size(); ++l) CHECK(n[l] <= n[l - 1]);
  }
}

TEST_CASE("rmlsg levels and pmf") {
  const AlgoParams p = AlgoParams::defaults(Strategy::rmlsg);
  CHECK(rmlsg_levels(p, 1) == 0);
  CHECK(rmlsg_levels(p, 16) == 1);
  CHECK(rmlsg_levels(p, 17) == 2);
  for (std::int64_t j = 1; j <= 5000; ++j) CHECK(rmlsg_levels(p, j) == integer_log_ceil(j, 16));

  const auto p1 = level_pmf(p, 1);
  CHECK(p1[0] == doctest::Approx(8.0 / 9).epsilon(1e-15));
  CHECK(p1[1] == doctest::Approx(1.0 / 9).epsilon(1e-15));
  const auto p2 = level_pmf(p, 2);
  CHECK(p2[0] == doctest::Approx(64.0 / 73).epsilon(1e-15));
  CHECK(p2[1] == doctest::Approx(8.0 / 73).epsilon(1e-15));
  CHECK(p2[2] == doctest::Approx(1.0 / 73).epsilon(1e-15));
  for (int L = 0; L <= 12; ++L) {
    const auto pmf = level_pmf(p, L);
    CHECK(std::abs(std::accumulate(pmf.begin(), pmf.end(), 0.0) - 1.0) <= 1e-12);
    for (std::size_t l = 1; l < pmf.size(); ++l) CHECK(pmf[l] < pmf[l - 1]);
  }
  CHECK(pmf_variance_bounded(p));

  CHECK(sample_level(p1, 0.0) == 0);
  CHECK(sample_level(p1, 0.5) == 0);
  CHECK(sample_level(p1, 0.9) == 1);
  CHECK(sample_level(p1, 0.999999) == 1);
}

TEST_CASE("work models") {
  const AlgoParams p = AlgoParams::defaults(Strategy::rmlsg);
  CHECK(mlsg_iteration_work(p, {3}) == 3.0);
  CHECK(mlsg_iteration_work(p, {4, 2, 1}) == 4.0 + 8.0 + 16.0);
  CHECK(rmlsg_expected_iteration_work(p, level_pmf(p, 1)) == doctest::Approx(12.0 / 9).epsilon(1e-15));

  const WorkHistory mh = mlsg_work_history(AlgoParams::defaults(Strategy::mlsg), 3);
  CHECK(mh.cumulative[0] == 2.0);
  const WorkHistory rh = rmlsg_work_history(p, std::vector<int>(40, 0));
  for (std::size_t i = 1; i < rh.expected_cumulative.size(); ++i)
    CHECK(rh.expected_cumulative[i] > rh.expected_cumulative[i - 1]);
  CHECK(rh.cumulative.back() == 40.0);
  CHECK(rh.expected_cumulative[15] == doctest::Approx(1.0 + 15.0 * 12.0 / 9).epsilon(1e-13));
}

TEST_CASE("spread") {
  const Spread s = spread({1.0, 2.0, 3.0, 4.0});
  CHECK(s.mean == 2.5);
  CHECK(s.variance == doctest::Approx(5.0 / 3));
  CHECK(s.cv == doctest::Approx(std::sqrt(5.0 / 3) / 2.5));
  CHECK(spread({7.0}).variance == 0.0);
}
