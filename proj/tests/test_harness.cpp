#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "mlsg/harness.hpp"
#include "mlsg/reference_cache.hpp"

using namespace mlsg;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("mlsg_harness_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::string error_of(const nlohmann::json& doc) {
  try {
    ExperimentConfig::from_json(doc);
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("config validation names the offending key") {
  CHECK(error_of({{"strategy", "mlsg"}, {"iteratons", 3}}).find("iteratons") != std::string::npos);
  CHECK(error_of({{"params", {{"etaa", 3}}}}).find("etaa") != std::string::npos);
  CHECK(error_of({{"reference", {{"paht", "x"}}}}).find("paht") != std::string::npos);
  CHECK(error_of({{"screen", {{"M", 2}}}}).find("M") != std::string::npos);
  CHECK(error_of({{"strategy", "sgd"}}).find("sgd") != std::string::npos);
  CHECK(!error_of({{"repetitions", 0}}).empty());
  CHECK(error_of({{"strategy", "rmlsg"}, {"params", {{"eta", 2}}}}).empty());
}

TEST_CASE("parameter resolution") {
  const AlgoParams p = resolve_params("mlsg", {{"beta", 1e-3}});
  CHECK(p.tau0 == doctest::Approx(2000.0));
  CHECK(resolve_params("mlsg", {{"beta", 1e-3}, {"tau0", 5000.0}}).tau0 == 5000.0);
  CHECK(resolve_params("rmlsg", nlohmann::json::object()).eta == 2.0);
  const AlgoParams c = resolve_params("mlsg", {{"C_star", 0.25}});
  CHECK(c.C_tilde == 0.25);
  CHECK(c.eps0_sq == doctest::Approx(0.25 * std::pow(0.125, 4)));
  const AlgoParams e = resolve_params("mlsg", {{"eps0_sq", 1e-5}});
  CHECK(e.eps0_sq == 1e-5);
  CHECK(e.sigma0_sq == doctest::Approx(1.25e-5));
}

TEST_CASE("run csv layout") {
  const fs::path dir = scratch("layout");
  ExperimentConfig c = ExperimentConfig::from_json({{"strategy", "mlsg"}, {"iterations", 3}, {"output", dir.string()}});
  const ExperimentResult r = run_experiment(c);
  const auto rows = lines(r.csv_path);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0] == "j,L_j,level,mean_error,err_rep0,W_j,estimator_cost_mean");
  CHECK(fs::exists(r.sidecar_path));

  const AlgoParams p = AlgoParams::defaults(Strategy::mlsg);
  c = ExperimentConfig::from_json({{"strategy", "mlsg"}, {"iterations", 40}, {"output", dir.string()}});
  const auto run = run_experiment(c).run;
  for (std::size_t k = 0; k < run.j.size(); ++k) CHECK(run.max_level[k] == mlsg_levels(p, run.j[k]));

  c = ExperimentConfig::from_json({{"strategy", "rmlsg"}, {"iterations", 5}, {"repetitions", 2},
                                   {"output", dir.string()}});
  CHECK(lines(run_experiment(c).csv_path)[0] ==
        "j,L_j,level,mean_error,err_rep0,err_rep1,expected_W_j,W_mean,W_std,W_cv,estimator_cost_mean");
  c = ExperimentConfig::from_json({{"strategy", "rm-baseline"}, {"iterations", 5}, {"output", dir.string()}});
  CHECK(lines(run_experiment(c).csv_path)[0] == "j,level,mean_error,err_rep0,W_j");
}

TEST_CASE("aggregation") {
  const ProblemData data = ProblemData::test_case(1e-4, 0.125, 2);
  const AlgoParams p = AlgoParams::defaults(Strategy::mlsg);
  const FeField ref = interpolate(data.meshes().mesh(2), [](Point q) { return q.x * q.y; });
  RunOptions o;
  o.reference = &ref;
  const RunTrace t = run_mlsg(p, data, 6, 3, o);
  const AggregatedRun same = aggregate({t, t, t});
  for (std::size_t k = 0; k < 6; ++k) CHECK(same.mean_error[k] == t.records[k].error);
  const AggregatedRun single = aggregate({t});
  CHECK(single.mean_error == same.mean_error);
}

TEST_CASE("replay is byte stable") {
  const fs::path a = scratch("replay_a"), b = scratch("replay_b"), ref = scratch("replay_ref");
  const nlohmann::json doc = {{"strategy", "rmlsg"},
                              {"iterations", 30},
                              {"repetitions", 3},
                              {"seed", 17},
                              {"reference", {{"level", 2}, {"q", 2}, {"max_iters", 4}}},
                              {"output", a.string()}};
  const ExperimentResult first = run_experiment(ExperimentConfig::from_json(doc));
  ExperimentConfig replay = ExperimentConfig::load(first.sidecar_path);
  replay.output = b.string();
  const ExperimentResult second = run_experiment(replay);
  CHECK(slurp(first.csv_path) == slurp(second.csv_path));
  CHECK(slurp(first.csv_path).find("nan") == std::string::npos);

  nlohmann::json bad = doc;
  bad["reference"] = (ref / "missing.txt").string();
  CHECK_THROWS_AS(run_experiment(ExperimentConfig::from_json(bad)), std::runtime_error);

  nlohmann::json coarse = doc;
  coarse["strategy"] = "mlsg";
  coarse["reference"] = {{"level", 1}};
  CHECK_THROWS_AS(run_experiment(ExperimentConfig::from_json(coarse)), std::invalid_argument);
}

TEST_CASE("reference cache round trip") {
  const fs::path dir = scratch("cache");
  const ExperimentResult r = run_experiment(ExperimentConfig::from_json(
      {{"strategy", "reference"}, {"reference", {{"level", 1}, {"q", 2}}}, {"output", dir.string()}}));
  const ReferenceFile file = read_reference((dir / "reference.txt").string());
  CHECK(file.control.coeffs == r.reference->control.coeffs);
  CHECK(file.h0 == 0.125);

  std::string text = slurp(dir / "reference.txt");
  text[text.size() - 3] = text[text.size() - 3] == '1' ? '2' : '1';
  std::ofstream(dir / "tampered.txt") << text;
  CHECK_THROWS_AS(read_reference((dir / "tampered.txt").string()), std::runtime_error);

  const ExperimentResult run = run_experiment(ExperimentConfig::from_json(
      {{"strategy", "mlsg"}, {"iterations", 4}, {"reference", (dir / "reference.txt").string()},
       {"output", dir.string()}}));
  CHECK(std::isfinite(run.run.mean_error.back()));
}

TEST_CASE("slope fitting") {
  std::vector<double> xs, inv, half;
  for (int i = 1; i <= 20; ++i) {
    xs.push_back(i);
    inv.push_back(1.0 / i);
    half.push_back(7.5 / std::sqrt(static_cast<double>(i)));
  }
  CHECK(std::abs(fit_slope(xs, inv, 0, xs.size()) + 1.0) < 1e-12);
  CHECK(fit_slope(xs, half, 0, xs.size()) == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(fit_slope_in_range(xs, inv, 5, 15) == doctest::Approx(-1.0).epsilon(1e-12));

  std::mt19937 gen(2024);
  std::uniform_real_distribution<double> noise(-0.1, 0.1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> noisy;
    for (double x : xs) noisy.push_back((1.0 + noise(gen)) / x);
    const double s = fit_slope(xs, noisy, 0, xs.size());
    CHECK(s >= -1.15);
    CHECK(s <= -0.85);
  }
  CHECK_THROWS_AS(fit_slope({2, 2, 2}, {1, 2, 3}, 0, 3), std::invalid_argument);
  CHECK_THROWS_AS(fit_slope({1, 2}, {1, 2}, 0, 2), std::invalid_argument);
  CHECK_THROWS_AS(fit_slope({1, 2, 3}, {1, -2, 3}, 0, 3), std::invalid_argument);
}

TEST_CASE("rate validation") {
  LevelStats s;
  s.samples = 10;
  for (int l = 0; l < 4; ++l) {
    s.h.push_back(0.125 * std::pow(0.5, l));
    s.second_moment.push_back(std::pow(s.h.back(), 4));
  }
  const RateReport r = rate_report(s, 4.0);
  CHECK(r.slope == doctest::Approx(-4.0).epsilon(1e-12));
  CHECK(r.pass);
  CHECK(r.C_star == doctest::Approx(1.0).epsilon(1e-12));

  ExperimentConfig c = ExperimentConfig::from_json({{"strategy", "validate-rates"}, {"screen", {{"samples", 1}}}});
  CHECK_THROWS_AS(validate_rates(c), std::invalid_argument);
}

TEST_CASE("plot data") {
  const fs::path dir = scratch("plot");
  const nlohmann::json base = {{"iterations", 4}, {"reference", {{"level", 2}, {"q", 1}, {"max_iters", 2}}},
                               {"output", dir.string()}};
  nlohmann::json m = base, r = base;
  m["strategy"] = "mlsg";
  r["strategy"] = "rmlsg";
  const auto a = run_experiment(ExperimentConfig::from_json(m));
  const auto b = run_experiment(ExperimentConfig::from_json(r));
  merge_plot_data({a.csv_path, b.csv_path}, (dir / "plot.csv").string());
  const auto rows = lines(dir / "plot.csv");
  REQUIRE(rows.size() == 9);
  CHECK(rows[0] == "series,j,cost,mean_error,log10_j,log10_cost,log10_mean_error");
  CHECK(rows[1].rfind("mlsg,1,2,", 0) == 0);
  CHECK(rows[5].rfind("rmlsg,1,1,", 0) == 0);
  CHECK_THROWS(merge_plot_data({}, (dir / "x.csv").string()));
}
