#include "catef/monte_carlo.hpp"

#include "catef/errors.hpp"
#include "catef/stats.hpp"

#include <doctest.h>

#include <cmath>

using namespace catef;

namespace {

McConfig tiny_config() {
  McConfig cfg;
  cfg.p = 4;
  cfg.n = 200;
  cfg.reps = 4;
  cfg.seed = 2024;
  cfg.scenario = Scenario::tt;
  cfg.eval_points = {-0.5, 0.0, 0.5};
  cfg.alpha_levels = {0.05};
  // Wider than the default so the undersmoothed bandwidth at n = 200 stays
  // below the level-equation limit mes(I) sqrt(lambda)/(2 pi).
  cfg.coverage_interval = {-1.5, 1.5};
  cfg.coverage_grid = 41;
  cfg.threads = 1;
  return cfg;
}

bool reports_equal(const McReport& a, const McReport& b) {
  if (a.completed != b.completed || a.failures != b.failures) return false;
  for (std::size_t e = 0; e < 3; ++e) {
    for (std::size_t k = 0; k < a.estimates[e].size(); ++k) {
      if (a.estimates[e][k].bias != b.estimates[e][k].bias) return false;
      if (a.estimates[e][k].sd != b.estimates[e][k].sd) return false;
      if (a.estimates[e][k].ase != b.estimates[e][k].ase) return false;
      if (a.estimates[e][k].rmse != b.estimates[e][k].rmse) return false;
    }
  }
  for (std::size_t l = 0; l < a.coverage.size(); ++l) {
    if (a.coverage[l].cp != b.coverage[l].cp) return false;
    if (a.coverage[l].mcri != b.coverage[l].mcri) return false;
    if (a.coverage[l].sdcri != b.coverage[l].sdcri) return false;
    if (a.coverage[l].gcp != b.coverage[l].gcp) return false;
  }
  return a.mean_bandwidth == b.mean_bandwidth && a.mean_a_n == b.mean_a_n;
}

} // namespace

TEST_CASE("true CATEF values") {
  CHECK(true_catef(10, 1.0) == doctest::Approx(10.3162).epsilon(1e-4));
  CHECK(true_catef(10, 0.0) == 10.0);
  CHECK(true_catef(4, -1.0) == doctest::Approx(9.5).epsilon(1e-12));
}

TEST_CASE("dgp shapes, marginals and determinism") {
  Rng rng(31);
  const Dataset data = generate_dgp(10, 20000, rng);
  CHECK(data.n() == 20000);
  CHECK(data.p() == 10);
  CHECK(data.x_cols == std::vector<Eigen::Index>{0});

  // Treated fraction is 1/2 by symmetry of the logistic index.
  CHECK(std::fabs(data.d.mean() - 0.5) < 0.01);

  // Covariates are standard normal.
  CHECK(std::fabs(data.z.col(0).mean()) < 0.03);
  const double var = (data.z.col(0).array() - data.z.col(0).mean()).square().mean();
  CHECK(var == doctest::Approx(1.0).epsilon(0.05));

  // E[Y1] = 10 and Var(Y1) = 2, checked through inverse probability
  // weighting with the known propensity index.
  const int p = 10;
  const double ps_load = 1.0 / std::sqrt(p / 2.0);
  double m1 = 0.0, m2 = 0.0;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    double index = 0.0;
    for (int k = p / 2 - 1; k < p; ++k) index += data.z(i, k);
    const double pi = logistic(ps_load * index);
    m1 += data.d[i] * data.y[i] / pi;
    m2 += data.d[i] * data.y[i] * data.y[i] / pi;
  }
  m1 /= static_cast<double>(data.n());
  m2 /= static_cast<double>(data.n());
  CHECK(m1 == doctest::Approx(10.0).epsilon(0.01));
  CHECK(m2 - m1 * m1 == doctest::Approx(2.0).epsilon(0.15));

  // Same seed, same data.
  Rng rng2(31);
  const Dataset again = generate_dgp(10, 20000, rng2);
  CHECK((again.z - data.z).cwiseAbs().maxCoeff() == 0.0);
  CHECK((again.y - data.y).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(generate_dgp(5, 10, rng), InputError);
}

TEST_CASE("scenario specs") {
  {
    const auto [reg, ps] = scenario_specs(Scenario::tt, 10);
    CHECK(reg.width() == 11);
    CHECK(ps.width() == 11);
  }
  {
    const auto [reg, ps] = scenario_specs(Scenario::ff, 10);
    CHECK(reg.width() == 6);
    CHECK(ps.width() == 6);
  }
  {
    // True propensity (31 coefficients), false regression (16).
    const auto [reg, ps] = scenario_specs(Scenario::tf, 30);
    CHECK(ps.width() == 31);
    CHECK(reg.width() == 16);
  }
  {
    const auto [reg, ps] = scenario_specs(Scenario::ft, 30);
    CHECK(ps.width() == 16);
    CHECK(reg.width() == 31);
  }
  CHECK_THROWS_AS(scenario_specs(Scenario::tt, 7), InputError);
}

TEST_CASE("run_replications shapes and identities") {
  const McConfig cfg = tiny_config();
  const McReport report = run_replications(cfg);

  CHECK(report.completed + report.failures == cfg.reps);
  CHECK(report.failures == 0);
  for (std::size_t e = 0; e < 3; ++e) REQUIRE(report.estimates[e].size() == 3);
  REQUIRE(report.coverage.size() == 1);

  for (std::size_t e = 0; e < 3; ++e) {
    for (const EstimatorMetrics& cell : report.estimates[e]) {
      // RMSE^2 = BIAS^2 + SD^2 within accumulation tolerance.
      CHECK(cell.rmse * cell.rmse ==
            doctest::Approx(cell.bias * cell.bias + cell.sd * cell.sd).epsilon(1e-10));
      CHECK(cell.sd >= 0.0);
      CHECK(cell.ase > 0.0);
    }
  }
  for (const CoverageMetrics& cell : report.coverage) {
    CHECK(cell.cp >= 0.0);
    CHECK(cell.cp <= 1.0);
    CHECK(cell.gcp >= cell.cp); // Gumbel band is wider
    CHECK(cell.mcri > 0.0);
    CHECK(cell.sdcri >= 0.0);
  }
  CHECK(report.mean_bandwidth > 0.0);
  CHECK(report.mean_a_n > 0.0);
}

TEST_CASE("determinism across runs and worker counts") {
  const McConfig cfg = tiny_config();
  const McReport base = run_replications(cfg);

  McConfig again = cfg;
  const McReport rerun = run_replications(again);
  CHECK(reports_equal(base, rerun));

  McConfig threaded = cfg;
  threaded.threads = 3;
  const McReport parallel = run_replications(threaded);
  CHECK(reports_equal(base, parallel));

  // Different seed gives different numbers.
  McConfig other = cfg;
  other.seed = 999;
  const McReport different = run_replications(other);
  CHECK_FALSE(reports_equal(base, different));
}

TEST_CASE("csv renderings are stable and shaped") {
  const McConfig cfg = tiny_config();
  const McReport report = run_replications(cfg);
  const std::string est = estimates_csv(report);
  const std::string cov = coverage_csv(report);

  CHECK(est == estimates_csv(report));
  CHECK(cov == coverage_csv(report));

  const auto count_lines = [](const std::string& s) {
    return std::count(s.begin(), s.end(), '\n');
  };
  CHECK(count_lines(est) == 1 + 3 * 3); // header + eval points x estimators
  CHECK(count_lines(cov) == 1 + 1);     // header + one alpha level
  CHECK(est.find("scenario,x,estimator,bias,sd,ase,rmse") == 0);
  CHECK(cov.find("scenario,level,cp,mcri,sdcri,gcp") == 0);
  CHECK(est.find("tt,") != std::string::npos);
  CHECK(cov.find(",0.95,") != std::string::npos);
}

TEST_CASE("excess failures abort with a message") {
  McConfig cfg = tiny_config();
  cfg.coverage_interval = {-50.0, 50.0}; // outside any draw's data range
  CHECK_THROWS_WITH_AS(run_replications(cfg), doctest::Contains("failure rate"), NumericError);
}

TEST_CASE("config validation") {
  McConfig cfg = tiny_config();
  cfg.p = 7;
  CHECK_THROWS_AS(run_replications(cfg), InputError);
  cfg = tiny_config();
  cfg.reps = 0;
  CHECK_THROWS_AS(run_replications(cfg), InputError);
  cfg = tiny_config();
  cfg.eval_points.clear();
  CHECK_THROWS_AS(run_replications(cfg), InputError);
  cfg = tiny_config();
  cfg.alpha_levels = {1.5};
  CHECK_THROWS_AS(run_replications(cfg), InputError);
  cfg = tiny_config();
  cfg.trim_eps = 0.7;
  CHECK_THROWS_AS(run_replications(cfg), InputError);
}

TEST_CASE("scenario name round trip") {
  for (const auto s : {Scenario::tt, Scenario::tf, Scenario::ft, Scenario::ff}) {
    CHECK(scenario_from_string(to_string(s)) == s);
  }
  CHECK_THROWS_AS(scenario_from_string("xx"), InputError);
}
