#pragma once

#include "catef/dataset.hpp"
#include "catef/kernels.hpp"
#include "catef/stats.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace catef {

//! Specification scenarios: first letter is the propensity score model,
//! second the outcome regressions; T uses all p covariates, F omits the
//! second half.
enum class Scenario { tt, tf, ft, ff };

Scenario scenario_from_string(const std::string& name);
std::string to_string(Scenario scenario);

struct McConfig {
  int p = 10;
  Eigen::Index n = 500;
  int reps = 500;
  std::uint64_t seed = 1;
  Scenario scenario = Scenario::tt;
  std::vector<double> eval_points = {-1.0, -0.5, 0.0, 0.5, 1.0};
  std::vector<double> alpha_levels = {0.01, 0.05, 0.10};
  std::array<double, 2> coverage_interval = {-1.0, 1.0};
  int coverage_grid = 101;
  int threads = 0; // 0 = hardware concurrency
  double trim_eps = 0.01;
  KernelKind kernel = KernelKind::gaussian;
};

struct EstimatorMetrics {
  double bias = 0.0;
  double sd = 0.0;
  double ase = 0.0;
  double rmse = 0.0;
};

struct CoverageMetrics {
  double cp = 0.0;     // empirical coverage of the uniform band
  double mcri = 0.0;   // mean critical value
  double sdcri = 0.0;  // sd of the critical value
  double gcp = 0.0;    // coverage under the Gumbel critical value
  double constancy_reject_rate = 0.0;
};

//! Per-scenario results mirroring the estimator and coverage tables.
//! estimates is indexed [estimator][eval point] with estimator order
//! dr, ipw, ra; coverage is indexed by alpha level.
struct McReport {
  McConfig config;
  int completed = 0;
  int failures = 0;
  std::string first_error;
  std::array<std::vector<EstimatorMetrics>, 3> estimates;
  std::vector<CoverageMetrics> coverage;
  double mean_bandwidth = 0.0; // doubly robust pipeline, undersmoothed
  double mean_a_n = 0.0;
};

// CATEF of the simulation design: g(x1) = 10 + x1/sqrt(p).
double true_catef(int p, double x1);

//! One draw of the synthetic design: Z ~ N(0, I_p),
//! Y1 = 10 + sum_k Z_k/sqrt(p) + v, Y0 = 0,
//! D = 1{Lambda(sum_{k=p/2}^{p} Z_k/sqrt(p/2)) > U}, Y = D*Y1,
//! with X the first column of Z.
Dataset generate_dgp(int p, Eigen::Index n, Rng& rng);

// (regression spec, propensity spec) for the scenario: intercept plus all p
// columns when true, intercept plus the first p/2 when misspecified.
std::pair<DesignSpec, DesignSpec> scenario_specs(Scenario scenario, int p);

//! Runs the full per-replication pipeline (draw, first stage, pseudo-outcomes
//! for dr/ipw/ra, plug-in bandwidth with undersmoothing, evaluation and band
//! coverage) and aggregates the tables. Deterministic given the seed,
//! independent of the worker count. Replications that fail numerically are
//! excluded and counted; more than 5% failures aborts.
McReport run_replications(const McConfig& cfg);

// Deterministic table renderings used by the CLI outputs.
std::string estimates_csv(const McReport& report);
std::string coverage_csv(const McReport& report);

} // namespace catef
