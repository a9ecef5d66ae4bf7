#pragma once

#include "catef/dataset.hpp"
#include "catef/local_linear.hpp"
#include "catef/pseudo_outcome.hpp"

#include <Eigen/Core>

#include <array>
#include <string>
#include <vector>

namespace catef {

enum class BandFlavor { uniform, gumbel, pointwise };
enum class BandSide { two_sided, lower, upper };

BandFlavor band_flavor_from_string(const std::string& name);
std::string to_string(BandFlavor flavor);
std::string to_string(BandSide side);

using Interval = std::vector<std::array<double, 2>>; // per-coordinate [a_j, b_j]

//! Request for a confidence band over a rectangle of interest.
struct BandSpec {
  Interval interval;
  double alpha = 0.05;
  BandSide side = BandSide::two_sided;
  BandFlavor flavor = BandFlavor::uniform;
  int grid_points = 201;
};

//! Assembled band: evaluation grid (one row per point, coordinates in
//! columns), estimates, standard errors, and the lower/upper envelopes under
//! the requested critical value. One-sided bands carry +/-infinity on the
//! unbounded side.
struct BandResult {
  Eigen::MatrixXd grid;
  Eigen::VectorXd g_hat;
  Eigen::VectorXd se;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  double a_n = 0.0;
  double critical = 0.0;
  double bandwidth = 0.0;
  double alpha = 0.05;
  BandFlavor flavor = BandFlavor::uniform;
  BandSide side = BandSide::two_sided;
};

//! Normalizing level a_n of the approximating Gaussian field: the largest
//! solution of
//!   mes(I) h^{-d} lambda^{d/2} (2pi)^{-(d+1)/2} a^{d-1} exp(-a^2/2) = 1.
//! Closed form for d = 1; bisection + Newton on the decreasing branch
//! (a > sqrt(d-1)) for d in {2,3}. Throws NumericError when no valid root
//! exists (bandwidth too large relative to the interval).
double compute_a_n(int dim, double bandwidth, const Interval& interval, double lambda);

// Largest root a of kappa * a^{d-1} * exp(-a^2/2) = 1; exposed so tests can
// cross-check the d = 1 closed form against the generic solver.
double solve_b1_largest_root(double kappa, int dim);

//! Largest bandwidth for which the level equation still has a root over the
//! given interval. Band pipelines restrict a data-driven bandwidth to
//! 0.99 * this value so the critical-value construction stays valid.
double max_valid_bandwidth(int dim, const Interval& interval, double lambda);

//! Leading-term distribution-like function of the Gaussian-field
//! approximation, evaluated at t = a_n (c - a_n):
//!   F(t) = exp(-k e^{-t - t^2/(2 a_n^2)}) * P_d(t),
//! with k = 2 (two-sided) or 1 (one-sided), P_1 = 1, P_2 = 1 + t/a_n^2,
//! P_3 = (1 + t/a_n^2)^2 - 1/a_n^2.
double leading_term_cdf(double t, double a_n, int dim, bool two_sided);

// Critical values: c such that the leading-term function equals 1 - alpha,
// returned on the original scale c = a_n + t/a_n.
double critical_two_sided(double alpha, double a_n, int dim);
double critical_one_sided(double alpha, double a_n, int dim);

// Gumbel-approximation critical value a_n - log{log[(1-alpha)^{-1/2}]}/a_n
// (and its one-sided analogue).
double critical_gumbel(double alpha, double a_n);
double critical_gumbel_one_sided(double alpha, double a_n);

// Standard normal quantile Phi^{-1}(1 - alpha/2) for pointwise intervals.
double critical_pointwise(double alpha);
double critical_pointwise_one_sided(double alpha);

//! Grid, point estimates and standard errors shared by every flavor of band
//! on the same fit.
struct BandProfile {
  Eigen::MatrixXd grid;
  Eigen::VectorXd g_hat;
  Eigen::VectorXd se;
  double a_n = 0.0;
  double bandwidth = 0.0;
  int dim = 1;
  Interval interval;
  Eigen::Index n = 0;
};

BandProfile compute_band_profile(const PseudoOutcome& psi, const Dataset& data,
                                 const SmootherConfig& cfg, const Interval& interval,
                                 int grid_points);

BandResult apply_critical(const BandProfile& profile, BandFlavor flavor, BandSide side,
                          double alpha);

BandResult assemble_band(const PseudoOutcome& psi, const Dataset& data,
                         const SmootherConfig& cfg, const BandSpec& spec);

struct ConstancyTest {
  bool reject = false;
  double g_interval = 0.0; // mean pseudo-outcome over observations with X in I
};

//! Rejects a constant treatment effect when the uniform band excludes the
//! within-interval mean g_I at any grid point. Requires a two-sided uniform
//! band.
ConstancyTest constancy_test(const BandResult& band, const PseudoOutcome& psi,
                             const Dataset& data, const Interval& interval);

} // namespace catef
