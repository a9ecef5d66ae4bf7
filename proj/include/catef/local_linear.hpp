#pragma once

#include "catef/dataset.hpp"
#include "catef/kernels.hpp"
#include "catef/pseudo_outcome.hpp"

#include <Eigen/Core>

namespace catef {

//! Bandwidth, kernel and dimension for local linear smoothing. One shared
//! bandwidth across all dX coordinates.
struct SmootherConfig {
  KernelSpec kernel;
  double bandwidth = 0.0;
  int dim = 1;
};

void validate_config(const SmootherConfig& cfg);

struct LocalFit {
  double value = 0.0;       // intercept = estimate of g(x)
  Eigen::VectorXd slope;    // local slope, length dX
};

//! Everything the band needs at one evaluation point.
struct PointEstimate {
  Eigen::VectorXd x;
  double g_hat = 0.0;
  double se = 0.0;           // s_hat(x)/sqrt(n h^dX)
  double f_hat = 0.0;        // kernel density estimate
  double sigma2_hat = 0.0;   // conditional variance estimate
  double effective_n = 0.0;  // kernel-weighted sample size at x
};

//! Weighted least squares fit of psi on (1, X - x) with product-kernel
//! weights K((X_i - x)/h). Throws NumericError when every weight is below
//! 1e-12 or the weighted normal matrix has reciprocal condition below 1e-12.
LocalFit fit_local_linear(const Eigen::VectorXd& psi, const Eigen::MatrixXd& x_data,
                          const SmootherConfig& cfg, const Eigen::VectorXd& x0);

// f_hat(x) = (n h^dX)^{-1} sum_i K((X_i - x)/h).
double density_estimate(const Eigen::MatrixXd& x_data, const SmootherConfig& cfg,
                        const Eigen::VectorXd& x0);

//! Conditional variance of psi given X = x:
//!   sigma2(x) = [(n - dim_theta) h^dX]^{-1} sum_i U_i^2 K((X_i - x)/h) / f_hat(x),
//! with residuals U_i = psi_i - g_hat(X_i) taken at the data points.
double cond_variance(const Eigen::VectorXd& psi, const Eigen::MatrixXd& x_data,
                     const SmootherConfig& cfg, const Eigen::VectorXd& g_at_data,
                     Eigen::Index dim_theta, const Eigen::VectorXd& x0);

// se = { sigma2 * R(K)^dX / (n h^dX f_hat) }^{1/2}.
double standard_error(double sigma2, double f_hat, Eigen::Index n, const SmootherConfig& cfg);

// g_hat evaluated at every data point (leave-in), used for the residuals of
// cond_variance.
Eigen::VectorXd smooth_at_data(const Eigen::VectorXd& psi, const Eigen::MatrixXd& x_data,
                               const SmootherConfig& cfg);

PointEstimate evaluate_point(const Eigen::VectorXd& psi, const Eigen::MatrixXd& x_data,
                             const SmootherConfig& cfg, const Eigen::VectorXd& g_at_data,
                             Eigen::Index dim_theta, const Eigen::VectorXd& x0);

// Dataset-level conveniences operating on the X columns selected by x_cols.
LocalFit fit_local_linear(const PseudoOutcome& psi, const Dataset& data,
                          const SmootherConfig& cfg, const Eigen::VectorXd& x0);

} // namespace catef
