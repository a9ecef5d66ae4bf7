#pragma once

#include "catef/dataset.hpp"

#include <Eigen/Core>

namespace catef {

struct LogitOptions {
  double tol = 1e-8;        // convergence threshold on the score max-norm
  int max_iter = 100;
  double coef_guard = 1e4;  // max-norm guard flagging perfect separation
};

//! Fitted first-stage parameters theta = (alpha1, alpha0, beta): OLS outcome
//! regressions per treatment arm and a logistic MLE propensity model, each on
//! its own design expansion of Z. Immutable once fitted.
struct FirstStageFit {
  Eigen::VectorXd alpha1;
  Eigen::VectorXd alpha0;
  Eigen::VectorXd beta;
  DesignSpec reg_spec;
  DesignSpec ps_spec;
  Eigen::Index dim_theta = 0;
  bool converged = false;
  int iterations = 0;
};

// Least squares on the subsample with D == arm. Throws NumericError on a
// rank-deficient design or when the arm has fewer rows than design columns.
Eigen::VectorXd fit_ols_arm(const Dataset& data, const DesignSpec& spec, int arm);

struct LogitResult {
  Eigen::VectorXd beta;
  bool converged = false;
  int iterations = 0;
};

//! Logistic maximum likelihood by iteratively reweighted least squares with
//! step-halving. Converges when the score max-norm is <= opts.tol; throws
//! NumericError on non-convergence or detected separation.
LogitResult fit_logit_mle(const Dataset& data, const DesignSpec& spec,
                          const LogitOptions& opts = {});

FirstStageFit fit_first_stage(const Dataset& data, const DesignSpec& reg_spec,
                              const DesignSpec& ps_spec, const LogitOptions& opts = {});

// Fitted outcome regression mu_arm(Z_i) for every row.
Eigen::VectorXd predict_mu(const FirstStageFit& fit, const Dataset& data, int arm);

struct PropensityPrediction {
  Eigen::VectorXd pi;          // clipped into [trim_eps, 1 - trim_eps]
  Eigen::Index clipped = 0;    // number of observations that hit the clip
};

// Logistic propensity predictions, clipped away from {0,1}. Requires
// 0 <= trim_eps < 0.5.
PropensityPrediction predict_pi(const FirstStageFit& fit, const Dataset& data, double trim_eps);

} // namespace catef
