#pragma once

#include "catef/dataset.hpp"
#include "catef/first_stage.hpp"

#include <Eigen/Core>

#include <string>

namespace catef {

enum class Estimator { dr, ipw, ra };

Estimator estimator_from_string(const std::string& name);
std::string to_string(Estimator estimator);

//! Per-observation pseudo-outcomes psi. Regressing psi on X nonparametrically
//! estimates the conditional average treatment effect function.
struct PseudoOutcome {
  Eigen::VectorXd psi;
  Estimator estimator = Estimator::dr;
  Eigen::Index dim_theta = 0;   // total first-stage parameter count
  Eigen::Index clip_count = 0;  // propensity values clipped by trimming
};

//! Doubly robust (AIPW) pseudo-outcome
//!   psi1 = D*Y/pi - (D - pi)/pi * mu1,
//!   psi0 = (1-D)*Y/(1-pi) + (D - pi)/(1-pi) * mu0,
//!   psi  = psi1 - psi0,
//! evaluated at the trimmed propensity and fitted regressions.
PseudoOutcome compute_psi_dr(const Dataset& data, const FirstStageFit& fit, double trim_eps);

// psi = D*Y/pi - (1-D)*Y/(1-pi).
PseudoOutcome compute_psi_ipw(const Dataset& data, const FirstStageFit& fit, double trim_eps);

// psi = mu1(Z) - mu0(Z); ignores the propensity model entirely.
PseudoOutcome compute_psi_ra(const Dataset& data, const FirstStageFit& fit);

PseudoOutcome compute_psi(const Dataset& data, const FirstStageFit& fit, Estimator estimator,
                          double trim_eps);

// Sample mean of psi (the ATE estimate under the chosen pseudo-outcome).
double estimate_ate(const PseudoOutcome& psi);

} // namespace catef
