#include "catef/pseudo_outcome.hpp"

#include "catef/errors.hpp"

namespace catef {

namespace {

void check_finite(const Eigen::VectorXd& psi) {
  if (!psi.allFinite()) {
    throw NumericError("non-finite pseudo-outcome; propensity reached 0 or 1 "
                       "(enable trimming via trim_eps > 0)");
  }
}

} // namespace

Estimator estimator_from_string(const std::string& name) {
  if (name == "dr") return Estimator::dr;
  if (name == "ipw") return Estimator::ipw;
  if (name == "ra") return Estimator::ra;
  throw InputError("unknown estimator '" + name + "' (expected dr|ipw|ra)");
}

std::string to_string(Estimator estimator) {
  switch (estimator) {
    case Estimator::dr: return "dr";
    case Estimator::ipw: return "ipw";
    case Estimator::ra: return "ra";
  }
  return "dr";
}

PseudoOutcome compute_psi_dr(const Dataset& data, const FirstStageFit& fit, double trim_eps) {
  const Eigen::VectorXd mu1 = predict_mu(fit, data, 1);
  const Eigen::VectorXd mu0 = predict_mu(fit, data, 0);
  const PropensityPrediction ps = predict_pi(fit, data, trim_eps);

  PseudoOutcome out;
  out.estimator = Estimator::dr;
  out.dim_theta = fit.dim_theta;
  out.clip_count = ps.clipped;
  out.psi.resize(data.n());
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const double d = data.d[i];
    const double y = data.y[i];
    const double pi = ps.pi[i];
    const double psi1 = d * y / pi - (d - pi) / pi * mu1[i];
    const double psi0 = (1.0 - d) * y / (1.0 - pi) + (d - pi) / (1.0 - pi) * mu0[i];
    out.psi[i] = psi1 - psi0;
  }
  check_finite(out.psi);
  return out;
}

PseudoOutcome compute_psi_ipw(const Dataset& data, const FirstStageFit& fit, double trim_eps) {
  const PropensityPrediction ps = predict_pi(fit, data, trim_eps);

  PseudoOutcome out;
  out.estimator = Estimator::ipw;
  out.dim_theta = fit.dim_theta;
  out.clip_count = ps.clipped;
  out.psi.resize(data.n());
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const double d = data.d[i];
    const double y = data.y[i];
    const double pi = ps.pi[i];
    out.psi[i] = d * y / pi - (1.0 - d) * y / (1.0 - pi);
  }
  check_finite(out.psi);
  return out;
}

PseudoOutcome compute_psi_ra(const Dataset& data, const FirstStageFit& fit) {
  PseudoOutcome out;
  out.estimator = Estimator::ra;
  out.dim_theta = fit.dim_theta;
  out.psi = predict_mu(fit, data, 1) - predict_mu(fit, data, 0);
  check_finite(out.psi);
  return out;
}

PseudoOutcome compute_psi(const Dataset& data, const FirstStageFit& fit, Estimator estimator,
                          double trim_eps) {
  switch (estimator) {
    case Estimator::dr: return compute_psi_dr(data, fit, trim_eps);
    case Estimator::ipw: return compute_psi_ipw(data, fit, trim_eps);
    case Estimator::ra: return compute_psi_ra(data, fit);
  }
  throw InputError("unknown estimator");
}

double estimate_ate(const PseudoOutcome& psi) {
  if (psi.psi.size() == 0) throw InputError("empty pseudo-outcome");
  return psi.psi.mean();
}

} // namespace catef
