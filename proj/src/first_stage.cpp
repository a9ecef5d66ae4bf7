#include "catef/first_stage.hpp"

#include "catef/errors.hpp"
#include "catef/stats.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include <cmath>
#include <string>

namespace catef {

namespace {

double log_likelihood(const Eigen::VectorXd& d, const Eigen::VectorXd& eta) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    ll += d[i] * eta[i] - softplus(eta[i]);
  }
  return ll;
}

} // namespace

Eigen::VectorXd fit_ols_arm(const Dataset& data, const DesignSpec& spec, int arm) {
  if (arm != 0 && arm != 1) throw InputError("arm must be 0 or 1");
  const Eigen::MatrixXd design = build_design(data, spec);
  const Eigen::Index q = design.cols();
  const double arm_value = static_cast<double>(arm);

  Eigen::Index m = 0;
  for (Eigen::Index i = 0; i < data.n(); ++i) m += (data.d[i] == arm_value);
  if (m < q) {
    throw NumericError("arm " + std::to_string(arm) + " has " + std::to_string(m) +
                       " observations, fewer than the " + std::to_string(q) + " design columns");
  }

  Eigen::MatrixXd x(m, q);
  Eigen::VectorXd y(m);
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    if (data.d[i] == arm_value) {
      x.row(r) = design.row(i);
      y[r] = data.y[i];
      ++r;
    }
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  if (qr.rank() < q) {
    throw NumericError("rank-deficient design in arm " + std::to_string(arm) + " (rank " +
                       std::to_string(qr.rank()) + " of " + std::to_string(q) + ")");
  }
  return qr.solve(y);
}

LogitResult fit_logit_mle(const Dataset& data, const DesignSpec& spec, const LogitOptions& opts) {
  const Eigen::MatrixXd x = build_design(data, spec);
  const Eigen::Index n = x.rows();
  const Eigen::Index q = x.cols();
  const Eigen::VectorXd& d = data.d;

  const double treated = d.sum();
  if (treated == 0.0 || treated == static_cast<double>(n)) {
    throw NumericError("logistic fit needs both treatment values present");
  }
  {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    if (qr.rank() < q) {
      throw NumericError("rank-deficient propensity design (rank " + std::to_string(qr.rank()) +
                         " of " + std::to_string(q) + ")");
    }
  }

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(q);
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(n);
  double ll = log_likelihood(d, eta);

  for (int iter = 0; iter <= opts.max_iter; ++iter) {
    Eigen::VectorXd prob(n), w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      prob[i] = logistic(eta[i]);
      w[i] = prob[i] * (1.0 - prob[i]);
    }
    const Eigen::VectorXd score = x.transpose() * (d - prob);
    if (score.lpNorm<Eigen::Infinity>() <= opts.tol) {
      return LogitResult{beta, true, iter};
    }
    if (iter == opts.max_iter) break;

    const Eigen::MatrixXd info = x.transpose() * w.asDiagonal() * x;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success) {
      throw NumericError("singular information matrix in logistic fit");
    }
    Eigen::VectorXd step = ldlt.solve(score);

    // Step-halving keeps the log-likelihood non-decreasing (up to roundoff
    // on the plateau near the optimum).
    const double ll_slack = 1e-10 * (1.0 + std::fabs(ll));
    double scale = 1.0;
    for (int half = 0; half < 40; ++half) {
      const Eigen::VectorXd candidate = beta + scale * step;
      const Eigen::VectorXd candidate_eta = x * candidate;
      const double candidate_ll = log_likelihood(d, candidate_eta);
      if (candidate_ll >= ll - ll_slack || scale < 1e-10) {
        beta = candidate;
        eta = candidate_eta;
        ll = candidate_ll;
        break;
      }
      scale *= 0.5;
    }
    if (beta.lpNorm<Eigen::Infinity>() > opts.coef_guard) {
      throw NumericError("logistic coefficients exceeded " + std::to_string(opts.coef_guard) +
                         "; data look perfectly separated");
    }
  }
  throw NumericError("logistic fit did not converge in " + std::to_string(opts.max_iter) +
                     " iterations");
}

FirstStageFit fit_first_stage(const Dataset& data, const DesignSpec& reg_spec,
                              const DesignSpec& ps_spec, const LogitOptions& opts) {
  FirstStageFit fit;
  fit.alpha1 = fit_ols_arm(data, reg_spec, 1);
  fit.alpha0 = fit_ols_arm(data, reg_spec, 0);
  const LogitResult logit = fit_logit_mle(data, ps_spec, opts);
  fit.beta = logit.beta;
  fit.converged = logit.converged;
  fit.iterations = logit.iterations;
  fit.reg_spec = reg_spec;
  fit.ps_spec = ps_spec;
  fit.dim_theta = fit.alpha1.size() + fit.alpha0.size() + fit.beta.size();
  return fit;
}

Eigen::VectorXd predict_mu(const FirstStageFit& fit, const Dataset& data, int arm) {
  if (arm != 0 && arm != 1) throw InputError("arm must be 0 or 1");
  const Eigen::MatrixXd design = build_design(data, fit.reg_spec);
  const Eigen::VectorXd& alpha = (arm == 1) ? fit.alpha1 : fit.alpha0;
  if (design.cols() != alpha.size()) {
    throw InputError("regression design width does not match fitted coefficients");
  }
  return design * alpha;
}

PropensityPrediction predict_pi(const FirstStageFit& fit, const Dataset& data, double trim_eps) {
  if (!(trim_eps >= 0.0 && trim_eps < 0.5)) {
    throw InputError("trim_eps must be in [0, 0.5)");
  }
  const Eigen::MatrixXd design = build_design(data, fit.ps_spec);
  if (design.cols() != fit.beta.size()) {
    throw InputError("propensity design width does not match fitted coefficients");
  }
  const Eigen::VectorXd eta = design * fit.beta;
  PropensityPrediction out;
  out.pi.resize(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double p = logistic(eta[i]);
    const double clipped = std::min(std::max(p, trim_eps), 1.0 - trim_eps);
    out.clipped += (clipped != p);
    out.pi[i] = clipped;
  }
  return out;
}

} // namespace catef
