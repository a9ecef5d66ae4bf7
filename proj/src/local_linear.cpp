#include "catef/local_linear.hpp"

#include "catef/errors.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <sstream>
#include <string>

namespace catef {

namespace {

std::string point_string(const Eigen::VectorXd& x0) {
  std::ostringstream ss;
  ss << "(";
  for (Eigen::Index j = 0; j < x0.size(); ++j) {
    if (j) ss << ", ";
    ss << x0[j];
  }
  ss << ")";
  return ss.str();
}

void check_point(const Eigen::MatrixXd& x_data, const SmootherConfig& cfg,
                 const Eigen::VectorXd& x0) {
  validate_config(cfg);
  if (x_data.cols() != cfg.dim || x0.size() != cfg.dim) {
    throw InputError("dimension mismatch between data, config and evaluation point");
  }
}

Eigen::VectorXd kernel_weights(const Eigen::MatrixXd& x_data, const SmootherConfig& cfg,
                               const Eigen::VectorXd& x0) {
  const Eigen::Index n = x_data.rows();
  Eigen::VectorXd w(n);
  Eigen::VectorXd s(cfg.dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    s = (x_data.row(i).transpose() - x0) / cfg.bandwidth;
    w[i] = eval_product_kernel(cfg.kernel, s);
  }
  return w;
}

} // namespace

void validate_config(const SmootherConfig& cfg) {
  if (!(cfg.bandwidth > 0.0)) throw InputError("bandwidth must be positive");
  if (cfg.dim < 1 || cfg.dim > 3) throw InputError("dim must be 1, 2 or 3");
}

LocalFit fit_local_linear(const Eigen::VectorXd& psi, const Eigen::MatrixXd& x_data,
                          const SmootherConfig& cfg, const Eigen::VectorXd& x0) {
  check_point(x_data, cfg, x0);
  const Eigen::Index n = x_data.rows();
  if (psi.size() != n) throw InputError("psi and x_data row counts differ");
  const int d = cfg.dim;

  const Eigen::VectorXd w = kernel_weights(x_data, cfg, x0);
  if (w.maxCoeff() < 1e-12) {
    throw NumericError("degenerate neighborhood at x = " + point_string(x0) +
                       ": all kernel weights below 1e-12");
  }

  // Normal equations of the weighted regression on (1, (X - x0)/h); the
  // bandwidth-standardized coordinates make the condition check scale-free.
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(d + 1, d + 1);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(d + 1);
  Eigen::VectorXd row(d + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (w[i] == 0.0) continue;
    row[0] = 1.0;
    row.tail(d) = (x_data.row(i).transpose() - x0) / cfg.bandwidth;
    gram.noalias() += w[i] * row * row.transpose();
    rhs.noalias() += (w[i] * psi[i]) * row;
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(gram, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::VectorXd& sv = svd.singularValues();
  if (!(sv[0] > 0.0) || sv[d] / sv[0] < 1e-12) {
    throw NumericError("degenerate neighborhood at x = " + point_string(x0) +
                       ": singular weighted design");
  }
  const Eigen::VectorXd gamma = svd.solve(rhs);

  LocalFit fit;
  fit.value = gamma[0];
  fit.slope = gamma.tail(d) / cfg.bandwidth;
  return fit;
}

double density_estimate(const Eigen::MatrixXd& x_data, const SmootherConfig& cfg,
                        const Eigen::VectorXd& x0) {
  check_point(x_data, cfg, x0);
  const Eigen::Index n = x_data.rows();
  const double hd = std::pow(cfg.bandwidth, cfg.dim);
  return kernel_weights(x_data, cfg, x0).sum() / (static_cast<double>(n) * hd);
}

double cond_variance(const Eigen::VectorXd& psi, const Eigen::MatrixXd& x_data,
                     const SmootherConfig& cfg, const Eigen::VectorXd& g_at_data,
                     Eigen::Index dim_theta, const Eigen::VectorXd& x0) {
  check_point(x_data, cfg, x0);
  const Eigen::Index n = x_data.rows();
  if (psi.size() != n || g_at_data.size() != n) {
    throw InputError("psi/g_at_data length mismatch");
  }
  if (n <= dim_theta) throw InputError("need n > dim_theta for the variance estimate");

  const double f_hat = density_estimate(x_data, cfg, x0);
  if (f_hat < 1e-12) {
    throw NumericError("density too small at x = " + point_string(x0));
  }
  const Eigen::VectorXd w = kernel_weights(x_data, cfg, x0);
  const Eigen::VectorXd u = psi - g_at_data;
  const double hd = std::pow(cfg.bandwidth, cfg.dim);
  const double sum = (u.array().square() * w.array()).sum();
  return sum / (static_cast<double>(n - dim_theta) * hd * f_hat);
}

double standard_error(double sigma2, double f_hat, Eigen::Index n, const SmootherConfig& cfg) {
  validate_config(cfg);
  if (!(f_hat > 0.0)) throw NumericError("standard error needs f_hat > 0");
  if (sigma2 < 0.0) throw NumericError("negative variance estimate");
  const double hd = std::pow(cfg.bandwidth, cfg.dim);
  const double rk = std::pow(cfg.kernel.r_k, cfg.dim);
  return std::sqrt(sigma2 * rk / (static_cast<double>(n) * hd * f_hat));
}

Eigen::VectorXd smooth_at_data(const Eigen::VectorXd& psi, const Eigen::MatrixXd& x_data,
                               const SmootherConfig& cfg) {
  validate_config(cfg);
  const Eigen::Index n = x_data.rows();
  if (psi.size() != n) throw InputError("psi and x_data row counts differ");
  const int d = cfg.dim;

  // Same weighted fit as fit_local_linear, but solved with a truncated SVD:
  // at an isolated extreme point the slope direction collapses and the
  // pseudo-inverse returns the local weighted mean. Those residuals carry
  // negligible kernel weight wherever the variance is later evaluated, so
  // the residual vector stays defined at every data point.
  Eigen::VectorXd g(n);
  Eigen::MatrixXd gram(d + 1, d + 1);
  Eigen::VectorXd rhs(d + 1), row(d + 1), s(d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd x0 = x_data.row(i).transpose();
    gram.setZero();
    rhs.setZero();
    for (Eigen::Index j = 0; j < n; ++j) {
      s = (x_data.row(j).transpose() - x0) / cfg.bandwidth;
      const double w = eval_product_kernel(cfg.kernel, s);
      if (w == 0.0) continue;
      row[0] = 1.0;
      row.tail(d) = s;
      gram.noalias() += w * row * row.transpose();
      rhs.noalias() += (w * psi[j]) * row;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(gram, Eigen::ComputeFullU | Eigen::ComputeFullV);
    svd.setThreshold(1e-12);
    g[i] = svd.solve(rhs)[0];
  }
  return g;
}

PointEstimate evaluate_point(const Eigen::VectorXd& psi, const Eigen::MatrixXd& x_data,
                             const SmootherConfig& cfg, const Eigen::VectorXd& g_at_data,
                             Eigen::Index dim_theta, const Eigen::VectorXd& x0) {
  PointEstimate point;
  point.x = x0;
  point.g_hat = fit_local_linear(psi, x_data, cfg, x0).value;
  point.f_hat = density_estimate(x_data, cfg, x0);
  point.sigma2_hat = cond_variance(psi, x_data, cfg, g_at_data, dim_theta, x0);
  point.se = standard_error(point.sigma2_hat, point.f_hat, x_data.rows(), cfg);
  const double k0 = std::pow(eval_kernel(cfg.kernel, 0.0), cfg.dim);
  point.effective_n = kernel_weights(x_data, cfg, x0).sum() / k0;
  return point;
}

LocalFit fit_local_linear(const PseudoOutcome& psi, const Dataset& data,
                          const SmootherConfig& cfg, const Eigen::VectorXd& x0) {
  return fit_local_linear(psi.psi, x_matrix(data), cfg, x0);
}

} // namespace catef
