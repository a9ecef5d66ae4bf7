#include "catef/bandwidth.hpp"

#include "catef/errors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <string>

namespace catef {

namespace {

const double kSqrt2Pi = 2.5066282746310005024;

double gauss_kernel(double u) { return 0.3989422804014326779 * std::exp(-0.5 * u * u); }

struct SortedSample {
  std::vector<Eigen::Index> order; // indices sorted by x
};

SortedSample sort_by_x(const Eigen::VectorXd& x) {
  SortedSample s;
  s.order.resize(static_cast<std::size_t>(x.size()));
  std::iota(s.order.begin(), s.order.end(), Eigen::Index{0});
  std::stable_sort(s.order.begin(), s.order.end(),
                   [&x](Eigen::Index i, Eigen::Index j) { return x[i] < x[j]; });
  return s;
}

// Quartic least squares on one block, centered for conditioning. Returns the
// coefficients in powers of (x - center).
struct BlockFit {
  Eigen::VectorXd coef; // length 5
  double center = 0.0;
  double rss = 0.0;
};

BlockFit fit_block_quartic(const Eigen::VectorXd& x, const Eigen::VectorXd& psi,
                           const std::vector<Eigen::Index>& rows) {
  const Eigen::Index m = static_cast<Eigen::Index>(rows.size());
  if (m < 5) throw NumericError("quartic block with fewer than 5 observations");
  BlockFit fit;
  double center = 0.0;
  for (const Eigen::Index i : rows) center += x[i];
  center /= static_cast<double>(m);
  fit.center = center;

  Eigen::MatrixXd design(m, 5);
  Eigen::VectorXd y(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    const double u = x[rows[static_cast<std::size_t>(r)]] - center;
    design(r, 0) = 1.0;
    design(r, 1) = u;
    design(r, 2) = u * u;
    design(r, 3) = u * u * u;
    design(r, 4) = u * u * u * u;
    y[r] = psi[rows[static_cast<std::size_t>(r)]];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < 5) throw NumericError("singular block design in quartic stage");
  fit.coef = qr.solve(y);
  fit.rss = (y - design * fit.coef).squaredNorm();
  return fit;
}

std::vector<std::vector<Eigen::Index>> make_blocks(const SortedSample& sorted, Eigen::Index n,
                                                   int n_blocks) {
  std::vector<std::vector<Eigen::Index>> blocks(static_cast<std::size_t>(n_blocks));
  for (int j = 0; j < n_blocks; ++j) {
    const Eigen::Index lo = (n * j) / n_blocks;
    const Eigen::Index hi = (n * (j + 1)) / n_blocks;
    blocks[static_cast<std::size_t>(j)].assign(sorted.order.begin() + lo, sorted.order.begin() + hi);
  }
  return blocks;
}

double blocked_rss(const Eigen::VectorXd& x, const Eigen::VectorXd& psi,
                   const SortedSample& sorted, int n_blocks) {
  double rss = 0.0;
  for (const auto& rows : make_blocks(sorted, x.size(), n_blocks)) {
    rss += fit_block_quartic(x, psi, rows).rss;
  }
  return rss;
}

// Pilot bandwidth of the curvature stage; n in the denominator gives the
// n^{-1/7} rate. A vanishing theta24 falls back to (b-a) n^{-1/7}.
double pilot_bandwidth(double theta24_q, double sigma2_q, double a, double b, Eigen::Index n) {
  if (theta24_q == 0.0) {
    return (b - a) * std::pow(static_cast<double>(n), -1.0 / 7.0);
  }
  const double c2 = (theta24_q < 0.0) ? std::pow(3.0 / (8.0 * std::sqrt(M_PI)), 1.0 / 7.0)
                                      : std::pow(15.0 / (16.0 * std::sqrt(M_PI)), 1.0 / 7.0);
  return c2 *
         std::pow(sigma2_q * (b - a) / (std::fabs(theta24_q) * static_cast<double>(n)), 1.0 / 7.0);
}

// Solves the small SPD normal system, with a residual check standing in for a
// condition guard.
Eigen::VectorXd solve_gram(const Eigen::MatrixXd& gram, const Eigen::VectorXd& rhs,
                           const char* stage) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  if (ldlt.info() != Eigen::Success) {
    throw NumericError(std::string("singular weighted design in ") + stage);
  }
  const Eigen::VectorXd sol = ldlt.solve(rhs);
  const double scale = gram.norm() * sol.norm() + rhs.norm();
  if (!sol.allFinite() || (gram * sol - rhs).norm() > 1e-8 * std::max(scale, 1e-300)) {
    throw NumericError(std::string("ill-conditioned weighted design in ") + stage);
  }
  return sol;
}

} // namespace

int max_blocks(Eigen::Index n) {
  const Eigen::Index by_size = n / 20;
  return static_cast<int>(std::max<Eigen::Index>(std::min<Eigen::Index>(by_size, 5), 1));
}

int choose_blocks(const Eigen::VectorXd& x, const Eigen::VectorXd& psi) {
  const Eigen::Index n = x.size();
  if (n != psi.size()) throw InputError("x and psi lengths differ");
  const SortedSample sorted = sort_by_x(x);

  // A candidate N is feasible when each of its equal-count blocks supports a
  // quartic fit.
  std::vector<int> candidates;
  std::vector<double> rss;
  for (int cand = 1; cand <= max_blocks(n); ++cand) {
    if (n / cand < 5) continue;
    try {
      rss.push_back(blocked_rss(x, psi, sorted, cand));
      candidates.push_back(cand);
    } catch (const NumericError&) {
      // drop infeasible candidate
    }
  }
  if (candidates.empty()) {
    throw NumericError("no feasible block count: cannot fit a quartic on " +
                       std::to_string(n) + " observations");
  }

  const int n_max = candidates.back();
  const double rss_max = rss.back();
  int best = candidates.front();
  double best_cp = 0.0;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const double denom = (rss_max > 0.0) ? rss_max : 1.0;
    const double cp = rss[k] / denom * static_cast<double>(n - n_max) -
                      static_cast<double>(n - 10 * candidates[k]);
    if (k == 0 || cp < best_cp) {
      best_cp = cp;
      best = candidates[k];
    }
  }
  return best;
}

QuarticStage blocked_quartic_stage(const Eigen::VectorXd& x, const Eigen::VectorXd& psi,
                                   int n_blocks) {
  const Eigen::Index n = x.size();
  if (n != psi.size()) throw InputError("x and psi lengths differ");
  if (n_blocks < 1) throw InputError("n_blocks must be >= 1");
  if (n <= 5 * static_cast<Eigen::Index>(n_blocks)) {
    throw NumericError("need n > 5N for the blocked quartic stage");
  }
  const SortedSample sorted = sort_by_x(x);

  QuarticStage out;
  double theta24 = 0.0;
  for (const auto& rows : make_blocks(sorted, n, n_blocks)) {
    const BlockFit fit = fit_block_quartic(x, psi, rows);
    out.rss += fit.rss;
    const double m4 = 24.0 * fit.coef[4];
    for (const Eigen::Index i : rows) {
      const double u = x[i] - fit.center;
      const double m2 = 2.0 * fit.coef[2] + 6.0 * fit.coef[3] * u + 12.0 * fit.coef[4] * u * u;
      theta24 += m2 * m4;
    }
  }
  out.theta24_q = theta24 / static_cast<double>(n);
  out.sigma2_q = out.rss / static_cast<double>(n - 5 * n_blocks);
  return out;
}

double local_cubic_stage(const Eigen::VectorXd& x, const Eigen::VectorXd& psi, double theta24_q,
                         double sigma2_q, double a, double b) {
  const Eigen::Index n = x.size();
  if (n != psi.size()) throw InputError("x and psi lengths differ");
  if (!(b > a)) throw InputError("need b > a");
  if (sigma2_q < 0.0) throw InputError("sigma2_q must be nonnegative");

  const double g1 = pilot_bandwidth(theta24_q, sigma2_q, a, b, n);
  if (theta24_q == 0.0) {
    std::clog << "plugin bandwidth: theta24 is exactly zero, falling back to pilot g1 = " << g1
              << "\n";
  }
  if (!(g1 > 0.0) || !std::isfinite(g1)) {
    throw NumericError("invalid pilot bandwidth in local cubic stage");
  }

  const double lo = 0.95 * a + 0.05 * b;
  const double hi = 0.05 * a + 0.95 * b;
  double theta22 = 0.0;
  Eigen::MatrixXd gram(4, 4);
  Eigen::VectorXd rhs(4);
  Eigen::VectorXd row(4);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(x[i] > lo && x[i] < hi)) continue;
    gram.setZero();
    rhs.setZero();
    for (Eigen::Index j = 0; j < n; ++j) {
      const double u = x[j] - x[i];
      const double w = gauss_kernel(u / g1);
      row[0] = 1.0;
      row[1] = u;
      row[2] = u * u;
      row[3] = u * u * u;
      gram.noalias() += w * row * row.transpose();
      rhs.noalias() += (w * psi[j]) * row;
    }
    const Eigen::VectorXd gamma = solve_gram(gram, rhs, "local cubic stage");
    const double m2 = 2.0 * gamma[2];
    theta22 += m2 * m2;
  }
  return theta22 / static_cast<double>(n);
}

FinalBandwidth final_bandwidth(const Eigen::VectorXd& x, const Eigen::VectorXd& psi,
                               double theta22, double sigma2_q, double a, double b) {
  const Eigen::Index n = x.size();
  if (n != psi.size()) throw InputError("x and psi lengths differ");
  if (!(theta22 > 0.0)) {
    throw NumericError("theta22 must be positive for the plug-in bandwidth");
  }
  if (!(b > a)) throw InputError("need b > a");

  FinalBandwidth out;
  const double c3 = std::pow(
      4.0 * (0.5 + 2.0 * std::sqrt(2.0) - (4.0 / 3.0) * std::sqrt(3.0)) / kSqrt2Pi, 1.0 / 9.0);
  out.g2 = c3 * std::pow(sigma2_q * sigma2_q * (b - a) /
                             (theta22 * theta22 * static_cast<double>(n) * static_cast<double>(n)),
                         1.0 / 9.0);
  if (!(out.g2 > 0.0) || !std::isfinite(out.g2)) {
    throw NumericError("invalid variance-stage bandwidth");
  }

  // Local linear smoother weights at every data point give the fitted values
  // and the hat-matrix degrees-of-freedom correction n - 2*tr(W) + ||W||_F^2.
  double trace_w = 0.0;
  double frob2_w = 0.0;
  double rss = 0.0;
  Eigen::VectorXd weights(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double u = x[j] - x[i];
      const double w = gauss_kernel(u / out.g2);
      weights[j] = w;
      s0 += w;
      s1 += w * u;
      s2 += w * u * u;
    }
    const double det = s0 * s2 - s1 * s1;
    if (!(std::fabs(det) > 1e-300)) {
      throw NumericError("singular local linear system in variance stage");
    }
    double fitted = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double u = x[j] - x[i];
      const double wij = (s2 - s1 * u) * weights[j] / det;
      fitted += wij * psi[j];
      frob2_w += wij * wij;
      if (j == i) trace_w += wij;
    }
    const double resid = psi[i] - fitted;
    rss += resid * resid;
  }
  const double dof = static_cast<double>(n) - 2.0 * trace_w + frob2_w;
  if (!(dof > 0.0)) throw NumericError("nonpositive degrees of freedom in variance stage");
  out.sigma2 = rss / dof;

  out.h_dpi = std::pow(1.0 / (2.0 * std::sqrt(M_PI)), 0.2) *
              std::pow(out.sigma2 * (b - a) / (theta22 * static_cast<double>(n)), 0.2);
  out.h_n = out.h_dpi * undersmooth_factor(n);
  return out;
}

double undersmooth_factor(Eigen::Index n) {
  return std::pow(static_cast<double>(n), -3.0 / 35.0);
}

PluginState select_bandwidth(const Eigen::VectorXd& x, const Eigen::VectorXd& psi) {
  const double a = x.minCoeff();
  const double b = x.maxCoeff();
  if (!(b > a)) throw NumericError("x has zero range; cannot select a bandwidth");

  PluginState state;
  state.n = x.size();
  state.n_blocks = choose_blocks(x, psi);
  const QuarticStage quartic = blocked_quartic_stage(x, psi, state.n_blocks);
  state.theta24_q = quartic.theta24_q;
  state.sigma2_q = quartic.sigma2_q;
  state.theta22 = local_cubic_stage(x, psi, state.theta24_q, state.sigma2_q, a, b);
  state.g1 = pilot_bandwidth(state.theta24_q, state.sigma2_q, a, b, state.n);

  const FinalBandwidth fin = final_bandwidth(x, psi, state.theta22, state.sigma2_q, a, b);
  state.g2 = fin.g2;
  state.sigma2 = fin.sigma2;
  state.h_dpi = fin.h_dpi;
  state.h_n = fin.h_n;
  return state;
}

std::vector<PluginState> select_bandwidth_per_coordinate(const Eigen::MatrixXd& x,
                                                         const Eigen::VectorXd& psi) {
  std::vector<PluginState> out;
  out.reserve(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    out.push_back(select_bandwidth(x.col(j), psi));
  }
  return out;
}

double combined_plugin_bandwidth(const std::vector<PluginState>& per_coordinate) {
  if (per_coordinate.empty()) throw InputError("no per-coordinate plug-in results");
  double log_sum = 0.0;
  for (const PluginState& s : per_coordinate) log_sum += std::log(s.h_dpi);
  return std::exp(log_sum / static_cast<double>(per_coordinate.size()));
}

} // namespace catef
