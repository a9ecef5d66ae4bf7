#include "catef/uniform_band.hpp"

#include "catef/errors.hpp"
#include "catef/stats.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace catef {

namespace {

const double kTwoPi = 6.2831853071795864769;

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("alpha must be in (0, 1)");
}

void check_dim(int dim) {
  if (dim < 1 || dim > 3) throw InputError("band dimension must be 1, 2 or 3");
}

double measure(const Interval& interval) {
  double mes = 1.0;
  for (const auto& [a, b] : interval) {
    if (!(a < b)) throw InputError("interval must satisfy a < b in each coordinate");
    mes *= b - a;
  }
  return mes;
}

// log of the left-hand side of the level equation, as a function of a.
double log_b1(double log_kappa, int dim, double a) {
  return log_kappa + (dim - 1) * std::log(a) - 0.5 * a * a;
}

// -log{log[(1-alpha)^{-1/2}]} and its one-sided analogue.
double two_sided_shift(double alpha) { return -std::log(-0.5 * std::log1p(-alpha)); }
double one_sided_shift(double alpha) { return -std::log(-std::log1p(-alpha)); }

// Polynomial factor P_d(t) of the leading term and its derivative.
double poly_factor(double t, double a_n, int dim) {
  const double v = 1.0 + t / (a_n * a_n);
  switch (dim) {
    case 1: return 1.0;
    case 2: return v;
    default: return v * v - 1.0 / (a_n * a_n);
  }
}

double poly_factor_deriv(double t, double a_n, int dim) {
  const double a2 = a_n * a_n;
  switch (dim) {
    case 1: return 0.0;
    case 2: return 1.0 / a2;
    default: return 2.0 * (1.0 + t / a2) / a2;
  }
}

// Left end of the monotone increasing branch used for inversion: the point
// where the leading term vanishes (d >= 2) or attains its minimum (d = 1).
double branch_start(double a_n, int dim) {
  const double a2 = a_n * a_n;
  switch (dim) {
    case 1: return -a2;
    case 2: return -a2;
    default: return a_n - a2; // larger root of P_3 = 0
  }
}

// Smallest t on the increasing branch with F(t) >= target; F is continuous,
// zero (or minimal) at the branch start and unbounded as t grows, so the
// crossing is unique there. This is the rearranged inversion.
double invert_leading_term(double target, double a_n, int dim, bool two_sided) {
  const double t0 = branch_start(a_n, dim);
  if (leading_term_cdf(t0, a_n, dim, two_sided) >= target) {
    throw NumericError("confidence level unattainable at this sample size (a_n too small)");
  }
  double lo = t0;
  double hi = std::max(t0 + 1.0, 0.0);
  double step = 1.0;
  while (leading_term_cdf(hi, a_n, dim, two_sided) < target) {
    hi += step;
    step *= 2.0;
    if (!std::isfinite(hi)) throw NumericError("leading-term inversion failed to bracket");
  }
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (leading_term_cdf(mid, a_n, dim, two_sided) < target) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-15 * std::max(1.0, std::fabs(hi))) break;
  }
  // Newton polish on log F(t) = log(target).
  const double k = two_sided ? 2.0 : 1.0;
  const double a2 = a_n * a_n;
  double t = hi;
  for (int iter = 0; iter < 8; ++iter) {
    const double g = t + t * t / (2.0 * a2);
    const double p = poly_factor(t, a_n, dim);
    if (!(p > 0.0)) break;
    const double h = -k * std::exp(-g) + std::log(p) - std::log(target);
    const double dh = k * std::exp(-g) * (1.0 + t / a2) + poly_factor_deriv(t, a_n, dim) / p;
    if (!(dh > 0.0)) break;
    const double next = t - h / dh;
    if (!std::isfinite(next)) break;
    t = next;
  }
  if (std::fabs(leading_term_cdf(t, a_n, dim, two_sided) - target) >
      std::fabs(leading_term_cdf(hi, a_n, dim, two_sided) - target)) {
    t = hi; // keep the bisection point if Newton wandered
  }
  return t;
}

} // namespace

BandFlavor band_flavor_from_string(const std::string& name) {
  if (name == "uniform") return BandFlavor::uniform;
  if (name == "gumbel") return BandFlavor::gumbel;
  if (name == "pointwise") return BandFlavor::pointwise;
  throw InputError("unknown band flavor '" + name + "'");
}

std::string to_string(BandFlavor flavor) {
  switch (flavor) {
    case BandFlavor::uniform: return "uniform";
    case BandFlavor::gumbel: return "gumbel";
    case BandFlavor::pointwise: return "pointwise";
  }
  return "uniform";
}

std::string to_string(BandSide side) {
  switch (side) {
    case BandSide::two_sided: return "two_sided";
    case BandSide::lower: return "lower";
    case BandSide::upper: return "upper";
  }
  return "two_sided";
}

double solve_b1_largest_root(double kappa, int dim) {
  check_dim(dim);
  if (!(kappa > 0.0)) throw NumericError("level equation has no root (kappa <= 0)");
  const double log_kappa = std::log(kappa);

  if (dim == 1) {
    const double a2 = 2.0 * log_kappa;
    if (!(a2 > 0.0)) {
      throw NumericError("no valid root of the level equation: bandwidth too large "
                         "relative to the interval; use a smaller bandwidth");
    }
    return std::sqrt(a2);
  }

  const double peak = std::sqrt(static_cast<double>(dim - 1));
  if (!(log_b1(log_kappa, dim, peak) > 0.0)) {
    throw NumericError("no valid root of the level equation: bandwidth too large "
                       "relative to the interval; use a smaller bandwidth");
  }
  double lo = peak;
  double hi = peak + 1.0;
  double step = 1.0;
  while (log_b1(log_kappa, dim, hi) > 0.0) {
    hi += step;
    step *= 2.0;
  }
  for (int iter = 0; iter < 100; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (log_b1(log_kappa, dim, mid) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  // Newton on the log form; f' = (d-1)/a - a < 0 on this branch.
  double a = 0.5 * (lo + hi);
  for (int iter = 0; iter < 6; ++iter) {
    const double f = log_b1(log_kappa, dim, a);
    const double df = (dim - 1) / a - a;
    const double next = a - f / df;
    if (!(next > peak) || !std::isfinite(next)) break;
    a = next;
  }
  if (std::fabs(std::expm1(log_b1(log_kappa, dim, a))) > 1e-10) {
    throw NumericError("level equation root did not converge");
  }
  return a;
}

double max_valid_bandwidth(int dim, const Interval& interval, double lambda) {
  check_dim(dim);
  if (!(lambda > 0.0)) throw InputError("kernel lambda must be positive");
  const double mes = measure(interval);
  if (dim == 1) return mes * std::sqrt(lambda) / kTwoPi;
  // For d >= 2 the root exists while kappa * max_a a^{d-1} e^{-a^2/2} >= 1.
  const double peak2 = static_cast<double>(dim - 1);
  const double g_max = std::pow(peak2, 0.5 * peak2) * std::exp(-0.5 * peak2);
  const double c = mes * std::pow(lambda, 0.5 * dim) * std::pow(kTwoPi, -0.5 * (dim + 1));
  return std::pow(c * g_max, 1.0 / dim);
}

double compute_a_n(int dim, double bandwidth, const Interval& interval, double lambda) {
  check_dim(dim);
  if (static_cast<int>(interval.size()) != dim) {
    throw InputError("interval dimension does not match dim");
  }
  if (!(bandwidth > 0.0)) throw InputError("bandwidth must be positive");
  if (!(lambda > 0.0)) throw InputError("kernel lambda must be positive");
  const double mes = measure(interval);

  if (dim == 1) {
    // Closed form: a_n = {2 log(h^{-1}(b-a)) + 2 log(sqrt(lambda)/(2pi))}^{1/2},
    // valid when log(h^{-1}(b-a)) is positive.
    if (!(mes / bandwidth > 1.0)) {
      throw NumericError("bandwidth exceeds the interval length; no valid a_n "
                         "(use a smaller bandwidth)");
    }
    const double a2 = 2.0 * std::log(mes / bandwidth) + 2.0 * std::log(std::sqrt(lambda) / kTwoPi);
    if (!(a2 > 0.0)) {
      throw NumericError("no valid a_n: bandwidth too large relative to the interval "
                         "(use a smaller bandwidth)");
    }
    return std::sqrt(a2);
  }

  const double kappa = mes * std::pow(bandwidth, -dim) * std::pow(lambda, 0.5 * dim) *
                       std::pow(kTwoPi, -0.5 * (dim + 1));
  return solve_b1_largest_root(kappa, dim);
}

double leading_term_cdf(double t, double a_n, int dim, bool two_sided) {
  check_dim(dim);
  const double k = two_sided ? 2.0 : 1.0;
  const double g = t + t * t / (2.0 * a_n * a_n);
  return std::exp(-k * std::exp(-g)) * poly_factor(t, a_n, dim);
}

double critical_two_sided(double alpha, double a_n, int dim) {
  check_alpha(alpha);
  check_dim(dim);
  if (!(a_n > 0.0)) throw InputError("a_n must be positive");
  if (dim == 1) {
    const double c2 = a_n * a_n + 2.0 * two_sided_shift(alpha);
    if (!(c2 > 0.0)) {
      throw NumericError("confidence level unattainable: a_n^2 <= 2 log log[(1-alpha)^{-1/2}]");
    }
    return std::sqrt(c2);
  }
  const double t = invert_leading_term(1.0 - alpha, a_n, dim, true);
  return a_n + t / a_n;
}

double critical_one_sided(double alpha, double a_n, int dim) {
  check_alpha(alpha);
  check_dim(dim);
  if (!(a_n > 0.0)) throw InputError("a_n must be positive");
  if (dim == 1) {
    const double c2 = a_n * a_n + 2.0 * one_sided_shift(alpha);
    if (!(c2 > 0.0)) {
      throw NumericError("confidence level unattainable: a_n^2 <= 2 log log[(1-alpha)^{-1}]");
    }
    return std::sqrt(c2);
  }
  const double t = invert_leading_term(1.0 - alpha, a_n, dim, false);
  return a_n + t / a_n;
}

double critical_gumbel(double alpha, double a_n) {
  check_alpha(alpha);
  if (!(a_n > 0.0)) throw InputError("a_n must be positive");
  return a_n + two_sided_shift(alpha) / a_n;
}

double critical_gumbel_one_sided(double alpha, double a_n) {
  check_alpha(alpha);
  if (!(a_n > 0.0)) throw InputError("a_n must be positive");
  return a_n + one_sided_shift(alpha) / a_n;
}

double critical_pointwise(double alpha) {
  check_alpha(alpha);
  return norm_quantile(1.0 - 0.5 * alpha);
}

double critical_pointwise_one_sided(double alpha) {
  check_alpha(alpha);
  return norm_quantile(1.0 - alpha);
}

BandProfile compute_band_profile(const PseudoOutcome& psi, const Dataset& data,
                                 const SmootherConfig& cfg, const Interval& interval,
                                 int grid_points) {
  validate_config(cfg);
  const int dim = cfg.dim;
  if (data.dim_x() != dim) throw InputError("dataset x_cols dimension does not match config");
  if (static_cast<int>(interval.size()) != dim) throw InputError("interval dimension mismatch");
  if (grid_points < 2) throw InputError("grid_points must be >= 2");

  const Eigen::MatrixXd x = x_matrix(data);
  for (int j = 0; j < dim; ++j) {
    const auto& [a, b] = interval[static_cast<std::size_t>(j)];
    if (!(a < b)) throw InputError("interval must satisfy a < b");
    if (a < x.col(j).minCoeff() || b > x.col(j).maxCoeff()) {
      throw InputError("interval of interest extends beyond the data range of X in coordinate " +
                       std::to_string(j));
    }
  }

  BandProfile profile;
  profile.dim = dim;
  profile.interval = interval;
  profile.bandwidth = cfg.bandwidth;
  profile.n = data.n();
  profile.a_n = compute_a_n(dim, cfg.bandwidth, interval, cfg.kernel.lambda);

  // Cartesian grid, last coordinate fastest.
  Eigen::Index total = 1;
  for (int j = 0; j < dim; ++j) total *= grid_points;
  profile.grid.resize(total, dim);
  for (Eigen::Index row = 0; row < total; ++row) {
    Eigen::Index rem = row;
    for (int j = dim - 1; j >= 0; --j) {
      const Eigen::Index k = rem % grid_points;
      rem /= grid_points;
      const auto& [a, b] = interval[static_cast<std::size_t>(j)];
      profile.grid(row, j) =
          a + (b - a) * static_cast<double>(k) / static_cast<double>(grid_points - 1);
    }
  }

  const Eigen::VectorXd g_at_data = smooth_at_data(psi.psi, x, cfg);
  profile.g_hat.resize(total);
  profile.se.resize(total);
  for (Eigen::Index row = 0; row < total; ++row) {
    const PointEstimate point =
        evaluate_point(psi.psi, x, cfg, g_at_data, psi.dim_theta, profile.grid.row(row).transpose());
    profile.g_hat[row] = point.g_hat;
    profile.se[row] = point.se;
  }
  return profile;
}

BandResult apply_critical(const BandProfile& profile, BandFlavor flavor, BandSide side,
                          double alpha) {
  double critical = 0.0;
  const bool two = (side == BandSide::two_sided);
  switch (flavor) {
    case BandFlavor::uniform:
      critical = two ? critical_two_sided(alpha, profile.a_n, profile.dim)
                     : critical_one_sided(alpha, profile.a_n, profile.dim);
      break;
    case BandFlavor::gumbel:
      critical = two ? critical_gumbel(alpha, profile.a_n)
                     : critical_gumbel_one_sided(alpha, profile.a_n);
      break;
    case BandFlavor::pointwise:
      critical = two ? critical_pointwise(alpha) : critical_pointwise_one_sided(alpha);
      break;
  }

  BandResult band;
  band.grid = profile.grid;
  band.g_hat = profile.g_hat;
  band.se = profile.se;
  band.a_n = profile.a_n;
  band.critical = critical;
  band.bandwidth = profile.bandwidth;
  band.alpha = alpha;
  band.flavor = flavor;
  band.side = side;

  const Eigen::VectorXd margin = critical * profile.se;
  const double inf = std::numeric_limits<double>::infinity();
  switch (side) {
    case BandSide::two_sided:
      band.lower = profile.g_hat - margin;
      band.upper = profile.g_hat + margin;
      break;
    case BandSide::lower:
      band.lower = profile.g_hat - margin;
      band.upper = Eigen::VectorXd::Constant(profile.g_hat.size(), inf);
      break;
    case BandSide::upper:
      band.lower = Eigen::VectorXd::Constant(profile.g_hat.size(), -inf);
      band.upper = profile.g_hat + margin;
      break;
  }
  return band;
}

BandResult assemble_band(const PseudoOutcome& psi, const Dataset& data,
                         const SmootherConfig& cfg, const BandSpec& spec) {
  const BandProfile profile =
      compute_band_profile(psi, data, cfg, spec.interval, spec.grid_points);
  return apply_critical(profile, spec.flavor, spec.side, spec.alpha);
}

ConstancyTest constancy_test(const BandResult& band, const PseudoOutcome& psi,
                             const Dataset& data, const Interval& interval) {
  if (band.flavor != BandFlavor::uniform || band.side != BandSide::two_sided) {
    throw InputError("constancy test requires a two-sided uniform band");
  }
  const Eigen::MatrixXd x = x_matrix(data);
  if (static_cast<Eigen::Index>(interval.size()) != x.cols()) {
    throw InputError("interval dimension mismatch");
  }

  double sum = 0.0;
  Eigen::Index count = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    bool inside = true;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const auto& [a, b] = interval[static_cast<std::size_t>(j)];
      if (x(i, j) < a || x(i, j) > b) {
        inside = false;
        break;
      }
    }
    if (inside) {
      sum += psi.psi[i];
      ++count;
    }
  }
  if (count == 0) throw NumericError("no observations inside the interval of interest");

  ConstancyTest out;
  out.g_interval = sum / static_cast<double>(count);
  out.reject = false;
  for (Eigen::Index row = 0; row < band.grid.rows(); ++row) {
    if (out.g_interval < band.lower[row] || out.g_interval > band.upper[row]) {
      out.reject = true;
      break;
    }
  }
  return out;
}

} // namespace catef
