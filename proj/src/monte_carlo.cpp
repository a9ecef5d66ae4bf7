#include "catef/monte_carlo.hpp"

#include "catef/bandwidth.hpp"
#include "catef/errors.hpp"
#include "catef/first_stage.hpp"
#include "catef/local_linear.hpp"
#include "catef/pseudo_outcome.hpp"
#include "catef/uniform_band.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <thread>

namespace catef {

namespace {

constexpr std::array<Estimator, 3> kEstimators = {Estimator::dr, Estimator::ipw, Estimator::ra};

struct RepRow {
  bool ok = false;
  std::string error;
  std::array<std::vector<double>, 3> g;  // [estimator][eval point]
  std::array<std::vector<double>, 3> se;
  double bandwidth_dr = 0.0;
  double a_n = 0.0;
  std::vector<double> crit;            // per alpha level
  std::vector<char> covered;           // per alpha level
  std::vector<char> gumbel_covered;    // per alpha level
  std::vector<char> constancy_reject;  // per alpha level
};

void validate_config(const McConfig& cfg) {
  if (cfg.p < 2 || cfg.p % 2 != 0) throw InputError("p must be even and >= 2");
  if (cfg.n < 1) throw InputError("n must be >= 1");
  if (cfg.reps < 1) throw InputError("reps must be >= 1");
  if (cfg.eval_points.empty()) throw InputError("eval_points must be nonempty");
  for (const double a : cfg.alpha_levels) {
    if (!(a > 0.0 && a < 1.0)) throw InputError("alpha levels must be in (0, 1)");
  }
  if (!(cfg.coverage_interval[0] < cfg.coverage_interval[1])) {
    throw InputError("coverage interval must satisfy a < b");
  }
  if (cfg.coverage_grid < 2) throw InputError("coverage grid must have >= 2 points");
  if (!(cfg.trim_eps >= 0.0 && cfg.trim_eps < 0.5)) throw InputError("trim_eps must be in [0, 0.5)");
}

RepRow simulate_rep(const McConfig& cfg, const DesignSpec& reg_spec, const DesignSpec& ps_spec,
                    std::uint64_t rep_seed) {
  RepRow row;
  const std::size_t n_eval = cfg.eval_points.size();
  const std::size_t n_alpha = cfg.alpha_levels.size();
  try {
    Rng rng(rep_seed);
    const Dataset data = generate_dgp(cfg.p, cfg.n, rng);
    const FirstStageFit fit = fit_first_stage(data, reg_spec, ps_spec);
    const Eigen::MatrixXd x = x_matrix(data);
    const KernelSpec kernel = make_kernel(cfg.kernel);

    // Restrict the plug-in bandwidth so the band's level equation keeps a
    // valid root over the coverage interval.
    const Interval band_interval = {{cfg.coverage_interval[0], cfg.coverage_interval[1]}};
    const double h_cap = 0.99 * max_valid_bandwidth(1, band_interval, kernel.lambda);

    for (std::size_t e = 0; e < kEstimators.size(); ++e) {
      const PseudoOutcome psi = compute_psi(data, fit, kEstimators[e], cfg.trim_eps);
      const PluginState plugin = select_bandwidth(x.col(0), psi.psi);
      const SmootherConfig scfg{kernel, std::min(plugin.h_n, h_cap), 1};
      const Eigen::VectorXd g_at_data = smooth_at_data(psi.psi, x, scfg);

      row.g[e].resize(n_eval);
      row.se[e].resize(n_eval);
      Eigen::VectorXd x0(1);
      for (std::size_t k = 0; k < n_eval; ++k) {
        x0[0] = cfg.eval_points[k];
        const PointEstimate point =
            evaluate_point(psi.psi, x, scfg, g_at_data, psi.dim_theta, x0);
        row.g[e][k] = point.g_hat;
        row.se[e][k] = point.se;
      }

      if (kEstimators[e] != Estimator::dr) continue;

      // Uniform band coverage over the interval of interest.
      row.bandwidth_dr = scfg.bandwidth;
      row.a_n = compute_a_n(1, scfg.bandwidth, band_interval, kernel.lambda);

      const double a = cfg.coverage_interval[0];
      const double b = cfg.coverage_interval[1];
      const int m = cfg.coverage_grid;
      Eigen::VectorXd grid_g(m), grid_se(m), grid_x(m);
      double sup_t = 0.0;
      for (int k = 0; k < m; ++k) {
        x0[0] = a + (b - a) * static_cast<double>(k) / static_cast<double>(m - 1);
        const PointEstimate point =
            evaluate_point(psi.psi, x, scfg, g_at_data, psi.dim_theta, x0);
        grid_x[k] = x0[0];
        grid_g[k] = point.g_hat;
        grid_se[k] = point.se;
        const double t = std::fabs(point.g_hat - true_catef(cfg.p, x0[0])) / point.se;
        sup_t = std::max(sup_t, t);
      }

      double g_interval_sum = 0.0;
      Eigen::Index g_interval_count = 0;
      for (Eigen::Index i = 0; i < data.n(); ++i) {
        if (x(i, 0) >= a && x(i, 0) <= b) {
          g_interval_sum += psi.psi[i];
          ++g_interval_count;
        }
      }
      if (g_interval_count == 0) throw NumericError("no observations inside coverage interval");
      const double g_interval = g_interval_sum / static_cast<double>(g_interval_count);

      row.crit.resize(n_alpha);
      row.covered.resize(n_alpha);
      row.gumbel_covered.resize(n_alpha);
      row.constancy_reject.resize(n_alpha);
      for (std::size_t l = 0; l < n_alpha; ++l) {
        const double alpha = cfg.alpha_levels[l];
        const double crit = critical_two_sided(alpha, row.a_n, 1);
        const double gcrit = critical_gumbel(alpha, row.a_n);
        row.crit[l] = crit;
        row.covered[l] = (sup_t <= crit);
        row.gumbel_covered[l] = (sup_t <= gcrit);
        bool reject = false;
        for (int k = 0; k < m && !reject; ++k) {
          reject = (g_interval < grid_g[k] - crit * grid_se[k]) ||
                   (g_interval > grid_g[k] + crit * grid_se[k]);
        }
        row.constancy_reject[l] = reject;
      }
    }
    row.ok = true;
  } catch (const std::exception& err) {
    row.ok = false;
    row.error = err.what();
  }
  return row;
}

} // namespace

Scenario scenario_from_string(const std::string& name) {
  if (name == "tt") return Scenario::tt;
  if (name == "tf") return Scenario::tf;
  if (name == "ft") return Scenario::ft;
  if (name == "ff") return Scenario::ff;
  throw InputError("unknown scenario '" + name + "' (expected tt|tf|ft|ff)");
}

std::string to_string(Scenario scenario) {
  switch (scenario) {
    case Scenario::tt: return "tt";
    case Scenario::tf: return "tf";
    case Scenario::ft: return "ft";
    case Scenario::ff: return "ff";
  }
  return "tt";
}

double true_catef(int p, double x1) { return 10.0 + x1 / std::sqrt(static_cast<double>(p)); }

Dataset generate_dgp(int p, Eigen::Index n, Rng& rng) {
  if (p < 2 || p % 2 != 0) throw InputError("p must be even and >= 2");
  Eigen::MatrixXd z(n, p);
  Eigen::VectorXd y(n), d(n);
  const double load = 1.0 / std::sqrt(static_cast<double>(p));
  const double ps_load = 1.0 / std::sqrt(static_cast<double>(p) / 2.0);
  // Propensity index sums Z_k for k = p/2 .. p (1-based, p/2 + 1 terms).
  const int ps_first = p / 2 - 1;

  for (Eigen::Index i = 0; i < n; ++i) {
    double y1 = 10.0;
    for (int k = 0; k < p; ++k) {
      const double zik = rng.normal();
      z(i, k) = zik;
      y1 += load * zik;
    }
    y1 += rng.normal(); // v
    double index = 0.0;
    for (int k = ps_first; k < p; ++k) index += z(i, k);
    const double u = rng.uniform();
    d[i] = (logistic(ps_load * index) > u) ? 1.0 : 0.0;
    y[i] = d[i] * y1;
  }
  return make_dataset(std::move(y), std::move(d), std::move(z), {0});
}

std::pair<DesignSpec, DesignSpec> scenario_specs(Scenario scenario, int p) {
  if (p < 2 || p % 2 != 0) throw InputError("p must be even and >= 2");
  auto full = [p]() {
    DesignSpec spec;
    spec.add_intercept = true;
    for (int k = 0; k < p; ++k) spec.base_cols.push_back(k);
    return spec;
  };
  auto half = [p]() {
    DesignSpec spec;
    spec.add_intercept = true;
    for (int k = 0; k < p / 2; ++k) spec.base_cols.push_back(k);
    return spec;
  };
  switch (scenario) {
    case Scenario::tt: return {full(), full()};
    case Scenario::tf: return {half(), full()}; // true propensity, false regression
    case Scenario::ft: return {full(), half()}; // false propensity, true regression
    case Scenario::ff: return {half(), half()};
  }
  throw InputError("unknown scenario");
}

McReport run_replications(const McConfig& cfg) {
  validate_config(cfg);
  const auto [reg_spec, ps_spec] = scenario_specs(cfg.scenario, cfg.p);

  std::vector<RepRow> rows(static_cast<std::size_t>(cfg.reps));
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  const int workers = std::max(
      1, std::min(cfg.reps, (cfg.threads > 0) ? cfg.threads : static_cast<int>(hw)));

  auto work = [&](int worker) {
    for (int rep = worker; rep < cfg.reps; rep += workers) {
      const std::uint64_t rep_seed =
          splitmix64(cfg.seed ^ splitmix64(static_cast<std::uint64_t>(rep)));
      rows[static_cast<std::size_t>(rep)] = simulate_rep(cfg, reg_spec, ps_spec, rep_seed);
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (std::thread& t : pool) t.join();
  }

  McReport report;
  report.config = cfg;
  const std::size_t n_eval = cfg.eval_points.size();
  const std::size_t n_alpha = cfg.alpha_levels.size();

  for (const RepRow& row : rows) {
    if (row.ok) {
      ++report.completed;
    } else {
      ++report.failures;
      if (report.first_error.empty()) report.first_error = row.error;
    }
  }
  if (report.failures * 20 > cfg.reps) {
    throw NumericError("replication failure rate above 5% (" + std::to_string(report.failures) +
                       " of " + std::to_string(cfg.reps) + "); first error: " +
                       report.first_error);
  }
  const double denom = static_cast<double>(report.completed);

  for (std::size_t e = 0; e < kEstimators.size(); ++e) {
    report.estimates[e].resize(n_eval);
    for (std::size_t k = 0; k < n_eval; ++k) {
      const double truth = true_catef(cfg.p, cfg.eval_points[k]);
      double err_sum = 0.0, err2_sum = 0.0, se_sum = 0.0;
      for (const RepRow& row : rows) {
        if (!row.ok) continue;
        const double err = row.g[e][k] - truth;
        err_sum += err;
        err2_sum += err * err;
        se_sum += row.se[e][k];
      }
      EstimatorMetrics& cell = report.estimates[e][k];
      cell.bias = err_sum / denom;
      cell.rmse = std::sqrt(err2_sum / denom);
      cell.sd = std::sqrt(std::max(0.0, cell.rmse * cell.rmse - cell.bias * cell.bias));
      cell.ase = se_sum / denom;
    }
  }

  report.coverage.resize(n_alpha);
  for (std::size_t l = 0; l < n_alpha; ++l) {
    double cov = 0.0, gcov = 0.0, crit_sum = 0.0, crit2_sum = 0.0, reject = 0.0;
    for (const RepRow& row : rows) {
      if (!row.ok) continue;
      cov += row.covered[l];
      gcov += row.gumbel_covered[l];
      crit_sum += row.crit[l];
      crit2_sum += row.crit[l] * row.crit[l];
      reject += row.constancy_reject[l];
    }
    CoverageMetrics& cell = report.coverage[l];
    cell.cp = cov / denom;
    cell.gcp = gcov / denom;
    cell.mcri = crit_sum / denom;
    cell.sdcri = std::sqrt(std::max(0.0, crit2_sum / denom - cell.mcri * cell.mcri));
    cell.constancy_reject_rate = reject / denom;
  }

  double h_sum = 0.0, a_sum = 0.0;
  for (const RepRow& row : rows) {
    if (!row.ok) continue;
    h_sum += row.bandwidth_dr;
    a_sum += row.a_n;
  }
  report.mean_bandwidth = h_sum / denom;
  report.mean_a_n = a_sum / denom;
  return report;
}

std::string estimates_csv(const McReport& report) {
  std::string out = "scenario,x,estimator,bias,sd,ase,rmse\n";
  char line[256];
  const std::string scenario = to_string(report.config.scenario);
  for (std::size_t k = 0; k < report.config.eval_points.size(); ++k) {
    for (std::size_t e = 0; e < kEstimators.size(); ++e) {
      const EstimatorMetrics& cell = report.estimates[e][k];
      std::snprintf(line, sizeof(line), "%s,%g,%s,%.6f,%.6f,%.6f,%.6f\n", scenario.c_str(),
                    report.config.eval_points[k], to_string(kEstimators[e]).c_str(), cell.bias,
                    cell.sd, cell.ase, cell.rmse);
      out += line;
    }
  }
  return out;
}

std::string coverage_csv(const McReport& report) {
  std::string out = "scenario,level,cp,mcri,sdcri,gcp\n";
  char line[256];
  const std::string scenario = to_string(report.config.scenario);
  for (std::size_t l = 0; l < report.config.alpha_levels.size(); ++l) {
    const CoverageMetrics& cell = report.coverage[l];
    std::snprintf(line, sizeof(line), "%s,%g,%.6f,%.6f,%.6f,%.6f\n", scenario.c_str(),
                  1.0 - report.config.alpha_levels[l], cell.cp, cell.mcri, cell.sdcri, cell.gcp);
    out += line;
  }
  return out;
}

} // namespace catef
