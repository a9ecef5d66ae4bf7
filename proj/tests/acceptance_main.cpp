// Acceptance suite: one pass/fail line per criterion, exit code = number of
// failed criteria. Run with --cli <path-to-catefband> so the determinism
// criterion can invoke the command line tool.

#include "catef/bandwidth.hpp"
#include "catef/dataset.hpp"
#include "catef/first_stage.hpp"
#include "catef/kernels.hpp"
#include "catef/local_linear.hpp"
#include "catef/monte_carlo.hpp"
#include "catef/pseudo_outcome.hpp"
#include "catef/stats.hpp"
#include "catef/uniform_band.hpp"

#include "oracles.hpp"

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

using namespace catef;
namespace fs = std::filesystem;

namespace {

std::map<int, std::pair<bool, std::string>> g_lines;
std::vector<std::pair<bool, std::string>> g_extra;

void record(int criterion, bool pass, const std::string& detail) {
  g_lines[criterion] = {pass, detail};
  std::fprintf(stderr, "[acceptance] criterion %d %s\n", criterion, pass ? "done" : "FAILED");
}

std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  return buf;
}

// --- criterion 3 -----------------------------------------------------------

void criterion_critical_exactness() {
  Rng rng(3001);
  const double lambdas[3] = {0.5, 2.5, 3.0};
  double worst_b1 = 0.0, worst_two = 0.0, worst_one = 0.0;
  int count = 0;
  bool pass = true;
  std::string first_failure;
  for (int trial = 0; trial < 1000; ++trial) {
    const int dim = 1 + static_cast<int>(rng.uniform() * 3.0);
    const double h = 0.02 + 0.18 * rng.uniform();
    const double alpha = 0.01 + 0.49 * rng.uniform();
    const double lambda = lambdas[trial % 3];
    Interval interval;
    for (int j = 0; j < dim; ++j) interval.push_back({-1.0, 1.0});
    try {
      const double a_n = compute_a_n(dim, h, interval, lambda);
      const double mes = std::pow(2.0, dim);
      const double lhs = mes * std::pow(h, -dim) * std::pow(lambda, 0.5 * dim) *
                         std::pow(6.2831853071795864769, -0.5 * (dim + 1)) *
                         std::pow(a_n, dim - 1) * std::exp(-0.5 * a_n * a_n);
      worst_b1 = std::max(worst_b1, std::fabs(lhs - 1.0));

      const double c2 = critical_two_sided(alpha, a_n, dim);
      const double r2 =
          std::fabs(leading_term_cdf(a_n * (c2 - a_n), a_n, dim, true) - (1.0 - alpha));
      worst_two = std::max(worst_two, r2);

      const double c1 = critical_one_sided(alpha, a_n, dim);
      const double r1 =
          std::fabs(leading_term_cdf(a_n * (c1 - a_n), a_n, dim, false) - (1.0 - alpha));
      worst_one = std::max(worst_one, r1);
      ++count;
    } catch (const std::exception& e) {
      pass = false;
      if (first_failure.empty()) first_failure = e.what();
    }
  }
  pass = pass && worst_b1 <= 1e-10 && worst_two <= 1e-10 && worst_one <= 1e-10 && count == 1000;
  std::string detail =
      fmt("critical-value exactness over %d tuples: max |b1 lhs - 1| = %.2e, "
          "max two-sided |F(c)-(1-a)| = %.2e, one-sided %.2e (tolerance 1e-10)",
          count, worst_b1, worst_two, worst_one);
  if (!first_failure.empty()) detail += "; first error: " + first_failure;
  record(3, pass, detail);
}

// --- criterion 4 -----------------------------------------------------------

void criterion_kernel_constants() {
  struct Row {
    KernelKind kind;
    const char* name;
    double stated; // acceptance literals
  };
  const Row rows[3] = {{KernelKind::gaussian, "gaussian", 0.5},
                       {KernelKind::biweight, "biweight", 1.98},
                       {KernelKind::epanechnikov, "epanechnikov", 2.5}};
  bool pass = true;
  std::string detail = "kernel-constant oracle:";
  for (const Row& row : rows) {
    const KernelSpec spec = make_kernel(row.kind);
    const double support = (row.kind == KernelKind::gaussian) ? 10.0 : 1.0;
    const double r_k = oracle::simpson(
        [&](double u) { return eval_kernel(spec, u) * eval_kernel(spec, u); }, -support, support);
    const double eps = 1e-5;
    const double kprime2 = oracle::simpson(
        [&](double u) {
          const double d = (eval_kernel(spec, u + eps) - eval_kernel(spec, u - eps)) / (2.0 * eps);
          return d * d;
        },
        -support, support);
    const double quad_lambda = kprime2 / r_k;
    // Step 1e-4 keeps the |s|^3 term of the compact-kernel correlations out
    // of the second difference.
    const double rho_curv = -oracle::second_derivative(
        [&](double s) { return rho(spec, s); }, 0.0, 1e-4);

    const bool quad_ok = std::fabs(quad_lambda - row.stated) <= 1e-3;
    const bool rho_ok = std::fabs(rho_curv - kernel_lambda(spec)) <= 1e-3;
    pass = pass && quad_ok && rho_ok;
    detail += fmt(" %s: quadrature %.4f vs stated %.4g (%s), -rho''(0) %.4f vs lambda %.4g (%s);",
                  row.name, quad_lambda, row.stated, quad_ok ? "ok" : "MISMATCH", rho_curv,
                  kernel_lambda(spec), rho_ok ? "ok" : "MISMATCH");
  }
  if (!pass) {
    detail += " note: the defining integral -int K K''/int K^2 for the standard biweight "
              "evaluates to exactly 3, not 1.98; the library stores 3.";
  }
  record(4, pass, detail);
}

// --- criterion 5 -----------------------------------------------------------

void criterion_smoother_properties() {
  Rng rng(5001);
  const KernelSpec gauss = make_kernel(KernelKind::gaussian);
  double worst_affine = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index n = 30 + static_cast<Eigen::Index>(rng.uniform() * 70);
    Eigen::MatrixXd x(n, 1);
    Eigen::VectorXd psi(n);
    const double a = 5.0 * rng.normal();
    const double b = 3.0 * rng.normal();
    for (Eigen::Index i = 0; i < n; ++i) {
      x(i, 0) = 2.0 * rng.normal();
      psi[i] = a + b * x(i, 0);
    }
    const SmootherConfig cfg{gauss, 0.1 + rng.uniform(), 1};
    Eigen::VectorXd x0(1);
    x0 << 2.0 * rng.uniform() - 1.0;
    const LocalFit fit = fit_local_linear(psi, x, cfg, x0);
    worst_affine = std::max(worst_affine, std::fabs(fit.value - (a + b * x0[0])));
    worst_affine = std::max(worst_affine, std::fabs(fit.slope[0] - b));
  }

  double worst_wls = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index n = 50 + static_cast<Eigen::Index>(rng.uniform() * 150);
    Eigen::MatrixXd x(n, 1);
    Eigen::VectorXd psi(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      x(i, 0) = rng.normal();
      psi[i] = std::cos(3.0 * x(i, 0)) + rng.normal();
    }
    const SmootherConfig cfg{gauss, 0.15 + 0.5 * rng.uniform(), 1};
    const double x0v = rng.normal() * 0.5;
    Eigen::VectorXd x0(1);
    x0 << x0v;
    const LocalFit fit = fit_local_linear(psi, x, cfg, x0);

    Eigen::MatrixXd design(n, 2);
    Eigen::VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      design(i, 0) = 1.0;
      design(i, 1) = x(i, 0) - x0v;
      w[i] = eval_kernel(gauss, (x(i, 0) - x0v) / cfg.bandwidth);
    }
    const Eigen::VectorXd gamma = oracle::weighted_least_squares_svd(design, psi, w);
    worst_wls = std::max(worst_wls, std::fabs(fit.value - gamma[0]));
    worst_wls = std::max(worst_wls, std::fabs(fit.slope[0] - gamma[1]));
  }

  // Standard error scaling and positivity.
  bool se_ok = true;
  for (int trial = 0; trial < 100; ++trial) {
    const SmootherConfig cfg{gauss, 0.05 + rng.uniform(), 1};
    const double sigma2 = rng.uniform() + 1e-8;
    const double f_hat = rng.uniform() + 1e-8;
    const Eigen::Index n = 100 + static_cast<Eigen::Index>(rng.uniform() * 1000);
    const double se_n = standard_error(sigma2, f_hat, n, cfg);
    const double se_2n = standard_error(sigma2, f_hat, 2 * n, cfg);
    se_ok = se_ok && se_n > 0.0 &&
            std::fabs(se_n * se_n / (se_2n * se_2n) - 2.0) <= 1e-12;
  }

  const bool pass = worst_affine <= 1e-8 && worst_wls <= 1e-8 && se_ok;
  record(5, pass,
         fmt("smoother properties: affine reproduction max err %.2e, WLS-oracle max err %.2e "
             "(tolerance 1e-8), se scaling/positivity %s",
             worst_affine, worst_wls, se_ok ? "ok" : "FAILED"));
}

// --- criterion 6 -----------------------------------------------------------

void criterion_double_robustness() {
  const int p = 10;
  const Eigen::Index n = 5000;
  Rng rng(6000);
  const Dataset data = generate_dgp(p, n, rng);
  const auto [reg_true, ps_true] = scenario_specs(Scenario::tt, p);
  const auto [reg_false, ps_false] = scenario_specs(Scenario::ff, p);

  auto dr_mean = [&](const DesignSpec& reg, const DesignSpec& ps, double* mc_se) {
    const FirstStageFit fit = fit_first_stage(data, reg, ps);
    const PseudoOutcome dr = compute_psi_dr(data, fit, 0.01);
    if (mc_se) {
      *mc_se = std::sqrt((dr.psi.array() - dr.psi.mean()).square().mean() /
                         static_cast<double>(n));
    }
    return estimate_ate(dr);
  };

  double se_tf = 0.0, se_ft = 0.0;
  const double mean_tf = dr_mean(reg_false, ps_true, &se_tf); // true PS, false regression
  const double mean_ft = dr_mean(reg_true, ps_false, &se_ft); // false PS, true regression
  const double mean_ff = dr_mean(reg_false, ps_false, nullptr);

  const bool tf_ok = std::fabs(mean_tf - 10.0) <= 4.0 * se_tf;
  const bool ft_ok = std::fabs(mean_ft - 10.0) <= 4.0 * se_ft;
  const bool ff_ok = (mean_ff - 10.0) >= 0.25;
  record(6, tf_ok && ft_ok && ff_ok,
         fmt("double robustness at n=5000: TF mean %.4f (4 mc-se %.4f) %s, FT mean %.4f "
             "(4 mc-se %.4f) %s, FF bias %.4f >= 0.25 %s",
             mean_tf, 4.0 * se_tf, tf_ok ? "ok" : "FAILED", mean_ft, 4.0 * se_ft,
             ft_ok ? "ok" : "FAILED", mean_ff - 10.0, ff_ok ? "ok" : "FAILED"));
}

// --- criterion 7 -----------------------------------------------------------

void criterion_bandwidth_oracle() {
  Rng rng(42);
  const Eigen::Index n = 200;
  Eigen::VectorXd x(n), psi(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x[i] = 3.0 * rng.uniform();
    psi[i] = std::sin(2.0 * x[i]) + 0.3 * rng.normal();
  }
  const PluginState state = select_bandwidth(x, psi);
  const oracle::DpillReference ref =
      oracle::dpill_reference(std::vector<double>(x.data(), x.data() + n),
                              std::vector<double>(psi.data(), psi.data() + n));
  const double rel = std::fabs(state.h_dpi - ref.h) / ref.h;
  const bool identity = (state.h_n == state.h_dpi * undersmooth_factor(n));
  const bool pass = rel <= 1e-6 && identity;
  record(7, pass,
         fmt("plug-in bandwidth vs reference: h_dpi %.8f vs %.8f (rel diff %.2e, tol 1e-6); "
             "undersmoothing identity h_n/h_dpi = n^{-3/35} %s",
             state.h_dpi, ref.h, rel, identity ? "exact" : "VIOLATED"));
}

// --- criteria 1 and 2 ------------------------------------------------------

McReport run_scenario(Scenario scenario, int reps, std::uint64_t seed) {
  McConfig cfg;
  cfg.p = 10;
  cfg.n = 500;
  cfg.reps = reps;
  cfg.seed = seed;
  cfg.scenario = scenario;
  return run_replications(cfg);
}

void criteria_tables(int reps, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  const McReport tt = run_scenario(Scenario::tt, reps, seed);
  const McReport ff = run_scenario(Scenario::ff, reps, seed);
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::fprintf(stderr, "[acceptance] tt+ff scenarios took %.1f s\n", elapsed);
  const McReport tf = run_scenario(Scenario::tf, reps, seed);
  const McReport ft = run_scenario(Scenario::ft, reps, seed);

  // Index of x = 0 among the eval points and alpha = 0.05 among the levels.
  const std::size_t at_zero = 2;
  const std::size_t at_05 = 1;
  const EstimatorMetrics& dr0 = tt.estimates[0][at_zero];
  const EstimatorMetrics& ipw0 = tt.estimates[1][at_zero];
  const EstimatorMetrics& dr0_ff = ff.estimates[0][at_zero];

  const bool bias_ok = std::fabs(dr0.bias) <= 0.02;
  const bool sd_ok = std::fabs(dr0.sd - 0.178) <= 0.03;
  const bool ase_ok = std::fabs(dr0.ase - 0.156) <= 0.03;
  const bool ff_bias_ok = std::fabs(dr0_ff.bias - 0.295) <= 0.03;
  const bool ipw_ok = ipw0.sd >= 3.0 * dr0.sd;
  const bool time_ok = elapsed <= 600.0;
  record(1, bias_ok && sd_ok && ase_ok && ff_bias_ok && ipw_ok && time_ok,
         fmt("estimator table at x=0 (tt): DR bias %.4f (<=0.02 %s), sd %.4f vs 0.178 (%s), "
             "ase %.4f vs 0.156 (%s); ff DR bias %.4f vs 0.295 (%s); IPW sd %.4f >= 3x DR sd "
             "(%s); tt+ff runtime %.0f s (<=600 %s)",
             dr0.bias, bias_ok ? "ok" : "FAIL", dr0.sd, sd_ok ? "ok" : "FAIL", dr0.ase,
             ase_ok ? "ok" : "FAIL", dr0_ff.bias, ff_bias_ok ? "ok" : "FAIL", ipw0.sd,
             ipw_ok ? "ok" : "FAIL", elapsed, time_ok ? "ok" : "FAIL"));

  const CoverageMetrics& cov_tt = tt.coverage[at_05];
  const CoverageMetrics& cov_ff = ff.coverage[at_05];
  const bool cp_ok = std::fabs(cov_tt.cp - 0.939) <= 0.03;
  const bool mcri_ok = std::fabs(cov_tt.mcri - 2.750) <= 0.05;
  const bool gcp_ok = cov_tt.gcp >= 0.99;
  const bool sdcri_ok = cov_tt.sdcri <= 0.15;
  const bool ff_cp_ok = cov_ff.cp <= 0.40;
  record(2, cp_ok && mcri_ok && gcp_ok && sdcri_ok && ff_cp_ok,
         fmt("coverage at 95%% (tt): CP %.3f vs 0.939 (%s), Mcri %.4f vs 2.750 (%s), "
             "GCP %.3f >= 0.99 (%s), Sdcri %.3f <= 0.15 (%s); ff CP %.3f <= 0.40 (%s)",
             cov_tt.cp, cp_ok ? "ok" : "FAIL", cov_tt.mcri, mcri_ok ? "ok" : "FAIL", cov_tt.gcp,
             gcp_ok ? "ok" : "FAIL", cov_tt.sdcri, sdcri_ok ? "ok" : "FAIL", cov_ff.cp,
             ff_cp_ok ? "ok" : "FAIL"));

  // Module invariant (not a numbered criterion): coverage under any partly
  // correct specification beats the doubly false one by at least 0.2.
  const bool mono = (tt.coverage[at_05].cp >= cov_ff.cp + 0.2) &&
                    (tf.coverage[at_05].cp >= cov_ff.cp + 0.2) &&
                    (ft.coverage[at_05].cp >= cov_ff.cp + 0.2);
  g_extra.emplace_back(mono, fmt("scenario coverage monotonicity: tt %.3f tf %.3f ft %.3f vs "
                                 "ff %.3f + 0.2",
                                 tt.coverage[at_05].cp, tf.coverage[at_05].cp,
                                 ft.coverage[at_05].cp, cov_ff.cp));
}

// --- criterion 8 -----------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void criterion_determinism(const std::string& cli) {
  if (cli.empty()) {
    record(8, false, "determinism: no --cli <path> given");
    return;
  }
  const fs::path dir = fs::temp_directory_path() / "catefband_acceptance_mc";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string base = cli + " mc --p 10 --n 500 --reps 25 --seed 77 --scenario tt";
  const fs::path out1 = dir / "a";
  const fs::path out2 = dir / "b";
  const fs::path out4 = dir / "c";
  bool pass = true;
  pass = pass && std::system((base + " --threads 1 --out " + out1.string() + " 2>/dev/null").c_str()) == 0;
  pass = pass && std::system((base + " --threads 1 --out " + out2.string() + " 2>/dev/null").c_str()) == 0;
  pass = pass && std::system((base + " --threads 4 --out " + out4.string() + " 2>/dev/null").c_str()) == 0;
  std::string detail = "mc outputs byte-identical across reruns and worker counts {1,4}";
  if (pass) {
    for (const char* name : {"estimates_tt.csv", "coverage_tt.csv", "meta.json"}) {
      const std::string a = slurp(out1 / name);
      if (a.empty() || a != slurp(out2 / name) || a != slurp(out4 / name)) {
        pass = false;
        detail = fmt("determinism: %s differs between runs", name);
        break;
      }
    }
  } else {
    detail = "determinism: mc invocation failed";
  }
  fs::remove_all(dir);
  record(8, pass, detail);
}

} // namespace

int main(int argc, char** argv) {
  std::string cli;
  int reps = 500;
  std::uint64_t seed = 42;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--cli" && i + 1 < argc) cli = argv[++i];
    if (arg == "--reps" && i + 1 < argc) reps = std::atoi(argv[++i]);
    if (arg == "--seed" && i + 1 < argc) seed = std::strtoull(argv[++i], nullptr, 10);
  }

  criterion_critical_exactness();
  criterion_kernel_constants();
  criterion_smoother_properties();
  criterion_double_robustness();
  criterion_bandwidth_oracle();
  criterion_determinism(cli);
  criteria_tables(reps, seed);

  int failures = 0;
  for (const auto& [criterion, line] : g_lines) {
    std::printf("%s  criterion %d: %s\n", line.first ? "PASS" : "FAIL", criterion,
                line.second.c_str());
    failures += line.first ? 0 : 1;
  }
  for (const auto& [pass, detail] : g_extra) {
    std::printf("%s  invariant: %s\n", pass ? "PASS" : "FAIL", detail.c_str());
    failures += pass ? 0 : 1;
  }
  return failures;
}
