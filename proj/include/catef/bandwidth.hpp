#pragma once

#include <Eigen/Core>

#include <vector>

namespace catef {

//! Intermediate quantities of the direct plug-in bandwidth pipeline
//! (blocked quartic pilot, local cubic curvature stage, local linear variance
//! stage) plus the final plug-in bandwidth h_dpi and its undersmoothed
//! version h_n = h_dpi * n^{-3/35}. The pipeline is specific to the Gaussian
//! kernel and a univariate regressor.
struct PluginState {
  int n_blocks = 0;
  double theta24_q = 0.0;  // blocked-quartic estimate of theta_{2,4}
  double sigma2_q = 0.0;   // blocked-quartic variance estimate
  double g1 = 0.0;         // bandwidth of the local cubic stage
  double theta22 = 0.0;    // trimmed mean-square second derivative
  double g2 = 0.0;         // bandwidth of the local linear variance stage
  double sigma2 = 0.0;     // hat-matrix-corrected variance estimate
  double h_dpi = 0.0;      // final plug-in bandwidth
  double h_n = 0.0;        // undersmoothed bandwidth
  Eigen::Index n = 0;
};

// N_max = max{min(floor(n/20), 5), 1}.
int max_blocks(Eigen::Index n);

//! Number of equal-count x-sorted blocks minimizing Mallows'
//! C_p(N) = [RSS(N)/RSS(N_max)](n - N_max) - (n - 10N). Candidates where a
//! block cannot support a quartic fit are dropped; throws NumericError when
//! even N = 1 is infeasible.
int choose_blocks(const Eigen::VectorXd& x, const Eigen::VectorXd& psi);

struct QuarticStage {
  double theta24_q = 0.0;
  double sigma2_q = 0.0;
  double rss = 0.0;
};

QuarticStage blocked_quartic_stage(const Eigen::VectorXd& x, const Eigen::VectorXd& psi,
                                   int n_blocks);

//! Fits a local cubic with the pilot bandwidth g1 and returns the trimmed
//! mean-square second derivative theta22. theta24_q == 0 falls back to
//! g1 = (b - a) n^{-1/7} with a warning.
double local_cubic_stage(const Eigen::VectorXd& x, const Eigen::VectorXd& psi, double theta24_q,
                         double sigma2_q, double a, double b);

struct FinalBandwidth {
  double g2 = 0.0;
  double sigma2 = 0.0;
  double h_dpi = 0.0;
  double h_n = 0.0;
};

FinalBandwidth final_bandwidth(const Eigen::VectorXd& x, const Eigen::VectorXd& psi,
                               double theta22, double sigma2_q, double a, double b);

// n^{-3/35}, the undersmoothing factor h_n / h_dpi.
double undersmooth_factor(Eigen::Index n);

//! Full pipeline over [a, b] = [min x, max x].
PluginState select_bandwidth(const Eigen::VectorXd& x, const Eigen::VectorXd& psi);

//! dX >= 2: the univariate plug-in per coordinate; callers combine the
//! per-coordinate h_dpi values by geometric mean.
std::vector<PluginState> select_bandwidth_per_coordinate(const Eigen::MatrixXd& x,
                                                         const Eigen::VectorXd& psi);

double combined_plugin_bandwidth(const std::vector<PluginState>& per_coordinate);

} // namespace catef
