// Command line front end: `estimate` fits a conditional treatment effect
// curve with uniform confidence bands from a CSV file; `mc` runs the
// synthetic replication study and writes the metric tables.

#include "catef/bandwidth.hpp"
#include "catef/dataset.hpp"
#include "catef/errors.hpp"
#include "catef/first_stage.hpp"
#include "catef/kernels.hpp"
#include "catef/local_linear.hpp"
#include "catef/monte_carlo.hpp"
#include "catef/pseudo_outcome.hpp"
#include "catef/uniform_band.hpp"
#include "catef/version.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace {

using json = nlohmann::ordered_json;

void write_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw catef::InputError("cannot write to '" + tmp.string() + "'");
    out << content;
  }
  fs::rename(tmp, target);
}

std::vector<Eigen::Index> names_to_indices(const std::vector<std::string>& names,
                                           const std::vector<std::string>& covariates,
                                           const std::string& what) {
  std::vector<Eigen::Index> out;
  for (const auto& name : names) {
    const auto it = std::find(covariates.begin(), covariates.end(), name);
    if (it == covariates.end()) {
      throw catef::InputError(what + " column '" + name + "' is not among the covariates");
    }
    out.push_back(static_cast<Eigen::Index>(it - covariates.begin()));
  }
  return out;
}

std::vector<std::pair<Eigen::Index, Eigen::Index>> parse_interactions(
    const std::vector<std::string>& pairs, const std::vector<std::string>& covariates,
    const std::string& what) {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> out;
  for (const auto& pair : pairs) {
    const auto colon = pair.find(':');
    if (colon == std::string::npos) {
      throw catef::InputError(what + " interaction '" + pair + "' must look like a:b");
    }
    const auto left = names_to_indices({pair.substr(0, colon)}, covariates, what);
    const auto right = names_to_indices({pair.substr(colon + 1)}, covariates, what);
    out.emplace_back(left[0], right[0]);
  }
  return out;
}

catef::Interval parse_interval(const std::string& text) {
  catef::Interval interval;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t semi = std::min(text.find(';', pos), text.size());
    const std::string coord = text.substr(pos, semi - pos);
    const std::size_t comma = coord.find(',');
    if (comma == std::string::npos) {
      throw catef::InputError("interval coordinate '" + coord + "' must look like a,b");
    }
    try {
      interval.push_back({std::stod(coord.substr(0, comma)), std::stod(coord.substr(comma + 1))});
    } catch (const std::exception&) {
      throw catef::InputError("cannot parse interval coordinate '" + coord + "'");
    }
    pos = semi + 1;
    if (semi == text.size()) break;
  }
  return interval;
}

double sample_quantile(Eigen::VectorXd values, double q) {
  std::sort(values.data(), values.data() + values.size());
  const double h = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<Eigen::Index>(std::floor(h));
  if (lo + 1 >= values.size()) return values[values.size() - 1];
  return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

struct EstimateArgs {
  std::string data_path;
  std::string outcome, treatment;
  std::vector<std::string> covariates, x_cols;
  std::vector<std::string> reg_squares, ps_squares;
  std::vector<std::string> reg_interactions, ps_interactions;
  std::string estimator = "dr";
  std::string kernel = "gaussian";
  double alpha = 0.05;
  std::string band = "all";
  std::string one_sided; // empty = two-sided
  std::string interval;  // empty = central 90% sample range
  int grid_points = 201;
  double bandwidth = 0.0; // 0 = plug-in
  bool no_undersmooth = false;
  double trim_eps = 0.01;
  std::string out_band = "band.csv";
  std::string out_summary = "summary.json";
};

int run_estimate(const EstimateArgs& args) {
  using namespace catef;

  const Dataset data =
      load_csv(args.data_path, args.outcome, args.treatment, args.covariates, args.x_cols);
  const int dim = static_cast<int>(data.dim_x());

  DesignSpec reg_spec, ps_spec;
  for (Eigen::Index k = 0; k < data.p(); ++k) {
    reg_spec.base_cols.push_back(k);
    ps_spec.base_cols.push_back(k);
  }
  reg_spec.squares = names_to_indices(args.reg_squares, args.covariates, "regression square");
  reg_spec.interactions = parse_interactions(args.reg_interactions, args.covariates, "regression");
  ps_spec.squares = names_to_indices(args.ps_squares, args.covariates, "propensity square");
  ps_spec.interactions = parse_interactions(args.ps_interactions, args.covariates, "propensity");

  const FirstStageFit fit = fit_first_stage(data, reg_spec, ps_spec);
  const Estimator estimator = estimator_from_string(args.estimator);
  const PseudoOutcome psi = compute_psi(data, fit, estimator, args.trim_eps);

  const Eigen::MatrixXd x = x_matrix(data);
  SmootherConfig cfg;
  cfg.kernel = make_kernel(kernel_from_string(args.kernel));
  cfg.dim = dim;

  Interval interval;
  if (!args.interval.empty()) {
    interval = parse_interval(args.interval);
    if (static_cast<int>(interval.size()) != dim) {
      throw InputError("interval has " + std::to_string(interval.size()) +
                       " coordinates, X has " + std::to_string(dim));
    }
  } else {
    for (int j = 0; j < dim; ++j) {
      interval.push_back({sample_quantile(x.col(j), 0.05), sample_quantile(x.col(j), 0.95)});
    }
  }

  std::vector<PluginState> plugin;
  const bool undersmooth = !args.no_undersmooth;
  bool capped = false;
  if (args.bandwidth > 0.0) {
    cfg.bandwidth = args.bandwidth; // explicit override is taken as given
  } else {
    plugin = select_bandwidth_per_coordinate(x, psi.psi);
    const double h_dpi = combined_plugin_bandwidth(plugin);
    cfg.bandwidth = undersmooth ? h_dpi * undersmooth_factor(data.n()) : h_dpi;
    // Keep the level equation solvable over the interval of interest.
    const double cap = 0.99 * max_valid_bandwidth(dim, interval, cfg.kernel.lambda);
    if (cfg.bandwidth > cap) {
      capped = true;
      std::cerr << "plug-in bandwidth " << cfg.bandwidth << " restricted to " << cap
                << " to keep the band's level equation solvable\n";
      cfg.bandwidth = cap;
    }
  }

  const BandProfile profile = compute_band_profile(psi, data, cfg, interval, args.grid_points);

  BandSide side = BandSide::two_sided;
  if (args.one_sided == "lower") side = BandSide::lower;
  else if (args.one_sided == "upper") side = BandSide::upper;
  else if (!args.one_sided.empty()) throw InputError("--one-sided must be lower or upper");

  std::vector<BandFlavor> flavors;
  if (args.band == "all") {
    flavors = {BandFlavor::uniform, BandFlavor::pointwise, BandFlavor::gumbel};
  } else {
    flavors = {band_flavor_from_string(args.band)};
  }

  std::map<std::string, BandResult> bands;
  for (const BandFlavor flavor : flavors) {
    bands.emplace(to_string(flavor), apply_critical(profile, flavor, side, args.alpha));
  }

  const double ate = estimate_ate(psi);
  std::optional<ConstancyTest> constancy;
  if (bands.count("uniform") && side == BandSide::two_sided) {
    constancy = constancy_test(bands.at("uniform"), psi, data, interval);
  }

  // Band table: grid coordinates, estimate, se, and per-flavor envelopes.
  std::string csv;
  for (int j = 0; j < dim; ++j) csv += "x" + std::to_string(j + 1) + ",";
  csv += "g_hat,se,lo_uniform,hi_uniform,lo_pointwise,hi_pointwise,lo_gumbel,hi_gumbel\n";
  auto bound_cell = [&bands](const std::string& flavor, bool lower_side, Eigen::Index row) {
    const auto it = bands.find(flavor);
    if (it == bands.end()) return std::string();
    const double v = lower_side ? it->second.lower[row] : it->second.upper[row];
    if (std::isinf(v)) return std::string();
    return format_double(v);
  };
  for (Eigen::Index row = 0; row < profile.grid.rows(); ++row) {
    for (int j = 0; j < dim; ++j) csv += format_double(profile.grid(row, j)) + ",";
    csv += format_double(profile.g_hat[row]) + "," + format_double(profile.se[row]);
    for (const char* flavor : {"uniform", "pointwise", "gumbel"}) {
      csv += "," + bound_cell(flavor, true, row);
      csv += "," + bound_cell(flavor, false, row);
    }
    csv += "\n";
  }

  json summary;
  summary["n"] = data.n();
  summary["dim_x"] = dim;
  summary["estimator"] = to_string(estimator);
  summary["kernel"] = to_string(cfg.kernel.kind);
  summary["bandwidth"] = cfg.bandwidth;
  summary["bandwidth_source"] = (args.bandwidth > 0.0) ? "override" : "plugin";
  summary["bandwidth_capped"] = capped;
  summary["undersmooth"] = undersmooth;
  if (!plugin.empty()) {
    json stages = json::array();
    for (const PluginState& s : plugin) {
      stages.push_back({{"n_blocks", s.n_blocks},
                        {"theta24_q", s.theta24_q},
                        {"sigma2_q", s.sigma2_q},
                        {"g1", s.g1},
                        {"theta22", s.theta22},
                        {"g2", s.g2},
                        {"sigma2", s.sigma2},
                        {"h_dpi", s.h_dpi},
                        {"h_n", s.h_n}});
    }
    summary["plugin"] = stages;
  }
  summary["a_n"] = profile.a_n;
  summary["alpha"] = args.alpha;
  summary["side"] = to_string(side);
  json criticals;
  for (const auto& [name, band] : bands) criticals[name] = band.critical;
  summary["critical_values"] = criticals;
  summary["ate"] = ate;
  if (constancy) {
    summary["g_interval"] = constancy->g_interval;
    summary["constancy_reject"] = constancy->reject;
  } else {
    summary["g_interval"] = nullptr;
    summary["constancy_reject"] = nullptr;
  }
  summary["trim_eps"] = args.trim_eps;
  summary["clip_count"] = psi.clip_count;
  json iv = json::array();
  for (const auto& [a, b] : interval) iv.push_back({a, b});
  summary["interval"] = iv;
  summary["grid_points"] = args.grid_points;
  summary["version"] = kVersion;

  write_atomic(args.out_band, csv);
  write_atomic(args.out_summary, summary.dump(2) + "\n");

  std::cerr << "n=" << data.n() << " bandwidth=" << cfg.bandwidth << " a_n=" << profile.a_n;
  for (const auto& [name, band] : bands) std::cerr << " c_" << name << "=" << band.critical;
  std::cerr << " clipped=" << psi.clip_count << "\n";
  return 0;
}

struct McArgs {
  int p = 10;
  long long n = 500;
  int reps = 500;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string scenario = "all";
  std::string out = "mc_out";
  int threads = 0;
};

int run_mc(const McArgs& args) {
  using namespace catef;

  std::uint64_t seed = args.seed;
  if (!args.seed_given) {
    seed = std::random_device{}();
    std::cerr << "seed drawn from system entropy: " << seed << "\n";
  }

  std::vector<Scenario> scenarios;
  if (args.scenario == "all") {
    scenarios = {Scenario::tt, Scenario::tf, Scenario::ft, Scenario::ff};
  } else {
    scenarios = {scenario_from_string(args.scenario)};
  }

  McConfig base;
  base.p = args.p;
  base.n = args.n;
  base.reps = args.reps;
  base.seed = seed;
  base.threads = args.threads;

  // Compute every table before writing anything.
  std::vector<std::pair<std::string, std::string>> files;
  json meta;
  meta["version"] = kVersion;
  meta["eigen_version"] = std::to_string(EIGEN_WORLD_VERSION) + "." +
                          std::to_string(EIGEN_MAJOR_VERSION) + "." +
                          std::to_string(EIGEN_MINOR_VERSION);
  meta["seed"] = seed;
  meta["p"] = base.p;
  meta["n"] = base.n;
  meta["reps"] = base.reps;
  meta["kernel"] = to_string(base.kernel);
  meta["trim_eps"] = base.trim_eps;
  meta["eval_points"] = base.eval_points;
  meta["alpha_levels"] = base.alpha_levels;
  meta["coverage_interval"] = base.coverage_interval;
  meta["coverage_grid"] = base.coverage_grid;
  meta["estimators"] = {"dr", "ipw", "ra"};
  json scenario_names = json::array();
  json failures, diagnostics;
  for (const Scenario scenario : scenarios) {
    McConfig cfg = base;
    cfg.scenario = scenario;
    const McReport report = run_replications(cfg);
    const std::string name = to_string(scenario);
    scenario_names.push_back(name);
    files.emplace_back("estimates_" + name + ".csv", estimates_csv(report));
    files.emplace_back("coverage_" + name + ".csv", coverage_csv(report));
    failures[name] = report.failures;
    json diag;
    diag["mean_bandwidth"] = report.mean_bandwidth;
    diag["mean_a_n"] = report.mean_a_n;
    json crates;
    for (std::size_t l = 0; l < cfg.alpha_levels.size(); ++l) {
      crates[format_double(1.0 - cfg.alpha_levels[l])] =
          report.coverage[l].constancy_reject_rate;
    }
    diag["constancy_reject_rate"] = crates;
    diagnostics[name] = diag;
  }
  meta["scenarios"] = scenario_names;
  meta["failures"] = failures;
  meta["diagnostics"] = diagnostics;

  namespace fs = std::filesystem;
  fs::create_directories(args.out);
  for (const auto& [name, content] : files) {
    write_atomic((fs::path(args.out) / name).string(), content);
  }
  write_atomic((fs::path(args.out) / "meta.json").string(), meta.dump(2) + "\n");
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Doubly robust conditional treatment effect curves with uniform confidence bands"};
  app.require_subcommand(1);

  EstimateArgs est;
  CLI::App* estimate = app.add_subcommand("estimate", "Estimate the effect curve from a CSV file");
  estimate->add_option("--data", est.data_path, "CSV file with a header row")->required();
  estimate->add_option("--outcome", est.outcome, "outcome column")->required();
  estimate->add_option("--treatment", est.treatment, "binary treatment column")->required();
  estimate->add_option("--covariates", est.covariates, "covariate columns (Z)")
      ->required()
      ->delimiter(',');
  estimate->add_option("--x-cols", est.x_cols, "covariates of interest (subset of Z, 1-3)")
      ->required()
      ->delimiter(',');
  estimate->add_option("--reg-squares", est.reg_squares, "squared terms for the regressions")
      ->delimiter(',');
  estimate->add_option("--reg-interactions", est.reg_interactions,
                       "interaction terms a:b for the regressions")
      ->delimiter(',');
  estimate->add_option("--ps-squares", est.ps_squares, "squared terms for the propensity model")
      ->delimiter(',');
  estimate->add_option("--ps-interactions", est.ps_interactions,
                       "interaction terms a:b for the propensity model")
      ->delimiter(',');
  estimate->add_option("--estimator", est.estimator, "dr|ipw|ra")->capture_default_str();
  estimate->add_option("--kernel", est.kernel, "gaussian|biweight|epanechnikov")
      ->capture_default_str();
  estimate->add_option("--alpha", est.alpha, "1 - confidence level")->capture_default_str();
  estimate->add_option("--band", est.band, "uniform|pointwise|gumbel|all")->capture_default_str();
  estimate->add_option("--one-sided", est.one_sided, "lower|upper (default two-sided)");
  estimate->add_option("--interval", est.interval,
                       "interval of interest a,b per coordinate, ';' separated");
  estimate->add_option("--grid-points", est.grid_points, "grid points per coordinate")
      ->capture_default_str();
  estimate->add_option("--bandwidth", est.bandwidth, "bandwidth override (skips the plug-in)");
  estimate->add_flag("--no-undersmooth", est.no_undersmooth,
                     "disable the undersmoothing factor (diagnostics only)");
  estimate->add_option("--trim-eps", est.trim_eps, "propensity trimming bound")
      ->capture_default_str();
  estimate->add_option("--out-band", est.out_band, "band table output path")
      ->capture_default_str();
  estimate->add_option("--out-summary", est.out_summary, "JSON summary output path")
      ->capture_default_str();

  McArgs mc;
  CLI::App* mc_cmd = app.add_subcommand("mc", "Run the synthetic replication study");
  mc_cmd->add_option("--p", mc.p, "covariate dimension (even)")->capture_default_str();
  mc_cmd->add_option("--n", mc.n, "sample size per replication")->capture_default_str();
  mc_cmd->add_option("--reps", mc.reps, "number of replications")->capture_default_str();
  CLI::Option* seed_opt = mc_cmd->add_option("--seed", mc.seed, "master seed (omit for entropy)");
  mc_cmd->add_option("--scenario", mc.scenario, "tt|tf|ft|ff|all")->capture_default_str();
  mc_cmd->add_option("--out", mc.out, "output directory")->capture_default_str();
  mc_cmd->add_option("--threads", mc.threads, "worker count (0 = hardware)")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e); // CLI11 prints usage; nonzero on error
  }

  try {
    if (estimate->parsed()) return run_estimate(est);
    mc.seed_given = seed_opt->count() > 0;
    return run_mc(mc);
  } catch (const catef::InputError& e) {
    std::cerr << "error: [input_error] " << e.what() << "\n";
    return 3;
  } catch (const catef::NumericError& e) {
    std::cerr << "error: [numeric_error] " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: [internal_error] " << e.what() << "\n";
    return 5;
  }
}
