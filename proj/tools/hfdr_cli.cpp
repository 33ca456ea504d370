#include "hfdr/io.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <sstream>

namespace {

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> grid;
  std::stringstream ss(text);
  ss.imbue(std::locale::classic());
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw hfdr::InvalidArgument("--grid: cannot parse '" + item + "'");
    grid.push_back(v);
  }
  if (grid.empty()) throw hfdr::InvalidArgument("--grid is empty");
  return grid;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"False discovery rate estimation along selection paths"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, data, response, setting, selector, grid, mode, metric, family, out;
  std::size_t n_lambda = 0, mc = 0, boot_m = 0, folds = 0, replicates = 0, boot_runs = 0, n = 0, d = 0, d1 = 0;
  double zeta = 0.0, ratio = 0.0, theta_star = 0.0, rho = 0.0, target_fpr = 0.0;
  std::uint64_t seed = 0;
  int workers = 0;
  bool no_intercept = false, quiet = false, paper_scale = false;

  app.add_option("--config", config_path, "JSON config file");
  auto* o_data = app.add_option("--data", data, "input CSV");
  auto* o_response = app.add_option("--response", response, "response column (p-value column for p_threshold)");
  auto* o_setting = app.add_option("--setting", setting, "gaussian_linear | model_x | gaussian_graphical");
  auto* o_intercept = app.add_flag("--no-intercept", no_intercept, "fit without an intercept");
  auto* o_selector = app.add_option("--selector", selector, "lasso | forward_stepwise | graphical_lasso | logistic_l1 | p_threshold");
  auto* o_grid = app.add_option("--grid", grid, "comma-separated tuning values");
  auto* o_nlambda = app.add_option("--n-lambda", n_lambda, "grid length when no grid is given");
  auto* o_ratio = app.add_option("--lambda-ratio", ratio, "smallest over largest lambda");
  auto* o_zeta = app.add_option("--zeta", zeta, "p-value cutoff of the correction factor (default 0.1)");
  auto* o_mc = app.add_option("--mc", mc, "Monte Carlo samples per hypothesis (default 20)");
  auto* o_mode = app.add_option("--mode", mode, "mc | exact");
  auto* o_bootm = app.add_option("--boot-M", boot_m, "bootstrap replicates (default 10)");
  auto* o_folds = app.add_option("--folds", folds, "cross-validation folds (default 10)");
  auto* o_metric = app.add_option("--cv-metric", metric, "mse | neg_loglik");
  auto* o_seed = app.add_option("--seed", seed, "master seed");
  auto* o_out = app.add_option("--out", out, "output directory");
  auto* o_workers = app.add_option("--workers", workers, "worker threads, 0 = all cores");
  auto* o_quiet = app.add_flag("--quiet", quiet, "no progress on stderr");
  auto* o_family = app.add_option("--family", family, "simulation scenario family");
  auto* o_n = app.add_option("--n", n, "simulated sample size");
  auto* o_d = app.add_option("--d", d, "simulated dimension");
  auto* o_d1 = app.add_option("--d1", d1, "number of signals");
  auto* o_theta = app.add_option("--theta-star", theta_star, "signal strength (calibrated when absent)");
  auto* o_rho = app.add_option("--rho", rho, "scenario correlation parameter");
  auto* o_paper = app.add_flag("--paper-scale", paper_scale, "use the sizes of the original study");
  auto* o_reps = app.add_option("--replicates", replicates, "simulation replicates");
  auto* o_bruns = app.add_option("--bootstrap-runs", boot_runs, "replicates that also get a bootstrap s.e.");
  auto* o_tfpr = app.add_option("--target-fpr", target_fpr, "calibration target FPR");

  app.add_subcommand("estimate", "hfdr along the tuning grid");
  app.add_subcommand("cv", "hfdr next to the cross-validation curve");
  app.add_subcommand("bootstrap-se", "hfdr with bootstrap standard errors");
  app.add_subcommand("simulate", "simulation study on a scenario family");
  app.add_subcommand("calibrate", "signal strength for a target operating point");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    hfdr::RunConfig cfg;
    if (!config_path.empty()) hfdr::apply_config_file(config_path, cfg);
    cfg.command = hfdr::parse_command(app.get_subcommands().front()->get_name());
    auto given = [](const CLI::Option* o) { return o->count() > 0; };
    if (given(o_data)) cfg.data_path = data;
    if (given(o_response)) cfg.response_column = response;
    if (given(o_setting)) cfg.setting = hfdr::parse_setting(setting);
    if (given(o_intercept)) cfg.intercept = !no_intercept;
    if (given(o_selector)) cfg.selector = hfdr::parse_selector_kind(selector);
    if (given(o_grid)) cfg.grid = parse_grid(grid);
    if (given(o_nlambda)) cfg.n_lambda = static_cast<hfdr::Index>(n_lambda);
    if (given(o_ratio)) cfg.lambda_ratio = ratio;
    if (given(o_zeta)) cfg.zeta = zeta;
    if (given(o_mc)) cfg.mc = static_cast<hfdr::Index>(mc);
    if (given(o_mode)) cfg.mode = hfdr::parse_mode(mode);
    if (given(o_bootm)) cfg.boot_m = static_cast<hfdr::Index>(boot_m);
    if (given(o_folds)) cfg.folds = static_cast<hfdr::Index>(folds);
    if (given(o_metric)) cfg.cv_metric = metric;
    if (given(o_seed)) cfg.seed = seed;
    if (given(o_out)) cfg.out = out;
    if (given(o_workers)) cfg.workers = workers;
    if (given(o_quiet)) cfg.quiet = quiet;
    if (given(o_family)) cfg.family = family;
    if (given(o_n)) cfg.n = static_cast<hfdr::Index>(n);
    if (given(o_d)) cfg.d = static_cast<hfdr::Index>(d);
    if (given(o_d1)) cfg.d1 = static_cast<hfdr::Index>(d1);
    if (given(o_theta)) cfg.theta_star = theta_star;
    if (given(o_rho)) cfg.rho = rho;
    if (given(o_paper)) cfg.paper_scale = paper_scale;
    if (given(o_reps)) cfg.replicates = static_cast<hfdr::Index>(replicates);
    if (given(o_bruns)) cfg.bootstrap_runs = static_cast<hfdr::Index>(boot_runs);
    if (given(o_tfpr)) cfg.target_fpr = target_fpr;
    hfdr::run(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return hfdr::exit_code_for(e);
  }
  return 0;
}
