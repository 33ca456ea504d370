#pragma once

#include "hfdr/bootstrap.hpp"
#include "hfdr/estimator.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace hfdr {

enum class Family {
  iid_normal,
  x_ar,
  coef_ar,
  sparse_bernoulli,
  modelx_gaussian,
  modelx_logistic,
  graphical,
  mcc_equicorrelated,
  equicorrelated_threshold,
  heteroscedastic,
  t_noise,
  exponential_x,
  x_perturbation,
  intro_indep,
  intro_ar08,
  block_orthogonal,
};

std::string to_string(Family f);
Family parse_family(std::string_view s);

struct ScenarioSpec {
  Family family = Family::iid_normal;
  Index n = 300;
  Index d = 100;
  Index d1 = 10;
  std::optional<double> theta_star;  // empty: calibrate before use
  double rho = 0.5;                  // AR / equicorrelation parameter
  double bernoulli_pi = 0.05;
  double sigma = 1.0;
  double t_df = 5.0;
  Index block_size = 4;
  std::uint64_t seed = 0;
};

// Desk-scale defaults for a family; paper_scale switches to the sizes of the
// original study.
ScenarioSpec default_spec(Family f, bool paper_scale = false);

Setting setting_of(Family f);
SelectorKind default_selector(Family f);
// Families whose design and truth are fixed by the seed; only the noise (and
// the x_perturbation factors) change between replicates.
bool fixed_design(Family f);

struct ScenarioDraw {
  Dataset data;
  ScenarioTruth truth;
  std::shared_ptr<const CovariateLaw> covariate_law;  // model-X families
  double theta_star = 0.0;                            // after any PD shrinkage
};

ScenarioDraw generate(const ScenarioSpec& spec, Index replicate = 0);

// ---------------------------------------------------------------------------
// Selectors and grids

struct GridOptions {
  Index points = 10;
  double ratio = 0.01;
};

// Grid from lambda_max of `problem` down to ratio * lambda_max (step counts
// 1..points for forward stepwise, thresholds for p-value selection).
Vector default_grid(SelectorKind kind, const Problem& problem, const GridOptions& options = {});
std::unique_ptr<Selector> make_selector(SelectorKind kind, const Vector& grid);
// Grid fixed from the seed's pilot draw.
Vector pilot_grid(const ScenarioSpec& spec, SelectorKind kind, const GridOptions& options = {});

// ---------------------------------------------------------------------------
// Oracle metrics

struct OracleCurves {
  Vector grid;
  Vector fdr;
  Vector fpr;
  Vector fdp_q05;
  Vector fdp_q95;
  Matrix fdp;  // replicates by grid
  Matrix fpr_replicates;
};

OracleCurves oracle_curves(const ScenarioSpec& spec, const Selector& selector, Index replicates, int workers = 0);

// Linear-interpolation quantile of a sample.
double quantile(std::vector<double> values, double q);

struct CalibrationOptions {
  double target_fdr = 0.2;
  double target_fpr = 0.2;
  double theta_lo = 0.01;  // bisection bracket
  double theta_hi = 10.0;
  double tolerance = 0.02;
  Index replicates = 100;
  Index max_probes = 20;
  Index grid_points = 30;
  int workers = 0;
};

struct CalibrationResult {
  double theta_star = 0.0;
  double fpr = 0.0;  // at the matched FDR
  Index probes = 0;
};

// FPR at the grid value where the FDR curve crosses the target (interpolated).
double matched_fpr(const ScenarioSpec& spec, SelectorKind kind, double theta_star, const CalibrationOptions& options);
CalibrationResult calibrate_signal(ScenarioSpec spec, SelectorKind kind, const CalibrationOptions& options = {});

// ---------------------------------------------------------------------------
// Simulation runs

struct SimulationOptions {
  Index replicates = 200;
  HfdrConfig hfdr;
  // Bootstrap s.e. on the first `bootstrap_runs` replicates (0 = none).
  Index bootstrap_runs = 0;
  Index boot_replicates = 10;
  Index folds = 10;
  GridOptions grid;
  bool progress = false;  // one line per finished replicate on stderr
};

struct SimulationResult {
  Vector grid;
  Matrix hfdr;  // replicates by grid
  Matrix fdp;
  Matrix fpr;
  Matrix r;
  Matrix se;  // bootstrap s.e., one row per bootstrapped replicate
  Matrix hfdr_mc_se;

  Vector mean_hfdr() const { return hfdr.colwise().mean(); }
  Vector mean_fdp() const { return fdp.colwise().mean(); }
  // sqrt(var(hfdr) / N + var(fdp) / N) per grid value.
  Vector combined_se() const;
  // mean hfdr >= mean fdp - multiplier * combined s.e., per grid value.
  std::vector<bool> conservative_flags(double multiplier = 3.0) const;
};

SimulationResult run_simulation(const ScenarioSpec& spec, SelectorKind kind, const SimulationOptions& options);
// Same on a caller-chosen grid.
SimulationResult run_simulation(const ScenarioSpec& spec, const Selector& selector, const SimulationOptions& options);

// Laws for one simulated draw (model-X draws carry their covariate law).
LawSet make_scenario_laws(const ScenarioDraw& draw, const HfdrConfig& cfg);

// ---------------------------------------------------------------------------
// Equicorrelated one-sided thresholding with phi_j = 2 * 1{Z_j < 0}.

struct CounterexampleResult {
  Index d = 0;
  double sd_hfdr = 0.0;
  double mean_hfdr = 0.0;
  double fdr = 0.0;  // P(R >= 1) since every hypothesis is null
};

// hfdr of one draw of Z.
double counterexample_hfdr(const Vector& z, double rho);
CounterexampleResult equicorrelated_counterexample(Index d, Index replicates, double rho = 0.8,
                                                   std::uint64_t seed = 0);

}  // namespace hfdr
