#include "hfdr/sim.hpp"

#include "hfdr/special.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iostream>
#include <numeric>

namespace hfdr {

namespace {

constexpr std::array<std::pair<Family, const char*>, 16> kFamilies{{
    {Family::iid_normal, "iid_normal"},
    {Family::x_ar, "x_ar"},
    {Family::coef_ar, "coef_ar"},
    {Family::sparse_bernoulli, "sparse_bernoulli"},
    {Family::modelx_gaussian, "modelx_gaussian"},
    {Family::modelx_logistic, "modelx_logistic"},
    {Family::graphical, "graphical"},
    {Family::mcc_equicorrelated, "mcc_equicorrelated"},
    {Family::equicorrelated_threshold, "equicorrelated_threshold"},
    {Family::heteroscedastic, "heteroscedastic"},
    {Family::t_noise, "t_noise"},
    {Family::exponential_x, "exponential_x"},
    {Family::x_perturbation, "x_perturbation"},
    {Family::intro_indep, "intro_indep"},
    {Family::intro_ar08, "intro_ar08"},
    {Family::block_orthogonal, "block_orthogonal"},
}};

Matrix normal_matrix(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> normal;
  Matrix z(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) z(i, j) = normal(rng);
  return z;
}

// Rows of a stationary unit-variance AR(1) process.
Matrix ar1_rows(Index n, Index d, double rho, Rng& rng) {
  Matrix x = normal_matrix(n, d, rng);
  const double s = std::sqrt(1.0 - rho * rho);
  for (Index j = 1; j < d; ++j) x.col(j) = rho * x.col(j - 1) + s * x.col(j);
  return x;
}

Matrix ar1_covariance(Index d, double rho) {
  Matrix c(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) c(i, j) = std::pow(rho, static_cast<double>(std::abs(i - j)));
  return c;
}

Matrix equicorrelated(Index d, double rho) {
  Matrix c = Matrix::Constant(d, d, rho);
  c.diagonal().setOnes();
  return c;
}

Matrix gaussian_rows(Index n, const Matrix& covariance, Rng& rng) {
  Eigen::LLT<Matrix> llt(covariance);
  if (llt.info() != Eigen::Success) throw NumericalError("scenario covariance is not positive definite");
  return normal_matrix(n, covariance.rows(), rng) * Matrix(llt.matrixU());
}

Matrix inverse_spd(const Matrix& a) { return a.llt().solve(Matrix::Identity(a.rows(), a.cols())); }

Matrix design_matrix(const ScenarioSpec& spec, Rng& rng) {
  const Index n = spec.n, d = spec.d;
  switch (spec.family) {
    case Family::iid_normal:
    case Family::heteroscedastic:
    case Family::t_noise:
    case Family::x_perturbation:
    case Family::intro_indep:
      return normal_matrix(n, d, rng);
    case Family::x_ar:
    case Family::intro_ar08:
    case Family::modelx_gaussian:
    case Family::modelx_logistic:
      return ar1_rows(n, d, spec.rho, rng);
    case Family::coef_ar:
      return gaussian_rows(n, inverse_spd(ar1_covariance(d, spec.rho)), rng);
    case Family::mcc_equicorrelated:
      return gaussian_rows(n, inverse_spd(equicorrelated(d, spec.rho)), rng);
    case Family::sparse_bernoulli: {
      std::bernoulli_distribution coin(spec.bernoulli_pi);
      Matrix x(n, d);
      for (Index j = 0; j < d; ++j) {
        do {
          for (Index i = 0; i < n; ++i) x(i, j) = coin(rng) ? 1.0 : 0.0;
        } while (x.col(j).minCoeff() == x.col(j).maxCoeff());
      }
      return x;
    }
    case Family::exponential_x: {
      std::exponential_distribution<double> expo(1.0);
      Matrix x(n, d);
      for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < d; ++j) x(i, j) = expo(rng);
      return x;
    }
    case Family::block_orthogonal: {
      const Index b = spec.block_size;
      const Matrix q = Eigen::HouseholderQR<Matrix>(normal_matrix(n, d, rng)).householderQ() * Matrix::Identity(n, d);
      const Matrix u = Eigen::LLT<Matrix>(equicorrelated(b, spec.rho)).matrixU();
      Matrix x(n, d);
      for (Index k = 0; k < d / b; ++k)
        x.middleCols(k * b, b) = std::sqrt(static_cast<double>(n)) * q.middleCols(k * b, b) * u;
      return x;
    }
    default:
      break;
  }
  throw InvalidArgument("scenario family " + to_string(spec.family) + " has no design generator");
}

void validate(const ScenarioSpec& spec) {
  if (spec.family == Family::equicorrelated_threshold)
    throw InvalidArgument("equicorrelated_threshold is simulated by equicorrelated_counterexample");
  if (spec.n < 2 || spec.d < 1) throw InvalidArgument("scenario needs n >= 2 and d >= 1");
  const Index hypotheses = spec.family == Family::graphical ? pair_count(spec.d) : spec.d;
  if (spec.d1 < 0 || spec.d1 > hypotheses) throw InvalidArgument("scenario needs 0 <= d1 <= number of hypotheses");
  if (!spec.theta_star) throw InvalidArgument("scenario signal strength is unset; calibrate it first");
  if (!(*spec.theta_star >= 0.0)) throw InvalidArgument("theta_star must be nonnegative");
  if (!(spec.rho > -1.0 && spec.rho < 1.0)) throw InvalidArgument("rho must lie in (-1, 1)");
  if (!(spec.bernoulli_pi > 0.0 && spec.bernoulli_pi < 1.0)) throw InvalidArgument("bernoulli pi must lie in (0, 1)");
  if (!(spec.sigma > 0.0)) throw InvalidArgument("sigma must be positive");
  if (!(spec.t_df > 0.0)) throw InvalidArgument("t degrees of freedom must be positive");
  if (spec.family == Family::block_orthogonal) {
    if (spec.block_size < 1 || spec.d % spec.block_size != 0)
      throw InvalidArgument("block_orthogonal needs d divisible by the block size");
    if (spec.n < spec.d) throw InvalidArgument("block_orthogonal needs n >= d");
    if (spec.d1 > spec.d / spec.block_size) throw InvalidArgument("block_orthogonal needs at most one signal per block");
  }
  if ((spec.family == Family::mcc_equicorrelated || spec.family == Family::block_orthogonal) && spec.rho < 0.0)
    throw InvalidArgument("equicorrelation must be nonnegative");
}

// Signal set and strengths; fixed by the seed for every replicate.
std::pair<std::vector<Index>, Vector> draw_signals(const ScenarioSpec& spec, Index hypotheses) {
  std::exponential_distribution<double> expo(1.0);
  if (spec.family == Family::block_orthogonal) {
    // First column of evenly spaced blocks; each strength comes from its block's stream.
    const Index blocks = spec.d / spec.block_size;
    std::vector<Index> signals;
    Vector strength(spec.d1);
    for (Index i = 0; i < spec.d1; ++i) {
      const Index block = i * blocks / spec.d1;
      signals.push_back(block * spec.block_size);
      Rng rng = make_rng(spec.seed, Stream::truth, block);
      strength(i) = (1.0 + expo(rng)) / 2.0;
    }
    return {std::move(signals), std::move(strength)};
  }
  Rng rng = make_rng(spec.seed, Stream::truth);
  std::vector<Index> all(static_cast<std::size_t>(hypotheses));
  std::iota(all.begin(), all.end(), Index{0});
  std::shuffle(all.begin(), all.end(), rng);
  std::vector<Index> signals(all.begin(), all.begin() + spec.d1);
  std::sort(signals.begin(), signals.end());
  Vector strength(spec.d1);
  for (Index i = 0; i < spec.d1; ++i) strength(i) = (1.0 + expo(rng)) / 2.0;
  return {std::move(signals), std::move(strength)};
}

ScenarioDraw generate_graphical(const ScenarioSpec& spec, Index replicate) {
  const Index d = spec.d;
  const Index pairs = pair_count(d);
  auto [signals, strength] = draw_signals(spec, pairs);
  double theta_star = *spec.theta_star;
  Matrix theta;
  for (int attempt = 0;; ++attempt) {
    theta = Matrix::Identity(d, d);
    for (std::size_t i = 0; i < signals.size(); ++i) {
      const HypothesisId id = pair_from_index(signals[i], d);
      const double v = theta_star * strength(static_cast<Index>(i)) / 2.0;
      theta(id.j, id.k) = v;
      theta(id.k, id.j) = v;
    }
    const double lmin = Eigen::SelfAdjointEigenSolver<Matrix>(theta, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
    if (lmin >= 1e-6) break;
    if (attempt > 2000) throw NumericalError("graphical scenario: could not make the precision matrix positive definite");
    theta_star *= 0.9;
  }
  Rng rng = make_rng(spec.seed, Stream::design, replicate);
  ScenarioDraw draw{Dataset::graphical(gaussian_rows(spec.n, inverse_spd(theta), rng)), {}, nullptr, 0.0};
  draw.truth.signal_set = SelectionSet(signals);
  draw.truth.precision = theta;
  draw.truth.theta = Vector::Zero(pairs);
  for (Index h : signals) {
    const HypothesisId id = pair_from_index(h, d);
    draw.truth.theta(h) = theta(id.j, id.k);
  }
  draw.truth.num_hypotheses = pairs;
  draw.theta_star = theta_star;
  return draw;
}

}  // namespace

std::string to_string(Family f) {
  for (const auto& [family, name] : kFamilies)
    if (family == f) return name;
  return "unknown";
}

Family parse_family(std::string_view s) {
  for (const auto& [family, name] : kFamilies)
    if (s == name) return family;
  throw InvalidArgument("unknown scenario family '" + std::string(s) + "'");
}

ScenarioSpec default_spec(Family f, bool paper_scale) {
  ScenarioSpec spec;
  spec.family = f;
  if (paper_scale) {
    spec.n = 1500;
    spec.d = 500;
    spec.d1 = 30;
  }
  switch (f) {
    case Family::modelx_gaussian:
    case Family::modelx_logistic:
      spec.rho = 0.0;
      break;
    case Family::graphical:
      spec.d = paper_scale ? 50 : 20;
      spec.n = paper_scale ? 2500 : 800;
      spec.d1 = paper_scale ? 30 : 12;
      break;
    case Family::equicorrelated_threshold:
      spec.rho = 0.8;
      spec.d1 = 0;
      spec.theta_star = 0.0;
      break;
    case Family::intro_indep:
    case Family::intro_ar08:
      spec.d = 200;
      spec.n = 600;
      spec.d1 = 20;
      spec.theta_star = 0.25;
      spec.rho = 0.8;
      break;
    case Family::block_orthogonal:
      spec.d = 64;
      spec.n = 128;
      spec.d1 = 6;
      break;
    default:
      break;
  }
  return spec;
}

Setting setting_of(Family f) {
  switch (f) {
    case Family::modelx_gaussian:
    case Family::modelx_logistic:
    case Family::exponential_x:
      return Setting::model_x;
    case Family::graphical:
      return Setting::gaussian_graphical;
    default:
      return Setting::gaussian_linear;
  }
}

SelectorKind default_selector(Family f) {
  if (f == Family::graphical) return SelectorKind::graphical_lasso;
  if (f == Family::modelx_logistic) return SelectorKind::logistic_l1;
  return SelectorKind::lasso;
}

bool fixed_design(Family f) { return setting_of(f) == Setting::gaussian_linear; }

ScenarioDraw generate(const ScenarioSpec& spec, Index replicate) {
  validate(spec);
  if (spec.family == Family::graphical) return generate_graphical(spec, replicate);

  const Index n = spec.n, d = spec.d;
  auto [signals, strength] = draw_signals(spec, d);
  Vector theta = Vector::Zero(d);
  for (std::size_t i = 0; i < signals.size(); ++i)
    theta(signals[i]) = *spec.theta_star * strength(static_cast<Index>(i));

  Rng design_rng = fixed_design(spec.family) ? make_rng(spec.seed, Stream::design)
                                             : make_rng(spec.seed, Stream::design, replicate);
  Matrix x = design_matrix(spec, design_rng);
  Rng rng = make_rng(spec.seed, Stream::noise, replicate);

  const Vector mean = x * theta;
  Vector y(n);
  std::normal_distribution<double> normal;
  switch (spec.family) {
    case Family::modelx_logistic: {
      std::uniform_real_distribution<double> unif;
      for (Index i = 0; i < n; ++i) y(i) = unif(rng) < 1.0 / (1.0 + std::exp(-mean(i))) ? 1.0 : 0.0;
      break;
    }
    case Family::heteroscedastic: {
      const Vector scale = (x.array().rowwise() * theta.transpose().array()).abs().rowwise().sum().exp();
      for (Index i = 0; i < n; ++i) y(i) = mean(i) + spec.sigma * scale(i) * normal(rng);
      break;
    }
    case Family::t_noise: {
      std::student_t_distribution<double> t(spec.t_df);
      for (Index i = 0; i < n; ++i) y(i) = mean(i) + spec.sigma * t(rng);
      break;
    }
    default:
      for (Index i = 0; i < n; ++i) y(i) = mean(i) + spec.sigma * normal(rng);
      break;
  }
  if (spec.family == Family::x_perturbation) {
    std::uniform_real_distribution<double> unif(0.0, 2.0);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < d; ++j) x(i, j) *= unif(rng);
  }

  const Setting setting = setting_of(spec.family);
  const bool intercept = spec.family != Family::block_orthogonal;
  ScenarioDraw draw{Dataset::regression(std::move(x), std::move(y), setting, {}, intercept), {}, nullptr, 0.0};
  draw.truth.signal_set = SelectionSet(signals);
  draw.truth.theta = theta;
  draw.truth.sigma = spec.sigma;
  draw.truth.num_hypotheses = d;
  draw.theta_star = *spec.theta_star;
  if (spec.family == Family::exponential_x)
    draw.covariate_law = std::make_shared<Ar1CovariateLaw>(0.0, 1.0, 1.0);
  else if (setting == Setting::model_x)
    draw.covariate_law = std::make_shared<Ar1CovariateLaw>(spec.rho);
  return draw;
}

// ---------------------------------------------------------------------------

Vector default_grid(SelectorKind kind, const Problem& problem, const GridOptions& options) {
  switch (kind) {
    case SelectorKind::lasso:
    case SelectorKind::logistic_l1:
      return log_grid(lasso_lambda_max(problem_as<RegressionProblem>(problem, "default_grid")), options.points,
                      options.ratio);
    case SelectorKind::graphical_lasso:
      return log_grid(glasso_lambda_max(*problem_as<GraphicalProblem>(problem, "default_grid").cov), options.points,
                      options.ratio);
    case SelectorKind::forward_stepwise: {
      const Index d = problem_as<RegressionProblem>(problem, "default_grid").d();
      const Index k = std::min(options.points, d);
      Vector grid(k);
      for (Index i = 0; i < k; ++i) grid(i) = static_cast<double>(i + 1);
      return grid;
    }
    case SelectorKind::p_threshold:
      return log_grid(0.1, options.points, options.ratio);
    default:
      break;
  }
  throw InvalidArgument("no default grid for selector " + to_string(kind));
}

std::unique_ptr<Selector> make_selector(SelectorKind kind, const Vector& grid) {
  switch (kind) {
    case SelectorKind::lasso:
      return std::make_unique<LassoSelector>(grid);
    case SelectorKind::logistic_l1:
      return std::make_unique<LogisticL1Selector>(grid);
    case SelectorKind::graphical_lasso:
      return std::make_unique<GraphicalLassoSelector>(grid);
    case SelectorKind::p_threshold:
      return std::make_unique<PThresholdSelector>(grid);
    case SelectorKind::forward_stepwise: {
      std::vector<Index> steps;
      for (Index i = 0; i < grid.size(); ++i) {
        const double k = grid(i);
        if (!(k >= 0.0) || k != std::floor(k)) throw InvalidArgument("forward stepwise grid must hold step counts");
        steps.push_back(static_cast<Index>(k));
      }
      return std::make_unique<ForwardStepwiseSelector>(std::move(steps));
    }
    default:
      break;
  }
  throw InvalidArgument("cannot construct selector " + to_string(kind));
}

Vector pilot_grid(const ScenarioSpec& spec, SelectorKind kind, const GridOptions& options) {
  return default_grid(kind, make_problem(generate(spec, 0).data), options);
}

// ---------------------------------------------------------------------------

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw InvalidArgument("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

namespace {

Vector column_quantile(const Matrix& m, double q) {
  Vector out(m.cols());
  for (Index t = 0; t < m.cols(); ++t) {
    std::vector<double> v(m.col(t).data(), m.col(t).data() + m.rows());
    out(t) = quantile(std::move(v), q);
  }
  return out;
}

double fpr_or_nan(const SelectionSet& sel, const ScenarioTruth& truth) {
  return truth.signal_set.empty() ? std::numeric_limits<double>::quiet_NaN() : fpr(sel, truth);
}

}  // namespace

OracleCurves oracle_curves(const ScenarioSpec& spec, const Selector& selector, Index replicates, int workers) {
  if (replicates < 2) throw InvalidArgument("oracle curves need at least two replicates");
  const Index grid = selector.grid_size();
  OracleCurves out;
  out.grid = selector.grid();
  out.fdp.resize(replicates, grid);
  out.fpr_replicates.resize(replicates, grid);
  detail::parallel_for(replicates, workers, [&](Index r) {
    const ScenarioDraw draw = generate(spec, r);
    const PathFit fit = selector.fit(make_problem(draw.data));
    const SelectionSet null_set = draw.truth.null_set();
    for (Index t = 0; t < grid; ++t) {
      const SelectionSet& sel = fit.sets[static_cast<std::size_t>(t)];
      out.fdp(r, t) = fdp(sel, null_set);
      out.fpr_replicates(r, t) = fpr_or_nan(sel, draw.truth);
    }
  });
  out.fdr = out.fdp.colwise().mean();
  out.fpr = out.fpr_replicates.colwise().mean();
  out.fdp_q05 = column_quantile(out.fdp, 0.05);
  out.fdp_q95 = column_quantile(out.fdp, 0.95);
  return out;
}

double matched_fpr(const ScenarioSpec& spec, SelectorKind kind, double theta_star, const CalibrationOptions& options) {
  ScenarioSpec probe = spec;
  probe.theta_star = theta_star;
  const auto selector = make_selector(kind, pilot_grid(probe, kind, {options.grid_points, 0.01}));
  const OracleCurves curves = oracle_curves(probe, *selector, options.replicates, options.workers);
  const Index grid = curves.fdr.size();
  for (Index t = 0; t < grid; ++t) {
    if (curves.fdr(t) < options.target_fdr) continue;
    if (t == 0) return curves.fpr(0);
    const double w = (options.target_fdr - curves.fdr(t - 1)) / (curves.fdr(t) - curves.fdr(t - 1));
    return curves.fpr(t - 1) + w * (curves.fpr(t) - curves.fpr(t - 1));
  }
  return curves.fpr(grid - 1);
}

CalibrationResult calibrate_signal(ScenarioSpec spec, SelectorKind kind, const CalibrationOptions& options) {
  if (spec.d1 == 0) throw InvalidArgument("calibration needs signals: FPR is undefined when d1 = 0");
  if (!(options.theta_lo > 0.0 && options.theta_hi > options.theta_lo))
    throw InvalidArgument("calibration bracket must satisfy 0 < lo < hi");
  if (options.max_probes < 2) throw InvalidArgument("calibration needs at least two probes");

  CalibrationResult best;
  double best_gap = std::numeric_limits<double>::infinity();
  Index probes = 0;
  auto probe = [&](double theta) {
    const double f = matched_fpr(spec, kind, theta, options);
    ++probes;
    const double gap = std::abs(f - options.target_fpr);
    if (gap < best_gap) {
      best_gap = gap;
      best.theta_star = theta;
      best.fpr = f;
    }
    return f;
  };

  double lo = options.theta_lo, hi = options.theta_hi;
  const double f_lo = probe(lo);
  double f_hi = probe(hi);
  if (f_lo >= options.target_fpr && f_hi > options.target_fpr) {
    // FPR need not be monotone near the ends of the bracket; take the first
    // crossing on a geometric scan.
    const int steps = 10;
    double prev = lo;
    for (int s = 1; s < steps; ++s) {
      const double theta = lo * std::pow(hi / lo, static_cast<double>(s) / steps);
      const double f = probe(theta);
      if (f <= options.target_fpr) {
        lo = prev;
        hi = theta;
        f_hi = f;
        break;
      }
      prev = theta;
    }
  }
  if (!(f_lo >= options.target_fpr && f_hi <= options.target_fpr)) {
    throw NumericalError("calibration: target FPR " + std::to_string(options.target_fpr) +
                         " is not bracketed; achieved FPR range [" + std::to_string(std::min(f_lo, f_hi)) + ", " +
                         std::to_string(std::max(f_lo, f_hi)) + "] for theta* in [" + std::to_string(lo) + ", " +
                         std::to_string(hi) + "]");
  }
  while (best_gap > options.tolerance && probes < options.max_probes) {
    const double mid = std::sqrt(lo * hi);
    const double f = probe(mid);
    (f > options.target_fpr ? lo : hi) = mid;
  }
  best.probes = probes;
  return best;
}

// ---------------------------------------------------------------------------

Vector SimulationResult::combined_se() const {
  const double n = static_cast<double>(hfdr.rows());
  return ((column_sd(hfdr).array().square() + column_sd(fdp).array().square()) / n).sqrt();
}

std::vector<bool> SimulationResult::conservative_flags(double multiplier) const {
  const Vector gap = mean_hfdr() - mean_fdp() + multiplier * combined_se();
  std::vector<bool> flags(static_cast<std::size_t>(gap.size()));
  for (Index t = 0; t < gap.size(); ++t) flags[static_cast<std::size_t>(t)] = gap(t) >= 0.0;
  return flags;
}

LawSet make_scenario_laws(const ScenarioDraw& draw, const HfdrConfig& cfg) {
  LawOptions options;
  options.covariate_law = draw.covariate_law;
  options.seed = cfg.seed;
  return make_laws(draw.data, options);
}

SimulationResult run_simulation(const ScenarioSpec& spec, SelectorKind kind, const SimulationOptions& options) {
  const auto selector = make_selector(kind, pilot_grid(spec, kind, options.grid));
  return run_simulation(spec, *selector, options);
}

SimulationResult run_simulation(const ScenarioSpec& spec, const Selector& selector, const SimulationOptions& options) {
  if (options.replicates < 2) throw InvalidArgument("simulation needs at least two replicates");
  const Index reps = options.replicates;
  const Index grid = selector.grid_size();
  const Index boots = std::min(options.bootstrap_runs, reps);
  SimulationResult out;
  out.grid = selector.grid();
  out.hfdr.resize(reps, grid);
  out.hfdr_mc_se.resize(reps, grid);
  out.fdp.resize(reps, grid);
  out.fpr.resize(reps, grid);
  out.r.resize(reps, grid);
  out.se.resize(boots, grid);

  detail::parallel_for(reps, options.hfdr.workers, [&](Index rep) {
    const ScenarioDraw draw = generate(spec, rep);
    HfdrConfig cfg = options.hfdr;
    cfg.workers = 1;
    cfg.seed = derive_seed(options.hfdr.seed, Stream::mc, rep);
    const LawSet laws = make_scenario_laws(draw, cfg);
    const HfdrCurve curve = estimate_hfdr(laws, selector, cfg);
    const SelectionSet null_set = draw.truth.null_set();
    for (Index t = 0; t < grid; ++t) {
      const SelectionSet& sel = curve.selections[static_cast<std::size_t>(t)];
      out.hfdr(rep, t) = curve.hfdr(t);
      out.hfdr_mc_se(rep, t) = curve.hfdr_mc_se(t);
      out.fdp(rep, t) = fdp(sel, null_set);
      out.fpr(rep, t) = fpr_or_nan(sel, draw.truth);
      out.r(rep, t) = static_cast<double>(sel.size());
    }
    if (rep < boots) {
      BootstrapOptions boot;
      boot.replicates = options.boot_replicates;
      boot.laws.covariate_law = draw.covariate_law;
      BootstrapResult result;
      if (draw.data.setting() == Setting::model_x) {
        const SelectionSet h0 = pvalue_null_set(curve.pvalues).h0_hat;
        result = bootstrap_se_modelx(draw.data, selector, cfg, h0, boot);
      } else {
        CvOptions cv;
        cv.folds = options.folds;
        cv.seed = derive_seed(options.hfdr.seed, Stream::folds, rep);
        cv.workers = 1;
        const SelectionSet h0 = cv_null_set(draw.data, selector, cv).h0_hat;
        result = bootstrap_se_parametric(draw.data, selector, cfg, h0, boot);
      }
      out.se.row(rep) = result.se.transpose();
    }
    if (options.progress) {
#pragma omp critical(hfdr_progress)
      std::cerr << "replicate " << rep + 1 << "/" << reps << " done\n";
    }
  });
  return out;
}

// ---------------------------------------------------------------------------

double counterexample_hfdr(const Vector& z, double rho) {
  const Index d = z.size();
  if (d < 2) throw InvalidArgument("counterexample needs d >= 2");
  if (!(rho >= 0.0 && rho < 1.0)) throw InvalidArgument("counterexample needs rho in [0, 1)");
  const double c = 0.5 * std::sqrt(2.0 * std::log(static_cast<double>(d)));
  const double tail_c = normal_upper_tail(c);
  double total = 0.0;

  if (rho == 0.0) {
    const Index above = (z.array() >= c).count();
    for (Index j = 0; j < d; ++j) {
      if (!(z(j) < 0.0)) continue;
      total += 2.0 * tail_c / static_cast<double>(1 + above);
    }
    return total;
  }

  // Variable k enters once Z_j reaches a_k = b_k + Z_j, with b_k = (c - Z_k) / rho.
  std::vector<std::pair<double, Index>> b(static_cast<std::size_t>(d));
  for (Index k = 0; k < d; ++k) b[static_cast<std::size_t>(k)] = {(c - z(k)) / rho, k};
  std::sort(b.begin(), b.end());

  for (Index j = 0; j < d; ++j) {
    if (!(z(j) < 0.0)) continue;
    // Under H_j, Z_j ~ N(0, 1) independently of S_j and Z_k = S_k + rho Z_j.
    const double shift = z(j);
    Index count = 0;
    std::size_t pos = 0;
    for (; pos < b.size() && b[pos].first + shift <= c; ++pos)
      if (b[pos].second != j) ++count;
    double lo_tail = tail_c, star = 0.0;
    for (; pos < b.size(); ++pos) {
      if (b[pos].second == j) continue;
      const double hi = b[pos].first + shift;
      const double hi_tail = normal_upper_tail(hi);
      star += (lo_tail - hi_tail) / static_cast<double>(1 + count);
      ++count;
      lo_tail = hi_tail;
      if (lo_tail < 1e-300) break;
    }
    star += lo_tail / static_cast<double>(1 + count);
    total += 2.0 * star;
  }
  return total;
}

CounterexampleResult equicorrelated_counterexample(Index d, Index replicates, double rho, std::uint64_t seed) {
  if (replicates < 2) throw InvalidArgument("counterexample needs at least two replicates");
  Vector values(replicates);
  Index nonempty = 0;
  const double c = 0.5 * std::sqrt(2.0 * std::log(static_cast<double>(d)));
  for (Index r = 0; r < replicates; ++r) {
    Rng rng = make_rng(seed, Stream::noise, d, r);
    std::normal_distribution<double> normal;
    const double common = normal(rng);
    Vector z(d);
    for (Index k = 0; k < d; ++k) z(k) = std::sqrt(rho) * common + std::sqrt(1.0 - rho) * normal(rng);
    values(r) = counterexample_hfdr(z, rho);
    if ((z.array() >= c).any()) ++nonempty;
  }
  CounterexampleResult out;
  out.d = d;
  out.mean_hfdr = values.mean();
  out.sd_hfdr = std::sqrt((values.array() - out.mean_hfdr).square().sum() / static_cast<double>(replicates - 1));
  out.fdr = static_cast<double>(nonempty) / static_cast<double>(replicates);
  return out;
}

}  // namespace hfdr
