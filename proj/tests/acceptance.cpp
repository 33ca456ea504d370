// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers as
// arguments to run a subset.

#include "support.hpp"

#include "hfdr/exact.hpp"
#include "hfdr/io.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <sys/wait.h>

using namespace hfdr;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double x, int digits = 4) {
  std::ostringstream s;
  s << std::setprecision(digits) << x;
  return s.str();
}

// Calibrated signal strengths, shared between criteria.
double calibrated_theta(const ScenarioSpec& base, SelectorKind kind) {
  static std::map<std::string, double> cache;
  const std::string key = to_string(base.family) + "/" + std::to_string(base.d);
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  ScenarioSpec spec = base;
  spec.theta_star.reset();
  CalibrationOptions options;
  options.replicates = 50;
  const CalibrationResult result = calibrate_signal(spec, kind, options);
  std::cout << "  calibrated " << key << ": theta* = " << fmt(result.theta_star) << " (FPR " << fmt(result.fpr)
            << " at FDR 0.2, " << result.probes << " probes)\n";
  cache[key] = result.theta_star;
  return result.theta_star;
}

ScenarioSpec desk_spec(Family f, std::uint64_t seed = 1) {
  ScenarioSpec spec = default_spec(f);
  spec.seed = seed;
  if (!spec.theta_star) spec.theta_star = calibrated_theta(spec, default_selector(f));
  return spec;
}

SimulationOptions sim_options(Index replicates, HfdrMode mode, Index mc = 20) {
  SimulationOptions options;
  options.replicates = replicates;
  options.hfdr.mode = mode;
  options.hfdr.mc_samples = mc;
  options.hfdr.seed = 5;
  return options;
}

// Worst margin of mean hfdr - mean fdp + 3 combined s.e. over the grid.
double conservative_margin(const SimulationResult& sim) {
  const Vector gap = sim.mean_hfdr() - sim.mean_fdp() + 3.0 * sim.combined_se();
  return gap.minCoeff();
}

std::string curve_text(const SimulationResult& sim) {
  std::ostringstream s;
  for (Index t = 0; t < sim.grid.size(); ++t)
    s << (t ? " " : "") << fmt(sim.mean_hfdr()(t), 3) << "/" << fmt(sim.mean_fdp()(t), 3);
  return s.str();
}

// ---------------------------------------------------------------------------

Outcome criterion1() {
  bool pass = true;
  std::ostringstream detail;
  for (Family f : {Family::iid_normal, Family::x_ar, Family::coef_ar, Family::sparse_bernoulli}) {
    const ScenarioSpec spec = desk_spec(f);
    const SimulationResult sim = run_simulation(spec, SelectorKind::lasso, sim_options(200, HfdrMode::exact_when_available));
    const double margin = conservative_margin(sim);
    pass = pass && margin >= 0.0;
    std::cout << "  " << to_string(f) << " hfdr/fdp: " << curve_text(sim) << "\n";
    detail << to_string(f) << " min margin " << fmt(margin) << "; ";
  }
  return {pass, detail.str()};
}

Outcome criterion2() {
  Rng rng(2);
  std::uniform_real_distribution<double> unif;
  double worst_formula = 0.0;
  Index storey_violations = 0, storey_checks = 0;
  const double zeta = 0.1;
  for (int rep = 0; rep < 1000; ++rep) {
    const Index d = 5 + rep % 46;
    Vector p(d);
    for (Index j = 0; j < d; ++j) p(j) = unif(rng);
    // Mix in some small p-values so that thresholds select something.
    for (Index j = 0; j < d / 4; ++j) p(j) *= 0.05;
    const double c = zeta * unif(rng);
    const double r = static_cast<double>((p.array() <= c).count());
    const double large = static_cast<double>((p.array() > zeta).count());
    const double formula = c / (r + 1.0) * large / (1.0 - zeta);
    const double value = hfdr_pthreshold_closed_form(p, c, zeta);
    worst_formula = std::max(worst_formula, std::abs(value - formula));
    if (r >= 1.0) {
      ++storey_checks;
      storey_violations += value > c / r * large / (1.0 - zeta);
    }
  }
  return {worst_formula <= 1e-12 && storey_violations == 0,
          "max |closed form - formula| " + fmt(worst_formula) + ", Storey violations " +
              std::to_string(storey_violations) + "/" + std::to_string(storey_checks)};
}

Outcome criterion3() {
  Rng rng(3);
  std::uniform_real_distribution<double> unif;
  Index lasso_fail = 0, fs_fail = 0, mismatches = 0;
  double worst_z = 0.0;
  HfdrConfig cfg;
  cfg.mc_samples = 100000;

  for (int inst = 0; inst < 50; ++inst) {
    const Dataset data = test::linear_instance(30, 8, 1 + inst % 4, 0.3 + 0.5 * unif(rng), rng);
    const auto ctx = make_linear_context(data);
    const Index j = inst % 8;
    const LinearLaw law(ctx, j);
    const double lambda = (0.1 + 0.8 * unif(rng)) * lasso_lambda_max(ctx->observed);
    const PiecewiseSelectionPath path = lasso_homotopy_path(law, lambda);
    const double exact = hfdr_star_lasso_exact(path, law);
    cfg.seed = static_cast<std::uint64_t>(inst);
    const StarEstimate mc = hfdr_star_mc(law, LassoSelector(Vector::Constant(1, lambda)), cfg);
    const double se = std::max(mc.se(0), 1.0 / static_cast<double>(cfg.mc_samples));
    worst_z = std::max(worst_z, std::abs(exact - mc.hfdr_star(0)) / se);
    lasso_fail += std::abs(exact - mc.hfdr_star(0)) > 4.0 * se;

    const double lo = path.segments.front().lo, hi = path.segments.back().hi;
    for (int probe = 0; probe < 500; ++probe) {
      const double v = lo + (hi - lo) * (probe + 0.5) / 500.0;
      const RegressionProblem p = law.at_t(law.geometry().t_from_v(v));
      const SelectionSet refit = lasso_fit(*p.gram, p.xty, lambda, SolverOptions{1000000, 1e-13}).active_set;
      mismatches += path.segment_at(v).active != refit;
    }
  }

  const std::vector<Index> steps{1, 2, 3};
  const ForwardStepwiseSelector fs(steps);
  for (int inst = 0; inst < 50; ++inst) {
    const Dataset data = test::linear_instance(30, 6, 1 + inst % 3, 0.3 + 0.5 * unif(rng), rng);
    const auto ctx = make_linear_context(data);
    const Index j = inst % 6;
    const LinearLaw law(ctx, j);
    const auto regions = fs_selection_regions(law, steps);
    cfg.seed = static_cast<std::uint64_t>(1000 + inst);
    const StarEstimate mc = hfdr_star_mc(law, fs, cfg);
    for (std::size_t s = 0; s < steps.size(); ++s) {
      const Index k = steps[s];
      const double exact = hfdr_star_fs_exact(regions[s], law, k);
      const Index g = static_cast<Index>(s);
      const double se = std::max(mc.se(g), 1.0 / static_cast<double>(cfg.mc_samples));
      worst_z = std::max(worst_z, std::abs(exact - mc.hfdr_star(g)) / se);
      fs_fail += std::abs(exact - mc.hfdr_star(g)) > 4.0 * se;
    }
    const double r = law.geometry().r();
    for (int probe = 0; probe < 500; ++probe) {
      const double v = -r + 2.0 * r * (probe + 0.5) / 500.0;
      const RegressionProblem p = law.at_t(law.geometry().t_from_v(v));
      const auto order = forward_stepwise(*p.gram, p.xty, 3);
      for (std::size_t s = 0; s < steps.size(); ++s) {
        const bool selected = std::find(order.begin(), order.begin() + steps[s], j) != order.begin() + steps[s];
        const bool inside = std::any_of(regions[s].begin(), regions[s].end(),
                                        [v](const VInterval& iv) { return v > iv.lo && v < iv.hi; });
        mismatches += selected != inside;
      }
    }
  }
  return {lasso_fail == 0 && fs_fail == 0 && mismatches == 0,
          "lasso outside 4 s.e. " + std::to_string(lasso_fail) + "/50, FS outside 4 s.e. " + std::to_string(fs_fail) +
              "/150, max |z| " + fmt(worst_z) + ", refit mismatches " + std::to_string(mismatches)};
}

Outcome criterion4() {
  Rng rng(4);
  Index checks = 0;
  double worst = 0.0;
  for (int inst = 0; inst < 10; ++inst) {
    const Dataset data = test::linear_instance(50, 8, 3, 0.6, rng);
    LawOptions options;
    options.degenerate = true;
    const LawSet laws = make_laws(data, options);
    const auto& p = std::get<RegressionProblem>(laws.observed());
    HfdrConfig cfg;
    cfg.mc_samples = 3;
    cfg.seed = static_cast<std::uint64_t>(inst);
    const LassoSelector lasso(log_grid(lasso_lambda_max(p), 8, 0.01));
    const ForwardStepwiseSelector fs({1, 2, 4, 8});
    for (const Selector* selector : {static_cast<const Selector*>(&lasso), static_cast<const Selector*>(&fs)}) {
      const HfdrCurve curve = estimate_hfdr(laws, *selector, cfg);
      for (Index g = 0; g < curve.grid.size(); ++g) {
        if (curve.r[static_cast<std::size_t>(g)] < 1) continue;
        ++checks;
        worst = std::max(worst, std::abs(curve.hfdr(g) - 1.0));
      }
    }
  }
  return {checks > 0 && worst <= 1e-12, std::to_string(checks) + " curve points with R >= 1, max |hfdr - 1| " + fmt(worst)};
}

Outcome criterion5() {
  const Index reps = 2000;
  const double zeta = 0.1;
  bool pass = true;
  std::ostringstream detail;

  auto check = [&](const std::string& name, const std::function<Vector(Rng&)>& pvalues) {
    Rng rng(5);
    std::vector<double> phi, p0;
    for (Index r = 0; r < reps; ++r) {
      const Vector p = pvalues(rng);
      p0.push_back(p(0));
      phi.push_back(phi_canonical(p(0), zeta));
    }
    const double m = test::mean(phi);
    const double se = test::sample_sd(phi) / std::sqrt(static_cast<double>(reps));
    const double ks = test::ks_uniform_pvalue(p0);
    const bool ok = std::abs(m - 1.0) <= 3.0 * se && ks > 0.01;
    pass = pass && ok;
    detail << name << ": mean phi " << fmt(m) << " (s.e. " << fmt(se) << "), KS p " << fmt(ks) << "; ";
  };

  check("linear", [](Rng& rng) {
    return make_laws(test::linear_instance(40, 6, 0, 0.0, rng)).pvalues();
  });
  check("graphical", [](Rng& rng) {
    return make_laws(Dataset::graphical(test::gaussian_matrix(60, 5, rng))).pvalues();
  });
  check("model-X CRT", [](Rng& rng) {
    const Matrix x = test::gaussian_matrix(40, 4, rng);
    const Vector y = x.col(1) + test::gaussian_vector(40, rng);
    LawOptions options;
    options.covariate_law = std::make_shared<Ar1CovariateLaw>(0.0);
    options.crt_samples = 199;
    options.seed = static_cast<std::uint64_t>(rng());
    return make_laws(Dataset::regression(x, y, Setting::model_x), options).pvalues();
  });
  return {pass, detail.str()};
}

Outcome criterion6() {
  const ScenarioSpec spec = desk_spec(Family::iid_normal);
  const Vector grid = pilot_grid(spec, SelectorKind::lasso);
  const LassoSelector selector(grid);
  const SimulationResult truth = run_simulation(spec, selector, sim_options(200, HfdrMode::exact_when_available));
  const Vector sd_true = column_sd(truth.hfdr);

  SimulationOptions options = sim_options(20, HfdrMode::exact_when_available);
  options.bootstrap_runs = 20;
  options.boot_replicates = 10;
  const SimulationResult boot = run_simulation(spec, selector, options);

  bool pass = true;
  std::ostringstream detail;
  detail << "median se/sd_true:";
  for (Index t = 0; t < grid.size(); ++t) {
    // Exact integrals are accurate to about 1e-12 per hypothesis, so smaller
    // spreads are numerical zeros.
    if (sd_true(t) <= 1e-9) {
      detail << " -";
      continue;
    }
    std::vector<double> ratios;
    for (Index b = 0; b < boot.se.rows(); ++b) ratios.push_back(boot.se(b, t) / sd_true(t));
    const double med = quantile(ratios, 0.5);
    pass = pass && med >= 0.5 && med <= 2.0;
    detail << " " << fmt(med, 3);
  }
  return {pass, detail.str()};
}

Outcome criterion7() {
  Rng rng(7);
  Index outside = 0, checks = 0;
  double worst_exact = 0.0;
  const ForwardStepwiseSelector fs({1, 2, 3, 5, 8});
  for (int inst = 0; inst < 20; ++inst) {
    const Dataset data = test::linear_instance(80, 12, 3, 0.4, rng);
    const LawSet laws = make_laws(data);
    HfdrConfig cfg;
    cfg.mc_samples = 200;
    cfg.seed = static_cast<std::uint64_t>(inst);
    const HfdrCurve mc = estimate_hfdr(laws, fs, cfg);
    cfg.mode = HfdrMode::exact_when_available;
    const HfdrCurve exact = estimate_hfdr(laws, fs, cfg);
    for (Index g = 0; g < fs.grid_size(); ++g) {
      const double k = fs.grid()(g);
      ++checks;
      outside += std::abs(mc.hfdr(g) - mc.hpfer(g) / k) > 4.0 * mc.hfdr_mc_se(g) + 1e-12;
      worst_exact = std::max(worst_exact, std::abs(exact.hfdr(g) - exact.hpfer(g) / k));
    }
  }
  return {outside == 0 && worst_exact <= 1e-12,
          "MC outside 4 s.e. " + std::to_string(outside) + "/" + std::to_string(checks) +
              ", exact max |hfdr - hpfer/k| " + fmt(worst_exact)};
}

Outcome criterion8() {
  std::vector<double> logd, logsd;
  std::ostringstream detail;
  for (Index d : {100, 400, 1600}) {
    const CounterexampleResult r = equicorrelated_counterexample(d, 200, 0.8, 8);
    logd.push_back(std::log(static_cast<double>(d)));
    logsd.push_back(std::log(r.sd_hfdr));
    detail << "sd(d=" << d << ") " << fmt(r.sd_hfdr) << ", ";
  }
  const double mx = test::mean(logd), my = test::mean(logsd);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < logd.size(); ++i) {
    sxy += (logd[i] - mx) * (logsd[i] - my);
    sxx += (logd[i] - mx) * (logd[i] - mx);
  }
  const double slope = sxy / sxx;
  detail << "slope " << fmt(slope) << "; ";

  const ScenarioSpec spec = desk_spec(Family::mcc_equicorrelated);
  const SimulationResult sim =
      run_simulation(spec, SelectorKind::lasso, sim_options(200, HfdrMode::exact_when_available));
  Index wider = 0, compared = 0;
  detail << "MCC band hfdr/fdp:";
  for (Index t = 0; t < sim.grid.size(); ++t) {
    std::vector<double> h(sim.hfdr.col(t).data(), sim.hfdr.col(t).data() + sim.hfdr.rows());
    std::vector<double> f(sim.fdp.col(t).data(), sim.fdp.col(t).data() + sim.fdp.rows());
    const double hb = quantile(h, 0.95) - quantile(h, 0.05);
    const double fb = quantile(f, 0.95) - quantile(f, 0.05);
    detail << " " << fmt(hb, 3) << "/" << fmt(fb, 3);
    if (hb == 0.0 && fb == 0.0) continue;
    ++compared;
    wider += hb > fb;
  }
  return {slope > -0.15 && compared > 0 && 2 * wider > compared, detail.str()};
}

Outcome criterion9() {
  std::vector<double> sds;
  std::ostringstream detail;
  const double lambda = 2.5;
  for (Index blocks : {16, 32, 64}) {
    ScenarioSpec spec = default_spec(Family::block_orthogonal);
    spec.block_size = 4;
    spec.d = 4 * blocks;
    spec.n = 2 * spec.d;
    spec.d1 = (3 * blocks) / 8;
    spec.theta_star = 3.0 / std::sqrt(static_cast<double>(spec.n));
    spec.seed = 9;
    const SimulationResult sim =
        run_simulation(spec, LassoSelector(Vector::Constant(1, lambda)), sim_options(200, HfdrMode::exact_when_available));
    const std::vector<double> h(sim.hfdr.data(), sim.hfdr.data() + sim.hfdr.rows());
    sds.push_back(test::sample_sd(h));
    detail << "K=" << blocks << " sd " << fmt(sds.back()) << " (mean hfdr " << fmt(test::mean(h)) << ", mean fdp "
           << fmt(sim.mean_fdp()(0)) << "); ";
  }
  return {sds[0] > sds[1] && sds[1] > sds[2], detail.str()};
}

Outcome criterion10() {
  const ScenarioSpec spec = desk_spec(Family::graphical);
  const SimulationResult sim =
      run_simulation(spec, SelectorKind::graphical_lasso, sim_options(200, HfdrMode::monte_carlo));
  const double margin = conservative_margin(sim);
  std::cout << "  graphical hfdr/fdp: " << curve_text(sim) << "\n";
  return {margin >= 0.0, "min margin " + fmt(margin)};
}

Outcome criterion11() {
  bool pass = true;
  std::ostringstream detail;
  const double theta = *desk_spec(Family::iid_normal).theta_star;
  for (Family f : {Family::heteroscedastic, Family::t_noise, Family::exponential_x, Family::x_perturbation}) {
    ScenarioSpec spec = default_spec(f);
    spec.seed = 1;
    spec.theta_star = theta;
    const bool model_x = setting_of(f) == Setting::model_x;
    const SimulationResult sim =
        run_simulation(spec, SelectorKind::lasso,
                       sim_options(200, model_x ? HfdrMode::monte_carlo : HfdrMode::exact_when_available));
    const double gap = (sim.mean_hfdr() - sim.mean_fdp()).minCoeff();
    pass = pass && gap >= -0.05;
    std::cout << "  " << to_string(f) << " hfdr/fdp: " << curve_text(sim) << "\n";
    detail << to_string(f) << " min(mean hfdr - mean fdp) " << fmt(gap) << "; ";
  }
  return {pass, detail.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

Outcome criterion12() {
  const fs::path root = fs::temp_directory_path() / "hfdr_acceptance_cli";
  fs::remove_all(root);
  fs::create_directories(root);

  Rng rng(12);
  const Dataset linear = test::linear_instance(60, 8, 3, 0.6, rng);
  {
    std::ofstream f(root / "linear.csv");
    f.precision(17);
    f << "a,b,c,d,e,f,g,h,y\n";
    for (Index i = 0; i < 60; ++i) {
      for (Index j = 0; j < 8; ++j) f << linear.x()(i, j) << ',';
      f << linear.y()(i) << '\n';
    }
  }
  {
    const Matrix x = test::gaussian_matrix(80, 5, rng);
    std::ofstream f(root / "graph.csv");
    f.precision(17);
    f << "v1,v2,v3,v4,v5\n";
    for (Index i = 0; i < 80; ++i)
      for (Index j = 0; j < 5; ++j) f << x(i, j) << (j == 4 ? '\n' : ',');
  }
  {
    std::ofstream f(root / "modelx.json");
    f << R"({"covariate_law": {"type": "ar1", "rho": 0.0}, "crt_samples": 49})";
  }

  const std::string lin = "--data " + (root / "linear.csv").string() + " --response y --n-lambda 5 --seed 3";
  struct Case {
    std::string name, command, args;
  };
  const std::vector<Case> commands{
      {"estimate", "estimate", lin},
      {"estimate-exact", "estimate", lin + " --mode exact"},
      {"estimate-fs", "estimate", lin + " --selector forward_stepwise --grid 1,2,3"},
      {"estimate-graph", "estimate",
       "--data " + (root / "graph.csv").string() + " --setting gaussian_graphical --n-lambda 4 --seed 3"},
      {"estimate-modelx", "estimate", lin + " --setting model_x --config " + (root / "modelx.json").string()},
      {"cv", "cv", lin + " --folds 5"},
      {"bootstrap-se", "bootstrap-se", lin + " --boot-M 3"},
      {"simulate", "simulate",
       "--family iid_normal --n 60 --d 10 --d1 3 --theta-star 0.5 --replicates 4 --bootstrap-runs 1 --boot-M 2 "
       "--n-lambda 4 --seed 3"},
      {"simulate-counter", "simulate", "--family equicorrelated_threshold --d 50 --replicates 20 --seed 3"},
      {"calibrate", "calibrate", "--family iid_normal --n 60 --d 10 --d1 3 --replicates 10 --seed 3"},
  };

  Index mismatched = 0, failed = 0, files = 0;
  for (const auto& [name, sub, args] : commands) {
    std::vector<fs::path> dirs;
    for (const std::string run : {"w1a", "w1b", "w4"}) {
      const fs::path out = root / name / run;
      const std::string workers = run == "w4" ? "4" : "1";
      const std::string command = std::string(HFDR_CLI_PATH) + " " + sub + " " + args + " --quiet --workers " +
                                  workers + " --out " + out.string() + " >/dev/null 2>&1";
      const int status = std::system(command.c_str());
      if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        ++failed;
        std::cout << "  command failed: " << name << " (" << run << ")\n";
      }
      dirs.push_back(out);
    }
    for (const auto& entry : fs::directory_iterator(dirs[0])) {
      ++files;
      const std::string ref = slurp(entry.path());
      for (std::size_t k = 1; k < dirs.size(); ++k)
        if (slurp(dirs[k] / entry.path().filename()) != ref) {
          ++mismatched;
          std::cout << "  differs: " << name << "/" << entry.path().filename().string() << "\n";
        }
    }
  }
  return {failed == 0 && mismatched == 0 && files > 0,
          std::to_string(commands.size()) + " commands, " + std::to_string(files) + " files compared, " +
              std::to_string(mismatched) + " mismatches, " + std::to_string(failed) + " failed runs"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<Outcome()>> criteria{criterion1, criterion2, criterion3, criterion4,
                                                       criterion5, criterion6, criterion7, criterion8,
                                                       criterion9, criterion10, criterion11, criterion12};
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  bool all = true;
  for (std::size_t c = 0; c < criteria.size(); ++c) {
    const int number = static_cast<int>(c) + 1;
    if (!wanted.empty() && !wanted.count(number)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = criteria[c]();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << "criterion " << number << ": " << (outcome.pass ? "PASS" : "FAIL") << "  " << outcome.detail << " ["
              << fmt(seconds, 3) << " s]" << std::endl;
    all = all && outcome.pass;
  }
  return all ? 0 : 1;
}
