#include "doctest.h"
#include "support.hpp"

#include "hfdr/exact.hpp"

#include <algorithm>

using namespace hfdr;

namespace {

SelectionSet refit_active(const LinearLaw& law, double v, double lambda) {
  const RegressionProblem p = law.at_t(law.geometry().t_from_v(v));
  return lasso_fit(*p.gram, p.xty, lambda, SolverOptions{1000000, 1e-13}).active_set;
}

bool fs_selects(const LinearLaw& law, double v, Index k) {
  const RegressionProblem p = law.at_t(law.geometry().t_from_v(v));
  const auto order = forward_stepwise(*p.gram, p.xty, k);
  return std::find(order.begin(), order.end(), law.index()) != order.end();
}

bool in_regions(const std::vector<VInterval>& regions, double v) {
  return std::any_of(regions.begin(), regions.end(), [v](const VInterval& iv) { return v > iv.lo && v < iv.hi; });
}

}  // namespace

TEST_CASE("homotopy under an orthonormal design") {
  Rng rng(1);
  const Matrix x = test::orthonormal_columns(40, 5, rng);
  const Vector y = test::gaussian_vector(40, rng);
  const Dataset data = Dataset::regression(x, y, Setting::gaussian_linear, {}, false);
  const auto ctx = make_linear_context(data);
  const double lambda = 0.6;
  for (Index j = 0; j < 5; ++j) {
    const LinearLaw law(ctx, j);
    REQUIRE(law.geometry().base == doctest::Approx(0.0).scale(1.0));
    REQUIRE(law.geometry().scale == doctest::Approx(1.0));
    const PiecewiseSelectionPath path = lasso_homotopy_path(law, lambda);
    REQUIRE(path.knots() == 2);
    CHECK(path.breakpoints[0] == doctest::Approx(-lambda).epsilon(1e-12));
    CHECK(path.breakpoints[1] == doctest::Approx(lambda).epsilon(1e-12));
    CHECK(path.segments[0].selected);
    CHECK_FALSE(path.segments[1].selected);
    CHECK(path.segments[2].selected);
    CHECK(path.segments[0].r == path.segments[1].r + 1);
    CHECK(path.segments[2].r == path.segments[1].r + 1);
  }
}

TEST_CASE("homotopy segments match refits") {
  Rng rng(2);
  SUBCASE("lambda just below lambda_max") {
    const Dataset data = test::linear_instance(100, 6, 1, 0.5, rng);
    const auto ctx = make_linear_context(data);
    const double lmax = lasso_lambda_max(ctx->observed);
    const double lambda = 0.98 * lmax;
    const SelectionSet observed = lasso_fit(*ctx->observed.gram, ctx->observed.xty, lambda).active_set;
    REQUIRE(observed.size() == 1);
    for (Index j = 0; j < 6; ++j) {
      const LinearLaw law(ctx, j);
      const PiecewiseSelectionPath path = lasso_homotopy_path(law, lambda);
      // The active variable leaves and comes back with the other sign when
      // the support reaches -lambda.
      const LinearGeometry& g = law.geometry();
      if (observed.contains(j) && g.coordinate(-g.r()) < -lambda) CHECK(path.knots() >= 2);
      const double lo = path.segments.front().lo, hi = path.segments.back().hi;
      for (int probe = 0; probe < 200; ++probe) {
        const double v = lo + (hi - lo) * (probe + 0.5) / 200.0;
        CHECK(path.segment_at(v).active == refit_active(law, v, lambda));
      }
    }
  }

  SUBCASE("random 20 x 8 instance at every segment midpoint") {
    const Dataset data = test::linear_instance(20, 8, 3, 0.8, rng);
    const auto ctx = make_linear_context(data);
    const double lmax = lasso_lambda_max(ctx->observed);
    for (double f : {0.6, 0.3, 0.1}) {
      for (Index j = 0; j < 8; ++j) {
        const LinearLaw law(ctx, j);
        const PiecewiseSelectionPath path = lasso_homotopy_path(law, f * lmax);
        for (const PathSegment& s : path.segments) CHECK(s.active == refit_active(law, 0.5 * (s.lo + s.hi), f * lmax));
      }
    }
  }
}

TEST_CASE("exact lasso integrals") {
  Rng rng(3);
  const Dataset data = test::linear_instance(30, 6, 2, 0.7, rng);
  const auto ctx = make_linear_context(data);
  const LinearLaw law(ctx, 4);
  const double r = law.geometry().r();

  PiecewiseSelectionPath never;
  never.segments.push_back({-r, r, SelectionSet({0, 1}), false, 2});
  CHECK(hfdr_star_lasso_exact(never, law) == 0.0);

  PiecewiseSelectionPath always;
  always.segments.push_back({-r, 0.0, SelectionSet({0, 1, 2, 3, 4}), true, 5});
  always.segments.push_back({0.0, r, SelectionSet({0, 1, 2, 4, 5}), true, 5});
  always.breakpoints.push_back(0.0);
  CHECK(hfdr_star_lasso_exact(always, law) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(selection_prob_lasso_exact(always, law) == doctest::Approx(1.0).epsilon(1e-12));

  const double lambda = 0.3 * lasso_lambda_max(ctx->observed);
  const LassoSelector selector(Vector::Constant(1, lambda));
  HfdrConfig cfg;
  cfg.mc_samples = 100000;
  cfg.seed = 17;
  for (Index j : {0, 4}) {
    const LinearLaw lj(ctx, j);
    const double exact = hfdr_star_lasso_exact(lasso_homotopy_path(lj, lambda), lj);
    const StarEstimate mc = hfdr_star_mc(lj, selector, cfg);
    CHECK(std::abs(exact - mc.hfdr_star(0)) <= 4.0 * std::max(mc.se(0), 1.0 / cfg.mc_samples));
  }
}

TEST_CASE("forward stepwise regions") {
  Rng rng(4);
  SUBCASE("k = 1 under an orthonormal design") {
    const Matrix x = test::orthonormal_columns(30, 5, rng);
    const Vector y = test::gaussian_vector(30, rng);
    const Dataset data = Dataset::regression(x, y, Setting::gaussian_linear, {}, false);
    const auto ctx = make_linear_context(data);
    const Vector z = x.transpose() * y;
    for (Index j = 0; j < 5; ++j) {
      const LinearLaw law(ctx, j);
      double rival = 0.0;
      for (Index i = 0; i < 5; ++i)
        if (i != j) rival = std::max(rival, std::abs(z(i)));
      const auto regions = fs_selection_regions(law, 1);
      const double r = law.geometry().r();
      REQUIRE(regions.size() == 2);
      CHECK(regions[0].lo == doctest::Approx(-r));
      CHECK(regions[0].hi == doctest::Approx(-rival).epsilon(1e-12));
      CHECK(regions[1].lo == doctest::Approx(rival).epsilon(1e-12));
      CHECK(regions[1].hi == doctest::Approx(r));
      for (Index k : {2, 3}) {
        const auto rk = fs_selection_regions(law, k);
        REQUIRE(rk.size() == 2);
        CHECK(rk[0].hi == doctest::Approx(-rk[1].lo).epsilon(1e-12));
      }
    }
  }

  SUBCASE("random 30 x 6 instance against direct reruns") {
    const Dataset data = test::linear_instance(30, 6, 2, 0.6, rng);
    const auto ctx = make_linear_context(data);
    for (Index j = 0; j < 6; ++j) {
      const LinearLaw law(ctx, j);
      const double r = law.geometry().r();
      for (Index k : {1, 2, 3}) {
        const auto regions = fs_selection_regions(law, k);
        Index mismatches = 0;
        for (int probe = 0; probe < 500; ++probe) {
          const double v = -r + 2.0 * r * (probe + 0.5) / 500.0;
          mismatches += in_regions(regions, v) != fs_selects(law, v, k);
        }
        CHECK(mismatches == 0);
      }
    }
  }

  SUBCASE("region probabilities") {
    const Dataset data = test::linear_instance(30, 6, 2, 0.6, rng);
    const LinearLaw law(make_linear_context(data), 2);
    const double r = law.geometry().r();
    CHECK(hfdr_star_fs_exact({}, law, 3) == 0.0);
    CHECK(hfdr_star_fs_exact({{-r, r}}, law, 3) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    CHECK(region_probability({{-r, 0.0}}, law) == doctest::Approx(0.5).epsilon(1e-14));
  }
}

TEST_CASE("exact mode inside the estimator") {
  Rng rng(5);
  const Dataset data = test::linear_instance(60, 10, 3, 0.4, rng);
  const LawSet laws = make_laws(data);
  const auto& p = std::get<RegressionProblem>(laws.observed());
  const LassoSelector selector(log_grid(lasso_lambda_max(p), 5, 0.05));
  HfdrConfig cfg;
  cfg.mode = HfdrMode::exact_when_available;
  const HfdrCurve curve = estimate_hfdr(laws, selector, cfg);
  CHECK(curve.fallbacks == 0);
  for (Index h = 0; h < laws.size(); ++h) CHECK(curve.exact[static_cast<std::size_t>(h)] == (curve.phi(h) != 0.0));
  CHECK((curve.hfdr_mc_se.array() == 0.0).all());

  // The shared observed start gives the same paths as a cold start.
  const ExactWorkspace workspace(laws.observed(), selector);
  for (Index g = 0; g < 5; ++g) {
    const auto& law = dynamic_cast<const LinearLaw&>(laws[3]);
    const auto warm = lasso_homotopy_path(law, selector.grid()(g), {}, workspace.lasso(g));
    const auto cold = lasso_homotopy_path(law, selector.grid()(g));
    REQUIRE(warm.knots() == cold.knots());
    for (Index b = 0; b < warm.knots(); ++b)
      CHECK(warm.breakpoints[static_cast<std::size_t>(b)] ==
            doctest::Approx(cold.breakpoints[static_cast<std::size_t>(b)]).epsilon(1e-9));
  }

  const ForwardStepwiseSelector fs({1, 2, 3});
  const HfdrCurve fcurve = estimate_hfdr(laws, fs, cfg);
  CHECK(fcurve.fallbacks == 0);
  for (Index g = 0; g < 3; ++g)
    CHECK(fcurve.hfdr(g) == doctest::Approx(fcurve.hpfer(g) / static_cast<double>(g + 1)).epsilon(1e-12));
}
