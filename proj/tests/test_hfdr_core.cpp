#include "doctest.h"
#include "support.hpp"

#include "hfdr/estimator.hpp"

#include <numeric>

using namespace hfdr;

namespace {

CallbackSelector constant_selector(bool everything, Index grid_points = 3) {
  return CallbackSelector(Vector::LinSpaced(grid_points, 3.0, 1.0), [everything, grid_points](const Problem& q) {
    const Index d = std::get<RegressionProblem>(q).d();
    std::vector<Index> all;
    if (everything) {
      all.resize(static_cast<std::size_t>(d));
      std::iota(all.begin(), all.end(), 0);
    }
    return std::vector<SelectionSet>(static_cast<std::size_t>(grid_points), SelectionSet(all));
  });
}

Vector uniform_pvalues(Index d, Rng& rng) {
  std::uniform_real_distribution<double> u;
  Vector p(d);
  for (Index j = 0; j < d; ++j) p(j) = u(rng);
  return p;
}

}  // namespace

TEST_CASE("constant selectors") {
  Rng rng(1);
  const Dataset data = test::linear_instance(40, 6, 2, 0.5, rng);
  const LawSet laws = make_laws(data);
  HfdrConfig cfg;
  cfg.mc_samples = 5;

  const CallbackSelector all = constant_selector(true);
  const CallbackSelector none = constant_selector(false);
  for (Index j = 0; j < 6; ++j) {
    const StarEstimate a = hfdr_star_mc(laws[j], all, cfg);
    CHECK((a.hfdr_star.array() == 1.0 / 6.0).all());
    CHECK((a.se.array() == 0.0).all());
    const StarEstimate b = hfdr_star_mc(laws[j], none, cfg);
    CHECK((b.hfdr_star.array() == 0.0).all());
  }
  const HfdrCurve curve = estimate_hfdr(laws, all, cfg);
  const double phi_sum = curve.phi.sum();
  for (Index g = 0; g < 3; ++g) CHECK(curve.hfdr(g) == doctest::Approx(phi_sum / 6.0).epsilon(1e-14));
  CHECK((estimate_hfdr(laws, none, cfg).hfdr.array() == 0.0).all());
}

TEST_CASE("p-value thresholding matches c / (R_-j + 1)") {
  Rng rng(2);
  const double zeta = 0.1;
  Vector thresholds(3);
  thresholds << 0.1, 0.05, 0.01;
  const PThresholdSelector selector(thresholds);
  Index checks = 0, within = 0;
  for (int rep = 0; rep < 5; ++rep) {
    const Vector p = uniform_pvalues(12, rng);
    const LawSet laws = make_pvalue_laws(p);
    HfdrConfig cfg;
    cfg.zeta = zeta;
    cfg.mc_samples = 4000;
    cfg.seed = static_cast<std::uint64_t>(rep);
    for (Index j = 0; j < 12; ++j) {
      const StarEstimate est = hfdr_star_mc(laws[j], selector, cfg);
      for (Index g = 0; g < 3; ++g) {
        const double c = thresholds(g);
        Index others = 0;
        for (Index k = 0; k < 12; ++k)
          if (k != j && p(k) <= c) ++others;
        const double expected = c / static_cast<double>(others + 1);
        // Binomial s.e. of the selection frequency, scaled by the fixed 1 / (R_-j + 1).
        const double se = std::sqrt(c * (1.0 - c) / cfg.mc_samples) / static_cast<double>(others + 1);
        ++checks;
        within += std::abs(est.hfdr_star(g) - expected) <= 3.0 * se;
      }
    }

    HfdrConfig exact = cfg;
    exact.mode = HfdrMode::exact_when_available;
    const HfdrCurve curve = estimate_hfdr(laws, selector, exact);
    for (Index g = 0; g < 3; ++g) {
      CHECK(curve.hfdr(g) == doctest::Approx(hfdr_pthreshold_closed_form(p, thresholds(g), zeta)).epsilon(1e-12));
      const double large = static_cast<double>((p.array() > zeta).count());
      CHECK(curve.hpfer(g) == doctest::Approx(thresholds(g) * large / (1.0 - zeta)).epsilon(1e-12));
    }
  }
  // Under a correct law about 99.7% of the comparisons fall within 3 s.e.
  CHECK(static_cast<double>(within) >= 0.98 * static_cast<double>(checks));
}

TEST_CASE("hfdr vanishes when every phi is zero") {
  const Vector p = Vector::Constant(8, 0.05);
  const LawSet laws = make_pvalue_laws(p);
  Vector thresholds(2);
  thresholds << 0.1, 0.06;
  const PThresholdSelector selector(thresholds);
  HfdrConfig cfg;
  const HfdrCurve curve = estimate_hfdr(laws, selector, cfg);
  CHECK((curve.hfdr.array() == 0.0).all());
  CHECK((curve.hpfer.array() == 0.0).all());
  CHECK(hfdr_pthreshold_closed_form(p, 0.05, 0.1) == 0.0);
}

TEST_CASE("closed form and Storey") {
  Vector p(4);
  p << 0.001, 0.002, 0.9, 0.8;
  CHECK(hfdr_pthreshold_closed_form(p, 0.05, 0.1) == doctest::Approx(0.05 / 3.0 * 2.0 / 0.9).epsilon(1e-15));
  CHECK(storey_estimate(p, 0.05, 0.1) == doctest::Approx(0.05 / 2.0 * 2.0 / 0.9).epsilon(1e-15));
  CHECK_THROWS_AS(hfdr_pthreshold_closed_form(p, 0.2, 0.1), InvalidArgument);

  Rng rng(3);
  for (int rep = 0; rep < 200; ++rep) {
    const Vector q = uniform_pvalues(20, rng);
    for (double c : {0.01, 0.05, 0.1})
      if ((q.array() <= c).any()) CHECK(hfdr_pthreshold_closed_form(q, c, 0.1) <= storey_estimate(q, c, 0.1));
  }
}

TEST_CASE("degenerate conditioning gives hfdr = 1 whenever something is selected") {
  Rng rng(4);
  const Dataset data = test::linear_instance(50, 8, 3, 0.6, rng);
  const LawSet laws = make_laws(data, LawOptions{nullptr, 199, 0, true});
  const auto& p = std::get<RegressionProblem>(laws.observed());
  const LassoSelector selector(log_grid(lasso_lambda_max(p), 6, 0.05));
  HfdrConfig cfg;
  cfg.mc_samples = 3;
  const HfdrCurve curve = estimate_hfdr(laws, selector, cfg);
  for (Index g = 0; g < 6; ++g) {
    if (curve.r[static_cast<std::size_t>(g)] >= 1)
      CHECK(curve.hfdr(g) == doctest::Approx(1.0).epsilon(1e-12));
    else
      CHECK(curve.hfdr(g) == 0.0);
  }
}

TEST_CASE("estimates do not depend on the worker count") {
  Rng rng(5);
  const Dataset data = test::linear_instance(60, 10, 3, 0.4, rng);
  const LawSet laws = make_laws(data);
  const auto& p = std::get<RegressionProblem>(laws.observed());
  const LassoSelector selector(log_grid(lasso_lambda_max(p), 5, 0.05));
  HfdrConfig cfg;
  cfg.mc_samples = 10;
  cfg.seed = 9;
  cfg.workers = 1;
  const HfdrCurve one = estimate_hfdr(laws, selector, cfg);
  cfg.workers = 4;
  const HfdrCurve four = estimate_hfdr(laws, selector, cfg);
  CHECK(one.hfdr == four.hfdr);
  CHECK(one.hfdr_star == four.hfdr_star);
  cfg.seed = 10;
  CHECK(estimate_hfdr(laws, selector, cfg).hfdr != one.hfdr);
}

TEST_CASE("invalid configurations are rejected") {
  const LawSet laws = make_pvalue_laws(Vector::Constant(3, 0.5));
  const PThresholdSelector selector(Vector::Constant(1, 0.05));
  HfdrConfig cfg;
  cfg.zeta = 0.0;
  CHECK_THROWS_AS(estimate_hfdr(laws, selector, cfg), InvalidArgument);
  cfg.zeta = 0.1;
  cfg.mc_samples = 0;
  CHECK_THROWS_AS(estimate_hfdr(laws, selector, cfg), InvalidArgument);
  CHECK_THROWS_AS(make_pvalue_laws(Vector::Constant(2, 1.5)), InvalidArgument);
}
