#pragma once

#include "hfdr/laws.hpp"
#include "hfdr/selectors.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace hfdr {

enum class HfdrMode { monte_carlo, exact_when_available };

std::string to_string(HfdrMode m);
HfdrMode parse_mode(std::string_view s);

struct HfdrConfig {
  double zeta = 0.1;
  Index mc_samples = 20;
  HfdrMode mode = HfdrMode::monte_carlo;
  std::uint64_t seed = 0;
  int workers = 0;  // 0 = all available cores
};

// Estimates along a tuning grid. Matrices are grid-size by hypothesis count.
struct HfdrCurve {
  Vector grid;
  Vector hfdr;
  Vector hfdr_mc_se;  // Monte Carlo error of hfdr (zero for exact contributions)
  Vector hpfer;
  std::vector<Index> r;                 // observed selection counts
  std::vector<SelectionSet> selections;  // observed selections
  Vector pvalues;
  Vector phi;  // per hypothesis, constant over the grid
  Matrix per_variable;
  Matrix hfdr_star;
  Matrix hfdr_star_se;
  Matrix selection_prob;
  std::vector<bool> exact;  // per hypothesis: computed without Monte Carlo
  Index fallbacks = 0;      // exact attempts that fell back to Monte Carlo

  Matrix phi_matrix() const { return phi.transpose().replicate(grid.size(), 1); }
};

// Conditional expectations for one hypothesis along the grid.
struct StarEstimate {
  Vector hfdr_star;
  Vector se;
  Vector selection_prob;
};

// Monte Carlo average of 1{j in R}/R (0/0 = 0) over conditional resamples.
// `observed` warm-starts every refit.
StarEstimate hfdr_star_mc(const ConditionalLaw& law, const Selector& selector, const HfdrConfig& cfg,
                          const PathFit* observed = nullptr);

HfdrCurve estimate_hfdr(const LawSet& laws, const Selector& selector, const HfdrConfig& cfg);

// Inflated sum of conditional selection probabilities; one value per grid point.
Vector hpfer(const LawSet& laws, const Selector& selector, const HfdrConfig& cfg);

// Threshold selection on independent p-values, c <= zeta:
// c / (R(c) + 1) * #{p > zeta} / (1 - zeta).
double hfdr_pthreshold_closed_form(const Vector& pvalues, double c, double zeta);
// Storey's c / R(c) * #{p > zeta} / (1 - zeta), zero when R(c) = 0.
double storey_estimate(const Vector& pvalues, double c, double zeta);

}  // namespace hfdr
