#pragma once

#include "hfdr/estimator.hpp"

#include <optional>
#include <vector>

namespace hfdr {

struct ExactOptions {
  double event_tol = 1e-9;
  double tail_mass = 1e-12;  // the sweep stops once less t-mass lies beyond it
  Index max_events = 100000;
};

// One open interval of the conditioned coordinate v on which the Lasso
// active set is constant.
struct PathSegment {
  double lo = 0.0;
  double hi = 0.0;
  SelectionSet active;
  bool selected = false;  // j in the active set
  Index r = 0;
};

struct PiecewiseSelectionPath {
  Index j = 0;
  double lambda = 0.0;
  std::vector<double> breakpoints;  // strictly increasing, interior knots only
  std::vector<PathSegment> segments;
  Index matvecs = 0;  // Gram-column products spent on the sweep

  Index knots() const { return static_cast<Index>(breakpoints.size()); }
  // Segment whose closure contains v; v outside the covered range maps to the nearest end.
  const PathSegment& segment_at(double v) const;
};

// Observed Lasso solution at one lambda with the inverse of its active Gram
// matrix; shared by the sweeps of every hypothesis.
struct LassoStart {
  double lambda = 0.0;
  std::vector<Index> active;
  Vector sigma;  // signs on the active set
  Matrix minv;
};

LassoStart lasso_start(const RegressionProblem& observed, double lambda, const Vector* warm = nullptr);

// Per-grid data reused across hypotheses by hfdr_star_exact.
class ExactWorkspace {
 public:
  ExactWorkspace() = default;
  ExactWorkspace(const Problem& observed, const Selector& selector);
  // Null when the start could not be built (the sweep then starts on its own).
  const LassoStart* lasso(Index g) const;

 private:
  std::vector<std::optional<LassoStart>> lasso_;
};

// Lasso solution path as X_j^T y moves over its conditional support with the
// rest of the sufficient statistic fixed. Throws DegenerateEvent on
// coincident events or a singular active Gram matrix.
PiecewiseSelectionPath lasso_homotopy_path(const LinearLaw& law, double lambda, const ExactOptions& opts = {},
                                           const LassoStart* start = nullptr);

// Integral of 1{j in R}/R against the conditional t law.
double hfdr_star_lasso_exact(const PiecewiseSelectionPath& path, const LinearLaw& law);
double selection_prob_lasso_exact(const PiecewiseSelectionPath& path, const LinearLaw& law);

struct VInterval {
  double lo = 0.0;
  double hi = 0.0;
};

// Values of v, within (-r, r), for which forward stepwise with k steps selects j.
std::vector<VInterval> fs_selection_regions(const LinearLaw& law, Index k);
// Same for every k in `steps` from one auxiliary run.
std::vector<std::vector<VInterval>> fs_selection_regions(const LinearLaw& law, const std::vector<Index>& steps);

// Conditional probability of a union of disjoint v-intervals.
double region_probability(const std::vector<VInterval>& regions, const LinearLaw& law);
double hfdr_star_fs_exact(const std::vector<VInterval>& regions, const LinearLaw& law, Index k);

// Exact conditional expectations along the selector grid when an algorithm
// exists for the (law, selector) pair: Lasso and forward stepwise under the
// linear law, thresholding of independent p-values. Empty otherwise.
std::optional<StarEstimate> hfdr_star_exact(const ConditionalLaw& law, const Selector& selector,
                                            const ExactOptions& opts = {}, const ExactWorkspace* workspace = nullptr);

}  // namespace hfdr
