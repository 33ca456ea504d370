#pragma once

#include "hfdr/cv.hpp"
#include "hfdr/estimator.hpp"

#include <limits>

namespace hfdr {

enum class NullSetSource { cv_complement, pvalue_rule };

struct NullSetEstimate {
  SelectionSet h0_hat;
  NullSetSource source = NullSetSource::pvalue_rule;
  double lambda_cv = std::numeric_limits<double>::quiet_NaN();
};

// {j : p_j > threshold}.
NullSetEstimate pvalue_null_set(const Vector& pvalues, double threshold = 0.1);

// Complement of the full-data selection at the grid value whose constrained
// MLE has the best validation likelihood. Linear and graphical settings.
NullSetEstimate cv_null_set(const Dataset& data, const Selector& selector, const CvOptions& options = {});

// Gaussian linear model on the original scale: y = intercept + x theta + sigma eps.
struct LinearModel {
  double intercept = 0.0;
  Vector theta;
  double sigma = 0.0;
};

// OLS on the columns outside h0_hat; sigma from the residuals with denominator n.
LinearModel constrained_mle_linear(const Dataset& data, const SelectionSet& h0_hat);

// Inverse of `s` with the entries listed in h0_hat (pair indices) set to zero,
// shifted by a multiple of the identity when zeroing breaks positive definiteness.
Matrix constrained_mle_graphical(const Matrix& s, const SelectionSet& h0_hat);
double pd_margin(const Matrix& theta);

struct BootstrapResult {
  Vector se;          // per grid value
  Matrix replicates;  // M by grid
};

// Sample standard deviation of each column.
Vector column_sd(const Matrix& replicates);

struct BootstrapOptions {
  Index replicates = 10;
  LawOptions laws;  // covariate law and CRT settings for the model-X scheme
};

// Parametric scheme: draw datasets from the MLE under the intersection null
// model of h0_hat and recompute the estimate on each.
BootstrapResult bootstrap_se_parametric(const Dataset& data, const Selector& selector, const HfdrConfig& cfg,
                                        const SelectionSet& h0_hat, const BootstrapOptions& options = {});

// Model-X scheme: resample rows of (y, x_{-H0}), then redraw x_{H0} from the
// covariate law given the resampled x_{-H0}.
BootstrapResult bootstrap_se_modelx(const Dataset& data, const Selector& selector, const HfdrConfig& cfg,
                                    const SelectionSet& h0_hat, const BootstrapOptions& options);

// One bootstrap design of the model-X scheme (exposed for testing).
std::pair<Matrix, Vector> modelx_bootstrap_draw(const Dataset& data, const CovariateLaw& law,
                                                const SelectionSet& h0_hat, Rng& rng);

}  // namespace hfdr
