#pragma once

#include "hfdr/selectors.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace hfdr {

enum class CvMetric { mse, neg_loglik };

std::string to_string(CvMetric m);

struct CvOptions {
  Index folds = 10;
  std::uint64_t seed = 0;
  // Predict with OLS on the selected columns instead of the penalized fit.
  bool refit_ols = false;
  int workers = 0;
};

struct CvCurve {
  Vector grid;
  Vector mean_error;
  Vector se_error;
  Matrix fold_errors;  // folds by grid
  Index index_min = 0;
  Index index_1se = 0;
  double lambda_min = 0.0;
  double lambda_1se = 0.0;
  CvMetric metric = CvMetric::mse;
  std::vector<Index> fold_of;  // fold of every row
};

// Seeded random permutation cut into contiguous blocks.
std::vector<Index> assign_folds(Index n, Index folds, std::uint64_t seed);

// K-fold curve over the selector grid. The metric must match the setting:
// mse for linear regression, neg_loglik for logistic and graphical selectors.
CvCurve cv_curve(const Dataset& data, const Selector& selector, CvMetric metric, const CvOptions& options = {});
CvCurve cv_curve(const Dataset& data, const Selector& selector, CvMetric metric,
                 const std::vector<Index>& fold_of, const CvOptions& options = {});

// Most regularized grid index whose mean is within one s.e. of the minimum.
// Grids run from the most to the least regularized value.
Index one_se_index(const Vector& mean_error, const Vector& se_error);
double one_se_rule(const CvCurve& curve);

// Sample second-moment matrix used by the graphical selectors (mean-zero model).
Matrix second_moment(const Matrix& x);
// Average Gaussian negative log-likelihood of rows with second moment `s`
// under precision `theta`, without the constant.
double gaussian_neg_loglik(const Matrix& s, const Matrix& theta);

}  // namespace hfdr
