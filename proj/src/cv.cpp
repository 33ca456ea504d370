#include "hfdr/cv.hpp"

#include "hfdr/bootstrap.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <numeric>

namespace hfdr {

std::string to_string(CvMetric m) { return m == CvMetric::mse ? "mse" : "neg_loglik"; }

std::vector<Index> assign_folds(Index n, Index folds, std::uint64_t seed) {
  if (folds < 2) throw InvalidArgument("cross-validation needs at least 2 folds");
  if (folds > n) throw InvalidArgument("more folds than observations");
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  Rng rng = make_rng(seed, Stream::folds);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<Index> fold_of(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) fold_of[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = i * folds / n;
  return fold_of;
}

Matrix second_moment(const Matrix& x) {
  Matrix s = Matrix::Zero(x.cols(), x.cols());
  s.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose(), 1.0 / static_cast<double>(x.rows()));
  s.triangularView<Eigen::StrictlyUpper>() = s.transpose();
  return s;
}

double gaussian_neg_loglik(const Matrix& s, const Matrix& theta) {
  Eigen::LLT<Matrix> llt(theta);
  if (llt.info() != Eigen::Success) throw NumericalError("precision matrix is not positive definite");
  const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return 0.5 * ((s.cwiseProduct(theta)).sum() - logdet);
}

namespace {

Matrix rows_of(const Matrix& x, const std::vector<Index>& rows) { return x(rows, Eigen::all); }
Vector rows_of(const Vector& y, const std::vector<Index>& rows) { return y(rows); }

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

// Validation errors of one fold for every grid value.
Vector regression_fold(const Dataset& data, const Selector& selector, const std::vector<Index>& train,
                       const std::vector<Index>& valid, bool refit_ols) {
  const Dataset fold = Dataset::regression(rows_of(data.x(), train), rows_of(data.y(), train), Setting::model_x, {},
                                           data.intercept());
  const Problem problem = make_regression_problem(fold);
  const PathFit fit = selector.fit(problem);
  const auto& rp = std::get<RegressionProblem>(problem);

  Matrix coef;
  if (refit_ols && selector.kind() != SelectorKind::logistic_l1) {
    coef = Matrix::Zero(rp.d(), selector.grid_size());
    for (Index t = 0; t < selector.grid_size(); ++t) {
      const auto& idx = fit.sets[static_cast<std::size_t>(t)].indices();
      if (idx.empty()) continue;
      const Matrix g = (*rp.gram)(idx, idx);
      const Vector b = g.ldlt().solve(rp.xty(idx));
      for (std::size_t i = 0; i < idx.size(); ++i) coef(idx[i], t) = b(static_cast<Index>(i));
    }
  } else {
    coef = path_coefficients(selector, problem, fit);
  }

  const Standardization& st = fold.standardization();
  Matrix zv = rows_of(data.x(), valid);
  zv = (zv.rowwise() - st.center.transpose()).array().rowwise() / st.scale.transpose().array();
  const Vector yv = rows_of(data.y(), valid);
  Vector err(selector.grid_size());
  for (Index t = 0; t < selector.grid_size(); ++t) {
    if (selector.kind() == SelectorKind::logistic_l1) {
      const Vector eta = (zv * coef.col(t).tail(rp.d())).array() + coef(0, t);
      double loss = 0.0;
      for (Index i = 0; i < eta.size(); ++i) loss += softplus(eta(i)) - yv(i) * eta(i);
      err(t) = loss / static_cast<double>(eta.size());
    } else {
      const Vector pred = (zv * coef.col(t)).array() + st.response_center;
      err(t) = (yv - pred).squaredNorm() / static_cast<double>(yv.size());
    }
  }
  return err;
}

Vector graphical_fold(const Dataset& data, const Selector& selector, const std::vector<Index>& train,
                      const std::vector<Index>& valid) {
  const Matrix s_train = second_moment(rows_of(data.x(), train));
  const Matrix s_valid = second_moment(rows_of(data.x(), valid));
  GraphicalProblem problem;
  problem.n = static_cast<Index>(train.size());
  problem.cov = std::make_shared<const Matrix>(s_train);
  const PathFit fit = selector.fit(problem);
  const Index pairs = pair_count(data.d());
  Vector err(selector.grid_size());
  for (Index t = 0; t < selector.grid_size(); ++t) {
    const Matrix theta = constrained_mle_graphical(s_train, complement(fit.sets[static_cast<std::size_t>(t)], pairs));
    err(t) = gaussian_neg_loglik(s_valid, theta);
  }
  return err;
}

void check_metric(const Dataset& data, const Selector& selector, CvMetric metric) {
  switch (selector.kind()) {
    case SelectorKind::lasso:
    case SelectorKind::forward_stepwise:
      if (metric != CvMetric::mse) throw InvalidArgument("cv: use the mse metric for linear selectors");
      if (data.setting() == Setting::gaussian_graphical) throw InvalidArgument("cv: selector needs a response");
      return;
    case SelectorKind::logistic_l1:
    case SelectorKind::graphical_lasso:
      if (metric != CvMetric::neg_loglik) throw InvalidArgument("cv: use the neg_loglik metric for this selector");
      if ((selector.kind() == SelectorKind::graphical_lasso) != (data.setting() == Setting::gaussian_graphical))
        throw InvalidArgument("cv: selector does not match the dataset setting");
      return;
    default:
      throw InvalidArgument("cv: no prediction rule for selector " + selector.name());
  }
}

}  // namespace

CvCurve cv_curve(const Dataset& data, const Selector& selector, CvMetric metric, const CvOptions& options) {
  return cv_curve(data, selector, metric, assign_folds(data.n(), options.folds, options.seed), options);
}

CvCurve cv_curve(const Dataset& data, const Selector& selector, CvMetric metric, const std::vector<Index>& fold_of,
                 const CvOptions& options) {
  check_metric(data, selector, metric);
  if (static_cast<Index>(fold_of.size()) != data.n()) throw InvalidArgument("cv: fold assignment has the wrong length");
  const Index folds = *std::max_element(fold_of.begin(), fold_of.end()) + 1;
  if (folds < 2) throw InvalidArgument("cross-validation needs at least 2 folds");

  const Index grid = selector.grid_size();
  Matrix errors(folds, grid);
  detail::parallel_for(folds, options.workers, [&](Index f) {
    std::vector<Index> train, valid;
    for (Index i = 0; i < data.n(); ++i) (fold_of[static_cast<std::size_t>(i)] == f ? valid : train).push_back(i);
    if (valid.empty() || train.size() < 2) throw DataError("cv: fold " + std::to_string(f + 1) + " is too small");
    try {
      errors.row(f) = data.setting() == Setting::gaussian_graphical
                          ? graphical_fold(data, selector, train, valid)
                          : regression_fold(data, selector, train, valid, options.refit_ols);
    } catch (const DataError& e) {
      throw DataError("cv: fold " + std::to_string(f + 1) + " is too small for a refit: " + e.what());
    }
  });

  CvCurve curve;
  curve.grid = selector.grid();
  curve.metric = metric;
  curve.fold_errors = errors;
  curve.fold_of = fold_of;
  curve.mean_error = errors.colwise().mean();
  const double k = static_cast<double>(folds);
  curve.se_error = ((errors.rowwise() - curve.mean_error.transpose()).array().square().colwise().sum() / (k - 1.0))
                       .sqrt()
                       .transpose() /
                   std::sqrt(k);
  curve.mean_error.minCoeff(&curve.index_min);
  curve.index_1se = one_se_index(curve.mean_error, curve.se_error);
  curve.lambda_min = curve.grid(curve.index_min);
  curve.lambda_1se = curve.grid(curve.index_1se);
  return curve;
}

Index one_se_index(const Vector& mean_error, const Vector& se_error) {
  if (mean_error.size() == 0 || mean_error.size() != se_error.size())
    throw InvalidArgument("one_se_rule: invalid curve");
  Index best = 0;
  mean_error.minCoeff(&best);
  const double limit = mean_error(best) + se_error(best);
  for (Index t = 0; t <= best; ++t)
    if (mean_error(t) <= limit) return t;
  return best;
}

double one_se_rule(const CvCurve& curve) { return curve.grid(one_se_index(curve.mean_error, curve.se_error)); }

}  // namespace hfdr
