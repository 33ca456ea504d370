#include "hfdr/bootstrap.hpp"

#include "parallel.hpp"

#include <cmath>
#include <numbers>

namespace hfdr {

NullSetEstimate pvalue_null_set(const Vector& pvalues, double threshold) {
  std::vector<Index> h0;
  for (Index j = 0; j < pvalues.size(); ++j) {
    if (!(pvalues(j) >= 0.0 && pvalues(j) <= 1.0)) throw InvalidArgument("p-values must lie in [0, 1]");
    if (pvalues(j) > threshold) h0.push_back(j);
  }
  NullSetEstimate out;
  out.h0_hat = SelectionSet(std::move(h0));
  out.source = NullSetSource::pvalue_rule;
  return out;
}

LinearModel constrained_mle_linear(const Dataset& data, const SelectionSet& h0_hat) {
  if (!data.has_response()) throw InvalidArgument("constrained_mle_linear: dataset has no response");
  const Index d = data.d();
  const std::vector<Index> keep = complement(h0_hat, d).indices();
  const Index m = static_cast<Index>(keep.size());
  const Index n = data.n();
  if (m + (data.intercept() ? 1 : 0) > n) throw InvalidArgument("constrained_mle_linear: too many retained columns");

  Matrix x = data.x()(Eigen::all, keep);
  Vector y = data.y();
  Vector xmean = Vector::Zero(m);
  double ymean = 0.0;
  if (data.intercept()) {
    xmean = x.colwise().mean();
    ymean = y.mean();
    x.rowwise() -= xmean.transpose();
    y.array() -= ymean;
  }
  LinearModel model;
  model.theta = Vector::Zero(d);
  Vector coef = Vector::Zero(m);
  if (m > 0) {
    Eigen::ColPivHouseholderQR<Matrix> qr(x);
    qr.setThreshold(1e-10);
    if (qr.rank() < m) {
      const Index col = keep[static_cast<std::size_t>(qr.colsPermutation().indices()(qr.rank()))];
      throw RankDeficiency("constrained MLE: column " + std::to_string(col + 1) + " is linearly dependent", col);
    }
    coef = qr.solve(y);
  }
  for (Index i = 0; i < m; ++i) model.theta(keep[static_cast<std::size_t>(i)]) = coef(i);
  model.intercept = ymean - xmean.dot(coef);
  model.sigma = std::sqrt((y - x * coef).squaredNorm() / static_cast<double>(n));
  return model;
}

double pd_margin(const Matrix& theta) { return 1e-4 * theta.trace() / static_cast<double>(theta.rows()); }

Matrix constrained_mle_graphical(const Matrix& s, const SelectionSet& h0_hat) {
  const Index d = s.rows();
  Eigen::LLT<Matrix> llt(s);
  if (llt.info() != Eigen::Success) throw NumericalError("constrained MLE: sample covariance is singular");
  Matrix theta = llt.solve(Matrix::Identity(d, d));
  theta = 0.5 * (theta + theta.transpose());
  for (Index h : h0_hat) {
    const HypothesisId id = pair_from_index(h, d);
    theta(id.j, id.k) = 0.0;
    theta(id.k, id.j) = 0.0;
  }
  const double margin = pd_margin(theta);
  const double lmin = Eigen::SelfAdjointEigenSolver<Matrix>(theta, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
  if (lmin < margin) theta.diagonal().array() += margin - lmin;
  return theta;
}

NullSetEstimate cv_null_set(const Dataset& data, const Selector& selector, const CvOptions& options) {
  Index best = 0;
  if (data.setting() == Setting::gaussian_graphical) {
    best = cv_curve(data, selector, CvMetric::neg_loglik, options).index_min;
  } else if (data.setting() == Setting::gaussian_linear) {
    if (selector.kind() != SelectorKind::lasso && selector.kind() != SelectorKind::forward_stepwise)
      throw InvalidArgument("cv_null_set: linear selectors only");
    const std::vector<Index> fold_of = assign_folds(data.n(), options.folds, options.seed);
    const Index grid = selector.grid_size();
    Matrix scores(options.folds, grid);
    detail::parallel_for(options.folds, options.workers, [&](Index f) {
      std::vector<Index> train, valid;
      for (Index i = 0; i < data.n(); ++i) (fold_of[static_cast<std::size_t>(i)] == f ? valid : train).push_back(i);
      const Dataset fold =
          Dataset::regression(data.x()(train, Eigen::all), data.y()(train), Setting::model_x, {}, data.intercept());
      const PathFit fit = selector.fit(make_regression_problem(fold));
      const Matrix xv = data.x()(valid, Eigen::all);
      const Vector yv = data.y()(valid);
      for (Index t = 0; t < grid; ++t) {
        LinearModel model;
        try {
          model = constrained_mle_linear(fold, complement(fit.sets[static_cast<std::size_t>(t)], data.d()));
        } catch (const Error& e) {
          throw NumericalError("cv_null_set: constrained MLE failed on fold " + std::to_string(f + 1) + ": " +
                               e.what());
        }
        if (!(model.sigma > 0.0)) throw NumericalError("cv_null_set: zero residual variance on a training fold");
        const Vector resid = (yv - xv * model.theta).array() - model.intercept;
        const double var = model.sigma * model.sigma;
        scores(f, t) = 0.5 * std::log(2.0 * std::numbers::pi * var) +
                       resid.squaredNorm() / (2.0 * var * static_cast<double>(valid.size()));
      }
    });
    scores.colwise().mean().minCoeff(&best);
  } else {
    throw InvalidArgument("cv_null_set: parametric settings only; use pvalue_null_set for model-X");
  }
  const PathFit full = selector.fit(make_problem(data));
  NullSetEstimate out;
  out.h0_hat = complement(full.sets[static_cast<std::size_t>(best)], data.num_hypotheses());
  out.source = NullSetSource::cv_complement;
  out.lambda_cv = selector.grid()(best);
  return out;
}

Vector column_sd(const Matrix& replicates) {
  const double m = static_cast<double>(replicates.rows());
  if (replicates.rows() < 2) throw InvalidArgument("standard deviation needs at least two replicates");
  const Eigen::RowVectorXd mean = replicates.colwise().mean();
  return ((replicates.rowwise() - mean).array().square().colwise().sum() / (m - 1.0)).sqrt().transpose();
}

namespace {

[[noreturn]] void rethrow_replicate(Index b) {
  const std::string context = "bootstrap replicate " + std::to_string(b + 1) + ": ";
  try {
    throw;
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(context + e.what());
  } catch (const DataError& e) {
    throw DataError(context + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(context + e.what());
  }
}

template <typename Draw>
BootstrapResult run_replicates(const Selector& selector, const HfdrConfig& cfg, const BootstrapOptions& options,
                               Draw&& draw) {
  if (options.replicates < 2) throw InvalidArgument("bootstrap needs at least two replicates");
  BootstrapResult out;
  out.replicates.resize(options.replicates, selector.grid_size());
  for (Index b = 0; b < options.replicates; ++b) {
    try {
      Rng rng = make_rng(cfg.seed, Stream::bootstrap, b);
      const Dataset boot = draw(rng);
      LawOptions law_options = options.laws;
      law_options.seed = derive_seed(cfg.seed, Stream::bootstrap, b, 1);
      HfdrConfig sub = cfg;
      sub.seed = derive_seed(cfg.seed, Stream::bootstrap, b, 2);
      out.replicates.row(b) = estimate_hfdr(make_laws(boot, law_options), selector, sub).hfdr.transpose();
    } catch (const Error&) {
      rethrow_replicate(b);
    }
  }
  out.se = column_sd(out.replicates);
  return out;
}

}  // namespace

BootstrapResult bootstrap_se_parametric(const Dataset& data, const Selector& selector, const HfdrConfig& cfg,
                                        const SelectionSet& h0_hat, const BootstrapOptions& options) {
  std::normal_distribution<double> normal;
  if (data.setting() == Setting::gaussian_linear) {
    const LinearModel model = constrained_mle_linear(data, h0_hat);
    const Vector mean = (data.x() * model.theta).array() + model.intercept;
    return run_replicates(selector, cfg, options, [&](Rng& rng) {
      Vector y(data.n());
      for (Index i = 0; i < y.size(); ++i) y(i) = mean(i) + model.sigma * normal(rng);
      return Dataset::regression(data.x(), std::move(y), Setting::gaussian_linear, data.column_names(),
                                 data.intercept());
    });
  }
  if (data.setting() == Setting::gaussian_graphical) {
    const Matrix theta = constrained_mle_graphical(second_moment(data.x()), h0_hat);
    const Matrix sigma = theta.llt().solve(Matrix::Identity(data.d(), data.d()));
    const Matrix factor = sigma.llt().matrixU();
    return run_replicates(selector, cfg, options, [&](Rng& rng) {
      Matrix z(data.n(), data.d());
      for (Index i = 0; i < z.rows(); ++i)
        for (Index j = 0; j < z.cols(); ++j) z(i, j) = normal(rng);
      return Dataset::graphical(z * factor, data.column_names());
    });
  }
  throw InvalidArgument("parametric bootstrap needs the gaussian_linear or gaussian_graphical setting");
}

std::pair<Matrix, Vector> modelx_bootstrap_draw(const Dataset& data, const CovariateLaw& law,
                                                const SelectionSet& h0_hat, Rng& rng) {
  std::uniform_int_distribution<Index> pick(0, data.n() - 1);
  std::vector<Index> rows(static_cast<std::size_t>(data.n()));
  for (auto& r : rows) r = pick(rng);
  Matrix x = data.x()(rows, Eigen::all);
  Vector y = data.y()(rows);
  law.resample_block(h0_hat.indices(), x, rng);
  return {std::move(x), std::move(y)};
}

BootstrapResult bootstrap_se_modelx(const Dataset& data, const Selector& selector, const HfdrConfig& cfg,
                                    const SelectionSet& h0_hat, const BootstrapOptions& options) {
  if (data.setting() != Setting::model_x) throw InvalidArgument("model-X bootstrap needs the model_x setting");
  if (!options.laws.covariate_law) throw InvalidArgument("model-X bootstrap needs a declared covariate law");
  const CovariateLaw& law = *options.laws.covariate_law;
  return run_replicates(selector, cfg, options, [&](Rng& rng) {
    auto [x, y] = modelx_bootstrap_draw(data, law, h0_hat, rng);
    return Dataset::regression(std::move(x), std::move(y), Setting::model_x, data.column_names(), data.intercept());
  });
}

}  // namespace hfdr
