#include "hfdr/selectors.hpp"

#include <algorithm>
#include <cmath>

namespace hfdr {

namespace {

inline double soft_threshold(double z, double lambda) {
  if (z > lambda) return z - lambda;
  if (z < -lambda) return z + lambda;
  return 0.0;
}

inline double sign(double x) { return (x > 0) - (x < 0); }

SelectionSet support(const Vector& beta) {
  std::vector<Index> idx;
  for (Index i = 0; i < beta.size(); ++i)
    if (beta(i) != 0.0) idx.push_back(i);
  return SelectionSet(std::move(idx));
}

void check_lambda(double lambda, const char* who) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw InvalidArgument(std::string(who) + ": lambda must be finite and non-negative");
}

}  // namespace

std::string to_string(SelectorKind k) {
  switch (k) {
    case SelectorKind::lasso: return "lasso";
    case SelectorKind::forward_stepwise: return "forward_stepwise";
    case SelectorKind::graphical_lasso: return "graphical_lasso";
    case SelectorKind::logistic_l1: return "logistic_l1";
    case SelectorKind::p_threshold: return "p_threshold";
    case SelectorKind::custom: return "custom";
  }
  return "unknown";
}

SelectorKind parse_selector_kind(std::string_view s) {
  if (s == "lasso") return SelectorKind::lasso;
  if (s == "forward_stepwise" || s == "fs") return SelectorKind::forward_stepwise;
  if (s == "graphical_lasso" || s == "glasso") return SelectorKind::graphical_lasso;
  if (s == "logistic_l1" || s == "logistic") return SelectorKind::logistic_l1;
  if (s == "p_threshold" || s == "pvalue") return SelectorKind::p_threshold;
  throw InvalidArgument("unknown selector '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Lasso

double lasso_kkt_residual(const Matrix& gram, const Vector& xty, const Vector& beta, double lambda) {
  Vector g = xty;
  for (Index i = 0; i < beta.size(); ++i)
    if (beta(i) != 0.0) g.noalias() -= gram.col(i) * beta(i);
  double worst = 0.0;
  for (Index i = 0; i < beta.size(); ++i) {
    const double r = beta(i) != 0.0 ? std::abs(g(i) - lambda * sign(beta(i))) : std::max(0.0, std::abs(g(i)) - lambda);
    worst = std::max(worst, r);
  }
  return worst;
}

LassoFit lasso_fit(const Matrix& gram, const Vector& xty, double lambda, const SolverOptions& opts,
                   const Vector* warm_start) {
  check_lambda(lambda, "lasso_fit");
  const Index d = xty.size();
  if (gram.rows() != d || gram.cols() != d) throw InvalidArgument("lasso_fit: Gram matrix shape mismatch");
  if (!(opts.tol > 0)) throw InvalidArgument("lasso_fit: tol must be positive");

  Vector beta = Vector::Zero(d);
  if (warm_start) {
    if (warm_start->size() != d) throw InvalidArgument("lasso_fit: warm start has wrong length");
    beta = *warm_start;
  }
  Vector g = xty;
  for (Index i = 0; i < d; ++i)
    if (beta(i) != 0.0) g.noalias() -= gram.col(i) * beta(i);

  auto update = [&](Index i) {
    const double gii = gram(i, i);
    if (gii <= 0.0) return 0.0;
    const double old = beta(i);
    const double nb = soft_threshold(g(i) + gii * old, lambda) / gii;
    if (nb == old) return 0.0;
    const double delta = nb - old;
    g.noalias() -= gram.col(i) * delta;
    beta(i) = nb;
    return std::abs(delta);
  };

  int iters = 0;
  std::vector<Index> active;
  auto fail = [&] {
    throw ConvergenceError("lasso did not converge at lambda " + std::to_string(lambda),
                           lasso_kkt_residual(gram, xty, beta, lambda));
  };
  for (;;) {
    double change = 0.0;
    for (Index i = 0; i < d; ++i) change = std::max(change, update(i));
    ++iters;
    if (change < opts.tol) break;
    if (iters >= opts.max_iters) fail();
    active.clear();
    for (Index i = 0; i < d; ++i)
      if (beta(i) != 0.0) active.push_back(i);
    for (;;) {
      double inner = 0.0;
      for (Index i : active) inner = std::max(inner, update(i));
      ++iters;
      if (inner < opts.tol) break;
      if (iters >= opts.max_iters) fail();
    }
  }

  LassoFit fit;
  fit.iterations = iters;
  fit.active_set = support(beta);
  fit.duals = xty;
  for (Index i : fit.active_set) fit.duals.noalias() -= gram.col(i) * beta(i);
  fit.coefficients = std::move(beta);
  fit.kkt_residual = lasso_kkt_residual(gram, xty, fit.coefficients, lambda);
  return fit;
}

LassoFit lasso_fit(const Dataset& data, double lambda, const SolverOptions& opts) {
  const RegressionProblem p = make_regression_problem(data);
  return lasso_fit(*p.gram, p.xty, lambda, opts);
}

// ---------------------------------------------------------------------------
// Forward stepwise

std::vector<Index> forward_stepwise(const Matrix& gram, const Vector& xty, Index k) {
  const Index d = xty.size();
  if (k < 0 || k > d) throw InvalidArgument("forward_stepwise: k must lie in [0, d]");
  Matrix rg = gram;
  Vector rc = xty;
  std::vector<char> chosen(static_cast<std::size_t>(d), 0);
  std::vector<Index> order;
  order.reserve(static_cast<std::size_t>(k));
  for (Index step = 0; step < k; ++step) {
    Index best = -1;
    double best_score = -1.0;
    for (Index l = 0; l < d; ++l) {
      if (chosen[static_cast<std::size_t>(l)]) continue;
      const double dl = rg(l, l);
      if (!(dl > 1e-10 * std::max(gram(l, l), 1e-300)))
        throw RankDeficiency("forward_stepwise: column " + std::to_string(l + 1) +
                                 " is collinear with the selected columns",
                             l);
      const double score = std::abs(rc(l)) / std::sqrt(dl);
      if (score > best_score) {
        best_score = score;
        best = l;
      }
    }
    order.push_back(best);
    chosen[static_cast<std::size_t>(best)] = 1;
    const Vector col = rg.col(best);
    const double pivot = col(best);
    rc.noalias() -= col * (rc(best) / pivot);
    rg.noalias() -= col * (col.transpose() / pivot);
  }
  return order;
}

std::vector<Index> forward_stepwise(const Dataset& data, Index k) {
  const Index limit = std::min(data.d(), data.n() - 1);
  if (k < 0 || k > limit) throw InvalidArgument("forward_stepwise: k must lie in [0, min(d, n - 1)]");
  const RegressionProblem p = make_regression_problem(data);
  return forward_stepwise(*p.gram, p.xty, k);
}

// ---------------------------------------------------------------------------
// Graphical lasso

double glasso_kkt_residual(const Matrix& s, const Matrix& precision, const Matrix& covariance, double lambda) {
  const Index d = s.rows();
  double worst = 0.0;
  for (Index k = 0; k < d; ++k) {
    worst = std::max(worst, std::abs(covariance(k, k) - s(k, k)));
    for (Index j = k + 1; j < d; ++j) {
      const double gap = covariance(j, k) - s(j, k);
      const double t = precision(j, k);
      const double r = t != 0.0 ? std::abs(gap - lambda * sign(t)) : std::max(0.0, std::abs(gap) - lambda);
      worst = std::max(worst, r);
    }
  }
  return worst;
}

namespace {

void validate_covariance(const Matrix& s) {
  if (s.rows() != s.cols() || s.rows() < 1) throw InvalidArgument("graphical_lasso: input must be square");
  if (!s.allFinite()) throw DataError("graphical_lasso: input has non-finite entries");
  const double scale = s.cwiseAbs().maxCoeff();
  if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(scale, 1.0))
    throw InvalidArgument("graphical_lasso: input must be symmetric");
  if (!(s.diagonal().minCoeff() > 0.0)) throw NumericalError("graphical_lasso: input diagonal must be positive");
}

SelectionSet edges_of(const Matrix& precision) {
  const Index d = precision.rows();
  std::vector<Index> idx;
  for (Index j = 0; j < d; ++j)
    for (Index k = j + 1; k < d; ++k)
      if (precision(j, k) != 0.0) idx.push_back(pair_index(j, k, d));
  return SelectionSet(std::move(idx));
}

}  // namespace

GlassoFit graphical_lasso(const Matrix& s, double lambda, const SolverOptions& opts, const GlassoFit* warm_start) {
  check_lambda(lambda, "graphical_lasso");
  validate_covariance(s);
  const Index d = s.rows();
  GlassoFit fit;

  if (lambda == 0.0) {
    Eigen::LLT<Matrix> llt(s);
    if (llt.info() != Eigen::Success) throw NumericalError("graphical_lasso: input is not positive definite");
    fit.precision = llt.solve(Matrix::Identity(d, d));
    fit.precision = 0.5 * (fit.precision + fit.precision.transpose()).eval();
    fit.covariance = s;
    fit.edges = edges_of(fit.precision);
    fit.kkt_residual = glasso_kkt_residual(s, fit.precision, fit.covariance, lambda);
    return fit;
  }

  Matrix w = s;
  Matrix b = Matrix::Zero(d, d);  // column j: regression of variable j on the rest
  if (warm_start) {
    if (warm_start->covariance.rows() != d) throw InvalidArgument("graphical_lasso: warm start has wrong size");
    w = warm_start->covariance;
    w.diagonal() = s.diagonal();
    for (Index j = 0; j < d; ++j) {
      b.col(j) = -warm_start->precision.col(j) / warm_start->precision(j, j);
      b(j, j) = 0.0;
    }
  }

  const double scale = s.diagonal().maxCoeff();
  const double tol = opts.tol * scale;
  const int max_sweeps = std::min(opts.max_iters, 10000);
  Vector wb(d);
  int sweeps = 0;
  for (;;) {
    double change = 0.0;
    for (Index j = 0; j < d; ++j) {
      auto bj = b.col(j);
      wb.noalias() = w * bj;
      int inner_iters = 0;
      for (;;) {
        double inner = 0.0;
        for (Index i = 0; i < d; ++i) {
          if (i == j) continue;
          const double wii = w(i, i);
          const double old = bj(i);
          const double nb = soft_threshold(s(i, j) - (wb(i) - wii * old), lambda) / wii;
          if (nb == old) continue;
          const double delta = nb - old;
          wb.noalias() += w.col(i) * delta;
          bj(i) = nb;
          inner = std::max(inner, std::abs(delta) * wii);
        }
        if (inner < tol) break;
        if (++inner_iters >= opts.max_iters)
          throw ConvergenceError("graphical lasso column solve did not converge at lambda " + std::to_string(lambda),
                                 inner);
      }
      for (Index i = 0; i < d; ++i) {
        if (i == j) continue;
        change = std::max(change, std::abs(wb(i) - w(i, j)));
        w(i, j) = wb(i);
        w(j, i) = wb(i);
      }
    }
    ++sweeps;
    if (change < tol) break;
    if (sweeps >= max_sweeps) {
      Matrix theta = w.inverse();
      throw ConvergenceError("graphical lasso did not converge at lambda " + std::to_string(lambda),
                             glasso_kkt_residual(s, theta, w, lambda));
    }
  }

  Matrix theta(d, d);
  for (Index j = 0; j < d; ++j) {
    const double denom = w(j, j) - w.col(j).dot(b.col(j));
    if (!(denom > 0.0)) throw NumericalError("graphical lasso lost positive definiteness");
    const double tjj = 1.0 / denom;
    theta.col(j) = -b.col(j) * tjj;
    theta(j, j) = tjj;
  }
  fit.precision = 0.5 * (theta + theta.transpose());
  for (Index j = 0; j < d; ++j)
    for (Index k = 0; k < d; ++k)
      if (j != k && b(j, k) == 0.0 && b(k, j) == 0.0) fit.precision(j, k) = 0.0;
  fit.covariance = std::move(w);
  fit.edges = edges_of(fit.precision);
  fit.sweeps = sweeps;
  fit.kkt_residual = glasso_kkt_residual(s, fit.precision, fit.covariance, lambda);
  return fit;
}

// ---------------------------------------------------------------------------
// Logistic regression with an l1 penalty

namespace {

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double logistic_objective(const Vector& eta, const Vector& y, const Vector& beta, double lambda) {
  double f = 0.0;
  for (Index i = 0; i < eta.size(); ++i) f += softplus(eta(i)) - y(i) * eta(i);
  return f + lambda * beta.lpNorm<1>();
}

double logistic_kkt(const Matrix& z, const Vector& y, const Vector& eta, const Vector& beta, double lambda) {
  Vector resid(y.size());
  for (Index i = 0; i < y.size(); ++i) resid(i) = y(i) - sigmoid(eta(i));
  double worst = std::abs(resid.sum());
  const Vector grad = z.transpose() * resid;
  for (Index l = 0; l < beta.size(); ++l) {
    const double r =
        beta(l) != 0.0 ? std::abs(grad(l) - lambda * sign(beta(l))) : std::max(0.0, std::abs(grad(l)) - lambda);
    worst = std::max(worst, r);
  }
  return worst;
}

}  // namespace

LogisticFit logistic_l1(const Matrix& z, const Vector& y, double lambda, const SolverOptions& opts,
                        const LogisticFit* warm_start) {
  check_lambda(lambda, "logistic_l1");
  const Index n = z.rows();
  const Index d = z.cols();
  if (y.size() != n) throw InvalidArgument("logistic_l1: label length mismatch");
  for (Index i = 0; i < n; ++i)
    if (y(i) != 0.0 && y(i) != 1.0) throw DataError("logistic_l1: response must be binary 0/1");
  const double ybar = y.mean();
  if (ybar == 0.0 || ybar == 1.0) throw DataError("logistic_l1: response has a single class");

  double b0 = std::log(ybar / (1.0 - ybar));
  Vector beta = Vector::Zero(d);
  if (warm_start) {
    if (warm_start->coefficients.size() != d) throw InvalidArgument("logistic_l1: warm start has wrong length");
    b0 = warm_start->intercept;
    beta = warm_start->coefficients;
  }
  Vector eta = (z * beta).array() + b0;
  double objective = logistic_objective(eta, y, beta, lambda);

  const int max_outer = 200;
  Vector w(n), rr(n), xw(d);
  int iters = 0;
  bool converged = false;
  for (int outer = 0; outer < max_outer; ++outer) {
    for (Index i = 0; i < n; ++i) {
      const double p = sigmoid(eta(i));
      w(i) = std::max(p * (1.0 - p), 1e-5);
      rr(i) = (y(i) - p) / w(i);
    }
    const double wsum = w.sum();
    xw = (z.array().square().colwise() * w.array()).colwise().sum().transpose();
    const double b0_old = b0;
    const Vector beta_old = beta;

    auto update = [&](Index l) {
      if (xw(l) <= 0.0) return 0.0;
      const double grad = z.col(l).dot(w.cwiseProduct(rr)) + xw(l) * beta(l);
      const double nb = soft_threshold(grad, lambda) / xw(l);
      if (nb == beta(l)) return 0.0;
      const double delta = nb - beta(l);
      rr.noalias() -= z.col(l) * delta;
      beta(l) = nb;
      return std::abs(delta) * std::sqrt(xw(l));
    };
    auto update_intercept = [&] {
      const double delta = w.dot(rr) / wsum;
      b0 += delta;
      rr.array() -= delta;
      return std::abs(delta) * std::sqrt(wsum);
    };
    std::vector<Index> active;
    for (;;) {
      double change = update_intercept();
      for (Index l = 0; l < d; ++l) change = std::max(change, update(l));
      if (++iters >= opts.max_iters) break;
      if (change < opts.tol) break;
      active.clear();
      for (Index l = 0; l < d; ++l)
        if (beta(l) != 0.0) active.push_back(l);
      for (;;) {
        double inner = update_intercept();
        for (Index l : active) inner = std::max(inner, update(l));
        if (++iters >= opts.max_iters || inner < opts.tol) break;
      }
    }

    // Damped step: halve towards the previous iterate while the objective rises.
    Vector eta_new = (z * beta).array() + b0;
    double obj_new = logistic_objective(eta_new, y, beta, lambda);
    for (int halving = 0; halving < 30 && obj_new > objective + 1e-12 * std::abs(objective); ++halving) {
      b0 = 0.5 * (b0 + b0_old);
      beta = 0.5 * (beta + beta_old);
      eta_new = (z * beta).array() + b0;
      obj_new = logistic_objective(eta_new, y, beta, lambda);
    }
    const double step = std::max(std::abs(b0 - b0_old), (beta - beta_old).cwiseAbs().maxCoeff());
    eta = std::move(eta_new);
    objective = obj_new;
    if (step < opts.tol * std::max(1.0, beta.cwiseAbs().maxCoeff())) {
      converged = true;
      break;
    }
    if (iters >= opts.max_iters) break;
  }

  if (lambda == 0.0 && (!converged || eta.cwiseAbs().maxCoeff() > 40.0))
    throw SeparationError("logistic_l1: classes are separable, the unpenalized fit is unbounded");
  const double kkt = logistic_kkt(z, y, eta, beta, lambda);
  if (!converged) throw ConvergenceError("logistic_l1 did not converge at lambda " + std::to_string(lambda), kkt);

  LogisticFit fit;
  fit.intercept = b0;
  fit.active_set = support(beta);
  fit.coefficients = std::move(beta);
  fit.kkt_residual = kkt;
  fit.iterations = iters;
  return fit;
}

LogisticFit logistic_l1(const Dataset& data, double lambda, const SolverOptions& opts) {
  return logistic_l1(data.design(), data.y(), lambda, opts);
}

// ---------------------------------------------------------------------------

SelectionSet p_threshold(const Vector& pvalues, double c) {
  std::vector<Index> idx;
  for (Index j = 0; j < pvalues.size(); ++j)
    if (pvalues(j) <= c) idx.push_back(j);
  return SelectionSet(std::move(idx));
}

Vector log_grid(double lambda_max, Index points, double ratio) {
  if (!(lambda_max > 0.0) || !std::isfinite(lambda_max))
    throw DataError("tuning grid: lambda_max must be positive (is the response constant?)");
  if (points < 1) throw InvalidArgument("tuning grid needs at least one point");
  if (!(ratio > 0.0 && ratio <= 1.0)) throw InvalidArgument("tuning grid ratio must lie in (0, 1]");
  Vector grid(points);
  if (points == 1) {
    grid(0) = lambda_max;
    return grid;
  }
  const double step = std::log(ratio) / static_cast<double>(points - 1);
  for (Index t = 0; t < points; ++t) grid(t) = lambda_max * std::exp(step * static_cast<double>(t));
  grid(points - 1) = lambda_max * ratio;
  return grid;
}

double lasso_lambda_max(const RegressionProblem& p) { return p.xty.cwiseAbs().maxCoeff(); }

double glasso_lambda_max(const Matrix& s) {
  double m = 0.0;
  for (Index k = 0; k < s.cols(); ++k)
    for (Index j = k + 1; j < s.rows(); ++j) m = std::max(m, std::abs(s(j, k)));
  return m;
}

// ---------------------------------------------------------------------------
// Path selectors

LassoSelector::LassoSelector(Vector lambdas, SolverOptions opts) : Selector(std::move(lambdas)), opts_(opts) {
  for (Index t = 0; t < grid().size(); ++t) check_lambda(grid()(t), "LassoSelector");
}

PathFit LassoSelector::fit(const Problem& problem, const PathFit* warm) const {
  const auto& p = problem_as<RegressionProblem>(problem, "lasso");
  PathFit out;
  out.sets.reserve(static_cast<std::size_t>(grid_size()));
  out.states.reserve(static_cast<std::size_t>(grid_size()));
  Vector previous;
  for (Index t = 0; t < grid_size(); ++t) {
    const Vector* start = nullptr;
    Vector warm_vec;
    if (warm && static_cast<Index>(warm->states.size()) == grid_size()) {
      warm_vec = warm->states[static_cast<std::size_t>(t)].col(0);
      start = &warm_vec;
    } else if (t > 0) {
      start = &previous;
    }
    LassoFit f = lasso_fit(*p.gram, p.xty, grid()(t), opts_, start);
    out.sets.push_back(std::move(f.active_set));
    previous = std::move(f.coefficients);
    out.states.emplace_back(previous);
  }
  return out;
}

ForwardStepwiseSelector::ForwardStepwiseSelector(std::vector<Index> steps)
    : Selector(Eigen::Map<const Eigen::Matrix<Index, Eigen::Dynamic, 1>>(steps.data(),
                                                                          static_cast<Index>(steps.size()))
                   .cast<double>()) {
  for (Index k : steps) {
    if (k < 0) throw InvalidArgument("forward stepwise step counts must be non-negative");
    max_steps_ = std::max(max_steps_, k);
  }
}

PathFit ForwardStepwiseSelector::fit(const Problem& problem, const PathFit*) const {
  const auto& p = problem_as<RegressionProblem>(problem, "forward_stepwise");
  const std::vector<Index> order = forward_stepwise(*p.gram, p.xty, max_steps_);
  PathFit out;
  for (Index t = 0; t < grid_size(); ++t) {
    const auto k = static_cast<std::ptrdiff_t>(grid()(t));
    out.sets.emplace_back(std::vector<Index>(order.begin(), order.begin() + k));
  }
  return out;
}

GraphicalLassoSelector::GraphicalLassoSelector(Vector lambdas, SolverOptions opts)
    : Selector(std::move(lambdas)), opts_(opts) {
  for (Index t = 0; t < grid().size(); ++t) check_lambda(grid()(t), "GraphicalLassoSelector");
}

GlassoFit GraphicalLassoSelector::unpack(const Matrix& state) {
  const Index d = state.rows();
  GlassoFit f;
  f.covariance = state.leftCols(d);
  f.precision = state.middleCols(d, d);
  f.kkt_residual = state(0, 2 * d);
  f.edges = edges_of(f.precision);
  return f;
}

PathFit GraphicalLassoSelector::fit(const Problem& problem, const PathFit* warm) const {
  const auto& p = problem_as<GraphicalProblem>(problem, "graphical_lasso");
  const Matrix& s = *p.cov;
  const Index d = s.rows();
  PathFit out;
  GlassoFit previous;
  bool have_previous = false;
  for (Index t = 0; t < grid_size(); ++t) {
    const double lambda = grid()(t);
    GlassoFit f;
    if (warm && static_cast<Index>(warm->states.size()) == grid_size()) {
      GlassoFit w = unpack(warm->states[static_cast<std::size_t>(t)]);
      // The observed optimum stays optimal when the perturbed entries keep
      // their dual feasibility.
      const double tol = w.kkt_residual + opts_.tol * s.diagonal().maxCoeff();
      const double residual = glasso_kkt_residual(s, w.precision, w.covariance, lambda);
      if (residual <= tol) {
        w.kkt_residual = residual;
        f = std::move(w);
      } else {
        f = graphical_lasso(s, lambda, opts_, &w);
      }
    } else {
      f = graphical_lasso(s, lambda, opts_, have_previous && lambda > 0.0 ? &previous : nullptr);
    }
    Matrix state = Matrix::Zero(d, 2 * d + 1);
    state.leftCols(d) = f.covariance;
    state.middleCols(d, d) = f.precision;
    state(0, 2 * d) = f.kkt_residual;
    out.sets.push_back(f.edges);
    out.states.push_back(std::move(state));
    previous = std::move(f);
    have_previous = true;
  }
  return out;
}

LogisticL1Selector::LogisticL1Selector(Vector lambdas, SolverOptions opts)
    : Selector(std::move(lambdas)), opts_(opts) {
  for (Index t = 0; t < grid().size(); ++t) check_lambda(grid()(t), "LogisticL1Selector");
}

PathFit LogisticL1Selector::fit(const Problem& problem, const PathFit* warm) const {
  const auto& p = problem_as<RegressionProblem>(problem, "logistic_l1");
  if (!p.design || !p.raw_response) throw InvalidArgument("logistic_l1: problem lacks design or labels");
  const Index d = p.d();
  PathFit out;
  LogisticFit previous;
  bool have_previous = false;
  for (Index t = 0; t < grid_size(); ++t) {
    LogisticFit start;
    const LogisticFit* sp = nullptr;
    if (warm && static_cast<Index>(warm->states.size()) == grid_size()) {
      const Matrix& st = warm->states[static_cast<std::size_t>(t)];
      start.intercept = st(0, 0);
      start.coefficients = st.col(0).tail(d);
      sp = &start;
    } else if (have_previous) {
      sp = &previous;
    }
    LogisticFit f = logistic_l1(*p.design, *p.raw_response, grid()(t), opts_, sp);
    Matrix state(d + 1, 1);
    state(0, 0) = f.intercept;
    state.col(0).tail(d) = f.coefficients;
    out.sets.push_back(f.active_set);
    out.states.push_back(std::move(state));
    previous = std::move(f);
    have_previous = true;
  }
  return out;
}

PThresholdSelector::PThresholdSelector(Vector thresholds) : Selector(std::move(thresholds)) {
  for (Index t = 0; t < grid().size(); ++t)
    if (!(grid()(t) > 0.0 && grid()(t) < 1.0)) throw InvalidArgument("p-value thresholds must lie in (0, 1)");
}

PathFit PThresholdSelector::fit(const Problem& problem, const PathFit*) const {
  const auto& p = problem_as<PValueProblem>(problem, "p_threshold");
  PathFit out;
  for (Index t = 0; t < grid_size(); ++t) out.sets.push_back(p_threshold(p.pvalues, grid()(t)));
  return out;
}

CallbackSelector::CallbackSelector(Vector grid, Function f, ProblemNeeds needs, std::string name)
    : Selector(std::move(grid)), f_(std::move(f)), needs_(needs), name_(std::move(name)) {
  if (!f_) throw InvalidArgument("CallbackSelector needs a callable");
}

PathFit CallbackSelector::fit(const Problem& problem, const PathFit*) const {
  PathFit out;
  out.sets = f_(problem);
  if (static_cast<Index>(out.sets.size()) != grid_size())
    throw InvalidArgument("custom selector returned " + std::to_string(out.sets.size()) + " selections for a grid of " +
                          std::to_string(grid_size()));
  return out;
}

Matrix path_coefficients(const Selector& selector, const Problem& problem, const PathFit& fit) {
  const Index T = selector.grid_size();
  switch (selector.kind()) {
    case SelectorKind::lasso:
    case SelectorKind::logistic_l1: {
      if (static_cast<Index>(fit.states.size()) != T) throw InvalidArgument("path_coefficients: missing states");
      Matrix out(fit.states.front().rows(), T);
      for (Index t = 0; t < T; ++t) out.col(t) = fit.states[static_cast<std::size_t>(t)].col(0);
      return out;
    }
    case SelectorKind::forward_stepwise: {
      const auto& p = problem_as<RegressionProblem>(problem, "path_coefficients");
      Matrix out = Matrix::Zero(p.d(), T);
      for (Index t = 0; t < T; ++t) {
        const auto& idx = fit.sets[static_cast<std::size_t>(t)].indices();
        if (idx.empty()) continue;
        const Matrix g = (*p.gram)(idx, idx);
        const Vector c = p.xty(idx);
        const Vector b = g.ldlt().solve(c);
        for (std::size_t i = 0; i < idx.size(); ++i) out(idx[i], t) = b(static_cast<Index>(i));
      }
      return out;
    }
    default:
      throw InvalidArgument("path_coefficients: not available for selector " + selector.name());
  }
}

}  // namespace hfdr
