#pragma once

#include "hfdr/problem.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace hfdr {

enum class SelectorKind { lasso, forward_stepwise, graphical_lasso, logistic_l1, p_threshold, custom };

std::string to_string(SelectorKind k);
SelectorKind parse_selector_kind(std::string_view s);

struct SolverOptions {
  int max_iters = 100000;
  double tol = 1e-8;
};

// ---------------------------------------------------------------------------
// Single fits

struct LassoFit {
  Vector coefficients;
  SelectionSet active_set;
  Vector duals;  // nu = Z^T (y - Z beta)
  double kkt_residual = 0.0;
  int iterations = 0;
};

// Coordinate descent on 1/2 b'Gb - c'b + lambda |b|_1, i.e. the Lasso in Gram form.
LassoFit lasso_fit(const Matrix& gram, const Vector& xty, double lambda, const SolverOptions& opts = {},
                   const Vector* warm_start = nullptr);
LassoFit lasso_fit(const Dataset& data, double lambda, const SolverOptions& opts = {});

double lasso_kkt_residual(const Matrix& gram, const Vector& xty, const Vector& beta, double lambda);

// Greedy forward selection on the Gram form. Returns the selection order.
std::vector<Index> forward_stepwise(const Matrix& gram, const Vector& xty, Index k);
std::vector<Index> forward_stepwise(const Dataset& data, Index k);

struct GlassoFit {
  Matrix precision;
  Matrix covariance;  // W = precision^-1 at the optimum
  SelectionSet edges;  // pair indices with a nonzero precision entry
  double kkt_residual = 0.0;
  int sweeps = 0;
};

// Maximizes log det T - tr(S T) - lambda sum_{j != k} |T_jk|. The diagonal is
// not penalized, so the edge set is empty once lambda >= max_{j<k} |S_jk|.
GlassoFit graphical_lasso(const Matrix& s, double lambda, const SolverOptions& opts = {},
                          const GlassoFit* warm_start = nullptr);

// Largest stationarity violation of a candidate (precision, covariance) pair for `s`.
double glasso_kkt_residual(const Matrix& s, const Matrix& precision, const Matrix& covariance, double lambda);

struct LogisticFit {
  double intercept = 0.0;
  Vector coefficients;
  SelectionSet active_set;
  double kkt_residual = 0.0;
  int iterations = 0;
};

// Penalized negative log-likelihood with an unpenalized intercept.
LogisticFit logistic_l1(const Matrix& design, const Vector& labels, double lambda, const SolverOptions& opts = {},
                        const LogisticFit* warm_start = nullptr);
LogisticFit logistic_l1(const Dataset& data, double lambda, const SolverOptions& opts = {});

SelectionSet p_threshold(const Vector& pvalues, double c);

// ---------------------------------------------------------------------------
// Tuning grids

// Log-spaced from lambda_max down to ratio * lambda_max.
Vector log_grid(double lambda_max, Index points = 10, double ratio = 0.01);
double lasso_lambda_max(const RegressionProblem& p);
double glasso_lambda_max(const Matrix& s);

// ---------------------------------------------------------------------------
// Path interface

// Selections along a tuning grid, plus selector-specific state per grid
// point used to warm-start fits on nearby data.
struct PathFit {
  std::vector<SelectionSet> sets;
  std::vector<Matrix> states;
};

class Selector {
 public:
  explicit Selector(Vector grid) : grid_(std::move(grid)) {}
  virtual ~Selector() = default;

  virtual SelectorKind kind() const = 0;
  virtual std::string name() const { return to_string(kind()); }
  virtual ProblemNeeds needs() const { return {}; }

  // Grid ordered from the most to the least regularized value.
  const Vector& grid() const { return grid_; }
  Index grid_size() const { return grid_.size(); }

  virtual PathFit fit(const Problem& problem, const PathFit* warm = nullptr) const = 0;

 private:
  Vector grid_;
};

class LassoSelector : public Selector {
 public:
  explicit LassoSelector(Vector lambdas, SolverOptions opts = {});
  SelectorKind kind() const override { return SelectorKind::lasso; }
  PathFit fit(const Problem& problem, const PathFit* warm = nullptr) const override;
  const SolverOptions& options() const { return opts_; }

 private:
  SolverOptions opts_;
};

class ForwardStepwiseSelector : public Selector {
 public:
  // Grid holds the step counts k.
  explicit ForwardStepwiseSelector(std::vector<Index> steps);
  SelectorKind kind() const override { return SelectorKind::forward_stepwise; }
  PathFit fit(const Problem& problem, const PathFit* warm = nullptr) const override;
  Index max_steps() const { return max_steps_; }

 private:
  Index max_steps_ = 0;
};

class GraphicalLassoSelector : public Selector {
 public:
  explicit GraphicalLassoSelector(Vector lambdas, SolverOptions opts = {});
  SelectorKind kind() const override { return SelectorKind::graphical_lasso; }
  PathFit fit(const Problem& problem, const PathFit* warm = nullptr) const override;

  // Unpacks the per-grid state into a fit usable as a warm start.
  static GlassoFit unpack(const Matrix& state);

 private:
  SolverOptions opts_;
};

class LogisticL1Selector : public Selector {
 public:
  explicit LogisticL1Selector(Vector lambdas, SolverOptions opts = {});
  SelectorKind kind() const override { return SelectorKind::logistic_l1; }
  ProblemNeeds needs() const override { return {true, true}; }
  PathFit fit(const Problem& problem, const PathFit* warm = nullptr) const override;

 private:
  SolverOptions opts_;
};

class PThresholdSelector : public Selector {
 public:
  explicit PThresholdSelector(Vector thresholds);
  SelectorKind kind() const override { return SelectorKind::p_threshold; }
  PathFit fit(const Problem& problem, const PathFit* warm = nullptr) const override;
};

// Any user procedure; it receives the (possibly resampled) problem and returns
// one selection per grid value.
class CallbackSelector : public Selector {
 public:
  using Function = std::function<std::vector<SelectionSet>(const Problem&)>;
  CallbackSelector(Vector grid, Function f, ProblemNeeds needs = {}, std::string name = "custom");
  SelectorKind kind() const override { return SelectorKind::custom; }
  std::string name() const override { return name_; }
  ProblemNeeds needs() const override { return needs_; }
  PathFit fit(const Problem& problem, const PathFit* warm = nullptr) const override;

 private:
  Function f_;
  ProblemNeeds needs_;
  std::string name_;
};

// Coefficients on the standardized scale for each grid point, for prediction
// (Lasso and logistic: the penalized solution; FS: OLS on the selected set).
// For logistic fits row 0 is the intercept.
Matrix path_coefficients(const Selector& selector, const Problem& problem, const PathFit& fit);

}  // namespace hfdr
